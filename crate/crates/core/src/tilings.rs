//! Finite decorated patches of tilings consistent with a complex, and the winding check.
//!
//! Generators: binary sequences (mechanical word or substitution), canonical (n, d)
//! cut-and-project by the dual method, and square-triangle inflation. Tile translations are
//! kept exactly in the complex's frequency coordinates; floats are derived from them.

use crate::error::{Error, Result};
use crate::fbs::{FbsComplex, Prototile};
use crate::presets::{canonical_tile_name, square_triangle as st};
use crate::rational::{self, QVec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub struct TileInstance {
    pub name: String,
    /// Index into the complex's effective prototiles, once resolved.
    pub prototile: Option<usize>,
    /// Position of the prototile origin.
    pub translation: Vec<f64>,
    /// The same, in frequency coordinates, when known.
    pub exact: Option<QVec>,
}

#[derive(Clone, Debug)]
pub struct DecoratedPattern {
    pub dim: usize,
    pub radius: f64,
    pub species: Vec<String>,
    pub weights: Vec<Complex64>,
    pub tiles: Vec<TileInstance>,
    /// Per species, flat point coordinates (`dim` per point) inside the ball of radius `radius`.
    pub points: Vec<Vec<f64>>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

impl DecoratedPattern {
    /// Populate decoration points from a tile list.
    pub fn from_tiles(f: &FbsComplex, mut tiles: Vec<TileInstance>, radius: f64) -> Result<Self> {
        let d = f.dim();
        let offsets = f.decoration_offsets()?;
        let realized: Vec<Vec<(usize, Vec<f64>)>> = offsets
            .iter()
            .map(|v| v.iter().map(|(p, o)| (*p, f.basis().realize(o))).collect())
            .collect();
        tiles.sort_by(|a, b| lex(&a.translation, &b.translation).then_with(|| a.name.cmp(&b.name)));
        let mut pts: Vec<Vec<Vec<f64>>> = vec![Vec::new(); f.decorations.len()];
        for t in &tiles {
            let k = t.prototile.ok_or_else(|| Error::Structural(format!("unresolved prototile {}", t.name)))?;
            for (p, off) in &realized[k] {
                let y: Vec<f64> = t.translation.iter().zip(off).map(|(a, b)| a + b).collect();
                if norm(&y) <= radius {
                    pts[*p].push(y);
                }
            }
        }
        let points = pts
            .into_iter()
            .map(|mut v| {
                v.sort_by(|a, b| lex(a, b));
                v.into_iter().flatten().collect()
            })
            .collect();
        Ok(DecoratedPattern {
            dim: d,
            radius,
            species: f.species(),
            weights: f.decorations.iter().map(|x| x.weight).collect(),
            tiles,
            points,
        })
    }

    pub fn count(&self, p: usize) -> usize {
        self.points[p].len() / self.dim.max(1)
    }

    pub fn point(&self, p: usize, i: usize) -> &[f64] {
        &self.points[p][i * self.dim..(i + 1) * self.dim]
    }

    pub fn ball_volume(&self) -> f64 {
        ball_volume(self.dim, self.radius)
    }

    /// Set prototile indices from names.
    pub fn resolve(&mut self, f: &FbsComplex) -> Result<()> {
        let protos = f.effective_prototiles();
        for t in &mut self.tiles {
            let k = protos
                .iter()
                .position(|p| p.name == t.name)
                .ok_or_else(|| Error::Structural(format!("pattern tile '{}' is not a prototile of the complex", t.name)))?;
            t.prototile = Some(k);
        }
        Ok(())
    }

    /// The pattern translated by `t` (all points and tiles).
    pub fn translated(&self, t: &[f64]) -> Self {
        let mut out = self.clone();
        for pts in &mut out.points {
            for (i, x) in pts.iter_mut().enumerate() {
                *x += t[i % self.dim];
            }
        }
        for tile in &mut out.tiles {
            for (x, s) in tile.translation.iter_mut().zip(t) {
                *x += s;
            }
            tile.exact = None;
        }
        out
    }

    /// Minimum distance between distinct points of each species.
    pub fn min_separation(&self) -> Vec<f64> {
        (0..self.species.len()).map(|p| min_distance(&self.points[p], self.dim)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# decorated pattern");
        let _ = writeln!(s, "radius {}", self.radius);
        let _ = writeln!(s, "dimension {}", self.dim);
        let _ = writeln!(s, "species {}", self.species.join(" "));
        let w: Vec<String> = self.weights.iter().map(|w| format!("{} {}", w.re, w.im)).collect();
        let _ = writeln!(s, "weights {}", w.join(" "));
        let mut rows: Vec<(&[f64], usize)> = Vec::new();
        for p in 0..self.species.len() {
            for i in 0..self.count(p) {
                rows.push((self.point(p, i), p));
            }
        }
        rows.sort_by(|a, b| lex(a.0, b.0).then(a.1.cmp(&b.1)));
        let _ = writeln!(s, "points {}", rows.len());
        for (x, p) in rows {
            let _ = writeln!(s, "{} {}", self.species[p], join_f64(x));
        }
        let _ = writeln!(s, "tiles {}", self.tiles.len());
        for t in &self.tiles {
            let _ = writeln!(s, "{} {}", t.name, join_f64(&t.translation));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("pattern file: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let mut field = |key: &str| -> Result<Vec<String>> {
            let l = lines.next().ok_or_else(|| bad(&format!("missing '{key}'")))?;
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(bad(&format!("expected '{key}', got '{l}'")));
            }
            Ok(it.map(String::from).collect())
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number '{s}'")));
        let radius = num(field("radius")?.first().ok_or_else(|| bad("empty radius"))?)?;
        let dim: usize = field("dimension")?.first().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad dimension"))?;
        let species = field("species")?;
        let w = field("weights")?;
        if w.len() != 2 * species.len() {
            return Err(bad("weights need a real and imaginary part per species"));
        }
        let weights = w.chunks(2).map(|c| Ok(Complex64::new(num(&c[0])?, num(&c[1])?))).collect::<Result<Vec<_>>>()?;
        let np: usize = field("points")?.first().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad point count"))?;
        let mut points = vec![Vec::new(); species.len()];
        let mut rest: Vec<&str> = Vec::new();
        for l in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).skip(5) {
            rest.push(l);
        }
        if rest.len() < np + 1 {
            return Err(bad("truncated point section"));
        }
        for l in &rest[..np] {
            let mut it = l.split_whitespace();
            let sp = it.next().ok_or_else(|| bad("empty row"))?;
            let p = species.iter().position(|s| s == sp).ok_or_else(|| bad(&format!("unknown species '{sp}'")))?;
            let xs = it.map(num).collect::<Result<Vec<_>>>()?;
            if xs.len() != dim {
                return Err(bad(&format!("row '{l}' has wrong dimension")));
            }
            points[p].extend(xs);
        }
        let mut it = rest[np].split_whitespace();
        if it.next() != Some("tiles") {
            return Err(bad("expected 'tiles'"));
        }
        let nt: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad tile count"))?;
        if rest.len() != np + 1 + nt {
            return Err(bad("tile section length mismatch"));
        }
        let mut tiles = Vec::with_capacity(nt);
        for l in &rest[np + 1..] {
            let mut it = l.split_whitespace();
            let name = it.next().ok_or_else(|| bad("empty row"))?.to_string();
            let translation = it.map(num).collect::<Result<Vec<_>>>()?;
            if translation.len() != dim {
                return Err(bad(&format!("tile row '{l}' has wrong dimension")));
            }
            tiles.push(TileInstance { name, prototile: None, translation, exact: None });
        }
        Ok(DecoratedPattern { dim, radius, species, weights, tiles, points })
    }
}

fn join_f64(x: &[f64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn ball_volume(d: usize, r: f64) -> f64 {
    match d {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        3 => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
        _ => {
            // π^{d/2} r^d / Γ(d/2 + 1)
            let mut v = 1.0;
            let mut k = d;
            while k >= 2 {
                v *= 2.0 * std::f64::consts::PI / k as f64;
                k -= 2;
            }
            if d % 2 == 1 {
                v *= 2.0;
            }
            v * r.powi(d as i32)
        }
    }
}

fn min_distance(flat: &[f64], d: usize) -> f64 {
    let n = flat.len() / d.max(1);
    if n < 2 {
        return f64::INFINITY;
    }
    // grid with cell size from the mean spacing, then refine within neighbouring cells
    let lo: Vec<f64> = (0..d).map(|j| (0..n).map(|i| flat[i * d + j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..d).map(|j| (0..n).map(|i| flat[i * d + j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a).max(1e-9)).product();
    let cell = (vol / n as f64).powf(1.0 / d as f64).max(1e-9);
    let key = |x: &[f64]| -> Vec<i64> { x.iter().zip(&lo).map(|(v, l)| ((v - l) / cell).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for i in 0..n {
        grid.entry(key(&flat[i * d..(i + 1) * d])).or_default().push(i);
    }
    let mut best = f64::INFINITY;
    let mut offs = vec![Vec::new()];
    for _ in 0..d {
        offs = offs.into_iter().flat_map(|o: Vec<i64>| (-1..=1).map(move |s| [o.clone(), vec![s]].concat())).collect();
    }
    for (k, members) in &grid {
        for o in &offs {
            let nk: Vec<i64> = k.iter().zip(o).map(|(a, b)| a + b).collect();
            let Some(other) = grid.get(&nk) else { continue };
            for &i in members {
                for &j in other {
                    if j <= i && nk == *k {
                        continue;
                    }
                    if i == j {
                        continue;
                    }
                    let dist = norm(&(0..d).map(|t| flat[i * d + t] - flat[j * d + t]).collect::<Vec<_>>());
                    best = best.min(dist);
                }
            }
        }
    }
    if best > cell {
        // sparse clusters: fall back to a wider search
        for i in 0..n {
            for j in i + 1..n {
                let dist = norm(&(0..d).map(|t| flat[i * d + t] - flat[j * d + t]).collect::<Vec<_>>());
                best = best.min(dist);
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------------------------
// binary

#[derive(Clone, Debug)]
pub enum BinaryScheme {
    /// Tile n is s1 iff frac(rho − nα) ≥ 1 − α, α = v1/(v1+v2).
    CutProject { rho: f64 },
    /// Two-sided fixed point of the rules from seed `left|right`.
    Substitution { rules: [Vec<usize>; 2], left: usize, right: usize },
}

impl BinaryScheme {
    pub fn fibonacci() -> Self {
        BinaryScheme::Substitution { rules: [vec![0, 1], vec![0]], left: 1, right: 0 }
    }
}

fn interval_data(f: &FbsComplex) -> Result<(Vec<Prototile>, Vec<QVec>, Vec<f64>)> {
    if f.dim() != 1 {
        return Err(Error::Argument("binary patterns need a one-dimensional complex".into()));
    }
    let protos = f.effective_prototiles();
    if protos.len() != 2 {
        return Err(Error::Argument(format!("binary patterns need two prototiles, found {}", protos.len())));
    }
    let mut edges = Vec::new();
    let mut lens = Vec::new();
    for p in &protos {
        let e = p.vertices.iter().find(|v| !rational::is_zero(v)).cloned().ok_or_else(|| Error::Argument("empty interval".into()))?;
        let v = f.basis().realize(&e)[0];
        if !(v > 0.0) {
            return Err(Error::Argument(format!("interval {} has non-positive length {v}", p.name)));
        }
        edges.push(e);
        lens.push(v);
    }
    for (k, offs) in f.decoration_offsets()?.iter().enumerate() {
        for (_, o) in offs {
            let u = f.basis().realize(o)[0];
            if u < 0.0 || u >= lens[k] {
                return Err(Error::Argument(format!("decoration at {u} outside [0, {})", lens[k])));
            }
        }
    }
    Ok((protos, edges, lens))
}

fn substitution_word(rules: &[Vec<usize>; 2], seed: usize, min_len: usize, reverse: bool) -> Vec<usize> {
    let mut w = vec![seed];
    // iterate in pairs so two-sided fixed points of the square are reached
    while w.len() < min_len {
        for _ in 0..2 {
            w = w.iter().flat_map(|&a| rules[a].iter().copied()).collect();
        }
        if w.len() > 50_000_000 {
            break;
        }
    }
    if reverse {
        w.reverse();
    }
    w
}

/// Binary sequence of the complex's two intervals, vertex at the origin.
pub fn generate_binary(f: &FbsComplex, scheme: &BinaryScheme, radius: f64) -> Result<DecoratedPattern> {
    if !(radius > 0.0) {
        return Err(Error::Argument("radius must be positive".into()));
    }
    let (protos, edges, lens) = interval_data(f)?;
    let reach = radius + lens[0].max(lens[1]);
    let n_side = (reach / lens[0].min(lens[1])).ceil() as usize + 1;
    let (right, left): (Vec<usize>, Vec<usize>) = match scheme {
        BinaryScheme::CutProject { rho } => {
            if !(0.0..1.0).contains(rho) {
                return Err(Error::Argument("rho must lie in [0, 1)".into()));
            }
            let alpha = lens[0] / (lens[0] + lens[1]);
            let pick = |n: i64| -> usize {
                let z = (rho - n as f64 * alpha).rem_euclid(1.0);
                if z >= 1.0 - alpha {
                    0
                } else {
                    1
                }
            };
            ((0..n_side as i64).map(pick).collect(), (1..=n_side as i64).map(|n| pick(-n)).collect())
        }
        BinaryScheme::Substitution { rules, left, right } => {
            if rules.iter().flatten().any(|&a| a > 1) || rules.iter().any(|r| r.is_empty()) || *left > 1 || *right > 1 {
                return Err(Error::Argument("substitution rules must map {0,1} to non-empty words".into()));
            }
            (substitution_word(rules, *right, n_side, false), substitution_word(rules, *left, n_side, true))
        }
    };
    let mut tiles = Vec::new();
    let push = |k: usize, x: &QVec, tiles: &mut Vec<TileInstance>| {
        let t = f.basis().realize(x);
        tiles.push(TileInstance { name: protos[k].name.clone(), prototile: Some(k), translation: t, exact: Some(x.clone()) });
    };
    let mut x = rational::zero_vec(f.rank());
    for &k in &right {
        if f.basis().realize(&x)[0] > reach {
            break;
        }
        push(k, &x, &mut tiles);
        x = rational::add(&x, &edges[k]);
    }
    let mut x = rational::zero_vec(f.rank());
    // the left word is read from the seed outwards
    for &k in &left {
        x = rational::sub(&x, &edges[k]);
        if f.basis().realize(&x)[0] < -reach {
            break;
        }
        push(k, &x, &mut tiles);
    }
    DecoratedPattern::from_tiles(f, tiles, radius)
}

// ---------------------------------------------------------------------------------------------
// cut and project

/// Lattice ℤ^n with physical (d × n) and internal ((n−d) × n) projections.
#[derive(Clone, Debug)]
pub struct CutProjectScheme {
    pub n: usize,
    pub d: usize,
    pub physical: DMatrix<f64>,
    pub internal: DMatrix<f64>,
}

impl CutProjectScheme {
    pub fn new(physical: DMatrix<f64>, internal: DMatrix<f64>) -> Result<Self> {
        let (d, n) = physical.shape();
        if internal.shape() != (n - d, n) {
            return Err(Error::Argument("internal projection must be (n−d) × n".into()));
        }
        let s = CutProjectScheme { n, d, physical, internal };
        if s.matrix().determinant().abs() < 1e-10 {
            return Err(Error::Geometry("physical and internal projections are not complementary".into()));
        }
        Ok(s)
    }

    /// Star vectors as physical columns; internal space is the orthogonal complement.
    pub fn canonical(star: &[Vec<f64>]) -> Result<Self> {
        let n = star.len();
        let d = star.first().map_or(0, |v| v.len());
        if d == 0 || d >= n {
            return Err(Error::Argument("canonical schemes need n > d ≥ 1".into()));
        }
        let physical = DMatrix::from_fn(d, n, |i, j| star[j][i]);
        if physical.rank(1e-10) < d {
            return Err(Error::Geometry("star vectors do not span physical space".into()));
        }
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let orth = |v: &mut Vec<f64>, basis: &[Vec<f64>]| {
            for b in basis {
                let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= dot * y;
                }
            }
        };
        for i in 0..d {
            let mut v: Vec<f64> = (0..n).map(|j| physical[(i, j)]).collect();
            orth(&mut v, &basis);
            let nv = norm(&v);
            basis.push(v.iter().map(|x| x / nv).collect());
        }
        let mut internal_rows = Vec::new();
        for i in 0..n {
            if basis.len() == n {
                break;
            }
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            orth(&mut v, &basis);
            let nv = norm(&v);
            if nv > 1e-6 {
                let v: Vec<f64> = v.iter().map(|x| x / nv).collect();
                basis.push(v.clone());
                internal_rows.push(v);
            }
        }
        let internal = DMatrix::from_fn(n - d, n, |i, j| internal_rows[i][j]);
        Self::new(physical, internal)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        m.view_mut((0, 0), (self.d, self.n)).copy_from(&self.physical);
        m.view_mut((self.d, 0), (self.n - self.d, self.n)).copy_from(&self.internal);
        m
    }

    /// Physical and internal parts of the dual lattice basis: Bragg peaks sit at integer
    /// combinations of the physical parts.
    pub fn dual_basis(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let inv = self.matrix().try_inverse().expect("complementary projections");
        (0..self.n)
            .map(|i| {
                let row: Vec<f64> = (0..self.n).map(|j| inv[(i, j)]).collect();
                (row[..self.d].to_vec(), row[self.d..].to_vec())
            })
            .collect()
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

/// Canonical (n, d) patch for a complex built on its star (basis vectors = star vectors,
/// prototiles named by index subsets). `offset` lies in internal space.
pub fn generate_canonical(f: &FbsComplex, offset: &[f64], radius: f64) -> Result<DecoratedPattern> {
    let n = f.rank();
    let d = f.dim();
    let scheme = CutProjectScheme::canonical(&f.basis().vectors)?;
    if offset.len() != n - d {
        return Err(Error::Argument(format!("offset needs {} components", n - d)));
    }
    let protos = f.effective_prototiles();
    let dir = f.direction.clone().unwrap_or_else(|| crate::presets::canonical_direction(d));
    let proj = |j: usize| -> f64 { f.basis().vectors[j].iter().zip(&dir).map(|(a, b)| a * b).sum() };
    let k = &scheme.internal;
    struct TileType {
        proto: usize,
        inv: DMatrix<f64>,
        origin_shift: Vec<i64>,
        centre: Vec<f64>,
    }
    let mut types = Vec::new();
    for sub in crate::presets::subsets(n, d) {
        let name = canonical_tile_name(&sub);
        let proto = protos
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::Structural(format!("complex has no prototile {name}")))?;
        let comp: Vec<usize> = (0..n).filter(|j| !sub.contains(j)).collect();
        let kc = DMatrix::from_fn(n - d, n - d, |i, j| k[(i, comp[j])]);
        let inv = kc.try_inverse().ok_or_else(|| Error::Geometry("singular star: a window face is degenerate".into()))?;
        let mut origin_shift = vec![0i64; n];
        let mut centre = vec![0.0; d];
        for &j in &sub {
            if proj(j) < 0.0 {
                origin_shift[j] = 1;
            }
            for (c, v) in centre.iter_mut().zip(&f.basis().vectors[j]) {
                *c += v / 2.0;
            }
        }
        types.push(TileType { proto, inv, origin_shift, centre });
    }
    let diam: f64 = (0..n).map(|j| norm(&f.basis().vectors[j])).sum();
    let reach = radius + diam;
    // window bounding box
    let lo: Vec<f64> = (0..n - d).map(|i| offset[i] + (0..n).map(|j| k[(i, j)].min(0.0)).sum::<f64>()).collect();
    let hi: Vec<f64> = (0..n - d).map(|i| offset[i] + (0..n).map(|j| k[(i, j)].max(0.0)).sum::<f64>()).collect();
    let minv = scheme.matrix().try_inverse().expect("complementary");
    let mut centre_box = vec![0.0; n];
    let mut half = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let (c, h) = if j < d { (0.0, reach) } else { ((lo[j - d] + hi[j - d]) / 2.0, (hi[j - d] - lo[j - d]) / 2.0) };
            centre_box[i] += minv[(i, j)] * c;
            half[i] += minv[(i, j)].abs() * h;
        }
    }
    // split coordinates: J (n−d of them) solved from the internal part
    let mut best: Option<(f64, Vec<usize>)> = None;
    for jset in crate::presets::subsets(n, n - d) {
        let kj = DMatrix::from_fn(n - d, n - d, |i, t| k[(i, jset[t])]);
        let det = kj.determinant().abs();
        if best.as_ref().is_none_or(|(b, _)| det > *b) {
            best = Some((det, jset));
        }
    }
    let jset = best.expect("non-empty").1;
    let aset: Vec<usize> = (0..n).filter(|j| !jset.contains(j)).collect();
    let kj_inv = DMatrix::from_fn(n - d, n - d, |i, t| k[(i, jset[t])]).try_inverse().expect("chosen invertible");
    let ranges: Vec<(i64, i64)> = aset
        .iter()
        .map(|&i| ((centre_box[i] - half[i]).floor() as i64, (centre_box[i] + half[i]).ceil() as i64))
        .collect();
    let mut tiles = Vec::new();
    let mut ma: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    'outer: loop {
        // y0 = K_A m_A; K_J m_J ∈ [lo, hi] − y0
        let y0: Vec<f64> = (0..n - d).map(|i| aset.iter().zip(&ma).map(|(&j, &m)| k[(i, j)] * m as f64).sum()).collect();
        let ylo: Vec<f64> = (0..n - d).map(|i| lo[i] - y0[i]).collect();
        let yhi: Vec<f64> = (0..n - d).map(|i| hi[i] - y0[i]).collect();
        let mid: Vec<f64> = ylo.iter().zip(&yhi).map(|(a, b)| (a + b) / 2.0).collect();
        let hw: Vec<f64> = ylo.iter().zip(&yhi).map(|(a, b)| (b - a) / 2.0).collect();
        let c = mat_vec(&kj_inv, &mid);
        let jr: Vec<(i64, i64)> = (0..n - d)
            .map(|i| {
                let h: f64 = (0..n - d).map(|t| kj_inv[(i, t)].abs() * hw[t]).sum();
                ((c[i] - h).floor() as i64, (c[i] + h).ceil() as i64)
            })
            .collect();
        let mut mj: Vec<i64> = jr.iter().map(|r| r.0).collect();
        loop {
            let mut m = vec![0i64; n];
            for (&j, &v) in aset.iter().zip(&ma) {
                m[j] = v;
            }
            for (&j, &v) in jset.iter().zip(&mj) {
                m[j] = v;
            }
            let mf: Vec<f64> = m.iter().map(|&x| x as f64).collect();
            let x = mat_vec(&scheme.physical, &mf);
            if norm(&x) <= reach + diam {
                let km = mat_vec(k, &mf);
                let rhs: Vec<f64> = (0..n - d).map(|i| km[i] - offset[i]).collect();
                for t in &types {
                    let cc = mat_vec(&t.inv, &rhs);
                    if cc.iter().all(|&v| v > -1e-9 && v < 1.0 + 1e-9) {
                        if cc.iter().any(|&v| v.abs() < 1e-9 || (v - 1.0).abs() < 1e-9) {
                            return Err(Error::Geometry(
                                "offset is not generic (lattice point on a window boundary); perturb it slightly".into(),
                            ));
                        }
                        let centre: Vec<f64> = x.iter().zip(&t.centre).map(|(a, b)| a + b).collect();
                        if norm(&centre) > reach {
                            continue;
                        }
                        let origin: Vec<i64> = m.iter().zip(&t.origin_shift).map(|(a, b)| a + b).collect();
                        let exact: QVec = origin.iter().map(|&v| rational::q(v)).collect();
                        tiles.push(TileInstance {
                            name: protos[t.proto].name.clone(),
                            prototile: Some(t.proto),
                            translation: f.basis().realize(&exact),
                            exact: Some(exact),
                        });
                    }
                }
            }
            // next m_J
            let mut i = 0;
            loop {
                if i == mj.len() {
                    break;
                }
                mj[i] += 1;
                if mj[i] <= jr[i].1 {
                    break;
                }
                mj[i] = jr[i].0;
                i += 1;
            }
            if i == mj.len() {
                break;
            }
        }
        let mut i = 0;
        loop {
            if i == ma.len() {
                break 'outer;
            }
            ma[i] += 1;
            if ma[i] <= ranges[i].1 {
                break;
            }
            ma[i] = ranges[i].0;
            i += 1;
        }
    }
    DecoratedPattern::from_tiles(f, tiles, radius)
}

// ---------------------------------------------------------------------------------------------
// square-triangle inflation

type V4 = [i64; 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StSeed {
    Square,
    /// One filling of the unit dodecagon centred at the origin.
    Dodecagon,
}

fn l4(j: i64) -> V4 {
    let v = st::l(j + 1);
    [0, 1, 2, 3].map(|i| v[i].to_integer().to_i64().expect("small"))
}

fn add4(a: V4, b: V4) -> V4 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn sub4(a: V4, b: V4) -> V4 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

/// Multiplication by λ = 2 + √3, using √3·l_j = l_{j−1} + l_{j+1}.
fn inflate4(v: V4) -> V4 {
    let mut out = [2 * v[0], 2 * v[1], 2 * v[2], 2 * v[3]];
    for (i, &c) in v.iter().enumerate() {
        let s = add4(l4(i as i64 + 1), l4(i as i64 - 1));
        for t in 0..4 {
            out[t] += c * s[t];
        }
    }
    out
}

fn realize4(v: V4) -> [f64; 2] {
    let mut x = [0.0; 2];
    for (i, &c) in v.iter().enumerate() {
        let a = std::f64::consts::PI * i as f64 / 6.0;
        x[0] += c as f64 * a.cos();
        x[1] += c as f64 * a.sin();
    }
    x
}

fn ccw(mut t: Vec<V4>) -> Vec<V4> {
    let p: Vec<[f64; 2]> = t.iter().map(|&v| realize4(v)).collect();
    let mut area = 0.0;
    for i in 0..p.len() {
        let (a, b) = (p[i], p[(i + 1) % p.len()]);
        area += a[0] * b[1] - a[1] * b[0];
    }
    if area < 0.0 {
        t.reverse();
    }
    t
}

fn direction_index(e: V4) -> Result<i64> {
    (0..12).find(|&j| l4(j) == e).ok_or_else(|| Error::Internal("edge is not a unit star vector".into()))
}

fn dodecagon4(c: V4) -> Vec<Vec<V4>> {
    let cq: QVec = c.iter().map(|&x| rational::q(x)).collect();
    st::dodecagon(&cq, 0)
        .into_iter()
        .map(|t| ccw(t.iter().map(|v| [0, 1, 2, 3].map(|i| v[i].to_integer().to_i64().expect("small"))).collect()))
        .collect()
}

fn centroid4(t: &[V4]) -> [f64; 2] {
    let mut c = [0.0; 2];
    for &v in t {
        let x = realize4(v);
        c[0] += x[0];
        c[1] += x[1];
    }
    [c[0] / t.len() as f64, c[1] / t.len() as f64]
}

fn inflate_once(tiles: &[Vec<V4>]) -> Result<Vec<Vec<V4>>> {
    let mut out = Vec::new();
    let mut seen: HashSet<V4> = HashSet::new();
    let mut verts = Vec::new();
    for t in tiles {
        for &v in t {
            if seen.insert(v) {
                verts.push(v);
            }
        }
    }
    for v in verts {
        out.extend(dodecagon4(inflate4(v)));
    }
    for t in tiles {
        let m = t.len();
        let mut p = Vec::with_capacity(m);
        let mut dirs = Vec::with_capacity(m);
        for i in 0..m {
            let (x, y) = (t[i], t[(i + 1) % m]);
            let j = direction_index(sub4(y, x))?;
            p.push(add4(inflate4(x), add4(l4(j), l4(j + 1))));
            dirs.push(j);
        }
        match m {
            3 => out.push(p),
            4 => {
                let inner: Vec<V4> = (0..4).map(|i| add4(p[i], l4(dirs[i] + 4))).collect();
                for i in 0..4 {
                    out.push(vec![inner[i], p[i], inner[(i + 1) % 4]]);
                }
                out.push(inner);
            }
            _ => return Err(Error::Internal("square-triangle tiles have 3 or 4 vertices".into())),
        }
    }
    Ok(out.into_iter().map(ccw).collect())
}

pub const LAMBDA: f64 = 3.732_050_807_568_877;

/// Fewest inflation steps from the dodecagon seed whose patch covers the ball of `radius`.
pub fn square_triangle_steps(radius: f64) -> usize {
    let mut s = 1;
    while LAMBDA.powi(s as i32) < radius {
        s += 1;
    }
    s
}

/// Square-triangle patch: `steps` inflations (λ = 2 + √3, a dodecagon at every inflated
/// vertex, gaps filled by a triangle or a square star) from `seed`, pruned to the ball.
pub fn generate_square_triangle(f: &FbsComplex, steps: usize, seed: StSeed, radius: f64) -> Result<DecoratedPattern> {
    if f.rank() != 4 || f.dim() != 2 {
        return Err(Error::Argument("square-triangle patterns need the rank 4 planar complex".into()));
    }
    let protos = f.effective_prototiles();
    let mut classes: HashMap<Vec<V4>, (usize, V4)> = HashMap::new();
    for (k, p) in protos.iter().enumerate() {
        let vs: Vec<V4> = p
            .vertices
            .iter()
            .map(|v| {
                let mut a = [0i64; 4];
                for i in 0..4 {
                    a[i] = v[i].to_integer().to_i64().unwrap_or(0);
                }
                a
            })
            .collect();
        let least = *vs.iter().min().expect("vertices");
        let mut key: Vec<V4> = vs.iter().map(|&v| sub4(v, least)).collect();
        key.sort();
        classes.insert(key, (k, sub4([0; 4], least)));
    }
    let mut tiles: Vec<Vec<V4>> = match seed {
        StSeed::Square => vec![ccw(vec![[0; 4], l4(0), add4(l4(0), l4(3)), l4(3)])],
        StSeed::Dodecagon => dodecagon4([0; 4]),
    };
    for step in 0..steps {
        tiles = inflate_once(&tiles)?;
        let remaining = (steps - step - 1) as i32;
        let bound = radius / LAMBDA.powi(remaining) + 2.0 / (LAMBDA - 1.0) + 2.0;
        tiles.retain(|t| {
            let c = centroid4(t);
            (c[0] * c[0] + c[1] * c[1]).sqrt() <= bound
        });
    }
    let mut out = Vec::with_capacity(tiles.len());
    for t in &tiles {
        let least = *t.iter().min().expect("vertices");
        let mut key: Vec<V4> = t.iter().map(|&v| sub4(v, least)).collect();
        key.sort();
        let (k, off) = classes.get(&key).ok_or_else(|| Error::Internal("inflated tile is not a prototile".into()))?;
        let origin = add4(least, *off);
        let exact: QVec = origin.iter().map(|&x| rational::q(x)).collect();
        out.push(TileInstance {
            name: protos[*k].name.clone(),
            prototile: Some(*k),
            translation: f.basis().realize(&exact),
            exact: Some(exact),
        });
    }
    DecoratedPattern::from_tiles(f, out, radius)
}

/// Vertex lists (frequency coordinates) of every tile, from its prototile.
pub fn tile_vertices(f: &FbsComplex, p: &DecoratedPattern) -> Result<Vec<Vec<Vec<f64>>>> {
    let protos = f.effective_prototiles();
    p.tiles
        .iter()
        .map(|t| {
            let k = t.prototile.ok_or_else(|| Error::Structural(format!("unresolved prototile {}", t.name)))?;
            Ok(protos[k]
                .vertices
                .iter()
                .map(|v| f.basis().realize(v).iter().zip(&t.translation).map(|(a, b)| a + b).collect())
                .collect())
        })
        .collect()
}

// ---------------------------------------------------------------------------------------------
// winding check

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    Overlap,
    Gap,
    /// A facet whose neighbour is missing or glued to a different cell of the complex.
    Adjacency,
}

#[derive(Clone, Debug)]
pub struct WindingFailure {
    pub kind: FailureKind,
    pub tile: usize,
    pub position: Vec<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct WindingReport {
    pub checked_tiles: usize,
    pub failures: Vec<WindingFailure>,
}

impl WindingReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug)]
struct FacetGeom {
    verts: Vec<Vec<f64>>,
    cell: usize,
    opp: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct ProtoGeom {
    pub simplices: Vec<Vec<Vec<f64>>>,
    facets: Vec<FacetGeom>,
    pub diameter: f64,
}

pub(crate) fn proto_geometry(f: &FbsComplex) -> Result<Vec<ProtoGeom>> {
    let d = f.dim();
    let b = f.set();
    let mut out = Vec::new();
    for p in f.effective_prototiles() {
        let mut simplices = Vec::new();
        let mut exact = Vec::new();
        let mut cells = Vec::new();
        for (label, off) in &p.cells {
            let s = b.cell_index(d, label)?;
            let mut vs = vec![off.clone()];
            vs.extend(f.edge_vectors(d, s).iter().map(|e| rational::add(off, e)));
            simplices.push(vs.iter().map(|v| f.basis().realize(v)).collect::<Vec<_>>());
            exact.push(vs);
            cells.push(s);
        }
        let mut count: HashMap<Vec<QVec>, usize> = HashMap::new();
        for vs in &exact {
            for i in 0..=d {
                let mut face = vs.clone();
                face.remove(i);
                face.sort();
                *count.entry(face).or_default() += 1;
            }
        }
        let mut facets = Vec::new();
        for (vs, &s) in exact.iter().zip(&cells) {
            for i in 0..=d {
                let mut face = vs.clone();
                face.remove(i);
                let mut key = face.clone();
                key.sort();
                if count[&key] == 1 {
                    facets.push(FacetGeom {
                        verts: face.iter().map(|v| f.basis().realize(v)).collect(),
                        cell: b.face(d, i, s),
                        opp: f.basis().realize(&vs[i]),
                    });
                }
            }
        }
        let pts: Vec<Vec<f64>> = p.vertices.iter().map(|v| f.basis().realize(v)).collect();
        let mut diameter: f64 = 0.0;
        for a in &pts {
            for c in &pts {
                diameter = diameter.max(norm(&a.iter().zip(c).map(|(x, y)| x - y).collect::<Vec<_>>()));
            }
        }
        out.push(ProtoGeom { simplices, facets, diameter });
    }
    Ok(out)
}

fn det(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j]).determinant()
}

/// Barycentric test with a small tolerance; `strict` excludes the boundary.
pub(crate) fn in_simplex(s: &[Vec<f64>], x: &[f64], tol: f64) -> bool {
    let d = x.len();
    let m = DMatrix::from_fn(d, d, |i, j| s[j + 1][i] - s[0][i]);
    let rhs = nalgebra::DVector::from_fn(d, |i, _| x[i] - s[0][i]);
    let Some(c) = m.lu().solve(&rhs) else { return false };
    let sum: f64 = c.iter().sum();
    c.iter().all(|&v| v > tol) && sum < 1.0 - tol
}

struct VertexIndex {
    cell: f64,
    tol: f64,
    grid: HashMap<Vec<i64>, Vec<(usize, Vec<f64>)>>,
    next: usize,
}

impl VertexIndex {
    fn id(&mut self, x: &[f64]) -> usize {
        let key: Vec<i64> = x.iter().map(|v| (v / self.cell).floor() as i64).collect();
        let mut offs = vec![Vec::new()];
        for _ in 0..x.len() {
            offs = offs.into_iter().flat_map(|o: Vec<i64>| (-1..=1).map(move |s| [o.clone(), vec![s]].concat())).collect();
        }
        for o in &offs {
            let k: Vec<i64> = key.iter().zip(o).map(|(a, b)| a + b).collect();
            if let Some(list) = self.grid.get(&k) {
                for (id, y) in list {
                    if x.iter().zip(y).all(|(a, b)| (a - b).abs() <= self.tol) {
                        return *id;
                    }
                }
            }
        }
        let id = self.next;
        self.next += 1;
        self.grid.entry(key).or_default().push((id, x.to_vec()));
        id
    }
}

/// Check that the tiles of a pattern cover its interior without gaps or overlaps and glue
/// along facets as the complex prescribes.
pub fn winding_check(f: &FbsComplex, p: &DecoratedPattern) -> Result<WindingReport> {
    let d = f.dim();
    let geoms = proto_geometry(f)?;
    let diam = geoms.iter().map(|g| g.diameter).fold(0.0, f64::max);
    let interior_bound = p.radius - diam - 1e-9;
    let mut index = VertexIndex { cell: 1e-6, tol: 1e-7, grid: HashMap::new(), next: 0 };
    // facet key -> (tile, cell, side, centroid, outward probe)
    type Entry = (usize, usize, f64, Vec<f64>, Vec<f64>);
    let mut facets: HashMap<Vec<usize>, Vec<Entry>> = HashMap::new();
    let mut interior = vec![false; p.tiles.len()];
    let mut tile_grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let gkey = |x: &[f64]| -> Vec<i64> { x.iter().map(|v| (v / diam.max(1e-9)).floor() as i64).collect() };
    for (ti, t) in p.tiles.iter().enumerate() {
        let k = t.prototile.ok_or_else(|| Error::Structural(format!("unresolved prototile {}", t.name)))?;
        let g = &geoms[k];
        let shift = |v: &[f64]| -> Vec<f64> { v.iter().zip(&t.translation).map(|(a, b)| a + b).collect() };
        let far = g.simplices.iter().flatten().map(|v| norm(&shift(v))).fold(0.0, f64::max);
        interior[ti] = far <= interior_bound;
        tile_grid.entry(gkey(&t.translation)).or_default().push(ti);
        for fc in &g.facets {
            let vs: Vec<Vec<f64>> = fc.verts.iter().map(|v| shift(v)).collect();
            let mut ids: Vec<(usize, usize)> = vs.iter().enumerate().map(|(i, v)| (index.id(v), i)).collect();
            ids.sort();
            let ordered: Vec<&Vec<f64>> = ids.iter().map(|&(_, i)| &vs[i]).collect();
            let opp = shift(&fc.opp);
            let mut rows: Vec<Vec<f64>> = ordered[1..].iter().map(|v| v.iter().zip(ordered[0]).map(|(a, b)| a - b).collect()).collect();
            rows.push(opp.iter().zip(ordered[0]).map(|(a, b)| a - b).collect());
            let side = det(&rows);
            let cen: Vec<f64> = (0..d).map(|j| vs.iter().map(|v| v[j]).sum::<f64>() / vs.len() as f64).collect();
            let out: Vec<f64> = cen.iter().zip(&opp).map(|(c, o)| c - o).collect();
            let no = norm(&out);
            let probe: Vec<f64> = cen.iter().zip(&out).map(|(c, o)| c + 1e-6 * diam * o / no).collect();
            facets.entry(ids.iter().map(|x| x.0).collect()).or_default().push((ti, fc.cell, side, cen, probe));
        }
    }
    let covered_by_other = |x: &[f64], me: usize| -> bool {
        let key = gkey(x);
        let mut offs = vec![Vec::new()];
        for _ in 0..d {
            offs = offs.into_iter().flat_map(|o: Vec<i64>| (-2..=2).map(move |s| [o.clone(), vec![s]].concat())).collect();
        }
        for o in offs {
            let k: Vec<i64> = key.iter().zip(&o).map(|(a, b)| a + b).collect();
            for &ti in tile_grid.get(&k).into_iter().flatten() {
                if ti == me {
                    continue;
                }
                let t = &p.tiles[ti];
                let g = &geoms[t.prototile.expect("resolved")];
                let local: Vec<f64> = x.iter().zip(&t.translation).map(|(a, b)| a - b).collect();
                if g.simplices.iter().any(|s| in_simplex(s, &local, 1e-12)) {
                    return true;
                }
            }
        }
        false
    };
    let mut failures = Vec::new();
    let mut keys: Vec<&Vec<usize>> = facets.keys().collect();
    keys.sort();
    for key in keys {
        let es = &facets[key];
        if !es.iter().any(|e| interior[e.0]) {
            continue;
        }
        match es.len() {
            1 => {
                let (ti, _, _, cen, probe) = &es[0];
                failures.push(WindingFailure {
                    kind: FailureKind::Adjacency,
                    tile: *ti,
                    position: cen.clone(),
                    detail: "facet has no matching neighbour".into(),
                });
                let kind = if covered_by_other(probe, *ti) { FailureKind::Overlap } else { FailureKind::Gap };
                failures.push(WindingFailure {
                    kind,
                    tile: *ti,
                    position: probe.clone(),
                    detail: format!("{} beyond an unmatched facet", if kind == FailureKind::Overlap { "overlap" } else { "gap" }),
                });
            }
            2 => {
                let (a, b) = (&es[0], &es[1]);
                if a.2 * b.2 >= 0.0 {
                    failures.push(WindingFailure {
                        kind: FailureKind::Overlap,
                        tile: a.0,
                        position: a.3.clone(),
                        detail: format!("tiles {} and {} lie on the same side of a shared facet", a.0, b.0),
                    });
                } else if a.1 != b.1 {
                    failures.push(WindingFailure {
                        kind: FailureKind::Adjacency,
                        tile: a.0,
                        position: a.3.clone(),
                        detail: format!("shared facet maps to cells {} and {}", f.set().cells(d - 1)[a.1], f.set().cells(d - 1)[b.1]),
                    });
                }
            }
            _ => failures.push(WindingFailure {
                kind: FailureKind::Overlap,
                tile: es[0].0,
                position: es[0].3.clone(),
                detail: format!("facet shared by {} tiles", es.len()),
            }),
        }
    }
    Ok(WindingReport { checked_tiles: interior.iter().filter(|&&x| x).count(), failures })
}

/// Smallest distance from a decoration to the boundary of its prototile.
pub fn decoration_clearance(f: &FbsComplex) -> Result<f64> {
    let geoms = proto_geometry(f)?;
    let d = f.dim();
    let mut best = f64::INFINITY;
    for (k, offs) in f.decoration_offsets()?.iter().enumerate() {
        for (_, o) in offs {
            let x = f.basis().realize(o);
            for fc in &geoms[k].facets {
                let dist = match d {
                    1 => (x[0] - fc.verts[0][0]).abs(),
                    2 => {
                        let (a, b) = (&fc.verts[0], &fc.verts[1]);
                        let e = [b[0] - a[0], b[1] - a[1]];
                        ((x[0] - a[0]) * e[1] - (x[1] - a[1]) * e[0]).abs() / norm(&e)
                    }
                    3 => {
                        let (a, b, c) = (&fc.verts[0], &fc.verts[1], &fc.verts[2]);
                        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                        let nrm = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
                        let w = [x[0] - a[0], x[1] - a[1], x[2] - a[2]];
                        (w[0] * nrm[0] + w[1] * nrm[1] + w[2] * nrm[2]).abs() / norm(&nrm)
                    }
                    _ => return Err(Error::Unsupported("clearance above dimension 3".into())),
                };
                best = best.min(dist);
            }
        }
    }
    Ok(best)
}

/// Total realized volume of the tiles of each prototile in the pattern.
pub fn prototile_volumes(f: &FbsComplex) -> Result<Vec<f64>> {
    Ok(proto_geometry(f)?
        .iter()
        .map(|g| {
            g.simplices
                .iter()
                .map(|s| {
                    let rows: Vec<Vec<f64>> = s[1..].iter().map(|v| v.iter().zip(&s[0]).map(|(a, b)| a - b).collect()).collect();
                    let fact: f64 = (1..=rows.len()).map(|i| i as f64).product();
                    det(&rows).abs() / fact
                })
                .sum()
        })
        .collect())
}
