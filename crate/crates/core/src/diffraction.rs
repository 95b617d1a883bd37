//! Partial amplitudes measured on finite patches and the checks built on them.
//!
//! a_{k,p} = (1/vol D_R) Σ_{y ∈ Λ_p ∩ D_R} exp(−2πi k·y). Sums are split into fixed chunks whose
//! partial sums are combined by a pairwise tree, so results do not depend on the thread count.

use crate::cycles::{character, constraint_count_at_k, degeneracy_check, Analysis, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::fbs::FbsComplex;
use crate::presets;
use crate::rational::{self, Q};
use crate::tilings::{ball_volume, CutProjectScheme, DecoratedPattern};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// Points per chunk of an exponential sum.
pub const CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaveVector {
    pub k: Vec<f64>,
    /// Integer coordinates in a dual basis, when enumerated.
    pub label: Option<Vec<i64>>,
    /// Internal-space partner, when known.
    pub internal: Option<Vec<f64>>,
}

impl WaveVector {
    pub fn new(k: Vec<f64>) -> Self {
        WaveVector { k, label: None, internal: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Estimator {
    HardBall,
    /// Weight (1 − |y|²/R²)³, normalized to unit mass.
    Taper,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AmplitudeVector {
    pub k: Vec<f64>,
    #[serde(serialize_with = "ser_complex_vec")]
    pub values: Vec<Complex64>,
    pub radius: f64,
    pub estimator: Estimator,
}

impl AmplitudeVector {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// |Σ w_p a_p|².
    pub fn intensity(&self, w: &[Complex64]) -> f64 {
        self.values.iter().zip(w).map(|(a, w)| a * w).sum::<Complex64>().norm_sqr()
    }
}

fn ser_complex_vec<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// Neumaier summation, componentwise.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: [f64; 2],
    err: [f64; 2],
}

impl Compensated {
    fn add(&mut self, z: Complex64) {
        for (i, x) in [z.re, z.im].into_iter().enumerate() {
            let t = self.sum[i] + x;
            self.err[i] += if self.sum[i].abs() >= x.abs() { (self.sum[i] - t) + x } else { (x - t) + self.sum[i] };
            self.sum[i] = t;
        }
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.sum[0] + self.err[0], self.sum[1] + self.err[1])
    }
}

fn pairwise(v: &[Complex64]) -> Complex64 {
    match v.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => v[0],
        n => pairwise(&v[..n / 2]) + pairwise(&v[n / 2..]),
    }
}

fn taper_mass(d: usize) -> f64 {
    let d = d as f64;
    d * (1.0 / d - 3.0 / (d + 2.0) + 3.0 / (d + 4.0) - 1.0 / (d + 6.0))
}

/// Σ_{|y| ≤ R} w(y)·exp(−2πi k·y) over flat points, normalized by the (weighted) ball volume.
pub fn exponential_sum(points: &[f64], d: usize, k: &[f64], radius: f64, est: Estimator) -> Complex64 {
    sum_in_ball(points, d, k, radius, est, true)
}

fn sum_in_ball(points: &[f64], d: usize, k: &[f64], radius: f64, est: Estimator, clip: bool) -> Complex64 {
    let r2 = radius * radius;
    let partial: Vec<Complex64> = points
        .par_chunks(CHUNK * d.max(1))
        .map(|c| {
            let mut acc = Compensated::default();
            for y in c.chunks_exact(d) {
                let n2: f64 = y.iter().map(|x| x * x).sum();
                if clip && n2 > r2 {
                    continue;
                }
                let w = match est {
                    Estimator::HardBall => 1.0,
                    Estimator::Taper => (1.0 - n2 / r2).powi(3),
                };
                acc.add(character(k, y) * w);
            }
            acc.value()
        })
        .collect();
    let vol = ball_volume(d, radius)
        * match est {
            Estimator::HardBall => 1.0,
            Estimator::Taper => taper_mass(d),
        };
    pairwise(&partial) / vol
}

/// Partial amplitudes of every species at k. Weights are not applied. The pattern's points are
/// taken as the contents of its ball, so a translated pattern keeps its point set.
pub fn estimate_amplitudes(p: &DecoratedPattern, k: &[f64], est: Estimator) -> Result<AmplitudeVector> {
    if k.len() != p.dim || k.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument(format!("wave vector needs {} finite components", p.dim)));
    }
    if let Some(s) = (0..p.species.len()).find(|&s| p.count(s) == 0) {
        return Err(Error::Argument(format!("no points of species {} inside radius {}", p.species[s], p.radius)));
    }
    let values = p.points.iter().map(|pts| sum_in_ball(pts, p.dim, k, p.radius, est, false)).collect();
    Ok(AmplitudeVector { k: k.to_vec(), values, radius: p.radius, estimator: est })
}

/// Typical |a| of a random-phase sum over the pattern's points.
pub fn noise_floor(p: &DecoratedPattern) -> f64 {
    let n: usize = (0..p.species.len()).map(|s| p.count(s)).sum();
    3.0 * (n as f64).sqrt() / p.ball_volume()
}

// ---------------------------------------------------------------------------------------------
// Fourier module

/// Physical and internal images of the frequency basis. Bragg peaks of a model set built on
/// this embedding sit at integer combinations of the physical parts of the dual basis.
#[derive(Clone, Debug)]
pub struct FourierModule {
    /// r vectors in E.
    pub physical: Vec<Vec<f64>>,
    /// r vectors in internal space (dimension r − d).
    pub internal: Vec<Vec<f64>>,
}

impl FourierModule {
    /// Internal space taken as the orthogonal complement of the physical rows.
    pub fn orthogonal(f: &FbsComplex) -> Result<Self> {
        let phys = f.basis().vectors.clone();
        let r = phys.len();
        let d = f.dim();
        if r == d {
            return Ok(FourierModule { physical: phys, internal: vec![Vec::new(); r] });
        }
        let s = CutProjectScheme::canonical(&phys)?;
        let internal = (0..r).map(|j| (0..r - d).map(|i| s.internal[(i, j)]).collect()).collect();
        Ok(FourierModule { physical: phys, internal })
    }

    /// The embedding that makes the preset's patches model sets: Galois conjugation for the
    /// square-triangle tiling, the orthogonal complement otherwise.
    pub fn for_preset(name: &str, f: &FbsComplex) -> Result<Self> {
        if name == "square-triangle" {
            let r = f.rank();
            let internal = (0..r)
                .map(|j| {
                    let mut e = rational::zero_vec(r);
                    e[j] = Q::from_integer(1.into());
                    f.basis().realize(&presets::square_triangle::sigma(&e))
                })
                .collect();
            return Ok(FourierModule { physical: f.basis().vectors.clone(), internal });
        }
        Self::orthogonal(f)
    }

    /// Dual basis as (physical, internal) pairs.
    pub fn dual(&self) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let r = self.physical.len();
        let d = self.physical.first().map_or(0, |v| v.len());
        let m = DMatrix::from_fn(r, r, |i, j| if i < d { self.physical[j][i] } else { self.internal[j][i - d] });
        let inv = m.try_inverse().ok_or_else(|| Error::Geometry("physical and internal images are dependent".into()))?;
        Ok((0..r)
            .map(|i| {
                let row: Vec<f64> = (0..r).map(|j| inv[(i, j)]).collect();
                (row[..d].to_vec(), row[d..].to_vec())
            })
            .collect())
    }
}

// ---------------------------------------------------------------------------------------------
// candidates

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub dual: Vec<(Vec<f64>, Vec<f64>)>,
    /// Inclusive integer range per dual vector.
    pub ranges: Vec<(i64, i64)>,
    /// Keep only |k| ≤ kmax.
    pub kmax: f64,
}

#[derive(Clone, Debug)]
pub struct Scan {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub steps: Vec<usize>,
    /// Local maxima below floor·max are dropped.
    pub floor: f64,
    /// Refine maxima off the grid.
    pub refine: bool,
    pub estimator: Estimator,
}

fn box_points(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for &(a, b) in ranges {
        out = out.into_iter().flat_map(|v| (a..=b).map(move |m| [v.clone(), vec![m]].concat())).collect();
    }
    out
}

fn combine(dual: &[(Vec<f64>, Vec<f64>)], m: &[i64]) -> (Vec<f64>, Vec<f64>) {
    let d = dual[0].0.len();
    let e = dual[0].1.len();
    let mut k = vec![0.0; d];
    let mut h = vec![0.0; e];
    for ((q, qi), &c) in dual.iter().zip(m) {
        for (x, y) in k.iter_mut().zip(q) {
            *x += c as f64 * y;
        }
        for (x, y) in h.iter_mut().zip(qi) {
            *x += c as f64 * y;
        }
    }
    (k, h)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn enumerate(e: &Enumeration) -> Result<Vec<WaveVector>> {
    if e.dual.is_empty() || e.ranges.len() != e.dual.len() {
        return Err(Error::Argument(format!("need one integer range per dual vector ({})", e.dual.len())));
    }
    Ok(box_points(&e.ranges)
        .into_iter()
        .filter_map(|m| {
            let (k, h) = combine(&e.dual, &m);
            (norm(&k) <= e.kmax).then_some(WaveVector { k, label: Some(m), internal: Some(h) })
        })
        .collect())
}

fn weighted(p: &DecoratedPattern, k: &[f64], est: Estimator) -> f64 {
    p.points
        .iter()
        .zip(&p.weights)
        .map(|(pts, w)| sum_in_ball(pts, p.dim, k, p.radius, est, false) * w)
        .sum::<Complex64>()
        .norm_sqr()
}

fn scan(s: &Scan, p: &DecoratedPattern) -> Result<Vec<WaveVector>> {
    let d = p.dim;
    if s.lo.len() != d || s.hi.len() != d || s.steps.len() != d || s.steps.iter().any(|&n| n < 3) {
        return Err(Error::Argument(format!("scan box needs {d} ranges with at least 3 steps each")));
    }
    let h: Vec<f64> = (0..d).map(|i| (s.hi[i] - s.lo[i]) / (s.steps[i] - 1) as f64).collect();
    let idx = box_points(&s.steps.iter().map(|&n| (0, n as i64 - 1)).collect::<Vec<_>>());
    let at = |m: &[i64]| -> Vec<f64> { (0..d).map(|i| s.lo[i] + m[i] as f64 * h[i]).collect() };
    let vals: Vec<f64> = idx.par_iter().map(|m| weighted(p, &at(m), s.estimator)).collect();
    let max = vals.iter().cloned().fold(0.0, f64::max);
    let flat = |m: &[i64]| -> Option<usize> {
        let mut i = 0usize;
        for (c, &n) in m.iter().zip(&s.steps) {
            if *c < 0 || *c >= n as i64 {
                return None;
            }
            i = i * n + *c as usize;
        }
        Some(i)
    };
    let nbrs = box_points(&vec![(-1, 1); d]);
    let mut out = Vec::new();
    for (i, m) in idx.iter().enumerate() {
        if vals[i] < s.floor * max {
            continue;
        }
        let is_max = nbrs.iter().all(|o| {
            if o.iter().all(|&c| c == 0) {
                return true;
            }
            let q: Vec<i64> = m.iter().zip(o).map(|(a, b)| a + b).collect();
            flat(&q).map_or(true, |j| vals[j] < vals[i] || (vals[j] == vals[i] && j > i))
        });
        if !is_max {
            continue;
        }
        let mut k = at(m);
        if s.refine {
            k = refine(p, k, &h, s.estimator);
        }
        out.push((weighted(p, &k, s.estimator), k));
    }
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(out.into_iter().map(|(_, k)| WaveVector::new(k)).collect())
}

fn refine(p: &DecoratedPattern, k: Vec<f64>, h: &[f64], est: Estimator) -> Vec<f64> {
    refine_peak(p, k, h, est, 40)
}

/// Local maximum of the weighted intensity near `k` by coordinate-wise parabolic steps with a
/// stencil starting at `h` and halving each round.
pub fn refine_peak(p: &DecoratedPattern, mut k: Vec<f64>, h: &[f64], est: Estimator, rounds: usize) -> Vec<f64> {
    let mut h = h.to_vec();
    let mut f0 = weighted(p, &k, est);
    for _ in 0..rounds {
        let mut moved = false;
        for i in 0..k.len() {
            let at = |x: f64| {
                let mut q = k.clone();
                q[i] = x;
                q
            };
            let (fp, fm) = (weighted(p, &at(k[i] + h[i]), est), weighted(p, &at(k[i] - h[i]), est));
            let mut best = (f0, k[i]);
            for cand in [(fp, k[i] + h[i]), (fm, k[i] - h[i])] {
                if cand.0 > best.0 {
                    best = cand;
                }
            }
            let den = fp - 2.0 * f0 + fm;
            if den < 0.0 {
                let x = k[i] + 0.5 * h[i] * (fm - fp) / den;
                let fx = weighted(p, &at(x), est);
                if fx > best.0 {
                    best = (fx, x);
                }
            }
            if best.1 != k[i] {
                moved = true;
            }
            f0 = best.0;
            k[i] = best.1;
        }
        if !moved {
            for x in &mut h {
                *x *= 0.5;
            }
        }
    }
    k
}

/// Candidate Bragg peaks from exactly one of: enumeration over a dual basis, or a scan of the
/// weighted intensity on a grid.
pub fn bragg_candidates(
    enumeration: Option<&Enumeration>,
    scan_spec: Option<&Scan>,
    p: &DecoratedPattern,
) -> Result<Vec<WaveVector>> {
    match (enumeration, scan_spec) {
        (Some(e), None) => enumerate(e),
        (None, Some(s)) => scan(s, p),
        (None, None) => Err(Error::Argument("give a dual basis with integer ranges or a scan box".into())),
        (Some(_), Some(_)) => Err(Error::Argument("give either an enumeration or a scan, not both".into())),
    }
}

#[derive(Clone, Debug)]
pub struct PeakSearch {
    pub range: i64,
    pub kmax: f64,
    /// Candidates with the smallest internal norm that are measured.
    pub pool: usize,
    pub count: usize,
    pub tol: f64,
    /// Largest denominator tried when the module is a lattice (rank = dimension): periodic
    /// patches put their peaks on fractions of the dual lattice.
    pub denominators: i64,
}

impl Default for PeakSearch {
    fn default() -> Self {
        PeakSearch { range: 6, kmax: 6.0, pool: 120, count: 10, tol: DEFAULT_TOL, denominators: 16 }
    }
}

/// The strongest non-degenerate, nonzero peaks by ‖a‖ among enumerated candidates.
pub fn strongest_peaks(
    f: &FbsComplex,
    an: &Analysis,
    p: &DecoratedPattern,
    module: &FourierModule,
    s: &PeakSearch,
) -> Result<Vec<(WaveVector, AmplitudeVector)>> {
    let dual = module.dual()?;
    let lattice = dual.first().is_some_and(|(_, h)| h.is_empty());
    let mut cands: Vec<(i64, WaveVector)> = Vec::new();
    for q in 1..=if lattice { s.denominators.max(1) } else { 1 } {
        let fine: Vec<(Vec<f64>, Vec<f64>)> =
            dual.iter().map(|(k, h)| (k.iter().map(|x| x / q as f64).collect(), h.clone())).collect();
        let e = Enumeration { ranges: vec![(-s.range * q, s.range * q); dual.len()], dual: fine, kmax: s.kmax };
        cands.extend(enumerate(&e)?.into_iter().filter(|w| norm(&w.k) > 1e-9).map(|mut w| {
            if q > 1 {
                w.label = None;
            }
            (q, w)
        }));
    }
    cands.sort_by(|(qa, a), (qb, b)| {
        let ha = a.internal.as_deref().map_or(0.0, norm);
        let hb = b.internal.as_deref().map_or(0.0, norm);
        qa.cmp(qb)
            .then_with(|| ha.total_cmp(&hb))
            .then_with(|| norm(&a.k).total_cmp(&norm(&b.k)))
            .then_with(|| a.label.cmp(&b.label))
    });
    let pool = if lattice { usize::MAX } else { s.pool };
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::new();
    for (_, w) in cands {
        if out.len() >= pool {
            break;
        }
        if seen.iter().any(|k| k.iter().zip(&w.k).all(|(a, b)| (a - b).abs() < 1e-9)) {
            continue;
        }
        seen.push(w.k.clone());
        if degeneracy_check(f, &an.gv, &an.basis, &w.k, s.tol).degenerate {
            continue;
        }
        let a = estimate_amplitudes(p, &w.k, Estimator::HardBall)?;
        out.push((w, a));
    }
    out.sort_by(|a, b| b.1.norm().total_cmp(&a.1.norm()));
    out.truncate(s.count);
    Ok(out)
}

// ---------------------------------------------------------------------------------------------
// checks

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SpanStatus {
    Checked,
    /// ‖a‖ below the noise floor.
    Inconclusive,
    /// k is degenerate; the constraints are not claimed there.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpanResult {
    pub status: SpanStatus,
    pub residual: Option<f64>,
}

/// ‖a − Πa‖/‖a‖ with Π the orthogonal projector onto the column span of `g`.
pub fn span_residual(g: &DMatrix<Complex64>, a: &[Complex64]) -> Result<f64> {
    if g.ncols() == 0 {
        return Err(Error::Argument("no generators".into()));
    }
    if g.nrows() != a.len() {
        return Err(Error::Argument(format!("{} generator components for {} amplitudes", g.nrows(), a.len())));
    }
    let av = DVector::from_column_slice(a);
    let an = av.norm();
    if an == 0.0 {
        return Ok(0.0);
    }
    let svd = g.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Internal("no left singular vectors".into()))?;
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut proj = DVector::zeros(a.len());
    for (j, s) in svd.singular_values.iter().enumerate() {
        if *s > 1e-12 * smax && smax > 0.0 {
            let c = u.column(j);
            proj += c * c.dotc(&av);
        }
    }
    Ok((av - proj).norm() / an)
}

pub fn verify_span(g: &DMatrix<Complex64>, a: &AmplitudeVector, floor: f64) -> Result<SpanResult> {
    if a.norm() < floor {
        return Ok(SpanResult { status: SpanStatus::Inconclusive, residual: None });
    }
    Ok(SpanResult { status: SpanStatus::Checked, residual: Some(span_residual(g, &a.values)?) })
}

/// Positions of every top cell's 0-vertex in a patch, flat per cell.
#[derive(Clone, Debug)]
pub struct CellOccurrences {
    pub dim: usize,
    pub radius: f64,
    pub cells: Vec<Vec<f64>>,
}

impl CellOccurrences {
    pub fn new(f: &FbsComplex, p: &DecoratedPattern) -> Result<Self> {
        let d = f.dim();
        let b = f.set();
        let protos = f.effective_prototiles();
        let offs: Vec<Vec<(usize, Vec<f64>)>> = protos
            .iter()
            .map(|pr| {
                pr.cells
                    .iter()
                    .map(|(label, o)| Ok((b.cell_index(d, label)?, f.basis().realize(o))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut cells = vec![Vec::new(); b.count(d)];
        for t in &p.tiles {
            let k = t.prototile.ok_or_else(|| Error::Structural(format!("unresolved prototile {}", t.name)))?;
            for (s, o) in &offs[k] {
                cells[*s].extend(t.translation.iter().zip(o).map(|(a, c)| a + c));
            }
        }
        Ok(CellOccurrences { dim: d, radius: p.radius, cells })
    }

    /// Amplitude of the temporary decoration at offset `y` from the 0-vertex of top cell `s`.
    pub fn amplitude(&self, s: usize, y: &[f64], k: &[f64], est: Estimator) -> Complex64 {
        let pts: Vec<f64> = self.cells[s].chunks_exact(self.dim).flat_map(|v| v.iter().zip(y).map(|(a, b)| a + b)).collect();
        exponential_sum(&pts, self.dim, k, self.radius, est)
    }
}

fn top_cell_geometry(f: &FbsComplex, s: usize) -> DMatrix<f64> {
    let d = f.dim();
    let ev: Vec<Vec<f64>> = f.edge_vectors(d, s).iter().map(|e| f.basis().realize(e)).collect();
    DMatrix::from_fn(d, d, |i, j| ev[j][i])
}

/// Strictly inside the open simplex spanned by the columns of `e` from the origin.
fn inside(e: &DMatrix<f64>, y: &[f64], margin: f64) -> bool {
    let Some(inv) = e.clone().try_inverse() else { return false };
    let c = inv * DVector::from_column_slice(y);
    c.iter().all(|&x| x > margin) && c.sum() < 1.0 - margin
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleResidual {
    pub face: String,
    pub probe: Vec<f64>,
    /// |e^{+2πik·t} Σ_{X⁺} a − a(x)| / |a(x)|.
    pub plus: f64,
    /// |e^{−2πik·t} Σ_{X⁻} a − a(x)| / |a(x)|.
    pub minus: f64,
    /// |∂_d(𝔰a_k)(x)| / |a(x)|.
    pub boundary: f64,
}

impl CycleResidual {
    pub fn max(&self) -> f64 {
        self.plus.max(self.minus).max(self.boundary)
    }
}

struct Neighbour {
    cell: usize,
    face: usize,
    sign: i8,
    edges: DMatrix<f64>,
    /// Offset of the face's 0-vertex from the cell's 0-vertex.
    shift: Vec<f64>,
}

fn neighbours(f: &FbsComplex, s: usize) -> Result<Vec<Neighbour>> {
    let d = f.dim();
    let b = f.set();
    let mut out = Vec::new();
    for c in 0..b.count(d) {
        for i in 0..=d {
            if b.face(d, i, c) != s {
                continue;
            }
            let shift =
                if i == 0 { f.basis().realize(f.rho(b.reference_edge(d, c, 1)?)) } else { vec![0.0; d] };
            let o = f.orientation(c)?;
            out.push(Neighbour {
                cell: c,
                face: i,
                sign: if i % 2 == 1 { o } else { -o },
                edges: top_cell_geometry(f, c),
                shift,
            });
        }
    }
    Ok(out)
}

/// Generalized cross product of the face's edge vectors.
fn face_normal(f: &FbsComplex, s: usize) -> Vec<f64> {
    let d = f.dim();
    if d == 1 {
        return vec![1.0];
    }
    let ev: Vec<Vec<f64>> = f.edge_vectors(d - 1, s).iter().map(|e| f.basis().realize(e)).collect();
    let v: Vec<f64> = (0..d)
        .map(|i| {
            let minor = DMatrix::from_fn(d - 1, d - 1, |r, c| ev[r][if c < i { c } else { c + 1 }]);
            if i % 2 == 0 { minor.determinant() } else { -minor.determinant() }
        })
        .collect();
    let n = norm(&v);
    v.iter().map(|x| x / n).collect()
}

fn admissible(ns: &[Neighbour], x: &[f64], t: &[f64]) -> bool {
    ns.iter().all(|n| {
        let sgn = if n.sign > 0 { 1.0 } else { -1.0 };
        let y: Vec<f64> = (0..x.len()).map(|i| x[i] + n.shift[i] + sgn * t[i]).collect();
        inside(&n.edges, &y, 1e-9)
    })
}

/// Local cycle condition at a point x of the (d−1)-cell `face` with barycentric-free
/// coordinates `coords`: both cancellation identities and the alternating face sum.
pub fn verify_cycle_condition(
    f: &FbsComplex,
    occ: &CellOccurrences,
    k: &[f64],
    face: usize,
    coords: &[Q],
    probe: Option<&[f64]>,
    est: Estimator,
) -> Result<CycleResidual> {
    let d = f.dim();
    let b = f.set();
    if face >= b.count(d - 1) {
        return Err(Error::Argument(format!("no {}-cell with index {face}", d - 1)));
    }
    let x = if d == 1 { vec![0.0] } else { f.simplex_geometry(d - 1, face, coords)? };
    let ns = neighbours(f, face)?;
    if !ns.iter().any(|n| n.sign > 0) || !ns.iter().any(|n| n.sign < 0) {
        return Err(Error::Geometry(format!("cell {} does not have neighbours on both sides", b.cells(d - 1)[face])));
    }
    let t = match probe {
        Some(t) => {
            if t.len() != d || !admissible(&ns, &x, t) {
                return Err(Error::Geometry("probe vector does not move x into every neighbour".into()));
            }
            t.to_vec()
        }
        None => {
            let nrm = face_normal(f, face);
            let scale = ns
                .iter()
                .flat_map(|n| (0..d).map(move |j| (0..d).map(|i| n.edges[(i, j)].powi(2)).sum::<f64>().sqrt()))
                .fold(f64::INFINITY, f64::min);
            let mut found = None;
            'outer: for eps in [0.1, 0.03, 0.01, 1e-3, 1e-4] {
                for sgn in [1.0, -1.0] {
                    let t: Vec<f64> = nrm.iter().map(|v| sgn * eps * scale * v).collect();
                    if admissible(&ns, &x, &t) {
                        found = Some(t);
                        break 'outer;
                    }
                }
            }
            found.ok_or_else(|| Error::Geometry(format!("no admissible probe at {}", b.cells(d - 1)[face])))?
        }
    };
    let offset = |n: &Neighbour, sgn: f64| -> Vec<f64> { (0..d).map(|i| x[i] + n.shift[i] + sgn * t[i]).collect() };
    let base: Vec<f64> = {
        let mut pts = Vec::new();
        for n in ns.iter().filter(|n| n.sign > 0) {
            let y: Vec<f64> = (0..d).map(|i| x[i] + n.shift[i]).collect();
            pts.extend(occ.cells[n.cell].chunks_exact(d).flat_map(|v| v.iter().zip(&y).map(|(a, c)| a + c).collect::<Vec<_>>()));
        }
        pts
    };
    let ax = exponential_sum(&base, d, k, occ.radius, est);
    let scale = ax.norm().max(f64::MIN_POSITIVE);
    let mut sum_plus = Complex64::new(0.0, 0.0);
    let mut sum_minus = Complex64::new(0.0, 0.0);
    let mut bd = Complex64::new(0.0, 0.0);
    let neg_t: Vec<f64> = t.iter().map(|v| -v).collect();
    for n in &ns {
        let sgn = if n.sign > 0 { 1.0 } else { -1.0 };
        let a = occ.amplitude(n.cell, &offset(n, sgn), k, est);
        if n.sign > 0 {
            sum_plus += a;
        } else {
            sum_minus += a;
        }
        // α_s(x) − α_{s'}(x_{s',i}) + t_{s',i} = ∓t
        let orient = f.orientation(n.cell)? as f64;
        let alt = if n.face % 2 == 0 { 1.0 } else { -1.0 };
        let ph = if n.sign > 0 { character(k, &neg_t) } else { character(k, &t) };
        bd += a * ph * (alt * orient);
    }
    Ok(CycleResidual {
        face: b.cells(d - 1)[face].clone(),
        plus: (character(k, &neg_t) * sum_plus - ax).norm() / scale,
        minus: (character(k, &t) * sum_minus - ax).norm() / scale,
        boundary: bd.norm() / scale,
        probe: t,
    })
}

/// The cycle condition at the centre of every (d−1)-cell.
pub fn verify_cycle_condition_all(
    f: &FbsComplex,
    occ: &CellOccurrences,
    k: &[f64],
    est: Estimator,
) -> Result<Vec<CycleResidual>> {
    let d = f.dim();
    let c = Q::new(1.into(), (d as i64).into());
    let coords = vec![c; d - 1];
    (0..f.set().count(d - 1)).map(|s| verify_cycle_condition(f, occ, k, s, &coords, None, est)).collect()
}

/// Residual of a(x₂) = exp(−2πik·t)·a(x₁), t = α_s(x₂) − α_s(x₁), for two points of one open
/// top cell.
pub fn verify_phase_relation(
    f: &FbsComplex,
    occ: &CellOccurrences,
    k: &[f64],
    x1: (&str, &[Q]),
    x2: (&str, &[Q]),
    est: Estimator,
) -> Result<f64> {
    if x1.0 != x2.0 {
        return Err(Error::Argument(format!("points lie in different cells {} and {}", x1.0, x2.0)));
    }
    let d = f.dim();
    let s = f.set().cell_index(d, x1.0).map_err(|_| Error::Argument(format!("{} is not a top cell", x1.0)))?;
    let open = |c: &[Q]| {
        let sum: Q = c.iter().sum();
        c.len() == d && c.iter().all(|x| *x > Q::from_integer(0.into())) && sum < Q::from_integer(1.into())
    };
    if !open(x1.1) || !open(x2.1) {
        return Err(Error::Argument("points must lie in the open cell".into()));
    }
    let y1 = f.simplex_geometry(d, s, x1.1)?;
    let y2 = f.simplex_geometry(d, s, x2.1)?;
    let t: Vec<f64> = y2.iter().zip(&y1).map(|(a, b)| a - b).collect();
    let a1 = occ.amplitude(s, &y1, k, est);
    let a2 = occ.amplitude(s, &y2, k, est);
    let scale = a1.norm().max(a2.norm());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((a2 - character(k, &t) * a1).norm() / scale)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntensityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// |(1/vol)Σ_{p,y} w_p e(k·y)|² summed point by point against |Σ_p w_p a_{k,p}|².
pub fn verify_intensity(p: &DecoratedPattern, k: &[f64], w: &[Complex64]) -> Result<IntensityCheck> {
    if w.len() != p.species.len() {
        return Err(Error::Argument(format!("{} weights for {} species", w.len(), p.species.len())));
    }
    let mut direct = Compensated::default();
    for (pts, wp) in p.points.iter().zip(w) {
        for y in pts.chunks_exact(p.dim) {
            direct.add(character(k, y) * wp);
        }
    }
    let lhs = (direct.value() / p.ball_volume()).norm_sqr();
    let rhs = estimate_amplitudes(p, k, Estimator::HardBall)?.intensity(w);
    // exact cancellations are measured against the largest attainable intensity
    let total: f64 = p.points.iter().zip(w).map(|(pts, wp)| wp.norm() * (pts.len() / p.dim.max(1)) as f64).sum();
    let ceiling = (total / p.ball_volume()).powi(2);
    let m = lhs.max(rhs).max(1e-12 * ceiling);
    Ok(IntensityCheck { lhs, rhs, gap: if m == 0.0 { 0.0 } else { (lhs - rhs).abs() / m } })
}

// ---------------------------------------------------------------------------------------------
// reports

#[derive(Clone, Debug, Serialize)]
pub struct PeakRecord {
    pub k: WaveVector,
    pub magnitudes: Vec<f64>,
    pub degenerate: bool,
    pub constraint_count: usize,
    pub span: SpanResult,
    /// Needs the point set; absent when amplitudes come from a table.
    pub intensity: Option<IntensityCheck>,
    /// Worst cycle-condition residual over the (d−1)-cells, when computed.
    pub cycle: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub species: Vec<String>,
    pub radius: f64,
    pub tol: f64,
    pub records: Vec<PeakRecord>,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub tol: f64,
    pub cycle_condition: bool,
    pub estimator: Estimator,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { tol: DEFAULT_TOL, cycle_condition: true, estimator: Estimator::HardBall }
    }
}

pub fn verify_peaks(
    f: &FbsComplex,
    an: &Analysis,
    p: &DecoratedPattern,
    peaks: &[WaveVector],
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    if p.species != f.species() {
        return Err(Error::Structural(format!("pattern species {:?} differ from complex species {:?}", p.species, f.species())));
    }
    let occ = if opts.cycle_condition { Some(CellOccurrences::new(f, p)?) } else { None };
    let floor = noise_floor(p);
    let m = f.decorations.len();
    let mut records = Vec::new();
    for w in peaks {
        let a = estimate_amplitudes(p, &w.k, opts.estimator)?;
        let dg = degeneracy_check(f, &an.gv, &an.basis, &w.k, opts.tol);
        let span = if dg.degenerate {
            SpanResult { status: SpanStatus::Skipped, residual: None }
        } else {
            verify_span(&an.generator_matrix(m, &w.k), &a, floor)?
        };
        let cycle = match &occ {
            Some(o) => Some(
                verify_cycle_condition_all(f, o, &w.k, opts.estimator)?.iter().map(|r| r.max()).fold(0.0, f64::max),
            ),
            None => None,
        };
        records.push(PeakRecord {
            k: w.clone(),
            magnitudes: a.values.iter().map(|z| z.norm()).collect(),
            degenerate: dg.degenerate,
            constraint_count: constraint_count_at_k(f, &w.k, opts.tol),
            span,
            intensity: Some(verify_intensity(p, &w.k, &p.weights)?),
            cycle,
        });
    }
    Ok(VerificationReport { species: f.species(), radius: p.radius, tol: opts.tol, records })
}

impl VerificationReport {
    pub fn worst_span(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.span.residual).reduce(f64::max)
    }

    pub fn worst_cycle(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.cycle).reduce(f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# radius {}  species {}\n", self.radius, self.species.join(" "));
        s.push_str("# k | |a_p| | degenerate | constraints | span | cycle | intensity gap\n");
        for r in &self.records {
            let k: Vec<String> = r.k.k.iter().map(|x| format!("{x:.9}")).collect();
            let mags: Vec<String> = r.magnitudes.iter().map(|x| format!("{x:.6e}")).collect();
            let span = match (r.span.status, r.span.residual) {
                (SpanStatus::Checked, Some(x)) => format!("{x:.3e}"),
                (SpanStatus::Inconclusive, _) => "inconclusive".into(),
                _ => "skipped".into(),
            };
            let cyc = r.cycle.map_or("-".into(), |x| format!("{x:.3e}"));
            let gap = r.intensity.as_ref().map_or("-".into(), |x| format!("{:.1e}", x.gap));
            s.push_str(&format!(
                "{} | {} | {} | {} | {} | {} | {}\n",
                k.join(" "),
                mags.join(" "),
                r.degenerate,
                r.constraint_count,
                span,
                cyc,
                gap
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tilings::{DecoratedPattern, TileInstance};

    fn comb(radius: f64) -> DecoratedPattern {
        let n = radius.ceil() as i64;
        let mut pts = Vec::new();
        for i in -n..=n {
            if (i as f64).abs() <= radius {
                pts.push(i as f64);
            }
        }
        DecoratedPattern {
            dim: 1,
            radius,
            species: vec!["x".into()],
            weights: vec![Complex64::new(1.0, 0.0)],
            tiles: Vec::<TileInstance>::new(),
            points: vec![pts],
        }
    }

    #[test]
    fn comb_amplitudes() {
        let p = comb(1e4);
        let a = estimate_amplitudes(&p, &[3.0], Estimator::HardBall).unwrap();
        assert!((a.values[0] - 1.0).norm() < 1e-3);
        let h = estimate_amplitudes(&p, &[0.5], Estimator::HardBall).unwrap();
        assert!(h.values[0].norm() < 1e-3);
        let t = estimate_amplitudes(&p, &[1.0], Estimator::Taper).unwrap();
        assert!((t.values[0] - 1.0).norm() < 1e-6);
    }

    #[test]
    fn empty_species_is_an_error() {
        let mut p = comb(10.0);
        p.points[0].clear();
        assert!(estimate_amplitudes(&p, &[1.0], Estimator::HardBall).is_err());
    }

    #[test]
    fn reduction_is_independent_of_threads() {
        let p = comb(3e4);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| estimate_amplitudes(&p, &[0.123], Estimator::HardBall).unwrap());
        let b = many.install(|| estimate_amplitudes(&p, &[0.123], Estimator::HardBall).unwrap());
        assert_eq!(a.values[0].re.to_bits(), b.values[0].re.to_bits());
        assert_eq!(a.values[0].im.to_bits(), b.values[0].im.to_bits());
    }

    #[test]
    fn projector_identity() {
        let g = DMatrix::from_row_slice(3, 1, &[Complex64::new(1.0, 0.5), Complex64::new(-0.3, 2.0), Complex64::new(0.0, -1.0)]);
        let c = Complex64::new(0.7, -1.3);
        let a: Vec<Complex64> = g.column(0).iter().map(|x| x * c).collect();
        assert!(span_residual(&g, &a).unwrap() < 1e-12);
        let b = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        let r = span_residual(&g, &b).unwrap();
        assert!(r > 0.1 && r <= 1.0);
    }

    #[test]
    fn candidates_need_a_spec() {
        let p = comb(5.0);
        assert!(matches!(bragg_candidates(None, None, &p), Err(Error::Argument(_))));
        let e = Enumeration { dual: vec![(vec![1.0], vec![])], ranges: vec![(-3, 3)], kmax: 10.0 };
        let ks = bragg_candidates(Some(&e), None, &p).unwrap();
        assert_eq!(ks.iter().map(|w| w.k[0]).collect::<Vec<_>>(), vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn comb_scan_finds_integers() {
        let p = comb(200.0);
        let s = Scan { lo: vec![0.3], hi: vec![3.3], steps: vec![301], floor: 0.1, refine: true, estimator: Estimator::HardBall };
        let ks = bragg_candidates(None, Some(&s), &p).unwrap();
        assert_eq!(ks.len(), 3);
        for w in ks {
            assert!((w.k[0] - w.k[0].round()).abs() < 1e-6, "{:?}", w.k);
        }
    }

    #[test]
    fn taper_mass_matches_quadrature() {
        for d in 1..=3 {
            let n = 200_000;
            let q: f64 = (0..n)
                .map(|i| {
                    let t = (i as f64 + 0.5) / n as f64;
                    (1.0 - t * t).powi(3) * t.powi(d as i32 - 1)
                })
                .sum::<f64>()
                / n as f64;
            assert!((taper_mass(d) - d as f64 * q).abs() < 1e-9);
        }
    }
}
