//! Flat-branched semi-simplicial complexes: a semi-simplicial set with exact edge vectors.
//!
//! Edge vectors are stored as rational coordinates in a [`FrequencyBasis`]; real vectors are
//! derived views. Decoration coordinates follow the reference-edge convention: a point of the
//! n-cell `s` with coordinates `c` sits at `Σ c_i ρ(e_{n,i}(s))` relative to the 0-vertex.

use crate::error::{Error, Result};
use crate::rational::{self, parse_q, format_q, Q, QVec};
use crate::simplicial::{SemiSimplicialSet, ValidationReport};
use num_complex::Complex64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// Real vectors realizing the coordinate system of edge vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyBasis {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
    /// Declared linear independence over ℚ.
    pub independent: bool,
}

impl FrequencyBasis {
    pub fn new(vectors: Vec<Vec<f64>>, independent: bool) -> Result<Self> {
        let dim = vectors.first().map(|v| v.len()).ok_or_else(|| Error::Structural("empty basis".into()))?;
        if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::Structural("basis vectors must share a positive dimension".into()));
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Structural("non-finite basis entry".into()));
        }
        Ok(FrequencyBasis { dim, vectors, independent })
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn realize(&self, coords: &[Q]) -> Vec<f64> {
        rational::realize(coords, &self.vectors, self.dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecorationPoint {
    pub id: String,
    pub cell: String,
    pub coords: QVec,
    pub weight: Complex64,
}

/// A prototile: a labelled union of top cells, each placed at an offset from the tile origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Prototile {
    pub name: String,
    /// `(top cell label, offset of its 0-vertex from the tile origin)`.
    pub cells: Vec<(String, QVec)>,
    /// Polytope vertices relative to the tile origin (boundary order for polygons).
    pub vertices: Vec<QVec>,
}

/// Formal integer combination of translated prototiles.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricChain {
    pub name: String,
    pub terms: Vec<ChainTerm>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainTerm {
    pub prototile: String,
    pub translation: QVec,
    pub coeff: i64,
}

#[derive(Clone, Debug)]
pub struct FbsComplex {
    b: SemiSimplicialSet,
    basis: FrequencyBasis,
    rho: Vec<QVec>,
    pub decorations: Vec<DecorationPoint>,
    pub prototiles: Vec<Prototile>,
    pub cycles: Vec<GeometricChain>,
    /// Direction used to order vertices, if the complex was built from geometry.
    pub direction: Option<Vec<f64>>,
}

/// Recognizes translated prototiles from exact vertex sets.
#[derive(Clone, Debug)]
pub struct TileClassifier {
    /// sorted vertices relative to the least one -> (prototile, origin relative to the least vertex)
    map: HashMap<Vec<QVec>, (usize, QVec)>,
}

impl TileClassifier {
    pub fn new(prototiles: &[Prototile]) -> Self {
        let mut map = HashMap::new();
        for (k, p) in prototiles.iter().enumerate() {
            let (key, least) = Self::key(&p.vertices);
            map.entry(key).or_insert((k, rational::neg(&least)));
        }
        TileClassifier { map }
    }

    fn key(vertices: &[QVec]) -> (Vec<QVec>, QVec) {
        let least = vertices.iter().min().cloned().unwrap_or_default();
        let mut rel: Vec<QVec> = vertices.iter().map(|v| rational::sub(v, &least)).collect();
        rel.sort();
        (rel, least)
    }

    /// Prototile index and translation of its origin, if the vertex set is a translated prototile.
    pub fn classify(&self, vertices: &[QVec]) -> Option<(usize, QVec)> {
        let (key, least) = Self::key(vertices);
        self.map.get(&key).map(|(k, o)| (*k, rational::add(&least, o)))
    }
}

#[derive(Clone, Debug, Default)]
pub struct FbsReport {
    pub simplicial: ValidationReport,
    /// 2-cells whose edge vectors do not close.
    pub open_boundaries: Vec<String>,
    /// Top cells whose reference edges are not independent.
    pub degenerate_cells: Vec<String>,
}

impl FbsReport {
    pub fn is_ok(&self) -> bool {
        self.simplicial.is_ok() && self.open_boundaries.is_empty() && self.degenerate_cells.is_empty()
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for v in &self.simplicial.violations {
            out.push(format!("simplicial identity violated: n={} i={} j={} cell={}", v.n, v.i, v.j, v.cell));
        }
        for v in &self.simplicial.unreachable_vertices {
            out.push(format!("disconnected 1-skeleton: vertex {v} unreachable"));
        }
        if self.simplicial.empty_top {
            out.push("no cells of top degree".into());
        }
        for c in &self.open_boundaries {
            out.push(format!("edge vectors do not close on 2-cell {c}"));
        }
        for c in &self.degenerate_cells {
            out.push(format!("degenerate top cell {c}"));
        }
        out
    }
}

impl FbsComplex {
    pub fn new(b: SemiSimplicialSet, basis: FrequencyBasis, rho: Vec<QVec>) -> Result<Self> {
        if b.dimension() == 0 {
            return Err(Error::Structural("complex needs edges".into()));
        }
        if rho.len() != b.count(1) {
            return Err(Error::Structural(format!("{} edge vectors for {} edges", rho.len(), b.count(1))));
        }
        if rho.iter().any(|v| v.len() != basis.rank()) {
            return Err(Error::Structural("edge vector length differs from basis rank".into()));
        }
        if basis.dim != b.dimension() {
            return Err(Error::Structural(format!(
                "ambient dimension {} differs from complex dimension {}",
                basis.dim,
                b.dimension()
            )));
        }
        Ok(FbsComplex { b, basis, rho, decorations: Vec::new(), prototiles: Vec::new(), cycles: Vec::new(), direction: None })
    }

    pub fn set(&self) -> &SemiSimplicialSet {
        &self.b
    }

    pub fn basis(&self) -> &FrequencyBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.b.dimension()
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn rho(&self, edge: usize) -> &QVec {
        &self.rho[edge]
    }

    /// ρ(e_{n,i}(s)) for i = 1..=n.
    pub fn edge_vectors(&self, n: usize, s: usize) -> Vec<QVec> {
        (1..=n).map(|i| self.rho[self.b.reference_edge(n, s, i).expect("valid degree")].clone()).collect()
    }

    pub fn validate(&self) -> FbsReport {
        let simplicial = self.b.validate();
        let mut rep = FbsReport { simplicial, ..Default::default() };
        if self.dim() >= 2 {
            for t in 0..self.b.count(2) {
                let mut v = rational::zero_vec(self.rank());
                for i in 0..=2 {
                    let e = &self.rho[self.b.face(2, i, t)];
                    v = if i == 1 { rational::sub(&v, e) } else { rational::add(&v, e) };
                }
                if !rational::is_zero(&v) {
                    rep.open_boundaries.push(self.b.cells(2)[t].clone());
                }
            }
        }
        for s in 0..self.b.count(self.dim()) {
            if self.orientation(s).is_err() {
                rep.degenerate_cells.push(self.b.cells(self.dim())[s].clone());
            }
        }
        rep
    }

    /// 𝔖(s): sign of the determinant of the realized reference edges of a top cell.
    pub fn orientation(&self, s: usize) -> Result<i8> {
        let d = self.dim();
        let ev = self.edge_vectors(d, s);
        if self.rank() == d {
            let dq = rational::det(&ev);
            if dq.is_zero() {
                return Err(Error::Geometry(format!("cell {} is degenerate", self.b.cells(d)[s])));
            }
            let db = rational::det_sign_f64(&self.basis.vectors)
                .ok_or_else(|| Error::Geometry("basis is numerically singular".into()))?;
            return Ok(if dq.is_positive() { db } else { -db });
        }
        let cols: Vec<Vec<f64>> = ev.iter().map(|v| self.basis.realize(v)).collect();
        rational::det_sign_f64(&cols).ok_or_else(|| Error::Geometry(format!("cell {} is degenerate", self.b.cells(d)[s])))
    }

    pub fn orientations(&self) -> Result<Vec<i8>> {
        (0..self.b.count(self.dim())).map(|s| self.orientation(s)).collect()
    }

    fn check_coords(&self, n: usize, coords: &[Q]) -> Result<()> {
        if coords.len() != n {
            return Err(Error::Argument(format!("{} coordinates for a {n}-cell", coords.len())));
        }
        let sum: Q = coords.iter().sum();
        if coords.iter().any(|c| c.is_negative()) || sum > rational::q(1) {
            return Err(Error::Argument("point outside the closed simplex".into()));
        }
        Ok(())
    }

    /// α_s(x) in exact frequency coordinates.
    pub fn simplex_point_exact(&self, n: usize, s: usize, coords: &[Q]) -> Result<QVec> {
        if n == 0 || n > self.dim() || s >= self.b.count(n) {
            return Err(Error::Argument(format!("no {n}-cell with index {s}")));
        }
        self.check_coords(n, coords)?;
        let mut v = rational::zero_vec(self.rank());
        for (c, e) in coords.iter().zip(self.edge_vectors(n, s)) {
            v = rational::add(&v, &rational::scale(&e, c));
        }
        Ok(v)
    }

    /// α_s(x) as a real vector.
    pub fn simplex_geometry(&self, n: usize, s: usize, coords: &[Q]) -> Result<Vec<f64>> {
        Ok(self.basis.realize(&self.simplex_point_exact(n, s, coords)?))
    }

    /// Top cell index and exact offset α_s(x_p) of a decoration.
    pub fn decoration_host(&self, p: &DecorationPoint) -> Result<(usize, QVec)> {
        let d = self.dim();
        for n in 0..d {
            if self.b.cell_index(n, &p.cell).is_ok() {
                return Err(Error::Unsupported(format!(
                    "decoration {} sits on the {n}-cell {}; only top cells are supported",
                    p.id, p.cell
                )));
            }
        }
        let s = self.b.cell_index(d, &p.cell)?;
        Ok((s, self.simplex_point_exact(d, s, &p.coords)?))
    }

    /// Prototile containing a top cell and the cell's offset within it.
    pub fn prototile_of(&self, s: usize) -> Option<(usize, &QVec)> {
        let label = &self.b.cells(self.dim())[s];
        self.prototiles
            .iter()
            .enumerate()
            .find_map(|(k, p)| p.cells.iter().find(|(c, _)| c == label).map(|(_, o)| (k, o)))
    }

    pub fn prototile_index(&self, name: &str) -> Result<usize> {
        self.prototiles
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::Structural(format!("unknown prototile '{name}'")))
    }

    /// Prototiles to use for tilings: the declared ones, or one per top cell.
    pub fn effective_prototiles(&self) -> Vec<Prototile> {
        if !self.prototiles.is_empty() {
            return self.prototiles.clone();
        }
        let d = self.dim();
        (0..self.b.count(d))
            .map(|s| {
                let ev = self.edge_vectors(d, s);
                let mut vertices = vec![rational::zero_vec(self.rank())];
                vertices.extend(ev);
                Prototile { name: self.b.cells(d)[s].clone(), cells: vec![(self.b.cells(d)[s].clone(), rational::zero_vec(self.rank()))], vertices }
            })
            .collect()
    }

    /// Decoration offsets from the tile origin, per prototile: `(decoration index, offset)`.
    pub fn decoration_offsets(&self) -> Result<Vec<Vec<(usize, QVec)>>> {
        let protos = self.effective_prototiles();
        let mut out = vec![Vec::new(); protos.len()];
        for (p, dec) in self.decorations.iter().enumerate() {
            let (s, y) = self.decoration_host(dec)?;
            let label = &self.b.cells(self.dim())[s];
            let (k, off) = protos
                .iter()
                .enumerate()
                .find_map(|(k, pr)| pr.cells.iter().find(|(c, _)| c == label).map(|(_, o)| (k, o.clone())))
                .ok_or_else(|| Error::Structural(format!("cell {label} belongs to no prototile")))?;
            out[k].push((p, rational::add(&off, &y)));
        }
        Ok(out)
    }

    pub fn tile_classifier(&self) -> TileClassifier {
        TileClassifier::new(&self.effective_prototiles())
    }

    pub fn species(&self) -> Vec<String> {
        self.decorations.iter().map(|d| d.id.clone()).collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: FbsFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        f.into_complex()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&FbsFile::from_complex(self)).expect("serializable") + "\n"
    }
}

// ---------------------------------------------------------------------------------------------
// file format

#[derive(Serialize, Deserialize)]
struct FbsFile {
    dimension: usize,
    cells: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    faces: BTreeMap<String, BTreeMap<String, String>>,
    basis: Vec<Vec<f64>>,
    #[serde(default = "default_true")]
    basis_independent: bool,
    rho: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    decorations: Vec<DecorationFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    prototiles: Vec<PrototileFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    cycles: Vec<ChainFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<Vec<f64>>,
}

fn default_true() -> bool {
    true
}

#[derive(Serialize, Deserialize)]
struct DecorationFile {
    id: String,
    cell: String,
    coords: Vec<String>,
    #[serde(default = "unit_weight")]
    weight: [f64; 2],
}

fn unit_weight() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Serialize, Deserialize)]
struct PrototileFile {
    name: String,
    cells: Vec<PlacedCellFile>,
    #[serde(default)]
    vertices: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct PlacedCellFile {
    cell: String,
    offset: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ChainFile {
    name: String,
    terms: Vec<ChainTermFile>,
}

#[derive(Serialize, Deserialize)]
struct ChainTermFile {
    prototile: String,
    translation: Vec<String>,
    coeff: i64,
}

fn parse_vec(v: &[String]) -> Result<QVec> {
    v.iter().map(|s| parse_q(s)).collect()
}

fn fmt_vec(v: &[Q]) -> Vec<String> {
    v.iter().map(format_q).collect()
}

impl FbsFile {
    fn into_complex(self) -> Result<FbsComplex> {
        let d = self.dimension;
        let mut cells = Vec::with_capacity(d + 1);
        for n in 0..=d {
            cells.push(self.cells.get(&n.to_string()).cloned().unwrap_or_default());
        }
        if let Some(k) = self.cells.keys().find(|k| k.parse::<usize>().map_or(true, |n| n > d)) {
            return Err(Error::Structural(format!("cell degree key '{k}' out of range")));
        }
        let mut faces = BTreeMap::new();
        for (key, map) in self.faces {
            let (n, i) = key
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)))
                .ok_or_else(|| Error::Parse(format!("bad face key '{key}', expected \"n,i\"")))?;
            faces.insert((n, i), map);
        }
        let b = SemiSimplicialSet::new(cells, &faces)?;
        let basis = FrequencyBasis::new(self.basis, self.basis_independent)?;
        let r = basis.rank();
        let mut rho = Vec::with_capacity(b.count(1));
        for e in b.cells(1) {
            let v = self.rho.get(e).ok_or_else(|| Error::Structural(format!("no edge vector for '{e}'")))?;
            let v = parse_vec(v)?;
            if v.len() != r {
                return Err(Error::Structural(format!("edge vector of '{e}' has length {}, basis rank {r}", v.len())));
            }
            rho.push(v);
        }
        if let Some(extra) = self.rho.keys().find(|k| b.cell_index(1, k).is_err()) {
            return Err(Error::Structural(format!("edge vector given for unknown edge '{extra}'")));
        }
        let mut f = FbsComplex::new(b, basis, rho)?;
        for dec in self.decorations {
            let coords = parse_vec(&dec.coords)?;
            let known = (0..=d).any(|n| f.b.cell_index(n, &dec.cell).is_ok());
            if !known {
                return Err(Error::Structural(format!("decoration {} names unknown cell '{}'", dec.id, dec.cell)));
            }
            f.decorations.push(DecorationPoint {
                id: dec.id,
                cell: dec.cell,
                coords,
                weight: Complex64::new(dec.weight[0], dec.weight[1]),
            });
        }
        let mut ids: Vec<&str> = f.decorations.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Structural("duplicate decoration id".into()));
        }
        for p in self.prototiles {
            let mut placed = Vec::new();
            for c in p.cells {
                f.b.cell_index(d, &c.cell)?;
                let off = parse_vec(&c.offset)?;
                if off.len() != r {
                    return Err(Error::Structural(format!("offset length in prototile {}", p.name)));
                }
                placed.push((c.cell, off));
            }
            let vertices = p.vertices.iter().map(|v| parse_vec(v)).collect::<Result<Vec<_>>>()?;
            f.prototiles.push(Prototile { name: p.name, cells: placed, vertices });
        }
        for c in self.cycles {
            let mut terms = Vec::new();
            for t in c.terms {
                f.prototile_index(&t.prototile)?;
                let translation = parse_vec(&t.translation)?;
                if translation.len() != r {
                    return Err(Error::Structural(format!("translation length in chain {}", c.name)));
                }
                terms.push(ChainTerm { prototile: t.prototile, translation, coeff: t.coeff });
            }
            f.cycles.push(GeometricChain { name: c.name, terms });
        }
        f.direction = self.direction;
        Ok(f)
    }

    fn from_complex(f: &FbsComplex) -> Self {
        let b = &f.b;
        let d = b.dimension();
        let cells = (0..=d).map(|n| (n.to_string(), b.cells(n).to_vec())).collect();
        let mut faces = BTreeMap::new();
        for n in 1..=d {
            for i in 0..=n {
                let map = (0..b.count(n)).map(|s| (b.cells(n)[s].clone(), b.cells(n - 1)[b.face(n, i, s)].clone())).collect();
                faces.insert(format!("{n},{i}"), map);
            }
        }
        FbsFile {
            dimension: d,
            cells,
            faces,
            basis: f.basis.vectors.clone(),
            basis_independent: f.basis.independent,
            rho: (0..b.count(1)).map(|e| (b.cells(1)[e].clone(), fmt_vec(&f.rho[e]))).collect(),
            decorations: f
                .decorations
                .iter()
                .map(|p| DecorationFile { id: p.id.clone(), cell: p.cell.clone(), coords: fmt_vec(&p.coords), weight: [p.weight.re, p.weight.im] })
                .collect(),
            prototiles: f
                .prototiles
                .iter()
                .map(|p| PrototileFile {
                    name: p.name.clone(),
                    cells: p.cells.iter().map(|(c, o)| PlacedCellFile { cell: c.clone(), offset: fmt_vec(o) }).collect(),
                    vertices: p.vertices.iter().map(|v| fmt_vec(v)).collect(),
                })
                .collect(),
            cycles: f
                .cycles
                .iter()
                .map(|c| ChainFile {
                    name: c.name.clone(),
                    terms: c
                        .terms
                        .iter()
                        .map(|t| ChainTermFile { prototile: t.prototile.clone(), translation: fmt_vec(&t.translation), coeff: t.coeff })
                        .collect(),
                })
                .collect(),
            direction: f.direction.clone(),
        }
    }
}

// ---------------------------------------------------------------------------------------------
// building complexes from prototile geometry

#[derive(Clone, Debug)]
pub enum Shape {
    /// `origin + Σ t_i edges[i]`, `t ∈ [0,1]^d`.
    Parallelotope { origin: QVec, edges: Vec<QVec> },
    /// Convex polygon, vertices in boundary order; fan-triangulated from the first vertex.
    Polygon { vertices: Vec<QVec> },
}

#[derive(Clone, Debug)]
pub struct DecorationSpec {
    pub id: String,
    /// Absolute position in the same frame as the shape.
    pub point: QVec,
    pub weight: Complex64,
}

#[derive(Clone, Debug)]
pub struct PrototileSpec {
    pub name: String,
    pub shape: Shape,
    pub decorations: Vec<DecorationSpec>,
}

/// Triangulated prototile: simplices with vertices sorted along the ordering direction.
#[derive(Clone, Debug)]
pub struct Fragment {
    pub name: String,
    /// Lowest vertex along the direction; offsets are taken from here.
    pub origin: QVec,
    pub simplices: Vec<Vec<QVec>>,
    /// Polytope vertices (absolute) in boundary order for polygons.
    pub vertices: Vec<QVec>,
    /// `(id, simplex index, coordinates, weight)`.
    pub decorations: Vec<(String, usize, QVec, Complex64)>,
}

fn project(basis: &FrequencyBasis, dir: &[f64], v: &[Q]) -> f64 {
    basis.realize(v).iter().zip(dir).map(|(a, b)| a * b).sum()
}

fn sort_along(basis: &FrequencyBasis, dir: &[f64], mut vs: Vec<QVec>) -> Result<Vec<QVec>> {
    let keys: Vec<f64> = vs.iter().map(|v| project(basis, dir, v)).collect();
    let mut idx: Vec<usize> = (0..vs.len()).collect();
    idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    for w in idx.windows(2) {
        let gap = keys[w[1]] - keys[w[0]];
        if gap.abs() < 1e-9 {
            return Err(Error::Geometry("ordering direction is orthogonal to an edge".into()));
        }
    }
    let mut out = Vec::with_capacity(vs.len());
    for i in idx {
        out.push(std::mem::take(&mut vs[i]));
    }
    Ok(out)
}

fn realized_volume(basis: &FrequencyBasis, simplex: &[QVec]) -> f64 {
    let cols: Vec<Vec<f64>> = simplex[1..].iter().map(|v| basis.realize(&rational::sub(v, &simplex[0]))).collect();
    let n = cols.len();
    nalgebra::DMatrix::from_fn(n, n, |i, j| cols[j][i]).determinant()
}

/// Coordinates of `x` in the closed simplex, or `None` when outside.
pub fn simplex_coords(simplex: &[QVec], x: &[Q]) -> Option<QVec> {
    let cols: Vec<QVec> = simplex[1..].iter().map(|v| rational::sub(v, &simplex[0])).collect();
    let c = rational::solve_columns(&cols, &rational::sub(x, &simplex[0]))?;
    let sum: Q = c.iter().sum();
    if c.iter().any(|t| t.is_negative()) || sum > rational::q(1) {
        return None;
    }
    Some(c)
}

/// Triangulate a prototile with vertices ordered along `dir`. Parallelotopes yield d!
/// simplices along monotone lattice paths; polygons yield a fan from their first vertex.
pub fn triangulate_prototile(spec: &PrototileSpec, basis: &FrequencyBasis, dir: &[f64]) -> Result<Fragment> {
    let d = basis.dim;
    let (origin, simplices, vertices) = match &spec.shape {
        Shape::Parallelotope { origin, edges } => {
            if edges.len() != d {
                return Err(Error::Geometry(format!("parallelotope needs {d} edges, got {}", edges.len())));
            }
            let mut o = origin.clone();
            let mut es = Vec::with_capacity(d);
            for e in edges {
                let p = project(basis, dir, e);
                if p.abs() < 1e-9 {
                    return Err(Error::Geometry("ordering direction is orthogonal to an edge".into()));
                }
                if p < 0.0 {
                    o = rational::add(&o, e);
                    es.push(rational::neg(e));
                } else {
                    es.push(e.clone());
                }
            }
            let mut simplices = Vec::new();
            for perm in permutations(d) {
                let mut v = o.clone();
                let mut s = vec![v.clone()];
                for &i in &perm {
                    v = rational::add(&v, &es[i]);
                    s.push(v.clone());
                }
                simplices.push(s);
            }
            let mut vertices = Vec::new();
            for mask in 0..(1usize << d) {
                let mut v = o.clone();
                for (i, e) in es.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        v = rational::add(&v, e);
                    }
                }
                vertices.push(v);
            }
            (o, simplices, vertices)
        }
        Shape::Polygon { vertices } => {
            if d != 2 || vertices.len() < 3 {
                return Err(Error::Geometry("polygons need dimension 2 and at least 3 vertices".into()));
            }
            let mut simplices = Vec::new();
            for i in 1..vertices.len() - 1 {
                simplices.push(sort_along(basis, dir, vec![vertices[0].clone(), vertices[i].clone(), vertices[i + 1].clone()])?);
            }
            let lowest = sort_along(basis, dir, vertices.clone())?.remove(0);
            (lowest, simplices, vertices.clone())
        }
    };
    for s in &simplices {
        let vol = realized_volume(basis, s);
        let scale: f64 = s[1..]
            .iter()
            .map(|v| basis.realize(&rational::sub(v, &s[0])).iter().map(|x| x * x).sum::<f64>().sqrt())
            .product();
        if vol.abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Geometry(format!("prototile {} is degenerate", spec.name)));
        }
    }
    let simplices: Vec<Vec<QVec>> = simplices.into_iter().map(|s| sort_along(basis, dir, s)).collect::<Result<_>>()?;
    let mut decorations = Vec::new();
    for dec in &spec.decorations {
        let found = simplices.iter().enumerate().find_map(|(k, s)| simplex_coords(s, &dec.point).map(|c| (k, c)));
        let (k, c) = found.ok_or_else(|| Error::Geometry(format!("decoration {} lies outside prototile {}", dec.id, spec.name)))?;
        decorations.push((dec.id.clone(), k, c, dec.weight));
    }
    Ok(Fragment { name: spec.name.clone(), origin, simplices, vertices, decorations })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 0..n {
        for rest in permutations(n - 1) {
            let mut p = vec![first];
            p.extend(rest.into_iter().map(|x| if x >= first { x + 1 } else { x }));
            out.push(p);
        }
    }
    out
}

/// Glues triangulated prototiles along faces that are translates of each other.
pub struct ComplexBuilder {
    basis: FrequencyBasis,
    dir: Vec<f64>,
    fragments: Vec<Fragment>,
}

impl ComplexBuilder {
    pub fn new(basis: FrequencyBasis, dir: Vec<f64>) -> Result<Self> {
        if dir.len() != basis.dim {
            return Err(Error::Argument("direction dimension mismatch".into()));
        }
        Ok(ComplexBuilder { basis, dir, fragments: Vec::new() })
    }

    pub fn add(&mut self, spec: &PrototileSpec) -> Result<&Fragment> {
        let f = triangulate_prototile(spec, &self.basis, &self.dir)?;
        self.fragments.push(f);
        Ok(self.fragments.last().unwrap())
    }

    pub fn build(self) -> Result<FbsComplex> {
        let d = self.basis.dim;
        // class key of a lower simplex: edge vectors from its 0-vertex
        let mut classes: Vec<HashMap<Vec<QVec>, usize>> = vec![HashMap::new(); d];
        let mut reps: Vec<Vec<Vec<QVec>>> = vec![Vec::new(); d];
        let mut cells: Vec<Vec<String>> = vec![Vec::new(); d + 1];
        let mut faces: Vec<Vec<Vec<usize>>> = (0..=d).map(|n| vec![Vec::new(); if n == 0 { 0 } else { n + 1 }]).collect();
        let key = |s: &[QVec]| -> Vec<QVec> { s[1..].iter().map(|v| rational::sub(v, &s[0])).collect() };

        fn intern(
            s: &[QVec],
            classes: &mut [HashMap<Vec<QVec>, usize>],
            reps: &mut [Vec<Vec<QVec>>],
            key: &dyn Fn(&[QVec]) -> Vec<QVec>,
        ) -> (usize, bool) {
            let n = s.len() - 1;
            let k = key(s);
            if let Some(&c) = classes[n].get(&k) {
                return (c, false);
            }
            let c = reps[n].len();
            classes[n].insert(k, c);
            let origin = rational::zero_vec(s[0].len());
            let mut rep = vec![origin.clone()];
            rep.extend(s[1..].iter().map(|v| rational::sub(v, &s[0])));
            reps[n].push(rep);
            (c, true)
        }

        let mut prototiles = Vec::new();
        let mut decorations = Vec::new();
        let mut top: Vec<Vec<QVec>> = Vec::new();
        for f in &self.fragments {
            let mut placed = Vec::new();
            let single = f.simplices.len() == 1;
            let label_of = |k: usize| if single { f.name.clone() } else { format!("{}.{}", f.name, k) };
            for (k, s) in f.simplices.iter().enumerate() {
                let label = label_of(k);
                cells[d].push(label.clone());
                top.push(s.clone());
                placed.push((label, rational::sub(&s[0], &f.origin)));
            }
            for (id, k, c, w) in &f.decorations {
                decorations.push(DecorationPoint { id: id.clone(), cell: label_of(*k), coords: c.clone(), weight: *w });
            }
            prototiles.push(Prototile {
                name: f.name.clone(),
                cells: placed,
                vertices: f.vertices.iter().map(|v| rational::sub(v, &f.origin)).collect(),
            });
        }
        // faces of top cells, then of each newly interned lower class
        for s in &top {
            for i in 0..=d {
                let mut face = s.clone();
                face.remove(i);
                let (c, _) = intern(&face, &mut classes, &mut reps, &key);
                faces[d][i].push(c);
            }
        }
        for n in (1..d).rev() {
            let current: Vec<Vec<QVec>> = reps[n].clone();
            for s in &current {
                for i in 0..=n {
                    let mut face = s.clone();
                    face.remove(i);
                    let (c, _) = intern(&face, &mut classes, &mut reps, &key);
                    faces[n][i].push(c);
                }
            }
        }
        for n in 0..d {
            let prefix = match n {
                0 => "v".to_string(),
                1 => "e".to_string(),
                _ => format!("f{n}."),
            };
            cells[n] = (0..reps[n].len()).map(|k| format!("{prefix}{k}")).collect();
        }
        let rho: Vec<QVec> = if d == 1 {
            top.iter().map(|s| rational::sub(&s[1], &s[0])).collect()
        } else {
            reps[1].iter().map(|s| s[1].clone()).collect()
        };
        let b = SemiSimplicialSet::from_indices(cells, faces)?;
        let mut f = FbsComplex::new(b, self.basis, rho)?;
        f.decorations = decorations;
        f.prototiles = prototiles;
        f.direction = Some(self.dir);
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{from_ints, q, qf};

    fn binary(v1: f64, v2: f64) -> FbsComplex {
        let json = format!(
            r#"{{"dimension":1,"cells":{{"0":["s0"],"1":["s1","s2"]}},
               "faces":{{"1,0":{{"s1":"s0","s2":"s0"}},"1,1":{{"s1":"s0","s2":"s0"}}}},
               "basis":[[{v1}],[{v2}]],"rho":{{"s1":["1","0"],"s2":["0","1"]}},
               "decorations":[{{"id":"x1","cell":"s1","coords":["1/3"],"weight":[1,0]}}]}}"#
        );
        FbsComplex::from_json_str(&json).unwrap()
    }

    fn unit_square_basis() -> FrequencyBasis {
        FrequencyBasis::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], true).unwrap()
    }

    #[test]
    fn binary_is_valid() {
        let f = binary(1.618, 1.0);
        assert!(f.validate().is_ok());
        assert_eq!(f.orientation(0).unwrap(), 1);
        let g = f.simplex_geometry(1, 0, &[qf(1, 3)]).unwrap();
        assert!((g[0] - 1.618 / 3.0).abs() < 1e-15);
        assert!(f.simplex_geometry(1, 0, &[qf(4, 3)]).is_err());
        assert!(f.simplex_geometry(1, 0, &[qf(-1, 3)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = binary(1.5, 1.0);
        let g = FbsComplex::from_json_str(&f.to_json_string()).unwrap();
        assert_eq!(f.to_json_string(), g.to_json_string());
        assert_eq!(g.decorations[0].coords, vec![qf(1, 3)]);
    }

    #[test]
    fn missing_rho_is_structural() {
        let json = r#"{"dimension":1,"cells":{"0":["a"],"1":["e"]},"faces":{"1,0":{"e":"a"},"1,1":{"e":"a"}},
                       "basis":[[1.0]],"rho":{}}"#;
        let err = FbsComplex::from_json_str(json).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
        assert!(matches!(FbsComplex::from_json_str("{").unwrap_err(), Error::Parse(_)));
    }

    #[test]
    fn open_triangle_is_reported() {
        let json = r#"{"dimension":2,"cells":{"0":["v"],"1":["a","b","c"],"2":["t"]},
            "faces":{"1,0":{"a":"v","b":"v","c":"v"},"1,1":{"a":"v","b":"v","c":"v"},
                     "2,0":{"t":"b"},"2,1":{"t":"c"},"2,2":{"t":"a"}},
            "basis":[[1,0],[0,1]],"rho":{"a":["1","0"],"b":["0","1"],"c":["1","2"]}}"#;
        let f = FbsComplex::from_json_str(json).unwrap();
        let r = f.validate();
        assert_eq!(r.open_boundaries, vec!["t".to_string()]);
        assert!(r.degenerate_cells.is_empty());
    }

    #[test]
    fn square_gives_two_triangles() {
        let mut cb = ComplexBuilder::new(unit_square_basis(), vec![(0.3f64).cos(), (0.3f64).sin()]).unwrap();
        let spec = PrototileSpec {
            name: "sq".into(),
            shape: Shape::Parallelotope { origin: from_ints(&[0, 0]), edges: vec![from_ints(&[1, 0]), from_ints(&[0, 1])] },
            decorations: vec![DecorationSpec { id: "c".into(), point: vec![qf(1, 2), qf(1, 2)], weight: Complex64::new(1.0, 0.0) }],
        };
        let frag = cb.add(&spec).unwrap();
        assert_eq!(frag.simplices.len(), 2);
        let f = cb.build().unwrap();
        assert_eq!((f.set().count(0), f.set().count(1), f.set().count(2)), (1, 3, 2));
        assert!(f.validate().is_ok());
        // the two halves share the diagonal and have opposite orientation
        let o = f.orientations().unwrap();
        assert_eq!(o[0], -o[1]);
        // centre decoration: vertex-average oracle
        let (s, y) = f.decoration_host(&f.decorations[0]).unwrap();
        let (_, off) = f.prototile_of(s).unwrap();
        let pos = f.basis().realize(&rational::add(off, &y));
        let avg: Vec<f64> = (0..2).map(|c| f.prototiles[0].vertices.iter().map(|v| f.basis().realize(v)[c]).sum::<f64>() / 4.0).collect();
        assert!((pos[0] - avg[0]).abs() < 1e-15 && (pos[1] - avg[1]).abs() < 1e-15);
    }

    #[test]
    fn interval_is_itself() {
        let basis = FrequencyBasis::new(vec![vec![2.0]], true).unwrap();
        let spec = PrototileSpec {
            name: "i".into(),
            shape: Shape::Parallelotope { origin: vec![q(0)], edges: vec![vec![q(1)]] },
            decorations: vec![],
        };
        let frag = triangulate_prototile(&spec, &basis, &[1.0]).unwrap();
        assert_eq!(frag.simplices, vec![vec![vec![q(0)], vec![q(1)]]]);
        // reversed direction moves the origin to the other end
        let frag = triangulate_prototile(&spec, &basis, &[-1.0]).unwrap();
        assert_eq!(frag.origin, vec![q(1)]);
    }

    #[test]
    fn parallelepiped_volume_sum() {
        let basis = FrequencyBasis::new(vec![vec![1.0, 0.2, 0.1], vec![0.3, 1.1, -0.2], vec![0.1, 0.4, 0.9]], true).unwrap();
        let spec = PrototileSpec {
            name: "p".into(),
            shape: Shape::Parallelotope {
                origin: from_ints(&[0, 0, 0]),
                edges: vec![from_ints(&[1, 0, 0]), from_ints(&[0, 1, 0]), from_ints(&[0, 0, 1])],
            },
            decorations: vec![],
        };
        let dir = [0.5, 0.6, 0.62];
        let frag = triangulate_prototile(&spec, &basis, &dir).unwrap();
        assert_eq!(frag.simplices.len(), 6);
        let total: f64 = frag.simplices.iter().map(|s| realized_volume(&basis, s).abs() / 6.0).sum();
        let det = nalgebra::Matrix3::from_fn(|i, j| basis.vectors[j][i]).determinant().abs();
        assert!((total - det).abs() < 1e-12);
        let mut cb = ComplexBuilder::new(basis, dir.to_vec()).unwrap();
        cb.add(&spec).unwrap();
        let f = cb.build().unwrap();
        assert!(f.validate().is_ok());
    }

    #[test]
    fn lower_decorations_are_unsupported() {
        let mut f = binary(1.5, 1.0);
        f.decorations.push(DecorationPoint { id: "v".into(), cell: "s0".into(), coords: vec![], weight: Complex64::new(1.0, 0.0) });
        assert!(matches!(f.decoration_host(&f.decorations[1]), Err(Error::Unsupported(_))));
    }
}
