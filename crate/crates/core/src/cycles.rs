//! The twisted chain module over ℤ[L_V], its top-degree cycles, and their compilation into
//! finite exponential sums for each decoration.

use crate::error::{Error, Result};
use crate::fbs::{FbsComplex, GeometricChain};
use crate::intmat::lattice_basis;
use crate::laurent::{graded_lex, numerical_rank, LaurentMatrix, LaurentPoly};
use crate::rational::{self, Q, QVec};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use std::f64::consts::PI;

/// Default relative tolerance for numerical ranks and witness magnitudes.
pub const DEFAULT_TOL: f64 = 1e-8;

/// e(k·x) = exp(−2πi k·x).
pub fn character(k: &[f64], x: &[f64]) -> Complex64 {
    let t: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
    Complex64::from_polar(1.0, -2.0 * PI * t)
}

/// The frequency lattice L_V with an integral basis.
#[derive(Clone, Debug)]
pub struct Lattice {
    /// Generators in frequency coordinates.
    pub gens: Vec<QVec>,
    /// Generators realized in E.
    pub realized: Vec<Vec<f64>>,
}

impl Lattice {
    pub fn rank(&self) -> usize {
        self.gens.len()
    }

    /// Integer coordinates of a lattice element; internal error if it is not in the lattice.
    pub fn coords(&self, x: &[Q]) -> Result<Vec<i64>> {
        if rational::is_zero(x) {
            return Ok(vec![0; self.rank()]);
        }
        let c = rational::solve_columns(&self.gens, x)
            .ok_or_else(|| Error::Internal("vector outside the frequency lattice".into()))?;
        c.iter()
            .map(|t| {
                if !t.is_integer() {
                    return Err(Error::Internal("non-integral lattice coordinates".into()));
                }
                t.to_integer().to_i64().ok_or_else(|| Error::Internal("lattice coordinate overflow".into()))
            })
            .collect()
    }

    pub fn to_freq(&self, l: &[i64]) -> QVec {
        let mut v = rational::zero_vec(self.gens.first().map_or(0, |g| g.len()));
        for (c, g) in l.iter().zip(&self.gens) {
            if *c != 0 {
                v = rational::add(&v, &rational::scale(g, &rational::q(*c)));
            }
        }
        v
    }

    /// k·g_j for each generator.
    pub fn phases(&self, k: &[f64]) -> Vec<f64> {
        crate::laurent::phases(k, &self.realized)
    }
}

#[derive(Clone, Debug)]
pub struct LatticeInfo {
    pub lattice: Lattice,
    /// ℤ-basis of 1-cycles with their images ν(c) in frequency coordinates.
    pub cycle_images: Vec<(Vec<BigInt>, QVec)>,
}

/// ρ_* of an integer 1-chain given as a dense edge vector.
pub fn rho_of_chain(f: &FbsComplex, chain: &[i64]) -> QVec {
    let mut v = rational::zero_vec(f.rank());
    for (e, &c) in chain.iter().enumerate() {
        if c != 0 {
            v = rational::add(&v, &rational::scale(f.rho(e), &rational::q(c)));
        }
    }
    v
}

/// L_V = ν(H_1(B, ℤ)) with an integral basis.
pub fn compute_lv(f: &FbsComplex) -> Result<LatticeInfo> {
    let b = f.set();
    let r = f.rank();
    let z1 = b.cycle_basis_z(1)?;
    let mut cycle_images = Vec::new();
    for c in &z1 {
        let v = c.to_vector(b)?;
        let mut img = rational::zero_vec(r);
        for (e, x) in v.iter().enumerate() {
            if !x.is_zero() {
                img = rational::add(&img, &rational::scale(f.rho(e), &Q::from_integer(x.clone())));
            }
        }
        cycle_images.push((v, img));
    }
    let den = rational::common_denominator(cycle_images.iter().flat_map(|(_, v)| v.iter()));
    let scaled: Vec<Vec<BigInt>> = cycle_images
        .iter()
        .map(|(_, v)| v.iter().map(|x| (x * Q::from_integer(den.clone())).to_integer()).collect())
        .collect();
    let hb = lattice_basis(&scaled, r);
    let gens: Vec<QVec> = hb.iter().map(|row| row.iter().map(|x| Q::new(x.clone(), den.clone())).collect()).collect();
    let realized = gens.iter().map(|g| f.basis().realize(g)).collect();
    Ok(LatticeInfo { lattice: Lattice { gens, realized }, cycle_images })
}

/// Spanning-tree paths c_s from the base vertex.
#[derive(Clone, Debug)]
pub struct ChainChoice {
    pub root: usize,
    /// Dense 1-chain per vertex.
    pub vertex_chains: Vec<Vec<i64>>,
    /// ρ(c_v) per vertex, frequency coordinates.
    pub vertex_rho: Vec<QVec>,
}

impl ChainChoice {
    /// c_s for a cell of degree n.
    pub fn chain(&self, f: &FbsComplex, n: usize, s: usize) -> &[i64] {
        &self.vertex_chains[f.set().base_vertex(n, s)]
    }

    pub fn rho(&self, f: &FbsComplex, n: usize, s: usize) -> &QVec {
        &self.vertex_rho[f.set().base_vertex(n, s)]
    }
}

/// Breadth-first tree rooted at `root`, or at the lexicographically least vertex label.
pub fn choose_chains(f: &FbsComplex, root: Option<usize>) -> Result<ChainChoice> {
    let b = f.set();
    let nv = b.count(0);
    let root = match root {
        Some(r) if r < nv => r,
        Some(r) => return Err(Error::Argument(format!("root vertex {r} out of range"))),
        None => (0..nv).min_by(|&x, &y| b.cells(0)[x].cmp(&b.cells(0)[y])).ok_or_else(|| Error::Structural("no vertices".into()))?,
    };
    let tree = b.vertex_tree(root);
    let ne = b.count(1);
    let mut chains: Vec<Option<Vec<i64>>> = vec![None; nv];
    // BFS order guarantees parents are settled first when walking by distance
    let mut order: Vec<usize> = (0..nv).collect();
    let mut depth = vec![usize::MAX; nv];
    fn depth_of(v: usize, tree: &[Option<Option<(usize, usize, i8)>>], memo: &mut [usize]) -> Option<usize> {
        if memo[v] != usize::MAX {
            return Some(memo[v]);
        }
        let d = match tree[v]? {
            None => 0,
            Some((p, _, _)) => depth_of(p, tree, memo)? + 1,
        };
        memo[v] = d;
        Some(d)
    }
    for v in 0..nv {
        if depth_of(v, &tree, &mut depth).is_none() {
            return Err(Error::Structural(format!("vertex {} is not connected to {}", b.cells(0)[v], b.cells(0)[root])));
        }
    }
    order.sort_by_key(|&v| depth[v]);
    for v in order {
        let c = match tree[v].unwrap() {
            None => vec![0; ne],
            Some((p, e, dir)) => {
                let mut c = chains[p].clone().expect("parent settled");
                c[e] += dir as i64;
                c
            }
        };
        chains[v] = Some(c);
    }
    let vertex_chains: Vec<Vec<i64>> = chains.into_iter().map(|c| c.unwrap()).collect();
    let vertex_rho = vertex_chains.iter().map(|c| rho_of_chain(f, c)).collect();
    Ok(ChainChoice { root, vertex_chains, vertex_rho })
}

/// Face coefficients l_{s,i} of the module over ℤ[L_V].
#[derive(Clone, Debug)]
pub struct GvModule {
    pub lattice: Lattice,
    pub chains: ChainChoice,
    /// `l[n][s][i]` for n ≥ 1 (index 0 unused).
    pub l: Vec<Vec<Vec<Vec<i64>>>>,
}

impl GvModule {
    pub fn rank(&self) -> usize {
        self.lattice.rank()
    }

    /// ∂_n over ℤ[L_V]: entry (δ_i s, s) gains (−1)^i ξ^{l_{s,i}}.
    pub fn boundary(&self, f: &FbsComplex, n: usize) -> LaurentMatrix {
        let b = f.set();
        let r = self.rank();
        let mut m = LaurentMatrix::zeros(b.count(n - 1), b.count(n), r);
        for s in 0..b.count(n) {
            for i in 0..=n {
                let sign = if i % 2 == 0 { 1 } else { -1 };
                m.add_to(b.face(n, i, s), s, &LaurentPoly::monomial(r, self.l[n][s][i].clone(), sign));
            }
        }
        m
    }

    /// Violations of l_{δ_j s,i} + l_{s,j} = l_{δ_i s,j−1} + l_{s,i} for i < j.
    pub fn cocycle_violations(&self, f: &FbsComplex) -> Vec<(usize, usize, usize, usize)> {
        let b = f.set();
        let mut out = Vec::new();
        for n in 2..=f.dim() {
            for s in 0..b.count(n) {
                for j in 1..=n {
                    for i in 0..j {
                        let lhs: Vec<i64> =
                            self.l[n - 1][b.face(n, j, s)][i].iter().zip(&self.l[n][s][j]).map(|(a, c)| a + c).collect();
                        let rhs: Vec<i64> =
                            self.l[n - 1][b.face(n, i, s)][j - 1].iter().zip(&self.l[n][s][i]).map(|(a, c)| a + c).collect();
                        if lhs != rhs {
                            out.push((n, s, i, j));
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn build_gv(f: &FbsComplex, lat: &Lattice, chains: &ChainChoice) -> Result<GvModule> {
    let b = f.set();
    let mut l = vec![Vec::new()];
    for n in 1..=f.dim() {
        let mut per_cell = Vec::with_capacity(b.count(n));
        for s in 0..b.count(n) {
            let mut per_face = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let t = b.face(n, i, s);
                let mut v = rational::sub(chains.rho(f, n, s), chains.rho(f, n - 1, t));
                if i == 0 {
                    v = rational::add(&v, f.rho(b.reference_edge(n, s, 1)?));
                }
                per_face.push(lat.coords(&v)?);
            }
            per_cell.push(per_face);
        }
        l.push(per_cell);
    }
    let g = GvModule { lattice: lat.clone(), chains: chains.clone(), l };
    if let Some((n, s, i, j)) = g.cocycle_violations(f).first() {
        return Err(Error::Internal(format!(
            "face coefficient identity fails on {} (i={i}, j={j}); check the vertex ordering",
            b.cells(*n)[*s]
        )));
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CycleSource {
    Computed,
    Supplied,
}

/// Top-degree cycles with the data needed for genericity checks.
#[derive(Clone, Debug)]
pub struct CycleBasis {
    /// `cycles[j][s]`: coefficient of ε_s in cycle j.
    pub cycles: Vec<Vec<LaurentPoly>>,
    pub names: Vec<String>,
    /// Rank of the cycle module over the fraction field.
    pub generic_rank: usize,
    /// Rank of ∂_d over the fraction field.
    pub boundary_rank: usize,
    pub boundary_witness: LaurentPoly,
    pub family_witness: LaurentPoly,
    pub source: CycleSource,
}

impl CycleBasis {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// The family as columns (ϰ).
    pub fn family_matrix(&self, cells: usize, rank: usize) -> LaurentMatrix {
        let mut m = LaurentMatrix::zeros(cells, self.cycles.len(), rank);
        for (j, c) in self.cycles.iter().enumerate() {
            for (s, p) in c.iter().enumerate() {
                m.set(s, j, p.clone());
            }
        }
        m
    }
}

fn annihilated(d: &LaurentMatrix, v: &[LaurentPoly]) -> Result<bool> {
    Ok(d.mul_vec(v)?.iter().all(|p| p.is_zero()))
}

/// Fraction-field kernel of ∂_d by fraction-free elimination.
pub fn cycles(f: &FbsComplex, g: &GvModule) -> Result<CycleBasis> {
    let d = g.boundary(f, f.dim());
    let k = d.kernel_basis();
    for v in &k.basis {
        if !annihilated(&d, v)? {
            return Err(Error::Internal("kernel vector not annihilated".into()));
        }
    }
    let fam = LaurentMatrix::from_rows(g.rank(), transpose(&k.basis, d.cols()))?.kernel_basis();
    Ok(CycleBasis {
        names: (1..=k.basis.len()).map(|j| format!("j{j}")).collect(),
        generic_rank: k.basis.len(),
        boundary_rank: k.rank,
        boundary_witness: k.witness,
        family_witness: fam.witness,
        cycles: k.basis,
        source: CycleSource::Computed,
    })
}

fn transpose(cols: &[Vec<LaurentPoly>], rows: usize) -> Vec<Vec<LaurentPoly>> {
    (0..rows).map(|s| cols.iter().map(|c| c[s].clone()).collect()).collect()
}

/// Coefficient vector of a formal combination of translated prototiles: the copy of top cell
/// `s` with its 0-vertex at `x` is ξ^l ε_s with l = x − ρ(c_s), weighted by 𝔖(s).
pub fn chain_vector(f: &FbsComplex, g: &GvModule, orient: &[i8], chain: &GeometricChain) -> Result<Vec<LaurentPoly>> {
    let b = f.set();
    let d = f.dim();
    let r = g.rank();
    let mut v = vec![LaurentPoly::zero(r); b.count(d)];
    for t in &chain.terms {
        let p = &f.prototiles[f.prototile_index(&t.prototile)?];
        for (label, off) in &p.cells {
            let s = b.cell_index(d, label)?;
            let x = rational::add(&t.translation, off);
            let l = g.lattice.coords(&rational::sub(&x, g.chains.rho(f, d, s)))?;
            let c = t.coeff * orient[s] as i64;
            v[s] = &v[s] + &LaurentPoly::monomial(r, l, c);
        }
    }
    Ok(v)
}

/// Whether a formal combination of translated prototiles is annihilated by ∂_d.
pub fn is_cycle(f: &FbsComplex, g: &GvModule, chain: &GeometricChain) -> Result<bool> {
    let orient = f.orientations()?;
    annihilated(&g.boundary(f, f.dim()), &chain_vector(f, g, &orient, chain)?)
}

/// Adopt the complex's supplied cycle family after checking it against ∂_d.
pub fn supplied_cycles(f: &FbsComplex, g: &GvModule) -> Result<CycleBasis> {
    let orient = f.orientations()?;
    let dmat = g.boundary(f, f.dim());
    let computed = dmat.kernel_basis();
    let generic_rank = f.set().count(f.dim()) - computed.rank;
    let mut cycles = Vec::new();
    for c in &f.cycles {
        let v = chain_vector(f, g, &orient, c)?;
        if !annihilated(&dmat, &v)? {
            return Err(Error::Structural(format!("supplied chain {} is not a cycle", c.name)));
        }
        cycles.push(v);
    }
    let fam = CycleBasis {
        cycles,
        names: f.cycles.iter().map(|c| c.name.clone()).collect(),
        generic_rank,
        boundary_rank: computed.rank,
        boundary_witness: computed.witness,
        family_witness: LaurentPoly::one(g.rank()),
        source: CycleSource::Supplied,
    };
    let k = fam.family_matrix(f.set().count(f.dim()), g.rank()).kernel_basis();
    if k.rank != generic_rank {
        return Err(Error::Structural(format!(
            "supplied cycles span rank {} but the cycle module has rank {generic_rank}",
            k.rank
        )));
    }
    Ok(CycleBasis { family_witness: k.witness, ..fam })
}

/// One term C·exp(−2πi k·(l + y)) of a compiled generator.
#[derive(Clone, Debug)]
pub struct GenTerm {
    pub coeff: BigInt,
    pub lattice: Vec<i64>,
    /// ρ(c_s) + α_s(x_p), frequency coordinates.
    pub offset: QVec,
    /// l + offset, frequency coordinates.
    pub position: QVec,
    pub position_f: Vec<f64>,
    coeff_f: f64,
}

/// Component 𝔞_{j,p} of a generator.
#[derive(Clone, Debug)]
pub struct ConstraintGenerator {
    pub cycle: usize,
    pub decoration: usize,
    pub species: String,
    pub terms: Vec<GenTerm>,
}

impl ConstraintGenerator {
    pub fn evaluate(&self, k: &[f64]) -> Complex64 {
        self.terms.iter().map(|t| character(k, &t.position_f) * t.coeff_f).sum()
    }
}

/// 𝔞_{j,p}: each monomial Cξ^l of r_{j,s} at the host cell s of x_p gives the term
/// 𝔖(s)·C at l + ρ(c_s) + α_s(x_p). Indexed `[cycle][decoration]`.
pub fn compile_generators(f: &FbsComplex, g: &GvModule, basis: &CycleBasis) -> Result<Vec<Vec<ConstraintGenerator>>> {
    let d = f.dim();
    let mut hosts = Vec::new();
    for p in &f.decorations {
        let (s, y) = f.decoration_host(p)?;
        hosts.push((s, rational::add(g.chains.rho(f, d, s), &y), f.orientation(s)?));
    }
    let mut out = Vec::new();
    for (j, cyc) in basis.cycles.iter().enumerate() {
        let mut row = Vec::new();
        for (p, (s, offset, sign)) in hosts.iter().enumerate() {
            let mut terms: Vec<GenTerm> = cyc[*s]
                .terms()
                .map(|(l, c)| {
                    let position = rational::add(&g.lattice.to_freq(l), offset);
                    let coeff = c * BigInt::from(*sign);
                    GenTerm {
                        coeff_f: coeff.to_f64().unwrap_or(f64::NAN),
                        coeff,
                        lattice: l.clone(),
                        offset: offset.clone(),
                        position_f: f.basis().realize(&position),
                        position,
                    }
                })
                .collect();
            terms.sort_by(|a, b| graded_lex(&b.lattice, &a.lattice));
            row.push(ConstraintGenerator { cycle: j, decoration: p, species: f.decorations[p].id.clone(), terms });
        }
        out.push(row);
    }
    Ok(out)
}

/// Generator vectors at k as columns of an m × |J| matrix.
pub fn generator_matrix(gens: &[Vec<ConstraintGenerator>], m: usize, k: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, gens.len(), |p, j| gens[j][p].evaluate(k))
}

#[derive(Clone, Debug)]
pub struct Degeneracy {
    pub degenerate: bool,
    /// |φ_k(P)| / ‖P‖₁ for the witness minors of ∂_d and of the family.
    pub boundary_minor: f64,
    pub family_minor: f64,
}

/// Witness minors certify genericity when not small; otherwise compare specialized ranks.
pub fn degeneracy_check(f: &FbsComplex, g: &GvModule, basis: &CycleBasis, k: &[f64], tol: f64) -> Degeneracy {
    let ph = g.lattice.phases(k);
    let norm = |p: &LaurentPoly| p.evaluate_phases(&ph).norm() / p.coefficient_norm1().max(f64::MIN_POSITIVE);
    let bm = norm(&basis.boundary_witness);
    let fm = norm(&basis.family_witness);
    if bm >= tol && fm >= tol {
        return Degeneracy { degenerate: false, boundary_minor: bm, family_minor: fm };
    }
    let d = f.dim();
    let dk = g.boundary(f, d).evaluate_phases(&ph);
    let fam = basis.family_matrix(f.set().count(d), g.rank()).evaluate_phases(&ph);
    let fam_rank = f.set().count(d) - basis.boundary_rank;
    let degenerate = numerical_rank(&dk, tol) < basis.boundary_rank || numerical_rank(&fam, tol) < fam_rank;
    Degeneracy { degenerate, boundary_minor: bm, family_minor: fm }
}

/// ∂_d of ℱ_(k): face factors exp(−2πik·t_{s,i}) with t_{s,0} = ρ(e_{d,1}(s)), t = 0 otherwise.
pub fn fk_boundary(f: &FbsComplex, k: &[f64]) -> DMatrix<Complex64> {
    let b = f.set();
    let d = f.dim();
    let mut m = DMatrix::zeros(b.count(d - 1), b.count(d));
    for s in 0..b.count(d) {
        for i in 0..=d {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let factor = if i == 0 {
                let e = b.reference_edge(d, s, 1).expect("d >= 1");
                character(k, &f.basis().realize(f.rho(e)))
            } else {
                Complex64::new(1.0, 0.0)
            };
            m[(b.face(d, i, s), s)] += factor * sign;
        }
    }
    m
}

/// m − dim H_d(ℱ_(k)), clamped at zero.
pub fn constraint_count_at_k(f: &FbsComplex, k: &[f64], tol: f64) -> usize {
    let m = f.decorations.len();
    let dk = fk_boundary(f, k);
    let hd = f.set().count(f.dim()) - numerical_rank(&dk, tol);
    m.saturating_sub(hd)
}

/// max_j ‖∂_d(k) ω_k(j)‖ / (‖∂_d(k)‖ ‖ω_k(j)‖) with ω_k(ε_s) = Φ_{k,s} Y_s.
pub fn intertwining_residual(f: &FbsComplex, g: &GvModule, basis: &CycleBasis, k: &[f64]) -> f64 {
    let d = f.dim();
    let b = f.set();
    let dk = fk_boundary(f, k);
    let ph = g.lattice.phases(k);
    let dnorm = dk.norm();
    let mut worst: f64 = 0.0;
    for c in &basis.cycles {
        let v = nalgebra::DVector::from_fn(b.count(d), |s, _| {
            c[s].evaluate_phases(&ph) * character(k, &f.basis().realize(g.chains.rho(f, d, s)))
        });
        let vn = v.norm();
        if vn == 0.0 {
            continue;
        }
        worst = worst.max((&dk * &v).norm() / (dnorm * vn));
    }
    worst
}

/// Everything derived from a complex, in pipeline order.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub lattice: LatticeInfo,
    pub gv: GvModule,
    pub basis: CycleBasis,
    pub generators: Vec<Vec<ConstraintGenerator>>,
}

impl Analysis {
    /// Uses the supplied cycle family when the complex has one.
    pub fn new(f: &FbsComplex) -> Result<Self> {
        Self::with_root(f, None)
    }

    pub fn with_root(f: &FbsComplex, root: Option<usize>) -> Result<Self> {
        let rep = f.validate();
        if !rep.is_ok() {
            return Err(Error::Structural(rep.lines().join("; ")));
        }
        let lattice = compute_lv(f)?;
        let chains = choose_chains(f, root)?;
        let gv = build_gv(f, &lattice.lattice, &chains)?;
        let basis = if f.cycles.is_empty() { cycles(f, &gv)? } else { supplied_cycles(f, &gv)? };
        let generators = compile_generators(f, &gv, &basis)?;
        Ok(Analysis { lattice, gv, basis, generators })
    }

    pub fn generator_matrix(&self, m: usize, k: &[f64]) -> DMatrix<Complex64> {
        generator_matrix(&self.generators, m, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_json(v: [f64; 2], rho: [&str; 2], basis_rank: usize) -> String {
        let basis = if basis_rank == 2 { format!("[[{}],[{}]]", v[0], v[1]) } else { format!("[[{}]]", v[0]) };
        let r = |s: &str| if basis_rank == 2 { s.to_string() } else { format!("[\"{}\"]", s) };
        format!(
            r#"{{"dimension":1,"cells":{{"0":["s0"],"1":["s1","s2"]}},
               "faces":{{"1,0":{{"s1":"s0","s2":"s0"}},"1,1":{{"s1":"s0","s2":"s0"}}}},
               "basis":{basis},"rho":{{"s1":{},"s2":{}}},
               "decorations":[{{"id":"x1","cell":"s1","coords":["1/3"]}},{{"id":"x2","cell":"s2","coords":["1/2"]}}]}}"#,
            r(rho[0]),
            r(rho[1])
        )
    }

    fn fib() -> FbsComplex {
        FbsComplex::from_json_str(&binary_json([1.618033988749895, 1.0], [r#"["1","0"]"#, r#"["0","1"]"#], 2)).unwrap()
    }

    fn comm(n1: i64, n2: i64) -> FbsComplex {
        FbsComplex::from_json_str(&binary_json([0.7, 0.0], [&n1.to_string(), &n2.to_string()], 1)).unwrap()
    }

    #[test]
    fn binary_lattice_and_faces() {
        let f = fib();
        let a = Analysis::new(&f).unwrap();
        assert_eq!(a.lattice.lattice.rank(), 2);
        assert_eq!(a.gv.l[1][0], vec![vec![1, 0], vec![0, 0]]);
        assert_eq!(a.gv.l[1][1], vec![vec![0, 1], vec![0, 0]]);
        assert_eq!(a.basis.len(), 1);
        let c = &a.basis.cycles[0];
        assert_eq!(c[0].to_string(), "x2 - 1");
        assert_eq!(c[1].to_string(), "-x1 + 1");
    }

    #[test]
    fn commensurate_lattice() {
        let f = comm(3, 2);
        let a = Analysis::new(&f).unwrap();
        assert_eq!(a.lattice.lattice.rank(), 1);
        assert_eq!(a.lattice.lattice.gens, vec![vec![rational::q(1)]]);
        assert_eq!(a.gv.l[1][0][0], vec![3]);
        assert_eq!(a.gv.l[1][1][0], vec![2]);
        // single vertex: all chains vanish
        assert!(a.gv.chains.vertex_chains[0].iter().all(|&c| c == 0));
    }

    #[test]
    fn binary_counts_and_degeneracy() {
        let f = fib();
        let a = Analysis::new(&f).unwrap();
        assert_eq!(constraint_count_at_k(&f, &[0.37], DEFAULT_TOL), 1);
        assert!(degeneracy_check(&f, &a.gv, &a.basis, &[0.0], DEFAULT_TOL).degenerate);
        assert!(!degeneracy_check(&f, &a.gv, &a.basis, &[0.37], DEFAULT_TOL).degenerate);
        assert!(intertwining_residual(&f, &a.gv, &a.basis, &[0.37]) < 1e-12);
    }

    #[test]
    fn commensurate_degenerate_set() {
        let f = comm(3, 2);
        let a = Analysis::new(&f).unwrap();
        let v = 0.7;
        assert!(degeneracy_check(&f, &a.gv, &a.basis, &[2.0 / v], DEFAULT_TOL).degenerate);
        // the witness vanishes here but the rank does not drop
        let k = 1.0 / (3.0 * v);
        let dg = degeneracy_check(&f, &a.gv, &a.basis, &[k], DEFAULT_TOL);
        assert!(dg.boundary_minor < 1e-12);
        assert!(!dg.degenerate);
    }

    #[test]
    fn two_vertex_path_chains() {
        // vertices a, b; edge p: a→b; loops x at a and y at b
        let json = r#"{"dimension":1,"cells":{"0":["a","b"],"1":["p","x","y"]},
            "faces":{"1,0":{"p":"b","x":"a","y":"b"},"1,1":{"p":"a","x":"a","y":"b"}},
            "basis":[[1.0],[1.4142135623730951]],"rho":{"p":["1/2","0"],"x":["1","0"],"y":["0","1"]}}"#;
        let f = FbsComplex::from_json_str(json).unwrap();
        let ch = choose_chains(&f, None).unwrap();
        assert_eq!(ch.vertex_chains[1], vec![1, 0, 0]);
        let lv = compute_lv(&f).unwrap();
        let g = build_gv(&f, &lv.lattice, &ch).unwrap();
        assert!(g.cocycle_violations(&f).is_empty());
        // ∂ c_s equals base vertex minus root for every cell
        let b = f.set();
        for n in 0..=1 {
            for s in 0..b.count(n) {
                let c = ch.chain(&f, n, s);
                let mut bd = vec![0i64; 2];
                for (e, &x) in c.iter().enumerate() {
                    bd[b.face(1, 0, e)] += x;
                    bd[b.face(1, 1, e)] -= x;
                }
                let mut want = vec![0i64; 2];
                want[b.base_vertex(n, s)] += 1;
                want[ch.root] -= 1;
                assert_eq!(bd, want);
            }
        }
        let alt = choose_chains(&f, Some(1)).unwrap();
        assert_eq!(alt.vertex_chains[0], vec![-1, 0, 0]);
    }
}
