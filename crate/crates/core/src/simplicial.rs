//! Finite semi-simplicial sets, reference edges and the integer cellular chain complex.

use crate::error::{Error, Result};
use crate::intmat::{smith_normal_form, IntMatrix};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, HashMap, VecDeque};

/// Cells per degree with face maps `faces[n][i][s]` for `n ≥ 1`, `i ∈ 0..=n`.
#[derive(Clone, Debug)]
pub struct SemiSimplicialSet {
    dimension: usize,
    cells: Vec<Vec<String>>,
    index: Vec<HashMap<String, usize>>,
    faces: Vec<Vec<Vec<usize>>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityViolation {
    pub n: usize,
    pub i: usize,
    pub j: usize,
    pub cell: String,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<IdentityViolation>,
    /// Vertices not reachable from the first vertex through edges.
    pub unreachable_vertices: Vec<String>,
    pub empty_top: bool,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty() && self.unreachable_vertices.is_empty() && !self.empty_top
    }
}

/// Sparse integer chain of a fixed degree.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct IntChain {
    pub degree: usize,
    pub coefficients: BTreeMap<String, BigInt>,
}

impl IntChain {
    pub fn from_vector(b: &SemiSimplicialSet, degree: usize, v: &[BigInt]) -> Self {
        let coefficients = v
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(s, c)| (b.cells(degree)[s].clone(), c.clone()))
            .collect();
        IntChain { degree, coefficients }
    }

    pub fn to_vector(&self, b: &SemiSimplicialSet) -> Result<Vec<BigInt>> {
        let mut v = vec![BigInt::zero(); b.count(self.degree)];
        for (label, c) in &self.coefficients {
            v[b.cell_index(self.degree, label)?] += c;
        }
        Ok(v)
    }
}

impl SemiSimplicialSet {
    /// Build from labels. `faces` maps `(n, i)` to a total map from degree-`n` labels to
    /// degree-`n-1` labels. Only structure is checked here; see [`validate`](Self::validate).
    pub fn new(cells: Vec<Vec<String>>, faces: &BTreeMap<(usize, usize), BTreeMap<String, String>>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Structural("no cells".into()));
        }
        let dimension = cells.len() - 1;
        let mut index = Vec::with_capacity(cells.len());
        for (n, list) in cells.iter().enumerate() {
            let mut map = HashMap::new();
            for (k, c) in list.iter().enumerate() {
                if map.insert(c.clone(), k).is_some() {
                    return Err(Error::Structural(format!("duplicate cell '{c}' in degree {n}")));
                }
            }
            index.push(map);
        }
        let mut fm = vec![Vec::new()];
        for n in 1..=dimension {
            let mut per_i = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let map = faces
                    .get(&(n, i))
                    .ok_or_else(|| Error::Structural(format!("missing face map ({n},{i})")))?;
                let mut img = Vec::with_capacity(cells[n].len());
                for c in &cells[n] {
                    let t = map
                        .get(c)
                        .ok_or_else(|| Error::Structural(format!("face map ({n},{i}) undefined on '{c}'")))?;
                    let k = index[n - 1]
                        .get(t)
                        .ok_or_else(|| Error::Structural(format!("face ({n},{i}) of '{c}' is '{t}', not a cell of degree {}", n - 1)))?;
                    img.push(*k);
                }
                if let Some(extra) = map.keys().find(|k| !index[n].contains_key(*k)) {
                    return Err(Error::Structural(format!("face map ({n},{i}) names unknown cell '{extra}'")));
                }
                per_i.push(img);
            }
            fm.push(per_i);
        }
        for (&(n, i), _) in faces {
            if n == 0 || n > dimension || i > n {
                return Err(Error::Structural(format!("face map ({n},{i}) out of range")));
            }
        }
        Ok(SemiSimplicialSet { dimension, cells, index, faces: fm })
    }

    /// Build directly from index tables; `faces[n][i][s]` as in the struct documentation.
    pub fn from_indices(cells: Vec<Vec<String>>, faces: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for n in 1..cells.len() {
            for i in 0..=n {
                let table = faces
                    .get(n)
                    .and_then(|f| f.get(i))
                    .ok_or_else(|| Error::Structural(format!("missing face map ({n},{i})")))?;
                let mut m = BTreeMap::new();
                for (s, &t) in table.iter().enumerate() {
                    let src = cells[n].get(s).ok_or_else(|| Error::Structural("face table too long".into()))?;
                    let dst = cells[n - 1]
                        .get(t)
                        .ok_or_else(|| Error::Structural(format!("face index {t} out of range in degree {}", n - 1)))?;
                    m.insert(src.clone(), dst.clone());
                }
                map.insert((n, i), m);
            }
        }
        Self::new(cells, &map)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cells(&self, n: usize) -> &[String] {
        &self.cells[n]
    }

    pub fn count(&self, n: usize) -> usize {
        self.cells.get(n).map_or(0, |c| c.len())
    }

    pub fn cell_index(&self, n: usize, label: &str) -> Result<usize> {
        self.index
            .get(n)
            .and_then(|m| m.get(label))
            .copied()
            .ok_or_else(|| Error::Argument(format!("no cell '{label}' in degree {n}")))
    }

    /// δ_{n,i}(s) by index.
    pub fn face(&self, n: usize, i: usize, s: usize) -> usize {
        self.faces[n][i][s]
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for n in 2..=self.dimension {
            for s in 0..self.count(n) {
                for j in 1..=n {
                    for i in 0..j {
                        let lhs = self.face(n - 1, i, self.face(n, j, s));
                        let rhs = self.face(n - 1, j - 1, self.face(n, i, s));
                        if lhs != rhs {
                            report.violations.push(IdentityViolation { n, i, j, cell: self.cells[n][s].clone() });
                        }
                    }
                }
            }
        }
        report.empty_top = self.count(self.dimension) == 0;
        let reach = self.vertex_tree(0);
        report.unreachable_vertices = (0..self.count(0))
            .filter(|&v| reach.get(v).is_none_or(|r| r.is_none()))
            .map(|v| self.cells[0][v].clone())
            .collect();
        report
    }

    /// Breadth-first tree over the 1-skeleton from `root`. Entry `v` holds the parent edge
    /// (edge index, +1 if traversed tail→head) or `Some(None)` for the root, `None` if unreachable.
    #[allow(clippy::type_complexity)]
    pub fn vertex_tree(&self, root: usize) -> Vec<Option<Option<(usize, usize, i8)>>> {
        let nv = self.count(0);
        let mut parent: Vec<Option<Option<(usize, usize, i8)>>> = vec![None; nv];
        if nv == 0 {
            return parent;
        }
        let mut adj: Vec<Vec<(usize, usize, i8)>> = vec![Vec::new(); nv];
        if self.dimension >= 1 {
            for e in 0..self.count(1) {
                let (head, tail) = (self.face(1, 0, e), self.face(1, 1, e));
                adj[tail].push((head, e, 1));
                adj[head].push((tail, e, -1));
            }
        }
        parent[root] = Some(None);
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(w, e, dir) in &adj[v] {
                if parent[w].is_none() {
                    parent[w] = Some(Some((v, e, dir)));
                    queue.push_back(w);
                }
            }
        }
        parent
    }

    /// e_{n,i}(s): delete every vertex except 0 and i.
    pub fn reference_edge(&self, n: usize, s: usize, i: usize) -> Result<usize> {
        if n == 0 || n > self.dimension || i == 0 || i > n {
            return Err(Error::Argument(format!("reference edge e_{{{n},{i}}} out of range")));
        }
        let mut cell = s;
        for j in (i + 1..=n).rev() {
            cell = self.face(j, j, cell);
        }
        // now vertices 0..=i, degree i; drop i-1, ..., 1 (each sits at its own position)
        for j in (1..i).rev() {
            cell = self.face(j + 1, j, cell);
        }
        Ok(cell)
    }

    /// δ_{1,1} ∘ e_{n,1}: the 0-vertex of a cell (the cell itself for n = 0).
    pub fn base_vertex(&self, n: usize, s: usize) -> usize {
        if n == 0 {
            return s;
        }
        let e = self.reference_edge(n, s, 1).expect("n >= 1");
        self.face(1, 1, e)
    }

    /// Integer matrix of ∂_n: rows are degree-(n−1) cells, columns degree-n cells.
    pub fn boundary_matrix(&self, n: usize) -> Result<IntMatrix> {
        if n == 0 || n > self.dimension {
            return Err(Error::Argument(format!("boundary degree {n} out of range 1..={}", self.dimension)));
        }
        let mut m = IntMatrix::zeros(self.count(n - 1), self.count(n));
        for s in 0..self.count(n) {
            for i in 0..=n {
                let sign = if i % 2 == 0 { BigInt::one() } else { -BigInt::one() };
                m.add_to(self.face(n, i, s), s, &sign);
            }
        }
        Ok(m)
    }

    /// Apply ∂_n to a chain.
    pub fn boundary(&self, chain: &IntChain) -> Result<IntChain> {
        let n = chain.degree;
        let m = self.boundary_matrix(n)?;
        let v = m.mul_vec(&chain.to_vector(self)?);
        Ok(IntChain::from_vector(self, n - 1, &v))
    }

    /// Free rank and torsion coefficients of H_n(B, ℤ).
    pub fn homology_rank(&self, n: usize) -> Result<(usize, Vec<BigInt>)> {
        if n > self.dimension {
            return Err(Error::Argument(format!("degree {n} exceeds dimension {}", self.dimension)));
        }
        let rank_out = if n == 0 { 0 } else { smith_normal_form(&self.boundary_matrix(n)?).rank };
        let (rank_in, torsion) = if n == self.dimension {
            (0, Vec::new())
        } else {
            let s = smith_normal_form(&self.boundary_matrix(n + 1)?);
            (s.rank, s.torsion())
        };
        Ok((self.count(n) - rank_out - rank_in, torsion))
    }

    /// ℤ-basis of ker ∂_n.
    pub fn cycle_basis_z(&self, n: usize) -> Result<Vec<IntChain>> {
        if n > self.dimension {
            return Err(Error::Argument(format!("degree {n} exceeds dimension {}", self.dimension)));
        }
        if n == 0 {
            return Ok((0..self.count(0))
                .map(|v| {
                    let mut e = vec![BigInt::zero(); self.count(0)];
                    e[v] = BigInt::one();
                    IntChain::from_vector(self, 0, &e)
                })
                .collect());
        }
        let s = smith_normal_form(&self.boundary_matrix(n)?);
        Ok(s.kernel_basis().iter().map(|v| IntChain::from_vector(self, n, v)).collect())
    }
}
