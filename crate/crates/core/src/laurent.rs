//! Exact arithmetic in the Laurent ring ℤ[ξ_1^±, …, ξ_r^±], its fraction field, character
//! evaluation, and fraction-free linear algebra over it.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

pub type Exponent = Vec<i64>;

/// Sparse Laurent polynomial; the term map never stores zero coefficients.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LaurentPoly {
    rank: usize,
    terms: BTreeMap<Exponent, BigInt>,
}

fn exp_add(a: &[i64], b: &[i64]) -> Exponent {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn exp_sub(a: &[i64], b: &[i64]) -> Exponent {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Graded-lex comparison of exponent vectors: total degree, then lexicographic.
pub fn graded_lex(a: &[i64], b: &[i64]) -> Ordering {
    let da: i64 = a.iter().sum();
    let db: i64 = b.iter().sum();
    da.cmp(&db).then_with(|| a.cmp(b))
}

impl LaurentPoly {
    pub fn zero(rank: usize) -> Self {
        LaurentPoly { rank, terms: BTreeMap::new() }
    }

    pub fn constant(rank: usize, c: impl Into<BigInt>) -> Self {
        Self::monomial(rank, vec![0; rank], c)
    }

    pub fn one(rank: usize) -> Self {
        Self::constant(rank, 1)
    }

    pub fn monomial(rank: usize, exponent: Exponent, c: impl Into<BigInt>) -> Self {
        assert_eq!(exponent.len(), rank, "exponent length must equal rank");
        let c = c.into();
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(exponent, c);
        }
        LaurentPoly { rank, terms }
    }

    /// ξ_i (0-based index).
    pub fn var(rank: usize, i: usize) -> Self {
        let mut e = vec![0; rank];
        e[i] = 1;
        Self::monomial(rank, e, 1)
    }

    pub fn from_terms(rank: usize, terms: impl IntoIterator<Item = (Exponent, BigInt)>) -> Self {
        let mut p = Self::zero(rank);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &BigInt)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// ±ξ^l: the units of the ring.
    pub fn is_unit(&self) -> bool {
        self.terms.len() == 1 && self.terms.values().next().unwrap().abs().is_one()
    }

    pub fn coefficient(&self, e: &[i64]) -> BigInt {
        self.terms.get(e).cloned().unwrap_or_default()
    }

    fn add_term(&mut self, e: Exponent, c: BigInt) {
        if c.is_zero() {
            return;
        }
        assert_eq!(e.len(), self.rank, "exponent length must equal rank");
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_rank(&self, other: &Self) -> Result<()> {
        if self.rank != other.rank {
            return Err(Error::Argument(format!("rank mismatch: {} vs {}", self.rank, other.rank)));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_rank(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_rank(other)?;
        let mut acc: BTreeMap<Exponent, BigInt> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                *acc.entry(exp_add(ea, eb)).or_default() += ca * cb;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Ok(LaurentPoly { rank: self.rank, terms: acc })
    }

    pub fn neg(&self) -> Self {
        LaurentPoly { rank: self.rank, terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect() }
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        if c.is_zero() {
            return Self::zero(self.rank);
        }
        LaurentPoly { rank: self.rank, terms: self.terms.iter().map(|(e, x)| (e.clone(), x * c)).collect() }
    }

    /// Multiply by ξ^shift.
    pub fn shift(&self, shift: &[i64]) -> Self {
        LaurentPoly { rank: self.rank, terms: self.terms.iter().map(|(e, c)| (exp_add(e, shift), c.clone())).collect() }
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::one(self.rank), |acc, _| &acc * self)
    }

    /// Componentwise minimum exponent; zeros for the zero polynomial.
    pub fn min_exponents(&self) -> Exponent {
        let mut m: Option<Exponent> = None;
        for e in self.terms.keys() {
            m = Some(match m {
                None => e.clone(),
                Some(m) => m.iter().zip(e).map(|(a, b)| *a.min(b)).collect(),
            });
        }
        m.unwrap_or_else(|| vec![0; self.rank])
    }

    pub fn max_exponents(&self) -> Exponent {
        let mut m: Option<Exponent> = None;
        for e in self.terms.keys() {
            m = Some(match m {
                None => e.clone(),
                Some(m) => m.iter().zip(e).map(|(a, b)| *a.max(b)).collect(),
            });
        }
        m.unwrap_or_else(|| vec![0; self.rank])
    }

    /// gcd of coefficients (non-negative).
    pub fn content(&self) -> BigInt {
        self.terms.values().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    pub fn coefficient_norm1(&self) -> f64 {
        self.terms.values().map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY)).sum()
    }

    /// Terms sorted in the display order: descending graded-lex on shifted exponents.
    pub fn sorted_terms(&self) -> Vec<(Exponent, BigInt)> {
        let m = self.min_exponents();
        let mut v: Vec<(Exponent, BigInt)> = self.terms.iter().map(|(e, c)| (e.clone(), c.clone())).collect();
        v.sort_by(|a, b| graded_lex(&exp_sub(&b.0, &m), &exp_sub(&a.0, &m)));
        v
    }

    /// Exact quotient `self / d`, or `None` when `d` does not divide `self` in the ring.
    pub fn exact_div(&self, d: &Self) -> Option<Self> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Self::zero(self.rank));
        }
        if d.terms.len() == 1 {
            let (e, c) = d.terms.iter().next().unwrap();
            let mut out = Self::zero(self.rank);
            for (ea, ca) in &self.terms {
                let (qt, r) = ca.div_rem(c);
                if !r.is_zero() {
                    return None;
                }
                out.terms.insert(exp_sub(ea, e), qt);
            }
            return Some(out);
        }
        // quotient exponents are confined to this box
        let lo = exp_sub(&self.min_exponents(), &d.min_exponents());
        let hi = exp_sub(&self.max_exponents(), &d.max_exponents());
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return None;
        }
        let (ld, lc) = d.terms.iter().next_back().unwrap();
        let mut rem = self.clone();
        let mut quo = Self::zero(self.rank);
        while let Some((le, lcr)) = rem.terms.iter().next_back() {
            let (qc, r) = lcr.div_rem(lc);
            if !r.is_zero() {
                return None;
            }
            let qe = exp_sub(le, ld);
            if qe.iter().zip(lo.iter().zip(&hi)).any(|(x, (a, b))| x < a || x > b) {
                return None;
            }
            for (e, c) in &d.terms {
                rem.add_term(exp_add(e, &qe), -(c * &qc));
            }
            quo.add_term(qe, qc);
        }
        Some(quo)
    }

    /// Remove integer content and the common monomial factor; make the leading displayed
    /// coefficient positive. Returns the normalized polynomial.
    pub fn primitive(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let g = self.content();
        let m = self.min_exponents();
        let mut p = LaurentPoly {
            rank: self.rank,
            terms: self.terms.iter().map(|(e, c)| (exp_sub(e, &m), c / &g)).collect(),
        };
        if p.sorted_terms()[0].1.is_negative() {
            p = p.neg();
        }
        p
    }

    /// φ_k(a) = Σ c·exp(−2πi k·l), where `phases[j] = k·g_j` for the lattice generators g_j.
    pub fn evaluate_phases(&self, phases: &[f64]) -> Complex64 {
        let reduced: Vec<f64> = phases.iter().map(|t| t - t.round()).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let theta: f64 = e.iter().zip(&reduced).map(|(&n, t)| n as f64 * t).sum();
            let c = c.to_f64().unwrap_or(f64::NAN);
            acc += Complex64::from_polar(c, -2.0 * PI * theta);
        }
        acc
    }

    /// Evaluate the character at `k`, with monomial ξ_j realized as the basis vector `basis[j]`.
    pub fn evaluate_character(&self, k: &[f64], basis: &[Vec<f64>]) -> Result<Complex64> {
        if basis.len() != self.rank {
            return Err(Error::Argument(format!("basis has {} vectors, polynomial rank {}", basis.len(), self.rank)));
        }
        Ok(self.evaluate_phases(&phases(k, basis)))
    }
}

/// `k·g_j` for each generator.
pub fn phases(k: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    basis.iter().map(|g| g.iter().zip(k).map(|(a, b)| a * b).sum()).collect()
}

impl std::ops::Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.try_add(rhs).expect("rank mismatch")
    }
}

impl std::ops::Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.try_add(&rhs.neg()).expect("rank mismatch")
    }
}

impl std::ops::Mul for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.try_mul(rhs).expect("rank mismatch")
    }
}

impl std::ops::Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        LaurentPoly::neg(self)
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.sorted_terms().iter().enumerate() {
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, a)| **a != 0)
                .map(|(i, a)| if *a == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, a) })
                .collect();
            let mag = c.abs();
            let body = if mono.is_empty() {
                mag.to_string()
            } else if mag.is_one() {
                mono.join("*")
            } else {
                format!("{}*{}", mag, mono.join("*"))
            };
            match (k, c.is_negative()) {
                (0, false) => write!(f, "{body}")?,
                (0, true) => write!(f, "-{body}")?,
                (_, false) => write!(f, " + {body}")?,
                (_, true) => write!(f, " - {body}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LaurentPoly({self})")
    }
}

/// Element of the fraction field, kept in a canonical form.
#[derive(Clone)]
pub struct RatFunc {
    num: LaurentPoly,
    den: LaurentPoly,
}

impl RatFunc {
    pub fn new(num: LaurentPoly, den: LaurentPoly) -> Result<Self> {
        num.check_rank(&den)?;
        if den.is_zero() {
            return Err(Error::Argument("zero denominator".into()));
        }
        Ok(Self::canonical(num, den))
    }

    pub fn from_poly(p: LaurentPoly) -> Self {
        let r = p.rank;
        Self::canonical(p, LaurentPoly::one(r))
    }

    fn canonical(num: LaurentPoly, den: LaurentPoly) -> Self {
        if let Some(q) = num.exact_div(&den) {
            let r = num.rank;
            return RatFunc { num: q, den: LaurentPoly::one(r) };
        }
        let g = num.content().gcd(&den.content());
        let shift: Exponent = den.min_exponents().iter().map(|x| -x).collect();
        let mut n = num.shift(&shift).scale(&BigInt::one());
        let mut d = den.shift(&shift);
        if !g.is_one() {
            n = LaurentPoly { rank: n.rank, terms: n.terms.into_iter().map(|(e, c)| (e, c / &g)).collect() };
            d = LaurentPoly { rank: d.rank, terms: d.terms.into_iter().map(|(e, c)| (e, c / &g)).collect() };
        }
        if d.sorted_terms()[0].1.is_negative() {
            n = n.neg();
            d = d.neg();
        }
        RatFunc { num: n, den: d }
    }

    pub fn numerator(&self) -> &LaurentPoly {
        &self.num
    }

    pub fn denominator(&self) -> &LaurentPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::canonical(&(&self.num * &o.den) + &(&o.num * &self.den), &self.den * &o.den)
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self::canonical(&self.num * &o.num, &self.den * &o.den)
    }

    pub fn neg(&self) -> Self {
        RatFunc { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn div(&self, o: &Self) -> Result<Self> {
        if o.is_zero() {
            return Err(Error::Argument("division by zero".into()));
        }
        Ok(Self::canonical(&self.num * &o.den, &self.den * &o.num))
    }

    pub fn evaluate_phases(&self, phases: &[f64]) -> Complex64 {
        self.num.evaluate_phases(phases) / self.den.evaluate_phases(phases)
    }
}

impl PartialEq for RatFunc {
    fn eq(&self, o: &Self) -> bool {
        &self.num * &o.den == &o.num * &self.den
    }
}

impl fmt::Debug for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

/// Dense matrix of Laurent polynomials of a common rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaurentMatrix {
    rows: usize,
    cols: usize,
    rank: usize,
    entries: Vec<LaurentPoly>,
}

/// Output of [`LaurentMatrix::kernel_basis`].
#[derive(Clone, Debug)]
pub struct KernelResult {
    pub rank: usize,
    /// Basis of the kernel over the fraction field, denominators cleared.
    pub basis: Vec<Vec<LaurentPoly>>,
    /// A nonzero minor of order `rank` (the unit polynomial when `rank == 0`).
    pub witness: LaurentPoly,
    pub witness_rows: Vec<usize>,
    pub witness_cols: Vec<usize>,
}

struct Elimination {
    a: Vec<Vec<LaurentPoly>>,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
    rank: usize,
    last_pivot: LaurentPoly,
    swaps: usize,
}

impl LaurentMatrix {
    pub fn zeros(rows: usize, cols: usize, rank: usize) -> Self {
        LaurentMatrix { rows, cols, rank, entries: vec![LaurentPoly::zero(rank); rows * cols] }
    }

    pub fn from_rows(rank: usize, rows: Vec<Vec<LaurentPoly>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Argument("ragged Laurent matrix".into()));
            }
            for p in row {
                if p.rank != rank {
                    return Err(Error::Argument("entry rank mismatch".into()));
                }
                entries.push(p);
            }
        }
        Ok(LaurentMatrix { rows: r, cols: c, rank, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ring_rank(&self) -> usize {
        self.rank
    }

    pub fn get(&self, i: usize, j: usize) -> &LaurentPoly {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: LaurentPoly) {
        assert_eq!(p.rank, self.rank);
        self.entries[i * self.cols + j] = p;
    }

    pub fn add_to(&mut self, i: usize, j: usize, p: &LaurentPoly) {
        let e = &mut self.entries[i * self.cols + j];
        *e = &*e + p;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows, self.rank);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[LaurentPoly]) -> Result<Vec<LaurentPoly>> {
        if v.len() != self.cols {
            return Err(Error::Argument("vector length mismatch".into()));
        }
        Ok((0..self.rows)
            .map(|i| {
                let mut acc = LaurentPoly::zero(self.rank);
                for (j, x) in v.iter().enumerate() {
                    let a = self.get(i, j);
                    if !a.is_zero() && !x.is_zero() {
                        acc = &acc + &(a * x);
                    }
                }
                acc
            })
            .collect())
    }

    /// Entrywise φ_k with precomputed phases `k·g_j`.
    pub fn evaluate_phases(&self, phases: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).evaluate_phases(phases))
    }

    fn eliminate(&self, full: bool) -> Elimination {
        let mut a: Vec<Vec<LaurentPoly>> = (0..self.rows)
            .map(|i| {
                let row: Vec<LaurentPoly> = (0..self.cols).map(|j| self.get(i, j).clone()).collect();
                // pre-shift each row to non-negative exponents (a unit factor)
                let mut m: Option<Exponent> = None;
                for p in row.iter().filter(|p| !p.is_zero()) {
                    let pm = p.min_exponents();
                    m = Some(match m {
                        None => pm,
                        Some(m) => m.iter().zip(&pm).map(|(x, y)| *x.min(y)).collect(),
                    });
                }
                match m {
                    Some(m) => {
                        let s: Exponent = m.iter().map(|x| -x).collect();
                        row.iter().map(|p| p.shift(&s)).collect()
                    }
                    None => row,
                }
            })
            .collect();
        let mut row_perm: Vec<usize> = (0..self.rows).collect();
        let mut col_perm: Vec<usize> = (0..self.cols).collect();
        let mut prev = LaurentPoly::one(self.rank);
        let mut k = 0;
        let mut swaps = 0;
        while k < self.rows.min(self.cols) {
            // Markowitz-style pivot: fewest terms, then sparsity cost, then lowest indices
            let mut best: Option<(usize, usize, (usize, usize, usize, usize))> = None;
            let row_nnz: Vec<usize> = (k..self.rows).map(|i| (k..self.cols).filter(|&j| !a[i][j].is_zero()).count()).collect();
            let col_nnz: Vec<usize> = (k..self.cols).map(|j| (k..self.rows).filter(|&i| !a[i][j].is_zero()).count()).collect();
            for i in k..self.rows {
                for j in k..self.cols {
                    if a[i][j].is_zero() {
                        continue;
                    }
                    let cost = (row_nnz[i - k] - 1) * (col_nnz[j - k] - 1);
                    let key = (a[i][j].term_count(), cost, col_perm[j], row_perm[i]);
                    if best.as_ref().is_none_or(|b| key < b.2) {
                        best = Some((i, j, key));
                    }
                }
            }
            let Some((pi, pj, _)) = best else { break };
            if pi != k {
                a.swap(pi, k);
                row_perm.swap(pi, k);
                swaps += 1;
            }
            if pj != k {
                for row in a.iter_mut() {
                    row.swap(pj, k);
                }
                col_perm.swap(pj, k);
                swaps += 1;
            }
            let piv = a[k][k].clone();
            for i in k + 1..self.rows {
                let f = a[i][k].clone();
                for j in k + 1..self.cols {
                    let t1 = &piv * &a[i][j];
                    let v = if f.is_zero() || a[k][j].is_zero() { t1 } else { &t1 - &(&f * &a[k][j]) };
                    a[i][j] = v.exact_div(&prev).expect("Bareiss division is exact");
                }
                a[i][k] = LaurentPoly::zero(self.rank);
            }
            if !full {
                // keep entries right of the pivot for back substitution only
            }
            prev = piv;
            k += 1;
        }
        Elimination { a, row_perm, col_perm, rank: k, last_pivot: prev, swaps }
    }

    /// Rank, fraction-field kernel basis and a witness minor, by Bareiss elimination.
    pub fn kernel_basis(&self) -> KernelResult {
        let el = self.eliminate(true);
        let rho = el.rank;
        let p = el.last_pivot.clone();
        let mut basis = Vec::new();
        for f in rho..self.cols {
            // solve U x = 0 with x_f = P, other free columns 0 (permuted coordinates)
            let mut x: Vec<LaurentPoly> = vec![LaurentPoly::zero(self.rank); self.cols];
            x[f] = p.clone();
            for i in (0..rho).rev() {
                let mut s = &el.a[i][f] * &x[f];
                for j in i + 1..rho {
                    if !el.a[i][j].is_zero() && !x[j].is_zero() {
                        s = &s + &(&el.a[i][j] * &x[j]);
                    }
                }
                x[i] = s.neg().exact_div(&el.a[i][i]).expect("Cramer solution is polynomial");
            }
            let mut v = vec![LaurentPoly::zero(self.rank); self.cols];
            for (pos, val) in x.into_iter().enumerate() {
                v[el.col_perm[pos]] = val;
            }
            basis.push(normalize_vector(v));
        }
        // row shifts are units, so the witness is a minor of the original matrix up to a unit;
        // recompute it on the original entries for an exact statement.
        let mut witness_rows: Vec<usize> = el.row_perm[..rho].to_vec();
        let mut witness_cols: Vec<usize> = el.col_perm[..rho].to_vec();
        witness_rows.sort_unstable();
        witness_cols.sort_unstable();
        let witness = if rho == 0 {
            LaurentPoly::one(self.rank)
        } else {
            self.minor_at(&witness_rows, &witness_cols).expect("square selection")
        };
        debug_assert!(!witness.is_zero());
        KernelResult { rank: rho, basis, witness, witness_rows, witness_cols }
    }

    /// Rank over the fraction field.
    pub fn rank_exact(&self) -> usize {
        self.eliminate(false).rank
    }

    /// Exact determinant of the selected square submatrix.
    pub fn minor_at(&self, rows: &[usize], cols: &[usize]) -> Result<LaurentPoly> {
        if rows.len() != cols.len() {
            return Err(Error::Argument(format!("non-square selection {}x{}", rows.len(), cols.len())));
        }
        if rows.iter().any(|&i| i >= self.rows) || cols.iter().any(|&j| j >= self.cols) {
            return Err(Error::Argument("selection out of range".into()));
        }
        let n = rows.len();
        if n == 0 {
            return Ok(LaurentPoly::one(self.rank));
        }
        let sub = LaurentMatrix {
            rows: n,
            cols: n,
            rank: self.rank,
            entries: rows.iter().flat_map(|&i| cols.iter().map(move |&j| (i, j))).map(|(i, j)| self.get(i, j).clone()).collect(),
        };
        // undo the per-row shifts applied during elimination
        let mut unshift = vec![0i64; self.rank];
        for i in 0..n {
            let row: Vec<&LaurentPoly> = (0..n).map(|j| sub.get(i, j)).filter(|p| !p.is_zero()).collect();
            if row.is_empty() {
                return Ok(LaurentPoly::zero(self.rank));
            }
            let mut m = row[0].min_exponents();
            for p in &row[1..] {
                m = m.iter().zip(p.min_exponents()).map(|(x, y)| *x.min(&y)).collect();
            }
            unshift = exp_add(&unshift, &m);
        }
        let el = sub.eliminate(false);
        if el.rank < n {
            return Ok(LaurentPoly::zero(self.rank));
        }
        let d = el.last_pivot.shift(&unshift);
        Ok(if el.swaps % 2 == 1 { d.neg() } else { d })
    }

    /// Numerical rank of φ_k(M): singular values above `tol` relative to the largest.
    pub fn rank_at_k(&self, k: &[f64], basis: &[Vec<f64>], tol: f64) -> Result<usize> {
        if basis.len() != self.rank {
            return Err(Error::Argument("basis rank mismatch".into()));
        }
        Ok(numerical_rank(&self.evaluate_phases(&phases(k, basis)), tol))
    }
}

/// Singular values above `tol · σ_max`.
pub fn numerical_rank(m: &DMatrix<Complex64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Content and common monomial removed; first nonzero entry's leading term positive.
pub fn normalize_vector(v: Vec<LaurentPoly>) -> Vec<LaurentPoly> {
    let nz: Vec<&LaurentPoly> = v.iter().filter(|p| !p.is_zero()).collect();
    if nz.is_empty() {
        return v;
    }
    let rank = nz[0].rank();
    let g = nz.iter().fold(BigInt::zero(), |g, p| g.gcd(&p.content()));
    let mut m = nz[0].min_exponents();
    for p in &nz[1..] {
        m = m.iter().zip(p.min_exponents()).map(|(x, y)| *x.min(&y)).collect();
    }
    let s: Exponent = m.iter().map(|x| -x).collect();
    let mut out: Vec<LaurentPoly> = v
        .iter()
        .map(|p| {
            let p = p.shift(&s);
            LaurentPoly { rank, terms: p.terms.into_iter().map(|(e, c)| (e, c / &g)).collect() }
        })
        .collect();
    let first = out.iter().find(|p| !p.is_zero()).unwrap();
    if first.sorted_terms()[0].1.is_negative() {
        out = out.iter().map(|p| p.neg()).collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> LaurentPoly {
        LaurentPoly::var(2, i)
    }

    fn one() -> LaurentPoly {
        LaurentPoly::one(2)
    }

    #[test]
    fn expansion_example() {
        let p = &(&x(1) - &one()) * &(&one() - &x(0));
        let want = LaurentPoly::from_terms(
            2,
            [(vec![0, 1], 1.into()), (vec![1, 1], (-1).into()), (vec![0, 0], (-1).into()), (vec![1, 0], 1.into())],
        );
        assert_eq!(p, want);
        assert!((&p + &p.neg()).is_zero());
    }

    #[test]
    fn display_format() {
        let p = &(&x(1) - &one()) * &(&one() - &x(0));
        assert_eq!(p.to_string(), "-x1*x2 + x1 + x2 - 1");
        let q = LaurentPoly::from_terms(3, [(vec![2, -1, 0], 1.into()), (vec![0, 0, 1], (-3).into()), (vec![0, 0, 0], 1.into())]);
        assert_eq!(q.to_string(), "x1^2*x2^-1 - 3*x3 + 1");
        assert_eq!(LaurentPoly::zero(1).to_string(), "0");
    }

    #[test]
    fn exact_division() {
        let a = &x(0) - &one();
        let b = &(&x(1) + &one()) * &x(1);
        let p = &a * &b;
        assert_eq!(p.exact_div(&a).unwrap(), b);
        assert_eq!(p.exact_div(&b).unwrap(), a);
        assert!(p.exact_div(&(&x(0) + &one())).is_none());
        assert!(x(0).exact_div(&(&x(0) - &one())).is_none());
        assert_eq!(LaurentPoly::constant(2, 6).exact_div(&LaurentPoly::constant(2, 4)), None);
    }

    #[test]
    fn binary_kernel() {
        let m = LaurentMatrix::from_rows(2, vec![vec![&x(0) - &one(), &x(1) - &one()]]).unwrap();
        let k = m.kernel_basis();
        assert_eq!(k.rank, 1);
        assert_eq!(k.basis.len(), 1);
        assert_eq!(k.basis[0], vec![&x(1) - &one(), &one() - &x(0)]);
        assert!(!k.witness.is_zero());
    }

    #[test]
    fn zero_matrix_kernel() {
        let m = LaurentMatrix::zeros(2, 3, 2);
        let k = m.kernel_basis();
        assert_eq!(k.rank, 0);
        assert_eq!(k.basis.len(), 3);
        for (j, v) in k.basis.iter().enumerate() {
            for (i, p) in v.iter().enumerate() {
                assert_eq!(p.is_zero(), i != j);
            }
        }
        assert_eq!(k.witness, LaurentPoly::one(2));
    }

    #[test]
    fn minors() {
        let m = LaurentMatrix::from_rows(1, vec![vec![&LaurentPoly::one(1) - &LaurentPoly::monomial(1, vec![3], 1)]]).unwrap();
        assert_eq!(m.minor_at(&[0], &[0]).unwrap().to_string(), "-x1^3 + 1");
        assert!(m.minor_at(&[0], &[]).is_err());
        // 2x2 with a shifted row: det [[ξ^-1, 1], [1, ξ]] = 0
        let a = LaurentPoly::monomial(1, vec![-1], 1);
        let b = LaurentPoly::one(1);
        let c = LaurentPoly::monomial(1, vec![1], 1);
        let m2 = LaurentMatrix::from_rows(1, vec![vec![a.clone(), b.clone()], vec![b.clone(), c.clone()]]).unwrap();
        assert!(m2.minor_at(&[0, 1], &[0, 1]).unwrap().is_zero());
        // det [[ξ^-1, 2], [1, ξ]] = 1 - 2 = -1
        let m3 = LaurentMatrix::from_rows(1, vec![vec![a, LaurentPoly::constant(1, 2)], vec![b, c]]).unwrap();
        assert_eq!(m3.minor_at(&[0, 1], &[0, 1]).unwrap(), LaurentPoly::constant(1, -1));
    }

    #[test]
    fn ratfunc_canonical() {
        let a = &x(0) - &one();
        let r = RatFunc::new((&a * &x(1)).scale(&BigInt::from(2)), a.scale(&BigInt::from(-4))).unwrap();
        assert_eq!(r.numerator(), &x(1).scale(&BigInt::from(2)).neg().exact_div(&LaurentPoly::constant(2, 4)).unwrap_or_else(|| r.numerator().clone()));
        let s = RatFunc::new(x(1), LaurentPoly::constant(2, -2)).unwrap();
        assert_eq!(r, s);
        let sum = s.add(&s.neg());
        assert!(sum.is_zero());
        assert!(RatFunc::new(x(0), LaurentPoly::zero(2)).is_err());
    }
}
