//! Exact rational vectors (coordinates in a frequency basis) and small exact solvers.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;
pub type QVec = Vec<Q>;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero_vec(r: usize) -> QVec {
    vec![Q::zero(); r]
}

pub fn from_ints(v: &[i64]) -> QVec {
    v.iter().map(|&x| q(x)).collect()
}

pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| Error::Parse(format!("bad rational '{s}'")))?;
    let d: BigInt = d.parse().map_err(|_| Error::Parse(format!("bad rational '{s}'")))?;
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in '{s}'")));
    }
    Ok(Q::new(n, d))
}

pub fn format_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn add(a: &[Q], b: &[Q]) -> QVec {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[Q], b: &[Q]) -> QVec {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[Q], c: &Q) -> QVec {
    a.iter().map(|x| x * c).collect()
}

pub fn neg(a: &[Q]) -> QVec {
    a.iter().map(|x| -x).collect()
}

pub fn is_zero(a: &[Q]) -> bool {
    a.iter().all(|x| x.is_zero())
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| x.numer().to_f64().unwrap() / x.denom().to_f64().unwrap())
}

/// Realize frequency coordinates through basis vectors.
pub fn realize(coords: &[Q], basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (c, b) in coords.iter().zip(basis) {
        if c.is_zero() {
            continue;
        }
        let c = to_f64(c);
        for (o, x) in out.iter_mut().zip(b) {
            *o += c * x;
        }
    }
    out
}

/// Least common multiple of all denominators.
pub fn common_denominator<'a>(xs: impl IntoIterator<Item = &'a Q>) -> BigInt {
    xs.into_iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

/// Exact solve of `sum_j c_j cols[j] = target` (columns in ℚ^r, possibly r > m).
/// Returns `None` when the columns are dependent or the system is inconsistent.
pub fn solve_columns(cols: &[QVec], target: &[Q]) -> Option<QVec> {
    let m = cols.len();
    let r = target.len();
    // augmented rows: r x (m+1)
    let mut a: Vec<Vec<Q>> = (0..r)
        .map(|i| {
            let mut row: Vec<Q> = cols.iter().map(|c| c[i].clone()).collect();
            row.push(target[i].clone());
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for c in 0..m {
        let p = (row..r).find(|&i| !a[i][c].is_zero())?;
        a.swap(row, p);
        let inv = a[row][c].recip();
        for x in a[row].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..r {
            if i != row && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..=m {
                    let v = &a[row][j] * &f;
                    a[i][j] -= v;
                }
            }
        }
        pivots.push(c);
        row += 1;
    }
    if (row..r).any(|i| !a[i][m].is_zero()) {
        return None;
    }
    Some((0..m).map(|c| a[c][m].clone()).collect())
}

/// Exact determinant of a square rational matrix.
pub fn det(rows: &[QVec]) -> Q {
    let n = rows.len();
    let mut a = rows.to_vec();
    let mut d = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else { return Q::zero() };
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= &a[c][c];
        let inv = a[c][c].recip();
        for i in c + 1..n {
            if a[i][c].is_zero() {
                continue;
            }
            let f = &a[i][c] * &inv;
            for j in c..n {
                let v = &a[c][j] * &f;
                a[i][j] -= v;
            }
        }
    }
    d
}

/// Rank of a list of rational vectors.
pub fn rank(vectors: &[QVec]) -> usize {
    let mut a: Vec<QVec> = vectors.to_vec();
    let cols = a.first().map_or(0, |v| v.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..a.len()).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        let inv = a[r][c].recip();
        for i in r + 1..a.len() {
            if a[i][c].is_zero() {
                continue;
            }
            let f = &a[i][c] * &inv;
            for j in c..cols {
                let v = &a[r][j] * &f;
                a[i][j] -= v;
            }
        }
        r += 1;
    }
    r
}

/// Sign of a float determinant, `None` when ill-conditioned relative to column norms.
pub fn det_sign_f64(cols: &[Vec<f64>]) -> Option<i8> {
    let n = cols.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| cols[j][i]);
    let d = m.determinant();
    let scale: f64 = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).product();
    if !d.is_finite() || d.abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
        None
    } else {
        Some(if d > 0.0 { 1 } else { -1 })
    }
}

pub fn abs_max(a: &[Q]) -> Q {
    a.iter().map(|x| x.abs()).fold(Q::zero(), |m, x| if x > m { x } else { m })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_q("-6/4").unwrap(), qf(-3, 2));
        assert_eq!(format_q(&qf(-3, 2)), "-3/2");
        assert_eq!(format_q(&q(7)), "7");
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("x").is_err());
    }

    #[test]
    fn solve_overdetermined() {
        let cols = vec![from_ints(&[1, 0, 1]), from_ints(&[0, 1, 1])];
        let x = solve_columns(&cols, &from_ints(&[2, 3, 5])).unwrap();
        assert_eq!(x, from_ints(&[2, 3]));
        assert!(solve_columns(&cols, &from_ints(&[2, 3, 4])).is_none());
    }

    #[test]
    fn det_and_rank() {
        let m = vec![from_ints(&[2, 1]), from_ints(&[1, 1])];
        assert_eq!(det(&m), q(1));
        assert_eq!(rank(&[from_ints(&[1, 2]), from_ints(&[2, 4])]), 1);
    }
}
