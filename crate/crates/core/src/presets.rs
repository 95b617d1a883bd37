//! Built-in complexes: binary (generic and commensurate), canonical cut-and-project (n, d) and
//! the square-triangle tiling with its two dodecagon cycles.
//!
//! The checked-in JSON under `presets/` is what [`preset`] loads; [`build`] regenerates it.

use crate::cycles::{build_gv, choose_chains, compute_lv, is_cycle};
use crate::error::{Error, Result};
use crate::fbs::{
    ChainTerm, ComplexBuilder, DecorationSpec, FbsComplex, FrequencyBasis, GeometricChain, PrototileSpec, Shape,
};
use crate::rational::{self, from_ints, q, qf, zero_vec, Q, QVec};
use num_complex::Complex64;

pub const NAMES: &[&str] = &[
    "binary-fib",
    "binary-comm",
    "canonical-2-1",
    "canonical-3-1",
    "canonical-3-2",
    "canonical-4-2",
    "canonical-4-3",
    "square-triangle",
];

const EMBEDDED: &[(&str, &str)] = &[
    ("binary-fib", include_str!("../presets/binary-fib.json")),
    ("binary-comm", include_str!("../presets/binary-comm.json")),
    ("canonical-2-1", include_str!("../presets/canonical-2-1.json")),
    ("canonical-3-1", include_str!("../presets/canonical-3-1.json")),
    ("canonical-3-2", include_str!("../presets/canonical-3-2.json")),
    ("canonical-4-2", include_str!("../presets/canonical-4-2.json")),
    ("canonical-4-3", include_str!("../presets/canonical-4-3.json")),
    ("square-triangle", include_str!("../presets/square-triangle.json")),
];

pub const TAU: f64 = 1.618_033_988_749_895;

/// Load a preset from its checked-in JSON.
pub fn preset(name: &str) -> Result<FbsComplex> {
    let (_, json) = EMBEDDED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Argument(format!("unknown preset '{name}' (known: {})", NAMES.join(", "))))?;
    FbsComplex::from_json_str(json)
}

/// Construct a preset from geometry.
pub fn build(name: &str) -> Result<FbsComplex> {
    match name {
        "binary-fib" => binary(TAU, 1.0),
        "binary-comm" => binary_commensurate(3, 2, 1.0),
        "square-triangle" => square_triangle(),
        _ => {
            let rest = name.strip_prefix("canonical-").ok_or_else(|| Error::Argument(format!("unknown preset '{name}'")))?;
            let (n, d) = rest.split_once('-').ok_or_else(|| Error::Argument(format!("unknown preset '{name}'")))?;
            let n: usize = n.parse().map_err(|_| Error::Argument(format!("unknown preset '{name}'")))?;
            let d: usize = d.parse().map_err(|_| Error::Argument(format!("unknown preset '{name}'")))?;
            canonical(n, d)
        }
    }
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn interval(name: &str, edge: QVec, dec: &str) -> PrototileSpec {
    let mid = rational::scale(&edge, &qf(1, 2));
    PrototileSpec {
        name: name.into(),
        shape: Shape::Parallelotope { origin: zero_vec(edge.len()), edges: vec![edge] },
        decorations: vec![DecorationSpec { id: dec.into(), point: mid, weight: one() }],
    }
}

/// Two intervals of lengths `v1`, `v2`, decorated at their midpoints.
pub fn binary(v1: f64, v2: f64) -> Result<FbsComplex> {
    let basis = FrequencyBasis::new(vec![vec![v1], vec![v2]], true)?;
    let mut b = ComplexBuilder::new(basis, vec![1.0])?;
    b.add(&interval("s1", from_ints(&[1, 0]), "x1"))?;
    b.add(&interval("s2", from_ints(&[0, 1]), "x2"))?;
    b.build()
}

/// Intervals of lengths `n1·v` and `n2·v`: a rank one edge lattice.
pub fn binary_commensurate(n1: i64, n2: i64, v: f64) -> Result<FbsComplex> {
    let basis = FrequencyBasis::new(vec![vec![v]], true)?;
    let mut b = ComplexBuilder::new(basis, vec![1.0])?;
    b.add(&interval("s1", from_ints(&[n1]), "x1"))?;
    b.add(&interval("s2", from_ints(&[n2]), "x2"))?;
    b.build()
}

/// Star vectors of the canonical presets.
pub fn canonical_star(n: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    let s2 = 2f64.sqrt();
    let s3 = 3f64.sqrt();
    Ok(match (n, d) {
        (2, 1) => vec![vec![TAU], vec![1.0]],
        (3, 1) => vec![vec![1.0], vec![s2], vec![s3]],
        (3, 2) => vec![vec![1.0, 0.0], vec![-s2 / 2.0, s2 / 2.0], vec![-0.5, -s3 / 2.0]],
        (4, 2) => vec![vec![1.0, 0.0], vec![s2 / 2.0, s2 / 2.0], vec![0.0, 1.0], vec![-s2 / 2.0, s2 / 2.0]],
        (4, 3) => vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![s2 - 1.0, s3 - 1.0, 5f64.sqrt() - 2.0],
        ],
        _ => return Err(Error::Unsupported(format!("no canonical preset for n={n}, d={d}"))),
    })
}

pub fn canonical_direction(d: usize) -> Vec<f64> {
    match d {
        1 => vec![1.0],
        2 => {
            let a = 10f64.to_radians();
            vec![a.cos(), a.sin()]
        }
        _ => {
            let v = [1.0, 0.37, 0.23];
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / n).collect()
        }
    }
}

pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn canonical_tile_name(subset: &[usize]) -> String {
    let idx: String = subset.iter().map(|i| (i + 1).to_string()).collect();
    format!("P{idx}")
}

fn unit(n: usize, i: usize) -> QVec {
    let mut v = zero_vec(n);
    v[i] = q(1);
    v
}

/// Canonical (n, d) complex: one parallelotope per d-subset of the star, centre decorations,
/// and one zonotope-boundary cycle per (d+1)-subset.
pub fn canonical(n: usize, d: usize) -> Result<FbsComplex> {
    let star = canonical_star(n, d)?;
    let basis = FrequencyBasis::new(star, true)?;
    let dir = canonical_direction(d);
    let mut b = ComplexBuilder::new(basis.clone(), dir.clone())?;
    for sub in subsets(n, d) {
        let edges: Vec<QVec> = sub.iter().map(|&i| unit(n, i)).collect();
        let centre = edges.iter().fold(zero_vec(n), |acc, e| rational::add(&acc, &rational::scale(e, &qf(1, 2))));
        let name = canonical_tile_name(&sub);
        b.add(&PrototileSpec {
            name: name.clone(),
            shape: Shape::Parallelotope { origin: zero_vec(n), edges },
            decorations: vec![DecorationSpec { id: format!("x{}", &name[1..]), point: centre, weight: one() }],
        })?;
    }
    let mut f = b.build()?;
    let proj = |i: usize| -> f64 { basis.vectors[i].iter().zip(&dir).map(|(a, b)| a * b).sum() };
    let lat = compute_lv(&f)?;
    let chains = choose_chains(&f, None)?;
    let g = build_gv(&f, &lat.lattice, &chains)?;
    let mut cycles = Vec::new();
    for big in subsets(n, d + 1) {
        // facet pairs of the (d+1)-cube: x_k = 0 and x_k = 1
        let facet = |k: usize, base: &QVec| -> (String, QVec) {
            let rest: Vec<usize> = big.iter().copied().filter(|&j| j != big[k]).collect();
            let mut origin = base.clone();
            for &j in &rest {
                if proj(j) < 0.0 {
                    origin = rational::add(&origin, &unit(n, j));
                }
            }
            (canonical_tile_name(&rest), origin)
        };
        let name = format!("Z{}", big.iter().map(|i| (i + 1).to_string()).collect::<String>());
        let mut found = None;
        for mask in 0..(1u32 << d) {
            let mut terms = Vec::new();
            for k in 0..=d {
                let sign = if k > 0 && mask & (1 << (k - 1)) != 0 { -1 } else { 1 };
                let (p0, t0) = facet(k, &zero_vec(n));
                let (p1, t1) = facet(k, &unit(n, big[k]));
                terms.push(ChainTerm { prototile: p1, translation: t1, coeff: sign });
                terms.push(ChainTerm { prototile: p0, translation: t0, coeff: -sign });
            }
            let chain = GeometricChain { name: name.clone(), terms };
            if is_cycle(&f, &g, &chain)? {
                found = Some(chain);
                break;
            }
        }
        cycles.push(found.ok_or_else(|| Error::Internal(format!("no sign pattern closes zonotope {name}")))?);
    }
    f.cycles = cycles;
    Ok(f)
}

/// The square-triangle tiling on the twelvefold star l_j = exp(iπ(j−1)/6).
pub mod square_triangle {
    use super::*;

    /// l_j in coordinates of l_1..l_4 (indices taken mod 12, 1-based).
    pub fn l(j: i64) -> QVec {
        let m = (j - 1).rem_euclid(12);
        let base = match m % 6 {
            0 => [1, 0, 0, 0],
            1 => [0, 1, 0, 0],
            2 => [0, 0, 1, 0],
            3 => [0, 0, 0, 1],
            4 => [-1, 0, 1, 0],
            _ => [0, -1, 0, 1],
        };
        let v = from_ints(&base);
        if m >= 6 {
            rational::neg(&v)
        } else {
            v
        }
    }

    pub fn basis() -> FrequencyBasis {
        let vs = (0..4)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / 6.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
        FrequencyBasis::new(vs, true).expect("valid basis")
    }

    pub fn direction() -> Vec<f64> {
        let a = 7f64.to_radians();
        vec![a.cos(), a.sin()]
    }

    /// Galois map ζ ↦ ζ^5 on coordinates: l_j ↦ l_{5(j−1)+1}.
    pub fn sigma(v: &[Q]) -> QVec {
        let mut out = zero_vec(4);
        for (i, c) in v.iter().enumerate() {
            out = rational::add(&out, &rational::scale(&l(5 * i as i64 + 1), c));
        }
        out
    }

    pub fn square(p: i64) -> Vec<QVec> {
        let a = l(p);
        let b = l(p + 3);
        vec![zero_vec(4), a.clone(), rational::add(&a, &b), b]
    }

    pub fn triangle(q: i64) -> Vec<QVec> {
        let a = l(q - 1);
        let b = l(q + 3);
        vec![zero_vec(4), a.clone(), rational::add(&a, &b)]
    }

    pub fn centroid(vs: &[QVec]) -> QVec {
        let s = vs.iter().fold(zero_vec(4), |acc, v| rational::add(&acc, v));
        rational::scale(&s, &qf(1, vs.len() as i64))
    }

    fn translate(vs: &[QVec], t: &[Q]) -> Vec<QVec> {
        vs.iter().map(|v| rational::add(v, t)).collect()
    }

    /// One of the two fillings of the dodecagon with unit edges centred at `c`:
    /// `(vertices in boundary order)` per tile.
    pub fn dodecagon(c: &[Q], parity: i64) -> Vec<Vec<QVec>> {
        let mut tiles = Vec::new();
        for j in 1..=12i64 {
            let (a, b, lj) = (l(j - 1), l(j + 1), l(j));
            if j.rem_euclid(2) == parity {
                tiles.push(vec![zero_vec(4), a.clone(), b.clone()]);
                tiles.push(vec![a.clone(), b.clone(), rational::add(&b, &lj), rational::add(&a, &lj)]);
            } else {
                tiles.push(vec![lj.clone(), rational::add(&lj, &b), rational::add(&lj, &a)]);
            }
        }
        tiles.into_iter().map(|t| translate(&t, c)).collect()
    }

    fn chain_of(f: &FbsComplex, name: &str, tiles: &[(Vec<QVec>, i64)]) -> Result<GeometricChain> {
        let cls = f.tile_classifier();
        let mut terms = Vec::new();
        for (vs, c) in tiles {
            let (k, t) = cls.classify(vs).ok_or_else(|| Error::Internal("tile is not a translated prototile".into()))?;
            terms.push(ChainTerm { prototile: f.prototiles[k].name.clone(), translation: t, coeff: *c });
        }
        Ok(GeometricChain { name: name.into(), terms })
    }

    /// J1 = D+ − D− at the origin, and its image J2 under σ; σ reverses triangles.
    pub fn cycles(f: &FbsComplex) -> Result<Vec<GeometricChain>> {
        let o = zero_vec(4);
        let mut j1 = Vec::new();
        for (parity, c) in [(1, 1), (0, -1)] {
            for t in dodecagon(&o, parity) {
                j1.push((t, c));
            }
        }
        let j2: Vec<(Vec<QVec>, i64)> = j1
            .iter()
            .map(|(t, c)| {
                let img: Vec<QVec> = t.iter().map(|v| sigma(v)).collect();
                let c = if t.len() == 3 { -c } else { *c };
                (img, c)
            })
            .collect();
        Ok(vec![chain_of(f, "J1", &j1)?, chain_of(f, "J2", &j2)?])
    }

    pub fn complex() -> Result<FbsComplex> {
        let mut b = ComplexBuilder::new(basis(), direction())?;
        for p in 1..=3 {
            let vs = square(p);
            let c = centroid(&vs);
            b.add(&PrototileSpec {
                name: format!("s{p}"),
                shape: Shape::Polygon { vertices: vs },
                decorations: vec![DecorationSpec { id: format!("x_s{p}"), point: c, weight: one() }],
            })?;
        }
        for t in 1..=4 {
            let vs = triangle(t);
            let c = centroid(&vs);
            b.add(&PrototileSpec {
                name: format!("t{t}"),
                shape: Shape::Polygon { vertices: vs },
                decorations: vec![DecorationSpec { id: format!("x_t{t}"), point: c, weight: one() }],
            })?;
        }
        let mut f = b.build()?;
        f.cycles = cycles(&f)?;
        Ok(f)
    }
}

pub fn square_triangle() -> Result<FbsComplex> {
    square_triangle::complex()
}
