use fbs_core::cycles::{Analysis, ConstraintGenerator};
use fbs_core::presets::{self, square_triangle::l};
use num_traits::ToPrimitive;

fn lv(j: i64) -> [f64; 2] {
    let a = std::f64::consts::PI * (j - 1) as f64 / 6.0;
    [a.cos(), a.sin()]
}

/// `(sign, position)` terms of exp(−2πi k·x) form.
type Terms = Vec<(i64, [f64; 2])>;

fn at(c: f64, j: i64) -> [f64; 2] {
    let v = lv(j);
    [c * v[0], c * v[1]]
}

fn squares(gen: usize, p: i64) -> Terms {
    let s3 = 3f64.sqrt();
    (0..4)
        .map(|i| {
            let sign = if i % 2 == 0 { 1 } else { -1 };
            if gen == 0 {
                (sign, at(-(s3 + 1.0) / 2.0, 3 * i + p))
            } else {
                (-sign, at(-(s3 - 1.0) / 2.0, 3 * i + p))
            }
        })
        .collect()
}

fn triangles(q: i64, outer: f64) -> Terms {
    let s3 = 3f64.sqrt();
    let mut out = Vec::new();
    for i in 0..3 {
        out.push((1, at(s3 / 3.0, 4 * i + q)));
        out.push((-1, at(outer, 4 * i + q)));
    }
    out
}

fn compiled(g: &ConstraintGenerator) -> Terms {
    g.terms.iter().map(|t| (t.coeff.to_i64().unwrap(), [t.position_f[0], t.position_f[1]])).collect()
}

/// Equal up to one common translation and one common sign.
fn matches_up_to_phase(a: &Terms, b: &Terms) -> bool {
    if a.len() != b.len() || a.is_empty() {
        return false;
    }
    let close = |x: [f64; 2], y: [f64; 2]| (x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-12;
    for eps in [1, -1] {
        for cand in b {
            let c = [a[0].1[0] - cand.1[0], a[0].1[1] - cand.1[1]];
            let mut used = vec![false; b.len()];
            let ok = a.iter().all(|(s, x)| {
                let y = [x[0] - c[0], x[1] - c[1]];
                match (0..b.len()).find(|&j| !used[j] && b[j].0 == eps * s && close(b[j].1, y)) {
                    Some(j) => {
                        used[j] = true;
                        true
                    }
                    None => false,
                }
            });
            if ok {
                return true;
            }
        }
    }
    false
}

fn analysis() -> (fbs_core::fbs::FbsComplex, Analysis) {
    let f = presets::preset("square-triangle").unwrap();
    let a = Analysis::new(&f).unwrap();
    (f, a)
}

#[test]
fn dodecagon_cycles_match_closed_forms() {
    let (f, a) = analysis();
    let s3 = 3f64.sqrt();
    assert_eq!(f.species(), vec!["x_s1", "x_s2", "x_s3", "x_t1", "x_t2", "x_t3", "x_t4"]);
    for gen in 0..2 {
        for p in 1..=3 {
            let got = compiled(&a.generators[gen][p as usize - 1]);
            assert!(matches_up_to_phase(&got, &squares(gen, p)), "J{} s{p}: {got:?}", gen + 1);
        }
        let outer = if gen == 0 { (3.0 + s3) / 3.0 } else { (s3 - 3.0) / 3.0 };
        for q in 1..=4 {
            let got = compiled(&a.generators[gen][2 + q as usize]);
            assert!(matches_up_to_phase(&got, &triangles(q, outer)), "J{} t{q}: {got:?}", gen + 1);
        }
    }
}

#[test]
fn printed_triangle_offsets_are_off_lattice() {
    let (_, a) = analysis();
    let s3 = 3f64.sqrt();
    for (gen, outer) in [(0, (1.0 + s3) / 3.0), (1, (s3 - 1.0) / 3.0)] {
        for q in 1..=4 {
            let got = compiled(&a.generators[gen][2 + q as usize]);
            assert!(!matches_up_to_phase(&got, &triangles(q, outer)));
        }
    }
}

#[test]
fn sigma_maps_tiles_to_tiles() {
    use presets::square_triangle::{sigma, square, triangle};
    let f = presets::preset("square-triangle").unwrap();
    let cls = f.tile_classifier();
    for p in 1..=3 {
        let img: Vec<_> = square(p).iter().map(|v| sigma(v)).collect();
        assert!(cls.classify(&img).is_some());
    }
    for q in 1..=4 {
        let img: Vec<_> = triangle(q).iter().map(|v| sigma(v)).collect();
        assert!(cls.classify(&img).is_some());
    }
    assert_eq!(sigma(&sigma(&l(2))), l(2));
}
