//! Acceptance criteria 1-10, one PASS/FAIL line each. Exits nonzero if any criterion fails.

use fbs_cli::formats::ConstraintReport;
use fbs_cli::{generate_patch, run, Scheme};
use fbs_core::cycles::{degeneracy_check, intertwining_residual, Analysis};
use fbs_core::diffraction::{
    estimate_amplitudes, noise_floor, strongest_peaks, verify_cycle_condition, verify_cycle_condition_all,
    verify_intensity, verify_span, CellOccurrences, Estimator, FourierModule, PeakSearch, SpanStatus, WaveVector,
};
use fbs_core::fbs::FbsComplex;
use fbs_core::laurent::LaurentPoly;
use fbs_core::presets::{self, NAMES};
use fbs_core::rational::{qf, to_f64};
use fbs_core::tilings::{DecoratedPattern, TileInstance};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

struct Line {
    id: usize,
    pass: bool,
    detail: String,
}

fn line(id: usize, pass: bool, detail: String) -> Line {
    println!("criterion {id}: {}  {detail}", if pass { "PASS" } else { "FAIL" });
    Line { id, pass, detail }
}

fn constraints(preset: &str) -> ConstraintReport {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(["fbs", "constraints", "--preset", preset], &mut out, &mut err);
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
    ConstraintReport::from_json(&String::from_utf8(out).unwrap()).unwrap()
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn e(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * x)
}

// ---------------------------------------------------------------------------------------------

fn c1() -> Line {
    let t = Instant::now();
    let r = constraints("square-triangle");
    let n = r.generators.len();
    let secs = t.elapsed().as_secs_f64();
    line(1, n == 2 && secs < 60.0, format!("square-triangle generators {n} (expected 2), {secs:.2} s"))
}

fn c2() -> Line {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, d) in [(2, 1), (3, 1), (3, 2), (4, 2), (4, 3)] {
        let r = constraints(&format!("canonical-{n}-{d}"));
        let want = binomial(n, d + 1);
        ok &= r.generators.len() == want;
        parts.push(format!("({n},{d}) {}/{want} rank {}", r.generators.len(), r.generic_rank));
    }
    let secs = t.elapsed().as_secs_f64();
    line(2, ok && secs < 120.0, format!("generating-set sizes {}, {secs:.2} s", parts.join(", ")))
}

/// Interval lengths and decoration offsets straight from a preset's definition file.
fn binary_data(preset: &str) -> ([f64; 2], [f64; 2]) {
    let f = presets::preset(preset).unwrap();
    let v = |e: usize| f.basis().realize(f.rho(e))[0];
    let lens = [v(0), v(1)];
    let mut u = [0.0; 2];
    for (p, dec) in f.decorations.iter().enumerate() {
        u[p] = to_f64(&dec.coords[0]) * lens[p];
    }
    (lens, u)
}

fn c3() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for preset in ["binary-fib", "binary-comm"] {
        let f = presets::preset(preset).unwrap();
        let an = Analysis::new(&f).unwrap();
        let r = constraints(preset);
        let (v, u) = binary_data(preset);
        let mut n = 0;
        let mut w: f64 = 0.0;
        while n < 1000 {
            let k = rng.gen_range(-20.0..20.0);
            if degeneracy_check(&f, &an.gv, &an.basis, &[k], 1e-8).degenerate {
                continue;
            }
            let g = r.generator_matrix(&[k]);
            let compiled = g[(0, 0)] / g[(1, 0)];
            let closed = Complex64::from_polar(1.0, 2.0 * PI * k * (u[1] - u[0])) * (e(k * v[1]) - 1.0) / (1.0 - e(k * v[0]));
            w = w.max((compiled - closed).norm() / closed.norm());
            n += 1;
        }
        worst = worst.max(w);
        parts.push(format!("{preset} {w:.2e}"));
    }
    line(3, worst < 1e-10, format!("max relative error over 1000 k: {}", parts.join(", ")))
}

type Terms = Vec<(i64, [f64; 2])>;

fn lv(c: f64, j: i64) -> [f64; 2] {
    let a = PI * (j - 1) as f64 / 6.0;
    [c * a.cos(), c * a.sin()]
}

/// exp(iπ c k·l) = exp(−2πi k·(−c/2) l).
fn square_terms(gen: usize, p: i64) -> Terms {
    let s3 = 3f64.sqrt();
    (0..4)
        .map(|i| {
            let sign = if i % 2 == 0 { 1 } else { -1 };
            if gen == 0 {
                (sign, lv(-(s3 + 1.0) / 2.0, 3 * i + p))
            } else {
                (-sign, lv(-(s3 - 1.0) / 2.0, 3 * i + p))
            }
        })
        .collect()
}

fn triangle_terms(q: i64, outer: f64) -> Terms {
    let s3 = 3f64.sqrt();
    (0..3).flat_map(|i| [(1, lv(s3 / 3.0, 4 * i + q)), (-1, lv(outer, 4 * i + q))]).collect()
}

/// Equal as multisets after one common translation and one common sign.
fn same_up_to_phase(a: &Terms, b: &Terms) -> bool {
    if a.len() != b.len() || a.is_empty() {
        return false;
    }
    let close = |x: [f64; 2], y: [f64; 2]| (x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-12;
    [1, -1].iter().any(|&eps| {
        b.iter().any(|cand| {
            let c = [a[0].1[0] - cand.1[0], a[0].1[1] - cand.1[1]];
            let mut used = vec![false; b.len()];
            a.iter().all(|(s, x)| {
                let y = [x[0] - c[0], x[1] - c[1]];
                match (0..b.len()).find(|&j| !used[j] && b[j].0 == eps * s && close(b[j].1, y)) {
                    Some(j) => {
                        used[j] = true;
                        true
                    }
                    None => false,
                }
            })
        })
    })
}

fn c4() -> Line {
    let r = constraints("square-triangle");
    let s3 = 3f64.sqrt();
    let mut matched = 0;
    let mut printed = 0;
    for gen in 0..2 {
        let comps = &r.generators[gen].components;
        let terms = |c: usize| -> Terms {
            comps[c].terms.iter().map(|t| (t.coeff.parse().unwrap(), [t.position[0], t.position[1]])).collect()
        };
        for p in 1..=3 {
            matched += same_up_to_phase(&terms(p as usize - 1), &square_terms(gen, p)) as usize;
        }
        let outer = if gen == 0 { (3.0 + s3) / 3.0 } else { (s3 - 3.0) / 3.0 };
        let literal = if gen == 0 { (1.0 + s3) / 3.0 } else { (s3 - 1.0) / 3.0 };
        for q in 1..=4 {
            matched += same_up_to_phase(&terms(2 + q as usize), &triangle_terms(q, outer)) as usize;
            printed += same_up_to_phase(&terms(2 + q as usize), &triangle_terms(q, literal)) as usize;
        }
    }
    line(
        4,
        matched == 14,
        format!("{matched}/14 components match (triangle offsets (3+√3)/3, (√3−3)/3); printed offsets match {printed}/8"),
    )
}

fn c5() -> Line {
    let r = constraints("canonical-3-2");
    let s2 = 0.5f64.sqrt();
    let v = [[1.0, 0.0], [-s2, s2], [-0.5, -0.75f64.sqrt()]];
    // x_p sits on the prototile without v_p
    let species = ["x23", "x13", "x12"];
    let idx: Vec<usize> = species.iter().map(|s| r.species.iter().position(|x| x == s).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let g = r.generator_matrix(&k);
        let ratios: Vec<Complex64> =
            (0..3).map(|p| g[(idx[p], 0)] / (PI * (k[0] * v[p][0] + k[1] * v[p][1])).sin()).collect();
        let mean = ratios.iter().sum::<Complex64>() / 3.0;
        worst = worst.max(ratios.iter().map(|z| (z - mean).norm()).fold(0.0, f64::max) / mean.norm());
    }
    line(5, worst < 1e-10, format!("(3,2) relative spread of a_p/sin(πk·v_p) over 100 k: {worst:.2e}"))
}

fn with_decoration_moved(preset: &str, p: usize, shift: &[(i64, i64)]) -> FbsComplex {
    let mut f = presets::preset(preset).unwrap();
    for (c, &(n, d)) in f.decorations[p].coords.iter_mut().zip(shift) {
        *c += qf(n, d);
    }
    f
}

struct PeakSet {
    f: FbsComplex,
    an: Analysis,
    pattern: DecoratedPattern,
    peaks: Vec<WaveVector>,
    spans: Vec<f64>,
}

fn peak_set(preset: &str, radius: f64) -> PeakSet {
    let f = presets::preset(preset).unwrap();
    let an = Analysis::new(&f).unwrap();
    let pattern = generate_patch(&f, Some(preset), radius, Scheme::Auto, 0).unwrap();
    let m = FourierModule::for_preset(preset, &f).unwrap();
    let found = strongest_peaks(&f, &an, &pattern, &m, &PeakSearch::default()).unwrap();
    let floor = noise_floor(&pattern);
    let spans = found
        .iter()
        .map(|(w, a)| {
            let r = verify_span(&an.generator_matrix(f.decorations.len(), &w.k), a, floor).unwrap();
            assert_eq!(r.status, SpanStatus::Checked);
            r.residual.unwrap()
        })
        .collect();
    PeakSet { peaks: found.into_iter().map(|(w, _)| w).collect(), f, an, pattern, spans }
}

/// Span residuals at the same k for a patch whose decoration `p` was moved.
fn moved_spans(s: &PeakSet, preset: &str, radius: f64, p: usize, shift: &[(i64, i64)]) -> Vec<f64> {
    let g = with_decoration_moved(preset, p, shift);
    let scheme = if preset == "binary-fib" { Scheme::Fibonacci } else { Scheme::Inflation };
    let q = generate_patch(&g, None, radius, scheme, 0).unwrap();
    let floor = noise_floor(&q);
    s.peaks
        .iter()
        .map(|w| {
            let a = estimate_amplitudes(&q, &w.k, Estimator::HardBall).unwrap();
            let gm = s.an.generator_matrix(s.f.decorations.len(), &w.k);
            verify_span(&gm, &a, floor).unwrap().residual.unwrap_or(f64::INFINITY)
        })
        .collect()
}

fn c6_7(fib: &PeakSet, st: &PeakSet) -> (Line, Line) {
    let t = Instant::now();
    let fib_worst = fib.spans.iter().cloned().fold(0.0, f64::max);
    let st_worst = st.spans.iter().cloned().fold(0.0, f64::max);
    let tiles = st.pattern.tiles.len();
    // a tenth of the unit edge: the short interval's decoration, and the t1 centre along its first edge
    let fib_neg = median(moved_spans(fib, "binary-fib", 1e4, 1, &[(1, 10)]));
    let st_neg = median(moved_spans(st, "square-triangle", 200.0, 3, &[(1, 10), (0, 1)]));
    let fib_pos = median(fib.spans.clone());
    let st_pos = median(st.spans.clone());
    let pass6 = fib.spans.len() == 10
        && st.spans.len() == 10
        && fib_worst < 1e-2
        && st_worst < 5e-2
        && tiles >= 100_000
        && fib_neg > 10.0 * fib_pos
        && st_neg > 10.0 * st_pos;
    let l6 = line(
        6,
        pass6,
        format!(
            "span: fibonacci R=1e4 worst {fib_worst:.2e}; square-triangle {tiles} tiles worst {st_worst:.2e}; \
             moved decoration median {fib_neg:.2e} vs {fib_pos:.2e} and {st_neg:.2e} vs {st_pos:.2e}; {:.1} s",
            t.elapsed().as_secs_f64()
        ),
    );

    let cyc = |s: &PeakSet| -> f64 {
        let occ = CellOccurrences::new(&s.f, &s.pattern).unwrap();
        s.peaks
            .iter()
            .map(|w| {
                verify_cycle_condition_all(&s.f, &occ, &w.k, Estimator::HardBall)
                    .unwrap()
                    .iter()
                    .map(|r| r.max())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };
    let b = cyc(fib);
    let q = cyc(st);
    let comb = comb_cycle();
    let l7 = line(7, b < 1e-2 && q < 5e-2 && comb < 1e-3, format!("cycle condition: binary {b:.2e}, square-triangle {q:.2e}, comb {comb:.2e}"));
    (l6, l7)
}

fn comb_cycle() -> f64 {
    let json = r#"{"dimension":1,"cells":{"0":["v"],"1":["e"]},
        "faces":{"1,0":{"e":"v"},"1,1":{"e":"v"}},
        "basis":[[1.0]],"rho":{"e":["1"]},
        "decorations":[{"id":"x","cell":"e","coords":["1/2"]}]}"#;
    let f = FbsComplex::from_json_str(json).unwrap();
    let radius = 1e4;
    let n = radius as i64 + 1;
    let tiles = (-n..=n)
        .map(|i| TileInstance {
            name: "e".into(),
            prototile: Some(0),
            translation: vec![i as f64],
            exact: Some(vec![fbs_core::rational::q(i)]),
        })
        .collect();
    let p = DecoratedPattern::from_tiles(&f, tiles, radius).unwrap();
    let occ = CellOccurrences::new(&f, &p).unwrap();
    [1.0, 2.0, 3.0]
        .iter()
        .map(|&k| verify_cycle_condition(&f, &occ, &[k], 0, &[], None, Estimator::HardBall).unwrap().max())
        .fold(0.0, f64::max)
}

fn c8() -> Line {
    let f = presets::preset("binary-comm").unwrap();
    let an = Analysis::new(&f).unwrap();
    let v = f.basis().vectors[0][0];
    let on_set = (-50..=50).filter(|&m| degeneracy_check(&f, &an.gv, &an.basis, &[m as f64 / v], 1e-8).degenerate).count();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let random = (0..1000)
        .filter(|_| degeneracy_check(&f, &an.gv, &an.basis, &[rng.gen_range(-50.0..50.0)], 1e-8).degenerate)
        .count();
    line(8, on_set == 101 && random < 10, format!("binary-comm: {on_set}/101 of v⁻¹ℤ flagged, {random}/1000 random k flagged"))
}

fn c9() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for &name in NAMES {
        let f = presets::preset(name).unwrap();
        let b = f.set();
        if !f.validate().is_ok() {
            failures.push(format!("{name}: invalid"));
            continue;
        }
        for n in 2..=f.dim() {
            if !b.boundary_matrix(n - 1).unwrap().mul(&b.boundary_matrix(n).unwrap()).is_zero() {
                failures.push(format!("{name}: ∂∂ ≠ 0 in degree {n}"));
            }
        }
        let an = Analysis::new(&f).unwrap();
        if !an.gv.cocycle_violations(&f).is_empty() {
            failures.push(format!("{name}: cocycle identity"));
        }
        for n in 2..=f.dim() {
            let lower = an.gv.boundary(&f, n - 1);
            let upper = an.gv.boundary(&f, n);
            for j in 0..upper.cols() {
                let col: Vec<LaurentPoly> = (0..upper.rows()).map(|i| upper.get(i, j).clone()).collect();
                if !lower.mul_vec(&col).unwrap().iter().all(|p| p.is_zero()) {
                    failures.push(format!("{name}: twisted ∂∂ ≠ 0 in degree {n}"));
                    break;
                }
            }
        }
        let top = an.gv.boundary(&f, f.dim());
        for (c, cname) in an.basis.cycles.iter().zip(&an.basis.names) {
            if !top.mul_vec(c).unwrap().iter().all(|p| p.is_zero()) {
                failures.push(format!("{name}: cycle {cname} not annihilated"));
            }
        }
        let d = f.dim();
        for _ in 0..200 {
            let k: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
            worst = worst.max(intertwining_residual(&f, &an.gv, &an.basis, &k));
        }
    }
    if worst > 1e-9 {
        failures.push(format!("intertwining residual {worst:.2e}"));
    }
    let detail = if failures.is_empty() {
        format!("{} presets: identities, ∂∂ = 0, cocycle, annihilation; worst intertwining residual {worst:.2e}", NAMES.len())
    } else {
        failures.join("; ")
    };
    line(9, failures.is_empty(), detail)
}

fn c10() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for &name in NAMES {
        let f = presets::preset(name).unwrap();
        let an = Analysis::new(&f).unwrap();
        let radius = match f.dim() {
            1 => 2000.0,
            2 => 40.0,
            _ => 8.0,
        };
        let mut p = generate_patch(&f, Some(name), radius, Scheme::Auto, 1).unwrap();
        p.weights = (0..p.species.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let m = FourierModule::for_preset(name, &f).unwrap();
        let search = PeakSearch { count: 3, ..PeakSearch::default() };
        let mut ks: Vec<Vec<f64>> = strongest_peaks(&f, &an, &p, &m, &search).unwrap().into_iter().map(|(w, _)| w.k).collect();
        for _ in 0..3 {
            ks.push((0..f.dim()).map(|_| rng.gen_range(-3.0..3.0)).collect());
        }
        for k in &ks {
            worst = worst.max(verify_intensity(&p, k, &p.weights).unwrap().gap);
        }
    }
    line(10, worst < 1e-12, format!("worst regrouping gap over {} presets: {worst:.2e}", NAMES.len()))
}

fn main() {
    let t = Instant::now();
    let mut lines = vec![c1(), c2(), c3(), c4(), c5()];
    let fib = peak_set("binary-fib", 1e4);
    let st = peak_set("square-triangle", 200.0);
    let (l6, l7) = c6_7(&fib, &st);
    lines.push(l6);
    lines.push(l7);
    lines.push(c8());
    lines.push(c9());
    lines.push(c10());
    let failed: Vec<&Line> = lines.iter().filter(|l| !l.pass).collect();
    println!("acceptance: {}/{} PASS in {:.1} s", lines.len() - failed.len(), lines.len(), t.elapsed().as_secs_f64());
    for l in &failed {
        eprintln!("failed criterion {}: {}", l.id, l.detail);
    }
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
