use fbs_core::fbs::FbsComplex;
use fbs_core::presets::{self, TAU};
use fbs_core::tilings::*;

fn counts(p: &DecoratedPattern, n: usize) -> Vec<usize> {
    let mut c = vec![0; n];
    for t in &p.tiles {
        c[t.prototile.unwrap()] += 1;
    }
    c
}

fn in_ball(f: &FbsComplex, p: &DecoratedPattern, r: f64) -> Vec<usize> {
    let verts = tile_vertices(f, p).unwrap();
    let mut c = vec![0; f.effective_prototiles().len()];
    for (t, vs) in p.tiles.iter().zip(&verts) {
        if vs.iter().all(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt() <= r) {
            c[t.prototile.unwrap()] += 1;
        }
    }
    c
}

#[test]
fn fibonacci_tile_ratio() {
    let f = presets::preset("binary-fib").unwrap();
    for scheme in [BinaryScheme::CutProject { rho: 0.318_309_886 }, BinaryScheme::fibonacci()] {
        let p = generate_binary(&f, &scheme, 100.0).unwrap();
        let c = in_ball(&f, &p, 100.0);
        let ratio = c[0] as f64 / c[1] as f64;
        assert!((ratio / TAU - 1.0).abs() < 0.02, "{c:?}");
        assert!(winding_check(&f, &p).unwrap().is_ok());
    }
}

#[test]
fn fibonacci_substitution_is_a_cut_and_project_word() {
    // the two-sided fixed point b|a is the mechanical word at rho = 2(1 − α) from below
    let f = presets::preset("binary-fib").unwrap();
    let a = generate_binary(&f, &BinaryScheme::fibonacci(), 300.0).unwrap();
    let alpha = TAU / (TAU + 1.0);
    let b = generate_binary(&f, &BinaryScheme::CutProject { rho: 2.0 * (1.0 - alpha) - 1e-12 }, 300.0).unwrap();
    let names = |p: &DecoratedPattern| p.tiles.iter().map(|t| t.name.clone()).collect::<Vec<_>>();
    assert_eq!(names(&a), names(&b));
}

#[test]
fn periodic_binary_lies_on_a_lattice() {
    let f = presets::binary(1.0, 1.0).unwrap();
    let p = generate_binary(&f, &BinaryScheme::CutProject { rho: 0.3 }, 20.0).unwrap();
    for s in 0..2 {
        for i in 0..p.count(s) {
            let x = p.point(s, i)[0] - 0.5;
            assert!((x - x.round()).abs() < 1e-12);
        }
    }
}

#[test]
fn minimal_binary_patch() {
    let f = presets::preset("binary-fib").unwrap();
    let p = generate_binary(&f, &BinaryScheme::CutProject { rho: 0.1 }, TAU).unwrap();
    assert!(!p.tiles.is_empty());
    assert!(winding_check(&f, &p).unwrap().is_ok());
}

#[test]
fn binary_rejects_bad_input() {
    let f = presets::preset("binary-fib").unwrap();
    assert!(generate_binary(&f, &BinaryScheme::CutProject { rho: 1.5 }, 10.0).is_err());
    assert!(generate_binary(&f, &BinaryScheme::CutProject { rho: 0.5 }, -1.0).is_err());
    let json = r#"{"dimension":1,"cells":{"0":["v"],"1":["s1","s2"]},
        "faces":{"1,0":{"s1":"v","s2":"v"},"1,1":{"s1":"v","s2":"v"}},
        "basis":[[-1.0],[1.0]],"rho":{"s1":["1","0"],"s2":["0","1"]}}"#;
    let g = FbsComplex::from_json_str(json).unwrap();
    let e = generate_binary(&g, &BinaryScheme::fibonacci(), 5.0).unwrap_err();
    assert!(matches!(e, fbs_core::Error::Argument(_)));
}

#[test]
fn canonical_three_two_rhombi() {
    let f = presets::preset("canonical-3-2").unwrap();
    let p = generate_canonical(&f, &[0.123_456_7], 30.0).unwrap();
    let c = counts(&p, 3);
    assert!(c.iter().all(|&x| x > 0), "{c:?}");
    let w = winding_check(&f, &p).unwrap();
    assert!(w.is_ok(), "{:?}", &w.failures[..w.failures.len().min(5)]);
    assert!(w.checked_tiles > 100);
}

#[test]
fn canonical_area_balance() {
    // tiles fully inside a box cover it up to a boundary layer
    let f = presets::preset("canonical-3-2").unwrap();
    let p = generate_canonical(&f, &[0.2718], 40.0).unwrap();
    let vols = prototile_volumes(&f).unwrap();
    let verts = tile_vertices(&f, &p).unwrap();
    for h in [10.0, 20.0] {
        let inside: f64 = p
            .tiles
            .iter()
            .zip(&verts)
            .filter(|(_, vs)| vs.iter().all(|v| v[0].abs() <= h && v[1].abs() <= h))
            .map(|(t, _)| vols[t.prototile.unwrap()])
            .sum();
        let touching: f64 = p
            .tiles
            .iter()
            .zip(&verts)
            .filter(|(_, vs)| vs.iter().any(|v| v[0].abs() <= h && v[1].abs() <= h))
            .map(|(t, _)| vols[t.prototile.unwrap()])
            .sum();
        let area = 4.0 * h * h;
        assert!(inside <= area + 1e-9 && touching >= area - 1e-9, "{inside} {touching} {area}");
    }
}

#[test]
fn canonical_two_one_matches_binary() {
    let f = presets::preset("canonical-2-1").unwrap();
    let b = presets::preset("binary-fib").unwrap();
    let scheme = CutProjectScheme::canonical(&f.basis().vectors).unwrap();
    let (v1, v2) = (TAU, 1.0);
    let (k1, k2) = (scheme.internal[(0, 0)], scheme.internal[(0, 1)]);
    assert!((k1 * v1 + k2 * v2).abs() < 1e-12);
    let gamma = 0.1357;
    // rescale internal coordinates so that K e1 = v2
    let g = gamma * v2 / k1;
    let rho = (-g / (v1 + v2)).rem_euclid(1.0);
    let pc = generate_canonical(&f, &[gamma], 200.0).unwrap();
    let pb = generate_binary(&b, &BinaryScheme::CutProject { rho }, 200.0).unwrap();
    for s in 0..2 {
        assert_eq!(pc.count(s), pb.count(s));
        for (x, y) in pc.points[s].iter().zip(&pb.points[s]) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn canonical_higher_presets_wind() {
    for (name, off, r) in [("canonical-3-1", vec![0.11, 0.23], 40.0), ("canonical-4-2", vec![0.1, 0.21], 14.0), ("canonical-4-3", vec![0.137], 6.0)] {
        let f = presets::preset(name).unwrap();
        let p = generate_canonical(&f, &off, r).unwrap();
        let w = winding_check(&f, &p).unwrap();
        assert!(w.is_ok(), "{name}: {:?}", &w.failures[..w.failures.len().min(5)]);
        assert!(w.checked_tiles > 0, "{name}");
        let c = counts(&p, f.effective_prototiles().len());
        assert!(c.iter().all(|&x| x > 0), "{name} {c:?}");
    }
}

#[test]
fn non_generic_offset_is_rejected() {
    let f = presets::preset("canonical-3-2").unwrap();
    let e = generate_canonical(&f, &[0.0], 5.0).unwrap_err();
    assert!(e.to_string().contains("perturb"));
}

#[test]
fn square_triangle_single_square() {
    let f = presets::preset("square-triangle").unwrap();
    let p = generate_square_triangle(&f, 0, StSeed::Square, 5.0).unwrap();
    assert_eq!(p.tiles.len(), 1);
}

#[test]
fn square_triangle_edges_and_winding() {
    let f = presets::preset("square-triangle").unwrap();
    let p = generate_square_triangle(&f, 2, StSeed::Dodecagon, 30.0).unwrap();
    let verts = tile_vertices(&f, &p).unwrap();
    for vs in &verts {
        for i in 0..vs.len() {
            let (a, b) = (&vs[i], &vs[(i + 1) % vs.len()]);
            let e = [b[0] - a[0], b[1] - a[1]];
            assert!(((e[0] * e[0] + e[1] * e[1]).sqrt() - 1.0).abs() < 1e-12);
            let ang = e[1].atan2(e[0]).to_degrees().rem_euclid(360.0);
            assert!(((ang / 30.0) - (ang / 30.0).round()).abs() < 1e-9);
        }
    }
    let w = winding_check(&f, &p).unwrap();
    assert!(w.is_ok(), "{:?}", &w.failures[..w.failures.len().min(5)]);
    assert!(w.checked_tiles > 100);
}

#[test]
fn square_triangle_area_balance() {
    // (squares, triangles) ↦ (7S + 3T, 16S + 7T); the Perron vector has T/S = 4/√3, so
    // the square and triangle areas agree at the fixed point
    let m = [[7.0, 3.0], [16.0, 7.0]];
    let mut v = [1.0f64, 0.0];
    for _ in 0..40 {
        v = [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
        let s = v[0] + v[1];
        v = [v[0] / s, v[1] / s];
    }
    let fixed = v[0] / (v[1] * 3f64.sqrt() / 4.0);
    assert!((fixed - 1.0).abs() < 1e-12);
    let f = presets::preset("square-triangle").unwrap();
    let p = generate_square_triangle(&f, 6, StSeed::Square, 80.0).unwrap();
    let c = in_ball(&f, &p, 80.0);
    let squares: usize = c[..3].iter().sum();
    let triangles: usize = c[3..].iter().sum();
    let ratio = squares as f64 / (triangles as f64 * 3f64.sqrt() / 4.0);
    assert!((ratio / fixed - 1.0).abs() < 0.02, "{squares} {triangles} {ratio}");
}

#[test]
fn winding_negative_controls() {
    let f = presets::preset("square-triangle").unwrap();
    let p = generate_square_triangle(&f, 2, StSeed::Dodecagon, 20.0).unwrap();
    let target = p
        .tiles
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let n = |t: &TileInstance| t.translation.iter().map(|x| x * x).sum::<f64>();
            n(a.1).total_cmp(&n(b.1))
        })
        .unwrap()
        .0;
    let mut swapped = p.clone();
    let k = swapped.tiles[target].prototile.unwrap();
    let other = if k == 0 { 1 } else { 0 };
    swapped.tiles[target].prototile = Some(other);
    swapped.tiles[target].name = f.prototiles[other].name.clone();
    let r = winding_check(&f, &swapped).unwrap();
    assert!(r.failures.iter().any(|x| x.kind == FailureKind::Adjacency && x.tile == target));

    let mut shifted = p.clone();
    shifted.tiles[target].translation[0] += 1e-3;
    let r = winding_check(&f, &shifted).unwrap();
    assert!(r.failures.iter().any(|x| matches!(x.kind, FailureKind::Gap | FailureKind::Overlap)));
}

#[test]
fn points_are_uniformly_discrete() {
    for name in ["binary-fib", "canonical-3-2", "square-triangle"] {
        let f = presets::preset(name).unwrap();
        let p = match name {
            "binary-fib" => generate_binary(&f, &BinaryScheme::fibonacci(), 200.0).unwrap(),
            "canonical-3-2" => generate_canonical(&f, &[0.31], 25.0).unwrap(),
            _ => generate_square_triangle(&f, 2, StSeed::Dodecagon, 20.0).unwrap(),
        };
        let c = decoration_clearance(&f).unwrap();
        for sep in p.min_separation() {
            assert!(sep >= c - 1e-9, "{name}: {sep} < {c}");
        }
    }
}

#[test]
fn density_is_stable() {
    let f = presets::preset("canonical-3-2").unwrap();
    let dens = |r: f64| {
        let p = generate_canonical(&f, &[0.123_456_7], r).unwrap();
        (0..p.species.len()).map(|s| p.count(s)).sum::<usize>() as f64 / p.ball_volume()
    };
    let (a, b) = (dens(50.0), dens(100.0));
    assert!((a / b - 1.0).abs() < 0.02, "{a} {b}");
}

#[test]
fn pattern_file_round_trip() {
    let f = presets::preset("canonical-3-2").unwrap();
    let p = generate_canonical(&f, &[0.2], 8.0).unwrap();
    let text = p.to_text();
    let mut q = DecoratedPattern::from_text(&text).unwrap();
    q.resolve(&f).unwrap();
    assert_eq!(q.to_text(), text);
    assert_eq!(q.tiles.len(), p.tiles.len());
    assert!(winding_check(&f, &q).unwrap().is_ok());
    assert!(DecoratedPattern::from_text("radius x").is_err());
}
