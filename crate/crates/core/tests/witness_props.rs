use matchlab::assignment::{solve_assignment, Exponent};
use matchlab::dyadic::DyadicCube;
use matchlab::point_process::{sample_conditioned_pair, sample_poisson};
use matchlab::witness::*;
use matchlab::{PointSet, Rect, RngStream};
use proptest::prelude::*;

/// Three-point Gauss-Legendre on `n` equal panels of `[a, b]`.
fn panels(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
    let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let h = (b - a) / n as f64;
    let mut out = Vec::with_capacity(3 * n);
    for k in 0..n {
        let m = a + (k as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(weights) {
            out.push((m + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

#[test]
fn mask_moment_conditions() {
    let m = make_mask();
    // The mask is polynomial on each panel, so the tensor rule is essentially
    // exact; splitting at 1/2 separates the halves.
    let left = panels(0.1, 0.5, 100);
    let right = panels(0.5, 0.9, 100);
    let ys = panels(0.1, 0.9, 200);
    let integrate = |xs: &[(f64, f64)]| -> f64 {
        xs.iter()
            .map(|&(x, wx)| ys.iter().map(|&(y, wy)| wx * wy * m.value([x, y])).sum::<f64>())
            .sum()
    };
    let (l, r) = (integrate(&left), integrate(&right));
    assert!((l + r).abs() < 1e-12, "integral {}", l + r);
    assert!((r - l - 1.0).abs() < 1e-9, "half difference {}", r - l);
}

#[test]
fn mask_frozen_constants() {
    let m = make_mask();
    let (g, h) = m.grid_sups(1024);
    assert!((g - MASK_GRAD_SUP).abs() < 1e-12 * g);
    assert!(h <= MASK_HESSIAN_SUP);
    let (g4, h4) = m.grid_sups(4096);
    assert!(h4 <= MASK_HESSIAN_SUP, "{h4}");
    assert!((g4 - g).abs() < 1e-3 * g);
}

#[test]
fn rescaled_masks() {
    let m = make_mask();
    let unit = DyadicCube::new(1, 1, 0, 0).unwrap();
    let z = rescale_to_cube(m, &unit, [0.0, 0.0]);
    for x in [[0.2, 0.3], [0.5, 0.5], [0.77, 0.41]] {
        assert_eq!(z.value(x), m.value(x));
    }
    // Side 2: the sup of the gradient halves.
    let q = DyadicCube::new(4, 2, 1, 1).unwrap();
    let z = rescale_to_cube(m, &q, [0.0, 0.0]);
    let n = 1024;
    let mut sup = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let x = [2.0 + 2.0 * (i as f64 + 0.5) / n as f64, 2.0 + 2.0 * (j as f64 + 0.5) / n as f64];
            let g = z.grad(x);
            sup = sup.max(g[0].hypot(g[1]));
        }
    }
    assert!((sup - MASK_GRAD_SUP / 2.0).abs() < 1e-12 * sup);
    // Arbitrary cube, offset origin: zero integral by midpoint quadrature.
    let q = DyadicCube::new(64, 8, 3, 5).unwrap();
    let z = rescale_to_cube(m, &q, [-32.0, 10.0]);
    let k = 256;
    let h = 8.0 / k as f64;
    let mut acc = 0.0;
    for j in 0..k {
        for i in 0..k {
            acc += z.value([-32.0 + 24.0 + (i as f64 + 0.5) * h, 10.0 + 40.0 + (j as f64 + 0.5) * h]);
        }
    }
    assert!((acc * h * h).abs() < 1e-8 * 64.0);
}

/// `c b(x2) s(x1)` written out from the closed form.
fn mask_by_hand(x: [f64; 2]) -> f64 {
    let l: f64 = 0.4;
    let bump = 32.0 / 35.0 * l.powi(7) + 29.0 * 32.0 / 315.0 * l.powi(9);
    let half = l.powi(8) / 8.0 + 15.0 * l.powi(10) / 40.0;
    let c = 1.0 / (2.0 * bump * half);
    let (u, v) = (x[0] - 0.5, x[1] - 0.5);
    let b = (l * l - v * v).powi(3) * (1.0 + 29.0 * v * v);
    let s = u * (l * l - u * u).powi(3) * (1.0 + 15.0 * u * u);
    c * b * s
}

#[test]
fn single_point_hand_evaluation() {
    // One point at (2.9, 1.3) of the R = 4 square. Its chain is [0,4)^2
    // (right half, N = +1), [2,4)x[0,2) (left half, N = -1) and [2,3)x[1,2)
    // (right half, N = +1, local point (0.9, 0.3) on the edge of the support).
    let x = [2.9, 1.3];
    let ps = PointSet::new(vec![x], Rect::square(4.0).unwrap()).unwrap();
    let w = build_witness(&ps, 4, f64::INFINITY, 0.25).unwrap();
    let want = mask_by_hand([2.9 / 4.0, 1.3 / 4.0]) - mask_by_hand([0.45, 0.65]) + mask_by_hand([0.9, 0.3]);
    assert_eq!(mask_by_hand([0.9, 0.3]), 0.0);
    assert!((w.value_at(x) - want).abs() < 1e-12 * want.abs().max(1.0));
    let empty = PointSet::empty(Rect::square(4.0).unwrap()).unwrap();
    let v = witness_value(&w, &ps, &empty).unwrap();
    assert!((v.raw - want).abs() < 1e-12 * want.abs().max(1.0));
}

#[test]
fn expected_coefficient_moment_is_the_area() {
    // E[N_Q int zeta_Q d mu] = |Q| for unit-intensity Poisson, |Q| = 16.
    let bx = Rect::square(4.0).unwrap();
    let q = DyadicCube::new(4, 4, 0, 0).unwrap();
    let z = rescale_to_cube(make_mask(), &q, [0.0, 0.0]);
    let reps = 20_000;
    let mut xs = Vec::with_capacity(reps);
    for k in 0..reps {
        let ps = sample_poisson(&bx, 1.0, &RngStream::new(77, "moment").child(k)).unwrap();
        let n: i64 = ps.points().iter().map(|p| if p[0] >= 2.0 { 1 } else { -1 }).sum();
        let s: f64 = ps.points().iter().map(|&p| z.value(p)).sum();
        xs.push(n as f64 * s);
    }
    let e = matchlab::stats::MeanEstimate::from_samples(&xs);
    assert!(e.within_sigma(16.0, 3.0), "{} +- {}", e.mean, e.stderr);
}

#[test]
fn martingale_increments_are_uncorrelated() {
    // Fixed x inside the inner 80% of every cube of its chain at R = 16.
    let x = [5.3, 6.6];
    let r = 16u32;
    let reps = 4000;
    let levels = 5;
    let mut inc = vec![Vec::with_capacity(reps); levels];
    let mask = make_mask();
    for k in 0..reps {
        let ps = sample_poisson(&Rect::square(16.0).unwrap(), 1.0, &RngStream::new(5, "mart").child(k)).unwrap();
        let w = build_witness(&ps, r, f64::INFINITY, 0.25).unwrap();
        for (l, v) in inc.iter_mut().enumerate() {
            let q = DyadicCube::containing(r, r >> l, x);
            let n = w.coefficient(&q).unwrap() as f64;
            v.push(n * rescale_to_cube(mask, &q, [0.0, 0.0]).grad(x)[0]);
        }
    }
    let corr = |a: &[f64], b: &[f64]| {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>();
        let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>();
        let vb = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>();
        cov / (va * vb).sqrt()
    };
    for i in 0..levels {
        for j in i + 1..levels {
            let c = corr(&inc[i], &inc[j]);
            assert!(c.abs() <= 3.0 / (reps as f64).sqrt(), "levels {i},{j}: {c}");
        }
    }
}

#[test]
fn admissibility_across_seeds() {
    let k_an = analytic_lipschitz_k();
    for r in [4u32, 16, 64] {
        let seeds: Vec<u64> = (0..10).collect();
        for m in [64.0, DEFAULT_M] {
            let bx = Rect::square(r as f64).unwrap();
            for &seed in &seeds {
                let (mu, _) = sample_conditioned_pair(&bx, 1.0, &RngStream::new(seed, "adm")).unwrap();
                let w = build_witness(&mu, r, m, DEFAULT_H).unwrap();
                if let Some(s) = w.support() {
                    assert!(s.x0 > 0.0 && s.y0 > 0.0 && s.x1 < r as f64 && s.y1 < r as f64);
                }
                assert!(w.integral().abs() <= 1e-6 * (r * r) as f64);
                let scale = (m * (r as f64).ln()).sqrt();
                let l = w.lipschitz_bound();
                assert!(l <= LIPSCHITZ_K * scale, "R={r} M={m} seed={seed}: {l}");
                assert!(l <= k_an * scale);
                assert!(w.sampled_gradient_max() <= l);
                assert!(l <= (1.0 + LIPSCHITZ_SLACK) * w.sampled_gradient_max() + 1e-12);
            }
        }
    }
}

#[test]
fn exceptional_area_shrinks_with_m() {
    let r = 32u32;
    let seeds: Vec<u64> = (0..100).collect();
    let mean_e = |m: f64| {
        let recs = lower_bound_scan(&[r], &seeds, m, DEFAULT_H, 1.0).unwrap();
        recs.iter().map(|x| x.exceptional_area).sum::<f64>() / (100.0 * (r * r) as f64)
    };
    // At M = 4, 16, 64 the root is nearly always rejected.
    let small: Vec<f64> = [4.0, 16.0, 64.0].iter().map(|&m| mean_e(m)).collect();
    assert!(small[0] >= small[1] && small[1] >= small[2], "{small:?}");
    let large: Vec<f64> = [512.0, 2048.0, 8192.0].iter().map(|&m| mean_e(m)).collect();
    assert!(large[0] > large[1] && large[1] > large[2], "{large:?}");
}

#[test]
fn normalized_value_is_stable_in_m() {
    let seeds: Vec<u64> = (0..40).collect();
    let mean = |m: f64| {
        let recs = lower_bound_scan(&[64], &seeds, m, DEFAULT_H, 1.0).unwrap();
        recs.iter().map(|x| x.value.normalized).sum::<f64>() / 40.0
    };
    let (a, b) = (mean(DEFAULT_M), mean(4.0 * DEFAULT_M));
    assert!(a > 0.0 && b > 0.0 && a / b < 2.0 && b / a < 2.0, "{a} {b}");
}

#[test]
fn weak_duality_against_exact_w1() {
    for r in [8u32, 16] {
        for seed in 0..5 {
            let bx = Rect::square(r as f64).unwrap();
            let (mu, nu) = sample_conditioned_pair(&bx, 1.0, &RngStream::new(seed, "wd")).unwrap();
            let w = build_witness(&mu, r, DEFAULT_M, DEFAULT_H).unwrap();
            let v = witness_value(&w, &mu, &nu).unwrap();
            let cost = solve_assignment(&mu, &nu, Exponent::P1).unwrap().cost;
            assert!(v.normalized <= cost, "R={r} seed={seed}: {} > {cost}", v.normalized);
        }
    }
}

#[test]
fn dumps_round_trip() {
    let bx = Rect::square(8.0).unwrap();
    let mu = sample_poisson(&bx, 1.0, &RngStream::new(2, "dump")).unwrap();
    let w = build_witness(&mu, 8, DEFAULT_M, DEFAULT_H).unwrap();
    let mut buf = Vec::new();
    w.write_jsonl(&mut buf).unwrap();
    let rows: Vec<WitnessCube> = String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows, w.cubes());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zeta.bin");
    w.write_grid(&path).unwrap();
    let (header, data) = matchlab::read_grid(&path).unwrap();
    assert_eq!(header["dims"], serde_json::json!([32, 32]));
    assert_eq!(data.len(), 3 * 32 * 32);
    assert_eq!(data[3 * 40], w.grid_values()[40]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn larger_m_never_grows_the_exceptional_set(seed in 0u64..10_000, m in 1.0f64..5000.0, f in 1.0f64..8.0) {
        let bx = Rect::square(16.0).unwrap();
        let mu = sample_poisson(&bx, 1.0, &RngStream::new(seed, "mono")).unwrap();
        let a = build_witness(&mu, 16, m, DEFAULT_H).unwrap();
        let b = build_witness(&mu, 16, m * f, DEFAULT_H).unwrap();
        prop_assert!(b.exceptional_area() <= a.exceptional_area());
    }

    #[test]
    fn certified_bound_dominates_random_gradients(seed in 0u64..10_000, m in 100.0f64..10_000.0) {
        let bx = Rect::square(8.0).unwrap();
        let mu = sample_poisson(&bx, 1.0, &RngStream::new(seed, "lip")).unwrap();
        let w = build_witness(&mu, 8, m, DEFAULT_H).unwrap();
        let l = w.lipschitz_bound();
        let probe = sample_poisson(&bx, 200.0, &RngStream::new(seed, "probe")).unwrap();
        for &p in probe.points() {
            let g = w.gradient_at(p);
            prop_assert!(g[0].hypot(g[1]) <= l);
        }
    }
}
