use matchlab::assignment::semidiscrete_w2_exact;
use matchlab::dyadic::{partition_from_tree, CountTree, DyadicCube};
use matchlab::flux::*;
use matchlab::point_process::sample_poisson;
use matchlab::stats::MeanEstimate;
use matchlab::{read_grid, PointSet, Rect, RngStream};
use proptest::prelude::*;

fn cell(side: u32, kids: [f64; 4], h: f64) -> CellProblem {
    CellProblem {
        cube: DyadicCube::root(side).unwrap(),
        child_density: kids,
        parent_density: kids.iter().sum::<f64>() / 4.0,
        h,
    }
}

fn poisson(r: u32, seed: u64) -> PointSet {
    sample_poisson(&Rect::square(r as f64).unwrap(), 1.0, &RngStream::new(seed, "mu")).unwrap()
}

#[test]
fn two_phase_cell_matches_the_one_dimensional_solution() {
    // -phi'' = -1 on (0, 2), +1 on (2, 4), phi' = 0 at both ends:
    // phi' = x on the left half and 4 - x on the right.
    let s = solve_cell(&cell(4, [2.0, 0.0, 2.0, 0.0], 0.125)).unwrap();
    let m = s.m;
    for b in 0..m {
        for a in 0..=m {
            let x = a as f64 * s.h;
            let want = if x <= 2.0 { x } else { 4.0 - x };
            assert!((s.fx[b * (m + 1) + a] - want).abs() < 1e-9);
        }
    }
    assert!(s.fy.iter().all(|v| v.abs() < 1e-9));
    for (k, g) in s.centred_gradients().iter().enumerate() {
        let x = (k % m) as f64 * s.h + 0.5 * s.h;
        let want = if x < 2.0 { x } else { 4.0 - x };
        assert!((g[0] - want).abs() < 1e-9 && g[1].abs() < 1e-9);
    }
    // Energy of the interpolant: 4 * 2 int_0^2 x^2 dx = 64 / 3.
    assert!((s.energy() - 64.0 / 3.0).abs() < 1e-8);
}

#[test]
fn random_cells_satisfy_the_divergence_theorem() {
    for seed in 0..5u64 {
        let ps = poisson(8, seed);
        let tree = CountTree::build(&ps).unwrap();
        let cp = CellProblem::from_tree(&tree, DyadicCube::root(8).unwrap(), 0.25).unwrap();
        let s = solve_cell(&cp).unwrap();
        assert!(s.residual <= CELL_TOL);
        assert!(s.boundary_flux().abs() < 1e-10);
    }
}

#[test]
fn assembled_flux_solves_the_divergence_problem() {
    let h = 0.25;
    for seed in 0..10u64 {
        let ps = poisson(16, seed);
        let tree = CountTree::build(&ps).unwrap();
        let part = partition_from_tree(&tree);
        if part.overflow {
            continue;
        }
        let f = assemble_flux(&ps, &part, h).unwrap();
        assert!(f.divergence_residual() <= 5.0 * h, "seed {seed}");
        assert!(f.boundary_normal_max() <= 1e-8);
        // Only cubes strictly coarser than the partition contribute.
        for q in &f.cubes {
            assert!(part.cubes.iter().any(|p| q.is_ancestor_of(p) && q.side > p.side));
        }
    }
}

#[test]
fn trapezoid_energy_of_analytic_fields() {
    let field = |n: usize, v: &dyn Fn(f64, f64) -> [f64; 2]| -> f64 {
        let h = 1.0 / (n - 1) as f64;
        let nodes: Vec<[f64; 2]> =
            (0..n * n).map(|k| v((k % n) as f64 * h, (k / n) as f64 * h)).collect();
        trapezoid_energy(&nodes, n, h)
    };
    assert_eq!(field(9, &|_, _| [0.0, 0.0]), 0.0);
    let e = field(129, &|x, _| [x, 0.0]);
    assert!((e - 1.0 / 3.0).abs() < 1e-3, "{e}");
    let pi = std::f64::consts::PI;
    let smooth = |x: f64, y: f64| [(pi * x).sin() * (pi * y).cos(), x * y * y];
    let (coarse, fine) = (field(65, &smooth), field(129, &smooth));
    assert!((coarse - fine).abs() < 0.01 * fine);
    assert!((fine - 19.0 / 60.0).abs() < 1e-3);
}

#[test]
fn flux_energy_converges_under_refinement() {
    let ps = poisson(8, 3);
    let tree = CountTree::build(&ps).unwrap();
    let part = partition_from_tree(&tree);
    let coarse = assemble_flux(&ps, &part, 0.25).unwrap();
    let fine = assemble_flux(&ps, &part, 0.125).unwrap();
    let (a, b) = (coarse.certified_energy(), fine.certified_energy());
    assert!(b > 0.0 && (a - b).abs() < 0.05 * b, "{a} vs {b}");
    // The trapezoid value on node samples tracks the certified one.
    assert!((flux_energy(&fine) - b).abs() < 0.05 * b);
}

#[test]
fn certified_bound_dominates_exact_w2() {
    for r in [8u32, 16] {
        for seed in 0..20u64 {
            let ps = poisson(r, seed);
            let rep = upper_bound(&ps, r, DEFAULT_FLUX_H).unwrap();
            let bx = Rect::square(r as f64).unwrap();
            let exact = semidiscrete_w2_exact(&ps, &bx, rep.density).unwrap();
            assert!(exact.value <= rep.total, "R={r} seed={seed}: {} > {}", exact.value, rep.total);
            if !rep.brutal {
                let want = (rep.coarse.sqrt() + rep.flux_term.sqrt()).powi(2);
                assert!((rep.total - want).abs() <= 1e-12 * want);
                assert!((rep.flux_term - 2.0 * rep.flux_energy).abs() <= 1e-12 * rep.flux_term);
            }
        }
    }
}

#[test]
fn brutal_path_reports_count_times_diameter() {
    // Everything in one quarter: the root density is 1 but its children
    // leave the window, so the partition is the root itself and j = 0.
    let pts: Vec<[f64; 2]> = (0..64).map(|k| [0.1 + (k % 8) as f64 * 0.45, 0.1 + (k / 8) as f64 * 0.45]).collect();
    let ps = PointSet::new(pts.clone(), Rect::square(8.0).unwrap()).unwrap();
    let rep = upper_bound(&ps, 8, 0.25).unwrap();
    assert!(!rep.brutal);
    assert_eq!(rep.flux_energy, 0.0);
    assert_eq!(rep.coarse, 64.0 * 2.0 * 64.0);
    // Too few points: the root leaves the window.
    let sparse = PointSet::new(pts[..20].to_vec(), Rect::square(8.0).unwrap()).unwrap();
    let rep = upper_bound(&sparse, 8, 0.25).unwrap();
    assert!(rep.brutal && rep.brutal_reason.is_some());
    assert_eq!(rep.total, 20.0 * 2.0 * 64.0);
}

#[test]
fn gradient_increments_have_zero_mean() {
    let side = 8;
    let q = DyadicCube::root(side).unwrap();
    let bx = Rect::square(side as f64).unwrap();
    let probes = [[1.3, 2.9], [4.1, 4.6], [6.7, 0.8]];
    let mut samples = vec![Vec::new(); 6];
    for k in 0..4000u64 {
        let ps = sample_poisson(&bx, 1.0, &RngStream::new(k, "increments")).unwrap();
        let tree = CountTree::build(&ps).unwrap();
        let s = solve_cell_cached(&CellProblem::from_tree(&tree, q, 0.25).unwrap()).unwrap();
        for (p, x) in probes.iter().enumerate() {
            let g = s.gradient_at(*x);
            samples[2 * p].push(g[0]);
            samples[2 * p + 1].push(g[1]);
        }
    }
    for (k, xs) in samples.iter().enumerate() {
        let est = MeanEstimate::from_samples(xs);
        assert!(est.stderr > 0.0);
        assert!(est.within_sigma(0.0, 3.0), "component {k}: {est:?}");
    }
}

#[test]
fn cell_energy_scales_with_area() {
    let stream = RngStream::new(17, "cell-energy");
    let per_area: Vec<f64> = [4u32, 8, 16]
        .iter()
        .map(|&s| {
            let e = cell_energy_moment(s, 1.0, 2000, 0.25, &stream.child(s)).unwrap();
            e.mean / (s * s) as f64
        })
        .collect();
    let (lo, hi) = per_area.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi / lo < 3.0, "{per_area:?}");
    // Doubling the intensity doubles the variance of the densities.
    let one = cell_energy_moment(8, 1.0, 2000, 0.25, &stream.child("i1")).unwrap();
    let two = cell_energy_moment(8, 2.0, 2000, 0.25, &stream.child("i2")).unwrap();
    assert!(two.mean > one.mean);
    assert!((1.5..2.5).contains(&(two.mean / one.mean)), "{} / {}", two.mean, one.mean);
    assert!(cell_energy_moment(8, 1.0, 0, 0.25, &stream).is_err());
}

#[test]
fn flux_energy_grows_like_r2_log_r() {
    let ratios: Vec<f64> = [16u32, 32, 64]
        .iter()
        .map(|&r| {
            let e: Vec<f64> = (0..20u64)
                .filter_map(|s| {
                    let rep = upper_bound(&poisson(r, s), r, 0.25).unwrap();
                    (!rep.brutal).then_some(rep.flux_energy)
                })
                .collect();
            let mean = e.iter().sum::<f64>() / e.len() as f64;
            mean / ((r * r) as f64 * (r as f64).ln())
        })
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi / lo < 3.0, "{ratios:?}");
}

#[test]
fn flux_dump_round_trip() {
    let ps = poisson(8, 1);
    let (_, flux) = upper_bound_with_flux(&ps, 8, 0.25).unwrap();
    let flux = flux.expect("not brutal");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flux.bin");
    flux.write_grid(&path).unwrap();
    let (header, data) = read_grid(&path).unwrap();
    assert_eq!(header["dims"], serde_json::json!([33, 33]));
    let nodes = flux.node_samples();
    assert_eq!(data.len(), 2 * nodes.len());
    assert_eq!(data[2 * 100], nodes[100][0]);
    assert_eq!(data[2 * 100 + 1], nodes[100][1]);
}

#[test]
fn report_serializes() {
    let rep = upper_bound(&poisson(8, 2), 8, 0.25).unwrap();
    let text = serde_json::to_string(&rep).unwrap();
    assert!(text.contains("\"R\":8"));
    let back: UpperBoundReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, rep);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flux_invariants_on_random_clouds(
        pts in prop::collection::vec((0.0..8.0f64, 0.0..8.0f64).prop_map(|(x, y)| [x, y]), 40..120)
    ) {
        let ps = PointSet::new(pts, Rect::square(8.0).unwrap()).unwrap();
        let (rep, flux) = upper_bound_with_flux(&ps, 8, 0.25).unwrap();
        prop_assert!(rep.total >= rep.coarse);
        if let Some(f) = flux {
            prop_assert!(f.divergence_residual() <= 5.0 * f.h);
            prop_assert!(f.boundary_normal_max() <= 1e-8);
        }
        let exact = semidiscrete_w2_exact(&ps, &Rect::square(8.0).unwrap(), rep.density).unwrap();
        prop_assert!(exact.value <= rep.total);
    }
}
