use matchlab::point_process::{sample_poisson, sample_uniform_n};
use matchlab::stats::MeanEstimate;
use matchlab::{PointSet, Rect, RngStream};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

fn unit() -> Rect {
    Rect::square(1.0).unwrap()
}

#[test]
fn empty_count_frequency_is_exp_minus_one() {
    let s = RngStream::new(1, "p0");
    let n = 1_000_000;
    let zeros = (0..n)
        .filter(|&k| sample_poisson(&unit(), 1.0, &s.child(k)).unwrap().is_empty())
        .count();
    let f = zeros as f64 / n as f64;
    assert!((f - (-1.0f64).exp()).abs() < 0.002, "{f}");
}

#[test]
fn count_histogram_is_poisson_four() {
    let s = RngStream::new(2, "hist");
    let n = 100_000;
    let mut hist = vec![0usize; 13];
    let mut counts = Vec::with_capacity(n);
    for k in 0..n {
        let c = sample_poisson(&unit(), 4.0, &s.child(k)).unwrap().len();
        hist[c.min(12)] += 1;
        counts.push(c as f64);
    }
    let e = MeanEstimate::from_samples(&counts);
    assert!((e.mean - 4.0).abs() < 0.02, "{}", e.mean);
    // Pooled tail bin at 12+.
    let law = Poisson::new(4.0).unwrap();
    let mut chi2 = 0.0;
    for (c, &obs) in hist.iter().enumerate() {
        let p = if c < 12 { law.pmf(c as u64) } else { 1.0 - (0..12).map(|j| law.pmf(j)).sum::<f64>() };
        let exp = p * n as f64;
        chi2 += (obs as f64 - exp).powi(2) / exp;
    }
    let crit = ChiSquared::new(12.0).unwrap().inverse_cdf(0.999);
    assert!(chi2 < crit, "chi2 = {chi2}, critical {crit}");
    // Variance equals the mean; Var(s^2) ~ (mu_4 - 16) / n with mu_4 = 4 + 3 * 16.
    let var = matchlab::stats::sample_variance(&counts);
    assert!((var - 4.0).abs() < 3.0 * (36.0 / n as f64).sqrt(), "{var}");
}

#[test]
fn disjoint_box_counts_are_uncorrelated() {
    let bx = Rect::square(4.0).unwrap();
    let a = Rect::new(0.0, 0.0, 2.0, 4.0).unwrap();
    let b = Rect::new(2.0, 0.0, 4.0, 4.0).unwrap();
    let s = RngStream::new(3, "cov");
    let prods: Vec<f64> = (0..100_000)
        .map(|k| {
            let ps = sample_poisson(&bx, 1.0, &s.child(k)).unwrap();
            (ps.count_in(&a) as f64 - 8.0) * (ps.count_in(&b) as f64 - 8.0)
        })
        .collect();
    let e = MeanEstimate::from_samples(&prods);
    assert!(e.within_sigma(0.0, 3.0), "{e:?}");
}

#[test]
fn single_uniform_point_has_centre_mean() {
    let s = RngStream::new(4, "one");
    let (mut x, mut y) = (0.0, 0.0);
    let n = 100_000;
    for k in 0..n {
        let p = sample_uniform_n(&unit(), 1, &s.child(k)).unwrap().points()[0];
        x += p[0];
        y += p[1];
    }
    assert!((x / n as f64 - 0.5).abs() < 0.005);
    assert!((y / n as f64 - 0.5).abs() < 0.005);
}

#[test]
fn uniform_x_marginal_passes_ks() {
    let ps = sample_uniform_n(&unit(), 1000, &RngStream::new(5, "ks")).unwrap();
    let mut xs: Vec<f64> = ps.points().iter().map(|p| p[0]).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max);
    // Asymptotic 1% critical value.
    assert!(d < 1.628 / n.sqrt(), "D = {d}");
}

#[test]
fn sampler_is_bit_deterministic() {
    let bx = Rect::new(-3.0, 1.0, 5.0, 2.5).unwrap();
    let s = RngStream::new(77, "mu");
    let a = sample_poisson(&bx, 2.5, &s).unwrap();
    let b = sample_poisson(&bx, 2.5, &s).unwrap();
    assert_eq!(a.points(), b.points());
    let c = sample_poisson(&bx, 2.5, &RngStream::new(77, "nu")).unwrap();
    assert_ne!(a.points(), c.points());
}

#[test]
fn restrict_straddling_points_by_hand() {
    let bx = Rect::square(2.0).unwrap();
    let ps = PointSet::new(vec![[0.5, 0.5], [1.0, 0.5], [1.5, 1.0]], bx).unwrap();
    let left = Rect::new(0.0, 0.0, 1.0, 2.0).unwrap();
    let right = Rect::new(1.0, 0.0, 2.0, 2.0).unwrap();
    // x = 1 belongs to the right half only.
    assert_eq!(ps.restrict(&left).unwrap().points(), &[[0.5, 0.5]]);
    assert_eq!(ps.restrict(&right).unwrap().points(), &[[1.0, 0.5], [1.5, 1.0]]);
}

proptest! {
    #[test]
    fn halves_partition_every_sample(seed in any::<u64>(), side in 1u32..5) {
        let r = side as f64;
        let bx = Rect::square(r).unwrap();
        let ps = sample_poisson(&bx, 3.0, &RngStream::new(seed, "prop")).unwrap();
        let l = ps.restrict(&Rect::new(0.0, 0.0, r / 2.0, r).unwrap()).unwrap();
        let rr = ps.restrict(&Rect::new(r / 2.0, 0.0, r, r).unwrap()).unwrap();
        prop_assert_eq!(l.len() + rr.len(), ps.len());
        prop_assert!(ps.points().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(ps.points().iter().all(|&p| bx.contains(p)));
    }
}
