//! Cyclic monotonicity and two-point local optimality checks.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MatchingPlan;
use crate::error::{Error, Result};
use crate::point_process::{PointSet, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycles: usize,
    pub min_sum: f64,
    /// Cycles (as source indices) whose sum is below `-tolerance`.
    pub violations: Vec<Vec<usize>>,
    pub tolerance: f64,
}

impl CycleReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Length scale of a pair of point sets: the larger side of their boxes.
fn scale(a: &PointSet, b: &PointSet) -> f64 {
    let s = |p: &PointSet| p.bbox().width().max(p.bbox().height());
    s(a).max(s(b))
}

/// `sum_n T(X_n) . (X_n - X_{n-1})` with `X_0 = X_N`.
pub fn cycle_sum(plan: &MatchingPlan, a: &PointSet, b: &PointSet, cycle: &[usize]) -> f64 {
    let (pa, pb) = (a.points(), b.points());
    let k = cycle.len();
    let mut s = 0.0;
    for t in 0..k {
        let x = pa[cycle[t]];
        let prev = pa[cycle[(t + k - 1) % k]];
        let tx = pb[plan.sigma[cycle[t]]];
        s += tx[0] * (x[0] - prev[0]) + tx[1] * (x[1] - prev[1]);
    }
    s
}

/// Samples `cycles` random index cycles with lengths uniform in
/// `2..=max_len` and evaluates the cycle sum on each.
pub fn verify_cyclic_monotonicity(
    plan: &MatchingPlan,
    a: &PointSet,
    b: &PointSet,
    cycles: usize,
    max_len: usize,
    stream: &RngStream,
) -> Result<CycleReport> {
    plan.validate(a, b)?;
    if max_len < 2 {
        return Err(Error::invalid("cycle length must be at least 2"));
    }
    let n = plan.len();
    let tolerance = 1e-9 * scale(a, b).powi(2);
    let mut report = CycleReport {
        cycles: 0,
        min_sum: f64::INFINITY,
        violations: Vec::new(),
        tolerance,
    };
    if n < 2 {
        return Ok(report);
    }
    let mut rng = stream.rng();
    let max_len = max_len.min(n);
    for _ in 0..cycles {
        let len = rng.random_range(2..=max_len);
        let cyc = index::sample(&mut rng, n, len).into_vec();
        let s = cycle_sum(plan, a, b, &cyc);
        report.cycles += 1;
        report.min_sum = report.min_sum.min(s);
        if s < -tolerance {
            report.violations.push(cyc);
        }
    }
    Ok(report)
}

/// Minimum over pairs `i < j` of the cost change caused by exchanging their
/// targets; `+inf` for fewer than two points.
pub fn two_point_swap_gap(plan: &MatchingPlan, a: &PointSet, b: &PointSet) -> Result<f64> {
    plan.validate(a, b)?;
    let (pa, pb) = (a.points(), b.points());
    let p = plan.exponent;
    let own: Vec<f64> = (0..plan.len()).map(|i| p.cost(pa[i], pb[plan.sigma[i]])).collect();
    let mut gap = f64::INFINITY;
    for i in 0..plan.len() {
        for j in i + 1..plan.len() {
            let swapped = p.cost(pa[i], pb[plan.sigma[j]]) + p.cost(pa[j], pb[plan.sigma[i]]);
            gap = gap.min(swapped - own[i] - own[j]);
        }
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{solve_assignment, Exponent};
    use crate::point_process::{sample_uniform_n, Rect};

    #[test]
    fn identity_on_identical_sets_gives_half_squared_steps() {
        let bx = Rect::square(5.0).unwrap();
        let a = sample_uniform_n(&bx, 20, &RngStream::new(1, "a")).unwrap();
        let plan = MatchingPlan::from_permutation((0..20).collect(), &a, &a, Exponent::P2).unwrap();
        let pa = a.points();
        let cyc = [3, 17, 8, 0];
        let half: f64 = (0..4)
            .map(|t| {
                let (x, y) = (pa[cyc[t]], pa[cyc[(t + 3) % 4]]);
                0.5 * ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2))
            })
            .sum();
        assert!((cycle_sum(&plan, &a, &a, &cyc) - half).abs() < 1e-12);
    }

    #[test]
    fn crossed_pair_on_a_line() {
        let bx = Rect::square(4.0).unwrap();
        let a = PointSet::new(vec![[0.0, 1.0], [1.0, 1.0]], bx).unwrap();
        let b = PointSet::new(vec![[2.0, 1.0], [3.0, 1.0]], bx).unwrap();
        let crossed = MatchingPlan::from_permutation(vec![1, 0], &a, &b, Exponent::P2).unwrap();
        assert!(cycle_sum(&crossed, &a, &b, &[0, 1]) < 0.0);
        let r = verify_cyclic_monotonicity(&crossed, &a, &b, 50, 2, &RngStream::new(0, "c")).unwrap();
        assert!(!r.ok());
        // Swapping back saves (3^2 + 1^2) - (2^2 + 2^2) = 2.
        let gap = two_point_swap_gap(&crossed, &a, &b).unwrap();
        assert!((gap + 2.0).abs() < 1e-12);
        let opt = solve_assignment(&a, &b, Exponent::P2).unwrap();
        assert!(two_point_swap_gap(&opt, &a, &b).unwrap() >= 0.0);
    }
}
