//! Local energy `E(R)` of a matching and the data term `D(R)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::semidiscrete::semidiscrete_w2_exact;
use super::MatchingPlan;
use crate::error::{Error, Result};
use crate::point_process::{Point, PointSet, Rect};

/// `E(R)` and the four components of `D(R)`. All components are already
/// divided by `R^2` where applicable, so `D_R` is their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "E_R")]
    pub e_r: f64,
    #[serde(rename = "D_R")]
    pub d_r: f64,
    pub w2_mu: f64,
    pub dens_mu: f64,
    pub w2_nu: f64,
    pub dens_nu: f64,
    /// Ball densities `#(points in B_R) / |B_R|`.
    pub n_mu: f64,
    pub n_nu: f64,
    /// Set when a ball is empty; the density term is then `+inf`.
    pub empty_window: bool,
}

fn in_ball(p: Point, r: f64) -> bool {
    p[0] * p[0] + p[1] * p[1] < r * r
}

fn density_term(r: f64, n: f64) -> f64 {
    if n > 0.0 {
        r * r / n * (n - 1.0).powi(2)
    } else {
        f64::INFINITY
    }
}

/// `W^2_{(-R,R)^2}(ps, n) / R^2` with `n` the density that balances the
/// mass of `ps` on the box.
fn w2_term(ps: &PointSet, r: f64) -> Result<f64> {
    let bx = Rect::centered(r)?;
    let inside = ps.restrict(&bx)?;
    let rho = inside.len() as f64 / bx.area();
    Ok(semidiscrete_w2_exact(&inside, &bx, rho)?.value / (r * r))
}

/// Computes the report for the matching `plan` from `mu` to `nu` with the
/// ball `B_R` and box `(-R, R)^2` centred at the origin.
pub fn compute_cost_report(mu: &PointSet, nu: &PointSet, plan: &MatchingPlan, r: f64) -> Result<CostReport> {
    plan.validate(mu, nu)?;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid(format!("window radius must be positive, got {r}")));
    }
    let (pa, pb) = (mu.points(), nu.points());
    let mut energy = 0.0;
    for (i, &j) in plan.sigma.iter().enumerate() {
        let (x, t) = (pa[i], pb[j]);
        if in_ball(x, r) || in_ball(t, r) {
            energy += (t[0] - x[0]).powi(2) + (t[1] - x[1]).powi(2);
        }
    }
    let ball = PI * r * r;
    let n_mu = pa.iter().filter(|p| in_ball(**p, r)).count() as f64 / ball;
    let n_nu = pb.iter().filter(|p| in_ball(**p, r)).count() as f64 / ball;
    let (w2_mu, w2_nu) = (w2_term(mu, r)?, w2_term(nu, r)?);
    let (dens_mu, dens_nu) = (density_term(r, n_mu), density_term(r, n_nu));
    Ok(CostReport {
        r,
        e_r: energy / (r * r),
        d_r: w2_mu + dens_mu + w2_nu + dens_nu,
        w2_mu,
        dens_mu,
        w2_nu,
        dens_nu,
        n_mu,
        n_nu,
        empty_window: n_mu == 0.0 || n_nu == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::Exponent;
    use crate::point_process::{sample_poisson, RngStream};

    #[test]
    fn identity_and_translation() {
        let bx = Rect::centered(6.0).unwrap();
        let mu = sample_poisson(&bx, 1.0, &RngStream::new(5, "mu")).unwrap();
        let id = MatchingPlan::from_permutation((0..mu.len()).collect(), &mu, &mu, Exponent::P2).unwrap();
        let rep = compute_cost_report(&mu, &mu, &id, 4.0).unwrap();
        assert_eq!(rep.e_r, 0.0);
        assert_eq!(rep.w2_mu, rep.w2_nu);
        assert_eq!(rep.dens_mu, rep.dens_nu);
        let sum = rep.w2_mu + rep.dens_mu + rep.w2_nu + rep.dens_nu;
        assert_eq!(rep.d_r, sum);

        // Shift by delta; pairs counted when either end is in the ball.
        let delta = 0.1;
        let big = Rect::centered(7.0).unwrap();
        let mu = mu.restrict(&Rect::centered(5.0).unwrap()).unwrap();
        let mu = PointSet::new(mu.points().to_vec(), big).unwrap();
        let nu = PointSet::new(mu.points().iter().map(|p| [p[0] + delta, p[1]]).collect(), big).unwrap();
        let plan = MatchingPlan::from_permutation((0..mu.len()).collect(), &mu, &nu, Exponent::P2).unwrap();
        let r = 4.0;
        let k = mu
            .points()
            .iter()
            .filter(|p| in_ball(**p, r) || in_ball([p[0] + delta, p[1]], r))
            .count();
        let rep = compute_cost_report(&mu, &nu, &plan, r).unwrap();
        assert!((rep.e_r - k as f64 * delta * delta / (r * r)).abs() < 1e-12);
    }

    #[test]
    fn empty_window_is_flagged() {
        let bx = Rect::centered(3.0).unwrap();
        let mu = PointSet::new(vec![[2.9, 2.9]], bx).unwrap();
        let nu = PointSet::new(vec![[-2.9, 2.9]], bx).unwrap();
        let plan = MatchingPlan::from_permutation(vec![0], &mu, &nu, Exponent::P2).unwrap();
        let rep = compute_cost_report(&mu, &nu, &plan, 1.0).unwrap();
        assert!(rep.empty_window);
        assert!(rep.dens_mu.is_infinite() && rep.d_r.is_infinite());
        assert_eq!(rep.w2_mu, 0.0);
    }
}
