//! `W_2^2` between a point cloud (unit masses) and a constant density on a
//! box.
//!
//! Two routes are provided. [`semidiscrete_w2`] quantizes the density to the
//! centres of an `h`-grid and solves the resulting transportation problem
//! exactly; the quantization moves no mass further than `h / sqrt(2)`.
//! [`semidiscrete_w2_exact`] solves the continuous problem with Laguerre
//! cells and has no discretization error.

use serde::{Deserialize, Serialize};

use super::laguerre;
use super::transport::{solve_transport, CostMatrix};
use crate::error::{Error, Result};
use crate::point_process::{PointSet, Rect};
use crate::spatial::dist2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum W2Method {
    Grid { h: f64 },
    Laguerre,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W2Result {
    pub value: f64,
    #[serde(flatten)]
    pub method: W2Method,
    /// Largest distance any target mass was moved by quantization.
    pub quantization_radius: f64,
    /// Total transported mass (the point count).
    pub mass: f64,
    /// Dual lower bound on the continuous value, when available.
    pub dual_lower: Option<f64>,
    /// Set when the point set is empty and the value is 0 by convention.
    pub empty: bool,
    /// Largest cell mass mismatch of the Laguerre route; 0 for the grid
    /// route, whose marginals are exact.
    #[serde(default)]
    pub mass_error: f64,
}

impl W2Result {
    /// Interval certainly containing the continuous `W_2^2`, using
    /// `|W_2(mu, n) - W_2(mu, n_h)| <= sqrt(mass) * radius`.
    pub fn bracket(&self) -> (f64, f64) {
        let d = self.mass.sqrt() * self.quantization_radius;
        let s = self.value.sqrt();
        let lo = (s - d).max(0.0).powi(2);
        let lo = self.dual_lower.map_or(lo, |x| x.max(lo));
        (lo, (s + d).powi(2))
    }
}

/// Largest grid transportation problem accepted, in cost-matrix entries.
const GRID_ENTRY_LIMIT: usize = 40_000_000;

fn check_inputs(ps: &PointSet, bbox: &Rect, density: f64) -> Result<()> {
    bbox.validate()?;
    if let Some(p) = ps.points().iter().find(|p| !bbox.contains(**p)) {
        return Err(Error::invalid(format!("point {p:?} outside {bbox}")));
    }
    if ps.is_empty() {
        return Ok(());
    }
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::invalid(format!("density must be positive, got {density}")));
    }
    let mass = density * bbox.area();
    let n = ps.len() as f64;
    if (mass - n).abs() > 1e-9 * n {
        return Err(Error::invalid(format!(
            "density {density} on area {} gives mass {mass}, but there are {n} points",
            bbox.area()
        )));
    }
    Ok(())
}

fn empty(method: W2Method, radius: f64) -> W2Result {
    W2Result {
        value: 0.0,
        method,
        quantization_radius: radius,
        mass: 0.0,
        dual_lower: Some(0.0),
        empty: true,
        mass_error: 0.0,
    }
}

/// Grid route: the density is replaced by masses `density * h^2` at the
/// centres of the `h`-cells of `bbox` (whose sides must be multiples of `h`).
pub fn semidiscrete_w2(ps: &PointSet, bbox: &Rect, density: f64, h: f64) -> Result<W2Result> {
    check_inputs(ps, bbox, density)?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid(format!("grid spacing must be positive, got {h}")));
    }
    let cells = |len: f64| -> Result<usize> {
        let k = (len / h).round();
        if k < 1.0 || (k * h - len).abs() > 1e-9 * len {
            return Err(Error::invalid(format!("box side {len} is not a multiple of h = {h}")));
        }
        Ok(k as usize)
    };
    let (nx, ny) = (cells(bbox.width())?, cells(bbox.height())?);
    let method = W2Method::Grid { h };
    let radius = h / 2f64.sqrt();
    if ps.is_empty() {
        return Ok(empty(method, radius));
    }
    let n = ps.len();
    if n.saturating_mul(nx * ny) > GRID_ENTRY_LIMIT {
        return Err(Error::invalid(format!(
            "grid problem with {n} x {} entries is too large; use the Laguerre route",
            nx * ny
        )));
    }
    let centres: Vec<[f64; 2]> = (0..ny)
        .flat_map(|r| {
            (0..nx).map(move |c| {
                [bbox.x0 + (c as f64 + 0.5) * h, bbox.y0 + (r as f64 + 0.5) * h]
            })
        })
        .collect();
    let cost = CostMatrix::from_fn(n, centres.len(), |i, k| dist2(ps.points()[i], centres[k]))?;
    let src = vec![1.0; n];
    let cell_mass = n as f64 / (nx * ny) as f64;
    let tgt = vec![cell_mass; nx * ny];
    let plan = solve_transport(&src, &tgt, &cost)?;
    Ok(W2Result {
        value: plan.cost,
        method,
        quantization_radius: radius,
        mass: n as f64,
        dual_lower: None,
        empty: false,
        mass_error: 0.0,
    })
}

/// Mass tolerance of the Laguerre route, per cell.
pub const LAGUERRE_MASS_TOL: f64 = 1e-9;

/// Continuous route through Laguerre cells.
pub fn semidiscrete_w2_exact(ps: &PointSet, bbox: &Rect, density: f64) -> Result<W2Result> {
    check_inputs(ps, bbox, density)?;
    if ps.is_empty() {
        return Ok(empty(W2Method::Laguerre, 0.0));
    }
    let rho = ps.len() as f64 / bbox.area();
    let sol = laguerre::solve(ps.points(), bbox, rho, LAGUERRE_MASS_TOL)?;
    Ok(W2Result {
        value: sol.primal,
        method: W2Method::Laguerre,
        quantization_radius: 0.0,
        mass: ps.len() as f64,
        dual_lower: Some(sol.dual),
        empty: false,
        mass_error: sol.max_mass_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_process::{sample_poisson, RngStream};

    #[test]
    fn centred_point_in_unit_box() {
        let b = Rect::square(1.0).unwrap();
        let ps = PointSet::new(vec![[0.5, 0.5]], b).unwrap();
        let g = semidiscrete_w2(&ps, &b, 1.0, 1.0 / 64.0).unwrap();
        assert!((g.value - 1.0 / 6.0).abs() < 0.003);
        let e = semidiscrete_w2_exact(&ps, &b, 1.0).unwrap();
        assert!((e.value - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn quadrant_centres() {
        let b = Rect::square(2.0).unwrap();
        let ps = PointSet::new(vec![[0.5, 0.5], [1.5, 0.5], [0.5, 1.5], [1.5, 1.5]], b).unwrap();
        let g = semidiscrete_w2(&ps, &b, 1.0, 1.0 / 16.0).unwrap();
        // Midpoint rule on a centred cell: 1/6 - h^2/6 per unit of mass.
        assert!((g.value - 4.0 * (1.0 / 6.0 - 1.0 / 6.0 / 256.0)).abs() < 1e-9, "{}", g.value);
        let e = semidiscrete_w2_exact(&ps, &b, 1.0).unwrap();
        assert!((e.value - 2.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn empty_and_bad_inputs() {
        let b = Rect::square(2.0).unwrap();
        let ps = PointSet::empty(b).unwrap();
        assert!(semidiscrete_w2(&ps, &b, 0.0, 0.25).unwrap().empty);
        let one = PointSet::new(vec![[1.0, 1.0]], b).unwrap();
        assert!(semidiscrete_w2(&one, &b, 1.0, 0.25).is_err());
        assert!(semidiscrete_w2(&one, &b, 0.25, 0.3).is_err());
    }

    #[test]
    fn routes_agree_within_quantization() {
        let b = Rect::square(8.0).unwrap();
        for seed in 0..3 {
            let ps = sample_poisson(&b, 1.0, &RngStream::new(seed, "mu")).unwrap();
            let rho = ps.len() as f64 / 64.0;
            let g = semidiscrete_w2(&ps, &b, rho, 0.25).unwrap();
            let e = semidiscrete_w2_exact(&ps, &b, rho).unwrap();
            let (lo, hi) = g.bracket();
            assert!(lo <= e.value && e.value <= hi, "{lo} {} {hi}", e.value);
            assert!(e.dual_lower.unwrap() <= e.value + 1e-9);
            assert!((e.dual_lower.unwrap() - e.value).abs() < 1e-6 * e.value);
        }
    }
}
