//! Exact matching and transportation solvers and checks on their output.

mod cost_report;
mod hungarian;
mod laguerre;
mod monotone;
mod semidiscrete;
mod sparse;
mod transport;

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point_process::{Point, PointSet};
use crate::spatial::dist2;

pub use cost_report::{compute_cost_report, CostReport};
pub use monotone::{two_point_swap_gap, verify_cyclic_monotonicity, CycleReport};
pub use semidiscrete::{semidiscrete_w2, semidiscrete_w2_exact, W2Method, W2Result};
pub use transport::{solve_transport, CostMatrix, PlanEntry, TransportPlan, MASS_BALANCE_TOL};

/// Cost exponent: `|x - y|` or `|x - y|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exponent {
    P1,
    P2,
}

impl Exponent {
    pub fn from_int(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Exponent::P1),
            2 => Ok(Exponent::P2),
            _ => Err(Error::invalid(format!("exponent must be 1 or 2, got {p}"))),
        }
    }

    #[inline]
    pub fn cost(self, a: Point, b: Point) -> f64 {
        self.of_dist2(dist2(a, b))
    }

    #[inline]
    fn of_dist2(self, d2: f64) -> f64 {
        match self {
            Exponent::P1 => d2.sqrt(),
            Exponent::P2 => d2,
        }
    }
}

/// A bijection `sigma` from sources to targets with its total cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingPlan {
    pub sigma: Vec<usize>,
    pub cost: f64,
    pub exponent: Exponent,
}

impl MatchingPlan {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Builds a plan from an arbitrary permutation, recomputing the cost.
    pub fn from_permutation(sigma: Vec<usize>, a: &PointSet, b: &PointSet, p: Exponent) -> Result<Self> {
        let plan = MatchingPlan {
            cost: plan_cost(&sigma, a.points(), b.points(), p),
            sigma,
            exponent: p,
        };
        plan.validate(a, b)?;
        Ok(plan)
    }

    /// Checks that `sigma` is a bijection of the right size and that `cost`
    /// agrees with the coordinates.
    pub fn validate(&self, a: &PointSet, b: &PointSet) -> Result<()> {
        let n = self.sigma.len();
        if a.len() != n || b.len() != n {
            return Err(Error::invalid(format!(
                "plan of size {n} for point sets of sizes {} and {}",
                a.len(),
                b.len()
            )));
        }
        let mut seen = vec![false; n];
        for &j in &self.sigma {
            if j >= n || seen[j] {
                return Err(Error::Invariant(format!("sigma is not a permutation (target {j})")));
            }
            seen[j] = true;
        }
        let c = plan_cost(&self.sigma, a.points(), b.points(), self.exponent);
        if (c - self.cost).abs() > 1e-12 * c.abs().max(1.0) {
            return Err(Error::Invariant(format!("plan cost {} disagrees with {c}", self.cost)));
        }
        Ok(())
    }

    /// CSV with header `i,j,cost_ij`.
    pub fn write_csv<W: Write>(&self, a: &PointSet, b: &PointSet, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,cost_ij")?;
        for (i, &j) in self.sigma.iter().enumerate() {
            let c = self.exponent.cost(a.points()[i], b.points()[j]);
            writeln!(w, "{i},{j},{c:.16e}")?;
        }
        Ok(())
    }

    /// Reads a plan written by [`MatchingPlan::write_csv`] and validates it
    /// against the point sets.
    pub fn read_csv<R: BufRead>(
        r: R,
        a: &PointSet,
        b: &PointSet,
        p: Exponent,
        origin: &Path,
    ) -> Result<MatchingPlan> {
        let perr = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            msg,
        };
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| perr("empty file".into()))?
            .map_err(|e| Error::io(origin, e))?;
        if header.trim() != "i,j,cost_ij" {
            return Err(perr(format!("unexpected header {header:?}")));
        }
        let mut sigma = vec![usize::MAX; a.len()];
        for (ln, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(perr(format!("line {}: expected 3 fields", ln + 2)));
            }
            let i: usize = f[0].trim().parse().map_err(|_| perr(format!("line {}: bad i", ln + 2)))?;
            let j: usize = f[1].trim().parse().map_err(|_| perr(format!("line {}: bad j", ln + 2)))?;
            if i >= sigma.len() || sigma[i] != usize::MAX {
                return Err(perr(format!("line {}: row {i} out of range or repeated", ln + 2)));
            }
            sigma[i] = j;
        }
        if sigma.iter().any(|&j| j == usize::MAX) {
            return Err(perr("plan does not cover every source".into()));
        }
        MatchingPlan::from_permutation(sigma, a, b, p)
    }
}

fn plan_cost(sigma: &[usize], a: &[Point], b: &[Point], p: Exponent) -> f64 {
    sigma.iter().enumerate().map(|(i, &j)| p.cost(a[i], b[j])).sum()
}

/// Below this size the dense O(n^3) solver is used.
const DENSE_LIMIT: usize = 800;

/// Globally optimal bijection between equal-size point sets.
pub fn solve_assignment(a: &PointSet, b: &PointSet, p: Exponent) -> Result<MatchingPlan> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::invalid(format!(
            "assignment needs equal sizes, got {n} and {}",
            b.len()
        )));
    }
    let (pa, pb) = (a.points(), b.points());
    let sigma = if n <= DENSE_LIMIT {
        hungarian::solve(n, |i, j| p.cost(pa[i], pb[j])).0
    } else {
        sparse::solve(pa, pb, &|d2| p.of_dist2(d2), 24)?.sigma
    };
    Ok(MatchingPlan {
        cost: plan_cost(&sigma, pa, pb, p),
        sigma,
        exponent: p,
    })
}
