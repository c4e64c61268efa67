//! Hierarchical Neumann flux and the certified upper bound on `W_2^2`.
//!
//! For every cube `Q` strictly coarser than the stopped partition,
//! `phi_Q` solves `-Lap phi_Q = n_Q - n_Q'` on each child `Q'` with no-flux
//! data on `dQ`. The flux `j = -sum grad phi_Q` then satisfies
//! `div j = n - lambda` with `lambda = n_Q*` on each partition cube, and
//! zero normal component on the boundary of `(0, R)^2`.
//!
//! When both densities are at least 1/2,
//! `W_2^2(lambda, n) <= 2 int |j|^2`, and moving each point inside its
//! partition cube costs at most `2 r^2` per point. The two are combined by
//! the triangle inequality.

mod cell;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{partition_from_tree, CountTree, DyadicCube, StoppedPartition, DENSITY_LO};
use crate::error::{Error, Result};
use crate::export::write_grid;
use crate::point_process::{sample_poisson, Point, PointSet, Rect, RngStream};
use crate::stats::MeanEstimate;

pub use cell::{solve_cell, solve_cell_cached, CellProblem, CellSolution, CELL_TOL};
use cell::{cells_per_side, divergence, rt0_energy, rt0_value, QuadrantBasis};

pub const DEFAULT_FLUX_H: f64 = 0.25;

fn check_h(h: f64) -> Result<()> {
    let inv = 1.0 / h;
    if !(h > 0.0 && h <= 0.5) || inv.fract() != 0.0 || !(inv as u64).is_power_of_two() {
        return Err(Error::invalid(format!("grid spacing must be 1/2^k with k >= 1, got {h}")));
    }
    Ok(())
}

/// Staggered samples of `j` on the `h`-grid of `(0, R)^2` (see
/// [`CellSolution`] for the face layout).
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    pub root: u32,
    pub h: f64,
    /// Cells per side.
    pub m: usize,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    /// Cubes whose `grad phi_Q` enters the sum, parents first.
    pub cubes: Vec<DyadicCube>,
    /// `n - lambda` per cell, row-major.
    pub source: Vec<f64>,
    /// Largest relative residual among the cell solves.
    pub cell_residual: f64,
}

/// `j` for a point set on a dyadic square and its stopped partition.
pub fn assemble_flux(ps: &PointSet, partition: &StoppedPartition, h: f64) -> Result<FluxField> {
    check_h(h)?;
    if partition.overflow {
        return Err(Error::invalid(
            "partition overflows the density window; only the brutal bound applies",
        ));
    }
    let tree = CountTree::build(ps)?;
    if tree.root() != partition.root {
        return Err(Error::invalid(format!(
            "partition of a {0}x{0} box does not match a {1}x{1} point set",
            partition.root,
            tree.root()
        )));
    }
    let r = partition.root;
    let m = (r as f64 / h) as usize;
    let root = DyadicCube::root(r)?;
    let n = tree.density(&root);
    let mut source = vec![0.0; m * m];
    for q in &partition.cubes {
        let (ox, oy, k) = offsets(q, h);
        let lam = tree.density(q);
        for b in oy..oy + k {
            source[b * m + ox..b * m + ox + k].fill(n - lam);
        }
    }

    let mut sizes: Vec<usize> = partition
        .interior
        .iter()
        .map(|q| cells_per_side(q.side, h))
        .collect::<Result<_>>()?;
    sizes.sort_unstable();
    sizes.dedup();
    let bases: Vec<_> = sizes.par_iter().map(|&k| QuadrantBasis::get(k)).collect::<Result<_>>()?;

    let mut fx = vec![0.0; m * (m + 1)];
    let mut fy = vec![0.0; (m + 1) * m];
    for q in &partition.interior {
        let cp = CellProblem::from_tree(&tree, *q, h)?;
        let (ox, oy, k) = offsets(q, h);
        let basis = &bases[sizes.binary_search(&k).expect("basis for every size")];
        let c = cp.rhs();
        // Faces on dQ carry zero flux, so adding them is harmless.
        for b in 0..k {
            for a in 0..=k {
                let g: f64 = (0..4).map(|t| c[t] * basis.fx(t, a, b)).sum();
                fx[(oy + b) * (m + 1) + ox + a] -= g * h;
            }
        }
        for b in 0..=k {
            for a in 0..k {
                let g: f64 = (0..4).map(|t| c[t] * basis.fy(t, a, b)).sum();
                fy[(oy + b) * m + ox + a] -= g * h;
            }
        }
    }
    Ok(FluxField {
        root: r,
        h,
        m,
        fx,
        fy,
        cubes: partition.interior.clone(),
        source,
        cell_residual: bases.iter().map(|b| b.residual).fold(0.0, f64::max),
    })
}

fn offsets(q: &DyadicCube, h: f64) -> (usize, usize, usize) {
    let c = q.corner();
    let k = (q.side as f64 / h) as usize;
    ((c[0] / h) as usize, (c[1] / h) as usize, k)
}

impl FluxField {
    /// Discrete divergence per cell.
    pub fn divergence(&self) -> Vec<f64> {
        divergence(self.m, self.h, &self.fx, &self.fy)
    }

    /// `|div j - (n - lambda)|_2 / |n - lambda|_2`, or the absolute norm
    /// when the source vanishes.
    pub fn divergence_residual(&self) -> f64 {
        let div = self.divergence();
        let err = div.iter().zip(&self.source).map(|(d, s)| (d - s).powi(2)).sum::<f64>().sqrt();
        let norm = self.source.iter().map(|s| s * s).sum::<f64>().sqrt();
        if norm > 0.0 {
            err / norm
        } else {
            err * self.h
        }
    }

    /// Node samples `(m + 1)^2`, row-major in `y`: each component is the
    /// mean of the adjacent faces through the node.
    pub fn node_samples(&self) -> Vec<[f64; 2]> {
        let m = self.m;
        let mut out = Vec::with_capacity((m + 1) * (m + 1));
        for b in 0..=m {
            for a in 0..=m {
                let rows = [b.checked_sub(1), (b < m).then_some(b)];
                let cols = [a.checked_sub(1), (a < m).then_some(a)];
                let avg = |vals: Vec<f64>| vals.iter().sum::<f64>() / vals.len() as f64;
                let jx = avg(rows.iter().flatten().map(|&r| self.fx[r * (m + 1) + a]).collect());
                let jy = avg(cols.iter().flatten().map(|&c| self.fy[b * m + c]).collect());
                out.push([jx, jy]);
            }
        }
        out
    }

    /// Largest normal component among boundary node samples.
    pub fn boundary_normal_max(&self) -> f64 {
        let m = self.m;
        let nodes = self.node_samples();
        let mut s = 0.0f64;
        for k in 0..=m {
            s = s.max(nodes[k * (m + 1)][0].abs()).max(nodes[k * (m + 1) + m][0].abs());
            s = s.max(nodes[k][1].abs()).max(nodes[m * (m + 1) + k][1].abs());
        }
        s
    }

    /// The Raviart-Thomas interpolant of the face values at a root-local
    /// point. Its divergence is the cell divergence and its normal
    /// component is continuous, so it is a distributional solution.
    pub fn value_at(&self, x: Point) -> [f64; 2] {
        rt0_value(self.m, self.h, &self.fx, &self.fy, x)
    }

    /// Exact `int |j|^2` of the interpolant.
    pub fn certified_energy(&self) -> f64 {
        rt0_energy(self.m, self.h, &self.fx, &self.fy)
    }

    /// Binary dump: two `f64` per node (`jx`, `jy`) with a JSON header.
    pub fn write_grid(&self, path: &Path) -> Result<()> {
        let data: Vec<f64> = self.node_samples().into_iter().flatten().collect();
        let header = serde_json::json!({
            "R": self.root,
            "h": self.h,
            "dims": [self.m + 1, self.m + 1],
            "channels": ["jx", "jy"],
            "layout": "row-major, y outer, grid nodes",
            "contributing_cubes": self.cubes.len(),
        });
        write_grid(path, &header, &data)
    }
}

/// Trapezoidal `int |v|^2` from node samples of a square grid with `n`
/// nodes per side and spacing `h`.
pub fn trapezoid_energy(nodes: &[[f64; 2]], n: usize, h: f64) -> f64 {
    assert_eq!(nodes.len(), n * n, "expected {n}x{n} node samples");
    let w = |k: usize| if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
    let mut s = 0.0;
    for b in 0..n {
        for a in 0..n {
            let v = nodes[b * n + a];
            s += w(a) * w(b) * (v[0] * v[0] + v[1] * v[1]);
        }
    }
    s * h * h
}

/// Trapezoidal `int |j|^2` over the node samples.
pub fn flux_energy(f: &FluxField) -> f64 {
    trapezoid_energy(&f.node_samples(), f.m + 1, f.h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    #[serde(rename = "R")]
    pub r: u32,
    pub n_points: usize,
    pub density: f64,
    pub h: f64,
    /// `sum 2 r_Q*^2 mu(Q*)`: bound on `W_2^2(mu, lambda)`.
    pub coarse: f64,
    /// `int |j|^2` of the certified flux.
    pub flux_energy: f64,
    /// `2 int |j|^2`: bound on `W_2^2(lambda, n)`.
    pub flux_term: f64,
    pub brutal: bool,
    pub brutal_reason: Option<String>,
    /// `(sqrt(coarse) + sqrt(flux_term))^2`, or `mu((0,R)^2) 2 R^2` when
    /// brutal.
    pub total: f64,
    pub partition_cubes: usize,
    pub divergence_residual: Option<f64>,
    pub boundary_normal_max: Option<f64>,
}

/// Certified upper bound on `W_2^2((0,R)^2; mu, n)` for the points of `ps`
/// in `[0, R)^2`.
pub fn upper_bound(ps: &PointSet, r: u32, h: f64) -> Result<UpperBoundReport> {
    Ok(upper_bound_with_flux(ps, r, h)?.0)
}

/// [`upper_bound`] together with the assembled flux, if any.
pub fn upper_bound_with_flux(ps: &PointSet, r: u32, h: f64) -> Result<(UpperBoundReport, Option<FluxField>)> {
    if r == 0 || !r.is_power_of_two() {
        return Err(Error::invalid(format!("R must be a power of 2, got {r}")));
    }
    check_h(h)?;
    let square = Rect::square(r as f64)?;
    if !ps.bbox().contains_rect(&square) {
        return Err(Error::invalid(format!("box {} does not cover {square}", ps.bbox())));
    }
    let inside = ps.restrict(&square)?;
    let tree = CountTree::build(&inside)?;
    let partition = partition_from_tree(&tree);
    let count = inside.len();
    let density = count as f64 / (r as f64 * r as f64);
    let mut report = UpperBoundReport {
        r,
        n_points: count,
        density,
        h,
        coarse: 0.0,
        flux_energy: 0.0,
        flux_term: 0.0,
        brutal: false,
        brutal_reason: None,
        total: 0.0,
        partition_cubes: partition.cubes.len(),
        divergence_residual: None,
        boundary_normal_max: None,
    };
    let min_lambda = partition.cubes.iter().map(|q| tree.density(q)).fold(f64::INFINITY, f64::min);
    let reason = if partition.overflow {
        Some("root density outside [1/2, 2]".to_string())
    } else if density < DENSITY_LO || min_lambda < DENSITY_LO {
        Some(format!("density floor violated (n = {density}, min lambda = {min_lambda})"))
    } else if r < 2 {
        Some("unit box".to_string())
    } else {
        None
    };
    if let Some(why) = reason {
        report.brutal = true;
        report.brutal_reason = Some(why);
        report.total = count as f64 * 2.0 * (r as f64).powi(2);
        return Ok((report, None));
    }
    report.coarse = partition
        .cubes
        .iter()
        .map(|q| 2.0 * (q.side as f64).powi(2) * tree.count(q) as f64)
        .sum();
    let flux = assemble_flux(&inside, &partition, h)?;
    report.flux_energy = flux.certified_energy();
    report.flux_term = 2.0 * report.flux_energy;
    report.total = (report.coarse.sqrt() + report.flux_term.sqrt()).powi(2);
    report.divergence_residual = Some(flux.divergence_residual());
    report.boundary_normal_max = Some(flux.boundary_normal_max());
    Ok((report, Some(flux)))
}

/// Monte Carlo estimate of `E int_Q |grad phi_Q|^2` for a cube of the given
/// side under a Poisson process of the given intensity.
pub fn cell_energy_moment(
    side: u32,
    intensity: f64,
    replicates: usize,
    h: f64,
    stream: &RngStream,
) -> Result<MeanEstimate> {
    if replicates == 0 {
        return Err(Error::invalid("replicates must be >= 1"));
    }
    let q = DyadicCube::root(side)?;
    let bbox = Rect::square(side as f64)?;
    let basis = QuadrantBasis::get(cells_per_side(side, h)?)?;
    let values: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|k| {
            let ps = sample_poisson(&bbox, intensity, &stream.child(k))?;
            let tree = CountTree::build(&ps)?;
            let cp = CellProblem::from_tree(&tree, q, h)?;
            Ok(basis.combine(&cp).energy())
        })
        .collect::<Result<_>>()?;
    Ok(MeanEstimate::from_samples(&values))
}
