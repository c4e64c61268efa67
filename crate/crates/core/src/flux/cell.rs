//! Neumann cell problems `-Lap phi = n_Q - n_Q'` on one dyadic cube.
//!
//! Cell-centred 5-point differences on an `m x m` grid; the ghost-point
//! closure makes every boundary face flux zero, so the discrete divergence
//! theorem holds exactly. Gradients live on faces: `fx[b * (m + 1) + a]` is
//! `d phi / dx` on the vertical face `x = a h` of row `b`, and
//! `fy[b * m + a]` is `d phi / dy` on the horizontal face `y = b h` of
//! column `a`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{CountTree, DyadicCube};
use crate::error::{Error, Result};
use crate::krylov::cg_singular;
use crate::point_process::Point;

/// Relative residual required of every cell solve.
pub const CELL_TOL: f64 = 1e-10;
const MEAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellProblem {
    pub cube: DyadicCube,
    /// Lower-left, lower-right, upper-left, upper-right.
    pub child_density: [f64; 4],
    pub parent_density: f64,
    pub h: f64,
}

impl CellProblem {
    pub fn from_tree(tree: &CountTree, cube: DyadicCube, h: f64) -> Result<CellProblem> {
        let kids = cube
            .children()
            .ok_or_else(|| Error::invalid("a unit cube has no children"))?;
        Ok(CellProblem {
            cube,
            child_density: kids.map(|c| tree.density(&c)),
            parent_density: tree.density(&cube),
            h,
        })
    }

    /// Right-hand side on each child.
    pub fn rhs(&self) -> [f64; 4] {
        self.child_density.map(|n| self.parent_density - n)
    }

    fn cells(&self) -> Result<usize> {
        cells_per_side(self.cube.side, self.h)
    }
}

/// `side / h`, required to be an even integer so children are grid aligned.
pub(crate) fn cells_per_side(side: u32, h: f64) -> Result<usize> {
    let k = side as f64 / h;
    if !(h > 0.0) || k.fract() != 0.0 || k < 2.0 || (k as usize) % 2 != 0 {
        return Err(Error::invalid(format!(
            "grid spacing {h} does not split a cube of side {side} into an even number of cells"
        )));
    }
    Ok(k as usize)
}

/// Solution of one cell problem, as face gradients of `phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    pub m: usize,
    pub h: f64,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    /// Relative residual of the linear solve.
    pub residual: f64,
}

fn neumann_apply(m: usize, x: &[f64], y: &mut [f64]) {
    for b in 0..m {
        for a in 0..m {
            let k = b * m + a;
            let c = x[k];
            let mut s = 0.0;
            if a > 0 {
                s += c - x[k - 1];
            }
            if a + 1 < m {
                s += c - x[k + 1];
            }
            if b > 0 {
                s += c - x[k - m];
            }
            if b + 1 < m {
                s += c - x[k + m];
            }
            y[k] = s;
        }
    }
}

/// Starting guess from the cosine eigenbasis of the 1D Neumann Laplacian,
/// `v_p(a) = cos(pi p (a + 1/2) / m)` with eigenvalue `2 - 2 cos(pi p / m)`.
fn cosine_solve(m: usize, f: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = (0..m * m)
        .map(|k| {
            let (p, a) = (k / m, k % m);
            (std::f64::consts::PI * p as f64 * (a as f64 + 0.5) / m as f64).cos()
        })
        .collect();
    let norm = |p: usize| if p == 0 { m as f64 } else { 0.5 * m as f64 };
    let lam: Vec<f64> = (0..m)
        .map(|p| 2.0 - 2.0 * (std::f64::consts::PI * p as f64 / m as f64).cos())
        .collect();
    // out[r][c] = sum_k x[r][k] * v[c][k], i.e. transform along rows.
    let along_rows = |x: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; m * m];
        out.par_chunks_mut(m).enumerate().for_each(|(r, row)| {
            let xr = &x[r * m..(r + 1) * m];
            for (c, o) in row.iter_mut().enumerate() {
                *o = xr.iter().zip(&v[c * m..(c + 1) * m]).map(|(a, b)| a * b).sum();
            }
        });
        out
    };
    let transpose = |x: &[f64]| -> Vec<f64> { (0..m * m).map(|k| x[(k % m) * m + k / m]).collect() };
    // Coefficients g[q][p] for mode (p along x, q along y).
    let mut g = transpose(&along_rows(&transpose(&along_rows(f))));
    for q in 0..m {
        for p in 0..m {
            let d = lam[p] + lam[q];
            g[q * m + p] = if d > 0.0 { g[q * m + p] / (d * norm(p) * norm(q)) } else { 0.0 };
        }
    }
    // Synthesis: phi[b][a] = sum_{p,q} g[q][p] v_p(a) v_q(b).
    let synth = |x: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; m * m];
        out.par_chunks_mut(m).enumerate().for_each(|(r, row)| {
            let xr = &x[r * m..(r + 1) * m];
            for (a, o) in row.iter_mut().enumerate() {
                *o = (0..m).map(|p| xr[p] * v[p * m + a]).sum();
            }
        });
        out
    };
    transpose(&synth(&transpose(&synth(&g))))
}

/// Solves `-Lap phi = f` on an `m x m` grid of unit spacing and returns the
/// face differences of `phi`.
fn solve_unit_grid(m: usize, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let diag: Vec<f64> = (0..m * m)
        .map(|k| {
            let (a, b) = (k % m, k / m);
            [a > 0, a + 1 < m, b > 0, b + 1 < m].iter().filter(|&&e| e).count() as f64
        })
        .collect();
    let mut phi = cosine_solve(m, f);
    let out = cg_singular(|x, y| neumann_apply(m, x, y), &diag, f, &mut phi, 0.1 * CELL_TOL, 40 * m + 2000);
    if out.residual > CELL_TOL {
        return Err(Error::Solver(format!(
            "cell solve on {m}x{m} grid stalled at relative residual {:.3e}",
            out.residual
        )));
    }
    let mut fx = vec![0.0; m * (m + 1)];
    let mut fy = vec![0.0; (m + 1) * m];
    for b in 0..m {
        for a in 1..m {
            fx[b * (m + 1) + a] = phi[b * m + a] - phi[b * m + a - 1];
        }
    }
    for b in 1..m {
        for a in 0..m {
            fy[b * m + a] = phi[b * m + a] - phi[(b - 1) * m + a];
        }
    }
    Ok((fx, fy, out.residual))
}

/// Direct solve of a cell problem.
pub fn solve_cell(cp: &CellProblem) -> Result<CellSolution> {
    let m = cp.cells()?;
    let rhs = cp.rhs();
    let scale = rhs.iter().fold(1.0f64, |s, r| s.max(r.abs()));
    let mean = rhs.iter().sum::<f64>() / 4.0;
    if mean.abs() > MEAN_TOL * scale {
        return Err(Error::invalid(format!(
            "cell right-hand side has mean {mean:e}; parent density must be the mean of the children"
        )));
    }
    let half = m / 2;
    let h2 = cp.h * cp.h;
    // Scaled by h^2 so the operator has unit spacing; the numerical mean is
    // removed by the solver.
    let f: Vec<f64> = (0..m * m)
        .map(|k| {
            let (a, b) = (k % m, k / m);
            h2 * rhs[usize::from(a >= half) + 2 * usize::from(b >= half)]
        })
        .collect();
    if f.iter().all(|&v| v == 0.0) {
        return Ok(CellSolution {
            m,
            h: cp.h,
            fx: vec![0.0; m * (m + 1)],
            fy: vec![0.0; (m + 1) * m],
            residual: 0.0,
        });
    }
    let (mut fx, mut fy, residual) = solve_unit_grid(m, &f)?;
    for v in fx.iter_mut().chain(fy.iter_mut()) {
        *v /= cp.h;
    }
    Ok(CellSolution {
        m,
        h: cp.h,
        fx,
        fy,
        residual,
    })
}

impl CellSolution {
    /// Gradient at cell centres by centred differences (average of the two
    /// faces), row-major.
    pub fn centred_gradients(&self) -> Vec<[f64; 2]> {
        let m = self.m;
        (0..m * m)
            .map(|k| {
                let (a, b) = (k % m, k / m);
                [
                    0.5 * (self.fx[b * (m + 1) + a] + self.fx[b * (m + 1) + a + 1]),
                    0.5 * (self.fy[b * m + a] + self.fy[(b + 1) * m + a]),
                ]
            })
            .collect()
    }

    /// The lowest-order Raviart-Thomas field interpolating the face values,
    /// at a point `x` in cube-local coordinates.
    pub fn gradient_at(&self, x: Point) -> [f64; 2] {
        rt0_value(self.m, self.h, &self.fx, &self.fy, x)
    }

    /// `int |grad phi|^2` of the interpolating field.
    pub fn energy(&self) -> f64 {
        rt0_energy(self.m, self.h, &self.fx, &self.fy)
    }

    /// Discrete `-Lap phi` per cell from the face gradients.
    pub fn laplacian_rhs(&self) -> Vec<f64> {
        divergence(self.m, self.h, &self.fx, &self.fy)
            .into_iter()
            .map(|d| -d)
            .collect()
    }

    /// Net outward flux of `grad phi` through the cube boundary, as the
    /// integral of the cell divergences.
    pub fn boundary_flux(&self) -> f64 {
        divergence(self.m, self.h, &self.fx, &self.fy).iter().sum::<f64>() * self.h * self.h
    }
}

/// Cell divergence of a staggered field.
pub(crate) fn divergence(m: usize, h: f64, fx: &[f64], fy: &[f64]) -> Vec<f64> {
    (0..m * m)
        .map(|k| {
            let (a, b) = (k % m, k / m);
            (fx[b * (m + 1) + a + 1] - fx[b * (m + 1) + a] + fy[(b + 1) * m + a] - fy[b * m + a]) / h
        })
        .collect()
}

pub(crate) fn rt0_value(m: usize, h: f64, fx: &[f64], fy: &[f64], x: Point) -> [f64; 2] {
    let clamp = |v: f64| (v / h).clamp(0.0, m as f64);
    let (u, v) = (clamp(x[0]), clamp(x[1]));
    let a = (u.floor() as usize).min(m - 1);
    let b = (v.floor() as usize).min(m - 1);
    let (tu, tv) = (u - a as f64, v - b as f64);
    let gx = (1.0 - tu) * fx[b * (m + 1) + a] + tu * fx[b * (m + 1) + a + 1];
    let gy = (1.0 - tv) * fy[b * m + a] + tv * fy[(b + 1) * m + a];
    [gx, gy]
}

/// Exact `int |v|^2` of the Raviart-Thomas field: each component is linear
/// across a cell between its two face values `p`, `q`, contributing
/// `h^2 (p^2 + p q + q^2) / 3`.
pub(crate) fn rt0_energy(m: usize, h: f64, fx: &[f64], fy: &[f64]) -> f64 {
    let pair = |p: f64, q: f64| (p * p + p * q + q * q) / 3.0;
    let mut s = 0.0;
    for b in 0..m {
        for a in 0..m {
            s += pair(fx[b * (m + 1) + a], fx[b * (m + 1) + a + 1]);
            s += pair(fy[b * m + a], fy[(b + 1) * m + a]);
        }
    }
    s * h * h
}

/// Unit-spacing solution for the lower-left quadrant indicator minus 1/4.
/// Any cell right-hand side is a combination of its four reflections.
pub(crate) struct QuadrantBasis {
    pub m: usize,
    pub residual: f64,
    fx: Vec<f64>,
    fy: Vec<f64>,
}

impl QuadrantBasis {
    fn compute(m: usize) -> Result<QuadrantBasis> {
        let half = m / 2;
        let f: Vec<f64> = (0..m * m)
            .map(|k| if k % m < half && k / m < half { 0.75 } else { -0.25 })
            .collect();
        let (fx, fy, residual) = solve_unit_grid(m, &f)?;
        Ok(QuadrantBasis { m, residual, fx, fy })
    }

    /// Cached basis for an `m x m` grid.
    pub fn get(m: usize) -> Result<Arc<QuadrantBasis>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadrantBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(b) = cache.lock().expect("basis cache poisoned").get(&m) {
            return Ok(b.clone());
        }
        let b = Arc::new(QuadrantBasis::compute(m)?);
        Ok(cache
            .lock()
            .expect("basis cache poisoned")
            .entry(m)
            .or_insert(b)
            .clone())
    }

    /// Unit-spacing `d/dx` on face `a` of row `b` for quadrant `q`.
    #[inline]
    pub fn fx(&self, q: usize, a: usize, b: usize) -> f64 {
        let m = self.m;
        let b = if q >= 2 { m - 1 - b } else { b };
        if q % 2 == 1 {
            -self.fx[b * (m + 1) + m - a]
        } else {
            self.fx[b * (m + 1) + a]
        }
    }

    /// Unit-spacing `d/dy` on face `b` of column `a` for quadrant `q`.
    #[inline]
    pub fn fy(&self, q: usize, a: usize, b: usize) -> f64 {
        let m = self.m;
        let a = if q % 2 == 1 { m - 1 - a } else { a };
        if q >= 2 {
            -self.fy[(m - b) * m + a]
        } else {
            self.fy[b * m + a]
        }
    }

    /// The solution of `cp` assembled from the four reflected copies.
    pub fn combine(&self, cp: &CellProblem) -> CellSolution {
        let m = self.m;
        let c = cp.rhs();
        let mut fx = vec![0.0; m * (m + 1)];
        let mut fy = vec![0.0; (m + 1) * m];
        for b in 0..m {
            for a in 0..=m {
                fx[b * (m + 1) + a] = (0..4).map(|q| c[q] * self.fx(q, a, b)).sum::<f64>() * cp.h;
            }
        }
        for b in 0..=m {
            for a in 0..m {
                fy[b * m + a] = (0..4).map(|q| c[q] * self.fy(q, a, b)).sum::<f64>() * cp.h;
            }
        }
        CellSolution {
            m,
            h: cp.h,
            fx,
            fy,
            residual: self.residual,
        }
    }
}

/// Cell solution through the cached basis.
pub fn solve_cell_cached(cp: &CellProblem) -> Result<CellSolution> {
    let m = cp.cells()?;
    Ok(QuadrantBasis::get(m)?.combine(cp))
}
