//! Dyadic martingale dual witness.
//!
//! For every dyadic cube `Q` of `(0, R)^2` with side at least 1 the
//! coefficient `N_Q` is the right-half count minus the left-half count of
//! `mu`. Cubes are kept top-down while both
//!
//! * `int_Q |grad sum_{Qbar containing Q} N_Qbar zeta_Qbar|^2 <= M |Q| ln R`
//!   (midpoint quadrature on the `h`-grid, `Q`'s own term included), and
//! * `N_Q^2 <= M |Q| ln R`
//!
//! hold, the four children of a cube being kept together or not at all.
//! The witness is `zeta = sum of N_Q zeta_Q` over the kept cubes.

mod mask;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{CountTree, DyadicCube};
use crate::error::{Error, Result};
use crate::export::write_grid;
use crate::point_process::{sample_conditioned_pair, Point, PointSet, Rect, RngStream};

pub use mask::{
    make_mask, rescale_to_cube, spectral_norm, CubeMask, Mask, MASK_GRAD_SUP, MASK_HALF_WIDTH,
    MASK_HESSIAN_SUP,
};

/// Smallest power of two for which the mean exceptional fraction `|E| / R^2`
/// stays below 10% for `R` in `16..=128` with this mask (the root test
/// compares `N^2 int |grad zeta_hat|^2 ~ 282 |Q|` against `M |Q| ln R`).
pub const DEFAULT_M: f64 = 2048.0;
pub const DEFAULT_H: f64 = 0.25;

/// Measured constant of the Lipschitz law `L <= K sqrt(M ln R)`: the largest
/// ratio seen over `M` in `16..=16384`, `R` in `4..=128` and 20 seeds was
/// 4.28.
pub const LIPSCHITZ_K: f64 = 6.0;

/// Analytic constant `K` of the Lipschitz law for the certified bound of
/// [`WitnessField::lipschitz_bound`], valid for `h <= 1/4`.
///
/// On a kept leaf `Q` the quadrature test gives a grid point with
/// `|grad zeta| <= sqrt(M ln R)`; the second test bounds the Hessian on `Q` by
/// `2 H sqrt(M ln R) / r_Q`, and grid points of `Q` are within `sqrt(2) r_Q`
/// of each other. The overshoot term adds `(h / sqrt 2) 2 H sqrt(M ln R)`.
pub fn analytic_lipschitz_k() -> f64 {
    1.0 + (2.0 * 2f64.sqrt() + 2f64.sqrt() / 4.0) * MASK_HESSIAN_SUP
}

/// Values and gradients of `zeta_hat` at the cell centres of one cube with
/// `k x k` cells, already divided by the side.
struct Stencil {
    k: usize,
    val: Vec<f64>,
    grad: Vec<[f64; 2]>,
}

impl Stencil {
    fn new(mask: &Mask, side: u32, h: f64) -> Stencil {
        let k = (side as f64 / h).round() as usize;
        let s = side as f64;
        let mut val = Vec::with_capacity(k * k);
        let mut grad = Vec::with_capacity(k * k);
        for b in 0..k {
            for a in 0..k {
                let x = [(a as f64 + 0.5) / k as f64, (b as f64 + 0.5) / k as f64];
                val.push(mask.value(x));
                let g = mask.grad(x);
                grad.push([g[0] / s, g[1] / s]);
            }
        }
        Stencil { k, val, grad }
    }
}

/// One kept cube as written to the JSONL dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessCube {
    pub cube: DyadicCube,
    #[serde(rename = "N_Q")]
    pub n_q: i64,
    /// No kept children.
    pub leaf: bool,
    /// Leaf above unit side: part of the exceptional set.
    pub stopped: bool,
}

#[derive(Debug, Clone)]
pub struct WitnessField {
    root: u32,
    m: f64,
    h: f64,
    mask: Mask,
    source_count: usize,
    /// `coef[level][j * per + i]`, `None` for cubes that were not kept.
    coef: Vec<Vec<Option<i64>>>,
    leaf: Vec<Vec<bool>>,
    /// Cells per side of the sample grid.
    cells: usize,
    zeta: Vec<f64>,
    grad: Vec<[f64; 2]>,
    exceptional_area: f64,
    grid_grad_max: f64,
    hessian_bound: f64,
    sampled_grad_max: f64,
    lipschitz: f64,
}

fn slot(q: &DyadicCube) -> (usize, usize) {
    (q.level() as usize, q.j as usize * q.per_side() as usize + q.i as usize)
}

/// Builds the witness from `mu` on the root square `[0, R)^2`, which must
/// lie inside the box of `ps_mu`.
pub fn build_witness(ps_mu: &PointSet, r: u32, m: f64, h: f64) -> Result<WitnessField> {
    if r < 2 || !r.is_power_of_two() {
        return Err(Error::invalid(format!("R must be a power of 2 and >= 2, got {r}")));
    }
    if m.is_nan() || m <= 0.0 {
        return Err(Error::invalid(format!("M must be positive, got {m}")));
    }
    let inv = 1.0 / h;
    if !(h > 0.0 && h <= 0.25) || inv.fract() != 0.0 || !(inv as u64).is_power_of_two() {
        return Err(Error::invalid(format!("h must be 1/2^k with k >= 2, got {h}")));
    }
    let square = Rect::square(r as f64)?;
    if !ps_mu.bbox().contains_rect(&square) {
        return Err(Error::invalid(format!("box {} does not cover {square}", ps_mu.bbox())));
    }
    let inside = ps_mu.restrict(&square)?;
    let tree = CountTree::build(&inside)?;
    let mask = make_mask();
    let levels = tree.levels();
    let cells = (r as f64 * inv) as usize;
    let ln_r = (r as f64).ln();
    let stencils: Vec<Stencil> = (0..levels).map(|l| Stencil::new(&mask, r >> l, h)).collect();

    let mut w = WitnessField {
        root: r,
        m,
        h,
        mask,
        source_count: inside.len(),
        coef: (0..levels).map(|l| vec![None; 1 << (2 * l)]).collect(),
        leaf: (0..levels).map(|l| vec![false; 1 << (2 * l)]).collect(),
        cells,
        zeta: vec![0.0; cells * cells],
        grad: vec![[0.0; 2]; cells * cells],
        exceptional_area: 0.0,
        grid_grad_max: 0.0,
        hessian_bound: 0.0,
        sampled_grad_max: 0.0,
        lipschitz: 0.0,
    };

    // Both stopping tests for `q` on top of the gradient accumulated so far.
    let passes = |w: &WitnessField, q: &DyadicCube| -> bool {
        let nq = tree.half_diff(q) as f64;
        let thr = m * q.area() * ln_r;
        if nq * nq > thr {
            return false;
        }
        let st = &stencils[q.level() as usize];
        let (i0, j0) = (q.i as usize * st.k, q.j as usize * st.k);
        let mut acc = 0.0;
        for b in 0..st.k {
            let row = (j0 + b) * w.cells + i0;
            for a in 0..st.k {
                let g = w.grad[row + a];
                let s = st.grad[b * st.k + a];
                let gx = g[0] + nq * s[0];
                let gy = g[1] + nq * s[1];
                acc += gx * gx + gy * gy;
            }
        }
        acc * h * h <= thr
    };
    let keep = |w: &mut WitnessField, q: &DyadicCube, curv: &mut Vec<Vec<f64>>, parent_curv: f64| {
        let nq = tree.half_diff(q);
        let (l, k) = slot(q);
        w.coef[l][k] = Some(nq);
        curv[l][k] = parent_curv + nq.unsigned_abs() as f64 / q.area();
        let st = &stencils[l];
        let (i0, j0) = (q.i as usize * st.k, q.j as usize * st.k);
        let nq = nq as f64;
        for b in 0..st.k {
            let row = (j0 + b) * w.cells + i0;
            for a in 0..st.k {
                let t = b * st.k + a;
                w.zeta[row + a] += nq * st.val[t];
                w.grad[row + a][0] += nq * st.grad[t][0];
                w.grad[row + a][1] += nq * st.grad[t][1];
            }
        }
    };

    // Sum of |N_Q| / r_Q^2 along the kept chain, per kept cube.
    let mut curv: Vec<Vec<f64>> = (0..levels).map(|l| vec![0.0; 1 << (2 * l)]).collect();
    let root = DyadicCube::root(r)?;
    if !passes(&w, &root) {
        w.exceptional_area = square.area();
        return Ok(w);
    }
    keep(&mut w, &root, &mut curv, 0.0);
    let mut frontier = vec![root];
    let mut leaves = Vec::new();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for q in &frontier {
            let (l, k) = slot(q);
            let kids = q.children().filter(|kids| kids.iter().all(|c| passes(&w, c)));
            match kids {
                Some(kids) => {
                    let pc = curv[l][k];
                    for c in &kids {
                        keep(&mut w, c, &mut curv, pc);
                    }
                    next.extend(kids);
                }
                None => {
                    w.leaf[l][k] = true;
                    leaves.push((*q, curv[l][k]));
                    if q.side > 1 {
                        w.exceptional_area += q.area();
                    }
                }
            }
        }
        frontier = next;
    }
    w.grid_grad_max = w.grad.iter().map(|g| g[0].hypot(g[1])).fold(0.0, f64::max);
    certify_lipschitz(&mut w, &leaves);
    Ok(w)
}

/// Relative slack of the certified Lipschitz bound over the largest sampled
/// gradient.
pub const LIPSCHITZ_SLACK: f64 = 0.01;
const MAX_REFINE_DEPTH: u32 = 12;

/// Branch and bound over the `h`-cells. A square of half-side `s` centred at
/// `c` inside leaf `Q` satisfies `sup |grad zeta| <= |grad zeta(c)| +
/// sqrt(2) s H_Q`, where `H_Q` bounds the Hessian along the kept chain of `Q`.
/// Squares whose bound exceeds `(1 + LIPSCHITZ_SLACK)` times the largest
/// sampled gradient are split into four.
fn certify_lipschitz(w: &mut WitnessField, leaves: &[(DyadicCube, f64)]) {
    let h = w.h;
    let mut lower = w.grid_grad_max;
    let mut upper = 0.0f64;
    let mut stack: Vec<(Point, f64, u32)> = Vec::new();
    for &(q, curv) in leaves {
        let hess = MASK_HESSIAN_SUP * curv;
        w.hessian_bound = w.hessian_bound.max(hess);
        let chain: Vec<(f64, CubeMask)> = {
            let centre = [q.corner()[0] + 0.5 * q.side as f64, q.corner()[1] + 0.5 * q.side as f64];
            w.chain(centre).filter(|(n, _)| *n != 0).map(|(n, z)| (n as f64, z)).collect()
        };
        let grad_at = |x: Point| {
            chain.iter().fold([0.0; 2], |acc, (n, z)| {
                let g = z.grad(x);
                [acc[0] + n * g[0], acc[1] + n * g[1]]
            })
        };
        let k = (q.side as f64 / h).round() as usize;
        let (i0, j0) = (q.i as usize * k, q.j as usize * k);
        for b in 0..k {
            for a in 0..k {
                let g = w.grad[(j0 + b) * w.cells + i0 + a];
                let c = [((i0 + a) as f64 + 0.5) * h, ((j0 + b) as f64 + 0.5) * h];
                stack.push((c, 0.5 * h, 0));
                while let Some((c, half, depth)) = stack.pop() {
                    let gn = if depth == 0 {
                        g[0].hypot(g[1])
                    } else {
                        let g = grad_at(c);
                        g[0].hypot(g[1])
                    };
                    lower = lower.max(gn);
                    let bound = gn + std::f64::consts::SQRT_2 * half * hess;
                    if bound <= (1.0 + LIPSCHITZ_SLACK) * lower || depth == MAX_REFINE_DEPTH {
                        upper = upper.max(bound);
                        continue;
                    }
                    let d = 0.5 * half;
                    for (sx, sy) in [(-d, -d), (d, -d), (-d, d), (d, d)] {
                        stack.push(([c[0] + sx, c[1] + sy], d, depth + 1));
                    }
                }
            }
        }
    }
    w.sampled_grad_max = lower;
    w.lipschitz = upper;
}

/// Witness value of a pair of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessValue {
    /// `sum_mu zeta - sum_nu zeta`.
    pub raw: f64,
    /// Certified Lipschitz constant of `zeta`.
    pub lipschitz: f64,
    /// `raw / lipschitz` (0 when `zeta` vanishes identically).
    pub normalized: f64,
}

impl WitnessField {
    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// Number of `mu` points in the root square used for the build.
    pub fn source_count(&self) -> usize {
        self.source_count
    }

    /// Area of the cubes where subdivision stopped above unit side (the
    /// whole square if the root itself was rejected).
    pub fn exceptional_area(&self) -> f64 {
        self.exceptional_area
    }

    pub fn coefficient(&self, q: &DyadicCube) -> Option<i64> {
        if q.root != self.root {
            return None;
        }
        let (l, k) = slot(q);
        self.coef[l][k]
    }

    /// Kept cubes, level by level, row-major within a level.
    pub fn cubes(&self) -> Vec<WitnessCube> {
        let mut out = Vec::new();
        for (l, row) in self.coef.iter().enumerate() {
            let side = self.root >> l;
            let per = (self.root / side) as usize;
            for (k, c) in row.iter().enumerate() {
                if let Some(n_q) = *c {
                    let cube = DyadicCube {
                        root: self.root,
                        side,
                        i: (k % per) as u32,
                        j: (k / per) as u32,
                    };
                    let leaf = self.leaf[l][k];
                    out.push(WitnessCube {
                        cube,
                        n_q,
                        leaf,
                        stopped: leaf && side > 1,
                    });
                }
            }
        }
        out
    }

    /// Kept cubes with their mask copies along the chain containing `x`.
    fn chain(&self, x: Point) -> impl Iterator<Item = (i64, CubeMask)> + '_ {
        let r = self.root as f64;
        let inside = x[0] >= 0.0 && x[0] < r && x[1] >= 0.0 && x[1] < r;
        let mut side = if inside { self.root } else { 0 };
        std::iter::from_fn(move || {
            if side == 0 {
                return None;
            }
            let q = DyadicCube::containing(self.root, side, x);
            let nq = self.coefficient(&q)?;
            side /= 2;
            Some((nq, rescale_to_cube(self.mask, &q, [0.0, 0.0])))
        })
    }

    /// Exact `zeta(x)`, summed over the kept cubes containing `x`.
    pub fn value_at(&self, x: Point) -> f64 {
        self.chain(x).map(|(n, z)| n as f64 * z.value(x)).sum()
    }

    pub fn gradient_at(&self, x: Point) -> [f64; 2] {
        self.chain(x).fold([0.0; 2], |acc, (n, z)| {
            let g = z.grad(x);
            [acc[0] + n as f64 * g[0], acc[1] + n as f64 * g[1]]
        })
    }

    /// Cells per side of the sample grid (`R / h`).
    pub fn grid_cells(&self) -> usize {
        self.cells
    }

    /// Sampled `zeta` at cell centres, row-major in `(y, x)`.
    pub fn grid_values(&self) -> &[f64] {
        &self.zeta
    }

    pub fn grid_gradients(&self) -> &[[f64; 2]] {
        &self.grad
    }

    /// Largest `|grad zeta|` over the cell centres.
    pub fn grid_gradient_max(&self) -> f64 {
        self.grid_grad_max
    }

    /// Bound on the Hessian spectral norm of `zeta` anywhere (the largest
    /// per-leaf bound).
    pub fn hessian_bound(&self) -> f64 {
        self.hessian_bound
    }

    /// Largest `|grad zeta|` seen by the certification, grid and refined
    /// points together; a lower bound on the true supremum.
    pub fn sampled_gradient_max(&self) -> f64 {
        self.sampled_grad_max
    }

    /// Certified `sup |grad zeta|`, at most `1 + LIPSCHITZ_SLACK` times
    /// [`Self::sampled_gradient_max`] unless the refinement depth ran out.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    /// Midpoint quadrature of `int zeta dx`.
    pub fn integral(&self) -> f64 {
        self.zeta.iter().sum::<f64>() * self.h * self.h
    }

    /// Smallest box containing the supports of the kept cubes with nonzero
    /// coefficient; `None` when `zeta` vanishes.
    pub fn support(&self) -> Option<Rect> {
        let lo = 0.5 - MASK_HALF_WIDTH;
        let hi = 0.5 + MASK_HALF_WIDTH;
        self.cubes()
            .iter()
            .filter(|c| c.n_q != 0)
            .map(|c| {
                let o = c.cube.corner();
                let s = c.cube.side as f64;
                [o[0] + lo * s, o[1] + lo * s, o[0] + hi * s, o[1] + hi * s]
            })
            .reduce(|a, b| [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])])
            .map(|b| Rect {
                x0: b[0],
                y0: b[1],
                x1: b[2],
                y1: b[3],
            })
    }

    /// One JSON object per kept cube.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for c in self.cubes() {
            serde_json::to_writer(&mut w, &c)?;
            writeln!(w)?;
        }
        w.flush()
    }

    /// Grid export with channels `zeta, dzeta/dx, dzeta/dy` per cell centre.
    pub fn write_grid(&self, path: &Path) -> Result<()> {
        let mut data = Vec::with_capacity(3 * self.zeta.len());
        for (z, g) in self.zeta.iter().zip(&self.grad) {
            data.extend_from_slice(&[*z, g[0], g[1]]);
        }
        let header = serde_json::json!({
            "R": self.root,
            "h": self.h,
            "M": self.m,
            "dims": [self.cells, self.cells],
            "channels": ["zeta", "dzeta_dx", "dzeta_dy"],
            "layout": "row-major, y outer, cell centres",
        });
        write_grid(path, &header, &data)
    }
}

/// `sum_mu zeta - sum_nu zeta` with exact point evaluation, and its
/// normalization by the certified Lipschitz bound.
pub fn witness_value(w: &WitnessField, mu: &PointSet, nu: &PointSet) -> Result<WitnessValue> {
    let square = Rect::square(w.root as f64)?;
    for (name, ps) in [("mu", mu), ("nu", nu)] {
        if !ps.bbox().contains_rect(&square) {
            return Err(Error::invalid(format!("{name} box {} does not cover {square}", ps.bbox())));
        }
    }
    let k = mu.count_in(&square);
    if k != w.source_count {
        return Err(Error::invalid(format!(
            "witness was built from {} points in {square}, mu has {k}",
            w.source_count
        )));
    }
    let sum = |ps: &PointSet| ps.points().iter().map(|&p| w.value_at(p)).sum::<f64>();
    let raw = sum(mu) - sum(nu);
    let lipschitz = w.lipschitz_bound();
    let normalized = if lipschitz > 0.0 { raw / lipschitz } else { 0.0 };
    Ok(WitnessValue {
        raw,
        lipschitz,
        normalized,
    })
}

/// One `(R, seed)` entry of a lower-bound sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    #[serde(rename = "R")]
    pub r: u32,
    pub seed: u64,
    #[serde(flatten)]
    pub value: WitnessValue,
    pub exceptional_area: f64,
    pub n_points: usize,
}

/// Witness values on conditioned pairs (Poisson `mu`, equal-count uniform
/// `nu`) drawn from `RngStream::new(seed, "R{R}")`.
pub fn lower_bound_scan(rs: &[u32], seeds: &[u64], m: f64, h: f64, intensity: f64) -> Result<Vec<ScanRecord>> {
    let jobs: Vec<(u32, u64)> = rs.iter().flat_map(|&r| seeds.iter().map(move |&s| (r, s))).collect();
    let mut out = jobs
        .par_iter()
        .map(|&(r, seed)| {
            let bx = Rect::square(r as f64)?;
            let (mu, nu) = sample_conditioned_pair(&bx, intensity, &RngStream::new(seed, format!("R{r}")))?;
            let w = build_witness(&mu, r, m, h)?;
            Ok(ScanRecord {
                r,
                seed,
                value: witness_value(&w, &mu, &nu)?,
                exceptional_area: w.exceptional_area(),
                n_points: mu.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|rec| (rec.r, rec.seed));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_process::sample_poisson;

    fn poisson(r: u32, seed: u64) -> PointSet {
        sample_poisson(&Rect::square(r as f64).unwrap(), 1.0, &RngStream::new(seed, "mu")).unwrap()
    }

    #[test]
    fn empty_sample_gives_zero_witness() {
        let ps = PointSet::empty(Rect::square(8.0).unwrap()).unwrap();
        let w = build_witness(&ps, 8, DEFAULT_M, DEFAULT_H).unwrap();
        assert!(w.cubes().iter().all(|c| c.n_q == 0));
        assert!(w.grid_values().iter().all(|&z| z == 0.0));
        assert_eq!(w.exceptional_area(), 0.0);
        assert_eq!(w.lipschitz_bound(), 0.0);
        let v = witness_value(&w, &ps, &ps).unwrap();
        assert_eq!(v.normalized, 0.0);
    }

    #[test]
    fn infinite_m_keeps_every_cube() {
        let ps = poisson(16, 1);
        let w = build_witness(&ps, 16, f64::INFINITY, DEFAULT_H).unwrap();
        assert_eq!(w.cubes().len(), 1 + 4 + 16 + 64 + 256);
        assert_eq!(w.exceptional_area(), 0.0);
        // Grid samples agree with exact evaluation at cell centres.
        let n = w.grid_cells();
        for (i, j) in [(0, 0), (5, 17), (40, 3), (63, 63)] {
            let x = [(i as f64 + 0.5) * 0.25, (j as f64 + 0.5) * 0.25];
            assert!((w.grid_values()[j * n + i] - w.value_at(x)).abs() < 1e-9);
            let g = w.gradient_at(x);
            let gg = w.grid_gradients()[j * n + i];
            assert!((g[0] - gg[0]).abs() < 1e-9 && (g[1] - gg[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn single_point_in_right_half_of_unit_root() {
        // R = 2: root plus four unit cubes; the point sits in cube (1, 0).
        let x = [1.7, 0.4];
        let ps = PointSet::new(vec![x], Rect::square(2.0).unwrap()).unwrap();
        let w = build_witness(&ps, 2, f64::INFINITY, DEFAULT_H).unwrap();
        let root = DyadicCube::root(2).unwrap();
        let unit = DyadicCube::new(2, 1, 1, 0).unwrap();
        assert_eq!(w.coefficient(&root), Some(1));
        assert_eq!(w.coefficient(&unit), Some(1));
        let m = make_mask();
        let want = m.value([0.85, 0.2]) + m.value([0.7, 0.4]);
        assert!((w.value_at(x) - want).abs() < 1e-15);
        let empty = PointSet::empty(Rect::square(2.0).unwrap()).unwrap();
        let v = witness_value(&w, &ps, &empty).unwrap();
        assert!((v.raw - want).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_give_zero_raw_value() {
        let ps = poisson(16, 4);
        let w = build_witness(&ps, 16, DEFAULT_M, DEFAULT_H).unwrap();
        assert_eq!(witness_value(&w, &ps, &ps).unwrap().raw, 0.0);
    }

    #[test]
    fn bad_arguments() {
        let ps = poisson(8, 0);
        assert!(build_witness(&ps, 1, 16.0, 0.25).is_err());
        assert!(build_witness(&ps, 16, 16.0, 0.25).is_err());
        assert!(build_witness(&ps, 8, 0.0, 0.25).is_err());
        assert!(build_witness(&ps, 8, 16.0, 0.5).is_err());
        assert!(build_witness(&ps, 8, 16.0, 0.3).is_err());
        let w = build_witness(&ps, 8, 16.0, 0.25).unwrap();
        let other = poisson(8, 1);
        if other.len() != ps.len() {
            assert!(witness_value(&w, &other, &ps).is_err());
        }
        let small = PointSet::empty(Rect::square(4.0).unwrap()).unwrap();
        assert!(witness_value(&w, &ps, &small).is_err());
    }

    #[test]
    fn lipschitz_bound_dominates_dense_sampling() {
        let ps = poisson(8, 2);
        let w = build_witness(&ps, 8, f64::INFINITY, DEFAULT_H).unwrap();
        let l = w.lipschitz_bound();
        let n = 256;
        for j in 0..n {
            for i in 0..n {
                let x = [(i as f64 + 0.37) * 8.0 / n as f64, (j as f64 + 0.61) * 8.0 / n as f64];
                let g = w.gradient_at(x);
                assert!(g[0].hypot(g[1]) <= l);
            }
        }
    }
}
