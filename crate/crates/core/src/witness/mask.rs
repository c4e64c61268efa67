//! The reference mask on the unit square and its affine copies on dyadic
//! cubes.
//!
//! With `u = t - 1/2` and `a(u) = L^2 - u^2` on `|u| < L`,
//! `b(t) = a^3 (1 + BETA u^2)` and `s(t) = u a^3 (1 + GAMMA u^2)`, the mask
//! is `c * b(x2) * s(x1)`. Both factors are C^2 and vanish outside
//! `(1/2 - L, 1/2 + L)`. The quadratic factors lower the Dirichlet energy
//! `int |grad zeta_hat|^2` from about 403 (plain `a^3`) to about 282; no
//! function supported in `(0.1, 0.9)^2` with unit half difference gets below
//! about 171.

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicCube;
use crate::point_process::Point;

/// Half-width of the support of each factor around `1/2`.
pub const MASK_HALF_WIDTH: f64 = 0.4;
const BETA: f64 = 29.0;
const GAMMA: f64 = 15.0;

/// `sup |grad zeta_hat|`, maximized over the 1024^2 cell-centre grid.
pub const MASK_GRAD_SUP: f64 = 35.7685063363843;

/// Upper bound on the spectral norm of the Hessian of the mask: the
/// 1024^2 grid maximum rounded up by 1%.
pub const MASK_HESSIAN_SUP: f64 = 546.5;

// Five-point Gauss-Legendre rule on [-1, 1]; exact for degree <= 9.
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// Value and first two derivatives of `b` and `s` at `t`.
#[inline]
fn factors(t: f64) -> ([f64; 3], [f64; 3]) {
    let l = MASK_HALF_WIDTH;
    let u = t - 0.5;
    if u.abs() >= l {
        return ([0.0; 3], [0.0; 3]);
    }
    let a = l * l - u * u;
    let a2 = a * a;
    let b0 = [a2 * a, -6.0 * u * a2, a * (24.0 * u * u - 6.0 * a)];
    let s0 = [u * a2 * a, a2 * (a - 6.0 * u * u), u * a * (24.0 * u * u - 18.0 * a)];
    let times = |f: [f64; 3], k: f64| {
        let p = [1.0 + k * u * u, 2.0 * k * u, 2.0 * k];
        [f[0] * p[0], f[1] * p[0] + f[0] * p[1], f[2] * p[0] + 2.0 * f[1] * p[1] + f[0] * p[2]]
    };
    (times(b0, BETA), times(s0, GAMMA))
}

/// The reference function on `(0, 1)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    /// Normalization making the right-minus-left half integral 1.
    pub c: f64,
}

impl Default for Mask {
    fn default() -> Self {
        make_mask()
    }
}

pub fn make_mask() -> Mask {
    let l = MASK_HALF_WIDTH;
    let bump = gauss_legendre(0.5 - l, 0.5 + l, |t| factors(t).0[0]);
    // s is odd about 1/2, so right minus left is twice the right half.
    let half = gauss_legendre(0.5, 0.5 + l, |t| factors(t).1[0]);
    Mask {
        c: 1.0 / (bump * 2.0 * half),
    }
}

impl Mask {
    #[inline]
    pub fn value(&self, x: Point) -> f64 {
        let (b, _) = factors(x[1]);
        let (_, s) = factors(x[0]);
        self.c * b[0] * s[0]
    }

    #[inline]
    pub fn grad(&self, x: Point) -> [f64; 2] {
        let (b, _) = factors(x[1]);
        let (_, s) = factors(x[0]);
        [self.c * b[0] * s[1], self.c * b[1] * s[0]]
    }

    /// `[d11, d12, d22]`.
    #[inline]
    pub fn hessian(&self, x: Point) -> [f64; 3] {
        let (b, _) = factors(x[1]);
        let (_, s) = factors(x[0]);
        [self.c * b[0] * s[2], self.c * b[1] * s[1], self.c * b[2] * s[0]]
    }

    /// Values at the centres of an `n x n` grid, row-major in `(x2, x1)`.
    pub fn samples(&self, n: usize) -> Vec<f64> {
        let h = 1.0 / n as f64;
        (0..n)
            .flat_map(|j| (0..n).map(move |i| [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]))
            .map(|x| self.value(x))
            .collect()
    }

    /// Largest `|grad|` and Hessian spectral norm over an `n x n` centre grid.
    pub fn grid_sups(&self, n: usize) -> (f64, f64) {
        let h = 1.0 / n as f64;
        let (mut g, mut hs) = (0.0f64, 0.0f64);
        for j in 0..n {
            for i in 0..n {
                let x = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                let d = self.grad(x);
                g = g.max(d[0].hypot(d[1]));
                hs = hs.max(spectral_norm(self.hessian(x)));
            }
        }
        (g, hs)
    }
}

/// Largest absolute eigenvalue of `[[p, q], [q, r]]`.
pub fn spectral_norm(m: [f64; 3]) -> f64 {
    let [p, q, r] = m;
    0.5 * (p + r).abs() + (0.25 * (p - r).powi(2) + q * q).sqrt()
}

/// The mask transported to a cube `Q = corner + side * (0, 1)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeMask {
    pub mask: Mask,
    pub corner: Point,
    pub side: f64,
}

/// `zeta_Q(A_Q x) = zeta_hat(x)` for the cube `q` of a root box whose lower
/// left corner is `origin`.
pub fn rescale_to_cube(mask: Mask, q: &DyadicCube, origin: Point) -> CubeMask {
    let c = q.corner();
    CubeMask {
        mask,
        corner: [origin[0] + c[0], origin[1] + c[1]],
        side: q.side as f64,
    }
}

impl CubeMask {
    #[inline]
    fn pull(&self, x: Point) -> Point {
        [(x[0] - self.corner[0]) / self.side, (x[1] - self.corner[1]) / self.side]
    }

    #[inline]
    pub fn value(&self, x: Point) -> f64 {
        self.mask.value(self.pull(x))
    }

    #[inline]
    pub fn grad(&self, x: Point) -> [f64; 2] {
        let g = self.mask.grad(self.pull(x));
        [g[0] / self.side, g[1] / self.side]
    }

    #[inline]
    pub fn hessian(&self, x: Point) -> [f64; 3] {
        let s2 = self.side * self.side;
        let h = self.mask.hessian(self.pull(x));
        [h[0] / s2, h[1] / s2, h[2] / s2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_matches_closed_form() {
        // int a^3 = 32/35 L^7, int u^2 a^3 = 32/315 L^9,
        // int_{u>0} u a^3 = L^8/8, int_{u>0} u^3 a^3 = L^10/40.
        let l = MASK_HALF_WIDTH;
        let bump = 32.0 / 35.0 * l.powi(7) + BETA * 32.0 / 315.0 * l.powi(9);
        let half = l.powi(8) / 8.0 + GAMMA * l.powi(10) / 40.0;
        let m = make_mask();
        assert!((m.c - 1.0 / (2.0 * bump * half)).abs() < 1e-12 * m.c);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = make_mask();
        let e = 1e-6;
        for x in [[0.3, 0.6], [0.55, 0.2], [0.77, 0.81]] {
            let g = m.grad(x);
            let fx = (m.value([x[0] + e, x[1]]) - m.value([x[0] - e, x[1]])) / (2.0 * e);
            let fy = (m.value([x[0], x[1] + e]) - m.value([x[0], x[1] - e])) / (2.0 * e);
            assert!((g[0] - fx).abs() < 1e-6 && (g[1] - fy).abs() < 1e-6);
            let h = m.hessian(x);
            let gx = m.grad([x[0] + e, x[1]]);
            let gxm = m.grad([x[0] - e, x[1]]);
            let gy = m.grad([x[0], x[1] + e]);
            let gym = m.grad([x[0], x[1] - e]);
            assert!((h[0] - (gx[0] - gxm[0]) / (2.0 * e)).abs() < 1e-4);
            assert!((h[1] - (gy[0] - gym[0]) / (2.0 * e)).abs() < 1e-4);
            assert!((h[2] - (gy[1] - gym[1]) / (2.0 * e)).abs() < 1e-4);
        }
    }

    #[test]
    fn support_is_inside_the_square() {
        let m = make_mask();
        for t in [0.0, 0.05, 0.1, 0.9, 0.95, 0.999] {
            for v in [0.2, 0.5, 0.7] {
                assert_eq!(m.value([t, v]), 0.0);
                assert_eq!(m.value([v, t]), 0.0);
                assert_eq!(m.grad([t, v]), [0.0, 0.0]);
            }
        }
    }

    #[test]
    fn rescaled_gradient_scales_with_side() {
        let m = make_mask();
        let q = DyadicCube::new(8, 2, 1, 2).unwrap();
        let z = rescale_to_cube(m, &q, [0.0, 0.0]);
        assert!((z.value([2.6, 5.2]) - m.value([0.3, 0.6])).abs() < 1e-9);
        let g = z.grad([2.6, 5.2]);
        let g0 = m.grad([0.3, 0.6]);
        assert!((g[0] - g0[0] / 2.0).abs() < 1e-12 && (g[1] - g0[1] / 2.0).abs() < 1e-12);
    }
}
