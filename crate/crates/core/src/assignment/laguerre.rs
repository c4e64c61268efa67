//! Semi-discrete quadratic transport from unit point masses to a constant
//! density on a box, solved through Laguerre (power) cells.
//!
//! The dual weights are found by damped Newton iteration on the concave
//! dual; cells are polygons obtained by clipping the box with the bisector
//! half-planes of nearby points.

use crate::error::{Error, Result};
use crate::krylov::cg_singular;
use crate::point_process::{Point, Rect};
use crate::spatial::{dist2, BucketGrid, Ring};

const BOUNDARY: usize = usize::MAX;

#[derive(Debug, Clone, Default)]
struct Cell {
    area: f64,
    /// Integral of `|x - x_i|^2` over the cell.
    moment: f64,
    /// (neighbour, shared edge length).
    edges: Vec<(usize, f64)>,
}

/// Convex polygon in coordinates relative to its generator; `label[k]` names
/// the edge from `v[k]` to `v[k + 1]`.
#[derive(Clone)]
struct Polygon {
    v: Vec<Point>,
    label: Vec<usize>,
}

impl Polygon {
    fn rect(b: &Rect, o: Point) -> Polygon {
        let (x0, y0, x1, y1) = (b.x0 - o[0], b.y0 - o[1], b.x1 - o[0], b.y1 - o[1]);
        Polygon {
            v: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            label: vec![BOUNDARY; 4],
        }
    }

    fn radius2(&self) -> f64 {
        self.v.iter().fold(0.0, |m, p| m.max(p[0] * p[0] + p[1] * p[1]))
    }

    /// Keeps `{x : n.x <= c}`; the new edge is labelled `tag`.
    fn clip(&mut self, n: Point, c: f64, tag: usize, out: &mut Polygon) {
        let k = self.v.len();
        let s: Vec<f64> = self.v.iter().map(|p| n[0] * p[0] + n[1] * p[1] - c).collect();
        if s.iter().all(|&x| x <= 0.0) {
            return;
        }
        out.v.clear();
        out.label.clear();
        if s.iter().all(|&x| x > 0.0) {
            std::mem::swap(self, out);
            self.v.clear();
            self.label.clear();
            return;
        }
        for a in 0..k {
            let b = (a + 1) % k;
            let (pa, pb) = (self.v[a], self.v[b]);
            let cross = |t: f64| [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            if s[a] <= 0.0 {
                out.v.push(pa);
                out.label.push(self.label[a]);
                if s[b] > 0.0 {
                    out.v.push(cross(s[a] / (s[a] - s[b])));
                    out.label.push(tag);
                }
            } else if s[b] <= 0.0 {
                out.v.push(cross(s[a] / (s[a] - s[b])));
                out.label.push(self.label[a]);
            }
        }
        std::mem::swap(self, out);
    }

    fn measure(&self, cell: &mut Cell) {
        let k = self.v.len();
        let (mut a2, mut ixx, mut iyy) = (0.0, 0.0, 0.0);
        cell.edges.clear();
        for a in 0..k {
            let p = self.v[a];
            let q = self.v[(a + 1) % k];
            let cr = p[0] * q[1] - q[0] * p[1];
            a2 += cr;
            ixx += cr * (p[1] * p[1] + p[1] * q[1] + q[1] * q[1]);
            iyy += cr * (p[0] * p[0] + p[0] * q[0] + q[0] * q[0]);
            if self.label[a] != BOUNDARY {
                let len = dist2(p, q).sqrt();
                if len > 0.0 {
                    cell.edges.push((self.label[a], len));
                }
            }
        }
        cell.area = 0.5 * a2;
        cell.moment = (ixx + iyy) / 12.0;
    }
}

struct Diagram<'a> {
    points: &'a [Point],
    bbox: Rect,
    grid: BucketGrid,
}

impl<'a> Diagram<'a> {
    fn cells(&self, w: &[f64]) -> Vec<Cell> {
        let (nx, ny) = self.grid.dims();
        let mut bucket_wmax = vec![f64::NEG_INFINITY; nx * ny];
        for by in 0..ny {
            for bx in 0..nx {
                for &j in self.grid.bucket(bx, by) {
                    let m = &mut bucket_wmax[by * nx + bx];
                    *m = m.max(w[j]);
                }
            }
        }
        let wmax = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out = Vec::with_capacity(self.points.len());
        let mut poly = Polygon { v: Vec::new(), label: Vec::new() };
        let mut scratch = poly.clone();
        for (i, &xi) in self.points.iter().enumerate() {
            poly = Polygon::rect(&self.bbox, xi);
            let wi = w[i];
            // A point at distance >= d from x_i cannot cut a cell of
            // radius rho when max(0, d - rho)^2 >= rho^2 + w_j - w_i.
            let safe = |d: f64, rho2: f64, wj: f64| {
                let rho = rho2.sqrt();
                let g = (d - rho).max(0.0);
                g * g >= rho2 + wj - wi
            };
            self.grid.rings(xi, |step| {
                if poly.v.is_empty() {
                    return true;
                }
                match step {
                    Ring::End(reach) => safe(reach, poly.radius2(), wmax),
                    Ring::Bucket(bx, by) => {
                        let db = self.grid.bucket_dist2(xi, bx, by).sqrt();
                        if safe(db, poly.radius2(), bucket_wmax[by * nx + bx]) {
                            return false;
                        }
                        for &j in self.grid.bucket(bx, by) {
                            if j == i {
                                continue;
                            }
                            let d = [self.points[j][0] - xi[0], self.points[j][1] - xi[1]];
                            let c = 0.5 * (d[0] * d[0] + d[1] * d[1] + wi - w[j]);
                            poly.clip(d, c, j, &mut scratch);
                            if poly.v.is_empty() {
                                break;
                            }
                        }
                        false
                    }
                }
            });
            let mut cell = Cell::default();
            if !poly.v.is_empty() {
                poly.measure(&mut cell);
            }
            out.push(cell);
        }
        out
    }
}

/// Converged semi-discrete solution.
#[derive(Debug, Clone)]
pub(crate) struct LaguerreSolution {
    /// `rho * sum_i int_{L_i} |x - x_i|^2`.
    pub primal: f64,
    /// Dual objective at the converged weights, a lower bound on the optimum.
    pub dual: f64,
    pub max_mass_error: f64,
}

/// Optimal semi-discrete transport between unit masses at `points` and the
/// density `rho` on `bbox`. Requires `rho * area == points.len()`.
pub(crate) fn solve(points: &[Point], bbox: &Rect, rho: f64, tol: f64) -> Result<LaguerreSolution> {
    let n = points.len();
    if n == 0 {
        return Ok(LaguerreSolution {
            primal: 0.0,
            dual: 0.0,
            max_mass_error: 0.0,
        });
    }
    let mut sorted: Vec<Point> = points.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    if sorted.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::Solver("duplicate points have no Laguerre cells".into()));
    }
    let diagram = Diagram {
        points,
        bbox: *bbox,
        grid: BucketGrid::new(points, 3.0),
    };
    let mut w = vec![0.0; n];
    let mut cells = diagram.cells(&w);
    let masses = |cells: &[Cell]| cells.iter().map(|c| rho * c.area).collect::<Vec<f64>>();
    let mut m = masses(&cells);
    let eps0 = 0.5 * m.iter().cloned().fold(1.0, f64::min);
    if !(eps0 > 0.0) {
        return Err(Error::Solver("initial Voronoi diagram has an empty cell".into()));
    }
    let norm = |m: &[f64]| m.iter().map(|x| (1.0 - x).powi(2)).sum::<f64>().sqrt();
    let maxerr = |m: &[f64]| m.iter().fold(0.0f64, |a, x| a.max((1.0 - x).abs()));
    let mut iterations = 0;
    while maxerr(&m) > tol {
        if iterations >= 200 {
            return Err(Error::Solver(format!(
                "Laguerre Newton iteration stalled at mass error {:e}",
                maxerr(&m)
            )));
        }
        iterations += 1;
        let (entries, diag) = hessian(points, &cells, rho);
        let g: Vec<f64> = m.iter().map(|x| 1.0 - x).collect();
        let mut delta = vec![0.0; n];
        cg_singular(
            |x, y| {
                y.iter_mut().zip(&diag).zip(x).for_each(|((y, d), x)| *y = d * x);
                for &(i, j, a) in &entries {
                    y[i] -= a * x[j];
                    y[j] -= a * x[i];
                }
            },
            &diag,
            &g,
            &mut delta,
            1e-11,
            20 * n + 100,
        );
        let g0 = norm(&m);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(&delta).map(|(w, d)| w + t * d).collect();
            let tc = diagram.cells(&trial);
            let tm = masses(&tc);
            let min_m = tm.iter().cloned().fold(f64::INFINITY, f64::min);
            if min_m >= eps0 && norm(&tm) <= (1.0 - 0.5 * t) * g0 {
                w = trial;
                cells = tc;
                m = tm;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::Solver("Laguerre line search failed".into()));
            }
        }
    }
    let primal = rho * cells.iter().map(|c| c.moment).sum::<f64>();
    let dual = primal + w.iter().zip(&m).map(|(w, m)| w * (1.0 - m)).sum::<f64>();
    Ok(LaguerreSolution {
        primal,
        dual,
        max_mass_error: maxerr(&m),
    })
}

/// Off-diagonal entries `(i, j, a)` (each pair possibly split over several
/// entries) and the diagonal of the mass Jacobian.
fn hessian(points: &[Point], cells: &[Cell], rho: f64) -> (Vec<(usize, usize, f64)>, Vec<f64>) {
    let mut entries = Vec::new();
    let mut diag = vec![0.0; points.len()];
    for (i, c) in cells.iter().enumerate() {
        for &(j, len) in &c.edges {
            // Each shared edge is seen from both sides; average them.
            let a = 0.5 * rho * len / (2.0 * dist2(points[i], points[j]).sqrt());
            entries.push((i, j, a));
            diag[i] += a;
            diag[j] += a;
        }
    }
    (entries, diag)
}
