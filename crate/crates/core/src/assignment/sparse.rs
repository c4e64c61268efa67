//! Exact assignment for large geometric instances.
//!
//! The problem is first solved on a sparse candidate graph (k nearest
//! neighbours in both directions) by successive shortest augmenting paths
//! with Dijkstra and reduced costs. The resulting potentials are then checked
//! against *every* pair; pairs with negative reduced cost are added to the
//! graph and the solve is repeated. On exit the potentials certify global
//! optimality on the complete bipartite graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::point_process::Point;
use crate::spatial::{dist2, BucketGrid, Ring};

#[derive(Debug, Clone, Copy)]
struct HeapItem {
    d: f64,
    col: u32,
}

impl PartialEq for HeapItem {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for HeapItem {
    // Min-heap on (d, col).
    fn cmp(&self, o: &Self) -> Ordering {
        o.d.total_cmp(&self.d).then(o.col.cmp(&self.col))
    }
}

const FREE: usize = usize::MAX;

/// Row adjacency lists (column, cost), kept sorted by column.
struct Graph {
    rows: Vec<Vec<(u32, f64)>>,
}

impl Graph {
    fn add(&mut self, i: usize, cols: impl IntoIterator<Item = usize>, costf: &dyn Fn(usize, usize) -> f64) {
        let r = &mut self.rows[i];
        for j in cols {
            if let Err(pos) = r.binary_search_by_key(&(j as u32), |e| e.0) {
                r.insert(pos, (j as u32, costf(i, j)));
            }
        }
    }
}

/// Successive shortest augmenting paths (Dijkstra on reduced costs) with
/// column potentials `v`; row potentials are implicit. Invariant: every
/// matched row has non-negative reduced cost on all its arcs and zero on its
/// matched arc.
struct Ssp {
    row_of_col: Vec<usize>,
    col_of_row: Vec<usize>,
    match_cost: Vec<f64>,
    v: Vec<f64>,
    dist: Vec<f64>,
    pred: Vec<usize>,
    done: Vec<bool>,
    touched: Vec<usize>,
    finished: Vec<usize>,
    heap: BinaryHeap<HeapItem>,
}

impl Ssp {
    /// Column reduction followed by greedy matching on tight arcs.
    fn new(n: usize, g: &Graph) -> Ssp {
        let mut v = vec![f64::INFINITY; n];
        for r in &g.rows {
            for &(j, c) in r {
                let j = j as usize;
                if c < v[j] {
                    v[j] = c;
                }
            }
        }
        for x in v.iter_mut() {
            if !x.is_finite() {
                *x = 0.0;
            }
        }
        let mut s = Ssp {
            row_of_col: vec![FREE; n],
            col_of_row: vec![FREE; n],
            match_cost: vec![0.0; n],
            v,
            dist: vec![f64::INFINITY; n],
            pred: vec![FREE; n],
            done: vec![false; n],
            touched: Vec::new(),
            finished: Vec::new(),
            heap: BinaryHeap::new(),
        };
        for (i, r) in g.rows.iter().enumerate() {
            let mut best = (f64::INFINITY, FREE, 0.0);
            for &(j, c) in r {
                let red = c - s.v[j as usize];
                if red < best.0 {
                    best = (red, j as usize, c);
                }
            }
            let j = best.1;
            if j != FREE && s.row_of_col[j] == FREE {
                s.row_of_col[j] = i;
                s.col_of_row[i] = j;
                s.match_cost[i] = best.2;
            }
        }
        s
    }

    fn unmatch(&mut self, i: usize) {
        let j = self.col_of_row[i];
        if j != FREE {
            self.row_of_col[j] = FREE;
            self.col_of_row[i] = FREE;
        }
    }

    fn reset(&mut self) {
        for &k in &self.touched {
            self.dist[k] = f64::INFINITY;
            self.pred[k] = FREE;
            self.done[k] = false;
        }
        self.touched.clear();
        self.finished.clear();
        self.heap.clear();
    }

    /// Augments from the free row `f`; `false` if no free column is
    /// reachable (state unchanged).
    fn augment(&mut self, f: usize, g: &Graph) -> bool {
        for &(j, c) in &g.rows[f] {
            let j = j as usize;
            let d = c - self.v[j];
            if d < self.dist[j] {
                if self.dist[j] == f64::INFINITY {
                    self.touched.push(j);
                }
                self.dist[j] = d;
                self.pred[j] = f;
                self.heap.push(HeapItem { d, col: j as u32 });
            }
        }
        let mut sink = FREE;
        while let Some(HeapItem { d, col }) = self.heap.pop() {
            let j = col as usize;
            if self.done[j] || d > self.dist[j] {
                continue;
            }
            self.done[j] = true;
            self.finished.push(j);
            let i = self.row_of_col[j];
            if i == FREE {
                sink = j;
                break;
            }
            // Reduced cost of the matched arc (i, j) is zero.
            let base = d - (self.match_cost[i] - self.v[j]);
            for &(k, c) in &g.rows[i] {
                let k = k as usize;
                if self.done[k] {
                    continue;
                }
                let nd = base + (c - self.v[k]);
                if nd < self.dist[k] {
                    if self.dist[k] == f64::INFINITY {
                        self.touched.push(k);
                    }
                    self.dist[k] = nd;
                    self.pred[k] = i;
                    self.heap.push(HeapItem { d: nd, col: k as u32 });
                }
            }
        }
        if sink == FREE {
            self.reset();
            return false;
        }
        let dsink = self.dist[sink];
        for &k in &self.finished {
            self.v[k] += self.dist[k] - dsink;
        }
        let mut j = sink;
        loop {
            let i = self.pred[j];
            let prev = self.col_of_row[i];
            self.row_of_col[j] = i;
            self.col_of_row[i] = j;
            let pos = g.rows[i]
                .binary_search_by_key(&(j as u32), |e| e.0)
                .expect("path arc is in the graph");
            self.match_cost[i] = g.rows[i][pos].1;
            if i == f {
                break;
            }
            j = prev;
        }
        self.reset();
        true
    }
}

pub(crate) struct SparseSolution {
    pub sigma: Vec<usize>,
}

/// Exact min-cost perfect matching between `a` and `b` under the cost
/// `phi(|a_i - b_j|^2)`, `phi` non-decreasing.
pub(crate) fn solve(a: &[Point], b: &[Point], phi: &dyn Fn(f64) -> f64, k0: usize) -> Result<SparseSolution> {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    let costf = |i: usize, j: usize| phi(dist2(a[i], b[j]));
    let grid_b = BucketGrid::new(b, 4.0);
    let grid_a = BucketGrid::new(a, 4.0);
    let k0 = k0.max(1).min(n);
    let mut g = Graph {
        rows: vec![Vec::new(); n],
    };
    for i in 0..n {
        g.add(i, grid_b.knn(b, a[i], k0), &costf);
    }
    for j in 0..n {
        for i in grid_a.knn(a, b[j], k0) {
            g.add(i, [j], &costf);
        }
    }
    // Pairing equal ranks along a space-filling curve puts one perfect
    // matching into the graph, so augmentation cannot get stuck.
    let (ra, rb) = (hilbert_order(a), hilbert_order(b));
    for (&i, &j) in ra.iter().zip(&rb) {
        g.add(i, [j], &costf);
    }
    let mut row_k = vec![k0; n];
    let mut ssp = Ssp::new(n, &g);
    loop {
        for f in 0..n {
            while ssp.col_of_row[f] == FREE && !ssp.augment(f, &g) {
                // No free column reachable: widen this row's neighbourhood.
                if row_k[f] >= n {
                    return Err(Error::Solver("assignment graph has no perfect matching".into()));
                }
                row_k[f] = (2 * row_k[f]).min(n);
                g.add(f, grid_b.knn(b, a[f], row_k[f]), &costf);
            }
        }
        let v = ssp.v.clone();
        let sigma = ssp.col_of_row.clone();
        let u: Vec<f64> = (0..n).map(|i| ssp.match_cost[i] - v[sigma[i]]).collect();
        let violations = find_violations(a, b, &grid_b, phi, &u, &v);
        if violations.is_empty() {
            return Ok(SparseSolution { sigma });
        }
        for (i, j) in violations {
            g.add(i, [j], &costf);
            ssp.unmatch(i);
        }
    }
}

/// Indices sorted by position along a Hilbert curve over the bounding box.
fn hilbert_order(p: &[Point]) -> Vec<usize> {
    const BITS: u32 = 16;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for q in p {
        x0 = x0.min(q[0]);
        y0 = y0.min(q[1]);
        x1 = x1.max(q[0]);
        y1 = y1.max(q[1]);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-300);
    let side = (1u64 << BITS) as f64;
    let key = |q: &Point| -> u64 {
        let mut x = (((q[0] - x0) / span * side) as u64).min((1 << BITS) - 1);
        let mut y = (((q[1] - y0) / span * side) as u64).min((1 << BITS) - 1);
        let mut d = 0u64;
        let mut s = 1u64 << (BITS - 1);
        while s > 0 {
            let rx = u64::from(x & s > 0);
            let ry = u64::from(y & s > 0);
            d += s * s * ((3 * rx) ^ ry);
            if ry == 0 {
                if rx == 1 {
                    x = (1 << BITS) - 1 - x;
                    y = (1 << BITS) - 1 - y;
                }
                std::mem::swap(&mut x, &mut y);
            }
            s >>= 1;
        }
        d
    };
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by_key(|&i| (key(&p[i]), i));
    idx
}

/// Pairs with reduced cost below `-tol`, at most a few per row. A bucket of
/// targets is skipped when even its nearest corner and largest potential
/// cannot produce a negative reduced cost.
fn find_violations(
    a: &[Point],
    b: &[Point],
    grid: &BucketGrid,
    phi: &dyn Fn(f64) -> f64,
    u: &[f64],
    v: &[f64],
) -> Vec<(usize, usize)> {
    let scale = u.iter().chain(v).fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-10 * scale;
    let (nx, ny) = grid.dims();
    let mut vmax = vec![f64::NEG_INFINITY; nx * ny];
    for by in 0..ny {
        for bx in 0..nx {
            for &j in grid.bucket(bx, by) {
                vmax[by * nx + bx] = vmax[by * nx + bx].max(v[j]);
            }
        }
    }
    let vglobal = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    let mut row: Vec<(f64, usize)> = Vec::new();
    for (i, &ai) in a.iter().enumerate() {
        row.clear();
        let limit = u[i] - tol;
        grid.rings(ai, |step| match step {
            Ring::Bucket(bx, by) => {
                if phi(grid.bucket_dist2(ai, bx, by)) >= limit + vmax[by * nx + bx] {
                    return false;
                }
                for &j in grid.bucket(bx, by) {
                    let r = phi(dist2(ai, b[j])) - u[i] - v[j];
                    if r < -tol {
                        row.push((r, j));
                    }
                }
                false
            }
            Ring::End(reach) => phi(reach * reach) >= limit + vglobal,
        });
        row.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        out.extend(row.iter().take(8).map(|&(_, j)| (i, j)));
    }
    out
}
