//! Uniform bucket grid for neighbour queries on planar point clouds.

use crate::point_process::Point;

#[derive(Debug, Clone)]
pub(crate) struct BucketGrid {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    /// `start[b]..start[b + 1]` indexes `items` for bucket `b`.
    start: Vec<usize>,
    items: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Ring {
    Bucket(usize, usize),
    End(f64),
}

#[inline]
pub(crate) fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

impl BucketGrid {
    /// Buckets sized for roughly `per_bucket` points each.
    pub fn new(points: &[Point], per_bucket: f64) -> BucketGrid {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in points {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        if points.is_empty() {
            (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
        }
        let w = (x1 - x0).max(1e-12);
        let h = (y1 - y0).max(1e-12);
        let n = points.len().max(1) as f64;
        let cell = ((w * h * per_bucket / n).sqrt()).max(1e-9);
        let nx = ((w / cell).floor() as usize + 1).min(1 << 14);
        let ny = ((h / cell).floor() as usize + 1).min(1 << 14);
        let cell = cell.max(w / nx as f64).max(h / ny as f64);
        let mut g = BucketGrid {
            x0,
            y0,
            cell,
            nx,
            ny,
            start: vec![0; nx * ny + 1],
            items: vec![0; points.len()],
        };
        let keys: Vec<usize> = points.iter().map(|p| g.bucket_of(*p)).collect();
        for &k in &keys {
            g.start[k + 1] += 1;
        }
        for b in 0..nx * ny {
            g.start[b + 1] += g.start[b];
        }
        let mut fill = g.start.clone();
        for (idx, &k) in keys.iter().enumerate() {
            g.items[fill[k]] = idx;
            fill[k] += 1;
        }
        g
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    fn coords(&self, p: Point) -> (usize, usize) {
        let bx = ((p[0] - self.x0) / self.cell).floor().max(0.0) as usize;
        let by = ((p[1] - self.y0) / self.cell).floor().max(0.0) as usize;
        (bx.min(self.nx - 1), by.min(self.ny - 1))
    }

    #[inline]
    fn bucket_of(&self, p: Point) -> usize {
        let (bx, by) = self.coords(p);
        by * self.nx + bx
    }

    #[inline]
    pub fn bucket(&self, bx: usize, by: usize) -> &[usize] {
        let b = by * self.nx + bx;
        &self.items[self.start[b]..self.start[b + 1]]
    }

    /// Squared distance from `p` to the closed rectangle of bucket `(bx, by)`.
    #[inline]
    pub fn bucket_dist2(&self, p: Point, bx: usize, by: usize) -> f64 {
        let lx = self.x0 + bx as f64 * self.cell;
        let ly = self.y0 + by as f64 * self.cell;
        let dx = (lx - p[0]).max(0.0).max(p[0] - lx - self.cell);
        let dy = (ly - p[1]).max(0.0).max(p[1] - ly - self.cell);
        dx * dx + dy * dy
    }

    /// Visits buckets ring by ring around `p`, calling `f(Ring::Bucket(..))`
    /// for every bucket of Chebyshev ring `k` and then `f(Ring::End(reach))`,
    /// which stops the walk by returning `true`. Points in rings beyond `k`
    /// are at distance at least `reach = k * cell` from `p`. The return value
    /// is ignored for buckets.
    pub fn rings<F>(&self, p: Point, mut f: F)
    where
        F: FnMut(Ring) -> bool,
    {
        let (cx, cy) = self.coords(p);
        let (cx, cy) = (cx as isize, cy as isize);
        let max_ring = self.nx.max(self.ny) as isize;
        for k in 0..=max_ring {
            let (lo_x, hi_x) = (cx - k, cx + k);
            let (lo_y, hi_y) = (cy - k, cy + k);
            for by in lo_y..=hi_y {
                if by < 0 || by >= self.ny as isize {
                    continue;
                }
                let edge_row = by == lo_y || by == hi_y;
                let mut bx = lo_x;
                while bx <= hi_x {
                    if bx >= 0 && bx < self.nx as isize {
                        f(Ring::Bucket(bx as usize, by as usize));
                    }
                    bx += if edge_row || k == 0 { 1 } else { 2 * k };
                }
            }
            if f(Ring::End(k as f64 * self.cell)) {
                return;
            }
        }
    }

    /// Indices of the `k` nearest points to `p` (fewer if the cloud is
    /// smaller), nearest first. Ties broken by index.
    pub fn knn(&self, points: &[Point], p: Point, k: usize) -> Vec<usize> {
        let k = k.min(points.len());
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.rings(p, |step| match step {
            Ring::Bucket(bx, by) => {
                for &idx in self.bucket(bx, by) {
                    let d = dist2(points[idx], p);
                    if best.len() < k || (d, idx) < *best.last().unwrap() {
                        let pos = best.partition_point(|e| *e < (d, idx));
                        best.insert(pos, (d, idx));
                        best.truncate(k);
                    }
                }
                false
            }
            Ring::End(reach) => best.len() == k && best.last().map_or(true, |b| b.0 <= reach * reach),
        });
        best.into_iter().map(|(_, i)| i).collect()
    }
}
