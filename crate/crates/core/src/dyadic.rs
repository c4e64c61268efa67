//! Dyadic squares over a root box of power-of-two side, their count
//! statistics, the density stopping scale and the stopped partition.
//!
//! Cubes are addressed relative to the lower-left corner of the owning
//! [`PointSet`] box. The smallest side is 1; half-unit squares never appear.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point_process::{sample_poisson, Point, PointSet, Rect, RngStream};
use crate::stats::MeanEstimate;

/// Lower and upper end of the admissible density window, both inclusive.
pub const DENSITY_LO: f64 = 0.5;
pub const DENSITY_HI: f64 = 2.0;

#[inline]
pub fn density_in_window(n: f64) -> bool {
    (DENSITY_LO..=DENSITY_HI).contains(&n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub root: u32,
    pub side: u32,
    pub i: u32,
    pub j: u32,
}

impl DyadicCube {
    pub fn root(root: u32) -> Result<Self> {
        check_root(root)?;
        Ok(DyadicCube {
            root,
            side: root,
            i: 0,
            j: 0,
        })
    }

    pub fn new(root: u32, side: u32, i: u32, j: u32) -> Result<Self> {
        check_root(root)?;
        if !side.is_power_of_two() || side > root {
            return Err(Error::invalid(format!("side {side} is not a dyadic side of root {root}")));
        }
        let per = root / side;
        if i >= per || j >= per {
            return Err(Error::invalid(format!("index ({i}, {j}) outside level of side {side}")));
        }
        Ok(DyadicCube { root, side, i, j })
    }

    /// 0 for the root, increasing towards finer cubes.
    pub fn level(&self) -> u32 {
        (self.root / self.side).trailing_zeros()
    }

    pub fn area(&self) -> f64 {
        let s = self.side as f64;
        s * s
    }

    pub fn per_side(&self) -> u32 {
        self.root / self.side
    }

    pub fn is_unit(&self) -> bool {
        self.side == 1
    }

    /// The four children in the order lower-left, lower-right, upper-left,
    /// upper-right; `None` for unit cubes.
    pub fn children(&self) -> Option<[DyadicCube; 4]> {
        if self.side == 1 {
            return None;
        }
        let side = self.side / 2;
        let (i, j) = (2 * self.i, 2 * self.j);
        let c = |i, j| DyadicCube {
            root: self.root,
            side,
            i,
            j,
        };
        Some([c(i, j), c(i + 1, j), c(i, j + 1), c(i + 1, j + 1)])
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        (self.side < self.root).then(|| DyadicCube {
            root: self.root,
            side: self.side * 2,
            i: self.i / 2,
            j: self.j / 2,
        })
    }

    /// Lower-left corner in root-local coordinates.
    pub fn corner(&self) -> Point {
        [(self.i * self.side) as f64, (self.j * self.side) as f64]
    }

    pub fn rect(&self, origin: Point) -> Rect {
        let c = self.corner();
        let s = self.side as f64;
        Rect {
            x0: origin[0] + c[0],
            y0: origin[1] + c[1],
            x1: origin[0] + c[0] + s,
            y1: origin[1] + c[1] + s,
        }
    }

    /// Closed-open membership of a root-local point.
    #[inline]
    pub fn contains_local(&self, p: Point) -> bool {
        let c = self.corner();
        let s = self.side as f64;
        p[0] >= c[0] && p[0] < c[0] + s && p[1] >= c[1] && p[1] < c[1] + s
    }

    /// The cube of side `side` containing the root-local point `p`.
    pub fn containing(root: u32, side: u32, p: Point) -> DyadicCube {
        let per = root / side;
        let s = side as f64;
        let idx = |v: f64| ((v / s).floor().max(0.0) as u32).min(per - 1);
        DyadicCube {
            root,
            side,
            i: idx(p[0]),
            j: idx(p[1]),
        }
    }

    pub fn is_ancestor_of(&self, other: &DyadicCube) -> bool {
        if self.root != other.root || self.side <= other.side {
            return false;
        }
        let k = self.side / other.side;
        other.i / k == self.i && other.j / k == self.j
    }
}

fn check_root(root: u32) -> Result<()> {
    if root == 0 || !root.is_power_of_two() {
        return Err(Error::invalid(format!("root side {root} is not a power of 2")));
    }
    Ok(())
}

/// Dyadic root side of a point set's box, if the box is a square of
/// power-of-two side.
pub fn root_side(ps: &PointSet) -> Result<u32> {
    let b = ps.bbox();
    let w = b.width();
    if (w - b.height()).abs() > 0.0 || w < 1.0 || w.fract() != 0.0 || w > u32::MAX as f64 {
        return Err(Error::invalid(format!("box {b} is not a dyadic square")));
    }
    let r = w as u32;
    check_root(r)?;
    Ok(r)
}

fn local(ps: &PointSet, p: Point) -> Point {
    let b = ps.bbox();
    [p[0] - b.x0, p[1] - b.y0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeStats {
    pub mu_count: usize,
    /// Number density `mu_count / |Q|`.
    pub density: f64,
    /// Right-half count minus left-half count.
    pub half_diff: i64,
}

/// Exact counts for a single cube by direct scan.
pub fn cube_stats(ps: &PointSet, q: &DyadicCube) -> Result<CubeStats> {
    let b = ps.bbox();
    let side = q.root as f64;
    if b.width() < side || b.height() < side {
        return Err(Error::invalid(format!("cube {q:?} does not fit in box {b}")));
    }
    let c = q.corner();
    let mid = c[0] + 0.5 * q.side as f64;
    let (mut count, mut diff) = (0usize, 0i64);
    for &p in ps.points() {
        let l = local(ps, p);
        if q.contains_local(l) {
            count += 1;
            diff += if l[0] >= mid { 1 } else { -1 };
        }
    }
    Ok(CubeStats {
        mu_count: count,
        density: count as f64 / q.area(),
        half_diff: diff,
    })
}

/// Counts and half-differences for every dyadic cube of side >= 1.
#[derive(Debug, Clone)]
pub struct CountTree {
    root: u32,
    /// `counts[l]` for level `l` (side `root >> l`), row-major in `(j, i)`.
    counts: Vec<Vec<u32>>,
    half_diff: Vec<Vec<i64>>,
}

impl CountTree {
    pub fn build(ps: &PointSet) -> Result<CountTree> {
        let root = root_side(ps)?;
        let levels = root.trailing_zeros() as usize + 1;
        let r = root as usize;
        // Half-unit columns: x bin of width 1/2, y bin of width 1.
        let mut halves = vec![0u32; 2 * r * r];
        for &p in ps.points() {
            let l = local(ps, p);
            let hx = ((2.0 * l[0]).floor().max(0.0) as usize).min(2 * r - 1);
            let hy = (l[1].floor().max(0.0) as usize).min(r - 1);
            halves[hy * 2 * r + hx] += 1;
        }
        let mut counts = vec![Vec::new(); levels];
        let mut half_diff = vec![Vec::new(); levels];
        let finest = levels - 1;
        let mut c = vec![0u32; r * r];
        let mut d = vec![0i64; r * r];
        for j in 0..r {
            for i in 0..r {
                let lft = halves[j * 2 * r + 2 * i];
                let rgt = halves[j * 2 * r + 2 * i + 1];
                c[j * r + i] = lft + rgt;
                d[j * r + i] = rgt as i64 - lft as i64;
            }
        }
        counts[finest] = c;
        half_diff[finest] = d;
        for l in (0..finest).rev() {
            let per = 1usize << l;
            let fine = &counts[l + 1];
            let fper = 2 * per;
            let mut c = vec![0u32; per * per];
            let mut d = vec![0i64; per * per];
            for j in 0..per {
                for i in 0..per {
                    let ll = fine[2 * j * fper + 2 * i];
                    let lr = fine[2 * j * fper + 2 * i + 1];
                    let ul = fine[(2 * j + 1) * fper + 2 * i];
                    let ur = fine[(2 * j + 1) * fper + 2 * i + 1];
                    c[j * per + i] = ll + lr + ul + ur;
                    d[j * per + i] = (lr + ur) as i64 - (ll + ul) as i64;
                }
            }
            counts[l] = c;
            half_diff[l] = d;
        }
        Ok(CountTree {
            root,
            counts,
            half_diff,
        })
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn levels(&self) -> usize {
        self.counts.len()
    }

    fn slot(&self, q: &DyadicCube) -> (usize, usize) {
        debug_assert_eq!(q.root, self.root);
        let l = q.level() as usize;
        let per = q.per_side() as usize;
        (l, q.j as usize * per + q.i as usize)
    }

    pub fn count(&self, q: &DyadicCube) -> u32 {
        let (l, k) = self.slot(q);
        self.counts[l][k]
    }

    pub fn half_diff(&self, q: &DyadicCube) -> i64 {
        let (l, k) = self.slot(q);
        self.half_diff[l][k]
    }

    pub fn density(&self, q: &DyadicCube) -> f64 {
        self.count(q) as f64 / q.area()
    }

    pub fn stats(&self, q: &DyadicCube) -> CubeStats {
        CubeStats {
            mu_count: self.count(q) as usize,
            density: self.density(q),
            half_diff: self.half_diff(q),
        }
    }

    /// All cubes of one level, row-major.
    pub fn level_cubes(&self, level: usize) -> impl Iterator<Item = DyadicCube> + '_ {
        let side = self.root >> level;
        let per = self.root / side;
        let root = self.root;
        (0..per).flat_map(move |j| (0..per).map(move |i| DyadicCube { root, side, i, j }))
    }

    /// One JSON object per cube: `level, i, j, count, n_Q, N_Q`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for level in 0..self.levels() {
            for q in self.level_cubes(level) {
                let row = serde_json::json!({
                    "level": level,
                    "i": q.i,
                    "j": q.j,
                    "count": self.count(&q),
                    "n_Q": self.density(&q),
                    "N_Q": self.half_diff(&q),
                });
                writeln!(w, "{row}")?;
            }
        }
        w.flush()
    }

    /// Stopping scale at a root-local point, from the tree.
    pub fn stopping_scale_local(&self, x: Point) -> StopScale {
        let mut side = self.root;
        loop {
            let q = DyadicCube::containing(self.root, side, x);
            if !density_in_window(self.density(&q)) {
                return StopScale::from_violation(self.root, side);
            }
            if side == 1 {
                return StopScale::Side(1);
            }
            side /= 2;
        }
    }
}

/// Value of the stopping scale `r*` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopScale {
    /// `r* <= R`: twice the largest violating side, or 1 if none violates.
    Side(u32),
    /// The root square itself leaves the density window, so `r* = 2R`.
    ExceedsRoot,
}

impl StopScale {
    fn from_violation(root: u32, side: u32) -> StopScale {
        if side == root {
            StopScale::ExceedsRoot
        } else {
            StopScale::Side(2 * side)
        }
    }

    /// Numeric value, with `2R` standing in for the sentinel.
    pub fn value(&self, root: u32) -> f64 {
        match *self {
            StopScale::Side(s) => s as f64,
            StopScale::ExceedsRoot => 2.0 * root as f64,
        }
    }
}

/// `r*(x) = 2 sup { side of dyadic Q containing x with n_Q outside [1/2, 2] }`,
/// floored at 1, over cubes of the root box only.
pub fn stopping_scale(ps: &PointSet, x: Point) -> Result<StopScale> {
    let root = root_side(ps)?;
    if !ps.bbox().contains(x) {
        return Err(Error::invalid(format!("point ({}, {}) outside root box", x[0], x[1])));
    }
    let lx = local(ps, x);
    // Count the nested chain directly, coarse to fine.
    let mut side = root;
    loop {
        let q = DyadicCube::containing(root, side, lx);
        let n = ps
            .points()
            .iter()
            .filter(|p| q.contains_local(local(ps, **p)))
            .count();
        if !density_in_window(n as f64 / q.area()) {
            return Ok(StopScale::from_violation(root, side));
        }
        if side == 1 {
            return Ok(StopScale::Side(1));
        }
        side /= 2;
    }
}

/// The stopped partition `{Q*}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedPartition {
    pub root: u32,
    /// Partition cubes in depth-first order.
    pub cubes: Vec<DyadicCube>,
    /// Root density outside the window; `cubes` is then empty.
    pub overflow: bool,
    /// Cubes strictly coarser than the partition (the subdivided ones),
    /// parents before children.
    pub interior: Vec<DyadicCube>,
}

impl StoppedPartition {
    pub fn total_area(&self) -> f64 {
        self.cubes.iter().map(DyadicCube::area).sum()
    }

    /// The partition cube containing a root-local point.
    pub fn cube_at(&self, x: Point) -> Option<DyadicCube> {
        self.cubes.iter().copied().find(|q| q.contains_local(x))
    }

    /// Piecewise-constant scale field: side of the partition cube at `x`.
    pub fn scale_at(&self, x: Point) -> StopScale {
        match self.cube_at(x) {
            Some(q) => StopScale::Side(q.side),
            None => StopScale::ExceedsRoot,
        }
    }
}

/// Greedy top-down subdivision: a cube is kept once one of its children
/// leaves the density window (or it has unit side), otherwise it is split.
pub fn build_partition(ps: &PointSet) -> Result<StoppedPartition> {
    let tree = CountTree::build(ps)?;
    Ok(partition_from_tree(&tree))
}

pub fn partition_from_tree(tree: &CountTree) -> StoppedPartition {
    let root = DyadicCube {
        root: tree.root(),
        side: tree.root(),
        i: 0,
        j: 0,
    };
    let mut out = StoppedPartition {
        root: tree.root(),
        cubes: Vec::new(),
        overflow: false,
        interior: Vec::new(),
    };
    if !density_in_window(tree.density(&root)) {
        out.overflow = true;
        return out;
    }
    let mut stack = vec![root];
    while let Some(q) = stack.pop() {
        match q.children() {
            Some(kids) if kids.iter().all(|c| density_in_window(tree.density(c))) => {
                out.interior.push(q);
                // Reverse so the lower-left child is processed first.
                stack.extend(kids.iter().rev());
            }
            _ => out.cubes.push(q),
        }
    }
    out
}

/// Monte Carlo estimate of `E[r*(x)^4]` at the centre of `[0, R)^2`.
pub fn r_star_fourth_moment(
    intensity: f64,
    root: u32,
    replicates: usize,
    stream: &RngStream,
) -> Result<MeanEstimate> {
    if replicates == 0 {
        return Err(Error::invalid("replicates must be >= 1"));
    }
    check_root(root)?;
    let bbox = Rect::square(root as f64)?;
    let centre = bbox.center();
    let mut values = Vec::with_capacity(replicates);
    for k in 0..replicates {
        let ps = sample_poisson(&bbox, intensity, &stream.child(k))?;
        let tree = CountTree::build(&ps)?;
        let r = tree.stopping_scale_local(centre).value(root);
        values.push(r.powi(4));
    }
    Ok(MeanEstimate::from_samples(&values))
}

/// Fourth moment of the scale for a fixed configuration, evaluated on every
/// unit cell centre (used for deterministic inputs).
pub fn r_star_fourth_moment_of(ps: &PointSet) -> Result<f64> {
    let tree = CountTree::build(ps)?;
    let r = tree.root();
    let mut acc = 0.0;
    for j in 0..r {
        for i in 0..r {
            let x = [i as f64 + 0.5, j as f64 + 0.5];
            acc += tree.stopping_scale_local(x).value(r).powi(4);
        }
    }
    Ok(acc / (r as f64 * r as f64))
}
