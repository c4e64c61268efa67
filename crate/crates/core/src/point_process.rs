//! Poisson and binomial point clouds on axis-aligned boxes.
//!
//! Every sampler draws from an [`RngStream`], a `(seed, label)` pair that is
//! hashed into a ChaCha key. Distinct labels give independent streams and the
//! same pair always reproduces the same bits, so Monte Carlo replicates can be
//! generated in any order (or concurrently) without changing results.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Axis-aligned box with the closed-open membership convention
/// `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let r = Rect { x0, y0, x1, y1 };
        r.validate()?;
        Ok(r)
    }

    /// The square `[0, side)^2`.
    pub fn square(side: f64) -> Result<Self> {
        Rect::new(0.0, 0.0, side, side)
    }

    /// The square `[-half, half)^2`.
    pub fn centered(half: f64) -> Result<Self> {
        Rect::new(-half, -half, half, half)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x0, self.y0, self.x1, self.y1]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.x0 < self.x1) || !(self.y0 < self.y1) {
            return Err(Error::invalid(format!("degenerate box {self}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x0 && p[0] < self.x1 && p[1] >= self.y0 && p[1] < self.y1
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    pub fn center(&self) -> Point {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}) x [{}, {})", self.x0, self.x1, self.y0, self.y1)
    }
}

/// A reproducible random stream identified by a master seed and a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    label: String,
}

impl RngStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        RngStream {
            seed,
            label: label.into(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Derived stream `label/sub`.
    pub fn child(&self, sub: impl fmt::Display) -> Self {
        RngStream {
            seed: self.seed,
            label: format!("{}/{}", self.label, sub),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update((self.label.len() as u64).to_le_bytes());
        h.update(self.label.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

/// Provenance carried along with a point set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// A finite set of planar points inside an owning box, kept in lexicographic
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Point>,
    bbox: Rect,
    meta: SampleMeta,
}

fn lex(a: &Point, b: &Point) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

impl PointSet {
    /// Builds a set from explicit coordinates; every point must lie in `bbox`.
    pub fn new(mut points: Vec<Point>, bbox: Rect) -> Result<Self> {
        bbox.validate()?;
        if let Some(p) = points.iter().find(|p| !bbox.contains(**p)) {
            return Err(Error::invalid(format!(
                "point ({}, {}) outside box {bbox}",
                p[0], p[1]
            )));
        }
        points.sort_by(lex);
        Ok(PointSet {
            points,
            bbox,
            meta: SampleMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: SampleMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn empty(bbox: Rect) -> Result<Self> {
        PointSet::new(Vec::new(), bbox)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn bbox(&self) -> &Rect {
        &self.bbox
    }

    pub fn meta(&self) -> &SampleMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number density `count / area` of the owning box.
    pub fn density(&self) -> f64 {
        self.len() as f64 / self.bbox.area()
    }

    pub fn count_in(&self, r: &Rect) -> usize {
        self.points.iter().filter(|p| r.contains(**p)).count()
    }

    /// Points inside `r`; the result is owned by `r`.
    pub fn restrict(&self, r: &Rect) -> Result<PointSet> {
        r.validate()?;
        let points: Vec<Point> = self.points.iter().copied().filter(|p| r.contains(*p)).collect();
        let mut meta = self.meta.clone();
        meta.notes.push(format!("restricted to {r}"));
        Ok(PointSet {
            points,
            bbox: *r,
            meta,
        })
    }

    /// Writes the `x,y` CSV body with 17 significant digits per coordinate.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y")?;
        for p in &self.points {
            writeln!(w, "{:.16e},{:.16e}", p[0], p[1])?;
        }
        w.flush()
    }

    pub fn read_csv<R: BufRead>(r: R, bbox: Rect, origin: &Path) -> Result<PointSet> {
        let parse_err = |line: usize, msg: &str| Error::Parse {
            path: origin.to_path_buf(),
            msg: format!("line {line}: {msg}"),
        };
        let mut points = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            let line = line.trim();
            if k == 0 {
                if line != "x,y" {
                    return Err(parse_err(1, "expected header `x,y`"));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (x, y) = line
                .split_once(',')
                .ok_or_else(|| parse_err(k + 1, "expected two columns"))?;
            let x: f64 = x.trim().parse().map_err(|_| parse_err(k + 1, "bad x"))?;
            let y: f64 = y.trim().parse().map_err(|_| parse_err(k + 1, "bad y"))?;
            points.push([x, y]);
        }
        PointSet::new(points, bbox)
    }

    /// Sidecar path used by [`save`](Self::save): `points.csv` -> `points.json`.
    pub fn sidecar_path(csv: &Path) -> PathBuf {
        csv.with_extension("json")
    }

    /// Writes the CSV file and its JSON metadata sidecar.
    pub fn save(&self, csv: &Path) -> Result<()> {
        let f = fs::File::create(csv).map_err(|e| Error::io(csv, e))?;
        self.write_csv(BufWriter::new(f)).map_err(|e| Error::io(csv, e))?;
        let side = PointSet::sidecar_path(csv);
        let json = serde_json::to_string_pretty(&Sidecar {
            bbox: self.bbox,
            meta: self.meta.clone(),
        })?;
        fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
    }

    /// Reads a set written by [`save`](Self::save).
    pub fn load(csv: &Path) -> Result<PointSet> {
        let side = PointSet::sidecar_path(csv);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: side.clone(),
            msg: e.to_string(),
        })?;
        let f = fs::File::open(csv).map_err(|e| Error::io(csv, e))?;
        Ok(PointSet::read_csv(BufReader::new(f), sidecar.bbox, csv)?.with_meta(sidecar.meta))
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    #[serde(rename = "box")]
    bbox: Rect,
    #[serde(flatten)]
    meta: SampleMeta,
}

fn uniform_points<R: Rng>(bbox: &Rect, n: usize, rng: &mut R) -> Vec<Point> {
    (0..n)
        .map(|_| {
            let x = rng.random_range(bbox.x0..bbox.x1);
            let y = rng.random_range(bbox.y0..bbox.y1);
            [x, y]
        })
        .collect()
}

/// Poisson point process of the given intensity on `bbox`.
pub fn sample_poisson(bbox: &Rect, intensity: f64, stream: &RngStream) -> Result<PointSet> {
    bbox.validate()?;
    if !intensity.is_finite() || intensity < 0.0 {
        return Err(Error::invalid(format!("intensity must be finite and >= 0, got {intensity}")));
    }
    let mut rng = stream.rng();
    let mean = intensity * bbox.area();
    let count = if mean > 0.0 {
        let d = Poisson::new(mean).map_err(|e| Error::invalid(e.to_string()))?;
        d.sample(&mut rng) as usize
    } else {
        0
    };
    let points = uniform_points(bbox, count, &mut rng);
    let meta = SampleMeta {
        seed: Some(stream.seed()),
        label: Some(stream.label().to_string()),
        intensity: Some(intensity),
        count: None,
        notes: Vec::new(),
    };
    Ok(PointSet::new(points, *bbox)?.with_meta(meta))
}

/// Exactly `n` i.i.d. uniform points on `bbox` (the count-conditioned process).
pub fn sample_uniform_n(bbox: &Rect, n: usize, stream: &RngStream) -> Result<PointSet> {
    bbox.validate()?;
    let mut rng = stream.rng();
    let points = uniform_points(bbox, n, &mut rng);
    let meta = SampleMeta {
        seed: Some(stream.seed()),
        label: Some(stream.label().to_string()),
        intensity: None,
        count: Some(n),
        notes: Vec::new(),
    };
    Ok(PointSet::new(points, *bbox)?.with_meta(meta))
}

/// A Poisson sample `mu` and an independent uniform sample `nu` with the
/// same number of points, drawn from the sub-streams `mu` and `nu`.
pub fn sample_conditioned_pair(bbox: &Rect, intensity: f64, stream: &RngStream) -> Result<(PointSet, PointSet)> {
    let mu = sample_poisson(bbox, intensity, &stream.child("mu"))?;
    let nu = sample_uniform_n(bbox, mu.len(), &stream.child("nu"))?;
    Ok((mu, nu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Rect {
        Rect::square(1.0).unwrap()
    }

    #[test]
    fn degenerate_boxes_are_rejected() {
        assert!(Rect::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(Rect::new(0.0, 0.0, 1.0, f64::NAN).is_err());
        assert!(Rect::new(1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn zero_intensity_is_empty() {
        let ps = sample_poisson(&unit(), 0.0, &RngStream::new(1, "mu")).unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn bad_intensity_is_rejected() {
        let s = RngStream::new(1, "mu");
        assert!(sample_poisson(&unit(), f64::INFINITY, &s).is_err());
        assert!(sample_poisson(&unit(), f64::NAN, &s).is_err());
        assert!(sample_poisson(&unit(), -1.0, &s).is_err());
    }

    #[test]
    fn uniform_n_zero_is_empty() {
        let ps = sample_uniform_n(&unit(), 0, &RngStream::new(1, "mu")).unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn streams_are_deterministic_and_label_sensitive() {
        let b = Rect::square(8.0).unwrap();
        let a1 = sample_poisson(&b, 1.0, &RngStream::new(7, "mu")).unwrap();
        let a2 = sample_poisson(&b, 1.0, &RngStream::new(7, "mu")).unwrap();
        let c = sample_poisson(&b, 1.0, &RngStream::new(7, "nu")).unwrap();
        assert_eq!(a1, a2);
        assert_ne!(a1.points(), c.points());
        assert_eq!(
            RngStream::new(7, "mu").child(3),
            RngStream::new(7, "mu/3")
        );
    }

    #[test]
    fn points_are_sorted_and_inside() {
        let b = Rect::new(-2.0, 1.0, 3.0, 4.0).unwrap();
        let ps = sample_poisson(&b, 3.0, &RngStream::new(11, "x")).unwrap();
        assert!(ps.points().windows(2).all(|w| lex(&w[0], &w[1]).is_le()));
        assert!(ps.points().iter().all(|p| b.contains(*p)));
    }

    #[test]
    fn restrict_superset_and_disjoint() {
        let b = Rect::square(4.0).unwrap();
        let ps = sample_poisson(&b, 2.0, &RngStream::new(3, "mu")).unwrap();
        let same = ps.restrict(&Rect::new(-1.0, -1.0, 5.0, 5.0).unwrap()).unwrap();
        assert_eq!(same.points(), ps.points());
        let none = ps.restrict(&Rect::new(10.0, 10.0, 11.0, 11.0).unwrap()).unwrap();
        assert!(none.is_empty());
        assert!(none.meta().notes.iter().any(|n| n.contains("restricted")));
    }

    #[test]
    fn restrict_uses_closed_open_convention() {
        // Left half of [0,2)^2 is [0,1) x [0,2): x = 1 belongs to the right half.
        let b = Rect::square(2.0).unwrap();
        let ps = PointSet::new(vec![[0.5, 0.5], [1.0, 1.0], [1.5, 0.0]], b).unwrap();
        let left = ps.restrict(&Rect::new(0.0, 0.0, 1.0, 2.0).unwrap()).unwrap();
        let right = ps.restrict(&Rect::new(1.0, 0.0, 2.0, 2.0).unwrap()).unwrap();
        assert_eq!(left.points(), &[[0.5, 0.5]]);
        assert_eq!(right.points(), &[[1.0, 1.0], [1.5, 0.0]]);
    }

    #[test]
    fn point_outside_box_is_rejected() {
        let b = Rect::square(1.0).unwrap();
        assert!(PointSet::new(vec![[1.0, 0.5]], b).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mu.csv");
        let b = Rect::square(16.0).unwrap();
        let ps = sample_poisson(&b, 1.0, &RngStream::new(5, "mu")).unwrap();
        ps.save(&path).unwrap();
        let back = PointSet::load(&path).unwrap();
        assert_eq!(back, ps);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y\n"));
        let side: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(path.with_extension("json")).unwrap()).unwrap();
        assert_eq!(side["seed"], 5);
        assert_eq!(side["label"], "mu");
        assert_eq!(side["box"]["x1"], 16.0);
    }
}
