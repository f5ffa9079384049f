//! Closed planar contours: tracing, resampling, arc length and interchange formats.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{polygon_moments, twice_signed_area, Vec2};
use crate::raster::Mask;

/// Minimum vertex count for registration inputs.
pub const MIN_POINTS: usize = 16;

/// Ordered closed polygon, counter-clockwise, closure implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    id: String,
    points: Vec<Vec2>,
}

impl Contour {
    /// Builds a contour, dropping repeated vertices and a duplicated closing vertex,
    /// and reversing clockwise input.
    pub fn new(id: impl Into<String>, points: Vec<Vec2>) -> Result<Self> {
        let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
        for p in points {
            if !p.is_finite() {
                return Err(Error::InvalidContour("non-finite vertex".into()));
            }
            if pts.last().is_none_or(|q: &Vec2| q.dist(p) > 1e-12) {
                pts.push(p);
            }
        }
        while pts.len() > 1 && pts[0].dist(pts[pts.len() - 1]) <= 1e-12 {
            pts.pop();
        }
        if pts.len() < 3 {
            return Err(Error::TooFewPoints { got: pts.len(), min: 3 });
        }
        let area2 = twice_signed_area(&pts);
        if area2 == 0.0 {
            return Err(Error::InvalidContour("zero enclosed area".into()));
        }
        if area2 < 0.0 {
            pts.reverse();
        }
        Ok(Self { id: id.into(), points: pts })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Closed polygon perimeter.
    pub fn arc_length(&self) -> f64 {
        arc_length(&self.points)
    }

    pub fn signed_area(&self) -> f64 {
        twice_signed_area(&self.points) / 2.0
    }

    /// Area centroid.
    pub fn centroid(&self) -> Vec2 {
        polygon_moments(&self.points).0
    }

    /// Centroid and central second moments (σxx, σyy, σxy) of the enclosed region.
    pub fn moments(&self) -> (Vec2, [f64; 3]) {
        polygon_moments(&self.points)
    }

    /// Per-vertex trapezoidal arc-length weights.
    pub fn vertex_weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.points)
    }

    pub fn bounds(&self) -> (Vec2, Vec2) {
        bounds(&self.points)
    }

    /// Applies `f` to every vertex.
    pub fn map(&self, f: impl Fn(Vec2) -> Vec2) -> Result<Contour> {
        Contour::new(self.id.clone(), self.points.iter().map(|&p| f(p)).collect())
    }

    pub fn translated(&self, d: Vec2) -> Contour {
        Contour { id: self.id.clone(), points: self.points.iter().map(|&p| p + d).collect() }
    }

    /// Rotation by `angle` about `center`.
    pub fn rotated(&self, angle: f64, center: Vec2) -> Contour {
        Contour {
            id: self.id.clone(),
            points: self.points.iter().map(|&p| (p - center).rotate(angle) + center).collect(),
        }
    }

    /// Scaling by `(a, b)` about `center`.
    pub fn scaled(&self, a: f64, b: f64, center: Vec2) -> Result<Contour> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::DegenerateScale);
        }
        Ok(Contour {
            id: self.id.clone(),
            points: self
                .points
                .iter()
                .map(|&p| {
                    let d = p - center;
                    Vec2::new(center.x + a * d.x, center.y + b * d.y)
                })
                .collect(),
        })
    }

    /// Maps every point `(x, y)` to `((1+da)x, (1+db)y)` about the centroid.
    pub fn apply_scale(&self, da: f64, db: f64) -> Result<Contour> {
        self.scaled(1.0 + da, 1.0 + db, self.centroid())
    }

    /// `n` vertices with equal chord lengths, starting at the first vertex.
    pub fn resample(&self, n: usize) -> Result<Contour> {
        if n < 3 {
            return Err(Error::TooFewPoints { got: n, min: 3 });
        }
        Ok(Contour { id: self.id.clone(), points: equal_chord_resample(&self.points, n) })
    }

    /// Gaussian smoothing along arc length with standard deviation `sigma` (same units
    /// as the coordinates). The result has roughly unit spacing.
    pub fn smoothed(&self, sigma: f64) -> Result<Contour> {
        if sigma <= 0.0 {
            return Ok(self.clone());
        }
        let len = self.arc_length();
        let n = (len.ceil() as usize).max(MIN_POINTS);
        let pts = equal_chord_resample(&self.points, n);
        let step = len / n as f64;
        let s = sigma / step;
        let half = ((3.0 * s).ceil() as usize).min(n / 2);
        let kernel: Vec<f64> = (0..=half).map(|k| (-0.5 * (k as f64 / s).powi(2)).exp()).collect();
        let norm = kernel[0] + 2.0 * kernel[1..].iter().sum::<f64>();
        let out = (0..n)
            .map(|i| {
                let mut acc = pts[i] * kernel[0];
                for (k, &w) in kernel.iter().enumerate().skip(1) {
                    acc += (pts[(i + k) % n] + pts[(i + n - k % n) % n]) * w;
                }
                acc * (1.0 / norm)
            })
            .collect();
        Contour::new(self.id.clone(), out)
    }

    /// Periodic cubic spline through the vertices (uniform parameter), subdivided so
    /// that no output edge exceeds `max_edge`.
    pub fn spline_densified(&self, max_edge: f64) -> Vec<Vec2> {
        spline_densify(&self.points, max_edge)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{}", sig9(p.x), sig9(p.y));
        }
        s
    }

    pub fn from_csv(id: impl Into<String>, text: &str) -> Result<Contour> {
        let mut pts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.eq_ignore_ascii_case("x,y")) {
                continue;
            }
            let mut it = line.split(',').map(|t| t.trim().parse::<f64>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => pts.push(Vec2::new(x, y)),
                _ => {
                    return Err(Error::Parse {
                        path: Default::default(),
                        msg: format!("line {}: expected `x,y`", lineno + 1),
                    })
                }
            }
        }
        Contour::new(id, pts)
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<String> = self.points.iter().map(|p| format!("[{},{}]", sig9(p.x), sig9(p.y))).collect();
        format!("[{}]", rows.join(","))
    }

    pub fn from_json(id: impl Into<String>, text: &str) -> Result<Contour> {
        let pts: Vec<[f64; 2]> = serde_json::from_str(text)?;
        Contour::new(id, pts.into_iter().map(Vec2::from).collect())
    }

    /// Reads `.csv` or `.json` contour files.
    pub fn load(path: &Path) -> Result<Contour> {
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let text = std::fs::read_to_string(path)?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let res = match ext.as_str() {
            "json" => Contour::from_json(id, &text),
            _ => Contour::from_csv(id, &text),
        };
        res.map_err(|e| match e {
            Error::Parse { msg, .. } => Error::Parse { path: path.to_path_buf(), msg },
            Error::Json(j) => Error::Parse { path: path.to_path_buf(), msg: j.to_string() },
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let text = if ext == "json" { self.to_json() } else { self.to_csv() };
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Rounds to 9 significant digits and prints the shortest exact representation.
fn sig9(v: f64) -> String {
    let r: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r}")
}

pub fn arc_length(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| pts[i].dist(pts[(i + 1) % n])).sum()
}

pub fn trapezoid_weights(pts: &[Vec2]) -> Vec<f64> {
    let n = pts.len();
    (0..n)
        .map(|i| 0.5 * (pts[i].dist(pts[(i + n - 1) % n]) + pts[i].dist(pts[(i + 1) % n])))
        .collect()
}

pub fn bounds(pts: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

/// Cursor on a closed polyline; `seg` is unbounded so laps can be counted.
#[derive(Clone, Copy)]
struct Cursor {
    seg: usize,
    t: f64,
}

struct Polyline<'a> {
    pts: &'a [Vec2],
    cum: Vec<f64>,
}

impl<'a> Polyline<'a> {
    fn new(pts: &'a [Vec2]) -> Self {
        let n = pts.len();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for i in 0..n {
            cum.push(cum[i] + pts[i].dist(pts[(i + 1) % n]));
        }
        Self { pts, cum }
    }

    fn total(&self) -> f64 {
        self.cum[self.pts.len()]
    }

    fn seg(&self, k: usize) -> (Vec2, Vec2) {
        let n = self.pts.len();
        (self.pts[k % n], self.pts[(k + 1) % n])
    }

    fn at(&self, c: Cursor) -> Vec2 {
        let (a, b) = self.seg(c.seg);
        a.lerp(b, c.t)
    }

    fn param(&self, c: Cursor) -> f64 {
        let n = self.pts.len();
        let laps = (c.seg / n) as f64;
        let k = c.seg % n;
        laps * self.total() + self.cum[k] + c.t * (self.cum[k + 1] - self.cum[k])
    }

    /// First point forward of `c` at Euclidean distance `s` from `at(c)`.
    fn next_chord(&self, c: Cursor, s: f64) -> Cursor {
        let p = self.at(c);
        let n = self.pts.len();
        let s2 = s * s;
        let mut seg = c.seg;
        let mut t0 = c.t;
        for _ in 0..=2 * n {
            let (a, b) = self.seg(seg);
            let d = b - a;
            let dd = d.norm2();
            if dd > 0.0 && (b - p).norm2() >= s2 {
                // |a + t d - p|^2 = s^2, largest root is the exit point of the disc
                let w = a - p;
                let bq = w.dot(d);
                let cq = w.norm2() - s2;
                let disc = (bq * bq - dd * cq).max(0.0);
                let t = ((-bq + disc.sqrt()) / dd).clamp(t0, 1.0);
                return Cursor { seg, t };
            }
            seg += 1;
            t0 = 0.0;
        }
        Cursor { seg, t: 0.0 }
    }
}

fn walk(poly: &Polyline, s: f64, n: usize) -> (Vec<Vec2>, f64) {
    let mut c = Cursor { seg: 0, t: 0.0 };
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(poly.at(c));
        c = poly.next_chord(c, s);
    }
    (out, poly.param(c))
}

/// Equal-chord resampling: `n` points, chord length chosen so that the walk closes.
pub fn equal_chord_resample(pts: &[Vec2], n: usize) -> Vec<Vec2> {
    let poly = Polyline::new(pts);
    let total = poly.total();
    let mut hi = total / n as f64;
    let mut lo = 0.5 * hi;
    while walk(&poly, lo, n).1 >= total && lo > 1e-9 * hi {
        lo *= 0.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if walk(&poly, mid, n).1 < total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // `hi` closes the loop, `lo` leaves the last chord slightly long; pick the closer walk.
    let (a, ua) = walk(&poly, lo, n);
    let (b, ub) = walk(&poly, hi, n);
    if (ua - total).abs() <= (ub - total).abs() {
        a
    } else {
        b
    }
}

/// Periodic cubic spline interpolation with uniform knots.
pub fn spline_densify(pts: &[Vec2], max_edge: f64) -> Vec<Vec2> {
    let n = pts.len();
    let rhs: Vec<Vec2> = (0..n).map(|i| (pts[(i + 1) % n] - pts[i] * 2.0 + pts[(i + n - 1) % n]) * 6.0).collect();
    // M[i-1] + 4 M[i] + M[i+1] = rhs[i]; diagonally dominant, Gauss-Seidel converges fast
    let mut m = vec![Vec2::ZERO; n];
    for _ in 0..200 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let v = (rhs[i] - m[(i + n - 1) % n] - m[(i + 1) % n]) * 0.25;
            delta = delta.max((v - m[i]).norm());
            m[i] = v;
        }
        if delta < 1e-13 {
            break;
        }
    }
    let longest = (0..n).map(|i| pts[i].dist(pts[(i + 1) % n])).fold(0.0, f64::max);
    let k = ((longest / max_edge).ceil() as usize).max(1) + 1;
    let mut out = Vec::with_capacity(n * k);
    for i in 0..n {
        let (p0, p1) = (pts[i], pts[(i + 1) % n]);
        let (m0, m1) = (m[i], m[(i + 1) % n]);
        for j in 0..k {
            let t = j as f64 / k as f64;
            let u = 1.0 - t;
            out.push(p0 * u + p1 * t + m0 * ((u * u * u - u) / 6.0) + m1 * ((t * t * t - t) / 6.0));
        }
    }
    out
}

/// Cells of the largest 8-connected foreground component (ties: first in raster order).
pub fn largest_component(mask: &Mask) -> Result<Mask> {
    let (w, h) = (mask.width, mask.height);
    let mut label = vec![u32::MAX; w * h];
    let mut best: Option<(usize, u32)> = None;
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.data[start] || label[start] != u32::MAX {
            continue;
        }
        let mut size = 0usize;
        label[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if mask.get_i(nx, ny) {
                        let j = ny as usize * w + nx as usize;
                        if label[j] == u32::MAX {
                            label[j] = next;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        if best.is_none_or(|(s, _)| size > s) {
            best = Some((size, next));
        }
        next += 1;
    }
    let (_, keep) = best.ok_or(Error::EmptyMask)?;
    Ok(Mask { width: w, height: h, data: label.iter().map(|&l| l == keep).collect() })
}

// clockwise in image coordinates (y down), starting west
const MOORE: [(isize, isize); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

/// Moore-neighbour boundary of the largest 8-connected component, as pixel centres.
pub fn trace_contour(mask: &Mask) -> Result<Contour> {
    let comp = largest_component(mask)?;
    let w = comp.width;
    let start = comp.data.iter().position(|&v| v).ok_or(Error::EmptyMask)?;
    let s = ((start % w) as isize, (start / w) as isize);
    let mut boundary = vec![s];
    // enter s from the west (background by raster order); stop when s repeats its first move
    let (mut c, mut back) = (s, 0usize);
    let limit = 4 * comp.width * comp.height;
    loop {
        let Some(dir) = (1..=8).map(|k| (back + k) % 8).find(|&d| comp.get_i(c.0 + MOORE[d].0, c.1 + MOORE[d].1))
        else {
            break; // isolated pixel
        };
        let prev = (dir + 7) % 8;
        let (bx, by) = (c.0 + MOORE[prev].0, c.1 + MOORE[prev].1);
        let next = (c.0 + MOORE[dir].0, c.1 + MOORE[dir].1);
        back = MOORE.iter().position(|&d| d == (bx - next.0, by - next.1)).unwrap_or(0);
        if boundary.len() > 1 && c == s && next == boundary[1] {
            boundary.pop();
            break;
        }
        if boundary.len() > limit {
            break;
        }
        boundary.push(next);
        c = next;
    }
    let cells = boundary.len();
    if cells < MIN_POINTS {
        return Err(Error::TooSmall { cells });
    }
    let pts = boundary.iter().map(|&(x, y)| Vec2::new(x as f64, y as f64)).collect();
    Contour::new("traced", pts)
}

/// Traces, smooths and resamples in one step; the usual image-to-contour path.
pub fn contour_from_mask(mask: &Mask, sigma: f64, n: usize) -> Result<Contour> {
    trace_contour(mask)?.smoothed(sigma)?.resample(n)
}

/// A document: symbol label → ordered instance contours.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub instances: BTreeMap<String, Vec<Contour>>,
}

impl Document {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), instances: BTreeMap::new() }
    }

    pub fn count(&self, symbol: &str) -> usize {
        self.instances.get(symbol).map_or(0, |v| v.len())
    }
}
