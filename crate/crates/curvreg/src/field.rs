//! Implicit representation of a reference curve and the differential quantities on it.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contour::{trapezoid_weights, Contour};
use crate::error::{Error, Result};
use crate::geom::{segment_distance, Vec2};
use crate::raster::Mask;

/// Samples with μ² below this are treated as medial-axis points.
pub const MU2_MIN: f64 = 0.25;

/// Scalar grid. Cell `(i, j)` sits at `origin + spacing·(i, j)`.
///
/// Fields from [`distance_transform`] are unsigned. Fields from [`curve_field`] are
/// signed (negative inside the curve); `|value|` is then the Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
    pub origin: Vec2,
    pub values: Vec<f64>,
    pub signed: bool,
}

/// Differential sample of a field at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSample {
    pub position: Vec2,
    pub gradient: Vec2,
    pub mu2: f64,
    pub curvature: f64,
    pub g_a: f64,
    pub g_b: f64,
    pub valid: bool,
}

impl PointSample {
    /// Unit normal ∇F/μ.
    pub fn normal(&self) -> Vec2 {
        self.gradient * (1.0 / self.mu2.sqrt())
    }
}

impl ScalarField {
    pub fn from_fn(width: usize, height: usize, spacing: f64, origin: Vec2, f: impl Fn(Vec2) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                values.push(f(origin + Vec2::new(i as f64, j as f64) * spacing));
            }
        }
        Self { width, height, spacing, origin, values, signed: true }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64, j as f64) * self.spacing
    }

    /// Continuous grid coordinates of a world point.
    pub fn to_grid(&self, p: Vec2) -> (f64, f64) {
        ((p.x - self.origin.x) / self.spacing, (p.y - self.origin.y) / self.spacing)
    }

    /// Bilinear lookup; `None` outside the grid.
    pub fn sample(&self, p: Vec2) -> Option<f64> {
        let (u, v) = self.to_grid(p);
        let (wm, hm) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if !(u >= 0.0 && v >= 0.0 && u <= wm && v <= hm) {
            return None;
        }
        // u, v are non-negative here, so truncation is floor
        let i = (u as usize).min(self.width - 2);
        let j = (v as usize).min(self.height - 2);
        let (fx, fy) = (u - i as f64, v - j as f64);
        let row = j * self.width + i;
        let (a, b) = (self.values[row], self.values[row + 1]);
        let (c, d) = (self.values[row + self.width], self.values[row + self.width + 1]);
        Some((a * (1.0 - fx) + b * fx) * (1.0 - fy) + (c * (1.0 - fx) + d * fx) * fy)
    }

    /// Distance to the zero isocontour at `p`.
    pub fn distance(&self, p: Vec2) -> Option<f64> {
        self.sample(p).map(f64::abs)
    }

    /// Whether the finite-difference stencil at `p` stays two cells inside the grid.
    pub fn interior(&self, p: Vec2) -> bool {
        let (u, v) = self.to_grid(p);
        u >= 2.0 && v >= 2.0 && u <= (self.width - 3) as f64 && v <= (self.height - 3) as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Writes a 16-bit P5 PGM (values scaled linearly to 0–65535) and a JSON sidecar
    /// `<path>.json` with min/max/spacing/origin.
    pub fn export_pgm(&self, path: &Path) -> Result<()> {
        let (lo, hi) = self.min_max();
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut buf = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        for &v in &self.values {
            let q = (((v - lo) / span) * 65535.0).round().clamp(0.0, 65535.0) as u16;
            buf.extend_from_slice(&q.to_be_bytes());
        }
        std::fs::write(path, buf)?;
        let side = FieldSidecar {
            width: self.width,
            height: self.height,
            min: lo,
            max: hi,
            spacing: self.spacing,
            origin: [self.origin.x, self.origin.y],
            signed: self.signed,
        };
        let mut side_path = path.as_os_str().to_owned();
        side_path.push(".json");
        std::fs::write(side_path, serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub width: usize,
    pub height: usize,
    pub min: f64,
    pub max: f64,
    pub spacing: f64,
    pub origin: [f64; 2],
    pub signed: bool,
}

/// 1-D lower envelope of parabolas (Felzenszwalb–Huttenlocher). `f[q]` is `None` for
/// non-sites. Writes squared distances and the index of the nearest site.
fn envelope_1d(f: &[Option<f64>], d: &mut [f64], arg: &mut [usize], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for (q, fq) in f.iter().enumerate() {
        let Some(fq) = *fq else { continue };
        let qf = q as f64;
        while let Some(&p) = v.last() {
            let fp = f[p].unwrap();
            let pf = p as f64;
            let s = ((fq + qf * qf) - (fp + pf * pf)) / (2.0 * (qf - pf));
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                z.push(s);
                break;
            }
        }
        if v.is_empty() {
            v.push(q);
            z.push(f64::NEG_INFINITY);
        }
    }
    if v.is_empty() {
        d.fill(f64::INFINITY);
        arg.fill(usize::MAX);
        return;
    }
    let mut k = 0;
    for q in 0..f.len() {
        let qf = q as f64;
        while k + 1 < v.len() && z[k + 1] < qf {
            k += 1;
        }
        let p = v[k];
        d[q] = (qf - p as f64).powi(2) + f[p].unwrap();
        arg[q] = p;
    }
}

/// Exact squared Euclidean distance to the nearest `true` cell and its flat index.
pub(crate) fn feature_transform(width: usize, height: usize, sites: &[bool]) -> (Vec<f64>, Vec<usize>) {
    let n = width.max(height);
    let (mut v, mut z) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut col_d = vec![0.0; width * height];
    let mut col_arg = vec![0usize; width * height];
    let mut f = vec![None; height];
    let mut d = vec![0.0; height];
    let mut arg = vec![0usize; height];
    for i in 0..width {
        for j in 0..height {
            f[j] = if sites[j * width + i] { Some(0.0) } else { None };
        }
        envelope_1d(&f, &mut d, &mut arg, &mut v, &mut z);
        for j in 0..height {
            col_d[j * width + i] = d[j];
            col_arg[j * width + i] = arg[j];
        }
    }
    let mut out_d = vec![0.0; width * height];
    let mut out_arg = vec![0usize; width * height];
    let mut f = vec![None; width];
    let mut d = vec![0.0; width];
    let mut arg = vec![0usize; width];
    for j in 0..height {
        let row = j * width;
        for i in 0..width {
            let c = col_d[row + i];
            f[i] = c.is_finite().then_some(c);
        }
        envelope_1d(&f, &mut d, &mut arg, &mut v, &mut z);
        for i in 0..width {
            out_d[row + i] = d[i];
            let x = arg[i];
            out_arg[row + i] = if x == usize::MAX { usize::MAX } else { col_arg[row + x] * width + x };
        }
    }
    (out_d, out_arg)
}

/// Exact Euclidean distance (grid units) from every cell to the nearest foreground cell.
pub fn distance_transform(mask: &Mask) -> Result<ScalarField> {
    if mask.width < 3 || mask.height < 3 {
        return Err(Error::GridTooSmall { width: mask.width, height: mask.height });
    }
    if !mask.data.iter().any(|&b| b) {
        return Err(Error::EmptyMask);
    }
    let (d2, _) = feature_transform(mask.width, mask.height, &mask.data);
    Ok(ScalarField {
        width: mask.width,
        height: mask.height,
        spacing: 1.0,
        origin: Vec2::ZERO,
        values: d2.into_iter().map(f64::sqrt).collect(),
        signed: false,
    })
}

/// Signed distance field of a closed curve over the axis-aligned box `[lo, hi]`.
///
/// The curve is interpolated by a periodic cubic spline and distances are exact with
/// respect to that spline's fine polyline. Values are negative inside.
pub fn curve_field(curve: &Contour, lo: Vec2, hi: Vec2, spacing: f64) -> Result<ScalarField> {
    let width = ((hi.x - lo.x) / spacing).ceil() as usize + 1;
    let height = ((hi.y - lo.y) / spacing).ceil() as usize + 1;
    if width < 3 || height < 3 {
        return Err(Error::GridTooSmall { width, height });
    }
    let dense = curve.spline_densified(0.25 * spacing);
    let n = dense.len();
    let origin = lo;
    let cell_of = |p: Vec2| -> usize {
        let i = ((p.x - origin.x) / spacing).round().clamp(0.0, (width - 1) as f64) as usize;
        let j = ((p.y - origin.y) / spacing).round().clamp(0.0, (height - 1) as f64) as usize;
        j * width + i
    };
    // segment lists per seed cell (intrusive linked list)
    let mut head = vec![u32::MAX; width * height];
    let mut next = vec![u32::MAX; n];
    let mut sites = vec![false; width * height];
    for k in 0..n {
        let mid = dense[k].lerp(dense[(k + 1) % n], 0.5);
        let c = cell_of(mid);
        next[k] = head[c];
        head[c] = k as u32;
        sites[c] = true;
    }
    let (_, nearest) = feature_transform(width, height, &sites);
    let mut values = vec![0.0; width * height];
    for j in 0..height {
        for i in 0..width {
            let idx = j * width + i;
            let p = origin + Vec2::new(i as f64, j as f64) * spacing;
            let s = nearest[idx];
            let (si, sj) = ((s % width) as isize, (s / width) as isize);
            let seg = |k: usize| segment_distance(p, dense[k], dense[(k + 1) % n]);
            let (mut best, mut best_k) = (f64::INFINITY, 0);
            for dj in -2..=2 {
                for di in -2..=2 {
                    let (ci, cj) = (si + di, sj + dj);
                    if ci < 0 || cj < 0 || ci as usize >= width || cj as usize >= height {
                        continue;
                    }
                    let mut k = head[cj as usize * width + ci as usize];
                    while k != u32::MAX {
                        let ku = k as usize;
                        let d = seg(ku);
                        if d < best {
                            (best, best_k) = (d, ku);
                        }
                        k = next[ku];
                    }
                }
            }
            // far from a flat stretch the foot point can lie outside the window; walk the
            // chain downhill from the best segment found
            for step in [1, n - 1] {
                let mut k = best_k;
                loop {
                    let kn = (k + step) % n;
                    let d = seg(kn);
                    if d >= best {
                        break;
                    }
                    (best, k) = (d, kn);
                }
            }
            values[idx] = best;
        }
    }
    // sign by even-odd scanline crossings
    let mut crossings: Vec<Vec<f64>> = vec![Vec::new(); height];
    for k in 0..n {
        let (a, b) = (dense[k], dense[(k + 1) % n]);
        let (va, vb) = ((a.y - origin.y) / spacing, (b.y - origin.y) / spacing);
        let (lo_v, hi_v) = if va < vb { (va, vb) } else { (vb, va) };
        let j0 = lo_v.ceil().max(0.0) as usize;
        let mut j = j0;
        while (j as f64) < hi_v && j < height {
            let t = (j as f64 - va) / (vb - va);
            crossings[j].push((a.x + t * (b.x - a.x) - origin.x) / spacing);
            j += 1;
        }
    }
    for (j, xs) in crossings.iter_mut().enumerate() {
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let i0 = pair[0].ceil().max(0.0) as usize;
            let i1 = pair[1].floor().min((width - 1) as f64);
            if i1 < 0.0 {
                continue;
            }
            for i in i0..=(i1 as usize) {
                if (i as f64) > pair[0] && (i as f64) < pair[1] {
                    values[j * width + i] = -values[j * width + i];
                }
            }
        }
    }
    Ok(ScalarField { width, height, spacing, origin, values, signed: true })
}

/// Central differences with step one cell on the bilinear interpolant.
pub fn gradient_hessian(field: &ScalarField, p: Vec2) -> Result<(Vec2, [[f64; 2]; 2])> {
    if !field.interior(p) {
        return Err(Error::OutOfBounds { x: p.x, y: p.y });
    }
    let h = field.spacing;
    let f = |dx: f64, dy: f64| field.sample(p + Vec2::new(dx * h, dy * h)).unwrap();
    let f0 = f(0.0, 0.0);
    let (fe, fw, fn_, fs) = (f(1.0, 0.0), f(-1.0, 0.0), f(0.0, 1.0), f(0.0, -1.0));
    let fx = (fe - fw) / (2.0 * h);
    let fy = (fn_ - fs) / (2.0 * h);
    let fxx = (fe - 2.0 * f0 + fw) / (h * h);
    let fyy = (fn_ - 2.0 * f0 + fs) / (h * h);
    let fxy = (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0)) / (4.0 * h * h);
    Ok((Vec2::new(fx, fy), [[fxx, fxy], [fxy, fyy]]))
}

/// Plane curvature and scale sensitivities from a gradient and Hessian.
pub fn sample_from_derivatives(position: Vec2, g: Vec2, hess: [[f64; 2]; 2]) -> PointSample {
    let mu2 = g.norm2();
    let g_a = 3.0 * g.x * g.x - 2.0 * mu2;
    let g_b = 3.0 * g.y * g.y - 2.0 * mu2;
    if !(mu2 >= MU2_MIN) {
        return PointSample { position, gradient: g, mu2, curvature: 0.0, g_a, g_b, valid: false };
    }
    // (J∇F)ᵀ H (J∇F) with J∇F = (fy, −fx)
    let (fx, fy) = (g.x, g.y);
    let num = fy * fy * hess[0][0] - 2.0 * fx * fy * hess[0][1] + fx * fx * hess[1][1];
    let curvature = num / (mu2 * mu2.sqrt());
    PointSample { position, gradient: g, mu2, curvature, g_a, g_b, valid: true }
}

pub fn plane_curvature(field: &ScalarField, p: Vec2) -> Result<PointSample> {
    let (g, h) = gradient_hessian(field, p)?;
    Ok(sample_from_derivatives(p, g, h))
}

/// [`plane_curvature`] at grid node `(i, j)`, reading node values directly; `None` when
/// the node is not interior.
pub fn node_curvature(field: &ScalarField, i: usize, j: usize) -> Option<PointSample> {
    let (w, h) = (field.width, field.height);
    if i < 2 || j < 2 || i + 3 > w || j + 3 > h {
        return None;
    }
    let v = |di: isize, dj: isize| field.values[(j as isize + dj) as usize * w + (i as isize + di) as usize];
    let s = field.spacing;
    let f0 = v(0, 0);
    let (fe, fw, fn_, fs) = (v(1, 0), v(-1, 0), v(0, 1), v(0, -1));
    let g = Vec2::new((fe - fw) / (2.0 * s), (fn_ - fs) / (2.0 * s));
    let fxx = (fe - 2.0 * f0 + fw) / (s * s);
    let fyy = (fn_ - 2.0 * f0 + fs) / (s * s);
    let fxy = (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1)) / (4.0 * s * s);
    Some(sample_from_derivatives(field.node(i, j), g, [[fxx, fxy], [fxy, fyy]]))
}

/// Closed isocontours at `level` by marching squares with linear interpolation.
pub fn isocontours(field: &ScalarField, level: f64) -> Vec<Vec<Vec2>> {
    let (w, h) = (field.width, field.height);
    // edge keys: 2*(j*w+i) horizontal (i,j)-(i+1,j); +1 vertical (i,j)-(i,j+1)
    let mut points: HashMap<usize, Vec2> = HashMap::new();
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    let above = |i: usize, j: usize| field.at(i, j) > level;
    let mut crossing = |key: usize, a: (usize, usize), b: (usize, usize)| {
        points.entry(key).or_insert_with(|| {
            let (va, vb) = (field.at(a.0, a.1), field.at(b.0, b.1));
            let t = (level - va) / (vb - va);
            field.node(a.0, a.1).lerp(field.node(b.0, b.1), t)
        });
        key
    };
    for j in 0..h - 1 {
        for i in 0..w - 1 {
            let c = [above(i, j), above(i + 1, j), above(i + 1, j + 1), above(i, j + 1)];
            let case = c[0] as u8 | (c[1] as u8) << 1 | (c[2] as u8) << 2 | (c[3] as u8) << 3;
            if case == 0 || case == 15 {
                continue;
            }
            let bottom = 2 * (j * w + i);
            let top = 2 * ((j + 1) * w + i);
            let left = 2 * (j * w + i) + 1;
            let right = 2 * (j * w + i + 1) + 1;
            let mut edges = Vec::with_capacity(4);
            if c[0] != c[1] {
                edges.push(crossing(bottom, (i, j), (i + 1, j)));
            }
            if c[1] != c[2] {
                edges.push(crossing(right, (i + 1, j), (i + 1, j + 1)));
            }
            if c[2] != c[3] {
                edges.push(crossing(top, (i, j + 1), (i + 1, j + 1)));
            }
            if c[3] != c[0] {
                edges.push(crossing(left, (i, j), (i, j + 1)));
            }
            let segs: Vec<(usize, usize)> = if edges.len() == 2 {
                vec![(edges[0], edges[1])]
            } else {
                // saddle: edges are [bottom, right, top, left]; decide by the centre value
                let centre = 0.25 * (field.at(i, j) + field.at(i + 1, j) + field.at(i + 1, j + 1) + field.at(i, j + 1));
                let centre_above = centre > level;
                if centre_above == c[0] {
                    vec![(edges[0], edges[1]), (edges[2], edges[3])]
                } else {
                    vec![(edges[0], edges[3]), (edges[1], edges[2])]
                }
            };
            for (a, b) in segs {
                adj.entry(a).or_default().push(b);
                adj.entry(b).or_default().push(a);
            }
        }
    }
    let mut keys: Vec<usize> = adj.keys().copied().collect();
    keys.sort_unstable();
    let mut used: HashMap<usize, bool> = HashMap::new();
    let mut loops = Vec::new();
    for &start in &keys {
        if used.contains_key(&start) {
            continue;
        }
        let mut chain = vec![start];
        used.insert(start, true);
        let mut prev = usize::MAX;
        let mut cur = start;
        let closed = loop {
            let nbrs = &adj[&cur];
            match nbrs.iter().copied().find(|&k| k != prev && !used.contains_key(&k)) {
                Some(k) => {
                    used.insert(k, true);
                    chain.push(k);
                    prev = cur;
                    cur = k;
                }
                None => break chain.len() > 2 && nbrs.contains(&start),
            }
        };
        if closed {
            loops.push(chain.iter().map(|k| points[k]).collect());
        }
    }
    loops
}

/// ∮ C dl along a closed polyline, skipping invalid samples with weight renormalization.
pub fn curvature_line_integral(field: &ScalarField, pts: &[Vec2]) -> Result<f64> {
    let w = trapezoid_weights(pts);
    let (mut acc, mut w_valid, mut w_all) = (0.0, 0.0, 0.0);
    for (p, &wi) in pts.iter().zip(&w) {
        let s = plane_curvature(field, *p)?;
        w_all += wi;
        if s.valid {
            acc += wi * s.curvature;
            w_valid += wi;
        }
    }
    if w_valid < 0.5 * w_all || w_valid == 0.0 {
        return Err(Error::AllSamplesInvalid);
    }
    Ok(acc * w_all / w_valid)
}

/// The isocontour loop at `isolevel` nearest to `curve`.
pub fn nearest_isocontour(field: &ScalarField, curve: &Contour, isolevel: f64) -> Result<Vec<Vec2>> {
    let (_, hi) = field.min_max();
    if isolevel > hi {
        return Err(Error::NoIsocontour { level: isolevel });
    }
    let loops = isocontours(field, isolevel);
    let cpts = curve.points();
    let m = cpts.len();
    let mean_dist = |lp: &[Vec2]| -> f64 {
        let step = (lp.len() / 64).max(1);
        let mut s = 0.0;
        let mut k = 0.0;
        for p in lp.iter().step_by(step) {
            let d = (0..m).map(|i| segment_distance(*p, cpts[i], cpts[(i + 1) % m])).fold(f64::INFINITY, f64::min);
            s += d;
            k += 1.0;
        }
        s / k
    };
    let best = loops
        .into_iter()
        .map(|l| (mean_dist(&l), l))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(b.1.len().cmp(&a.1.len())))
        .ok_or(Error::NoIsocontour { level: isolevel })?
        .1;
    if best.len() < 8 {
        return Err(Error::DegenerateIsocontour { vertices: best.len() });
    }
    Ok(best)
}

/// ∮ ∇·n dl on the isocontour at `isolevel` nearest to `curve`; ε₁ for `isolevel` = one
/// grid spacing.
pub fn boundary_curvature_integral(field: &ScalarField, curve: &Contour, isolevel: f64) -> Result<f64> {
    let lp = nearest_isocontour(field, curve, isolevel)?;
    curvature_line_integral(field, &lp)
}

/// ∮ |F| dl over a polyline with precomputed weights; `+∞` if a vertex leaves the grid.
pub fn weighted_distance_integral(field: &ScalarField, pts: &[Vec2], weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (p, &w) in pts.iter().zip(weights) {
        match field.sample(*p) {
            Some(v) => acc += w * v.abs(),
            None => return f64::INFINITY,
        }
    }
    acc
}

/// D(Γ₁, Γ₂) = ∮_{Γ₂} |F₁| dl with trapezoidal arc-length weights.
pub fn geodesic_deviation(field: &ScalarField, curve2: &Contour) -> Result<f64> {
    let pts = curve2.points();
    let d = weighted_distance_integral(field, pts, &curve2.vertex_weights());
    if d.is_finite() {
        return Ok(d);
    }
    let p = pts.iter().find(|p| field.sample(**p).is_none()).copied().unwrap_or_default();
    Err(Error::OutOfBounds { x: p.x, y: p.y })
}
