//! Area integrals of a fixed weight over the symmetric difference of two regions.
//!
//! Rows of the grid are scanned at node height; along a row the weight is piecewise
//! constant per cell, so each interval integral is a difference of prefix sums. The
//! result is continuous in the vertex positions of the moving curve.

use crate::field::{node_curvature, PointSample, ScalarField};
use crate::geom::Vec2;

#[derive(Debug, Clone)]
pub struct RegionIntegrator {
    width: usize,
    height: usize,
    spacing: f64,
    origin: Vec2,
    weights: Vec<f64>,
    prefix: Vec<f64>,
    reference: Vec<Vec<f64>>,
}

/// Crossings of a closed polygon with the node rows, in grid x units, as `(row, x)`.
fn row_crossings(pts: &[Vec2], origin: Vec2, spacing: f64, height: usize, out: &mut Vec<(u32, f64)>) {
    let n = pts.len();
    for k in 0..n {
        let (a, b) = (pts[k], pts[(k + 1) % n]);
        let (va, vb) = ((a.y - origin.y) / spacing, (b.y - origin.y) / spacing);
        if va == vb {
            continue;
        }
        let (lo, hi) = if va < vb { (va, vb) } else { (vb, va) };
        let mut j = lo.ceil().max(0.0);
        while j < hi && (j as usize) < height {
            let t = (j - va) / (vb - va);
            out.push((j as u32, (a.x + t * (b.x - a.x) - origin.x) / spacing));
            j += 1.0;
        }
    }
}

impl RegionIntegrator {
    /// `boundary` is the reference region's outline; `weight` maps a curvature sample of
    /// the field to the integrand. Cells too close to the grid edge use `fallback`.
    pub fn new(field: &ScalarField, boundary: &[Vec2], weight: impl Fn(&PointSample) -> f64, fallback: f64) -> Self {
        let (w, h) = (field.width, field.height);
        let mut weights = vec![fallback; w * h];
        for j in 0..h {
            for i in 0..w {
                if let Some(s) = node_curvature(field, i, j) {
                    weights[j * w + i] = weight(&s);
                }
            }
        }
        Self::with_weights(field, boundary, weights)
    }

    pub fn with_weights(field: &ScalarField, boundary: &[Vec2], weights: Vec<f64>) -> Self {
        let (w, h) = (field.width, field.height);
        let mut prefix = vec![0.0; h * (w + 1)];
        for j in 0..h {
            for i in 0..w {
                prefix[j * (w + 1) + i + 1] = prefix[j * (w + 1) + i] + weights[j * w + i];
            }
        }
        let mut flat = Vec::new();
        row_crossings(boundary, field.origin, field.spacing, h, &mut flat);
        let mut reference = vec![Vec::new(); h];
        for (j, x) in flat {
            reference[j as usize].push(x);
        }
        for r in &mut reference {
            r.sort_by(f64::total_cmp);
        }
        Self { width: w, height: h, spacing: field.spacing, origin: field.origin, weights, prefix, reference }
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[j * self.width + i]
    }

    /// ∫ weight over cells [−½, x] of row `j`.
    fn cum(&self, j: usize, x: f64) -> f64 {
        let w = self.width;
        let s = (x + 0.5).clamp(0.0, w as f64);
        let k = s as usize;
        let base = self.prefix[j * (w + 1) + k.min(w)];
        if k >= w {
            base
        } else {
            base + self.weights[j * w + k] * (s - k as f64)
        }
    }

    /// ∫_Ω weight dΩ with Ω the symmetric difference of the reference region and the
    /// region enclosed by `curve`. `+∞` when the curve leaves the grid.
    pub fn symmetric_difference(&self, curve: &[Vec2]) -> f64 {
        let (wm, hm) = ((self.width - 1) as f64, (self.height - 1) as f64);
        for p in curve {
            let (u, v) = ((p.x - self.origin.x) / self.spacing, (p.y - self.origin.y) / self.spacing);
            if !(u >= 0.0 && v >= 0.0 && u <= wm && v <= hm) {
                return f64::INFINITY;
            }
        }
        let mut flat = Vec::with_capacity(2 * self.height);
        row_crossings(curve, self.origin, self.spacing, self.height, &mut flat);
        // counting sort by row, then sort the few crossings within each row
        let mut offsets = vec![0usize; self.height + 1];
        for &(j, _) in &flat {
            offsets[j as usize + 1] += 1;
        }
        for j in 0..self.height {
            offsets[j + 1] += offsets[j];
        }
        let mut rows = vec![0.0; flat.len()];
        let mut fill = offsets.clone();
        for &(j, x) in &flat {
            rows[fill[j as usize]] = x;
            fill[j as usize] += 1;
        }
        let mut total = 0.0;
        let mut merged: Vec<f64> = Vec::with_capacity(16);
        for j in 0..self.height {
            merged.clear();
            let reference = &self.reference[j];
            let moving = &mut rows[offsets[j]..offsets[j + 1]];
            if reference.is_empty() && moving.is_empty() {
                continue;
            }
            moving.sort_unstable_by(f64::total_cmp);
            // merge two sorted lists; XOR parity toggles at every crossing
            let (mut a, mut b) = (0, 0);
            while a < reference.len() || b < moving.len() {
                if b >= moving.len() || (a < reference.len() && reference[a] <= moving[b]) {
                    merged.push(reference[a]);
                    a += 1;
                } else {
                    merged.push(moving[b]);
                    b += 1;
                }
            }
            for pair in merged.chunks_exact(2) {
                total += self.cum(j, pair[1]) - self.cum(j, pair[0]);
            }
        }
        total * self.spacing * self.spacing
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::Contour;
    use crate::field::curve_field;
    use crate::geom::point_in_polygon;
    use std::f64::consts::TAU;

    fn blob(n: usize, c: Vec2, r: f64) -> Contour {
        let pts = (0..n)
            .map(|i| {
                let t = TAU * i as f64 / n as f64;
                c + Vec2::new(t.cos(), t.sin()) * (r * (1.0 + 0.2 * (2.0 * t).cos() + 0.1 * (3.0 * t + 1.0).sin()))
            })
            .collect();
        Contour::new("b", pts).unwrap()
    }

    #[test]
    fn unit_weight_matches_pixel_count() {
        let c1 = blob(256, Vec2::new(40.0, 40.0), 20.0);
        let field = curve_field(&c1, Vec2::ZERO, Vec2::new(80.0, 80.0), 1.0).unwrap();
        let ones = vec![1.0; field.width * field.height];
        let dense = c1.spline_densified(0.25);
        let integ = RegionIntegrator::with_weights(&field, &dense, ones);
        let c2 = c1.translated(Vec2::new(3.3, -1.7));
        let fast = integ.symmetric_difference(c2.points());
        let mut count = 0.0;
        for j in 0..field.height {
            for i in 0..field.width {
                let p = field.node(i, j);
                if point_in_polygon(p, &dense) != point_in_polygon(p, c2.points()) {
                    count += 1.0;
                }
            }
        }
        assert!((fast - count).abs() / count < 0.03, "{fast} vs {count}");
        assert!(integ.symmetric_difference(c1.points()) < 1.0);
    }

    #[test]
    fn leaving_the_grid_is_infinite() {
        let c1 = blob(128, Vec2::new(30.0, 30.0), 10.0);
        let field = curve_field(&c1, Vec2::ZERO, Vec2::new(60.0, 60.0), 1.0).unwrap();
        let integ = RegionIntegrator::new(&field, &c1.spline_densified(0.25), |s| s.curvature.powi(2), 1.0);
        assert!(integ.symmetric_difference(c1.translated(Vec2::new(45.0, 0.0)).points()).is_infinite());
    }
}
