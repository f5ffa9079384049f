//! First- and second-order predictions of how plane curvature responds to anisotropic
//! scaling of the domain.

use crate::error::{Error, Result};
use crate::field::PointSample;
use crate::geom::Vec2;

/// dC = C·(g_a·da + g_b·db)/μ².
pub fn curvature_update(s: &PointSample, da: f64, db: f64) -> Result<f64> {
    if !s.valid {
        return Err(Error::InvalidSample);
    }
    Ok(s.curvature * (s.g_a * da + s.g_b * db) / s.mu2)
}

/// One node of a scaling path: the sample observed at cumulative scales `(a, b)`.
#[derive(Debug, Clone, Copy)]
pub struct PathNode {
    pub sample: PointSample,
    pub a: f64,
    pub b: f64,
}

/// Predicted ratio C̃/C along a path of scales: exp of the trapezoidal line integral of
/// (g_a·da + g_b·db)/μ², with relative increments da = d ln a, db = d ln b.
pub fn curvature_path_ratio(path: &[PathNode]) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::TooFewPoints { got: path.len(), min: 2 });
    }
    if path.iter().any(|n| !n.sample.valid) {
        return Err(Error::InvalidSample);
    }
    let rate = |s: &PointSample| (s.g_a / s.mu2, s.g_b / s.mu2);
    let mut exponent = 0.0;
    for w in path.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        if !(p.a > 0.0 && p.b > 0.0 && q.a > 0.0 && q.b > 0.0) {
            return Err(Error::DegenerateScale);
        }
        let (da, db) = ((q.a / p.a).ln(), (q.b / p.b).ln());
        let (ra0, rb0) = rate(&p.sample);
        let (ra1, rb1) = rate(&q.sample);
        exponent += 0.5 * (ra0 + ra1) * da + 0.5 * (rb0 + rb1) * db;
    }
    Ok(exponent.exp())
}

/// Second variation of ln C under the step (da, db): −6·(lᵀ diag(da, db) n)², l ⊥ n.
pub fn d2_ln_curvature(n: Vec2, da: f64, db: f64) -> Result<f64> {
    if (n.norm2() - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnit);
    }
    // lᵀ diag(da, db) n with l = (−n_y, n_x)
    let v = n.x * n.y * (db - da);
    Ok(-6.0 * v * v)
}
