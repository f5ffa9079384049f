//! Two-stage fit of a moving curve Γ₂ onto a fixed reference Γ₁.
//!
//! Stage I searches anisotropic scales `(a, b)` minimizing the plane-curvature error
//! ζ = ∫_Ω C₁² dΩ over the symmetric difference Ω of the two enclosed regions. Stage II
//! searches rotation and translation minimizing ∮_{Γ̃₂} |F₁| dl. [`match_curves`]
//! alternates the two after choosing starting orientations from area moments.

mod area;
mod diagnostics;
mod simplex;

use serde::{Deserialize, Serialize};

pub use area::RegionIntegrator;
pub use diagnostics::{curvature_path_ratio, curvature_update, d2_ln_curvature, PathNode};
pub use simplex::{nelder_mead, Minimum, SimplexOptions};

use crate::contour::{Contour, MIN_POINTS};
use crate::error::{Error, Result};
use crate::field::{boundary_curvature_integral, curvature_line_integral, curve_field, weighted_distance_integral, PointSample, ScalarField};
use crate::geom::{wrap_angle, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegisterOptions {
    pub spacing: f64,
    /// Cells of padding around the enlarged reference box.
    pub grid_margin: usize,
    /// The grid is a square about the reference centroid of half-side r_max·(1 + grid_extent)
    /// plus the margin, r_max being the largest centroid distance on the reference.
    pub grid_extent: f64,
    pub simplex: SimplexOptions,
    pub scale_steps: [f64; 2],
    /// Rotation step in degrees, then two translation steps in grid units.
    pub rigid_steps: [f64; 3],
    pub scale_box: [f64; 2],
    pub rotation_candidates: usize,
    pub max_rounds: usize,
}

impl Default for RegisterOptions {
    fn default() -> Self {
        Self {
            spacing: 1.0,
            grid_margin: 8,
            grid_extent: 0.4,
            simplex: SimplexOptions::default(),
            scale_steps: [0.1, 0.1],
            rigid_steps: [5.0, 2.0, 2.0],
            scale_box: [0.2, 5.0],
            rotation_candidates: 1,
            max_rounds: 2,
        }
    }
}

/// Weight of the ζ area form: C², capped at one over the squared spacing.
pub fn zeta_weight(s: &PointSample, spacing: f64) -> f64 {
    let cap = 1.0 / (spacing * spacing);
    if s.valid {
        (s.curvature * s.curvature).min(cap)
    } else {
        cap
    }
}

/// Weight of the ε area form: |C|, capped at one over the spacing.
pub fn epsilon_weight(s: &PointSample, spacing: f64) -> f64 {
    let cap = 1.0 / spacing;
    if s.valid {
        s.curvature.abs().min(cap)
    } else {
        cap
    }
}

/// A reference curve with its field and cached integrals; build once, match many.
#[derive(Debug, Clone)]
pub struct Reference {
    pub contour: Contour,
    pub field: ScalarField,
    pub eps1: f64,
    pub boundary: Vec<Vec2>,
    pub centroid: Vec2,
    pub moments: [f64; 3],
    pub length: f64,
    zeta: RegionIntegrator,
}

impl Reference {
    pub fn new(contour: Contour, opts: &RegisterOptions) -> Result<Self> {
        if contour.len() < MIN_POINTS {
            return Err(Error::TooFewPoints { got: contour.len(), min: MIN_POINTS });
        }
        // square about the centroid, large enough for the curve at any rotation
        let c = contour.centroid();
        let r = contour.points().iter().map(|p| p.dist(c)).fold(0.0, f64::max);
        let half = r * (1.0 + opts.grid_extent) + opts.grid_margin as f64 * opts.spacing;
        let lo = Vec2::new((c.x - half).floor(), (c.y - half).floor());
        let hi = Vec2::new((c.x + half).ceil(), (c.y + half).ceil());
        Self::with_box(contour, lo, hi, opts)
    }

    /// Reference over an explicit grid box.
    pub fn with_box(contour: Contour, lo: Vec2, hi: Vec2, opts: &RegisterOptions) -> Result<Self> {
        let field = curve_field(&contour, lo, hi, opts.spacing)?;
        let eps1 = boundary_curvature_integral(&field, &contour, opts.spacing)?;
        let boundary = contour.spline_densified(0.25 * opts.spacing);
        let spacing = opts.spacing;
        let zeta = RegionIntegrator::new(&field, &boundary, |s| zeta_weight(s, spacing), 1.0 / (spacing * spacing));
        let (centroid, moments) = contour.moments();
        let length = contour.arc_length();
        Ok(Self { contour, field, eps1, boundary, centroid, moments, length, zeta })
    }

    /// ζ for a moving polygon; `+∞` if it leaves the grid.
    pub fn zeta_area(&self, pts: &[Vec2]) -> f64 {
        self.zeta.symmetric_difference(pts)
    }

    /// ∮ |F₁| dl with the given weights; `+∞` if it leaves the grid.
    pub fn euclid(&self, pts: &[Vec2], weights: &[f64]) -> f64 {
        weighted_distance_integral(&self.field, pts, weights)
    }
}

/// Boundary form |2·(∮_{Γ₂} ∇·n dl − ε₁)| with curvature sampled from `field1` along
/// `curve2`.
pub fn zeta_error(field1: &ScalarField, curve2: &Contour, eps1: f64) -> Result<f64> {
    let integral = curvature_line_integral(field1, curve2.points())?;
    Ok((2.0 * (integral - eps1)).abs())
}

#[derive(Debug, Clone)]
pub struct ScaleOutcome {
    pub a: f64,
    pub b: f64,
    pub curve: Contour,
    pub zeta_min: f64,
    pub zeta_start: f64,
    pub eps1: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn scale_points(pts: &[Vec2], c: Vec2, a: f64, b: f64, out: &mut Vec<Vec2>) {
    out.clear();
    out.extend(pts.iter().map(|&p| Vec2::new(c.x + a * (p.x - c.x), c.y + b * (p.y - c.y))));
}

/// The Stage-I objective as a function of `(a, b)`, scaling `c2` about its centroid.
pub fn scale_objective<'a>(reference: &'a Reference, c2: &'a Contour, opts: &RegisterOptions) -> impl FnMut(&[f64]) -> f64 + 'a {
    let cen = c2.centroid();
    let [lo, hi] = opts.scale_box;
    let mut buf = Vec::with_capacity(c2.len());
    move |x: &[f64]| {
        let (a, b) = (x[0], x[1]);
        if !(a >= lo && a <= hi && b >= lo && b <= hi) {
            return f64::INFINITY;
        }
        scale_points(c2.points(), cen, a, b, &mut buf);
        reference.zeta_area(&buf)
    }
}

/// Stage I: anisotropic scales about the centroid of `c2`; rotation and translation are
/// not touched.
pub fn scale_stage(reference: &Reference, c2: &Contour, opts: &RegisterOptions) -> Result<ScaleOutcome> {
    let mut objective = scale_objective(reference, c2, opts);
    let mut x0 = vec![1.0, 1.0];
    if !objective(&x0).is_finite() {
        // start from the isotropic area ratio when the unscaled curve does not fit the grid
        let mut s = (reference.contour.signed_area() / c2.signed_area()).sqrt().clamp(opts.scale_box[0], opts.scale_box[1]);
        x0 = vec![s; 2];
        while !objective(&x0).is_finite() && s > opts.scale_box[0] {
            s = (0.9 * s).max(opts.scale_box[0]);
            x0 = vec![s; 2];
        }
    }
    let m = nelder_mead(&mut objective, &x0, &opts.scale_steps, &opts.simplex)?;
    let (a, b, zeta_min, converged) =
        if m.f < m.f0 { (m.x[0], m.x[1], m.f, m.converged) } else { (x0[0], x0[1], m.f0, m.converged && m.f0 == 0.0) };
    let curve = c2.scaled(a, b, c2.centroid())?;
    Ok(ScaleOutcome { a, b, curve, zeta_min, zeta_start: m.f0, eps1: reference.eps1, iterations: m.iterations, converged })
}

#[derive(Debug, Clone)]
pub struct RigidOutcome {
    /// Rotation about the centroid of the input curve.
    pub t: f64,
    /// Total translation, including the initial centroid alignment.
    pub gx: f64,
    pub gy: f64,
    pub curve: Contour,
    pub euclid_min: f64,
    /// Error at the Stage-II start pose (centroids aligned, no rotation).
    pub euclid_start: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn rigid_points(pts: &[Vec2], cen: Vec2, t: f64, shift: Vec2, out: &mut Vec<Vec2>) {
    let (s, c) = t.sin_cos();
    out.clear();
    out.extend(pts.iter().map(|&p| {
        let d = p - cen;
        Vec2::new(c * d.x - s * d.y, s * d.x + c * d.y) + cen + shift
    }));
}

/// Stage II objective ∮ |F₁| dl as a function of `(T, dx, dy)` relative to the
/// centroid-aligned start pose.
pub fn rigid_objective<'a>(reference: &'a Reference, c2s: &'a Contour) -> impl FnMut(&[f64]) -> f64 + 'a {
    let cen = c2s.centroid();
    let g0 = reference.centroid - cen;
    let weights = c2s.vertex_weights();
    let mut buf = Vec::with_capacity(c2s.len());
    move |x: &[f64]| {
        rigid_points(c2s.points(), cen, x[0], g0 + Vec2::new(x[1], x[2]), &mut buf);
        reference.euclid(&buf, &weights)
    }
}

/// Stage II: rotation about the centroid of `c2s` plus translation.
pub fn rigid_stage(reference: &Reference, c2s: &Contour, opts: &RegisterOptions) -> Result<RigidOutcome> {
    let cen = c2s.centroid();
    let g0 = reference.centroid - cen;
    let mut objective = rigid_objective(reference, c2s);
    let steps = [opts.rigid_steps[0].to_radians(), opts.rigid_steps[1], opts.rigid_steps[2]];
    let m = nelder_mead(&mut objective, &[0.0, 0.0, 0.0], &steps, &opts.simplex)?;
    let t = wrap_angle(m.x[0]);
    let shift = g0 + Vec2::new(m.x[1], m.x[2]);
    let curve = c2s.rotated(t, cen).translated(shift);
    Ok(RigidOutcome {
        t,
        gx: shift.x,
        gy: shift.y,
        curve,
        euclid_min: m.f,
        euclid_start: m.f0,
        iterations: m.iterations,
        converged: m.converged,
    })
}

/// Composite pose about the centroid c₂ of the moving curve: rotate by `t_scale`, scale
/// by `(a, b)` along the grid axes, rotate by the remaining `t − t_scale`, translate by g:
/// p ↦ R(t − t_scale)·diag(a, b)·R(t_scale)·(p − c₂) + c₂ + g.
/// `t` is the net rotation; `t_scale` is the orientation the scale stage saw last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub a: f64,
    pub b: f64,
    pub t: f64,
    pub gx: f64,
    pub gy: f64,
    pub t_scale: f64,
}

impl Pose {
    pub fn rigid(t: f64, g: Vec2) -> Self {
        Self { a: 1.0, b: 1.0, t, gx: g.x, gy: g.y, t_scale: t }
    }

    pub fn apply(&self, c2: &Contour) -> Result<Contour> {
        let cen = c2.centroid();
        let (s0, c0) = self.t_scale.sin_cos();
        let (s1, c1) = (self.t - self.t_scale).sin_cos();
        let g = Vec2::new(self.gx, self.gy);
        c2.map(|p| {
            let d = p - cen;
            let r = Vec2::new(self.a * (c0 * d.x - s0 * d.y), self.b * (s0 * d.x + c0 * d.y));
            Vec2::new(c1 * r.x - s1 * r.y, s1 * r.x + c1 * r.y) + cen + g
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageIterations {
    pub scale: usize,
    pub rigid: usize,
}

#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub pose: Pose,
    pub zeta_min: f64,
    pub eps1: f64,
    pub euclid_min: f64,
    pub len1: f64,
    pub len2: f64,
    pub converged: bool,
    pub iterations: StageIterations,
    pub rounds: usize,
    /// Γ₂ after the final pose.
    pub fitted: Contour,
    /// Γ₂ at the chosen starting orientation, centroid on Γ₁'s centroid.
    pub initial: Contour,
}

/// The per-pair JSON report, fields in fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub pair_id: String,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub gx: f64,
    pub gy: f64,
    pub zeta_min: f64,
    pub eps1: f64,
    pub euclid_min: f64,
    pub len1: f64,
    pub len2: f64,
    pub converged: bool,
    pub iters: StageIterations,
}

impl MatchOutcome {
    pub fn report(&self, pair_id: impl Into<String>) -> MatchReport {
        MatchReport {
            pair_id: pair_id.into(),
            a: self.pose.a,
            b: self.pose.b,
            t: self.pose.t,
            gx: self.pose.gx,
            gy: self.pose.gy,
            zeta_min: self.zeta_min,
            eps1: self.eps1,
            euclid_min: self.euclid_min,
            len1: self.len1,
            len2: self.len2,
            converged: self.converged,
            iters: self.iterations,
        }
    }
}

/// Starting orientation with its moment-based score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationCandidate {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub score: f64,
}

fn rotated_cov(m: [f64; 3], t: f64) -> [f64; 3] {
    let (s, c) = t.sin_cos();
    let (xx, yy, xy) = (m[0], m[1], m[2]);
    [
        c * c * xx - 2.0 * s * c * xy + s * s * yy,
        s * s * xx + 2.0 * s * c * xy + c * c * yy,
        s * c * (xx - yy) + (c * c - s * s) * xy,
    ]
}

/// Orientations worth a full fit: roots where rotated Γ₂ moments match Γ₁'s up to axis
/// scaling, plus a 30° grid, ranked by ζ at the moment-implied scales.
pub fn rotation_candidates(reference: &Reference, c2: &Contour, opts: &RegisterOptions) -> Vec<RotationCandidate> {
    let (c2cen, m2) = c2.moments();
    let m1 = reference.moments;
    let [lo, hi] = opts.scale_box;
    let implied = |t: f64| {
        let r = rotated_cov(m2, t);
        let a = (m1[0] / r[0]).sqrt();
        let b = (m1[1] / r[1]).sqrt();
        let fix = |v: f64| if v.is_finite() { v.clamp(lo, hi) } else { 1.0 };
        (fix(a), fix(b))
    };
    let h = |t: f64| {
        let r = rotated_cov(m2, t);
        r[2] * (m1[0] * m1[1]).max(0.0).sqrt() - m1[2] * (r[0] * r[1]).max(0.0).sqrt()
    };
    let mut angles: Vec<f64> = (0..12).map(|i| -std::f64::consts::PI + i as f64 * std::f64::consts::PI / 6.0).collect();
    let steps = 360;
    let dt = std::f64::consts::TAU / steps as f64;
    for i in 0..steps {
        let (t0, t1) = (-std::f64::consts::PI + i as f64 * dt, -std::f64::consts::PI + (i + 1) as f64 * dt);
        let (mut a, mut b) = (t0, t1);
        let (mut ha, hb) = (h(a), h(b));
        if ha == 0.0 {
            angles.push(a);
            continue;
        }
        if ha.signum() == hb.signum() {
            continue;
        }
        for _ in 0..50 {
            let mid = 0.5 * (a + b);
            let hm = h(mid);
            if hm.signum() == ha.signum() {
                a = mid;
                ha = hm;
            } else {
                b = mid;
            }
        }
        angles.push(0.5 * (a + b));
    }
    let target = reference.centroid;
    let mut buf = Vec::with_capacity(c2.len());
    let mut cands: Vec<RotationCandidate> = angles
        .into_iter()
        .map(|t| {
            let (a, b) = implied(t);
            let (s, c) = t.sin_cos();
            buf.clear();
            buf.extend(c2.points().iter().map(|&p| {
                let d = p - c2cen;
                let r = Vec2::new(c * d.x - s * d.y, s * d.x + c * d.y);
                Vec2::new(target.x + a * r.x, target.y + b * r.y)
            }));
            RotationCandidate { t: wrap_angle(t), a, b, score: reference.zeta_area(&buf) }
        })
        .collect();
    cands.sort_by(|x, y| x.score.total_cmp(&y.score).then(x.t.total_cmp(&y.t)));
    let mut picked: Vec<RotationCandidate> = Vec::new();
    for c in cands {
        if picked.len() >= opts.rotation_candidates.max(1) {
            break;
        }
        if picked.iter().all(|p| wrap_angle(p.t - c.t).abs() > 15f64.to_radians()) {
            picked.push(c);
        }
    }
    picked
}

fn fit_from(reference: &Reference, c2: &Contour, t0: f64, opts: &RegisterOptions) -> Result<MatchOutcome> {
    let c2cen = c2.centroid();
    let mut pose = Pose::rigid(t0, reference.centroid - c2cen);
    let initial = pose.apply(c2)?;
    let mut iterations = StageIterations { scale: 0, rigid: 0 };
    let mut converged = false;
    let mut rounds = 0;
    for round in 0..opts.max_rounds.max(1) {
        let pre = Pose::rigid(pose.t, Vec2::new(pose.gx, pose.gy)).apply(c2)?;
        // a later round that leaves the grid keeps the last complete pose
        let (so, ro) = match scale_stage(reference, &pre, opts).and_then(|so| rigid_stage(reference, &so.curve, opts).map(|ro| (so, ro))) {
            Ok(r) => r,
            Err(e) if round == 0 => return Err(e),
            Err(e) => {
                log::debug!("round {} abandoned: {e}", round + 1);
                break;
            }
        };
        rounds += 1;
        iterations.scale += so.iterations;
        iterations.rigid += ro.iterations;
        pose = Pose { a: so.a, b: so.b, t: wrap_angle(pose.t + ro.t), gx: pose.gx + ro.gx, gy: pose.gy + ro.gy, t_scale: pose.t };
        converged = so.converged && ro.converged;
        if ro.t.abs() < 1e-3 && ro.gx.hypot(ro.gy) < 0.05 {
            break;
        }
    }
    let fitted = pose.apply(c2)?;
    let zeta_min = reference.zeta_area(fitted.points());
    let euclid_min = reference.euclid(fitted.points(), &fitted.vertex_weights());
    Ok(MatchOutcome {
        pose,
        zeta_min,
        eps1: reference.eps1,
        euclid_min,
        len1: reference.length,
        len2: fitted.arc_length(),
        converged,
        iterations,
        rounds,
        fitted,
        initial,
    })
}

/// Full registration of `c2` onto the reference.
pub fn match_curves(reference: &Reference, c2: &Contour, opts: &RegisterOptions) -> Result<MatchOutcome> {
    if c2.len() < MIN_POINTS {
        return Err(Error::TooFewPoints { got: c2.len(), min: MIN_POINTS });
    }
    let mut best: Option<MatchOutcome> = None;
    let mut last_err = None;
    for cand in rotation_candidates(reference, c2, opts) {
        match fit_from(reference, c2, cand.t, opts) {
            Ok(o) if o.zeta_min.is_finite() && o.euclid_min.is_finite() => {
                if best.as_ref().is_none_or(|b| o.zeta_min < b.zeta_min) {
                    best = Some(o);
                }
            }
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::NonFiniteObjective))
}

/// Convenience wrapper building the reference from `c1`.
pub fn match_pair(c1: &Contour, c2: &Contour, opts: &RegisterOptions) -> Result<MatchOutcome> {
    let reference = Reference::new(c1.clone(), opts)?;
    match_curves(&reference, c2, opts)
}
