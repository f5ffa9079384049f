//! Normalized similarity of a registered pair: ξ = |ζ|_S + ρ·θ_M.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::register::MatchOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub zeta_s: f64,
    pub theta_m: f64,
    pub xi: f64,
    pub rho: f64,
}

/// |ζ|_S = ζ_min / |ε₁|.
pub fn curvature_similarity(zeta_min: f64, eps1: f64) -> Result<f64> {
    if !(eps1.abs() >= 1e-6) {
        return Err(Error::DegenerateReference);
    }
    Ok(zeta_min / eps1.abs())
}

/// θ_M = euclid_min / √(ℓ₁·ℓ₂).
pub fn euclidean_similarity(euclid_min: f64, len1: f64, len2: f64) -> Result<f64> {
    if !(len1 > 0.0 && len2 > 0.0) {
        return Err(Error::DegenerateLength);
    }
    Ok(euclid_min / (len1 * len2).sqrt())
}

pub fn overall_similarity(zeta_s: f64, theta_m: f64, rho: f64) -> Result<SimilarityScore> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::BadRho);
    }
    Ok(SimilarityScore { zeta_s, theta_m, xi: zeta_s + rho * theta_m, rho })
}

/// Both normalized terms of a match outcome, before mixing.
pub fn normalized_terms(m: &MatchOutcome) -> Result<(f64, f64)> {
    Ok((curvature_similarity(m.zeta_min, m.eps1)?, euclidean_similarity(m.euclid_min, m.len1, m.len2)?))
}

pub fn score(m: &MatchOutcome, rho: f64) -> Result<SimilarityScore> {
    let (z, t) = normalized_terms(m)?;
    overall_similarity(z, t, rho)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// ρ = median(ζ_S) / median(θ_M), clamped to [1e-3, 1e3].
pub fn calibrate_rho(sample: &[(f64, f64)]) -> Result<f64> {
    if sample.len() < 10 {
        return Err(Error::InsufficientSample);
    }
    let z: Vec<f64> = sample.iter().map(|p| p.0).collect();
    let t: Vec<f64> = sample.iter().map(|p| p.1).collect();
    let (mz, mt) = (median(&z).unwrap_or(0.0), median(&t).unwrap_or(0.0));
    if !(mz > 0.0 && mt > 0.0) || !(mz.is_finite() && mt.is_finite()) {
        return Err(Error::InsufficientSample);
    }
    Ok((mz / mt).clamp(1e-3, 1e3))
}
