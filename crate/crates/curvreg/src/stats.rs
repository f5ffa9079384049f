//! Welch two-sample statistics, Student tail and density, KS normality gate.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl SampleSummary {
    pub fn new(mean: f64, sd: f64, n: usize) -> Self {
        Self { mean, sd, n }
    }

    /// Mean and sample standard deviation (n − 1 denominator).
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::TooFewValues { got: n, min: 2 });
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        Ok(Self { mean, sd: (ss / (n - 1) as f64).sqrt(), n })
    }

    /// Summary of the union of two samples, exact from the moments.
    pub fn pooled(&self, other: &SampleSummary) -> SampleSummary {
        let (n1, n2) = (self.n as f64, other.n as f64);
        let n = n1 + n2;
        let mean = (n1 * self.mean + n2 * other.mean) / n;
        let ss = (n1 - 1.0) * self.sd * self.sd
            + (n2 - 1.0) * other.sd * other.sd
            + n1 * (self.mean - mean).powi(2)
            + n2 * (other.mean - mean).powi(2);
        SampleSummary { mean, sd: (ss / (n - 1.0)).sqrt(), n: self.n + other.n }
    }

    fn var_of_mean(&self) -> f64 {
        self.sd * self.sd / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub t: f64,
    pub dof: u64,
    pub p_two_tail: f64,
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// One-sample KS statistic against a normal with the sample's mean and sd; passes when
/// below the asymptotic α = 0.01 critical value 1.628/√n.
pub fn ks_normality(values: &[f64]) -> Result<(f64, bool)> {
    let n = values.len();
    if n < 8 {
        return Err(Error::TooFewValues { got: n, min: 8 });
    }
    let s = SampleSummary::from_values(values)?;
    if !(s.sd > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = normal_cdf((x - s.mean) / s.sd);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    Ok((d, d < 1.628 / nf.sqrt()))
}

fn check(s1: &SampleSummary, s2: &SampleSummary) -> Result<()> {
    for s in [s1, s2] {
        if s.n < 2 {
            return Err(Error::TooFewValues { got: s.n, min: 2 });
        }
    }
    if s1.sd == 0.0 && s2.sd == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(())
}

pub fn welch_t(s1: &SampleSummary, s2: &SampleSummary) -> Result<f64> {
    check(s1, s2)?;
    Ok((s1.mean - s2.mean) / (s1.var_of_mean() + s2.var_of_mean()).sqrt())
}

/// Integral part of the Welch–Satterthwaite degrees of freedom, at least 1.
pub fn welch_dof(s1: &SampleSummary, s2: &SampleSummary) -> Result<u64> {
    check(s1, s2)?;
    let (v1, v2) = (s1.var_of_mean(), s2.var_of_mean());
    let d = (v1 + v2).powi(2) / (v1 * v1 / (s1.n - 1) as f64 + v2 * v2 / (s2.n - 1) as f64);
    // guard the floor against a last-bit shortfall on exact integers
    Ok(((d * (1.0 + 1e-12)).floor() as u64).max(1))
}

/// P(|X| ≥ |t|) for Student X with `dof` degrees of freedom.
pub fn student_tail(t: f64, dof: u64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::BadDof);
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let nu = dof as f64;
    let x = nu / (nu + t * t);
    Ok(beta_reg(0.5 * nu, 0.5, x).clamp(0.0, 1.0))
}

pub fn student_pdf(t: f64, dof: u64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::BadDof);
    }
    Ok(student_ln_pdf(t, dof).exp())
}

pub fn student_ln_pdf(t: f64, dof: u64) -> f64 {
    let nu = dof as f64;
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()
}

/// α_T = 1e-4 / n.
pub fn bonferroni_threshold(n_tests: usize) -> Result<f64> {
    bonferroni_with_base(1e-4, n_tests)
}

pub fn bonferroni_with_base(base: f64, n_tests: usize) -> Result<f64> {
    if n_tests == 0 {
        return Err(Error::BadN);
    }
    Ok(base / n_tests as f64)
}

pub fn pair_test(intra: &SampleSummary, inter: &SampleSummary) -> Result<PairTest> {
    let t = welch_t(intra, inter)?;
    let dof = welch_dof(intra, inter)?;
    Ok(PairTest { t, dof, p_two_tail: student_tail(t, dof)? })
}
