//! Nelder–Mead simplex minimization for 1 to 3 parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplexOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub tol_x: f64,
    /// Relative spread tolerance; the absolute tolerance is `tol_f · (1 + |f(x0)|)`.
    pub tol_f: f64,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { reflection: 1.0, expansion: 2.0, contraction: 0.5, shrink: 0.5, tol_x: 1e-4, tol_f: 1e-6, max_iter: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub f0: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

/// Minimizes `f` from `x0` with initial simplex edges `steps` along the axes.
/// Non-finite values away from `x0` act as infinite penalties.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], opts: &SimplexOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let k = x0.len();
    if !(1..=3).contains(&k) || steps.len() != k {
        return Err(Error::BadDimension(k));
    }
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let tol_f = opts.tol_f * (1.0 + f0.abs());
    let mut evals = 1;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for i in 0..k {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    order(&mut simplex);
    let mut iterations = 0;
    let mut converged = false;
    let mut trace = Vec::new();
    let point = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> { c.iter().zip(w).map(|(a, b)| a + t * (b - a)).collect() };
    while iterations < opts.max_iter {
        let best = simplex[0].1;
        let worst = simplex[k].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < opts.tol_x || (worst.is_finite() && worst - best < tol_f) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = vec![0.0; k];
        for (x, _) in &simplex[..k] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / k as f64;
            }
        }
        let worst_x = simplex[k].0.clone();
        let xr = point(&centroid, &worst_x, -opts.reflection);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = point(&centroid, &worst_x, -opts.reflection * opts.expansion);
            let fe = eval(&xe, &mut evals);
            simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = point(&centroid, &xr, opts.contraction);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = point(&centroid, &worst_x, opts.contraction);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < worst.min(fr) {
                simplex[k] = (xc, fc);
            } else {
                let b = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let xs = point(&b, &item.0, opts.shrink);
                    let fs = eval(&xs, &mut evals);
                    *item = (xs, fs);
                }
            }
        }
        order(&mut simplex);
        trace.push(simplex[0].1);
    }
    let (x, fbest) = simplex.swap_remove(0);
    Ok(Minimum { x, f: fbest, f0, iterations, evaluations: evals, converged, trace })
}
