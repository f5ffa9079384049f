//! Shape classification benches: digit groups by least mean fitting error, and
//! leave-one-out shape-class assignment, with retrieval quotients.
//!
//! Dataset layout: `<root>/<class>/<image>` for leave-one-out, `<root>/{train,test}/<class>/<image>`
//! for the group protocol. Images are PNG, PGM or GIF; ink polarity is detected from the
//! border.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::nearest_mean_group;
use crate::config::{RhoMode, RunConfig, ENGINE_VERSION};
use crate::contour::Contour;
use crate::corpus::image_contour;
use crate::error::{Error, Result};
use crate::raster::Gray;
use crate::register::{match_curves, Reference};
use crate::similarity::{calibrate_rho, normalized_terms};

#[derive(Debug, Clone)]
pub struct LabeledShape {
    pub label: String,
    pub id: String,
    pub contour: Contour,
}

/// Image preprocessing before tracing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    pub upscale: usize,
    pub max_side: usize,
}

impl Preprocess {
    pub const DIGITS: Preprocess = Preprocess { upscale: 4, max_side: 0 };
    pub const SHAPES: Preprocess = Preprocess { upscale: 1, max_side: 192 };
}

fn is_image(p: &Path) -> bool {
    let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    matches!(ext.as_str(), "png" | "pgm" | "pnm" | "gif")
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::Dataset(format!("{}: {e}", dir.display())))?;
    let mut v: Vec<_> = rd.filter_map(|e| e.ok().map(|e| e.path())).collect();
    v.sort();
    Ok(v)
}

/// Loads `<dir>/<class>/<image>`, at most `max_classes` classes (sorted) and
/// `max_per_class` images each; 0 means no limit.
pub fn load_labeled_dir(dir: &Path, n: usize, prep: Preprocess, max_classes: usize, max_per_class: usize) -> Result<Vec<LabeledShape>> {
    let mut classes: Vec<_> = sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()).collect();
    if classes.is_empty() {
        return Err(Error::Dataset(format!("{}: no class directories", dir.display())));
    }
    if max_classes > 0 {
        classes.truncate(max_classes);
    }
    let mut files = Vec::new();
    for c in &classes {
        let label = c.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let mut imgs: Vec<_> = sorted_entries(c)?.into_iter().filter(|p| is_image(p)).collect();
        if max_per_class > 0 {
            imgs.truncate(max_per_class);
        }
        if imgs.is_empty() {
            return Err(Error::Dataset(format!("{}: no images", c.display())));
        }
        files.extend(imgs.into_iter().map(|p| (label.clone(), p)));
    }
    files
        .par_iter()
        .map(|(label, p)| {
            let mut img = Gray::load(p)?;
            if prep.max_side > 0 {
                img = img.fit_within(prep.max_side);
            }
            img = img.upscale(prep.upscale);
            let contour = image_contour(&img, n).map_err(|e| Error::Dataset(format!("{}: {e}", p.display())))?;
            let id = format!("{label}/{}", p.file_stem().unwrap_or_default().to_string_lossy());
            Ok(LabeledShape { label: label.clone(), id: id.clone(), contour: contour.with_id(id) })
        })
        .collect()
}

/// Normalized terms (ζ_S, θ_M) of every query (as reference) against every item; `None`
/// where registration failed or the pair is a self pair.
pub fn error_matrix(queries: &[LabeledShape], items: &[LabeledShape], cfg: &RunConfig, parallelism: usize, skip_self: bool) -> Result<Vec<Vec<Option<(f64, f64)>>>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(parallelism.max(1)).build().map_err(|e| Error::Dataset(e.to_string()))?;
    let opts = &cfg.register;
    Ok(pool.install(|| {
        queries
            .par_iter()
            .map(|q| {
                let Ok(reference) = Reference::new(q.contour.clone(), opts) else {
                    log::warn!("{}: reference build failed", q.id);
                    return vec![None; items.len()];
                };
                items
                    .iter()
                    .map(|it| {
                        if skip_self && it.id == q.id {
                            return None;
                        }
                        match match_curves(&reference, &it.contour, opts).and_then(|m| normalized_terms(&m)) {
                            Ok(t) => Some(t),
                            Err(e) => {
                                log::warn!("{} vs {}: {e}", q.id, it.id);
                                None
                            }
                        }
                    })
                    .collect()
            })
            .collect()
    }))
}

fn rho_for(cfg: &RunConfig, m: &[Vec<Option<(f64, f64)>>]) -> f64 {
    match cfg.rho {
        RhoMode::Fixed(r) => r,
        RhoMode::Auto => {
            let sample: Vec<(f64, f64)> = m.iter().flatten().flatten().copied().collect();
            calibrate_rho(&sample).unwrap_or(1.0)
        }
    }
}

fn xi_matrix(m: &[Vec<Option<(f64, f64)>>], rho: f64) -> Vec<Vec<Option<f64>>> {
    m.iter().map(|row| row.iter().map(|t| t.map(|(z, th)| z + rho * th)).collect()).collect()
}

/// Mean over queries of the fraction of same-class items among the best `k·M` matches,
/// M the number of same-class candidates of that query.
pub fn retrieval_quotient(xi: &[Vec<Option<f64>>], query_labels: &[&str], item_labels: &[&str], k: f64) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for (row, ql) in xi.iter().zip(query_labels) {
        let mut ranked: Vec<(f64, &str)> = row.iter().zip(item_labels).filter_map(|(x, l)| x.map(|x| (x, *l))).collect();
        let m = ranked.iter().filter(|(_, l)| l == ql).count();
        if m == 0 {
            continue;
        }
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
        let top = ((k * m as f64).round() as usize).min(ranked.len());
        let hits = ranked[..top].iter().filter(|(_, l)| l == ql).count();
        total += hits as f64 / m as f64;
        count += 1.0;
    }
    if count > 0.0 {
        total / count
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSizeResult {
    pub size: usize,
    pub mean: f64,
    pub sd: f64,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitReport {
    pub engine_version: String,
    pub config: RunConfig,
    pub seed: u64,
    pub repeats: usize,
    pub classes: Vec<String>,
    pub test_items: usize,
    pub rho: f64,
    pub sizes: Vec<GroupSizeResult>,
    /// (k, quotient) against the whole training pool.
    pub retrieval: Vec<(f64, f64)>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (m, sd)
}

/// Repeated random training groups per class; each test shape goes to the class whose group
/// has the least mean ξ. Groups of the smaller sizes are prefixes of the larger ones.
pub fn digit_bench(train: &[LabeledShape], test: &[LabeledShape], sizes: &[usize], repeats: usize, cfg: &RunConfig, parallelism: usize) -> Result<DigitReport> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in train.iter().enumerate() {
        by_class.entry(s.label.as_str()).or_default().push(i);
    }
    let largest = sizes.iter().copied().max().unwrap_or(0);
    if let Some((c, v)) = by_class.iter().find(|(_, v)| v.len() < largest) {
        return Err(Error::Dataset(format!("class {c} has {} training shapes, need {largest}", v.len())));
    }
    let terms = error_matrix(test, train, cfg, parallelism, false)?;
    let rho = rho_for(cfg, &terms);
    let xi = xi_matrix(&terms, rho);
    let mut per_size: Vec<Vec<f64>> = vec![Vec::new(); sizes.len()];
    for r in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
        let perms: BTreeMap<&str, Vec<usize>> = by_class
            .iter()
            .map(|(c, v)| {
                let mut p = v.clone();
                p.shuffle(&mut rng);
                (*c, p)
            })
            .collect();
        for (si, &size) in sizes.iter().enumerate() {
            let mut correct = 0;
            for (qi, q) in test.iter().enumerate() {
                let errors: Vec<(&str, Vec<f64>)> =
                    perms.iter().map(|(c, p)| (*c, p[..size].iter().filter_map(|&j| xi[qi][j]).collect())).collect();
                let pick = nearest_mean_group(errors.iter().map(|(c, e)| (*c, e.as_slice())));
                if pick == Some(q.label.as_str()) {
                    correct += 1;
                }
            }
            per_size[si].push(correct as f64 / test.len() as f64);
        }
    }
    let sizes_out = sizes
        .iter()
        .zip(per_size)
        .map(|(&size, rates)| {
            let (mean, sd) = mean_sd(&rates);
            GroupSizeResult { size, mean, sd, rates }
        })
        .collect();
    let ql: Vec<&str> = test.iter().map(|s| s.label.as_str()).collect();
    let il: Vec<&str> = train.iter().map(|s| s.label.as_str()).collect();
    let retrieval = [1.0, 1.5, 2.0].iter().map(|&k| (k, retrieval_quotient(&xi, &ql, &il, k))).collect();
    Ok(DigitReport {
        engine_version: ENGINE_VERSION.to_string(),
        config: cfg.clone(),
        seed: cfg.seed,
        repeats,
        classes: by_class.keys().map(|s| s.to_string()).collect(),
        test_items: test.len(),
        rho,
        sizes: sizes_out,
        retrieval,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaveOneOutReport {
    pub engine_version: String,
    pub config: RunConfig,
    pub seed: u64,
    pub classes: Vec<String>,
    pub items: usize,
    pub rho: f64,
    pub success: f64,
    pub retrieval: Vec<(f64, f64)>,
}

/// Each shape goes to the class whose other members record the least mean ξ.
pub fn leave_one_out_bench(shapes: &[LabeledShape], cfg: &RunConfig, parallelism: usize) -> Result<LeaveOneOutReport> {
    let terms = error_matrix(shapes, shapes, cfg, parallelism, true)?;
    let rho = rho_for(cfg, &terms);
    let xi = xi_matrix(&terms, rho);
    let mut classes: Vec<String> = shapes.iter().map(|s| s.label.clone()).collect();
    classes.dedup();
    let mut correct = 0;
    for (i, q) in shapes.iter().enumerate() {
        let errors: Vec<(&str, Vec<f64>)> = classes
            .iter()
            .map(|c| (c.as_str(), shapes.iter().enumerate().filter(|(_, s)| &s.label == c).filter_map(|(j, _)| xi[i][j]).collect()))
            .collect();
        if nearest_mean_group(errors.iter().map(|(c, e)| (*c, e.as_slice()))) == Some(q.label.as_str()) {
            correct += 1;
        }
    }
    let labels: Vec<&str> = shapes.iter().map(|s| s.label.as_str()).collect();
    let retrieval = [1.0, 1.5, 2.0].iter().map(|&k| (k, retrieval_quotient(&xi, &labels, &labels, k))).collect();
    Ok(LeaveOneOutReport {
        engine_version: ENGINE_VERSION.to_string(),
        config: cfg.clone(),
        seed: cfg.seed,
        classes,
        items: shapes.len(),
        rho,
        success: correct as f64 / shapes.len().max(1) as f64,
        retrieval,
    })
}
