//! Synthetic multi-hand corpora with known ground truth.
//!
//! Each hand draws its own smooth random prototype per symbol. Instances add smaller
//! per-instance radial noise and a random anisotropic scale, rotation and translation.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contour::{Contour, Document};
use crate::corpus::{Manifest, ManifestDocument};
use crate::error::Result;
use crate::geom::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    pub hands: usize,
    pub docs_per_hand: usize,
    pub symbols: usize,
    pub instances: usize,
    /// Per-instance radial noise amplitude relative to the radius.
    pub noise: f64,
    /// Prototype radial deformation amplitude relative to the radius.
    pub shape_amplitude: f64,
    pub points: usize,
    pub radius: f64,
    /// Random scale, rotation and translation per instance.
    pub transforms: bool,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            hands: 3,
            docs_per_hand: 4,
            symbols: 5,
            instances: 8,
            noise: 0.02,
            shape_amplitude: 0.35,
            points: 256,
            radius: 40.0,
            transforms: true,
            seed: 0,
        }
    }
}

/// Radial profile r(t) = 1 + Σ c_k cos kt + s_k sin kt.
#[derive(Debug, Clone)]
struct Radial(Vec<(f64, f64)>);

impl Radial {
    fn random(rng: &mut ChaCha8Rng, amp: f64, kmin: usize, kmax: usize) -> Self {
        let coefs = (0..=kmax)
            .map(|k| {
                if k < kmin {
                    (0.0, 0.0)
                } else {
                    let s = amp / k as f64;
                    (s * rng.random_range(-1.0..1.0), s * rng.random_range(-1.0..1.0))
                }
            })
            .collect();
        Radial(coefs)
    }

    fn eval(&self, t: f64) -> f64 {
        self.0.iter().enumerate().map(|(k, (c, s))| c * (k as f64 * t).cos() + s * (k as f64 * t).sin()).sum()
    }
}

fn outline(parts: &[&Radial], n: usize, radius: f64) -> Vec<Vec2> {
    let raw: Vec<f64> = (0..n).map(|i| parts.iter().map(|p| p.eval(TAU * i as f64 / n as f64)).sum()).collect();
    // keep the radius positive by shrinking deformations that would fold the loop
    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let k = if lo < -0.6 { 0.6 / -lo } else { 1.0 };
    raw.iter()
        .enumerate()
        .map(|(i, d)| {
            let t = TAU * i as f64 / n as f64;
            Vec2::new(t.cos(), t.sin()) * (radius * (1.0 + k * d))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    /// Document id → true hand index.
    pub truth: BTreeMap<String, usize>,
    pub options: SynthOptions,
}

#[derive(Serialize)]
struct Truth<'a> {
    hands: &'a BTreeMap<String, usize>,
    options: &'a SynthOptions,
}

pub fn symbol_label(s: usize) -> String {
    format!("s{s:02}")
}

pub fn generate(opts: &SynthOptions) -> Result<SynthCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let protos: Vec<Vec<Radial>> =
        (0..opts.hands).map(|_| (0..opts.symbols).map(|_| Radial::random(&mut rng, opts.shape_amplitude, 2, 5)).collect()).collect();
    let ndocs = opts.hands * opts.docs_per_hand;
    let mut ids: Vec<usize> = (0..ndocs).collect();
    ids.shuffle(&mut rng);
    let mut documents = Vec::with_capacity(ndocs);
    let mut truth = BTreeMap::new();
    for (slot, &id) in ids.iter().enumerate() {
        let hand = slot / opts.docs_per_hand.max(1);
        let doc_id = format!("d{id:02}");
        let mut doc = Document::new(doc_id.clone());
        for s in 0..opts.symbols {
            let mut list = Vec::with_capacity(opts.instances);
            for k in 0..opts.instances {
                let noise = Radial::random(&mut rng, opts.noise, 2, 8);
                let mut pts = outline(&[&protos[hand][s], &noise], opts.points, opts.radius);
                if opts.transforms {
                    let (a, b) = (rng.random_range(0.8..1.25), rng.random_range(0.8..1.25));
                    let t = rng.random_range(-PI..PI);
                    let g = Vec2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
                    for p in &mut pts {
                        *p = Vec2::new(a * p.x, b * p.y).rotate(t) + g;
                    }
                }
                list.push(Contour::new(format!("{doc_id}/{}/{k}", symbol_label(s)), pts)?);
            }
            doc.instances.insert(symbol_label(s), list);
        }
        truth.insert(doc_id, hand);
        documents.push(doc);
    }
    documents.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(SynthCorpus { documents, truth, options: opts.clone() })
}

impl SynthCorpus {
    /// Writes `docs/<doc>/<symbol>_<k>.csv`, `manifest.json` and `truth.json`.
    pub fn write(&self, dir: &Path) -> Result<Manifest> {
        let mut manifest = Manifest { documents: Vec::new() };
        for d in &self.documents {
            let ddir = dir.join("docs").join(&d.id);
            std::fs::create_dir_all(&ddir)?;
            let mut symbols = BTreeMap::new();
            for (sym, list) in &d.instances {
                let mut files = Vec::new();
                for (k, c) in list.iter().enumerate() {
                    let rel = Path::new("docs").join(&d.id).join(format!("{sym}_{k}.csv"));
                    c.save(&dir.join(&rel))?;
                    files.push(rel);
                }
                symbols.insert(sym.clone(), files);
            }
            manifest.documents.push(ManifestDocument { id: d.id.clone(), symbols });
        }
        manifest.save(&dir.join("manifest.json"))?;
        let truth = Truth { hands: &self.truth, options: &self.options };
        std::fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&truth)?)?;
        Ok(manifest)
    }
}
