//! Document manifests and shape loading from contour files or images.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contour::{contour_from_mask, Contour};
use crate::error::{Error, Result};
use crate::raster::{binarize, Gray};
use crate::store::BatchDocument;

/// Gaussian smoothing applied to traced image boundaries, in pixels. Pixel staircases
/// survive as curvature ripples in the distance field at σ ≤ 2.
pub const TRACE_SIGMA: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestDocument {
    pub id: String,
    pub symbols: BTreeMap<String, Vec<PathBuf>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub documents: Vec<ManifestDocument>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestForm {
    Wrapped(Manifest),
    List(Vec<ManifestDocument>),
    Single(ManifestDocument),
}

impl Manifest {
    /// Reads a manifest; relative paths resolve against the manifest's directory. Accepts
    /// `{"documents": [...]}`, a bare list of documents, or one document object.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let form: ManifestForm = serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let mut m = match form {
            ManifestForm::Wrapped(m) => m,
            ManifestForm::List(documents) => Manifest { documents },
            ManifestForm::Single(d) => Manifest { documents: vec![d] },
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let mut seen = std::collections::BTreeSet::new();
        for d in &mut m.documents {
            if !seen.insert(d.id.clone()) {
                return Err(Error::Manifest(format!("duplicate document id {}", d.id)));
            }
            if d.symbols.values().any(Vec::is_empty) {
                return Err(Error::Manifest(format!("document {} lists a symbol without instances", d.id)));
            }
            for files in d.symbols.values_mut() {
                for f in files.iter_mut() {
                    if f.is_relative() {
                        *f = base.join(&f);
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Loads every instance; a file that fails to load only fails its own pairs.
    pub fn batch_documents(&self, n: usize) -> Vec<BatchDocument> {
        self.documents
            .iter()
            .map(|d| BatchDocument {
                id: d.id.clone(),
                instances: d
                    .symbols
                    .iter()
                    .map(|(sym, files)| {
                        let v = files.iter().map(|f| load_shape(f, n).map_err(|e| e.to_string())).collect();
                        (sym.clone(), v)
                    })
                    .collect(),
            })
            .collect()
    }
}

fn is_image(path: &Path) -> bool {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    matches!(ext.as_str(), "png" | "pgm" | "pnm" | "gif")
}

/// Image to contour: ink polarity from the border, threshold at half range, trace the
/// largest component, smooth and resample to `n` points.
pub fn image_contour(img: &Gray, n: usize) -> Result<Contour> {
    let (w, h) = (img.width, img.height);
    let mut border = 0.0;
    let mut count = 0.0;
    for x in 0..w {
        border += img.get(x, 0) + img.get(x, h - 1);
        count += 2.0;
    }
    for y in 0..h {
        border += img.get(0, y) + img.get(w - 1, y);
        count += 2.0;
    }
    let img = if border / count < 0.5 { Gray::new(w, h, img.data.iter().map(|v| 1.0 - v).collect()) } else { img.clone() };
    let mask = binarize(&img, 0.5)?.padded(2);
    contour_from_mask(&mask, TRACE_SIGMA, n)
}

/// Loads a contour file (`.csv`, `.json`) or traces an image, resampled to `n` points.
pub fn load_shape(path: &Path, n: usize) -> Result<Contour> {
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let c = if is_image(path) { image_contour(&Gray::load(path)?, n)? } else { Contour::load(path)?.resample(n)? };
    Ok(c.with_id(id))
}
