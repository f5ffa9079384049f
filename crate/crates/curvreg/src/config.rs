//! Run configuration shared by the batch runner, the classifier and the CLI.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::register::RegisterOptions;

pub const ENGINE_VERSION: &str = concat!("curvreg-", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoMode {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub resample_n: usize,
    #[serde(flatten)]
    pub register: RegisterOptions,
    pub alpha_base: f64,
    pub rho: RhoMode,
    /// Read from config files but left out of outputs, which must not depend on it.
    #[serde(skip_serializing)]
    pub parallelism: usize,
    pub seed: u64,
    /// Drop symbols whose intra-document scores fail the KS normality check.
    pub ks_gate: bool,
    /// Unix seconds written into store records; the current time when unset.
    pub timestamp: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            resample_n: 256,
            register: RegisterOptions::default(),
            alpha_base: 1e-4,
            rho: RhoMode::Auto,
            parallelism: 1,
            seed: 0,
            ks_gate: false,
            timestamp: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp.unwrap_or_else(|| {
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
        })
    }
}
