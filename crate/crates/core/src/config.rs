//! Serializable description of a complete run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lcp::LcpParams;
use crate::model::BoundaryMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum AlgorithmConfig {
    Bpe {
        vocab_size: usize,
        #[serde(default)]
        merge_singletons: bool,
    },
    BpeDropout {
        vocab_size: usize,
        #[serde(default)]
        merge_singletons: bool,
        dropout: f64,
        /// Number of segmentations to emit.
        passes: usize,
    },
    LcpDropout(LcpParams),
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::Bpe { .. } => "bpe",
            AlgorithmConfig::BpeDropout { .. } => "bpe-dropout",
            AlgorithmConfig::LcpDropout(_) => "lcp-dropout",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmConfig::Bpe { vocab_size, .. } if *vocab_size == 0 => {
                Err(Error::Param("vocab size must be positive".into()))
            }
            AlgorithmConfig::BpeDropout {
                vocab_size,
                dropout,
                passes,
                ..
            } => {
                if *vocab_size == 0 || *passes == 0 {
                    Err(Error::Param(
                        "vocab size and passes must be positive".into(),
                    ))
                } else if !(0.0..=1.0).contains(dropout) {
                    Err(Error::Param(format!(
                        "dropout must lie in [0, 1], got {dropout}"
                    )))
                } else {
                    Ok(())
                }
            }
            AlgorithmConfig::LcpDropout(params) => params.validate(),
            AlgorithmConfig::Bpe { .. } => Ok(()),
        }
    }
}

/// Everything needed to reproduce a run. The seed is always explicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub algorithm: AlgorithmConfig,
    pub seed: u64,
    #[serde(default)]
    pub boundary_mode: BoundaryMode,
    pub input: PathBuf,
    /// Model path; pass files and metadata are written next to it.
    pub output: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.algorithm.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::file(path, e))
    }

    /// Output path without its extension; prefix of the pass files.
    pub fn stem(&self) -> PathBuf {
        self.output.with_extension("")
    }
}
