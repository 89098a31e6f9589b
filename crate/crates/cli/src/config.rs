//! Optional TOML experiment file. Every key is optional; a command flag
//! overrides the file, and the file overrides the built-in default.
//!
//! ```toml
//! seed = 7
//! preset = "pitch-like"
//! cycles = 9
//! steps = 200
//! train_cycles = 6
//! k = [9, 9, 9]
//! epsilon = 0.05
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub cycles: Option<usize>,
    pub steps: Option<usize>,
    pub noise: Option<f64>,
    pub amplitude: Option<f64>,
    pub discard_transient: Option<bool>,
    pub train_cycles: Option<usize>,
    pub k: Option<Vec<usize>>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub max_iters: Option<usize>,
    pub epsilon: Option<f64>,
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
    pub arm_length_mm: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(e.message().to_string()))
    }
}

/// `flag`, else `file`, else `default`.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_PRESET: &str = "pitch-like";
pub const DEFAULT_CYCLES: usize = 9;
pub const DEFAULT_STEPS: usize = 200;
pub const DEFAULT_AMPLITUDE: f64 = 1.0;
pub const DEFAULT_TRAIN_CYCLES: usize = 6;
pub const DEFAULT_K: usize = 9;
pub const DEFAULT_K_MIN: usize = 1;
pub const DEFAULT_K_MAX: usize = 15;
pub const DEFAULT_Q_MIN: f64 = -1.0;
pub const DEFAULT_Q_MAX: f64 = 1.0;
pub const DEFAULT_ARM_LENGTH_MM: f64 = 3.0;
