//! Flat TOML run configuration.
//!
//! Every key is optional; command-line flags take precedence over the
//! file, and the file over built-in defaults.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::Variant;

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub gamma: Option<f64>,
    pub epochs: Option<usize>,
    pub dropout_keep: Option<f64>,
    pub seed: Option<u64>,
    pub variant: Option<Variant>,
    pub label_budget: Option<usize>,
    pub holdout: Option<f64>,
    pub folds: Option<usize>,
    pub repeats: Option<usize>,
    pub gammas: Option<Vec<f64>>,
    pub budgets: Option<Vec<usize>>,
    pub variants: Option<Vec<Variant>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// `flag > file > default` for one key.
pub fn resolve<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
