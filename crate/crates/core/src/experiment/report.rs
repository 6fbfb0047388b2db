use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Variant;

/// Outcome of one trained model evaluated on one test fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: Variant,
    pub budget: usize,
    pub gamma: f64,
    pub repeat: usize,
    pub fold: usize,
    pub auc: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub n_labeled: usize,
    pub n_labeled_positive: usize,
    pub n_test: usize,
    /// Digest of the fold assignment used by this run.
    pub split_hash: String,
}

/// A run that stopped on a numeric failure, kept when the plan asks to keep
/// going.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub variant: Variant,
    pub budget: usize,
    pub gamma: f64,
    pub repeat: usize,
    pub fold: usize,
    pub error: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub variant: Variant,
    pub budget: usize,
    pub gamma: f64,
    pub runs: usize,
    pub auc: Stat,
    pub accuracy: Stat,
    pub sensitivity: Stat,
    pub specificity: Stat,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub master_seed: u64,
    pub folds: usize,
    pub repeats: usize,
    pub cells: Vec<CellSummary>,
    pub runs: Vec<RunRecord>,
    #[serde(default)]
    pub failures: Vec<RunFailure>,
}

impl SweepReport {
    /// Summary for a cell, if present.
    pub fn cell(&self, variant: Variant, budget: usize, gamma: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.budget == budget && c.gamma == gamma)
    }

    pub fn runs_of(&self, variant: Variant, budget: usize, gamma: f64) -> Vec<&RunRecord> {
        self.runs
            .iter()
            .filter(|r| r.variant == variant && r.budget == budget && r.gamma == gamma)
            .collect()
    }

    pub fn failures_of(&self, variant: Variant, budget: usize, gamma: f64) -> Vec<&RunFailure> {
        self.failures
            .iter()
            .filter(|r| r.variant == variant && r.budget == budget && r.gamma == gamma)
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per run: `variant,budget,gamma,repeat,fold,auc,acc,sens,spec`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let map = |e: csv::Error| Error::Dataset(format!("writing report CSV: {e}"));
        w.write_record([
            "variant", "budget", "gamma", "repeat", "fold", "auc", "acc", "sens", "spec",
        ])
        .map_err(map)?;
        for r in &self.runs {
            w.write_record([
                r.variant.to_string(),
                r.budget.to_string(),
                r.gamma.to_string(),
                r.repeat.to_string(),
                r.fold.to_string(),
                r.auc.to_string(),
                r.accuracy.to_string(),
                r.sensitivity.to_string(),
                r.specificity.to_string(),
            ])
            .map_err(map)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Dataset(format!("writing report CSV: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub(crate) fn summarize(key: (Variant, usize, f64), runs: &[&RunRecord]) -> CellSummary {
    let pick = |f: fn(&RunRecord) -> f64| Stat::of(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
    CellSummary {
        variant: key.0,
        budget: key.1,
        gamma: key.2,
        runs: runs.len(),
        auc: pick(|r| r.auc),
        accuracy: pick(|r| r.accuracy),
        sensitivity: pick(|r| r.sensitivity),
        specificity: pick(|r| r.specificity),
    }
}
