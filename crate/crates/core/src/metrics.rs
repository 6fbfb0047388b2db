//! Binary classification metrics over a subset of nodes.
//!
//! Class 1 is the positive class and its softmax probability is the score.
//! AUC is computed twice, independently: by counting ordered
//! positive/negative pairs, and by integrating the ROC curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::training::LabelSet;

pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn sensitivity(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn specificity(&self) -> Option<f64> {
        let d = self.tn + self.fp;
        (d > 0).then(|| self.tn as f64 / d as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let d = self.total();
        (d > 0).then(|| (self.tp + self.tn) as f64 / d as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub roc_points: Vec<(f64, f64)>,
    pub n_eval: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `fpr,tpr` rows.
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (fpr, tpr) in &self.roc_points {
            out.push_str(&format!("{fpr},{tpr}\n"));
        }
        out
    }
}

/// Scores and labels of the masked-in nodes.
fn gather(
    probabilities: &Matrix,
    labels: &LabelSet,
    eval_mask: &[bool],
) -> Result<(Vec<f64>, Vec<bool>)> {
    let n = probabilities.rows();
    if probabilities.cols() != 2 {
        return Err(Error::Contract(format!(
            "binary metrics need 2 probability columns, got {}",
            probabilities.cols()
        )));
    }
    if labels.len() != n || eval_mask.len() != n {
        return Err(Error::Contract(format!(
            "{n} prediction rows, {} labels, mask of length {}",
            labels.len(),
            eval_mask.len()
        )));
    }
    let mut scores = Vec::new();
    let mut positive = Vec::new();
    for node in (0..n).filter(|&i| eval_mask[i]) {
        scores.push(probabilities.get(node, 1));
        positive.push(labels.label(node) == 1);
    }
    Ok((scores, positive))
}

/// Counts with the rule "predicted positive iff score ≥ threshold".
pub fn confusion_counts(scores: &[f64], positive: &[bool], threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&s, &p) in scores.iter().zip(positive) {
        match (s >= threshold, p) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

pub fn confusion(
    probabilities: &Matrix,
    labels: &LabelSet,
    eval_mask: &[bool],
    threshold: f64,
) -> Result<Confusion> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Contract(format!(
            "threshold must be in [0, 1], got {threshold}"
        )));
    }
    let (scores, positive) = gather(probabilities, labels, eval_mask)?;
    Ok(confusion_counts(&scores, &positive, threshold))
}

fn class_counts(positive: &[bool]) -> Result<(usize, usize)> {
    let pos = positive.iter().filter(|&&p| p).count();
    let neg = positive.len() - pos;
    match (pos, neg) {
        (0, _) => Err(Error::UndefinedAuc(0)),
        (_, 0) => Err(Error::UndefinedAuc(1)),
        counts => Ok(counts),
    }
}

/// Fraction of positive/negative pairs ordered correctly, ties counting ½.
pub fn auc_mann_whitney(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let (pos, neg) = class_counts(positive)?;
    let mut wins = 0.0;
    let pairs = || scores.iter().zip(positive);
    for (&sp, _) in pairs().filter(|(_, &p)| p) {
        for (&sn, _) in pairs().filter(|(_, &p)| !p) {
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// ROC points from sweeping the threshold down through every distinct
/// score, starting at (0, 0) and ending at (1, 1).
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = class_counts(positive)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if positive[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Trapezoidal area under a piecewise-linear curve.
pub fn auc_trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

pub fn evaluate(probabilities: &Matrix, labels: &LabelSet, eval_mask: &[bool]) -> Result<EvalReport> {
    let (scores, positive) = gather(probabilities, labels, eval_mask)?;
    if scores.is_empty() {
        return Err(Error::Contract("evaluation mask selects no nodes".into()));
    }
    let auc = auc_mann_whitney(&scores, &positive)?;
    let roc_points = roc_curve(&scores, &positive)?;
    let c = confusion_counts(&scores, &positive, DECISION_THRESHOLD);
    Ok(EvalReport {
        auc,
        accuracy: c.accuracy().expect("non-empty"),
        sensitivity: c.sensitivity(),
        specificity: c.specificity(),
        roc_points,
        n_eval: scores.len(),
    })
}
