use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph;
use crate::matrix::Matrix;
use crate::model::ForwardVars;
use crate::training::LabelSet;

/// Floor applied to probabilities inside the logarithm.
pub const LOG_FLOOR: f64 = 1e-15;

/// `-Σ_{l labeled} ln Z[l, y_l]`, summed (not averaged) over labeled nodes.
pub fn masked_cross_entropy(tape: &mut Tape, probabilities: Var, labels: &LabelSet) -> Result<Var> {
    let (n, classes) = tape.value(probabilities).shape();
    if labels.len() != n {
        return Err(Error::Contract(format!(
            "{} labels for {n} nodes",
            labels.len()
        )));
    }
    if labels.num_labeled() == 0 {
        return Err(Error::Contract("no labeled nodes".into()));
    }
    let mut selector = Matrix::zeros(n, classes);
    for node in labels.labeled_nodes() {
        let class = labels.label(node);
        if class >= classes {
            return Err(Error::Contract(format!(
                "node {node} has class {class} but the model has {classes} outputs"
            )));
        }
        selector.set(node, class, 1.0);
    }
    let log_probs = tape.ln_clamped(probabilities, LOG_FLOOR);
    let selector = tape.constant(selector);
    let picked = tape.mul(log_probs, selector)?;
    let total = tape.sum(picked);
    Ok(tape.scale(total, -1.0))
}

/// Cross-entropy plus `gamma · ‖A‖_F²` on the raw adjacency. At `gamma = 0`
/// the cross-entropy node itself is returned.
pub fn total_loss(tape: &mut Tape, output: &ForwardVars, labels: &LabelSet, gamma: f64) -> Result<Var> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Contract(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    let ce = masked_cross_entropy(tape, output.probabilities, labels)?;
    if gamma == 0.0 {
        return Ok(ce);
    }
    let frob = graph::frobenius_sq(tape, output.graph.raw);
    let penalty = tape.scale(frob, gamma);
    tape.add(ce, penalty)
}
