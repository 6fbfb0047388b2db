//! Central finite-difference check of every parameter gradient.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::autodiff::Tape;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::model::{self, Architecture, ModelParams, Mode};
use crate::seed::{self, derive_seed, stream};
use crate::training::{total_loss, LabelSet};

pub const GRADCHECK_STEP: f64 = 1e-6;
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

/// Denominator floor for the relative error. A central difference with step
/// 1e-6 on an O(1) loss carries about 1e-9 of cancellation error, so entries
/// smaller than this are compared absolutely, at `1e-5 * REL_FLOOR`.
pub const REL_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default)]
pub struct GradcheckOptions {
    /// Corrupts the tanh adjoint before differentiating.
    pub break_backward: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Largest analytic gradient entry; zero means the check was vacuous.
    pub max_abs_gradient: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().fold(0.0, |m, p| m.max(p.max_rel_error))
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < GRADCHECK_TOLERANCE
    }
}

const INSTANCE_MEAN: f64 = 2.0;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// A small random instance with both classes labeled and some nodes left
/// unlabeled. Features are Gaussian around a shared positive mean, which
/// keeps every node's degree well away from zero.
pub fn gradcheck_instance(nodes: usize, feature_dim: usize, seed: u64) -> (Matrix, LabelSet) {
    assert!(nodes >= 3, "need at least three nodes");
    let mut rng = seed::rng(seed);
    let data = (0..nodes * feature_dim)
        .map(|_| INSTANCE_MEAN + Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let features = Matrix::new(nodes, feature_dim, data).expect("positive dims");
    let mut labels: Vec<usize> = (0..nodes).map(|i| i % 2).collect();
    labels.shuffle(&mut rng);
    let full = LabelSet::fully_labeled(labels);
    let keep = nodes - nodes / 3;
    let mut labeled: Vec<usize> = Vec::new();
    for class in [0, 1] {
        labeled.extend((0..nodes).filter(|&i| full.label(i) == class).take(1));
    }
    let rest: Vec<usize> = (0..nodes).filter(|i| !labeled.contains(i)).take(keep - 2).collect();
    labeled.extend(rest);
    (features, full.with_labeled(&labeled))
}

fn eval_loss(
    params: &ModelParams,
    features: &Matrix,
    labels: &LabelSet,
    gamma: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let (_, out) = model::record_forward(&mut tape, params, features, Mode::Eval, 0, None)?;
    let loss = total_loss(&mut tape, &out, labels, gamma)?;
    Ok(tape.value(loss).as_slice()[0])
}

/// The down-scaled model (encoder 4, 4; GCN 4, 4, 2) used for gradient
/// checks, initialized from the `INIT` stream of `seed`.
pub fn gradcheck_model(feature_dim: usize, seed: u64) -> Result<ModelParams> {
    ModelParams::init(
        &Architecture::tiny(feature_dim),
        derive_seed(seed, &[stream::INIT]),
    )
}

/// Checks [`gradcheck_model`] for `seed` on the given instance.
pub fn gradcheck(
    features: &Matrix,
    labels: &LabelSet,
    gamma: f64,
    seed: u64,
) -> Result<GradcheckReport> {
    let params = gradcheck_model(features.cols(), seed)?;
    gradcheck_params(&params, features, labels, gamma, GradcheckOptions::default())
}

/// Compares the tape's gradients for `params` against central differences
/// with step [`GRADCHECK_STEP`], in eval mode.
pub fn gradcheck_params(
    params: &ModelParams,
    features: &Matrix,
    labels: &LabelSet,
    gamma: f64,
    options: GradcheckOptions,
) -> Result<GradcheckReport> {
    let mut tape = Tape::new();
    if options.break_backward {
        tape.inject_tanh_fault();
    }
    let (vars, out) = model::record_forward(&mut tape, params, features, Mode::Eval, 0, None)?;
    let loss = total_loss(&mut tape, &out, labels, gamma)?;
    let grads = tape.backward(loss)?;

    let names = params.names();
    let mut report = Vec::with_capacity(names.len());
    let mut probe = params.clone();
    for (slot, (name, var)) in names.into_iter().zip(vars.0).enumerate() {
        let analytic = grads.get(var).expect("parameter leaf");
        let mut check = ParamCheck {
            name,
            entries: analytic.len(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            max_abs_gradient: analytic.max_abs(),
        };
        for k in 0..analytic.len() {
            let original = probe.tensors()[slot].as_slice()[k];
            probe.tensors_mut()[slot].as_mut_slice()[k] = original + GRADCHECK_STEP;
            let plus = eval_loss(&probe, features, labels, gamma)?;
            probe.tensors_mut()[slot].as_mut_slice()[k] = original - GRADCHECK_STEP;
            let minus = eval_loss(&probe, features, labels, gamma)?;
            probe.tensors_mut()[slot].as_mut_slice()[k] = original;

            let numeric = (plus - minus) / (2.0 * GRADCHECK_STEP);
            let a = analytic.as_slice()[k];
            check.max_abs_error = check.max_abs_error.max((a - numeric).abs());
            check.max_rel_error = check.max_rel_error.max(relative_error(a, numeric));
        }
        report.push(check);
    }
    Ok(GradcheckReport { params: report })
}
