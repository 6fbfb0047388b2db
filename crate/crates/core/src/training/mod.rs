//! Loss, optimizer and the full-graph training loop.

mod adam;
mod gradcheck;
mod loss;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use gradcheck::{
    gradcheck, gradcheck_instance, gradcheck_model, gradcheck_params, relative_error,
    GradcheckOptions, GradcheckReport, ParamCheck, GRADCHECK_STEP, GRADCHECK_TOLERANCE, REL_FLOOR,
};
pub use loss::{masked_cross_entropy, total_loss, LOG_FLOOR};

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::graph::GraphPair;
use crate::matrix::Matrix;
use crate::model::{self, Architecture, ModelParams, Mode, Variant};
use crate::seed::{derive_seed, stream};

/// Per-node class labels and the mask of nodes whose label may be used.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    labels: Vec<usize>,
    labeled_mask: Vec<bool>,
}

impl LabelSet {
    pub fn new(labels: Vec<usize>, labeled_mask: Vec<bool>) -> Result<Self> {
        if labels.len() != labeled_mask.len() {
            return Err(Error::Contract(format!(
                "{} labels but mask of length {}",
                labels.len(),
                labeled_mask.len()
            )));
        }
        if let Some((node, &class)) = labels.iter().enumerate().find(|(_, &c)| c > 1) {
            return Err(Error::Contract(format!(
                "node {node} has class {class}; only 0 and 1 are supported"
            )));
        }
        Ok(Self {
            labels,
            labeled_mask,
        })
    }

    pub fn fully_labeled(labels: Vec<usize>) -> Self {
        let mask = vec![true; labels.len()];
        Self::new(labels, mask).expect("binary labels")
    }

    /// Same labels, with only `nodes` visible.
    pub fn with_labeled(&self, nodes: &[usize]) -> Self {
        let mut mask = vec![false; self.labels.len()];
        for &n in nodes {
            mask[n] = true;
        }
        Self {
            labels: self.labels.clone(),
            labeled_mask: mask,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn is_labeled(&self, node: usize) -> bool {
        self.labeled_mask[node]
    }

    pub fn mask(&self) -> &[bool] {
        &self.labeled_mask
    }

    pub fn labeled_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.labeled_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
    }

    pub fn num_labeled(&self) -> usize {
        self.labeled_mask.iter().filter(|&&m| m).count()
    }

    /// Overwrites the label of a node, labeled or not.
    pub fn set_label(&mut self, node: usize, class: usize) {
        assert!(class <= 1);
        self.labels[node] = class;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Weight of the squared Frobenius norm of the raw adjacency.
    pub gamma: f64,
    pub epochs: usize,
    pub dropout_keep: f64,
    pub seed: u64,
    pub variant: Variant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            weight_decay: 5e-5,
            gamma: 0.0,
            epochs: 300,
            dropout_keep: model::DROPOUT_KEEP,
            seed: 0,
            variant: Variant::Learnable,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::Config(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return Err(Error::Config(format!(
                "dropout_keep must be in (0, 1], got {}",
                self.dropout_keep
            )));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    /// Seed used for parameter initialization by [`train`].
    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, &[stream::INIT])
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Loss of each epoch's forward pass, before that epoch's update.
    pub loss_history: Vec<f64>,
}

/// What an observer sees after each epoch's backward pass, before the
/// parameter update.
pub struct EpochView<'a> {
    pub epoch: usize,
    pub loss: f64,
    pub params: &'a ModelParams,
    pub normalized_adjacency: &'a Matrix,
    pub degree: &'a Matrix,
}

/// Loss and gradients (canonical parameter order) for one forward pass.
pub fn loss_and_gradients(
    params: &ModelParams,
    features: &Matrix,
    labels: &LabelSet,
    gamma: f64,
    mode: Mode,
    rng_seed: u64,
    fixed_graph: Option<&GraphPair>,
) -> Result<(f64, Vec<Matrix>)> {
    let mut tape = Tape::new();
    let (vars, out) = model::record_forward(&mut tape, params, features, mode, rng_seed, fixed_graph)?;
    let loss = total_loss(&mut tape, &out, labels, gamma)?;
    let grads = tape.backward(loss)?;
    let grads = vars
        .0
        .iter()
        .map(|&v| grads.get(v).expect("parameter leaf").clone())
        .collect();
    Ok((tape.value(loss).as_slice()[0], grads))
}

fn check_inputs(features: &Matrix, labels: &LabelSet) -> Result<()> {
    if features.rows() != labels.len() {
        return Err(Error::Contract(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if labels.num_labeled() == 0 {
        return Err(Error::Contract("training needs at least one labeled node".into()));
    }
    Ok(())
}

/// Initializes the architecture implied by `config.variant` and trains it.
pub fn train(features: &Matrix, labels: &LabelSet, config: &TrainConfig) -> Result<TrainOutcome> {
    let arch = Architecture::for_variant(config.variant, features.cols());
    let params = ModelParams::init(&arch, config.init_seed())?;
    train_from(params, features, labels, config, |_| {})
}

/// Trains `params` for `config.epochs` full-graph steps. `config.variant` is
/// ignored in favour of `params.arch.variant`.
pub fn train_from(
    mut params: ModelParams,
    features: &Matrix,
    labels: &LabelSet,
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochView<'_>),
) -> Result<TrainOutcome> {
    config.validate()?;
    check_inputs(features, labels)?;
    let fixed_graph = match params.arch.variant {
        Variant::FixedAdjacency => Some(GraphPair::from_features(features)?),
        Variant::Learnable => None,
    };
    let mode = Mode::Train {
        keep_prob: config.dropout_keep,
    };
    let adam_config = config.adam();
    let mut state = AdamState::for_params(&params);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let at_epoch = |e: Error| Error::Training {
            epoch,
            source: Box::new(e),
        };
        let dropout_seed = derive_seed(config.seed, &[stream::DROPOUT, epoch as u64]);
        let mut tape = Tape::new();
        let (vars, out) = model::record_forward(
            &mut tape,
            &params,
            features,
            mode,
            dropout_seed,
            fixed_graph.as_ref(),
        )
        .map_err(at_epoch)?;
        let loss_var = total_loss(&mut tape, &out, labels, config.gamma).map_err(at_epoch)?;
        let loss = tape.value(loss_var).as_slice()[0];
        if !loss.is_finite() {
            return Err(at_epoch(Error::NonFinite("loss")));
        }
        let grads = tape.backward(loss_var).map_err(at_epoch)?;
        let grads: Vec<Matrix> = vars
            .0
            .iter()
            .map(|&v| grads.get(v).expect("parameter leaf").clone())
            .collect();
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(at_epoch(Error::NonFinite("gradient")));
        }
        observer(&EpochView {
            epoch,
            loss,
            params: &params,
            normalized_adjacency: tape.value(out.graph.normalized),
            degree: tape.value(out.graph.degree),
        });
        adam_step(&mut params, &grads, &mut state, &adam_config).map_err(at_epoch)?;
        history.push(loss);
    }
    Ok(TrainOutcome {
        params,
        loss_history: history,
    })
}

/// Writes `epoch,loss` rows.
pub fn write_loss_csv<W: std::io::Write>(history: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::Dataset(format!("writing loss history: {e}"));
    w.write_record(["epoch", "loss"]).map_err(map)?;
    for (epoch, loss) in history.iter().enumerate() {
        w.write_record([epoch.to_string(), loss.to_string()])
            .map_err(map)?;
    }
    w.flush()
        .map_err(|e| Error::Dataset(format!("writing loss history: {e}")))?;
    Ok(())
}
