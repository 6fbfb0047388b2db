//! Feature encoder and GCN stack.
//!
//! The learnable variant runs `F → encoder → X`, builds the cosine graph of
//! `X`, and propagates `X` through three bias-free graph convolutions
//! `H ← σ(Â H W)`. ReLU follows the first two layers; the last emits raw
//! logits for the softmax head. The fixed-adjacency variant skips the
//! encoder, builds the graph once from `F`, and feeds `F` to the GCN.

use std::fmt;

use rand::Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{self, GraphPair, GraphVars};
use crate::matrix::Matrix;
use crate::seed;

pub const ENCODER_DIMS: [usize; 2] = [256, 128];
pub const GCN_DIMS: [usize; 3] = [128, 128, 2];
pub const DROPOUT_KEEP: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Encoder plus adjacency recomputed from its outputs.
    Learnable,
    /// Plain GCN over a graph built once from the raw features.
    FixedAdjacency,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Learnable => "learnable",
            Variant::FixedAdjacency => "fixed_adjacency",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learnable" => Ok(Variant::Learnable),
            "fixed_adjacency" | "fixed" => Ok(Variant::FixedAdjacency),
            other => Err(Error::Config(format!(
                "unknown variant `{other}` (expected learnable or fixed_adjacency)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub variant: Variant,
    pub feature_dim: usize,
    /// Output widths of the tanh encoder layers; empty for the fixed variant.
    pub encoder_dims: Vec<usize>,
    /// Output widths of the graph convolutions; the last is the class count.
    pub gcn_dims: Vec<usize>,
}

impl Architecture {
    /// Encoder (256, 128) with tanh, GCN channels (128, 128, 2).
    pub fn standard(feature_dim: usize) -> Self {
        Self {
            variant: Variant::Learnable,
            feature_dim,
            encoder_dims: ENCODER_DIMS.to_vec(),
            gcn_dims: GCN_DIMS.to_vec(),
        }
    }

    /// The ablation baseline: same GCN channels, no encoder.
    pub fn fixed_adjacency(feature_dim: usize) -> Self {
        Self {
            variant: Variant::FixedAdjacency,
            feature_dim,
            encoder_dims: Vec::new(),
            gcn_dims: GCN_DIMS.to_vec(),
        }
    }

    pub fn for_variant(variant: Variant, feature_dim: usize) -> Self {
        match variant {
            Variant::Learnable => Self::standard(feature_dim),
            Variant::FixedAdjacency => Self::fixed_adjacency(feature_dim),
        }
    }

    /// Down-scaled learnable model used for finite-difference checks.
    pub fn tiny(feature_dim: usize) -> Self {
        Self {
            variant: Variant::Learnable,
            feature_dim,
            encoder_dims: vec![4, 4],
            gcn_dims: vec![4, 4, 2],
        }
    }

    pub fn num_classes(&self) -> usize {
        *self.gcn_dims.last().expect("at least one GCN layer")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("architecture: {msg}")));
        if self.feature_dim == 0 {
            return bad("feature_dim must be at least 1");
        }
        if self.gcn_dims.is_empty() || self.gcn_dims.contains(&0) {
            return bad("GCN widths must be non-empty and positive");
        }
        if self.encoder_dims.contains(&0) {
            return bad("encoder widths must be positive");
        }
        match (self.variant, self.encoder_dims.is_empty()) {
            (Variant::Learnable, true) => bad("learnable variant needs an encoder"),
            (Variant::FixedAdjacency, false) => bad("fixed-adjacency variant has no encoder"),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub arch: Architecture,
    pub encoder: Vec<DenseLayer>,
    pub gcn: Vec<Matrix>,
}

/// Glorot-uniform bound for a `fan_in x fan_out` weight.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Matrix {
    let limit = glorot_limit(fan_in, fan_out);
    let dist = Uniform::new_inclusive(-limit, limit);
    let data = (0..fan_in * fan_out).map(|_| rng.sample(dist)).collect();
    Matrix::new(fan_in, fan_out, data).expect("positive dims")
}

/// Standard architecture, Glorot-initialized from `seed`.
pub fn init_params(feature_dim: usize, seed: u64) -> Result<ModelParams> {
    ModelParams::init(&Architecture::standard(feature_dim), seed)
}

impl ModelParams {
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = seed::rng(seed);
        let mut fan_in = arch.feature_dim;
        let mut encoder = Vec::with_capacity(arch.encoder_dims.len());
        for &width in &arch.encoder_dims {
            encoder.push(DenseLayer {
                weight: glorot(&mut rng, fan_in, width),
                bias: Matrix::zeros(1, width),
            });
            fan_in = width;
        }
        let mut gcn = Vec::with_capacity(arch.gcn_dims.len());
        for &width in &arch.gcn_dims {
            gcn.push(glorot(&mut rng, fan_in, width));
            fan_in = width;
        }
        Ok(Self {
            arch: arch.clone(),
            encoder,
            gcn,
        })
    }

    /// Parameter names in canonical order.
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.encoder.len() {
            names.push(format!("encoder.{i}.weight"));
            names.push(format!("encoder.{i}.bias"));
        }
        for i in 0..self.gcn.len() {
            names.push(format!("gcn.{i}.weight"));
        }
        names
    }

    /// Parameters in canonical order.
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out = Vec::new();
        for layer in &self.encoder {
            out.push(&layer.weight);
            out.push(&layer.bias);
        }
        out.extend(self.gcn.iter());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for layer in &mut self.encoder {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out.extend(self.gcn.iter_mut());
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|m| m.len()).sum()
    }

    /// Rebuilds parameters from tensors given in canonical order.
    pub fn from_tensors(arch: Architecture, tensors: Vec<Matrix>) -> Result<Self> {
        let template = ModelParams::init(&arch, 0)?;
        let expected = template.tensors();
        if tensors.len() != expected.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((t, e), name) in tensors.iter().zip(&expected).zip(template.names()) {
            if t.shape() != e.shape() {
                return Err(Error::Checkpoint(format!(
                    "{name}: expected {}x{}, got {}x{}",
                    e.rows(),
                    e.cols(),
                    t.rows(),
                    t.cols()
                )));
            }
            if !t.is_finite() {
                return Err(Error::Checkpoint(format!("{name}: non-finite entry")));
            }
        }
        let mut it = tensors.into_iter();
        let encoder = (0..arch.encoder_dims.len())
            .map(|_| DenseLayer {
                weight: it.next().expect("counted"),
                bias: it.next().expect("counted"),
            })
            .collect();
        let gcn = it.collect();
        Ok(Self { arch, encoder, gcn })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    /// Inverted dropout on the input of every GCN layer.
    Train { keep_prob: f64 },
    Eval,
}

impl Mode {
    pub fn train() -> Self {
        Mode::Train {
            keep_prob: DROPOUT_KEEP,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub embeddings: Matrix,
    pub graph: GraphPair,
    pub logits: Matrix,
    pub probabilities: Matrix,
}

/// Tape handles for the parameters, in canonical order.
#[derive(Clone, Debug)]
pub struct ParamVars(pub Vec<Var>);

#[derive(Clone, Copy, Debug)]
pub struct ForwardVars {
    pub embeddings: Var,
    pub graph: GraphVars,
    pub logits: Var,
    pub probabilities: Var,
}

impl ForwardVars {
    pub fn materialize(&self, tape: &Tape) -> ForwardOutput {
        ForwardOutput {
            embeddings: tape.value(self.embeddings).clone(),
            graph: self.graph.materialize(tape),
            logits: tape.value(self.logits).clone(),
            probabilities: tape.value(self.probabilities).clone(),
        }
    }
}

fn check_features(params: &ModelParams, features: &Matrix) -> Result<()> {
    if features.cols() != params.arch.feature_dim {
        return Err(Error::Shape {
            op: "model input",
            left: features.shape(),
            right: (features.rows(), params.arch.feature_dim),
        });
    }
    Ok(())
}

fn record_encoder(tape: &mut Tape, layers: &[(Var, Var)], input: Var) -> Result<Var> {
    let mut h = input;
    for &(w, b) in layers {
        let z = tape.matmul(h, w)?;
        let z = tape.add(z, b)?;
        h = tape.tanh(z);
    }
    Ok(h)
}

/// `tanh(… tanh(F W₁ + b₁) …)` for the learnable variant.
pub fn encode(params: &ModelParams, features: &Matrix) -> Result<Matrix> {
    check_features(params, features)?;
    let mut tape = Tape::new();
    let f = tape.constant(features.clone());
    let layers: Vec<(Var, Var)> = params
        .encoder
        .iter()
        .map(|l| (tape.constant(l.weight.clone()), tape.constant(l.bias.clone())))
        .collect();
    let x = record_encoder(&mut tape, &layers, f)?;
    Ok(tape.value(x).clone())
}

/// Records the full forward pass on `tape`, with every parameter as a
/// gradient-carrying leaf.
///
/// `fixed_graph` lets the fixed-adjacency variant reuse a precomputed graph;
/// when `None` it is rebuilt from `features`. It is ignored by the learnable
/// variant.
pub fn record_forward(
    tape: &mut Tape,
    params: &ModelParams,
    features: &Matrix,
    mode: Mode,
    rng_seed: u64,
    fixed_graph: Option<&GraphPair>,
) -> Result<(ParamVars, ForwardVars)> {
    check_features(params, features)?;
    let f = tape.constant(features.clone());

    let mut vars = Vec::new();
    let mut enc = Vec::with_capacity(params.encoder.len());
    for layer in &params.encoder {
        let w = tape.param(layer.weight.clone());
        let b = tape.param(layer.bias.clone());
        vars.extend([w, b]);
        enc.push((w, b));
    }
    let gcn: Vec<Var> = params.gcn.iter().map(|w| tape.param(w.clone())).collect();
    vars.extend(&gcn);

    let (embeddings, graph) = match params.arch.variant {
        Variant::Learnable => {
            let x = record_encoder(tape, &enc, f)?;
            let a = graph::cosine_adjacency(tape, x)?;
            (x, graph::normalize_adjacency(tape, a)?)
        }
        Variant::FixedAdjacency => {
            let owned;
            let pair = match fixed_graph {
                Some(g) => g,
                None => {
                    owned = GraphPair::from_features(features)?;
                    &owned
                }
            };
            let gv = GraphVars {
                raw: tape.constant(pair.raw.clone()),
                normalized: tape.constant(pair.normalized.clone()),
                degree: tape.constant(pair.degree.clone()),
            };
            (f, gv)
        }
    };

    let mut rng = seed::rng(rng_seed);
    let mut h = embeddings;
    let last = gcn.len() - 1;
    for (l, &w) in gcn.iter().enumerate() {
        if let Mode::Train { keep_prob } = mode {
            if keep_prob < 1.0 {
                let (r, c) = tape.value(h).shape();
                let scale = 1.0 / keep_prob;
                let data = (0..r * c)
                    .map(|_| if rng.gen::<f64>() < keep_prob { scale } else { 0.0 })
                    .collect();
                let mask = tape.constant(Matrix::new(r, c, data)?);
                h = tape.mul(h, mask)?;
            }
        }
        let hw = tape.matmul(h, w)?;
        let propagated = tape.matmul(graph.normalized, hw)?;
        h = if l < last {
            tape.relu(propagated)
        } else {
            propagated
        };
    }
    let probabilities = tape.row_softmax(h);
    Ok((
        ParamVars(vars),
        ForwardVars {
            embeddings,
            graph,
            logits: h,
            probabilities,
        },
    ))
}

/// Full forward pass. `rng_seed` only matters in train mode.
pub fn forward(
    params: &ModelParams,
    features: &Matrix,
    mode: Mode,
    rng_seed: u64,
) -> Result<ForwardOutput> {
    let mut tape = Tape::new();
    let (_, out) = record_forward(&mut tape, params, features, mode, rng_seed, None)?;
    Ok(out.materialize(&tape))
}
