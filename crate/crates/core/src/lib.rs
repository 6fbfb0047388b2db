//! Semi-supervised binary node classification with a graph convolutional
//! network whose adjacency matrix is the cosine similarity of learned node
//! embeddings.
//!
//! The crate carries its own reverse-mode automatic differentiation over
//! dense `f64` matrices ([`autodiff`]), the graph construction
//! ([`graph`]), the model ([`model`]), Adam training and gradient checking
//! ([`training`]), AUC and confusion metrics ([`metrics`]), and the repeated
//! cross-validation protocol ([`experiment`]). See `examples/` for one
//! runnable program per capability.

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod training;

pub use autodiff::{Gradients, Tape, Var};
pub use error::{Error, Result};
pub use experiment::{Dataset, ExperimentPlan, SweepReport, SyntheticSpec};
pub use graph::GraphPair;
pub use matrix::Matrix;
pub use metrics::EvalReport;
pub use model::{Architecture, ModelParams, Mode, Variant};
pub use training::{LabelSet, TrainConfig};
