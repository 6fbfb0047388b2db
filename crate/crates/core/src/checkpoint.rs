//! Versioned JSON container for model parameters.
//!
//! Reals are written in shortest round-trip form and parsed with correct
//! rounding, so save → load reproduces every parameter bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Architecture, ModelParams};

pub const MAGIC: &str = "learngraph-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    magic: String,
    version: u32,
    architecture: Architecture,
    tensors: Vec<NamedTensor>,
}

pub fn to_json(params: &ModelParams) -> Result<String> {
    let tensors = params
        .names()
        .into_iter()
        .zip(params.tensors())
        .map(|(name, m)| NamedTensor {
            name,
            rows: m.rows(),
            cols: m.cols(),
            data: m.as_slice().to_vec(),
        })
        .collect();
    let ckpt = Checkpoint {
        magic: MAGIC.into(),
        version: VERSION,
        architecture: params.arch.clone(),
        tensors,
    };
    Ok(serde_json::to_string_pretty(&ckpt)?)
}

pub fn from_json(text: &str) -> Result<ModelParams> {
    let ckpt: Checkpoint =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if ckpt.magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic `{}`", ckpt.magic)));
    }
    if ckpt.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {} (expected {VERSION})",
            ckpt.version
        )));
    }
    ckpt.architecture.validate()?;
    let template = ModelParams::init(&ckpt.architecture, 0)?;
    let names = template.names();
    if ckpt.tensors.len() != names.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {}",
            names.len(),
            ckpt.tensors.len()
        )));
    }
    let mut tensors = Vec::with_capacity(names.len());
    for (t, expected) in ckpt.tensors.into_iter().zip(&names) {
        if &t.name != expected {
            return Err(Error::Checkpoint(format!(
                "expected tensor `{expected}`, found `{}`",
                t.name
            )));
        }
        let m = Matrix::new(t.rows, t.cols, t.data)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", t.name)))?;
        tensors.push(m);
    }
    ModelParams::from_tensors(ckpt.architecture, tensors)
}

pub fn save(path: &Path, params: &ModelParams) -> Result<()> {
    fs::write(path, to_json(params)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
