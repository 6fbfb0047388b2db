//! Cosine-similarity adjacency and the renormalized propagation operator.
//!
//! Everything here is recorded on a [`Tape`], so the adjacency built from
//! encoder outputs is differentiable with respect to those outputs:
//!
//! ```text
//! A = (X Xᵀ) ⊘ (η(X) η(X)ᵀ)          η = per-row L2 norm
//! Â = D̃^{-1/2} (A + I) D̃^{-1/2}      D̃ᵢᵢ = Σⱼ (A + I)ᵢⱼ
//! ```

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Feature rows with a smaller L2 norm cannot be compared by angle.
pub const NORM_EPS: f64 = 1e-12;

/// Smallest admissible renormalization degree.
pub const DEGREE_EPS: f64 = 1e-8;

/// Concrete adjacency matrices for one graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphPair {
    /// Cosine similarities `A`, N x N.
    pub raw: Matrix,
    /// `Â`, N x N.
    pub normalized: Matrix,
    /// Diagonal of `D̃` as an N x 1 column.
    pub degree: Matrix,
}

/// Tape handles for the pieces of a [`GraphPair`].
#[derive(Clone, Copy, Debug)]
pub struct GraphVars {
    pub raw: Var,
    pub normalized: Var,
    pub degree: Var,
}

impl GraphVars {
    pub fn materialize(&self, tape: &Tape) -> GraphPair {
        GraphPair {
            raw: tape.value(self.raw).clone(),
            normalized: tape.value(self.normalized).clone(),
            degree: tape.value(self.degree).clone(),
        }
    }
}

impl GraphPair {
    /// Builds the cosine graph of `features` without tracking gradients.
    pub fn from_features(features: &Matrix) -> Result<Self> {
        let mut tape = Tape::new();
        let x = tape.constant(features.clone());
        let a = cosine_adjacency(&mut tape, x)?;
        Ok(normalize_adjacency(&mut tape, a)?.materialize(&tape))
    }

    pub fn from_raw(raw: &Matrix) -> Result<Self> {
        let mut tape = Tape::new();
        let a = tape.constant(raw.clone());
        Ok(normalize_adjacency(&mut tape, a)?.materialize(&tape))
    }

    pub fn num_nodes(&self) -> usize {
        self.raw.rows()
    }
}

/// Pairwise cosine similarity of the rows of `x`, in the matrix form
/// `(X Xᵀ) ⊘ (η ηᵀ)`.
pub fn cosine_adjacency(tape: &mut Tape, x: Var) -> Result<Var> {
    let norms = tape.row_l2_norms(x);
    if let Some((row, &norm)) = tape
        .value(norms)
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, n)| !(**n >= NORM_EPS))
    {
        return Err(Error::DegenerateRow { row, norm });
    }
    // Normalizing rows first and taking the Gram matrix is the same
    // quotient with the division done on N x d instead of N x N entries.
    let unit = tape.div(x, norms)?;
    let unit_t = tape.transpose(unit);
    tape.matmul(unit, unit_t)
}

/// Adds self-loops and applies symmetric degree normalization.
pub fn normalize_adjacency(tape: &mut Tape, a: Var) -> Result<GraphVars> {
    let (n, cols) = tape.value(a).shape();
    if n != cols {
        return Err(Error::Shape {
            op: "normalize_adjacency",
            left: (n, cols),
            right: (n, n),
        });
    }
    let eye = tape.constant(Matrix::identity(n));
    let with_loops = tape.add(a, eye)?;
    let degree = tape.row_sums(with_loops);
    if let Some((node, &degree)) = tape
        .value(degree)
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, d)| !(**d >= DEGREE_EPS))
    {
        return Err(Error::DegenerateDegree { node, degree });
    }
    let inv_sqrt = tape.rsqrt(degree)?;
    let inv_sqrt_t = tape.transpose(inv_sqrt);
    let scaled_rows = tape.mul(with_loops, inv_sqrt)?;
    let normalized = tape.mul(scaled_rows, inv_sqrt_t)?;
    Ok(GraphVars {
        raw: a,
        normalized,
        degree,
    })
}

/// Squared Frobenius norm as a 1x1 node.
pub fn frobenius_sq(tape: &mut Tape, a: Var) -> Var {
    let sq = tape.mul(a, a).expect("same shape");
    tape.sum(sq)
}
