//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] owns every value computed during a forward pass. Operations
//! append nodes and return a [`Var`] handle; since parents are always
//! recorded before their children, node order is a topological order and
//! [`Tape::backward`] simply walks it in reverse, visiting each node once.
//!
//! ```
//! use learngraph::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let w = tape.param(Matrix::from_rows(&[[1.0, 2.0]]));
//! let x = tape.constant(Matrix::from_rows(&[[3.0], [4.0]]));
//! let y = tape.matmul(w, x).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(w).unwrap().as_slice(), &[3.0, 4.0]);
//! ```

use crate::error::{Error, Result};
use crate::matrix::{gemm, Matrix};

/// Divisors smaller than this in magnitude are a domain error.
pub const DIV_EPS: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Matmul,
    Add,
    Sub,
    Mul,
    Div,
    Tanh,
    Relu,
    Scale,
    Transpose,
    Sum,
    RowSums,
    RowSoftmax,
    RowL2Norms,
    Rsqrt,
    LnClamped,
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    Matmul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Tanh(Var),
    Relu(Var),
    Scale(Var, f64),
    Transpose(Var),
    Sum(Var),
    RowSums(Var),
    RowSoftmax(Var),
    RowL2Norms(Var),
    Rsqrt(Var),
    LnClamped(Var, f64),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::Matmul(..) => OpKind::Matmul,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Div(..) => OpKind::Div,
            Op::Tanh(_) => OpKind::Tanh,
            Op::Relu(_) => OpKind::Relu,
            Op::Scale(..) => OpKind::Scale,
            Op::Transpose(_) => OpKind::Transpose,
            Op::Sum(_) => OpKind::Sum,
            Op::RowSums(_) => OpKind::RowSums,
            Op::RowSoftmax(_) => OpKind::RowSoftmax,
            Op::RowL2Norms(_) => OpKind::RowL2Norms,
            Op::Rsqrt(_) => OpKind::Rsqrt,
            Op::LnClamped(..) => OpKind::LnClamped,
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match *self {
            Op::Leaf => vec![],
            Op::Matmul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                vec![a, b]
            }
            Op::Tanh(a)
            | Op::Relu(a)
            | Op::Scale(a, _)
            | Op::Transpose(a)
            | Op::Sum(a)
            | Op::RowSums(a)
            | Op::RowSoftmax(a)
            | Op::RowL2Norms(a)
            | Op::Rsqrt(a)
            | Op::LnClamped(a, _) => vec![a],
        }
    }
}

struct Node {
    op: Op,
    value: Matrix,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    tanh_fault: bool,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<Option<Matrix>>,
}

impl Gradients {
    /// dL/dvar, or `None` when `var` does not require a gradient.
    pub fn get(&self, var: Var) -> Option<&Matrix> {
        self.adjoints.get(var.0).and_then(Option::as_ref)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Corrupts the tanh adjoint. Only exists so that gradient checking can
    /// be shown to catch a broken backward pass.
    #[doc(hidden)]
    pub fn inject_tanh_fault(&mut self) {
        self.tanh_fault = true;
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    pub fn op_kind(&self, var: Var) -> OpKind {
        self.nodes[var.0].op.kind()
    }

    pub fn inputs(&self, var: Var) -> Vec<Var> {
        self.nodes[var.0].op.inputs()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, op: Op, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_derived(&mut self, op: Op, value: Matrix) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(op, value, requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push_derived(Op::Matmul(a, b), value))
    }

    /// Elementwise sum. Operands either share a shape or one of them
    /// broadcasts along a unit dimension (scalar, row or column vector).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = broadcast_zip("add", self.value(a), self.value(b), |x, y| x + y)?;
        Ok(self.push_derived(Op::Add(a, b), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = broadcast_zip("sub", self.value(a), self.value(b), |x, y| x - y)?;
        Ok(self.push_derived(Op::Sub(a, b), value))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = broadcast_zip("mul", self.value(a), self.value(b), |x, y| x * y)?;
        Ok(self.push_derived(Op::Mul(a, b), value))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let denom = self.value(b);
        if let Some(pos) = denom.as_slice().iter().position(|d| d.abs() < DIV_EPS) {
            return Err(Error::Domain {
                op: "div",
                message: format!(
                    "denominator entry ({}, {}) is {:e}",
                    pos / denom.cols(),
                    pos % denom.cols(),
                    denom.as_slice()[pos]
                ),
            });
        }
        let value = broadcast_zip("div", self.value(a), denom, |x, y| x / y)?;
        Ok(self.push_derived(Op::Div(a, b), value))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push_derived(Op::Tanh(a), value)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push_derived(Op::Relu(a), value)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|v| v * factor);
        self.push_derived(Op::Scale(a, factor), value)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push_derived(Op::Transpose(a), value)
    }

    /// Sum of all entries, as a 1x1 matrix.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        self.push_derived(Op::Sum(a), value)
    }

    /// Column vector of row sums.
    pub fn row_sums(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let sums = (0..m.rows()).map(|r| m.row(r).iter().sum()).collect();
        let value = Matrix::column(sums).expect("rows > 0");
        self.push_derived(Op::RowSums(a), value)
    }

    /// Softmax of each row, shifted by the row maximum before exponentiating.
    pub fn row_softmax(&mut self, a: Var) -> Var {
        let value = row_softmax(self.value(a));
        self.push_derived(Op::RowSoftmax(a), value)
    }

    /// Column vector of per-row Euclidean norms.
    pub fn row_l2_norms(&mut self, a: Var) -> Var {
        let value = row_l2_norms(self.value(a));
        self.push_derived(Op::RowL2Norms(a), value)
    }

    /// Elementwise `x^(-1/2)`; entries must be strictly positive.
    pub fn rsqrt(&mut self, a: Var) -> Result<Var> {
        let m = self.value(a);
        if let Some(pos) = m.as_slice().iter().position(|&v| v <= 0.0) {
            return Err(Error::Domain {
                op: "rsqrt",
                message: format!("entry {pos} is {:e}", m.as_slice()[pos]),
            });
        }
        let value = m.map(|v| 1.0 / v.sqrt());
        Ok(self.push_derived(Op::Rsqrt(a), value))
    }

    /// Elementwise `ln(max(x, floor))`. The gradient is zero where the floor
    /// is active.
    pub fn ln_clamped(&mut self, a: Var, floor: f64) -> Var {
        let value = self.value(a).map(|v| v.max(floor).ln());
        self.push_derived(Op::LnClamped(a, floor), value)
    }

    /// Reverse sweep from a scalar root. Every parameter leaf gets an
    /// adjoint, zero-filled if the root does not depend on it.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_shape = self.value(root).shape();
        if root_shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a 1x1 root, got {}x{}",
                root_shape.0, root_shape.1
            )));
        }
        let mut adjoints: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        if self.nodes[root.0].requires_grad {
            adjoints[root.0] = Some(Matrix::scalar(1.0));
        }

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(grad) = adjoints[idx].take() else {
                continue;
            };
            self.propagate(node, &grad, &mut adjoints)?;
            adjoints[idx] = Some(grad);
        }

        for (idx, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.requires_grad && adjoints[idx].is_none() {
                let (r, c) = node.value.shape();
                adjoints[idx] = Some(Matrix::zeros(r, c));
            }
        }
        Ok(Gradients { adjoints })
    }

    fn propagate(&self, node: &Node, grad: &Matrix, adjoints: &mut [Option<Matrix>]) -> Result<()> {
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        let out = &node.value;
        match node.op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                if wants(a) {
                    accumulate(adjoints, a, gemm(grad, false, self.value(b), true)?);
                }
                if wants(b) {
                    accumulate(adjoints, b, gemm(self.value(a), true, grad, false)?);
                }
            }
            Op::Add(a, b) => {
                if wants(a) {
                    accumulate(adjoints, a, reduce_to(grad, self.value(a).shape()));
                }
                if wants(b) {
                    accumulate(adjoints, b, reduce_to(grad, self.value(b).shape()));
                }
            }
            Op::Sub(a, b) => {
                if wants(a) {
                    accumulate(adjoints, a, reduce_to(grad, self.value(a).shape()));
                }
                if wants(b) {
                    let neg = grad.map(|g| -g);
                    accumulate(adjoints, b, reduce_to(&neg, self.value(b).shape()));
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(a), self.value(b));
                if wants(a) {
                    let full = broadcast_zip("mul", grad, vb, |g, y| g * y)?;
                    accumulate(adjoints, a, reduce_to(&full, va.shape()));
                }
                if wants(b) {
                    let full = broadcast_zip("mul", grad, va, |g, x| g * x)?;
                    accumulate(adjoints, b, reduce_to(&full, vb.shape()));
                }
            }
            Op::Div(a, b) => {
                let (va, vb) = (self.value(a), self.value(b));
                if wants(a) {
                    let full = broadcast_zip("div", grad, vb, |g, y| g / y)?;
                    accumulate(adjoints, a, reduce_to(&full, va.shape()));
                }
                if wants(b) {
                    // d(x/y)/dy = -(x/y)/y
                    let q = broadcast_zip("div", grad, out, |g, q| -g * q)?;
                    let full = broadcast_zip("div", &q, vb, |t, y| t / y)?;
                    accumulate(adjoints, b, reduce_to(&full, vb.shape()));
                }
            }
            Op::Tanh(a) => {
                let sign = if self.tanh_fault { 1.0 } else { -1.0 };
                let local = grad.zip_map(out, |g, y| g * (1.0 + sign * y * y))?;
                accumulate(adjoints, a, local);
            }
            Op::Relu(a) => {
                let local = grad.zip_map(self.value(a), |g, x| if x > 0.0 { g } else { 0.0 })?;
                accumulate(adjoints, a, local);
            }
            Op::Scale(a, factor) => accumulate(adjoints, a, grad.map(|g| g * factor)),
            Op::Transpose(a) => accumulate(adjoints, a, grad.transpose()),
            Op::Sum(a) => {
                let (r, c) = self.value(a).shape();
                accumulate(adjoints, a, Matrix::filled(r, c, grad.as_slice()[0]));
            }
            Op::RowSums(a) => {
                let (r, c) = self.value(a).shape();
                let mut local = Matrix::zeros(r, c);
                for i in 0..r {
                    let g = grad.get(i, 0);
                    local.as_mut_slice()[i * c..(i + 1) * c].fill(g);
                }
                accumulate(adjoints, a, local);
            }
            Op::RowSoftmax(a) => {
                let (r, c) = out.shape();
                let mut local = Matrix::zeros(r, c);
                for i in 0..r {
                    let (y, g) = (out.row(i), grad.row(i));
                    let dot: f64 = y.iter().zip(g).map(|(y, g)| y * g).sum();
                    for j in 0..c {
                        local.set(i, j, y[j] * (g[j] - dot));
                    }
                }
                accumulate(adjoints, a, local);
            }
            Op::RowL2Norms(a) => {
                let x = self.value(a);
                let (r, c) = x.shape();
                let mut local = Matrix::zeros(r, c);
                for i in 0..r {
                    let norm = out.get(i, 0);
                    if norm == 0.0 {
                        continue;
                    }
                    let g = grad.get(i, 0) / norm;
                    for j in 0..c {
                        local.set(i, j, g * x.get(i, j));
                    }
                }
                accumulate(adjoints, a, local);
            }
            Op::Rsqrt(a) => {
                let local = grad.zip_map(out, |g, y| -0.5 * g * y * y * y)?;
                accumulate(adjoints, a, local);
            }
            Op::LnClamped(a, floor) => {
                let local =
                    grad.zip_map(self.value(a), |g, x| if x > floor { g / x } else { 0.0 })?;
                accumulate(adjoints, a, local);
            }
        }
        Ok(())
    }
}

fn accumulate(adjoints: &mut [Option<Matrix>], var: Var, contribution: Matrix) {
    match &mut adjoints[var.0] {
        Some(existing) => existing.add_assign(&contribution),
        slot @ None => *slot = Some(contribution),
    }
}

fn broadcast_dim(a: usize, b: usize) -> Option<usize> {
    match (a, b) {
        _ if a == b => Some(a),
        (1, n) | (n, 1) => Some(n),
        _ => None,
    }
}

fn broadcast_zip(
    op: &'static str,
    a: &Matrix,
    b: &Matrix,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Matrix> {
    if a.shape() == b.shape() {
        return a.zip_map(b, f);
    }
    let shape_err = || Error::Shape {
        op,
        left: a.shape(),
        right: b.shape(),
    };
    let rows = broadcast_dim(a.rows(), b.rows()).ok_or_else(shape_err)?;
    let cols = broadcast_dim(a.cols(), b.cols()).ok_or_else(shape_err)?;
    let (ad, bd) = (a.as_slice(), b.as_slice());
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let ar = &ad[if a.rows() == 1 { 0 } else { i * a.cols() }..][..a.cols()];
        let br = &bd[if b.rows() == 1 { 0 } else { i * b.cols() }..][..b.cols()];
        match (ar.len() == cols, br.len() == cols) {
            (true, true) => data.extend(ar.iter().zip(br).map(|(&x, &y)| f(x, y))),
            (true, false) => data.extend(ar.iter().map(|&x| f(x, br[0]))),
            (false, true) => data.extend(br.iter().map(|&y| f(ar[0], y))),
            (false, false) => data.extend((0..cols).map(|_| f(ar[0], br[0]))),
        }
    }
    Matrix::new(rows, cols, data)
}

/// Sums a broadcast gradient back down to an operand's shape.
fn reduce_to(grad: &Matrix, shape: (usize, usize)) -> Matrix {
    if grad.shape() == shape {
        return grad.clone();
    }
    let cols = grad.cols();
    let mut out = Matrix::zeros(shape.0, shape.1);
    let o = out.as_mut_slice();
    for (i, row) in grad.as_slice().chunks_exact(cols).enumerate() {
        let oi = if shape.0 == 1 { 0 } else { i };
        if shape.1 == 1 {
            o[oi] += row.iter().sum::<f64>();
        } else {
            for (acc, g) in o[oi * cols..(oi + 1) * cols].iter_mut().zip(row) {
                *acc += g;
            }
        }
    }
    out
}

pub(crate) fn row_softmax(m: &Matrix) -> Matrix {
    let (r, c) = m.shape();
    let mut out = Matrix::zeros(r, c);
    for i in 0..r {
        let row = m.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (j, e) in exps.into_iter().enumerate() {
            out.set(i, j, e / total);
        }
    }
    out
}

pub(crate) fn row_l2_norms(m: &Matrix) -> Matrix {
    let norms = (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    Matrix::column(norms).expect("rows > 0")
}
