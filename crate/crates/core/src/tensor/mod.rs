//! Minimal reverse-mode automatic differentiation over dense 2-D matrices.
//!
//! A [`Tape`] records every operation executed during a forward pass. Values
//! live on the tape and are addressed through copyable [`Var`] handles.
//! [`Tape::backward`] walks the record in reverse insertion order, which is a
//! valid topological order because every node is appended after its inputs.
//! Trainable weights are kept outside the tape in a [`ParamStore`] and bound
//! as leaves at the start of each forward pass.

mod gradcheck;
mod optim;
mod params;

use std::rc::Rc;

use rand::Rng;

pub use crate::matrix::Matrix;
use crate::error::{Error, Result};
use crate::matrix::gemm;

pub use gradcheck::{check_all_ops, finite_diff_check, OpCheck};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{glorot_uniform, BoundParams, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    Slice { input: Var, start: usize },
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    /// Elementwise product with a constant mask (dropout).
    Masked(Var, Matrix),
    /// Block-diagonal constant times a stacked input.
    BlockMatMul(Rc<[Matrix]>, Var),
    Mse {
        pred: Var,
        target: Var,
        weights: Option<Matrix>,
        denom: f64,
    },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
    backward_done: bool,
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

    /// Adds a leaf tensor. Values were validated finite when the matrix was built.
    pub fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.as_slice()[0]
    }

    /// Gradient of the last backward pass with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    /// Adds a `1 x c` row vector to every row of an `r x c` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        if self.shape(row) != (1, c) {
            return Err(Error::Shape(format!(
                "add_row: {r}x{c} with {:?}",
                self.shape(row)
            )));
        }
        let bias = self.value(row).as_slice().to_vec();
        let mut out = self.value(a).clone();
        for i in 0..r {
            for (x, b) in out.row_mut(i).iter_mut().zip(&bias) {
                *x += b;
            }
        }
        let rg = self.any_grad(&[a, row]);
        Ok(self.push(out, Op::AddRow(a, row), rg))
    }

    pub fn scalar_mul(&mut self, a: Var, k: f64) -> Result<Var> {
        if !k.is_finite() {
            return Err(Error::NonFinite(format!("scale factor {k}")));
        }
        let out = self.value(a).map(|x| x * k);
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, Op::Scale(a, k), rg))
    }

    /// Horizontal concatenation `[a | b | ...]`; all parts must share a row count.
    pub fn concat_columns(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Shape("concat of zero tensors".into()));
        };
        let rows = self.shape(first).0;
        if let Some(bad) = parts.iter().find(|p| self.shape(**p).0 != rows) {
            return Err(Error::Shape(format!(
                "concat_columns: {rows} rows vs {}",
                self.shape(*bad).0
            )));
        }
        let cols: usize = parts.iter().map(|p| self.shape(*p).1).sum();
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let dst = out.row_mut(r);
            let mut off = 0;
            for p in parts {
                let src = self.nodes[p.0].value.row(r);
                dst[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let rg = self.any_grad(parts);
        Ok(self.push(out, Op::Concat(parts.to_vec()), rg))
    }

    /// Columns `start..start + width` of `a`.
    pub fn slice_columns(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if start + width > cols {
            return Err(Error::Shape(format!(
                "slice {start}..{} of {cols} columns",
                start + width
            )));
        }
        let src = self.value(a);
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            data.extend_from_slice(&src.row(r)[start..start + width]);
        }
        let rg = self.any_grad(&[a]);
        Ok(self.push(
            Matrix::from_raw(rows, width, data),
            Op::Slice { input: a, start },
            rg,
        ))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Relu(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Tanh(a), rg)
    }

    /// Inverted dropout. Outside training, or with `rate == 0`, returns `a` itself.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        let (r, c) = self.shape(a);
        let mask: Vec<f64> = (0..r * c)
            .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
            .collect();
        let mask = Matrix::from_raw(r, c, mask);
        let out = self.value(a).zip_map(&mask, |x, m| x * m);
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, Op::Masked(a, mask), rg))
    }

    /// Multiplies consecutive row blocks of `a` by the given square blocks,
    /// i.e. `diag(blocks) · a` without materialising the block-diagonal matrix.
    pub fn block_matmul(&mut self, blocks: Rc<[Matrix]>, a: Var) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        let total: usize = blocks.iter().map(Matrix::rows).sum();
        if let Some(b) = blocks.iter().find(|b| b.rows() != b.cols()) {
            return Err(Error::Shape(format!(
                "block_matmul: non-square block {:?}",
                b.shape()
            )));
        }
        if total != rows {
            return Err(Error::Shape(format!(
                "block_matmul: blocks cover {total} rows, input has {rows}"
            )));
        }
        let input = self.value(a);
        let mut out = Vec::with_capacity(rows * cols);
        let mut off = 0;
        for b in blocks.iter() {
            let n = b.rows();
            let part = Matrix::from_raw(n, cols, input.as_slice()[off * cols..(off + n) * cols].to_vec());
            out.extend_from_slice(b.matmul(&part)?.as_slice());
            off += n;
        }
        let rg = self.any_grad(&[a]);
        Ok(self.push(
            Matrix::from_raw(rows, cols, out),
            Op::BlockMatMul(blocks, a),
            rg,
        ))
    }

    /// Mean squared error over all entries.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape(pred, target, "mse_loss")?;
        let denom = self.value(pred).len() as f64;
        if denom == 0.0 {
            return Err(Error::Shape("mse_loss of empty tensors".into()));
        }
        self.mse_impl(pred, target, None, denom)
    }

    /// Mean squared error restricted to entries whose mask value is 1.
    pub fn masked_mse_loss(&mut self, pred: Var, target: Var, mask: &Matrix) -> Result<Var> {
        self.same_shape(pred, target, "masked_mse_loss")?;
        if mask.shape() != self.shape(pred) {
            return Err(Error::Shape("masked_mse_loss: mask shape".into()));
        }
        let denom = mask.sum();
        if denom <= 0.0 {
            return Err(Error::Shape("masked_mse_loss: mask selects nothing".into()));
        }
        self.mse_impl(pred, target, Some(mask.clone()), denom)
    }

    fn mse_impl(&mut self, pred: Var, target: Var, weights: Option<Matrix>, denom: f64) -> Result<Var> {
        let p = self.value(pred).as_slice();
        let t = self.value(target).as_slice();
        let total: f64 = match &weights {
            Some(w) => p
                .iter()
                .zip(t)
                .zip(w.as_slice())
                .map(|((p, t), w)| w * (p - t) * (p - t))
                .sum(),
            None => p.iter().zip(t).map(|(p, t)| (p - t) * (p - t)).sum(),
        };
        let rg = self.any_grad(&[pred, target]);
        Ok(self.push(
            Matrix::from_raw(1, 1, vec![total / denom]),
            Op::Mse {
                pred,
                target,
                weights,
                denom,
            },
            rg,
        ))
    }

    /// Reverse pass from a scalar loss. May run once per tape.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::BackwardTwice);
        }
        if self.shape(loss) != (1, 1) {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got {:?}",
                self.shape(loss)
            )));
        }
        self.backward_done = true;
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g);
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Matrix) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&mut self, idx: usize, g: &Matrix) {
        // Temporarily take the op so inputs can be borrowed while grads mutate.
        let op = std::mem::replace(&mut self.nodes[idx].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    let bv = &self.nodes[b.0].value;
                    let mut ga = Matrix::zeros(g.rows(), bv.rows());
                    gemm(g, false, bv, true, &mut ga, 0.0);
                    self.accumulate(*a, ga);
                }
                if self.wants(*b) {
                    let av = &self.nodes[a.0].value;
                    let mut gb = Matrix::zeros(av.cols(), g.cols());
                    gemm(av, true, g, false, &mut gb, 0.0);
                    self.accumulate(*b, gb);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(*a, g.clone());
                self.accumulate(*b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(*a, g.clone());
                self.accumulate(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    let ga = g.zip_map(&self.nodes[b.0].value, |g, y| g * y);
                    self.accumulate(*a, ga);
                }
                if self.wants(*b) {
                    let gb = g.zip_map(&self.nodes[a.0].value, |g, x| g * x);
                    self.accumulate(*b, gb);
                }
            }
            Op::AddRow(a, row) => {
                self.accumulate(*a, g.clone());
                if self.wants(*row) {
                    let mut gr = vec![0.0; g.cols()];
                    for r in 0..g.rows() {
                        for (acc, x) in gr.iter_mut().zip(g.row(r)) {
                            *acc += x;
                        }
                    }
                    let cols = gr.len();
                    self.accumulate(*row, Matrix::from_raw(1, cols, gr));
                }
            }
            Op::Scale(a, k) => {
                let k = *k;
                self.accumulate(*a, g.map(|x| x * k));
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let (rows, cols) = self.shape(*p);
                    if self.wants(*p) {
                        let mut data = Vec::with_capacity(rows * cols);
                        for r in 0..rows {
                            data.extend_from_slice(&g.row(r)[off..off + cols]);
                        }
                        self.accumulate(*p, Matrix::from_raw(rows, cols, data));
                    }
                    off += cols;
                }
            }
            Op::Slice { input, start } => {
                let (rows, cols) = self.shape(*input);
                let mut gi = Matrix::zeros(rows, cols);
                for r in 0..rows {
                    gi.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                self.accumulate(*input, gi);
            }
            Op::Relu(a) => {
                let ga = g.zip_map(&self.nodes[a.0].value, |g, x| if x > 0.0 { g } else { 0.0 });
                self.accumulate(*a, ga);
            }
            Op::Sigmoid(a) => {
                let ga = g.zip_map(&self.nodes[idx].value, |g, y| g * y * (1.0 - y));
                self.accumulate(*a, ga);
            }
            Op::Tanh(a) => {
                let ga = g.zip_map(&self.nodes[idx].value, |g, y| g * (1.0 - y * y));
                self.accumulate(*a, ga);
            }
            Op::Masked(a, mask) => {
                self.accumulate(*a, g.zip_map(mask, |g, m| g * m));
            }
            Op::BlockMatMul(blocks, a) => {
                let cols = g.cols();
                let mut data = Vec::with_capacity(g.len());
                let mut off = 0;
                for b in blocks.iter() {
                    let n = b.rows();
                    let part = Matrix::from_raw(n, cols, g.as_slice()[off * cols..(off + n) * cols].to_vec());
                    let mut gp = Matrix::zeros(n, cols);
                    gemm(b, true, &part, false, &mut gp, 0.0);
                    data.extend_from_slice(gp.as_slice());
                    off += n;
                }
                self.accumulate(*a, Matrix::from_raw(g.rows(), cols, data));
            }
            Op::Mse {
                pred,
                target,
                weights,
                denom,
            } => {
                let seed = g.as_slice()[0] * 2.0 / denom;
                let p = &self.nodes[pred.0].value;
                let t = &self.nodes[target.0].value;
                let mut diff = p.zip_map(t, |p, t| seed * (p - t));
                if let Some(w) = weights {
                    diff = diff.zip_map(w, |d, w| d * w);
                }
                if self.wants(*target) {
                    self.accumulate(*target, diff.map(|x| -x));
                }
                self.accumulate(*pred, diff);
            }
        }
        self.nodes[idx].op = op;
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
