//! Reverse-mode differentiation over an append-only arena.
//!
//! Every [`Var`] is an index into a [`Tape`]. Nodes are only ever appended
//! after their inputs, so the arena order is a topological order and the
//! operation graph is acyclic by construction.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{SegmentIndex, Tensor};
use crate::error::{Error, Result};
use crate::math;

/// Lower clamp applied to the argument of `log` (forward and backward).
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    MatMul,
    Add,
    Sub,
    Mul,
    ScalarMul,
    Sigmoid,
    Relu,
    Tanh,
    Exp,
    Log,
    Square,
    SoftmaxRows,
    Sum,
    Mean,
    ConcatCols,
    ConcatRows,
    GatherRows,
    SegmentSum,
    SegmentWeightedMean,
    L2NormalizeRows,
    Transpose,
    Reshape,
}

impl OpKind {
    pub const ALL: [OpKind; 22] = [
        OpKind::MatMul,
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::ScalarMul,
        OpKind::Sigmoid,
        OpKind::Relu,
        OpKind::Tanh,
        OpKind::Exp,
        OpKind::Log,
        OpKind::Square,
        OpKind::SoftmaxRows,
        OpKind::Sum,
        OpKind::Mean,
        OpKind::ConcatCols,
        OpKind::ConcatRows,
        OpKind::GatherRows,
        OpKind::SegmentSum,
        OpKind::SegmentWeightedMean,
        OpKind::L2NormalizeRows,
        OpKind::Transpose,
        OpKind::Reshape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::ScalarMul => "scalar_mul",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Relu => "relu",
            OpKind::Tanh => "tanh",
            OpKind::Exp => "exp",
            OpKind::Log => "log",
            OpKind::Square => "square",
            OpKind::SoftmaxRows => "softmax_rows",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::ConcatCols => "concat_cols",
            OpKind::ConcatRows => "concat_rows",
            OpKind::GatherRows => "gather_rows",
            OpKind::SegmentSum => "segment_sum",
            OpKind::SegmentWeightedMean => "segment_weighted_mean",
            OpKind::L2NormalizeRows => "l2_normalize_rows",
            OpKind::Transpose => "transpose",
            OpKind::Reshape => "reshape",
        }
    }

    fn arity(self) -> usize {
        match self {
            OpKind::MatMul
            | OpKind::Add
            | OpKind::Sub
            | OpKind::Mul
            | OpKind::ConcatCols
            | OpKind::ConcatRows
            | OpKind::SegmentWeightedMean => 2,
            _ => 1,
        }
    }
}

/// Non-tensor operands of an operation.
#[derive(Debug, Clone, PartialEq)]
pub enum Attrs {
    None,
    Scalar(f64),
    Indices(Arc<[usize]>),
    Segments(SegmentIndex),
    Shape(Vec<usize>),
}

#[derive(Debug)]
struct Record {
    kind: OpKind,
    inputs: Vec<Var>,
    attrs: Attrs,
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    record: Option<Record>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradient buffers produced by one [`Tape::backward`] call.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`, if it was reachable and
    /// tracked.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Like [`Gradients::get`] but yields zeros for untouched variables.
    pub fn get_or_zeros(&self, tape: &Tape, var: Var) -> Vec<f64> {
        match self.get(var) {
            Some(g) => g.to_vec(),
            None => vec![0.0; tape.value(var).len()],
        }
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

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, requires_grad, None)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, record: Option<Record>) -> Var {
        self.nodes.push(Node { value, requires_grad, record });
        Var(self.nodes.len() - 1)
    }

    /// Evaluates `kind` on `inputs` and appends the result.
    ///
    /// Provenance is only recorded when some input requires a gradient.
    pub fn apply(&mut self, kind: OpKind, inputs: &[Var], attrs: Attrs) -> Result<Var> {
        if inputs.len() != kind.arity() {
            return Err(Error::InvalidArgument(alloc::format!(
                "`{}` takes {} inputs, got {}",
                kind.name(),
                kind.arity(),
                inputs.len()
            )));
        }
        let values: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
        let out = forward(kind, &values, &attrs)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let record = requires_grad.then(|| Record { kind, inputs: inputs.to_vec(), attrs });
        Ok(self.push(out, requires_grad, record))
    }

    /// Propagates d`loss`/d(node) to every tracked node reachable from `loss`.
    ///
    /// All gradient buffers start from zero on every call; nothing
    /// accumulates across calls.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        if !self.nodes[loss.0].requires_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            let Some(record) = &node.record else { continue };
            let Some(g) = grads[idx].take() else { continue };
            let inputs: Vec<&Tensor> = record.inputs.iter().map(|v| &self.nodes[v.0].value).collect();
            let needs: Vec<bool> = record.inputs.iter().map(|v| self.nodes[v.0].requires_grad).collect();
            let contributions = vjp(record.kind, &inputs, &node.value, &g, &record.attrs, &needs);
            grads[idx] = Some(g);
            for (input, contrib) in record.inputs.iter().zip(contributions) {
                let Some(c) = contrib else { continue };
                match &mut grads[input.0] {
                    Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(c),
                }
            }
        }
        Ok(Gradients { grads })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::MatMul, &[a, b], Attrs::None)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Add, &[a, b], Attrs::None)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Sub, &[a, b], Attrs::None)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Mul, &[a, b], Attrs::None)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.apply(OpKind::ScalarMul, &[a], Attrs::Scalar(c))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Sigmoid, &[a], Attrs::None)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Relu, &[a], Attrs::None)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Tanh, &[a], Attrs::None)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Exp, &[a], Attrs::None)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Log, &[a], Attrs::None)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Square, &[a], Attrs::None)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::SoftmaxRows, &[a], Attrs::None)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Sum, &[a], Attrs::None)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Mean, &[a], Attrs::None)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::ConcatCols, &[a, b], Attrs::None)
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::ConcatRows, &[a, b], Attrs::None)
    }

    pub fn gather_rows(&mut self, a: Var, rows: Arc<[usize]>) -> Result<Var> {
        self.apply(OpKind::GatherRows, &[a], Attrs::Indices(rows))
    }

    pub fn segment_sum(&mut self, a: Var, index: &SegmentIndex) -> Result<Var> {
        self.apply(OpKind::SegmentSum, &[a], Attrs::Segments(index.clone()))
    }

    pub fn segment_weighted_mean(&mut self, values: Var, weights: Var, index: &SegmentIndex) -> Result<Var> {
        self.apply(OpKind::SegmentWeightedMean, &[values, weights], Attrs::Segments(index.clone()))
    }

    pub fn l2_normalize_rows(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::L2NormalizeRows, &[a], Attrs::None)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Transpose, &[a], Attrs::None)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        self.apply(OpKind::Reshape, &[a], Attrs::Shape(shape.to_vec()))
    }

    /// `x·W + b` with `b` broadcast over rows.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add(xw, b)
    }

    /// Per-row sums of a matrix as an `[n, 1]` column.
    pub fn row_sums(&mut self, a: Var) -> Result<Var> {
        let cols = self.value(a).row_len();
        let ones = self.constant(Tensor::full(&[cols, 1], 1.0));
        self.matmul(a, ones)
    }
}

fn shape_err(kind: OpKind, inputs: &[&Tensor]) -> Error {
    Error::Shape { op: kind.name(), shapes: inputs.iter().map(|t| t.shape().to_vec()).collect() }
}

fn require_rank2(kind: OpKind, inputs: &[&Tensor]) -> Result<()> {
    if inputs.iter().all(|t| t.rank() == 2) {
        Ok(())
    } else {
        Err(shape_err(kind, inputs))
    }
}

/// `b` broadcasts against `a` when its shape is a suffix of `a`'s.
fn broadcasts(a: &Tensor, b: &Tensor) -> bool {
    let (sa, sb) = (a.shape(), b.shape());
    sb.len() <= sa.len() && sa[sa.len() - sb.len()..] == *sb
}

fn segments(attrs: &Attrs) -> &SegmentIndex {
    match attrs {
        Attrs::Segments(s) => s,
        _ => unreachable!("segment op without segment index"),
    }
}

fn out_rows_shape(rows: usize, like: &Tensor) -> Vec<usize> {
    let mut shape = like.shape().to_vec();
    if shape.is_empty() {
        shape.push(rows);
    } else {
        shape[0] = rows;
    }
    shape
}

/// `op(A)·op(B)` for row-major operands, where `op` optionally transposes
/// the stored matrix. `op(A)` is `m×k` and `op(B)` is `k×n`.
fn gemm(a: &[f64], ta: bool, b: &[f64], tb: bool, m: usize, k: usize, n: usize) -> Vec<f64> {
    assert!(a.len() == m * k && b.len() == k * n, "gemm operand sizes");
    let mut out = vec![0.0; m * n];
    if m == 0 || k == 0 || n == 0 {
        return out;
    }
    let (rsa, csa) = if ta { (1, m) } else { (k, 1) };
    let (rsb, csb) = if tb { (1, k) } else { (n, 1) };
    // SAFETY: the strides address exactly the m·k, k·n and m·n elements of
    // the three buffers, whose lengths are checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    out
}

fn transpose_kernel(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

fn forward(kind: OpKind, x: &[&Tensor], attrs: &Attrs) -> Result<Tensor> {
    let unary = |f: &dyn Fn(f64) -> f64| x[0].map(f);
    Ok(match kind {
        OpKind::MatMul => {
            require_rank2(kind, x)?;
            let (m, k) = (x[0].shape()[0], x[0].shape()[1]);
            let (k2, n) = (x[1].shape()[0], x[1].shape()[1]);
            if k != k2 {
                return Err(shape_err(kind, x));
            }
            Tensor::with_shape(vec![m, n], gemm(x[0].data(), false, x[1].data(), false, m, k, n))
        }
        OpKind::Add | OpKind::Sub | OpKind::Mul => {
            if !broadcasts(x[0], x[1]) {
                return Err(shape_err(kind, x));
            }
            let b = x[1].data();
            let bl = b.len();
            let data = x[0]
                .data()
                .iter()
                .enumerate()
                .map(|(i, &a)| {
                    let bv = b[i % bl];
                    match kind {
                        OpKind::Add => a + bv,
                        OpKind::Sub => a - bv,
                        _ => a * bv,
                    }
                })
                .collect();
            Tensor::with_shape(x[0].shape().to_vec(), data)
        }
        OpKind::ScalarMul => {
            let Attrs::Scalar(c) = attrs else {
                return Err(Error::InvalidArgument("scalar_mul needs a scalar attribute".into()));
            };
            unary(&|v| v * c)
        }
        OpKind::Sigmoid => unary(&math::sigmoid),
        OpKind::Relu => unary(&|v| if v > 0.0 { v } else { 0.0 }),
        OpKind::Tanh => unary(&math::tanh),
        OpKind::Exp => unary(&math::exp),
        OpKind::Log => unary(&|v| math::ln(v.max(LOG_CLAMP))),
        OpKind::Square => unary(&|v| v * v),
        OpKind::SoftmaxRows => {
            require_rank2(kind, x)?;
            let cols = x[0].row_len();
            let mut data = x[0].data().to_vec();
            if cols > 0 {
                for row in data.chunks_mut(cols) {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut z = 0.0;
                    for v in row.iter_mut() {
                        *v = math::exp(*v - max);
                        z += *v;
                    }
                    row.iter_mut().for_each(|v| *v /= z);
                }
            }
            Tensor::with_shape(x[0].shape().to_vec(), data)
        }
        OpKind::Sum => Tensor::scalar(x[0].data().iter().sum()),
        OpKind::Mean => {
            if x[0].is_empty() {
                return Err(shape_err(kind, x));
            }
            Tensor::scalar(x[0].data().iter().sum::<f64>() / x[0].len() as f64)
        }
        OpKind::ConcatCols => {
            require_rank2(kind, x)?;
            let rows = x[0].shape()[0];
            if x[1].shape()[0] != rows {
                return Err(shape_err(kind, x));
            }
            let (ca, cb) = (x[0].shape()[1], x[1].shape()[1]);
            let mut data = Vec::with_capacity(rows * (ca + cb));
            for r in 0..rows {
                data.extend_from_slice(x[0].row(r));
                data.extend_from_slice(x[1].row(r));
            }
            Tensor::with_shape(vec![rows, ca + cb], data)
        }
        OpKind::ConcatRows => {
            if x[0].rank() == 0 || x[0].shape()[1..] != x[1].shape()[1..] || x[1].rank() == 0 {
                return Err(shape_err(kind, x));
            }
            let mut data = x[0].data().to_vec();
            data.extend_from_slice(x[1].data());
            Tensor::with_shape(out_rows_shape(x[0].rows() + x[1].rows(), x[0]), data)
        }
        OpKind::GatherRows => {
            let Attrs::Indices(rows) = attrs else {
                return Err(Error::InvalidArgument("gather_rows needs row indices".into()));
            };
            if x[0].rank() == 0 || rows.iter().any(|&r| r >= x[0].rows()) {
                return Err(shape_err(kind, x));
            }
            let w = x[0].row_len();
            let mut data = Vec::with_capacity(rows.len() * w);
            for &r in rows.iter() {
                data.extend_from_slice(x[0].row(r));
            }
            Tensor::with_shape(out_rows_shape(rows.len(), x[0]), data)
        }
        OpKind::SegmentSum => {
            let idx = segments(attrs);
            if x[0].rank() == 0 || x[0].rows() != idx.len() {
                return Err(shape_err(kind, x));
            }
            let w = x[0].row_len();
            let mut data = vec![0.0; idx.num_segments() * w];
            for (i, &s) in idx.targets().iter().enumerate() {
                let src = x[0].row(i);
                data[s * w..(s + 1) * w].iter_mut().zip(src).for_each(|(d, v)| *d += v);
            }
            Tensor::with_shape(out_rows_shape(idx.num_segments(), x[0]), data)
        }
        OpKind::SegmentWeightedMean => {
            let idx = segments(attrs);
            let (values, weights) = (x[0], x[1]);
            if values.rank() == 0 || values.rows() != idx.len() || weights.shape() != [idx.len()] {
                return Err(shape_err(kind, x));
            }
            let w = values.row_len();
            let totals = segment_totals(weights.data(), idx);
            let mut data = vec![0.0; idx.num_segments() * w];
            for (i, &s) in idx.targets().iter().enumerate() {
                let wi = weights.data()[i];
                if wi == 0.0 {
                    continue;
                }
                let src = values.row(i);
                data[s * w..(s + 1) * w].iter_mut().zip(src).for_each(|(d, v)| *d += wi * v);
            }
            for (s, &tot) in totals.iter().enumerate() {
                let row = &mut data[s * w..(s + 1) * w];
                if tot == 0.0 {
                    row.iter_mut().for_each(|v| *v = 0.0);
                } else {
                    row.iter_mut().for_each(|v| *v /= tot);
                }
            }
            Tensor::with_shape(out_rows_shape(idx.num_segments(), values), data)
        }
        OpKind::L2NormalizeRows => {
            require_rank2(kind, x)?;
            let cols = x[0].row_len();
            let mut data = x[0].data().to_vec();
            if cols > 0 {
                for row in data.chunks_mut(cols) {
                    let norm = math::sqrt(row.iter().map(|v| v * v).sum());
                    if norm > 0.0 {
                        row.iter_mut().for_each(|v| *v /= norm);
                    }
                }
            }
            Tensor::with_shape(x[0].shape().to_vec(), data)
        }
        OpKind::Transpose => {
            require_rank2(kind, x)?;
            let (r, c) = (x[0].shape()[0], x[0].shape()[1]);
            Tensor::with_shape(vec![c, r], transpose_kernel(x[0].data(), r, c))
        }
        OpKind::Reshape => {
            let Attrs::Shape(shape) = attrs else {
                return Err(Error::InvalidArgument("reshape needs a target shape".into()));
            };
            if shape.iter().product::<usize>() != x[0].len() {
                return Err(Error::Shape { op: kind.name(), shapes: vec![x[0].shape().to_vec(), shape.clone()] });
            }
            Tensor::with_shape(shape.clone(), x[0].data().to_vec())
        }
    })
}

fn segment_totals(weights: &[f64], idx: &SegmentIndex) -> Vec<f64> {
    let mut totals = vec![0.0; idx.num_segments()];
    for (&s, &w) in idx.targets().iter().zip(weights) {
        totals[s] += w;
    }
    totals
}

/// Sums `g` (shaped like `a`) down to the broadcast operand's length.
fn reduce_broadcast(g: &[f64], b_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; b_len];
    for (i, &v) in g.iter().enumerate() {
        out[i % b_len] += v;
    }
    out
}

/// Vector-Jacobian products for each input (`None` where not needed).
fn vjp(kind: OpKind, x: &[&Tensor], y: &Tensor, g: &[f64], attrs: &Attrs, needs: &[bool]) -> Vec<Option<Vec<f64>>> {
    let elementwise =
        |f: &dyn Fn(usize) -> f64| -> Vec<Option<Vec<f64>>> { vec![Some((0..g.len()).map(|i| g[i] * f(i)).collect())] };
    match kind {
        OpKind::MatMul => {
            let (m, k) = (x[0].shape()[0], x[0].shape()[1]);
            let n = x[1].shape()[1];
            let da = needs[0].then(|| gemm(g, false, x[1].data(), true, m, n, k));
            let db = needs[1].then(|| gemm(x[0].data(), true, g, false, k, m, n));
            vec![da, db]
        }
        OpKind::Add => vec![needs[0].then(|| g.to_vec()), needs[1].then(|| reduce_broadcast(g, x[1].len()))],
        OpKind::Sub => vec![
            needs[0].then(|| g.to_vec()),
            needs[1].then(|| {
                let mut r = reduce_broadcast(g, x[1].len());
                r.iter_mut().for_each(|v| *v = -*v);
                r
            }),
        ],
        OpKind::Mul => {
            let (a, b) = (x[0].data(), x[1].data());
            let bl = b.len();
            vec![
                needs[0].then(|| g.iter().enumerate().map(|(i, gv)| gv * b[i % bl]).collect()),
                needs[1].then(|| {
                    let prod: Vec<f64> = g.iter().zip(a).map(|(gv, av)| gv * av).collect();
                    reduce_broadcast(&prod, bl)
                }),
            ]
        }
        OpKind::ScalarMul => {
            let c = match attrs {
                Attrs::Scalar(c) => *c,
                _ => 0.0,
            };
            elementwise(&|_| c)
        }
        OpKind::Sigmoid => {
            let yd = y.data();
            elementwise(&|i| yd[i] * (1.0 - yd[i]))
        }
        OpKind::Relu => {
            let xd = x[0].data();
            elementwise(&|i| if xd[i] > 0.0 { 1.0 } else { 0.0 })
        }
        OpKind::Tanh => {
            let yd = y.data();
            elementwise(&|i| 1.0 - yd[i] * yd[i])
        }
        OpKind::Exp => {
            let yd = y.data();
            elementwise(&|i| yd[i])
        }
        OpKind::Log => {
            let xd = x[0].data();
            elementwise(&|i| 1.0 / xd[i].max(LOG_CLAMP))
        }
        OpKind::Square => {
            let xd = x[0].data();
            elementwise(&|i| 2.0 * xd[i])
        }
        OpKind::SoftmaxRows => {
            let cols = y.row_len();
            let mut out = vec![0.0; g.len()];
            if cols > 0 {
                for ((orow, yrow), grow) in out.chunks_mut(cols).zip(y.data().chunks(cols)).zip(g.chunks(cols)) {
                    let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                    for ((o, yv), gv) in orow.iter_mut().zip(yrow).zip(grow) {
                        *o = yv * (gv - dot);
                    }
                }
            }
            vec![Some(out)]
        }
        OpKind::Sum => vec![Some(vec![g[0]; x[0].len()])],
        OpKind::Mean => vec![Some(vec![g[0] / x[0].len() as f64; x[0].len()])],
        OpKind::ConcatCols => {
            let rows = y.shape()[0];
            let (ca, cb) = (x[0].shape()[1], x[1].shape()[1]);
            let w = ca + cb;
            let mut ga = Vec::with_capacity(rows * ca);
            let mut gb = Vec::with_capacity(rows * cb);
            for r in 0..rows {
                ga.extend_from_slice(&g[r * w..r * w + ca]);
                gb.extend_from_slice(&g[r * w + ca..(r + 1) * w]);
            }
            vec![needs[0].then_some(ga), needs[1].then_some(gb)]
        }
        OpKind::ConcatRows => {
            let split = x[0].len();
            vec![needs[0].then(|| g[..split].to_vec()), needs[1].then(|| g[split..].to_vec())]
        }
        OpKind::GatherRows => {
            let Attrs::Indices(rows) = attrs else { return vec![None] };
            let w = x[0].row_len();
            let mut out = vec![0.0; x[0].len()];
            for (k, &r) in rows.iter().enumerate() {
                out[r * w..(r + 1) * w].iter_mut().zip(&g[k * w..(k + 1) * w]).for_each(|(o, v)| *o += v);
            }
            vec![Some(out)]
        }
        OpKind::SegmentSum => {
            let idx = segments(attrs);
            let w = x[0].row_len();
            let mut out = Vec::with_capacity(x[0].len());
            for &s in idx.targets() {
                out.extend_from_slice(&g[s * w..(s + 1) * w]);
            }
            vec![Some(out)]
        }
        OpKind::SegmentWeightedMean => {
            let idx = segments(attrs);
            let (values, weights) = (x[0], x[1].data());
            let w = values.row_len();
            let totals = segment_totals(weights, idx);
            let dv = needs[0].then(|| {
                let mut out = vec![0.0; values.len()];
                for (i, &s) in idx.targets().iter().enumerate() {
                    if totals[s] == 0.0 {
                        continue;
                    }
                    let c = weights[i] / totals[s];
                    out[i * w..(i + 1) * w].iter_mut().zip(&g[s * w..(s + 1) * w]).for_each(|(o, gv)| *o = c * gv);
                }
                out
            });
            let dw = needs[1].then(|| {
                // d out_s / d w_i = (v_i − out_s) / W_s
                let mut out = vec![0.0; weights.len()];
                for (i, &s) in idx.targets().iter().enumerate() {
                    if totals[s] == 0.0 {
                        continue;
                    }
                    let vi = values.row(i);
                    let os = y.row(s);
                    let gs = &g[s * w..(s + 1) * w];
                    let dot: f64 = (0..w).map(|d| gs[d] * (vi[d] - os[d])).sum();
                    out[i] = dot / totals[s];
                }
                out
            });
            vec![dv, dw]
        }
        OpKind::L2NormalizeRows => {
            let cols = y.row_len();
            let mut out = vec![0.0; g.len()];
            if cols > 0 {
                for (r, orow) in out.chunks_mut(cols).enumerate() {
                    let xr = x[0].row(r);
                    let norm = math::sqrt(xr.iter().map(|v| v * v).sum());
                    if norm == 0.0 {
                        continue;
                    }
                    let yr = y.row(r);
                    let gr = &g[r * cols..(r + 1) * cols];
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for c in 0..cols {
                        orow[c] = (gr[c] - yr[c] * dot) / norm;
                    }
                }
            }
            vec![Some(out)]
        }
        OpKind::Transpose => {
            let (r, c) = (x[0].shape()[0], x[0].shape()[1]);
            vec![Some(transpose_kernel(g, c, r))]
        }
        OpKind::Reshape => vec![Some(g.to_vec())],
    }
}
