//! Define-by-run tape: forward ops append nodes, `backward` walks the
//! record once in reverse and accumulates exact gradients.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use super::params::{Gradients, Params};
use super::tensor::{matmul_nt, matmul_raw, matmul_tn, ShapeError, Tensor};

static TAPE_COUNTER: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Error, PartialEq)]
pub enum AutodiffError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("value does not belong to this tape")]
    NotOnTape,
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("class index {index} out of range for {classes} classes (row {row})")]
    ClassOutOfRange {
        row: usize,
        index: usize,
        classes: usize,
    },
}

/// Handle to a tensor recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Value {
    tape: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(usize),
    Matmul(usize, usize),
    Add(usize, usize),
    Mul(usize, usize),
    AddBias(usize, usize),
    MulScalar(usize, f64),
    Relu(usize),
    Concat { axis: usize, parts: Vec<usize> },
    Reshape(usize),
    SoftmaxRows(usize),
    CrossEntropy { probs: usize, targets: Vec<usize> },
    L1(usize, usize),
    Mse(usize, usize),
    GradReversal(usize, f64),
    Detach,
    SoftArgmax2d { heat: usize, beta: f64 },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of executed operations. One tape per forward pass.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    n_params: usize,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: TAPE_COUNTER.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            n_params: 0,
        }
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Value {
        debug_assert!(value.all_finite(), "non-finite value after {:?}", op);
        let index = self.nodes.len();
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Value {
            tape: self.id,
            index,
        }
    }

    fn node(&self, v: Value) -> Result<&Node, AutodiffError> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(AutodiffError::NotOnTape);
        }
        Ok(&self.nodes[v.index])
    }

    /// The tensor a handle refers to.
    pub fn tensor(&self, v: Value) -> Result<&Tensor, AutodiffError> {
        Ok(&self.node(v)?.value)
    }

    /// Non-trainable leaf; no gradient is produced for it.
    pub fn constant(&mut self, t: Tensor) -> Value {
        self.push(t, Op::Constant, false)
    }

    /// One trainable leaf per parameter, in parameter order.
    pub fn bind_params(&mut self, params: &Params) -> Vec<Value> {
        self.n_params = params.len();
        (0..params.len())
            .map(|i| self.push(params.value(i).clone(), Op::Param(i), true))
            .collect()
    }

    pub fn matmul(&mut self, a: Value, b: Value) -> Result<Value, AutodiffError> {
        let (ta, tb) = (self.node(a)?, self.node(b)?);
        let out = matmul_raw(&ta.value, &tb.value)?;
        let rg = ta.requires_grad || tb.requires_grad;
        Ok(self.push(out, Op::Matmul(a.index, b.index), rg))
    }

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value, AutodiffError> {
        let (ta, tb) = (self.node(a)?, self.node(b)?);
        if ta.value.shape() != tb.value.shape() {
            return Err(ShapeError::Mismatch {
                op: "add",
                lhs: ta.value.shape().to_vec(),
                rhs: tb.value.shape().to_vec(),
            }
            .into());
        }
        let data = ta
            .value
            .data()
            .iter()
            .zip(tb.value.data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::new(ta.value.shape().to_vec(), data);
        let rg = ta.requires_grad || tb.requires_grad;
        Ok(self.push(out, Op::Add(a.index, b.index), rg))
    }

    pub fn mul(&mut self, a: Value, b: Value) -> Result<Value, AutodiffError> {
        let (ta, tb) = (self.node(a)?, self.node(b)?);
        if ta.value.shape() != tb.value.shape() {
            return Err(ShapeError::Mismatch {
                op: "mul",
                lhs: ta.value.shape().to_vec(),
                rhs: tb.value.shape().to_vec(),
            }
            .into());
        }
        let data = ta
            .value
            .data()
            .iter()
            .zip(tb.value.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::new(ta.value.shape().to_vec(), data);
        let rg = ta.requires_grad || tb.requires_grad;
        Ok(self.push(out, Op::Mul(a.index, b.index), rg))
    }

    /// Adds a length-n bias vector to every row of an [m, n] matrix.
    pub fn add_bias(&mut self, x: Value, bias: Value) -> Result<Value, AutodiffError> {
        let (tx, tb) = (self.node(x)?, self.node(bias)?);
        let xs = tx.value.shape();
        let bs = tb.value.shape();
        if xs.len() != 2 || bs.len() != 1 || bs[0] != xs[1] {
            return Err(ShapeError::Mismatch {
                op: "add_bias",
                lhs: xs.to_vec(),
                rhs: bs.to_vec(),
            }
            .into());
        }
        let (m, n) = (xs[0], xs[1]);
        let mut data = tx.value.data().to_vec();
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] += tb.value.data()[j];
            }
        }
        let out = Tensor::new(vec![m, n], data);
        let rg = tx.requires_grad || tb.requires_grad;
        Ok(self.push(out, Op::AddBias(x.index, bias.index), rg))
    }

    pub fn mul_scalar(&mut self, x: Value, c: f64) -> Result<Value, AutodiffError> {
        let tx = self.node(x)?;
        let data = tx.value.data().iter().map(|v| v * c).collect();
        let out = Tensor::new(tx.value.shape().to_vec(), data);
        let rg = tx.requires_grad;
        Ok(self.push(out, Op::MulScalar(x.index, c), rg))
    }

    pub fn relu(&mut self, x: Value) -> Result<Value, AutodiffError> {
        let tx = self.node(x)?;
        let data = tx.value.data().iter().map(|v| v.max(0.0)).collect();
        let out = Tensor::new(tx.value.shape().to_vec(), data);
        let rg = tx.requires_grad;
        Ok(self.push(out, Op::Relu(x.index), rg))
    }

    /// Concatenates 2-D tensors along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, axis: usize, parts: &[Value]) -> Result<Value, AutodiffError> {
        if parts.is_empty() || axis > 1 {
            return Err(AutodiffError::Config(format!(
                "concat needs parts and axis in {{0,1}}, got {} parts, axis {axis}",
                parts.len()
            )));
        }
        let tensors: Vec<&Tensor> = parts
            .iter()
            .map(|&p| self.node(p).map(|n| &n.value))
            .collect::<Result<_, _>>()?;
        let first = tensors[0].shape().to_vec();
        if first.len() != 2 {
            return Err(ShapeError::Invalid {
                op: "concat",
                expected: "2-D tensors".into(),
                got: first,
            }
            .into());
        }
        let fixed = 1 - axis;
        for t in &tensors {
            if t.shape().len() != 2 || t.shape()[fixed] != first[fixed] {
                return Err(ShapeError::Mismatch {
                    op: "concat",
                    lhs: first.clone(),
                    rhs: t.shape().to_vec(),
                }
                .into());
            }
        }
        let out = if axis == 0 {
            let rows: usize = tensors.iter().map(|t| t.shape()[0]).sum();
            let cols = first[1];
            let mut data = Vec::with_capacity(rows * cols);
            for t in &tensors {
                data.extend_from_slice(t.data());
            }
            Tensor::new(vec![rows, cols], data)
        } else {
            let rows = first[0];
            let cols: usize = tensors.iter().map(|t| t.shape()[1]).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for t in &tensors {
                    let c = t.shape()[1];
                    data.extend_from_slice(&t.data()[r * c..(r + 1) * c]);
                }
            }
            Tensor::new(vec![rows, cols], data)
        };
        let rg = parts
            .iter()
            .any(|&p| self.nodes[p.index].requires_grad);
        Ok(self.push(
            out,
            Op::Concat {
                axis,
                parts: parts.iter().map(|p| p.index).collect(),
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, x: Value, shape: Vec<usize>) -> Result<Value, AutodiffError> {
        let tx = self.node(x)?;
        let out = tx.value.clone().reshaped(shape)?;
        let rg = tx.requires_grad;
        Ok(self.push(out, Op::Reshape(x.index), rg))
    }

    /// Row-wise softmax with max subtraction; rows sum to 1.
    pub fn softmax_rows(&mut self, x: Value) -> Result<Value, AutodiffError> {
        let tx = self.node(x)?;
        let s = tx.value.shape();
        if s.len() != 2 {
            return Err(ShapeError::Invalid {
                op: "softmax_rows",
                expected: "an [m, c] tensor".into(),
                got: s.to_vec(),
            }
            .into());
        }
        let (m, c) = (s[0], s[1]);
        let mut data = vec![0.0; m * c];
        for i in 0..m {
            let row = &tx.value.data()[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..c {
                let e = (row[j] - max).exp();
                data[i * c + j] = e;
                sum += e;
            }
            for j in 0..c {
                data[i * c + j] /= sum;
            }
        }
        let out = Tensor::new(vec![m, c], data);
        let rg = tx.requires_grad;
        Ok(self.push(out, Op::SoftmaxRows(x.index), rg))
    }

    /// Mean over rows of -log p[row, target[row]], log clamped at 1e-12.
    /// `probs` rows must already be probability distributions.
    pub fn cross_entropy(&mut self, probs: Value, targets: &[usize]) -> Result<Value, AutodiffError> {
        let tp = self.node(probs)?;
        let s = tp.value.shape();
        if s.len() != 2 || s[0] != targets.len() {
            return Err(ShapeError::Invalid {
                op: "cross_entropy",
                expected: format!("an [m, c] tensor with m = {}", targets.len()),
                got: s.to_vec(),
            }
            .into());
        }
        let (m, c) = (s[0], s[1]);
        let mut loss = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            if t >= c {
                return Err(AutodiffError::ClassOutOfRange {
                    row: i,
                    index: t,
                    classes: c,
                });
            }
            let p = tp.value.data()[i * c + t].max(CE_CLAMP);
            loss -= p.ln();
        }
        loss /= m as f64;
        let rg = tp.requires_grad;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                probs: probs.index,
                targets: targets.to_vec(),
            },
            rg,
        ))
    }

    /// Mean absolute difference over all entries.
    pub fn l1_loss(&mut self, pred: Value, target: Value) -> Result<Value, AutodiffError> {
        let (tp, tt) = (self.node(pred)?, self.node(target)?);
        if tp.value.shape() != tt.value.shape() {
            return Err(ShapeError::Mismatch {
                op: "l1_loss",
                lhs: tp.value.shape().to_vec(),
                rhs: tt.value.shape().to_vec(),
            }
            .into());
        }
        let n = tp.value.len() as f64;
        let loss = tp
            .value
            .data()
            .iter()
            .zip(tt.value.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n;
        let rg = tp.requires_grad || tt.requires_grad;
        Ok(self.push(Tensor::scalar(loss), Op::L1(pred.index, target.index), rg))
    }

    /// Mean squared difference over all entries.
    pub fn mse_loss(&mut self, pred: Value, target: Value) -> Result<Value, AutodiffError> {
        let (tp, tt) = (self.node(pred)?, self.node(target)?);
        if tp.value.shape() != tt.value.shape() {
            return Err(ShapeError::Mismatch {
                op: "mse_loss",
                lhs: tp.value.shape().to_vec(),
                rhs: tt.value.shape().to_vec(),
            }
            .into());
        }
        let n = tp.value.len() as f64;
        let loss = tp
            .value
            .data()
            .iter()
            .zip(tt.value.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
        let rg = tp.requires_grad || tt.requires_grad;
        Ok(self.push(Tensor::scalar(loss), Op::Mse(pred.index, target.index), rg))
    }

    /// Identity in the forward pass; multiplies the upstream gradient by
    /// -lambda in the backward pass.
    pub fn grad_reversal(&mut self, x: Value, lambda: f64) -> Result<Value, AutodiffError> {
        if !(lambda > 0.0) {
            return Err(AutodiffError::Config(format!(
                "grad_reversal needs lambda > 0, got {lambda}"
            )));
        }
        let tx = self.node(x)?;
        let out = tx.value.clone();
        let rg = tx.requires_grad;
        Ok(self.push(out, Op::GradReversal(x.index, lambda), rg))
    }

    /// Identity in the forward pass; stops gradients in the backward pass.
    pub fn detach(&mut self, x: Value) -> Result<Value, AutodiffError> {
        let tx = self.node(x)?;
        let out = tx.value.clone();
        Ok(self.push(out, Op::Detach, false))
    }

    /// Differentiable 2-D argmax: softmax(beta * h) over all cells,
    /// expectation of the (x, y) cell-center grid. Returns a length-2
    /// tensor [x, y] with x the column coordinate.
    pub fn soft_argmax2d(&mut self, heat: Value, beta: f64) -> Result<Value, AutodiffError> {
        if !(beta > 0.0) {
            return Err(AutodiffError::Config(format!(
                "soft_argmax2d needs beta > 0, got {beta}"
            )));
        }
        let th = self.node(heat)?;
        let s = th.value.shape();
        if s.len() != 2 {
            return Err(ShapeError::Invalid {
                op: "soft_argmax2d",
                expected: "an [H, W] heatmap".into(),
                got: s.to_vec(),
            }
            .into());
        }
        let (xbar, ybar, _) = soft_argmax_forward(&th.value, beta);
        let rg = th.requires_grad;
        Ok(self.push(
            Tensor::new(vec![2], vec![xbar, ybar]),
            Op::SoftArgmax2d {
                heat: heat.index,
                beta,
            },
            rg,
        ))
    }

    /// Reverse-mode sweep from a scalar loss. Visits each recorded node at
    /// most once, in reverse order; repeated calls on the same tape give
    /// identical results.
    pub fn backward(&self, loss: Value) -> Result<Gradients, AutodiffError> {
        let ln = self.node(loss)?;
        if !ln.value.is_scalar() {
            return Err(AutodiffError::NotScalar(ln.value.shape().to_vec()));
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.index] = Some(Tensor::scalar(1.0));

        let mut param_grads: Vec<Option<Tensor>> = vec![None; self.n_params];

        for idx in (0..=loss.index).rev() {
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            match &self.nodes[idx].op {
                Op::Constant => {}
                Op::Param(pi) => accumulate(&mut param_grads[*pi], &g),
                Op::Matmul(a, b) => {
                    if self.nodes[*a].requires_grad {
                        let ga = matmul_nt(&g, &self.nodes[*b].value);
                        accumulate(&mut grads[*a], &ga);
                    }
                    if self.nodes[*b].requires_grad {
                        let gb = matmul_tn(&self.nodes[*a].value, &g);
                        accumulate(&mut grads[*b], &gb);
                    }
                }
                Op::Add(a, b) => {
                    if self.nodes[*a].requires_grad {
                        accumulate(&mut grads[*a], &g);
                    }
                    if self.nodes[*b].requires_grad {
                        accumulate(&mut grads[*b], &g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.nodes[*a].requires_grad {
                        let data = g
                            .data()
                            .iter()
                            .zip(self.nodes[*b].value.data())
                            .map(|(gv, bv)| gv * bv)
                            .collect();
                        accumulate(&mut grads[*a], &Tensor::new(g.shape().to_vec(), data));
                    }
                    if self.nodes[*b].requires_grad {
                        let data = g
                            .data()
                            .iter()
                            .zip(self.nodes[*a].value.data())
                            .map(|(gv, av)| gv * av)
                            .collect();
                        accumulate(&mut grads[*b], &Tensor::new(g.shape().to_vec(), data));
                    }
                }
                Op::AddBias(x, b) => {
                    if self.nodes[*x].requires_grad {
                        accumulate(&mut grads[*x], &g);
                    }
                    if self.nodes[*b].requires_grad {
                        let (m, n) = (g.shape()[0], g.shape()[1]);
                        let mut col = vec![0.0; n];
                        for i in 0..m {
                            for j in 0..n {
                                col[j] += g.data()[i * n + j];
                            }
                        }
                        accumulate(&mut grads[*b], &Tensor::new(vec![n], col));
                    }
                }
                Op::MulScalar(x, c) => {
                    let data = g.data().iter().map(|v| v * c).collect();
                    accumulate(&mut grads[*x], &Tensor::new(g.shape().to_vec(), data));
                }
                Op::Relu(x) => {
                    let data = g
                        .data()
                        .iter()
                        .zip(self.nodes[*x].value.data())
                        .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 })
                        .collect();
                    accumulate(&mut grads[*x], &Tensor::new(g.shape().to_vec(), data));
                }
                Op::Concat { axis, parts } => {
                    if *axis == 0 {
                        let cols = g.shape()[1];
                        let mut row0 = 0;
                        for &p in parts {
                            let rows = self.nodes[p].value.shape()[0];
                            if self.nodes[p].requires_grad {
                                let slice =
                                    g.data()[row0 * cols..(row0 + rows) * cols].to_vec();
                                accumulate(
                                    &mut grads[p],
                                    &Tensor::new(vec![rows, cols], slice),
                                );
                            }
                            row0 += rows;
                        }
                    } else {
                        let rows = g.shape()[0];
                        let total_cols = g.shape()[1];
                        let mut col0 = 0;
                        for &p in parts {
                            let cols = self.nodes[p].value.shape()[1];
                            if self.nodes[p].requires_grad {
                                let mut data = Vec::with_capacity(rows * cols);
                                for r in 0..rows {
                                    data.extend_from_slice(
                                        &g.data()[r * total_cols + col0
                                            ..r * total_cols + col0 + cols],
                                    );
                                }
                                accumulate(&mut grads[p], &Tensor::new(vec![rows, cols], data));
                            }
                            col0 += cols;
                        }
                    }
                }
                Op::Reshape(x) => {
                    let shape = self.nodes[*x].value.shape().to_vec();
                    accumulate(
                        &mut grads[*x],
                        &Tensor::new(shape, g.data().to_vec()),
                    );
                }
                Op::SoftmaxRows(x) => {
                    let y = &self.nodes[idx].value;
                    let (m, c) = (y.shape()[0], y.shape()[1]);
                    let mut data = vec![0.0; m * c];
                    for i in 0..m {
                        let yrow = &y.data()[i * c..(i + 1) * c];
                        let grow = &g.data()[i * c..(i + 1) * c];
                        let dot: f64 = yrow.iter().zip(grow).map(|(yv, gv)| yv * gv).sum();
                        for j in 0..c {
                            data[i * c + j] = yrow[j] * (grow[j] - dot);
                        }
                    }
                    accumulate(&mut grads[*x], &Tensor::new(vec![m, c], data));
                }
                Op::CrossEntropy { probs, targets } => {
                    let gm = g.scalar_value();
                    let p = &self.nodes[*probs].value;
                    let (m, c) = (p.shape()[0], p.shape()[1]);
                    let mut data = vec![0.0; m * c];
                    for (i, &t) in targets.iter().enumerate() {
                        let pv = p.data()[i * c + t];
                        // clamped region has zero slope
                        if pv > CE_CLAMP {
                            data[i * c + t] = -gm / (m as f64 * pv);
                        }
                    }
                    accumulate(&mut grads[*probs], &Tensor::new(vec![m, c], data));
                }
                Op::L1(pred, target) => {
                    let gm = g.scalar_value();
                    let n = self.nodes[*pred].value.len() as f64;
                    let make = |sign_flip: f64, grads_slot: &mut Option<Tensor>| {
                        let data: Vec<f64> = self.nodes[*pred]
                            .value
                            .data()
                            .iter()
                            .zip(self.nodes[*target].value.data())
                            .map(|(a, b)| {
                                // subgradient at the kink is 0
                                let d = a - b;
                                let s = if d > 0.0 {
                                    1.0
                                } else if d < 0.0 {
                                    -1.0
                                } else {
                                    0.0
                                };
                                sign_flip * gm * s / n
                            })
                            .collect();
                        accumulate(
                            grads_slot,
                            &Tensor::new(self.nodes[*pred].value.shape().to_vec(), data),
                        );
                    };
                    if self.nodes[*pred].requires_grad {
                        make(1.0, &mut grads[*pred]);
                    }
                    if self.nodes[*target].requires_grad {
                        make(-1.0, &mut grads[*target]);
                    }
                }
                Op::Mse(pred, target) => {
                    let gm = g.scalar_value();
                    let n = self.nodes[*pred].value.len() as f64;
                    let diffs: Vec<f64> = self.nodes[*pred]
                        .value
                        .data()
                        .iter()
                        .zip(self.nodes[*target].value.data())
                        .map(|(a, b)| 2.0 * gm * (a - b) / n)
                        .collect();
                    if self.nodes[*pred].requires_grad {
                        accumulate(
                            &mut grads[*pred],
                            &Tensor::new(self.nodes[*pred].value.shape().to_vec(), diffs.clone()),
                        );
                    }
                    if self.nodes[*target].requires_grad {
                        let neg: Vec<f64> = diffs.iter().map(|v| -v).collect();
                        accumulate(
                            &mut grads[*target],
                            &Tensor::new(self.nodes[*target].value.shape().to_vec(), neg),
                        );
                    }
                }
                Op::GradReversal(x, lambda) => {
                    let data = g.data().iter().map(|v| -lambda * v).collect();
                    accumulate(&mut grads[*x], &Tensor::new(g.shape().to_vec(), data));
                }
                Op::Detach => {}
                Op::SoftArgmax2d { heat, beta } => {
                    let h = &self.nodes[*heat].value;
                    let (rows, cols) = (h.shape()[0], h.shape()[1]);
                    let (xbar, ybar, p) = soft_argmax_forward(h, *beta);
                    let (gx, gy) = (g.data()[0], g.data()[1]);
                    let mut data = vec![0.0; rows * cols];
                    for r in 0..rows {
                        for c in 0..cols {
                            let pv = p[r * cols + c];
                            data[r * cols + c] =
                                beta * pv * ((c as f64 - xbar) * gx + (r as f64 - ybar) * gy);
                        }
                    }
                    accumulate(&mut grads[*heat], &Tensor::new(vec![rows, cols], data));
                }
            }
        }

        Ok(Gradients::new(param_grads))
    }
}

/// Log clamp floor for cross-entropy.
const CE_CLAMP: f64 = 1e-12;

fn soft_argmax_forward(h: &Tensor, beta: f64) -> (f64, f64, Vec<f64>) {
    let (rows, cols) = (h.shape()[0], h.shape()[1]);
    let max = h.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = vec![0.0; rows * cols];
    let mut sum = 0.0;
    for (i, &v) in h.data().iter().enumerate() {
        let e = (beta * (v - max)).exp();
        p[i] = e;
        sum += e;
    }
    let mut xbar = 0.0;
    let mut ybar = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let pv = p[r * cols + c] / sum;
            p[r * cols + c] = pv;
            xbar += pv * c as f64;
            ybar += pv * r as f64;
        }
    }
    (xbar, ybar, p)
}

fn accumulate(slot: &mut Option<Tensor>, g: &Tensor) {
    match slot {
        Some(t) => {
            debug_assert_eq!(t.shape(), g.shape());
            for (a, b) in t.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        None => *slot = Some(g.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn param_tensor(params: &mut Params, name: &str, t: Tensor) {
        params.register(name, t).unwrap();
    }

    /// Central finite differences against the analytic gradient for a
    /// scalar-valued builder. Step 1e-5, relative tolerance 1e-4.
    fn fd_check<F>(params: &Params, build: F)
    where
        F: Fn(&mut Tape, &[Value]) -> Value,
    {
        let mut tape = Tape::new();
        let leaves = tape.bind_params(params);
        let loss = build(&mut tape, &leaves);
        let grads = tape.backward(loss).unwrap();

        let h = 1e-5;
        for pi in 0..params.len() {
            let n = params.value(pi).len();
            for e in 0..n {
                let eval = |delta: f64| -> f64 {
                    let mut p2 = params.clone();
                    p2.value_mut(pi).data_mut()[e] += delta;
                    let mut t2 = Tape::new();
                    let l2 = t2.bind_params(&p2);
                    let loss2 = build(&mut t2, &l2);
                    t2.tensor(loss2).unwrap().scalar_value()
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = grads.get(pi).map_or(0.0, |g| g.data()[e]);
                let denom = fd.abs().max(an.abs()).max(1e-6);
                assert!(
                    (fd - an).abs() / denom < 1e-4,
                    "param {pi} entry {e}: fd {fd}, analytic {an}"
                );
            }
        }
    }

    fn rng_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect())
    }

    #[test]
    fn matmul_identity_and_gradient() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let mut eye = Tensor::zeros(vec![2, 2]);
        eye.data_mut()[0] = 1.0;
        eye.data_mut()[3] = 1.0;
        let i = tape.constant(eye);
        let c = tape.matmul(a, i).unwrap();
        assert_eq!(tape.tensor(c).unwrap(), tape.tensor(a).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = Params::new();
        param_tensor(&mut params, "a", rng_tensor(&mut rng, vec![3, 4], -1.0, 1.0));
        param_tensor(&mut params, "b", rng_tensor(&mut rng, vec![4, 2], -1.0, 1.0));
        fd_check(&params, |t, l| {
            let c = t.matmul(l[0], l[1]).unwrap();
            let target = t.constant(Tensor::zeros(vec![3, 2]));
            t.mse_loss(c, target).unwrap()
        });
    }

    #[test]
    fn relu_values_and_gradient() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![3], vec![-2.0, 0.0, 3.5]));
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.tensor(y).unwrap().data(), &[0.0, 0.0, 3.5]);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = Params::new();
        // keep entries away from the kink at 0
        let mut t = rng_tensor(&mut rng, vec![2, 5], 0.2, 1.0);
        for (i, v) in t.data_mut().iter_mut().enumerate() {
            if i % 2 == 0 {
                *v = -*v;
            }
        }
        param_tensor(&mut params, "x", t);
        fd_check(&params, |t, l| {
            let y = t.relu(l[0]).unwrap();
            let target = t.constant(Tensor::zeros(vec![2, 5]));
            t.mse_loss(y, target).unwrap()
        });
    }

    #[test]
    fn softmax_rows_uniform_and_shift_invariance() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![3.0, 3.0, 3.0, 3.0]]));
        let y = tape.softmax_rows(x).unwrap();
        for &v in tape.tensor(y).unwrap().data() {
            assert!((v - 0.25).abs() < 1e-12);
        }

        let row = vec![0.3, -1.2, 2.0];
        let shifted: Vec<f64> = row.iter().map(|v| v + 123.456).collect();
        let mut t2 = Tape::new();
        let a = t2.constant(Tensor::from_rows(&[row]));
        let b = t2.constant(Tensor::from_rows(&[shifted]));
        let ya = t2.softmax_rows(a).unwrap();
        let yb = t2.softmax_rows(b).unwrap();
        for (u, v) in t2
            .tensor(ya)
            .unwrap()
            .data()
            .iter()
            .zip(t2.tensor(yb).unwrap().data())
        {
            assert!((u - v).abs() < 1e-12);
        }
        // rows sum to 1 even for large-magnitude inputs
        let mut t3 = Tape::new();
        let big = t3.constant(Tensor::from_rows(&[vec![1e3, -1e3, 500.0]]));
        let yc = t3.softmax_rows(big).unwrap();
        let sum: f64 = t3.tensor(yc).unwrap().data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = Params::new();
        param_tensor(&mut params, "x", rng_tensor(&mut rng, vec![3, 4], -2.0, 2.0));
        let w = rng_tensor(&mut rng, vec![3, 4], -1.0, 1.0);
        fd_check(&params, move |t, l| {
            let y = t.softmax_rows(l[0]).unwrap();
            let wc = t.constant(w.clone());
            let prod = t.mul(y, wc).unwrap();
            // reduce to scalar via mse against zero
            let z = t.constant(Tensor::zeros(vec![3, 4]));
            t.mse_loss(prod, z).unwrap()
        });
    }

    #[test]
    fn cross_entropy_analytic_values() {
        // one-hot on the true class -> 0
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::from_rows(&[vec![0.0, 1.0, 0.0]]));
        let l = tape.cross_entropy(p, &[1]).unwrap();
        assert!(tape.tensor(l).unwrap().scalar_value() < 1e-9);

        // uniform over c classes -> ln(c)
        let c = 5;
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::from_rows(&[vec![1.0 / c as f64; c]]));
        let l = tape.cross_entropy(p, &[3]).unwrap();
        assert!((tape.tensor(l).unwrap().scalar_value() - (c as f64).ln()).abs() < 1e-12);

        // class index out of range
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::from_rows(&[vec![0.5, 0.5]]));
        assert!(matches!(
            tape.cross_entropy(p, &[2]),
            Err(AutodiffError::ClassOutOfRange { .. })
        ));
    }

    #[test]
    fn softmax_cross_entropy_composite_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..5 {
            let mut params = Params::new();
            param_tensor(
                &mut params,
                "logits",
                rng_tensor(&mut rng, vec![4, 3], -2.0, 2.0),
            );
            let targets: Vec<usize> = (0..4).map(|i| (i + trial) % 3).collect();
            fd_check(&params, move |t, l| {
                let p = t.softmax_rows(l[0]).unwrap();
                t.cross_entropy(p, &targets).unwrap()
            });
        }
    }

    #[test]
    fn l1_mse_analytic_values() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::scalar(3.0));
        let b = tape.constant(Tensor::scalar(1.0));
        let l1 = tape.l1_loss(a, b).unwrap();
        let mse = tape.mse_loss(a, b).unwrap();
        assert_eq!(tape.tensor(l1).unwrap().scalar_value(), 2.0);
        assert_eq!(tape.tensor(mse).unwrap().scalar_value(), 4.0);

        // identical inputs -> 0, and the L1 subgradient at the kink is 0
        let mut params = Params::new();
        param_tensor(&mut params, "x", Tensor::new(vec![2], vec![1.5, -0.5]));
        let mut tape = Tape::new();
        let leaves = tape.bind_params(&params);
        let same = tape.constant(Tensor::new(vec![2], vec![1.5, -0.5]));
        let loss = tape.l1_loss(leaves[0], same).unwrap();
        assert_eq!(tape.tensor(loss).unwrap().scalar_value(), 0.0);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(0).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn l1_gradient_matches_fd_away_from_kinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = Params::new();
        param_tensor(&mut params, "x", rng_tensor(&mut rng, vec![3, 3], 0.5, 2.0));
        let target = rng_tensor(&mut rng, vec![3, 3], -2.0, -0.5); // differences > 1
        fd_check(&params, move |t, l| {
            let y = t.constant(target.clone());
            t.l1_loss(l[0], y).unwrap()
        });
    }

    #[test]
    fn grad_reversal_forward_bitwise_backward_scaled() {
        for &lambda in &[0.1, 1.0, 10.0] {
            let mut params = Params::new();
            param_tensor(
                &mut params,
                "x",
                Tensor::new(vec![3], vec![0.1, -2.5, 3.75]),
            );
            let mut tape = Tape::new();
            let leaves = tape.bind_params(&params);
            let rev = tape.grad_reversal(leaves[0], lambda).unwrap();
            // forward is bitwise identity
            for (a, b) in tape
                .tensor(rev)
                .unwrap()
                .data()
                .iter()
                .zip(params.value(0).data())
            {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            let target = tape.constant(Tensor::zeros(vec![3]));
            let loss = tape.mse_loss(rev, target).unwrap();
            let grads = tape.backward(loss).unwrap();
            // reference: same loss without the reversal
            let mut tape2 = Tape::new();
            let leaves2 = tape2.bind_params(&params);
            let target2 = tape2.constant(Tensor::zeros(vec![3]));
            let loss2 = tape2.mse_loss(leaves2[0], target2).unwrap();
            let grads2 = tape2.backward(loss2).unwrap();
            for (g, g0) in grads
                .get(0)
                .unwrap()
                .data()
                .iter()
                .zip(grads2.get(0).unwrap().data())
            {
                assert_eq!(g.to_bits(), (-lambda * g0).to_bits());
            }
        }
    }

    #[test]
    fn double_reversal_restores_gradient() {
        let mut params = Params::new();
        param_tensor(&mut params, "x", Tensor::new(vec![2], vec![1.0, -2.0]));
        let grad_with = |double: bool| -> Vec<f64> {
            let mut tape = Tape::new();
            let leaves = tape.bind_params(&params);
            let mut v = leaves[0];
            if double {
                v = tape.grad_reversal(v, 1.0).unwrap();
                v = tape.grad_reversal(v, 1.0).unwrap();
            }
            let t = tape.constant(Tensor::zeros(vec![2]));
            let loss = tape.mse_loss(v, t).unwrap();
            tape.backward(loss).unwrap().get(0).unwrap().data().to_vec()
        };
        assert_eq!(grad_with(true), grad_with(false));
    }

    #[test]
    fn grad_reversal_rejects_nonpositive_lambda() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(1.0));
        assert!(matches!(
            tape.grad_reversal(x, 0.0),
            Err(AutodiffError::Config(_))
        ));
        assert!(matches!(
            tape.grad_reversal(x, -1.0),
            Err(AutodiffError::Config(_))
        ));
    }

    #[test]
    fn soft_argmax_peaks_and_bounds() {
        // one-hot at (i, j) with large beta lands on (x=j, y=i)
        let (h, w) = (9, 13);
        let (i, j) = (2, 11);
        let mut heat = Tensor::zeros(vec![h, w]);
        heat.data_mut()[i * w + j] = 1.0;
        let mut tape = Tape::new();
        let hm = tape.constant(heat);
        let out = tape.soft_argmax2d(hm, 60.0).unwrap();
        let xy = tape.tensor(out).unwrap().data().to_vec();
        assert!((xy[0] - j as f64).abs() < 1e-6, "x {}", xy[0]);
        assert!((xy[1] - i as f64).abs() < 1e-6, "y {}", xy[1]);

        // isotropic gaussian centered at (x0, y0) on 64x64 within 0.1 px
        let (x0, y0) = (40.3, 17.8);
        let sigma = 3.0;
        let mut g = Tensor::zeros(vec![64, 64]);
        for r in 0..64 {
            for c in 0..64 {
                let d2 = (c as f64 - x0).powi(2) + (r as f64 - y0).powi(2);
                g.data_mut()[r * 64 + c] = (-d2 / (2.0 * sigma * sigma)).exp();
            }
        }
        // beta large enough that the flat background is negligible, small
        // enough that the peak is not collapsed onto its argmax cell
        let mut tape = Tape::new();
        let hm = tape.constant(g);
        let out = tape.soft_argmax2d(hm, 20.0).unwrap();
        let xy = tape.tensor(out).unwrap().data().to_vec();
        assert!((xy[0] - x0).abs() < 0.1, "x {}", xy[0]);
        assert!((xy[1] - y0).abs() < 0.1, "y {}", xy[1]);

        // output always inside the grid
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let heat = rng_tensor(&mut rng, vec![5, 7], -3.0, 3.0);
            let mut tape = Tape::new();
            let hm = tape.constant(heat);
            let out = tape.soft_argmax2d(hm, 1.0).unwrap();
            let xy = tape.tensor(out).unwrap().data().to_vec();
            assert!(xy[0] >= 0.0 && xy[0] <= 6.0);
            assert!(xy[1] >= 0.0 && xy[1] <= 4.0);
        }
    }

    #[test]
    fn soft_argmax_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut params = Params::new();
        param_tensor(&mut params, "h", rng_tensor(&mut rng, vec![4, 5], -1.0, 1.0));
        let target = Tensor::new(vec![2], vec![1.7, 2.2]);
        fd_check(&params, move |t, l| {
            let out = t.soft_argmax2d(l[0], 2.0).unwrap();
            let tc = t.constant(target.clone());
            t.mse_loss(out, tc).unwrap()
        });
    }

    #[test]
    fn concat_add_bias_reshape_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut params = Params::new();
        param_tensor(&mut params, "a", rng_tensor(&mut rng, vec![2, 3], -1.0, 1.0));
        param_tensor(&mut params, "b", rng_tensor(&mut rng, vec![2, 4], -1.0, 1.0));
        param_tensor(&mut params, "bias", rng_tensor(&mut rng, vec![7], -1.0, 1.0));
        fd_check(&params, |t, l| {
            let cat = t.concat(1, &[l[0], l[1]]).unwrap();
            let biased = t.add_bias(cat, l[2]).unwrap();
            let flat = t.reshape(biased, vec![1, 14]).unwrap();
            let z = t.constant(Tensor::zeros(vec![1, 14]));
            t.mse_loss(flat, z).unwrap()
        });
        // concat along rows as well
        let mut params2 = Params::new();
        let mut rng2 = ChaCha8Rng::seed_from_u64(11);
        param_tensor(&mut params2, "a", rng_tensor(&mut rng2, vec![2, 3], -1.0, 1.0));
        param_tensor(&mut params2, "b", rng_tensor(&mut rng2, vec![4, 3], -1.0, 1.0));
        fd_check(&params2, |t, l| {
            let cat = t.concat(0, &[l[0], l[1]]).unwrap();
            let z = t.constant(Tensor::zeros(vec![6, 3]));
            t.mse_loss(cat, z).unwrap()
        });
    }

    #[test]
    fn backward_of_x_squared() {
        let mut params = Params::new();
        param_tensor(&mut params, "x", Tensor::scalar(3.0));
        let mut tape = Tape::new();
        let leaves = tape.bind_params(&params);
        let y = tape.mul(leaves[0], leaves[0]).unwrap();
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.get(0).unwrap().scalar_value(), 6.0);
    }

    #[test]
    fn repeated_backward_is_identical_and_constants_get_no_grad() {
        let mut params = Params::new();
        param_tensor(&mut params, "w", Tensor::new(vec![2], vec![0.5, -1.5]));
        let mut tape = Tape::new();
        let leaves = tape.bind_params(&params);
        let c = tape.constant(Tensor::new(vec![2], vec![2.0, 3.0]));
        let prod = tape.mul(leaves[0], c).unwrap();
        let z = tape.constant(Tensor::zeros(vec![2]));
        let loss = tape.mse_loss(prod, z).unwrap();
        let g1 = tape.backward(loss).unwrap();
        let g2 = tape.backward(loss).unwrap();
        assert_eq!(g1.get(0).unwrap(), g2.get(0).unwrap());
        // exactly one gradient slot: the single registered parameter
        assert_eq!(g1.len(), 1);
    }

    #[test]
    fn foreign_value_is_rejected() {
        let mut t1 = Tape::new();
        let mut t2 = Tape::new();
        let a = t1.constant(Tensor::scalar(1.0));
        let b = t2.constant(Tensor::scalar(2.0));
        assert_eq!(t2.add(a, b).unwrap_err(), AutodiffError::NotOnTape);
        assert_eq!(t2.backward(a).unwrap_err(), AutodiffError::NotOnTape);
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(vec![2, 2]));
        assert!(matches!(
            tape.backward(x),
            Err(AutodiffError::NotScalar(_))
        ));
    }

    #[test]
    fn detach_blocks_gradient_flow() {
        let mut params = Params::new();
        param_tensor(&mut params, "x", Tensor::scalar(2.0));
        let mut tape = Tape::new();
        let leaves = tape.bind_params(&params);
        let d = tape.detach(leaves[0]).unwrap();
        let y = tape.mul(d, d).unwrap();
        let grads = tape.backward(y).unwrap();
        assert!(grads.get(0).is_none());
    }

    #[test]
    fn add_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(vec![2, 3]));
        let b = tape.constant(Tensor::zeros(vec![3, 2]));
        let msg = tape.add(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[3, 2]"), "{msg}");
    }
}
