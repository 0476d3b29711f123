//! Reverse-mode differentiation over dense tensors.
//!
//! A [`Graph`] is an append-only record of operations built during one
//! forward pass. Every operation validates shapes, computes its value
//! eagerly and stores what its backward rule needs. [`Graph::backward`]
//! walks the record in reverse and returns a [`Gradients`] table indexed by
//! [`Var`] handles.
//!
//! ```
//! use darter::graph::Graph;
//! use darter::tensor::Tensor;
//!
//! let mut g = Graph::new();
//! let theta = g.leaf(Tensor::vector(vec![1.0, -2.0, 3.0]));
//! let sq = g.mul(theta, theta).unwrap();
//! let loss = g.sum(sq);
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.get(theta).unwrap().data(), &[2.0, -4.0, 6.0]);
//! ```
//!
//! Records are single-threaded and rebuilt for every forward pass; several
//! records may run concurrently against shared read-only parameters.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    /// Exponential linear unit with unit negative-branch coefficient.
    Elu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Elu => elu(x),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Binary(BinaryOp, Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    Act(Activation, Var),
    Normalize { input: Var, inv_std: Vec<f64> },
    Concat { parts: Vec<Var>, axis: usize },
    Narrow { input: Var, axis: usize, start: usize },
    GatherRows { input: Var, indices: Vec<usize> },
    Reshape(Var),
    Sum(Var),
    Bce { probs: Var, gold: Tensor, mask: Tensor, eps: f64 },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// The computation record of one forward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node that reaches it.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Moves a gradient out; `None` if `v` does not reach the loss.
    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

/// Outer/axis/inner extents of `shape` around `axis`.
fn split_extent(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Registers an input or parameter.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// `[m×k] · [k×n] → [m×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::dim("matmul", ta.shape(), tb.shape()));
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let out = matmul_raw(ta.data(), tb.data(), m, k, n);
        let t = Tensor::new(vec![m, n], out)?;
        Ok(self.push(t, Op::MatMul(a, b)))
    }

    pub fn elementwise(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let f = match op {
            BinaryOp::Add => |x: f64, y: f64| x + y,
            BinaryOp::Sub => |x: f64, y: f64| x - y,
            BinaryOp::Mul => |x: f64, y: f64| x * y,
        };
        let t = self
            .value(a)
            .zip_map(self.value(b), f)
            .map_err(|_| Error::dim("elementwise", self.shape(a), self.shape(b)))?;
        Ok(self.push(t, Op::Binary(op, a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Mul, a, b)
    }

    fn check_row(&self, op: &'static str, a: Var, row: Var) -> Result<()> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.len() != ta.cols() {
            return Err(Error::dim(op, ta.shape(), tr.shape()));
        }
        Ok(())
    }

    /// Adds the vector `row` to every row of `a` (bias broadcast).
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.check_row("add_row", a, row)?;
        let (ta, tr) = (self.value(a), self.value(row));
        let c = ta.cols();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + tr.data()[i % c])
            .collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(t, Op::AddRow(a, row)))
    }

    /// Multiplies every row of `a` element-wise by the vector `row`.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.check_row("mul_row", a, row)?;
        let (ta, tr) = (self.value(a), self.value(row));
        let c = ta.cols();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v * tr.data()[i % c])
            .collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(t, Op::MulRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a).scale(c);
        self.push(t, Op::Scale(a, c))
    }

    pub fn activation(&mut self, act: Activation, a: Var) -> Result<Var> {
        let ta = self.value(a);
        if !ta.is_finite() {
            return Err(Error::NonFinite(match act {
                Activation::Tanh => "tanh",
                Activation::Sigmoid => "sigmoid",
                Activation::Elu => "elu",
            }));
        }
        let t = ta.map(|x| act.apply(x));
        Ok(self.push(t, Op::Act(act, a)))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Sigmoid, a)
    }

    pub fn elu(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Elu, a)
    }

    /// Per-row standardization over the last dimension:
    /// `(x - mean) / sqrt(var + eps)` with the biased variance.
    pub fn normalize(&mut self, a: Var, eps: f64) -> Result<Var> {
        let ta = self.value(a);
        let c = ta.cols();
        if c < 2 {
            return Err(Error::contract(format!(
                "normalization needs a last dimension of at least 2, got {:?}",
                ta.shape()
            )));
        }
        let mut out = Vec::with_capacity(ta.len());
        let mut inv_std = Vec::with_capacity(ta.rows());
        for r in 0..ta.rows() {
            let row = ta.row(r);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + eps).sqrt();
            out.extend(row.iter().map(|v| (v - mean) * is));
            inv_std.push(is);
        }
        let t = Tensor::new(ta.shape().to_vec(), out)?;
        Ok(self.push(t, Op::Normalize { input: a, inv_std }))
    }

    /// Normalization followed by a learned per-feature gain and bias.
    pub fn layer_norm(&mut self, a: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let n = self.normalize(a, eps)?;
        let scaled = self.mul_row(n, gain)?;
        self.add_row(scaled, bias)
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat of zero parts"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::contract(format!("concat axis {axis} out of range for {base:?}")));
        }
        let mut axis_total = 0;
        for p in parts {
            let s = self.shape(*p);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(Error::dim("concat", &base, s));
            }
            axis_total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = axis_total;
        let (outer, _, inner) = split_extent(&base, axis);
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for p in parts {
                let t = self.value(*p);
                let block = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
            }
        }
        let t = Tensor::new(shape, data)?;
        Ok(self.push(
            t,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
        ))
    }

    /// The sub-range `start..start + len` of `a` along `axis`.
    pub fn narrow(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let ta = self.value(a);
        let shape = ta.shape();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::contract(format!(
                "narrow({axis}, {start}, {len}) out of range for {shape:?}"
            )));
        }
        let (outer, size, inner) = split_extent(shape, axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * size * inner + start * inner;
            data.extend_from_slice(&ta.data()[base..base + len * inner]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = len;
        let t = Tensor::new(out_shape, data)?;
        Ok(self.push(t, Op::Narrow { input: a, axis, start }))
    }

    /// Splits `a` along `axis` into consecutive pieces of the given sizes.
    pub fn split(&mut self, a: Var, axis: usize, sizes: &[usize]) -> Result<Vec<Var>> {
        let total = self.shape(a).get(axis).copied().unwrap_or(0);
        if sizes.iter().sum::<usize>() != total {
            return Err(Error::contract(format!(
                "split sizes {sizes:?} do not cover axis {axis} of {:?}",
                self.shape(a)
            )));
        }
        let mut start = 0;
        let mut out = Vec::with_capacity(sizes.len());
        for &s in sizes {
            out.push(self.narrow(a, axis, start, s)?);
            start += s;
        }
        Ok(out)
    }

    /// Selects rows (first-axis slices of a matrix) by index, with repetition.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let ta = self.value(a);
        if ta.rank() != 2 {
            return Err(Error::contract(format!(
                "gather_rows expects a matrix, got {:?}",
                ta.shape()
            )));
        }
        let (rows, cols) = (ta.shape()[0], ta.shape()[1]);
        if indices.is_empty() {
            return Err(Error::contract("gather_rows with no indices"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::contract(format!("row {bad} out of range for {rows} rows")));
        }
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            data.extend_from_slice(ta.row(i));
        }
        let t = Tensor::new(vec![indices.len(), cols], data)?;
        Ok(self.push(
            t,
            Op::GatherRows {
                input: a,
                indices: indices.to_vec(),
            },
        ))
    }

    /// Row `i` of a matrix as a `[1×n]` matrix.
    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        self.gather_rows(a, &[i])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).reshape(shape)?;
        Ok(self.push(t, Op::Reshape(a)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let t = Tensor::scalar(self.value(a).sum());
        self.push(t, Op::Sum(a))
    }

    /// Masked binary cross-entropy, summed over cells where `mask == 1`.
    ///
    /// Probabilities are clamped into `[eps, 1 - eps]` before the logarithms;
    /// the clamp passes no gradient outside that interval.
    pub fn bce(&mut self, probs: Var, gold: &Tensor, mask: &Tensor, eps: f64) -> Result<Var> {
        let tp = self.value(probs);
        if tp.shape() != gold.shape() {
            return Err(Error::dim("bce", tp.shape(), gold.shape()));
        }
        if tp.shape() != mask.shape() {
            return Err(Error::dim("bce", tp.shape(), mask.shape()));
        }
        let binary = |t: &Tensor| t.data().iter().all(|&v| v == 0.0 || v == 1.0);
        if !binary(gold) {
            return Err(Error::contract("gold labels must be 0 or 1"));
        }
        if !binary(mask) {
            return Err(Error::contract("mask entries must be 0 or 1"));
        }
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::contract(format!("clamp epsilon {eps} outside (0, 0.5)")));
        }
        let mut total = 0.0;
        for ((&p, &y), &m) in tp.data().iter().zip(gold.data()).zip(mask.data()) {
            if m == 0.0 {
                continue;
            }
            let pc = p.clamp(eps, 1.0 - eps);
            total -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        }
        Ok(self.push(
            Tensor::scalar(total),
            Op::Bce {
                probs,
                gold: gold.clone(),
                mask: mask.clone(),
                eps,
            },
        ))
    }

    /// Gradients of the single-element `loss` with respect to every node that
    /// reaches it.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::full(self.shape(loss), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.backprop_node(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut acc = |v: Var, contrib: Tensor| -> Result<()> {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&contrib),
                slot @ None => {
                    *slot = Some(contrib);
                    Ok(())
                }
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                // dA = G · Bᵀ
                let mut ga = vec![0.0; m * k];
                for i in 0..m {
                    let grow = &g.data()[i * n..(i + 1) * n];
                    for kk in 0..k {
                        let brow = &tb.data()[kk * n..(kk + 1) * n];
                        ga[i * k + kk] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                    }
                }
                // dB = Aᵀ · G
                let mut gb = vec![0.0; k * n];
                for i in 0..m {
                    let grow = &g.data()[i * n..(i + 1) * n];
                    for kk in 0..k {
                        let aik = ta.data()[i * k + kk];
                        if aik == 0.0 {
                            continue;
                        }
                        for (dst, gv) in gb[kk * n..(kk + 1) * n].iter_mut().zip(grow) {
                            *dst += aik * gv;
                        }
                    }
                }
                acc(*a, Tensor::new(vec![m, k], ga)?)?;
                acc(*b, Tensor::new(vec![k, n], gb)?)?;
            }
            Op::Binary(op, a, b) => match op {
                BinaryOp::Add => {
                    acc(*a, g.clone())?;
                    acc(*b, g.clone())?;
                }
                BinaryOp::Sub => {
                    acc(*a, g.clone())?;
                    acc(*b, g.scale(-1.0))?;
                }
                BinaryOp::Mul => {
                    acc(*a, g.zip_map(self.value(*b), |x, y| x * y)?)?;
                    acc(*b, g.zip_map(self.value(*a), |x, y| x * y)?)?;
                }
            },
            Op::AddRow(a, row) => {
                let c = g.cols();
                let mut gr = vec![0.0; c];
                for (i, v) in g.data().iter().enumerate() {
                    gr[i % c] += v;
                }
                acc(*a, g.clone())?;
                acc(*row, Tensor::new(self.shape(*row).to_vec(), gr)?)?;
            }
            Op::MulRow(a, row) => {
                let (ta, tr) = (self.value(*a), self.value(*row));
                let c = g.cols();
                let mut gr = vec![0.0; c];
                let mut ga = Vec::with_capacity(g.len());
                for (i, (gv, av)) in g.data().iter().zip(ta.data()).enumerate() {
                    gr[i % c] += gv * av;
                    ga.push(gv * tr.data()[i % c]);
                }
                acc(*a, Tensor::new(ta.shape().to_vec(), ga)?)?;
                acc(*row, Tensor::new(tr.shape().to_vec(), gr)?)?;
            }
            Op::Scale(a, c) => acc(*a, g.scale(*c))?,
            Op::Act(act, a) => {
                let y = &node.value;
                let d = match act {
                    Activation::Tanh => g.zip_map(y, |gv, yv| gv * (1.0 - yv * yv))?,
                    Activation::Sigmoid => g.zip_map(y, |gv, yv| gv * yv * (1.0 - yv))?,
                    // elu(x) > 0 exactly when x > 0; elsewhere d/dx = elu(x) + 1.
                    Activation::Elu => {
                        g.zip_map(y, |gv, yv| if yv > 0.0 { gv } else { gv * (yv + 1.0) })?
                    }
                };
                acc(*a, d)?;
            }
            Op::Normalize { input, inv_std } => {
                let y = &node.value;
                let c = y.cols();
                let mut gx = Vec::with_capacity(y.len());
                for (r, is) in inv_std.iter().enumerate() {
                    let gy = &g.data()[r * c..(r + 1) * c];
                    let yr = y.row(r);
                    let mean_g = gy.iter().sum::<f64>() / c as f64;
                    let mean_gy = gy.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                    gx.extend(gy.iter().zip(yr).map(|(gv, yv)| is * (gv - mean_g - yv * mean_gy)));
                }
                acc(*input, Tensor::new(y.shape().to_vec(), gx)?)?;
            }
            Op::Concat { parts, axis } => {
                let (outer, _, inner) = split_extent(g.shape(), *axis);
                let mut pieces: Vec<Vec<f64>> =
                    parts.iter().map(|p| Vec::with_capacity(self.value(*p).len())).collect();
                let mut offset = 0;
                for _ in 0..outer {
                    for (p, piece) in parts.iter().zip(pieces.iter_mut()) {
                        let block = self.shape(*p)[*axis] * inner;
                        piece.extend_from_slice(&g.data()[offset..offset + block]);
                        offset += block;
                    }
                }
                for (p, piece) in parts.iter().zip(pieces) {
                    acc(*p, Tensor::new(self.shape(*p).to_vec(), piece)?)?;
                }
            }
            Op::Narrow { input, axis, start } => {
                let in_shape = self.shape(*input).to_vec();
                let (outer, size, inner) = split_extent(&in_shape, *axis);
                let len = g.shape()[*axis];
                let mut gi = vec![0.0; in_shape.iter().product()];
                for o in 0..outer {
                    let dst = o * size * inner + start * inner;
                    let src = o * len * inner;
                    gi[dst..dst + len * inner].copy_from_slice(&g.data()[src..src + len * inner]);
                }
                acc(*input, Tensor::new(in_shape, gi)?)?;
            }
            Op::GatherRows { input, indices } => {
                let in_shape = self.shape(*input).to_vec();
                let cols = in_shape[1];
                let mut gi = vec![0.0; in_shape[0] * cols];
                for (r, &i) in indices.iter().enumerate() {
                    for (dst, v) in gi[i * cols..(i + 1) * cols].iter_mut().zip(g.row(r)) {
                        *dst += v;
                    }
                }
                acc(*input, Tensor::new(in_shape, gi)?)?;
            }
            Op::Reshape(a) => acc(*a, g.reshape(self.shape(*a))?)?,
            Op::Sum(a) => acc(*a, Tensor::full(self.shape(*a), g.data()[0]))?,
            Op::Bce {
                probs,
                gold,
                mask,
                eps,
            } => {
                let upstream = g.data()[0];
                let tp = self.value(*probs);
                let data = tp
                    .data()
                    .iter()
                    .zip(gold.data())
                    .zip(mask.data())
                    .map(|((&p, &y), &m)| {
                        if m == 0.0 || p < *eps || p > 1.0 - eps {
                            0.0
                        } else {
                            upstream * (-y / p + (1.0 - y) / (1.0 - p))
                        }
                    })
                    .collect();
                acc(*probs, Tensor::new(tp.shape().to_vec(), data)?)?;
            }
        }
        Ok(())
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = a[i * k + kk];
            if aik == 0.0 {
                continue;
            }
            for (o, bv) in orow.iter_mut().zip(&b[kk * n..(kk + 1) * n]) {
                *o += aik * bv;
            }
        }
    }
    out
}
