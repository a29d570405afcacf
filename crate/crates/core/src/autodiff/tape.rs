use std::collections::HashMap;

use super::tensor::{dot, matvec_into, outer_acc, vecmat_acc};
use super::{ParamId, ParamStore, Tensor, TensorError};

/// Floor applied inside the log of the likelihood loss.
pub const LOG_EPS: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    MatVec(Var, Var),
    VecMat(Var, Var),
    Dot(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, f64),
    AddN(Vec<Var>),
    Sigmoid(Var),
    Tanh(Var),
    Concat { parts: Vec<Var>, axis: usize },
    Slice { src: Var, axis: usize, start: usize },
    Reshape(Var),
    Stack(Vec<Var>),
    GatherRow { table: Var, row: usize },
    Softmax(Var),
    Nll { probs: Var, target: usize },
    SelectSum { src: Var, indices: Vec<usize> },
    Sum(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::MatVec(..) => "matvec",
            Op::VecMat(..) => "vecmat",
            Op::Dot(..) => "dot",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Hadamard(..) => "hadamard",
            Op::Scale(..) => "scale",
            Op::AddN(_) => "add_n",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Reshape(_) => "reshape",
            Op::Stack(_) => "stack",
            Op::GatherRow { .. } => "gather_row",
            Op::Softmax(_) => "softmax",
            Op::Nll { .. } => "nll_loss",
            Op::SelectSum { .. } => "select_sum",
            Op::Sum(_) => "sum",
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Append-only record of a forward computation.
///
/// Node ids are assigned in creation order, so every input id is smaller
/// than the id of the node consuming it and a single reverse sweep is a
/// valid backward schedule.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    visited: usize,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` influenced the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Number of nodes the backward sweep processed.
    pub fn visited(&self) -> usize {
        self.visited
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, inner)
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        let id = Var(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    /// Records a constant (non-trainable) tensor.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(Op::Input, value)
    }

    /// Records a parameter leaf. Repeated calls with the same id return the
    /// same node, so gradient contributions meet in one place.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(Op::Param(id), store.value(id).clone());
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(mismatch("matmul", ta, tb));
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            vecmat_acc(&ta.data()[i * k..(i + 1) * k], tb.data(), k, n, &mut out[i * n..(i + 1) * n]);
        }
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    /// Matrix-vector product `a[m×k] · x[k] -> [m]`.
    pub fn matvec(&mut self, a: Var, x: Var) -> Result<Var, TensorError> {
        let (ta, tx) = (self.value(a), self.value(x));
        if ta.rank() != 2 || tx.rank() != 1 || ta.shape()[1] != tx.len() {
            return Err(mismatch("matvec", ta, tx));
        }
        let (m, k) = (ta.shape()[0], ta.shape()[1]);
        let mut out = vec![0.0; m];
        matvec_into(ta.data(), m, k, tx.data(), &mut out);
        let value = Tensor::new(vec![m], out)?;
        Ok(self.push(Op::MatVec(a, x), value))
    }

    /// Vector-matrix product `xᵀ[m] · a[m×n] -> [n]`.
    pub fn vecmat(&mut self, x: Var, a: Var) -> Result<Var, TensorError> {
        let (tx, ta) = (self.value(x), self.value(a));
        if ta.rank() != 2 || tx.rank() != 1 || ta.shape()[0] != tx.len() {
            return Err(mismatch("vecmat", tx, ta));
        }
        let (m, n) = (ta.shape()[0], ta.shape()[1]);
        let mut out = vec![0.0; n];
        vecmat_acc(tx.data(), ta.data(), m, n, &mut out);
        let value = Tensor::new(vec![n], out)?;
        Ok(self.push(Op::VecMat(x, a), value))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 1 || ta.shape() != tb.shape() {
            return Err(mismatch("dot", ta, tb));
        }
        let value = Tensor::scalar(dot(ta.data(), tb.data()));
        Ok(self.push(Op::Dot(a, b), value))
    }

    fn zip_with(
        &mut self,
        a: Var,
        b: Var,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(op.name(), ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(op, value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with(a, b, Op::Hadamard(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x * c).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        self.push(Op::Scale(a, c), value)
    }

    /// Sum of equally shaped tensors, accumulated left to right.
    pub fn add_n(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts.first().ok_or(TensorError::Empty("add_n"))?;
        if parts.len() == 1 {
            return Ok(first);
        }
        let mut acc = self.value(first).clone();
        for &p in &parts[1..] {
            let t = self.value(p);
            if t.shape() != acc.shape() {
                return Err(mismatch("add_n", &acc, t));
            }
            acc.add_assign(t);
        }
        Ok(self.push(Op::AddN(parts.to_vec()), acc))
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        self.push(op, value)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a), f64::tanh)
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, TensorError> {
        let first = *parts.first().ok_or(TensorError::Empty("concat"))?;
        let base = self.value(first).shape().to_vec();
        if axis >= base.len() {
            return Err(TensorError::AxisOutOfRange { axis, rank: base.len() });
        }
        let mut total = 0;
        for &p in parts {
            let s = self.value(p).shape();
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(mismatch("concat", self.value(first), self.value(p)));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, inner) = split_axis(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let t = self.value(p);
                let block = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
            }
        }
        let value = Tensor::new(shape, data)?;
        Ok(self.push(Op::Concat { parts: parts.to_vec(), axis }, value))
    }

    /// Takes `len` entries starting at `start` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var, TensorError> {
        let ta = self.value(a);
        let shape = ta.shape();
        if axis >= shape.len() {
            return Err(TensorError::AxisOutOfRange { axis, rank: shape.len() });
        }
        if len == 0 || start + len > shape[axis] {
            return Err(TensorError::SliceOutOfRange {
                start,
                len,
                extent: shape[axis],
            });
        }
        let (outer, inner) = split_axis(shape, axis);
        let src_block = shape[axis] * inner;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let off = o * src_block + start * inner;
            data.extend_from_slice(&ta.data()[off..off + len * inner]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = len;
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(Op::Slice { src: a, axis, start }, value))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var, TensorError> {
        let value = self.value(a).clone().reshaped(shape)?;
        Ok(self.push(Op::Reshape(a), value))
    }

    /// Stacks equal-length vectors into a matrix, one vector per row.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var, TensorError> {
        let first = *rows.first().ok_or(TensorError::Empty("stack"))?;
        let width = self.value(first).len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for &r in rows {
            let t = self.value(r);
            if t.rank() != 1 || t.len() != width {
                return Err(mismatch("stack", self.value(first), t));
            }
            data.extend_from_slice(t.data());
        }
        let value = Tensor::new(vec![rows.len(), width], data)?;
        Ok(self.push(Op::Stack(rows.to_vec()), value))
    }

    /// Row `row` of a matrix as a vector (embedding lookup).
    pub fn gather_row(&mut self, table: Var, row: usize) -> Result<Var, TensorError> {
        let t = self.value(table);
        if t.rank() != 2 {
            return Err(TensorError::ShapeMismatch {
                op: "gather_row",
                left: t.shape().to_vec(),
                right: vec![row],
            });
        }
        if row >= t.rows() {
            return Err(TensorError::IndexOutOfRange { index: row, len: t.rows() });
        }
        let value = Tensor::vector(t.row(row));
        Ok(self.push(Op::GatherRow { table, row }, value))
    }

    /// Softmax over a vector, computed with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Result<Var, TensorError> {
        let ta = self.value(a);
        if ta.rank() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "softmax",
                left: ta.shape().to_vec(),
                right: vec![],
            });
        }
        let value = Tensor::vector(&softmax_values(ta.data()));
        Ok(self.push(Op::Softmax(a), value))
    }

    /// `-ln(max(p[target], 1e-12))` for a probability vector `p`.
    pub fn nll_loss(&mut self, probs: Var, target: usize) -> Result<Var, TensorError> {
        let tp = self.value(probs);
        if target >= tp.len() {
            return Err(TensorError::IndexOutOfRange { index: target, len: tp.len() });
        }
        let value = Tensor::scalar(-tp.data()[target].max(LOG_EPS).ln());
        Ok(self.push(Op::Nll { probs, target }, value))
    }

    /// Sum of the entries of a vector at `indices` (repeats count twice).
    pub fn select_sum(&mut self, src: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let t = self.value(src);
        let mut s = 0.0;
        for &i in indices {
            if i >= t.len() {
                return Err(TensorError::IndexOutOfRange { index: i, len: t.len() });
            }
            s += t.data()[i];
        }
        Ok(self.push(
            Op::SelectSum {
                src,
                indices: indices.to_vec(),
            },
            Tensor::scalar(s),
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    /// Reverse sweep from a scalar `loss`. Gradients reaching parameter
    /// leaves are added into `store`; parameters the loss does not depend
    /// on are left untouched.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<Gradients, TensorError> {
        let grads = self.backward_nodes(loss)?;
        for node in self.nodes.iter().zip(&grads.grads) {
            if let (Op::Param(id), Some(g)) = (&node.0.op, node.1) {
                store.get_mut(*id).grad.add_assign(g);
            }
        }
        Ok(grads)
    }

    /// Reverse sweep that leaves parameter stores alone.
    pub fn backward_nodes(&self, loss: Var) -> Result<Gradients, TensorError> {
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(TensorError::NonScalarLoss {
                shape: lt.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(lt.shape(), 1.0));
        let mut visited = 0;
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            visited += 1;
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads, visited })
    }

    fn propagate(&self, id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[id];
        let out = &node.value;
        match &node.op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                // da = g · bᵀ
                let ga = accum(grads, *a, ta.shape());
                let mut buf = vec![0.0; k];
                for i in 0..m {
                    matvec_into(tb.data(), k, n, &g.data()[i * n..(i + 1) * n], &mut buf);
                    axpy(&mut ga[i * k..(i + 1) * k], 1.0, &buf);
                }
                // db = aᵀ · g
                let gb = accum(grads, *b, tb.shape());
                for i in 0..m {
                    outer_acc(&ta.data()[i * k..(i + 1) * k], &g.data()[i * n..(i + 1) * n], gb);
                }
            }
            Op::MatVec(a, x) => {
                let (ta, tx) = (self.value(*a), self.value(*x));
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                outer_acc(g.data(), tx.data(), accum(grads, *a, ta.shape()));
                vecmat_acc(g.data(), ta.data(), m, k, accum(grads, *x, tx.shape()));
            }
            Op::VecMat(x, a) => {
                let (tx, ta) = (self.value(*x), self.value(*a));
                let (m, n) = (ta.shape()[0], ta.shape()[1]);
                outer_acc(tx.data(), g.data(), accum(grads, *a, ta.shape()));
                let gx = accum(grads, *x, tx.shape());
                for i in 0..m {
                    gx[i] += dot(&ta.data()[i * n..(i + 1) * n], g.data());
                }
            }
            Op::Dot(a, b) => {
                let s = g.item();
                let (ta, tb) = (self.value(*a).clone(), self.value(*b).clone());
                axpy(accum(grads, *a, ta.shape()), s, tb.data());
                axpy(accum(grads, *b, tb.shape()), s, ta.data());
            }
            Op::Add(a, b) => {
                axpy(accum(grads, *a, g.shape()), 1.0, g.data());
                axpy(accum(grads, *b, g.shape()), 1.0, g.data());
            }
            Op::Sub(a, b) => {
                axpy(accum(grads, *a, g.shape()), 1.0, g.data());
                axpy(accum(grads, *b, g.shape()), -1.0, g.data());
            }
            Op::Hadamard(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let da = accum(grads, *a, g.shape());
                for ((d, &gv), &bv) in da.iter_mut().zip(g.data()).zip(tb.data()) {
                    *d += gv * bv;
                }
                let db = accum(grads, *b, g.shape());
                for ((d, &gv), &av) in db.iter_mut().zip(g.data()).zip(ta.data()) {
                    *d += gv * av;
                }
            }
            Op::Scale(a, c) => axpy(accum(grads, *a, g.shape()), *c, g.data()),
            Op::AddN(parts) => {
                for p in parts {
                    axpy(accum(grads, *p, g.shape()), 1.0, g.data());
                }
            }
            Op::Sigmoid(a) => {
                let da = accum(grads, *a, g.shape());
                for ((d, &gv), &y) in da.iter_mut().zip(g.data()).zip(out.data()) {
                    *d += gv * y * (1.0 - y);
                }
            }
            Op::Tanh(a) => {
                let da = accum(grads, *a, g.shape());
                for ((d, &gv), &y) in da.iter_mut().zip(g.data()).zip(out.data()) {
                    *d += gv * (1.0 - y * y);
                }
            }
            Op::Concat { parts, axis } => {
                let (outer, inner) = split_axis(out.shape(), *axis);
                let out_block = out.shape()[*axis] * inner;
                let mut offset = 0;
                for p in parts {
                    let shape = self.value(*p).shape().to_vec();
                    let block = shape[*axis] * inner;
                    let dp = accum(grads, *p, &shape);
                    for o in 0..outer {
                        let src = &g.data()[o * out_block + offset..o * out_block + offset + block];
                        axpy(&mut dp[o * block..(o + 1) * block], 1.0, src);
                    }
                    offset += block;
                }
            }
            Op::Slice { src, axis, start } => {
                let shape = self.value(*src).shape().to_vec();
                let (outer, inner) = split_axis(&shape, *axis);
                let src_block = shape[*axis] * inner;
                let len = out.shape()[*axis] * inner;
                let ds = accum(grads, *src, &shape);
                for o in 0..outer {
                    let off = o * src_block + start * inner;
                    axpy(&mut ds[off..off + len], 1.0, &g.data()[o * len..(o + 1) * len]);
                }
            }
            Op::Reshape(a) => {
                let shape = self.value(*a).shape().to_vec();
                axpy(accum(grads, *a, &shape), 1.0, g.data());
            }
            Op::Stack(rows) => {
                let w = out.shape()[1];
                for (i, r) in rows.iter().enumerate() {
                    axpy(accum(grads, *r, &[w]), 1.0, &g.data()[i * w..(i + 1) * w]);
                }
            }
            Op::GatherRow { table, row } => {
                let shape = self.value(*table).shape().to_vec();
                let w = shape[1];
                let dt = accum(grads, *table, &shape);
                axpy(&mut dt[row * w..(row + 1) * w], 1.0, g.data());
            }
            Op::Softmax(a) => {
                let gy = dot(g.data(), out.data());
                let da = accum(grads, *a, g.shape());
                for ((d, &gv), &y) in da.iter_mut().zip(g.data()).zip(out.data()) {
                    *d += y * (gv - gy);
                }
            }
            Op::Nll { probs, target } => {
                let tp = self.value(*probs);
                let p = tp.data()[*target];
                let shape = tp.shape().to_vec();
                if p > LOG_EPS {
                    accum(grads, *probs, &shape)[*target] -= g.item() / p;
                } else {
                    // clamped region has zero slope
                    accum(grads, *probs, &shape);
                }
            }
            Op::SelectSum { src, indices } => {
                let shape = self.value(*src).shape().to_vec();
                let ds = accum(grads, *src, &shape);
                for &i in indices {
                    ds[i] += g.item();
                }
            }
            Op::Sum(a) => {
                let shape = self.value(*a).shape().to_vec();
                let s = g.item();
                accum(grads, *a, &shape).iter_mut().for_each(|d| *d += s);
            }
        }
    }
}

fn accum<'a>(grads: &'a mut [Option<Tensor>], v: Var, shape: &[usize]) -> &'a mut [f64] {
    grads[v.0]
        .get_or_insert_with(|| Tensor::zeros(shape))
        .data_mut()
}

fn axpy(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

/// Numerically stable softmax of a slice.
pub fn softmax_values(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
