//! Wengert-list reverse-mode differentiation.
//!
//! Every primitive appends one node holding its forward value and parent
//! links; `backward` replays the list in reverse. Nodes are only ever
//! appended, so the list is acyclic and its order is a topological order.

use std::collections::HashMap;

use super::params::{ParamId, ParamStore};
use super::tensor::{matmul_into, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Sigmoid,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Hadamard,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    MatVec { a: Var, x: Var, m: usize, k: usize },
    Binary(Binary, Var, Var),
    AddRowBias { a: Var, bias: Var, n: usize },
    Scale(Var, f64),
    Unary(Unary, Var),
    Softmax(Var),
    LogSoftmax(Var),
    Pick(Var, usize),
    Concat(Vec<Var>),
    Slice { a: Var, start: usize },
    Row { a: Var, row: usize },
    Stack(Vec<Var>),
    MeanPool(Vec<Var>),
    SqEuclidean(Var, Var),
    AddN(Vec<Var>),
    SumAll(Var),
    Reshape(Var),
}

struct Node {
    op: Op,
    value: Option<Tensor>,
    requires_grad: bool,
}

/// Execution record of one forward pass.
///
/// Parameter leaves borrow their values from a [`ParamStore`] instead of
/// copying them; the store is read-only while the tape is alive.
pub struct Tape<'p> {
    nodes: Vec<Node>,
    store: Option<&'p ParamStore>,
    param_nodes: HashMap<ParamId, Var>,
}

impl Default for Tape<'static> {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape<'static> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            store: None,
            param_nodes: HashMap::new(),
        }
    }
}

impl<'p> Tape<'p> {
    pub fn with_params(store: &'p ParamStore) -> Self {
        Tape {
            nodes: Vec::new(),
            store: Some(store),
            param_nodes: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.expect("param node without store").value(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn data(&self, v: Var) -> &[f64] {
        self.value(v).data()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).item()
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn any_rg(&self, vs: &[Var]) -> bool {
        vs.iter().any(|&v| self.rg(v))
    }

    /// Constant input; never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, false)
    }

    /// Differentiable free leaf (not backed by a parameter).
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, true)
    }

    /// Node for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        let store = self.store.expect("tape was created without a parameter store");
        let rg = store.get(id).tensor.requires_grad;
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            requires_grad: rg,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    /// `a[m×k] · b[k×n]`. A rank-1 `a` is treated as a single row and the
    /// result is then rank-1 as well.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, k, row_vec) = match sa.as_slice() {
            [k] => (1, *k, true),
            [m, k] => (*m, *k, false),
            _ => return Err(Error::shape("matmul", &sa, &sb)),
        };
        let n = match sb.as_slice() {
            [kb, n] if *kb == k => *n,
            _ => return Err(Error::shape("matmul", &sa, &sb)),
        };
        let mut out = vec![0.0; m * n];
        matmul_into(self.data(a), self.data(b), &mut out, m, k, n);
        let shape = if row_vec { vec![n] } else { vec![m, n] };
        let rg = self.any_rg(&[a, b]);
        Ok(self.push(Op::MatMul { a, b, m, k, n }, Tensor::new(shape, out)?, rg))
    }

    /// `a[m×k] · x[k]` giving a length-m vector.
    pub fn matvec(&mut self, a: Var, x: Var) -> Result<Var> {
        let (sa, sx) = (self.shape(a).to_vec(), self.shape(x).to_vec());
        let (m, k) = match (sa.as_slice(), sx.as_slice()) {
            ([m, k], [kx]) if k == kx => (*m, *k),
            _ => return Err(Error::shape("matvec", &sa, &sx)),
        };
        let (ad, xd) = (self.data(a), self.data(x));
        let out: Vec<f64> = (0..m)
            .map(|i| ad[i * k..(i + 1) * k].iter().zip(xd).map(|(p, q)| p * q).sum())
            .collect();
        let rg = self.any_rg(&[a, x]);
        Ok(self.push(Op::MatVec { a, x, m, k }, Tensor::vector(out), rg))
    }

    pub fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            let op = match kind {
                Binary::Add => "add",
                Binary::Sub => "sub",
                Binary::Hadamard => "hadamard",
            };
            return Err(Error::shape(op, self.shape(a), self.shape(b)));
        }
        let f = match kind {
            Binary::Add => |x: f64, y: f64| x + y,
            Binary::Sub => |x: f64, y: f64| x - y,
            Binary::Hadamard => |x: f64, y: f64| x * y,
        };
        let out: Vec<f64> = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(self.shape(a).to_vec(), out)?;
        let rg = self.any_rg(&[a, b]);
        Ok(self.push(Op::Binary(kind, a, b), t, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Hadamard, a, b)
    }

    /// Adds the vector `bias[n]` to every row of `a[m×n]` (or to a rank-1 `a[n]`).
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(bias).to_vec());
        let n = match sb.as_slice() {
            [n] if sa.last() == Some(n) => *n,
            _ => return Err(Error::shape("add_row_bias", &sa, &sb)),
        };
        let bd = self.data(bias);
        let out: Vec<f64> = self
            .data(a)
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bd[i % n])
            .collect();
        let rg = self.any_rg(&[a, bias]);
        Ok(self.push(Op::AddRowBias { a, bias, n }, Tensor::new(sa, out)?, rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out: Vec<f64> = self.data(a).iter().map(|x| x * c).collect();
        let t = Tensor::new(self.shape(a).to_vec(), out).expect("same shape");
        let rg = self.rg(a);
        self.push(Op::Scale(a, c), t, rg)
    }

    pub fn unary(&mut self, kind: Unary, a: Var) -> Var {
        let f = match kind {
            Unary::Sigmoid => sigmoid,
            Unary::Tanh => f64::tanh,
        };
        let out: Vec<f64> = self.data(a).iter().map(|&x| f(x)).collect();
        let t = Tensor::new(self.shape(a).to_vec(), out).expect("same shape");
        let rg = self.rg(a);
        self.push(Op::Unary(kind, a), t, rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(Unary::Sigmoid, a)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Unary::Tanh, a)
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        if self.shape(a).len() != 1 {
            return Err(Error::shape("softmax", self.shape(a), &[]));
        }
        let out = softmax(self.data(a))?;
        let rg = self.rg(a);
        Ok(self.push(Op::Softmax(a), Tensor::vector(out), rg))
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        if self.shape(a).len() != 1 {
            return Err(Error::shape("log_softmax", self.shape(a), &[]));
        }
        let out = log_softmax(self.data(a))?;
        let rg = self.rg(a);
        Ok(self.push(Op::LogSoftmax(a), Tensor::vector(out), rg))
    }

    /// Scalar element `a[index]` of a rank-1 tensor.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        let len = self.value(a).len();
        if index >= len {
            return Err(Error::shape("pick", &[index], &[len]));
        }
        let x = self.data(a)[index];
        let rg = self.rg(a);
        Ok(self.push(Op::Pick(a, index), Tensor::scalar(x), rg))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Empty("concat"));
        }
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(Error::shape("concat", self.shape(p), &[]));
            }
            out.extend_from_slice(self.data(p));
        }
        let rg = self.any_rg(parts);
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::vector(out), rg))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let total = self.value(a).len();
        if self.shape(a).len() != 1 || len == 0 || start + len > total {
            return Err(Error::shape("slice", self.shape(a), &[start, len]));
        }
        let out = self.data(a)[start..start + len].to_vec();
        let rg = self.rg(a);
        Ok(self.push(Op::Slice { a, start }, Tensor::vector(out), rg))
    }

    pub fn row(&mut self, a: Var, row: usize) -> Result<Var> {
        let s = self.shape(a).to_vec();
        match s.as_slice() {
            [m, _] if row < *m => {}
            _ => return Err(Error::shape("row", &s, &[row])),
        }
        let out = self.value(a).row(row).to_vec();
        let rg = self.rg(a);
        Ok(self.push(Op::Row { a, row }, Tensor::vector(out), rg))
    }

    /// Stacks equal-length vectors into the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let d = self.uniform_dim("stack", rows)?;
        let mut out = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            out.extend_from_slice(self.data(r));
        }
        let rg = self.any_rg(rows);
        Ok(self.push(
            Op::Stack(rows.to_vec()),
            Tensor::new(vec![rows.len(), d], out)?,
            rg,
        ))
    }

    fn uniform_dim(&self, op: &'static str, xs: &[Var]) -> Result<usize> {
        let first = *xs.first().ok_or(Error::Empty(op))?;
        let s0 = self.shape(first).to_vec();
        if s0.len() != 1 {
            return Err(Error::shape(op, &s0, &[]));
        }
        for &x in &xs[1..] {
            if self.shape(x) != s0.as_slice() {
                return Err(Error::shape(op, &s0, self.shape(x)));
            }
        }
        Ok(s0[0])
    }

    /// Coordinate-wise arithmetic mean of equal-length vectors.
    pub fn mean_pool(&mut self, xs: &[Var]) -> Result<Var> {
        let d = self.uniform_dim("mean_pool", xs)?;
        let mut out = vec![0.0; d];
        for &x in xs {
            out.iter_mut().zip(self.data(x)).for_each(|(o, v)| *o += v);
        }
        let inv = 1.0 / xs.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        let rg = self.any_rg(xs);
        Ok(self.push(Op::MeanPool(xs.to_vec()), Tensor::vector(out), rg))
    }

    /// Dimension-averaged squared distance `Σ(a−b)²/d`.
    pub fn sq_euclidean(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape("sq_euclidean", self.shape(a), self.shape(b)));
        }
        let d = self.value(a).len() as f64;
        let s: f64 = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let rg = self.any_rg(&[a, b]);
        Ok(self.push(Op::SqEuclidean(a, b), Tensor::scalar(s / d), rg))
    }

    /// Elementwise sum of same-shaped tensors.
    pub fn add_n(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs.first().ok_or(Error::Empty("add_n"))?;
        let shape = self.shape(first).to_vec();
        let mut out = vec![0.0; self.value(first).len()];
        for &x in xs {
            if self.shape(x) != shape.as_slice() {
                return Err(Error::shape("add_n", &shape, self.shape(x)));
            }
            out.iter_mut().zip(self.data(x)).for_each(|(o, v)| *o += v);
        }
        let rg = self.any_rg(xs);
        Ok(self.push(Op::AddN(xs.to_vec()), Tensor::new(shape, out)?, rg))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.data(a).iter().sum();
        let rg = self.rg(a);
        self.push(Op::SumAll(a), Tensor::scalar(s), rg)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshaped(shape.to_vec())?;
        let rg = self.rg(a);
        Ok(self.push(Op::Reshape(a), t, rg))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::NonScalarLoss(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.rg(loss) {
            grads[loss.0] = Some(vec![1.0]);
        }
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(Var(i), &g, &mut grads);
            grads[i] = Some(g);
        }
        let mut params = Vec::new();
        for (&id, &v) in &self.param_nodes {
            if let Some(g) = grads[v.0].take() {
                params.push((id, g));
            }
        }
        params.sort_by_key(|(id, _)| *id);
        Ok(Gradients { nodes: grads, params })
    }

    fn propagate(&self, out: Var, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut send = |v: Var, contrib: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let n = self.value(v).len();
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; n]);
            contrib(slot);
        };
        match &self.nodes[out.0].op {
            Op::Leaf | Op::Param(_) => {}
            &Op::MatMul { a, b, m, k, n } => {
                let (ad, bd) = (self.data(a), self.data(b));
                // ga += g · bᵀ
                send(a, &mut |ga| {
                    for i in 0..m {
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            let grow = &g[i * n..(i + 1) * n];
                            ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                // gb += aᵀ · g
                send(b, &mut |gb| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let av = ad[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            let gbrow = &mut gb[p * n..(p + 1) * n];
                            gbrow.iter_mut().zip(grow).for_each(|(o, gv)| *o += av * gv);
                        }
                    }
                });
            }
            &Op::MatVec { a, x, m, k } => {
                let (ad, xd) = (self.data(a), self.data(x));
                send(a, &mut |ga| {
                    for i in 0..m {
                        for p in 0..k {
                            ga[i * k + p] += g[i] * xd[p];
                        }
                    }
                });
                send(x, &mut |gx| {
                    for i in 0..m {
                        for p in 0..k {
                            gx[p] += g[i] * ad[i * k + p];
                        }
                    }
                });
            }
            &Op::Binary(kind, a, b) => match kind {
                Binary::Add => {
                    send(a, &mut |ga| add_into(ga, g));
                    send(b, &mut |gb| add_into(gb, g));
                }
                Binary::Sub => {
                    send(a, &mut |ga| add_into(ga, g));
                    send(b, &mut |gb| gb.iter_mut().zip(g).for_each(|(o, v)| *o -= v));
                }
                Binary::Hadamard => {
                    let (ad, bd) = (self.data(a), self.data(b));
                    send(a, &mut |ga| {
                        for (i, o) in ga.iter_mut().enumerate() {
                            *o += g[i] * bd[i];
                        }
                    });
                    send(b, &mut |gb| {
                        for (i, o) in gb.iter_mut().enumerate() {
                            *o += g[i] * ad[i];
                        }
                    });
                }
            },
            &Op::AddRowBias { a, bias, n } => {
                send(a, &mut |ga| add_into(ga, g));
                send(bias, &mut |gb| {
                    for (i, gv) in g.iter().enumerate() {
                        gb[i % n] += gv;
                    }
                });
            }
            &Op::Scale(a, c) => send(a, &mut |ga| ga.iter_mut().zip(g).for_each(|(o, v)| *o += c * v)),
            &Op::Unary(kind, a) => {
                let y = self.data(out);
                send(a, &mut |ga| {
                    for (i, o) in ga.iter_mut().enumerate() {
                        let d = match kind {
                            Unary::Sigmoid => y[i] * (1.0 - y[i]),
                            Unary::Tanh => 1.0 - y[i] * y[i],
                        };
                        *o += g[i] * d;
                    }
                });
            }
            &Op::Softmax(a) => {
                let y = self.data(out);
                let dot: f64 = g.iter().zip(y).map(|(p, q)| p * q).sum();
                send(a, &mut |ga| {
                    for (i, o) in ga.iter_mut().enumerate() {
                        *o += y[i] * (g[i] - dot);
                    }
                });
            }
            &Op::LogSoftmax(a) => {
                let y = self.data(out);
                let gsum: f64 = g.iter().sum();
                send(a, &mut |ga| {
                    for (i, o) in ga.iter_mut().enumerate() {
                        *o += g[i] - y[i].exp() * gsum;
                    }
                });
            }
            &Op::Pick(a, idx) => send(a, &mut |ga| ga[idx] += g[0]),
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    let seg = &g[off..off + len];
                    send(p, &mut |gp| add_into(gp, seg));
                    off += len;
                }
            }
            &Op::Slice { a, start } => {
                send(a, &mut |ga| add_into(&mut ga[start..start + g.len()], g));
            }
            &Op::Row { a, row } => {
                let c = g.len();
                send(a, &mut |ga| add_into(&mut ga[row * c..(row + 1) * c], g));
            }
            Op::Stack(rows) => {
                let d = self.value(out).cols();
                for (i, &r) in rows.iter().enumerate() {
                    let seg = &g[i * d..(i + 1) * d];
                    send(r, &mut |gr| add_into(gr, seg));
                }
            }
            Op::MeanPool(xs) => {
                let inv = 1.0 / xs.len() as f64;
                for &x in xs {
                    send(x, &mut |gx| gx.iter_mut().zip(g).for_each(|(o, v)| *o += inv * v));
                }
            }
            &Op::SqEuclidean(a, b) => {
                let (ad, bd) = (self.data(a), self.data(b));
                let c = 2.0 * g[0] / ad.len() as f64;
                send(a, &mut |ga| {
                    for (i, o) in ga.iter_mut().enumerate() {
                        *o += c * (ad[i] - bd[i]);
                    }
                });
                send(b, &mut |gb| {
                    for (i, o) in gb.iter_mut().enumerate() {
                        *o -= c * (ad[i] - bd[i]);
                    }
                });
            }
            Op::AddN(xs) => {
                for &x in xs {
                    send(x, &mut |gx| add_into(gx, g));
                }
            }
            &Op::SumAll(a) => send(a, &mut |ga| ga.iter_mut().for_each(|o| *o += g[0])),
            &Op::Reshape(a) => send(a, &mut |ga| add_into(ga, g)),
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(o, v)| *o += v);
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax.
pub fn softmax(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Empty("softmax"));
    }
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

pub fn log_softmax(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Empty("log_softmax"));
    }
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok(x.iter().map(|v| v - lse).collect())
}

/// Result of a reverse pass.
pub struct Gradients {
    nodes: Vec<Option<Vec<f64>>>,
    params: Vec<(ParamId, Vec<f64>)>,
}

impl Gradients {
    /// Gradient of a non-parameter node, if the loss reached it.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.nodes.get(v.0).and_then(|g| g.as_deref())
    }

    /// Parameter gradients in id order. Parameters the loss never reached are absent.
    pub fn params(&self) -> &[(ParamId, Vec<f64>)] {
        &self.params
    }

    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.params
            .binary_search_by_key(&id, |(p, _)| *p)
            .ok()
            .map(|i| self.params[i].1.as_slice())
    }

    pub fn into_params(self) -> Vec<(ParamId, Vec<f64>)> {
        self.params
    }

    /// Adds every parameter gradient into the store's gradient slots.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for (id, g) in &self.params {
            store.get_mut(*id).tensor.accumulate_grad(g);
        }
    }
}
