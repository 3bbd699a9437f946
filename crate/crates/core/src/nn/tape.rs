use alloc::vec;
use alloc::vec::Vec;

use super::{Gradients, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::math;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Smallest probability the cross-entropy sees.
pub const BCE_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    /// `x · wᵀ`
    MatMulT(Var, Var),
    /// adds a 1×c row to every row
    AddRow(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Prelu(Var, f64),
    PreluParam(Var, Var),
    Concat(Vec<Var>),
    Broadcast(Var),
    Slice(Var, usize),
    Aggregate(Var, usize),
    Softmax(Var),
    WeightedSum(Var, Var),
    MeanRows(Var),
    Bce(Var, Vec<f64>),
    Sum(Vec<Var>),
    Gather(Var, Vec<usize>),
}

struct Node {
    value: Option<Tensor>,
    op: Op,
}

/// Records a computation for reverse-mode differentiation. Parameter values
/// are read from the borrowed store, never copied.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    adjacency: Vec<Vec<Vec<usize>>>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape { op, left: a.shape(), right: b.shape() }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params, nodes: Vec::with_capacity(256), adjacency: Vec::new() }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let n = &self.nodes[v.0];
        match (&n.value, &n.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.value(*id),
            _ => unreachable!("only parameter leaves are stored by reference"),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value: Some(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node { value: None, op: Op::Param(id) });
        Var(self.nodes.len() - 1)
    }

    /// `x · wᵀ` for `x` of shape r×k and `w` of shape o×k.
    pub fn matmul_t(&mut self, x: Var, w: Var) -> Result<Var> {
        let (a, b) = (self.value(x), self.value(w));
        if a.cols() != b.cols() {
            return Err(shape_err("matmul", a, b));
        }
        let (r, k, o) = (a.rows(), a.cols(), b.rows());
        let mut out = Tensor::zeros(r, o);
        for i in 0..r {
            let xi = a.row(i);
            let orow = out.row_mut(i);
            for (j, oj) in orow.iter_mut().enumerate() {
                let wj = &b.data()[j * k..(j + 1) * k];
                *oj = xi.iter().zip(wj).map(|(p, q)| p * q).sum();
            }
        }
        Ok(self.push(out, Op::MatMulT(x, w)))
    }

    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (a, r) = (self.value(x), self.value(b));
        if r.rows() != 1 || r.cols() != a.cols() {
            return Err(shape_err("add_row", a, r));
        }
        let mut out = a.clone();
        for i in 0..out.rows() {
            out.row_mut(i).iter_mut().zip(r.data()).for_each(|(o, v)| *o += v);
        }
        Ok(self.push(out, Op::AddRow(x, b)))
    }

    /// `x · Wᵀ + b` with parameters `w` (out×in) and `b` (1×out).
    pub fn linear(&mut self, x: Var, w: ParamId, b: ParamId) -> Result<Var> {
        let wv = self.param(w);
        let y = self.matmul_t(x, wv)?;
        let bv = self.param(b);
        self.add_row(y, bv)
    }

    fn zip(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err(name, x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| f(*p, *q)).collect();
        let out = Tensor::from_vec(x.rows(), x.cols(), data)?;
        Ok(self.push(out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |p, q| p + q, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |p, q| p * q, Op::Mul(a, b))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| 1.0 - x);
        self.push(out, Op::OneMinus(a))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(math::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(math::sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    /// Fixed-slope PReLU.
    pub fn prelu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).map(|x| prelu(x, slope));
        self.push(out, Op::Prelu(a, slope))
    }

    /// PReLU whose slope is the single entry of a 1×1 variable.
    pub fn prelu_param(&mut self, a: Var, slope: Var) -> Result<Var> {
        let s = self.value(slope);
        if s.shape() != [1, 1] {
            return Err(shape_err("prelu slope", self.value(a), s));
        }
        let k = s.data()[0];
        let out = self.value(a).map(|x| prelu(x, k));
        Ok(self.push(out, Op::PreluParam(a, slope)))
    }

    /// Column-wise concatenation of tensors with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for p in parts {
            let t = self.value(*p);
            if t.rows() != rows {
                return Err(shape_err("concat", self.value(parts[0]), t));
            }
            cols += t.cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        for i in 0..rows {
            let mut off = 0;
            for p in parts {
                let t = self.value(*p);
                out.row_mut(i)[off..off + t.cols()].copy_from_slice(t.row(i));
                off += t.cols();
            }
        }
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    /// Repeats a single row `rows` times.
    pub fn broadcast(&mut self, a: Var, rows: usize) -> Result<Var> {
        let t = self.value(a);
        if t.rows() != 1 {
            return Err(Error::Shape { op: "broadcast", left: t.shape(), right: [rows, t.cols()] });
        }
        let mut out = Tensor::zeros(rows, t.cols());
        for i in 0..rows {
            out.row_mut(i).copy_from_slice(t.data());
        }
        Ok(self.push(out, Op::Broadcast(a)))
    }

    /// Columns `start..start + len`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if start + len > t.cols() {
            return Err(Error::Shape { op: "slice", left: t.shape(), right: [t.rows(), start + len] });
        }
        let mut out = Tensor::zeros(t.rows(), len);
        for i in 0..t.rows() {
            out.row_mut(i).copy_from_slice(&t.row(i)[start..start + len]);
        }
        Ok(self.push(out, Op::Slice(a, start)))
    }

    /// Row `i` of the output is the sum of the rows `neighbors[i]` of `a`.
    pub fn aggregate(&mut self, a: Var, neighbors: &[Vec<usize>]) -> Result<Var> {
        let t = self.value(a);
        if neighbors.len() != t.rows() || neighbors.iter().flatten().any(|&j| j >= t.rows()) {
            return Err(Error::Shape { op: "aggregate", left: t.shape(), right: [neighbors.len(), t.cols()] });
        }
        let mut out = Tensor::zeros(t.rows(), t.cols());
        for (i, ns) in neighbors.iter().enumerate() {
            for &j in ns {
                let src = t.row(j).to_vec();
                out.row_mut(i).iter_mut().zip(src).for_each(|(o, v)| *o += v);
            }
        }
        self.adjacency.push(neighbors.to_vec());
        let k = self.adjacency.len() - 1;
        Ok(self.push(out, Op::Aggregate(a, k)))
    }

    /// Softmax over every entry of `a`, stabilized by the maximum.
    pub fn softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let out = Tensor::from_vec(t.rows(), t.cols(), softmax(t.data())).expect("same length");
        self.push(out, Op::Softmax(a))
    }

    /// `Σ_r w[r] · x[r, :]` for `w` of shape r×1.
    pub fn weighted_sum(&mut self, w: Var, x: Var) -> Result<Var> {
        let (wt, xt) = (self.value(w), self.value(x));
        if wt.cols() != 1 || wt.rows() != xt.rows() {
            return Err(shape_err("weighted_sum", wt, xt));
        }
        let mut out = Tensor::zeros(1, xt.cols());
        for r in 0..xt.rows() {
            let k = wt.data()[r];
            out.data_mut().iter_mut().zip(xt.row(r)).for_each(|(o, v)| *o += k * v);
        }
        Ok(self.push(out, Op::WeightedSum(w, x)))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let mut out = Tensor::zeros(1, t.cols());
        let n = t.rows().max(1) as f64;
        for r in 0..t.rows() {
            out.data_mut().iter_mut().zip(t.row(r)).for_each(|(o, v)| *o += v);
        }
        out.data_mut().iter_mut().for_each(|o| *o /= n);
        self.push(out, Op::MeanRows(a))
    }

    /// Column vector whose row `i` is entry `index[i]` of `a` in row-major order.
    pub fn gather(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let t = self.value(a);
        if index.iter().any(|&k| k >= t.len()) {
            return Err(Error::Shape { op: "gather", left: t.shape(), right: [index.len(), 1] });
        }
        let out = Tensor::from_vec(index.len(), 1, index.iter().map(|&k| t.data()[k]).collect())?;
        Ok(self.push(out, Op::Gather(a, index.to_vec())))
    }

    /// Mean binary cross-entropy between probabilities `pred` and 0/1 targets.
    pub fn bce(&mut self, pred: Var, targets: &[f64]) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != targets.len() {
            return Err(Error::Shape { op: "bce", left: p.shape(), right: [1, targets.len()] });
        }
        let loss = bce(p.data(), targets)?;
        Ok(self.push(Tensor::row_vector(vec![loss]), Op::Bce(pred, targets.to_vec())))
    }

    pub fn sum(&mut self, parts: &[Var]) -> Result<Var> {
        let mut out = self.value(parts[0]).clone();
        for p in &parts[1..] {
            let t = self.value(*p);
            if t.shape() != out.shape() {
                return Err(shape_err("sum", &out, t));
            }
            out.add_assign(t);
        }
        Ok(self.push(out, Op::Sum(parts.to_vec())))
    }

    /// Reverse sweep from a 1×1 output. Parameters that the output does not
    /// depend on get `None`.
    pub fn backward(&self, out: Var) -> Result<Gradients> {
        let root = self.value(out);
        if root.shape() != [1, 1] {
            return Err(Error::Shape { op: "backward", left: root.shape(), right: [1, 1] });
        }
        if !root.is_finite() {
            return Err(Error::NonFinite("backward root"));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; out.0 + 1];
        grads[out.0] = Some(Tensor::filled(1, 1, 1.0));
        let mut pgrads: Vec<Option<Tensor>> = vec![None; self.params.len()];

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(t) => t.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let y = node.value.as_ref();
            match &node.op {
                Op::Input => {}
                Op::Param(id) => match &mut pgrads[id.0] {
                    Some(t) => t.add_assign(&g),
                    slot => *slot = Some(g),
                },
                Op::MatMulT(x, w) => {
                    let (xt, wt) = (self.value(*x), self.value(*w));
                    let (r, k, o) = (xt.rows(), xt.cols(), wt.rows());
                    let mut dx = Tensor::zeros(r, k);
                    let mut dw = Tensor::zeros(o, k);
                    for a in 0..r {
                        let grow = g.row(a);
                        let xrow = xt.row(a);
                        for (j, &gj) in grow.iter().enumerate() {
                            if gj == 0.0 {
                                continue;
                            }
                            let wrow = &wt.data()[j * k..(j + 1) * k];
                            dx.row_mut(a).iter_mut().zip(wrow).for_each(|(d, w)| *d += gj * w);
                            dw.row_mut(j).iter_mut().zip(xrow).for_each(|(d, x)| *d += gj * x);
                        }
                    }
                    acc(&mut grads, *x, dx);
                    acc(&mut grads, *w, dw);
                }
                Op::AddRow(x, b) => {
                    let mut db = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        db.data_mut().iter_mut().zip(g.row(r)).for_each(|(d, v)| *d += v);
                    }
                    acc(&mut grads, *b, db);
                    acc(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Mul(a, b) => {
                    let (at, bt) = (self.value(*a), self.value(*b));
                    let da = Tensor::from_vec(g.rows(), g.cols(), g.data().iter().zip(bt.data()).map(|(p, q)| p * q).collect())?;
                    let db = Tensor::from_vec(g.rows(), g.cols(), g.data().iter().zip(at.data()).map(|(p, q)| p * q).collect())?;
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::OneMinus(a) => acc(&mut grads, *a, g.map(|v| -v)),
                Op::Scale(a, s) => acc(&mut grads, *a, g.map(|v| v * s)),
                Op::Tanh(a) => {
                    let yv = y.expect("owned");
                    let d = g.data().iter().zip(yv.data()).map(|(gv, t)| gv * (1.0 - t * t)).collect();
                    acc(&mut grads, *a, Tensor::from_vec(g.rows(), g.cols(), d)?);
                }
                Op::Sigmoid(a) => {
                    let yv = y.expect("owned");
                    let d = g.data().iter().zip(yv.data()).map(|(gv, s)| gv * s * (1.0 - s)).collect();
                    acc(&mut grads, *a, Tensor::from_vec(g.rows(), g.cols(), d)?);
                }
                Op::Prelu(a, slope) => {
                    let x = self.value(*a);
                    let d = g.data().iter().zip(x.data()).map(|(gv, xv)| gv * prelu_grad(*xv, *slope)).collect();
                    acc(&mut grads, *a, Tensor::from_vec(g.rows(), g.cols(), d)?);
                }
                Op::PreluParam(a, s) => {
                    let x = self.value(*a);
                    let k = self.value(*s).data()[0];
                    let d = g.data().iter().zip(x.data()).map(|(gv, xv)| gv * prelu_grad(*xv, k)).collect();
                    let ds: f64 = g.data().iter().zip(x.data()).map(|(gv, xv)| gv * xv.min(0.0)).sum();
                    acc(&mut grads, *a, Tensor::from_vec(g.rows(), g.cols(), d)?);
                    acc(&mut grads, *s, Tensor::filled(1, 1, ds));
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let c = self.value(*p).cols();
                        let mut d = Tensor::zeros(g.rows(), c);
                        for r in 0..g.rows() {
                            d.row_mut(r).copy_from_slice(&g.row(r)[off..off + c]);
                        }
                        off += c;
                        acc(&mut grads, *p, d);
                    }
                }
                Op::Broadcast(a) => {
                    let mut d = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        d.data_mut().iter_mut().zip(g.row(r)).for_each(|(o, v)| *o += v);
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Slice(a, start) => {
                    let t = self.value(*a);
                    let mut d = Tensor::zeros(t.rows(), t.cols());
                    for r in 0..t.rows() {
                        d.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Aggregate(a, k) => {
                    let mut d = Tensor::zeros(g.rows(), g.cols());
                    for (i, ns) in self.adjacency[*k].iter().enumerate() {
                        for &j in ns {
                            let src = g.row(i).to_vec();
                            d.row_mut(j).iter_mut().zip(src).for_each(|(o, v)| *o += v);
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Softmax(a) => {
                    let yv = y.expect("owned");
                    let dot: f64 = g.data().iter().zip(yv.data()).map(|(p, q)| p * q).sum();
                    let d = g.data().iter().zip(yv.data()).map(|(gv, s)| s * (gv - dot)).collect();
                    acc(&mut grads, *a, Tensor::from_vec(g.rows(), g.cols(), d)?);
                }
                Op::WeightedSum(w, x) => {
                    let (wt, xt) = (self.value(*w), self.value(*x));
                    let mut dw = Tensor::zeros(wt.rows(), 1);
                    let mut dx = Tensor::zeros(xt.rows(), xt.cols());
                    for r in 0..xt.rows() {
                        dw.data_mut()[r] = g.data().iter().zip(xt.row(r)).map(|(p, q)| p * q).sum();
                        let k = wt.data()[r];
                        dx.row_mut(r).iter_mut().zip(g.data()).for_each(|(o, v)| *o = k * v);
                    }
                    acc(&mut grads, *w, dw);
                    acc(&mut grads, *x, dx);
                }
                Op::MeanRows(a) => {
                    let t = self.value(*a);
                    let n = t.rows().max(1) as f64;
                    let mut d = Tensor::zeros(t.rows(), t.cols());
                    for r in 0..t.rows() {
                        d.row_mut(r).iter_mut().zip(g.data()).for_each(|(o, v)| *o = v / n);
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Bce(p, targets) => {
                    let pt = self.value(*p);
                    let n = targets.len() as f64;
                    let up = g.data()[0];
                    let d = pt
                        .data()
                        .iter()
                        .zip(targets)
                        .map(|(&p, &t)| {
                            if !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&p) {
                                0.0
                            } else {
                                up * (-t / p + (1.0 - t) / (1.0 - p)) / n
                            }
                        })
                        .collect();
                    acc(&mut grads, *p, Tensor::from_vec(pt.rows(), pt.cols(), d)?);
                }
                Op::Sum(parts) => {
                    for p in parts {
                        acc(&mut grads, *p, g.clone());
                    }
                }
                Op::Gather(a, index) => {
                    let t = self.value(*a);
                    let mut d = Tensor::zeros(t.rows(), t.cols());
                    for (&k, v) in index.iter().zip(g.data()) {
                        d.data_mut()[k] += v;
                    }
                    acc(&mut grads, *a, d);
                }
            }
        }
        Ok(Gradients(pgrads))
    }
}

pub fn prelu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Derivative of PReLU; 1 at the origin.
pub fn prelu_grad(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

/// Max-shifted softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| math::exp(v - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean binary cross-entropy with predictions clamped to
/// `[BCE_CLAMP, 1 - BCE_CLAMP]`.
pub fn bce(pred: &[f64], targets: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (&p, &t) in pred.iter().zip(targets) {
        if t != 0.0 && t != 1.0 {
            return Err(Error::BadTarget(t));
        }
        if !p.is_finite() {
            return Err(Error::NonFinite("bce prediction"));
        }
        let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        total -= t * math::ln(p) + (1.0 - t) * math::ln(1.0 - p);
    }
    Ok(if pred.is_empty() { 0.0 } else { total / pred.len() as f64 })
}
