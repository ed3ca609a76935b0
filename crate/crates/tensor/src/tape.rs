use std::sync::Arc;

use crate::error::shape_err;
use crate::real::matmul_into;
use crate::{Real, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Reduction applied along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReduceKind {
    /// Elementwise maximum; the gradient goes to the first maximal index.
    Max,
    Sum,
    Mean,
    /// `sum_j softmax(x / T)_j * x_j`.
    Softmax { temperature: f64 },
}

const NO_ARG: u32 = u32::MAX;

enum Op<F> {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, F),
    Relu(Var),
    Reshape(Var),
    Concat(Vec<Var>),
    Pairwise(Var, Var),
    Reduce {
        x: Var,
        outer: usize,
        k: usize,
        inner: usize,
        kind: ReduceKind,
        mask: Option<Arc<[bool]>>,
        argmax: Vec<u32>,
    },
    TripletMax {
        node: Var,
        left: Var,
        right: Var,
        argmax: Vec<u32>,
    },
    CrossEntropy {
        logits: Var,
        probs: Vec<F>,
        targets: Vec<usize>,
        k: usize,
    },
    Mse {
        x: Var,
        target: Vec<F>,
        mask: Vec<bool>,
        count: usize,
    },
    Sum(Var),
}

struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    needs_grad: bool,
}

/// Records a computation for reverse-mode differentiation.
///
/// Values are immutable once recorded. A tape is owned by one thread;
/// independent tapes can run concurrently.
pub struct Tape<F: Real> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar loss with respect to the tape's trainable leaves.
pub struct Gradients<F> {
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Real> Gradients<F> {
    pub fn get(&self, v: Var) -> Option<&Tensor<F>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<F>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|i| self.nodes[i.0].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Records an input. Gradients are returned only for leaves with `requires_grad`.
    pub fn leaf(&mut self, value: Tensor<F>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, needs_grad: requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.leaf(value, false)
    }

    /// `x W` where `x` is `[..., i]` and `W` is `[i, o]`; the result is `[..., o]`.
    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        if wv.shape().len() != 2 || xv.shape().is_empty() || xv.last_dim() != wv.shape()[0] {
            return Err(shape_err("matmul", format!("{:?} x {:?}", xv.shape(), wv.shape())));
        }
        let (rows, k, n) = (xv.rows(), wv.shape()[0], wv.shape()[1]);
        let mut out = vec![F::zero(); rows * n];
        matmul_into(rows, k, n, xv.data(), false, wv.data(), false, &mut out, false);
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = n;
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::MatMul(x, w), &[x, w]))
    }

    /// Adds a `[o]` bias to every row of `[..., o]`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.shape().len() != 1 || xv.last_dim() != bv.len() || xv.shape().is_empty() {
            return Err(shape_err("add_bias", format!("{:?} + {:?}", xv.shape(), bv.shape())));
        }
        let o = bv.len();
        let mut data = xv.data().to_vec();
        for row in data.chunks_mut(o) {
            for (a, &b) in row.iter_mut().zip(bv.data()) {
                *a = *a + b;
            }
        }
        let value = Tensor::new(xv.shape().to_vec(), data)?;
        Ok(self.push(value, Op::AddBias(x, bias), &[x, bias]))
    }

    /// `x W + b`.
    pub fn affine(&mut self, x: Var, w: Var, bias: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_bias(y, bias)
    }

    fn zip(&mut self, a: Var, b: Var, op: &'static str, f: impl Fn(F, F) -> F) -> Result<Tensor<F>> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err(op, format!("{:?} vs {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(av.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip(a, b, "add", |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, x: Var, s: F) -> Var {
        let value = self.value(x).map(|v| v * s);
        self.push(value, Op::Scale(x, s), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| if v > F::zero() { v } else { F::zero() });
        self.push(value, Op::Relu(x), &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape)?;
        Ok(self.push(value, Op::Reshape(x), &[x]))
    }

    /// Concatenates along the last axis; all inputs must agree on the other axes.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| shape_err("concat", "no inputs"))?;
        let lead = self.value(*first).shape().split_last().map(|(_, l)| l.to_vec()).unwrap_or_default();
        let rows = self.value(*first).rows();
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let v = self.value(*p);
            if v.shape().is_empty() || v.shape()[..v.shape().len() - 1] != lead[..] {
                return Err(shape_err("concat", format!("{:?} vs leading {lead:?}", v.shape())));
            }
            widths.push(v.last_dim());
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(*p).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Concat(parts.to_vec()), parts))
    }

    /// `out[i, j, :] = recv[i, :] + send[j, :]` for `recv: [n, h]`, `send: [m, h]`.
    pub fn pairwise(&mut self, recv: Var, send: Var) -> Result<Var> {
        let (rv, sv) = (self.value(recv), self.value(send));
        if rv.shape().len() != 2 || sv.shape().len() != 2 || rv.shape()[1] != sv.shape()[1] {
            return Err(shape_err("pairwise", format!("{:?} / {:?}", rv.shape(), sv.shape())));
        }
        let (n, m, h) = (rv.shape()[0], sv.shape()[0], rv.shape()[1]);
        let mut data = Vec::with_capacity(n * m * h);
        for i in 0..n {
            let ri = &rv.data()[i * h..(i + 1) * h];
            for j in 0..m {
                let sj = &sv.data()[j * h..(j + 1) * h];
                data.extend(ri.iter().zip(sj).map(|(&a, &b)| a + b));
            }
        }
        let value = Tensor::new(vec![n, m, h], data)?;
        Ok(self.push(value, Op::Pairwise(recv, send), &[recv, send]))
    }

    /// Reduces `axis` of `x`. `mask`, if given, has one entry per
    /// `(outer, axis)` position (all axes before and including `axis`) and
    /// excludes `false` entries; a fully masked slot reduces to 0.
    pub fn reduce(
        &mut self,
        x: Var,
        axis: usize,
        kind: ReduceKind,
        mask: Option<Arc<[bool]>>,
    ) -> Result<Var> {
        let xv = self.value(x);
        let shape = xv.shape();
        if axis >= shape.len() {
            return Err(shape_err("reduce", format!("axis {axis} of {shape:?}")));
        }
        let k = shape[axis];
        if k == 0 {
            return Err(TensorError::EmptyAxis { op: "reduce" });
        }
        if let ReduceKind::Softmax { temperature } = kind {
            if !(temperature > 0.0) {
                return Err(TensorError::Temperature(temperature));
            }
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        if let Some(m) = &mask {
            if m.len() != outer * k {
                return Err(shape_err("reduce", format!("mask {} vs {}", m.len(), outer * k)));
            }
        }
        let data = xv.data();
        let live = |o: usize, j: usize| mask.as_ref().is_none_or(|m| m[o * k + j]);
        let mut out = vec![F::zero(); outer * inner];
        let mut argmax = Vec::new();
        match kind {
            ReduceKind::Max => {
                argmax = vec![NO_ARG; outer * inner];
                for o in 0..outer {
                    for j in (0..k).filter(|&j| live(o, j)) {
                        let row = &data[(o * k + j) * inner..(o * k + j + 1) * inner];
                        let dst = &mut out[o * inner..(o + 1) * inner];
                        let arg = &mut argmax[o * inner..(o + 1) * inner];
                        for i in 0..inner {
                            if arg[i] == NO_ARG || row[i] > dst[i] {
                                dst[i] = row[i];
                                arg[i] = j as u32;
                            }
                        }
                    }
                }
            }
            ReduceKind::Sum | ReduceKind::Mean => {
                for o in 0..outer {
                    let mut acc = vec![0.0f64; inner];
                    let mut count = 0usize;
                    for j in (0..k).filter(|&j| live(o, j)) {
                        count += 1;
                        let row = &data[(o * k + j) * inner..(o * k + j + 1) * inner];
                        for (a, v) in acc.iter_mut().zip(row) {
                            *a += v.as_f64();
                        }
                    }
                    let div = if kind == ReduceKind::Mean { count.max(1) as f64 } else { 1.0 };
                    for (dst, a) in out[o * inner..(o + 1) * inner].iter_mut().zip(&acc) {
                        *dst = F::from_f64(a / div);
                    }
                }
            }
            ReduceKind::Softmax { temperature } => {
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| data[(o * k + j) * inner + i].as_f64();
                        let Some(top) = (0..k).filter(|&j| live(o, j)).map(at).reduce(f64::max)
                        else {
                            continue;
                        };
                        let (mut num, mut den) = (0.0, 0.0);
                        for j in (0..k).filter(|&j| live(o, j)) {
                            let e = ((at(j) - top) / temperature).exp();
                            num += e * at(j);
                            den += e;
                        }
                        out[o * inner + i] = F::from_f64(num / den);
                    }
                }
            }
        }
        let mut out_shape = shape.to_vec();
        out_shape.remove(axis);
        let value = Tensor::new(out_shape, out)?;
        Ok(self.push(value, Op::Reduce { x, outer, k, inner, kind, mask, argmax }, &[x]))
    }

    /// Hard maximum along `axis`.
    pub fn reduce_max(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.reduce(x, axis, ReduceKind::Max, None)
    }

    /// Softmax-weighted sum along `axis` at the given temperature.
    pub fn softmax_weighted_sum(&mut self, x: Var, axis: usize, temperature: f64) -> Result<Var> {
        self.reduce(x, axis, ReduceKind::Softmax { temperature }, None)
    }

    /// `out[i, j, c] = max_k node[k, c] + left[i, k, c] + right[k, j, c]`
    /// for `node: [n, c]`, `left, right: [n, n, c]`.
    ///
    /// With a `[n, n]` `mask`, `k` only ranges over nodes where both
    /// `mask[i, k]` and `mask[k, j]` hold; an empty range gives 0.
    pub fn triplet_max(&mut self, node: Var, left: Var, right: Var, mask: Option<&[bool]>) -> Result<Var> {
        let (nv, lv, rv) = (self.value(node), self.value(left), self.value(right));
        let ok = nv.shape().len() == 2
            && lv.shape() == rv.shape()
            && lv.shape() == [nv.shape()[0], nv.shape()[0], nv.shape()[1]];
        if !ok {
            return Err(shape_err(
                "triplet_max",
                format!("{:?}, {:?}, {:?}", nv.shape(), lv.shape(), rv.shape()),
            ));
        }
        let (n, c) = (nv.shape()[0], nv.shape()[1]);
        if mask.is_some_and(|m| m.len() != n * n) {
            return Err(shape_err("triplet_max", format!("mask for {n} nodes")));
        }
        let live = |a: usize, b: usize| mask.is_none_or(|m| m[a * n + b]);
        let (t, l, r) = (nv.data(), lv.data(), rv.data());
        let mut out = vec![F::neg_infinity(); n * n * c];
        let mut argmax = vec![NO_ARG; n * n * c];
        let mut base = vec![F::zero(); c];
        for i in 0..n {
            for k in (0..n).filter(|&k| live(i, k)) {
                for ch in 0..c {
                    base[ch] = t[k * c + ch] + l[(i * n + k) * c + ch];
                }
                for j in (0..n).filter(|&j| live(k, j)) {
                    let o = (i * n + j) * c;
                    let rr = &r[(k * n + j) * c..(k * n + j + 1) * c];
                    for ch in 0..c {
                        let v = base[ch] + rr[ch];
                        if v > out[o + ch] {
                            out[o + ch] = v;
                            argmax[o + ch] = k as u32;
                        }
                    }
                }
            }
        }
        for (v, &a) in out.iter_mut().zip(&argmax) {
            if a == NO_ARG {
                *v = F::zero();
            }
        }
        let value = Tensor::new(vec![n, n, c], out)?;
        Ok(self.push(value, Op::TripletMax { node, left, right, argmax }, &[node, left, right]))
    }

    /// Mean over rows of `-log softmax(logits[r])[targets[r]]`, restricted to
    /// `mask`ed candidates. `logits` holds `targets.len()` rows of `k` entries.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        k: usize,
        targets: &[usize],
        mask: &[bool],
    ) -> Result<Var> {
        let lv = self.value(logits);
        let rows = targets.len();
        if lv.len() != rows * k || mask.len() != rows * k || rows == 0 {
            return Err(shape_err(
                "cross_entropy",
                format!("{} logits, {rows} rows of {k}, mask {}", lv.len(), mask.len()),
            ));
        }
        let mut probs = vec![F::zero(); rows * k];
        let mut loss = 0.0f64;
        for (r, &t) in targets.iter().enumerate() {
            if t >= k || !mask[r * k + t] {
                return Err(TensorError::Invalid(format!("target {t} of row {r} is masked out")));
            }
            let row = &lv.data()[r * k..(r + 1) * k];
            let live = |j: usize| mask[r * k + j];
            let top = (0..k).filter(|&j| live(j)).map(|j| row[j].as_f64()).fold(f64::MIN, f64::max);
            let den: f64 = (0..k).filter(|&j| live(j)).map(|j| (row[j].as_f64() - top).exp()).sum();
            for j in (0..k).filter(|&j| live(j)) {
                probs[r * k + j] = F::from_f64((row[j].as_f64() - top).exp() / den);
            }
            loss += -(row[t].as_f64() - top - den.ln());
        }
        let value = Tensor::scalar(F::from_f64(loss / rows as f64));
        let op = Op::CrossEntropy { logits, probs, targets: targets.to_vec(), k };
        Ok(self.push(value, op, &[logits]))
    }

    /// Mean squared error over the entries selected by `mask` (0 if none are).
    pub fn mse(&mut self, x: Var, target: &[F], mask: &[bool]) -> Result<Var> {
        let xv = self.value(x);
        if xv.len() != target.len() || mask.len() != target.len() {
            return Err(shape_err(
                "mse",
                format!("{} values, {} targets, {} mask", xv.len(), target.len(), mask.len()),
            ));
        }
        let count = mask.iter().filter(|&&m| m).count();
        let sum: f64 = xv
            .data()
            .iter()
            .zip(target)
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|((&p, &t), _)| (p - t).as_f64().powi(2))
            .sum();
        let value = Tensor::scalar(F::from_f64(if count > 0 { sum / count as f64 } else { 0.0 }));
        let op = Op::Mse { x, target: target.to_vec(), mask: mask.to_vec(), count };
        Ok(self.push(value, op, &[x]))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data().iter().map(|v| v.as_f64()).sum();
        self.push(Tensor::scalar(F::from_f64(s)), Op::Sum(x), &[x])
    }

    /// Reverse pass from a scalar `loss`. Consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients<F>> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let nodes = self.nodes;
        let mut grads: Vec<Option<Vec<F>>> = Vec::with_capacity(nodes.len());
        grads.resize_with(nodes.len(), || None);
        let mut leaf_grads: Vec<Option<Tensor<F>>> = Vec::with_capacity(nodes.len());
        leaf_grads.resize_with(nodes.len(), || None);
        grads[loss.0] = Some(vec![F::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let val = |v: Var| &nodes[v.0].value;
            let wants = |v: Var| nodes[v.0].needs_grad;
            let mut acc = |v: Var, f: &mut dyn FnMut(&mut [F])| {
                if !nodes[v.0].needs_grad {
                    return;
                }
                let buf = grads[v.0].get_or_insert_with(|| vec![F::zero(); nodes[v.0].value.len()]);
                f(buf);
            };
            match &node.op {
                Op::Leaf => {
                    let t = Tensor::new(node.value.shape().to_vec(), g).expect("leaf grad shape");
                    leaf_grads[idx] = Some(t);
                }
                Op::MatMul(x, w) => {
                    let (xv, wv) = (val(*x), val(*w));
                    let (rows, k, n) = (xv.rows(), wv.shape()[0], wv.shape()[1]);
                    acc(*x, &mut |dx| matmul_into(rows, n, k, &g, false, wv.data(), true, dx, true));
                    acc(*w, &mut |dw| matmul_into(k, rows, n, xv.data(), true, &g, false, dw, true));
                }
                Op::AddBias(x, b) => {
                    acc(*x, &mut |dx| add_into(dx, &g));
                    let o = val(*b).len();
                    acc(*b, &mut |db| {
                        for row in g.chunks(o) {
                            add_into(db, row);
                        }
                    });
                }
                Op::Add(a, b) => {
                    acc(*a, &mut |d| add_into(d, &g));
                    acc(*b, &mut |d| add_into(d, &g));
                }
                Op::Sub(a, b) => {
                    acc(*a, &mut |d| add_into(d, &g));
                    acc(*b, &mut |d| d.iter_mut().zip(&g).for_each(|(d, &g)| *d = *d - g));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (val(*a).data(), val(*b).data());
                    acc(*a, &mut |d| {
                        for i in 0..d.len() {
                            d[i] = d[i] + g[i] * bv[i];
                        }
                    });
                    acc(*b, &mut |d| {
                        for i in 0..d.len() {
                            d[i] = d[i] + g[i] * av[i];
                        }
                    });
                }
                Op::Scale(x, s) => {
                    acc(*x, &mut |d| d.iter_mut().zip(&g).for_each(|(d, &g)| *d = *d + g * *s));
                }
                Op::Relu(x) => {
                    let out = node.value.data();
                    acc(*x, &mut |d| {
                        for i in 0..d.len() {
                            if out[i] > F::zero() {
                                d[i] = d[i] + g[i];
                            }
                        }
                    });
                }
                Op::Reshape(x) => acc(*x, &mut |d| add_into(d, &g)),
                Op::Concat(parts) => {
                    let total = node.value.last_dim();
                    let rows = node.value.rows();
                    let mut offset = 0;
                    for p in parts {
                        let w = val(*p).last_dim();
                        acc(*p, &mut |d| {
                            for r in 0..rows {
                                add_into(&mut d[r * w..(r + 1) * w], &g[r * total + offset..r * total + offset + w]);
                            }
                        });
                        offset += w;
                    }
                }
                Op::Pairwise(recv, send) => {
                    let (n, m, h) = (node.value.shape()[0], node.value.shape()[1], node.value.shape()[2]);
                    acc(*recv, &mut |d| {
                        for i in 0..n {
                            for j in 0..m {
                                add_into(&mut d[i * h..(i + 1) * h], &g[(i * m + j) * h..(i * m + j + 1) * h]);
                            }
                        }
                    });
                    acc(*send, &mut |d| {
                        for i in 0..n {
                            for j in 0..m {
                                add_into(&mut d[j * h..(j + 1) * h], &g[(i * m + j) * h..(i * m + j + 1) * h]);
                            }
                        }
                    });
                }
                Op::Reduce { x, outer, k, inner, kind, mask, argmax } => {
                    let (outer, k, inner) = (*outer, *k, *inner);
                    let live = |o: usize, j: usize| mask.as_ref().is_none_or(|m| m[o * k + j]);
                    let xd = val(*x).data();
                    let out = node.value.data();
                    acc(*x, &mut |d| match kind {
                        ReduceKind::Max => {
                            for o in 0..outer {
                                for i in 0..inner {
                                    let j = argmax[o * inner + i];
                                    if j != NO_ARG {
                                        let at = (o * k + j as usize) * inner + i;
                                        d[at] = d[at] + g[o * inner + i];
                                    }
                                }
                            }
                        }
                        ReduceKind::Sum | ReduceKind::Mean => {
                            for o in 0..outer {
                                let count = (0..k).filter(|&j| live(o, j)).count().max(1);
                                let div = if *kind == ReduceKind::Mean { count as f64 } else { 1.0 };
                                let scale = F::from_f64(1.0 / div);
                                for j in (0..k).filter(|&j| live(o, j)) {
                                    for i in 0..inner {
                                        let at = (o * k + j) * inner + i;
                                        d[at] = d[at] + g[o * inner + i] * scale;
                                    }
                                }
                            }
                        }
                        ReduceKind::Softmax { temperature } => {
                            for o in 0..outer {
                                for i in 0..inner {
                                    let at = |j: usize| xd[(o * k + j) * inner + i].as_f64();
                                    let Some(top) = (0..k).filter(|&j| live(o, j)).map(at).reduce(f64::max)
                                    else {
                                        continue;
                                    };
                                    let den: f64 = (0..k)
                                        .filter(|&j| live(o, j))
                                        .map(|j| ((at(j) - top) / temperature).exp())
                                        .sum();
                                    let y = out[o * inner + i].as_f64();
                                    let go = g[o * inner + i].as_f64();
                                    for j in (0..k).filter(|&j| live(o, j)) {
                                        let s = ((at(j) - top) / temperature).exp() / den;
                                        let idx = (o * k + j) * inner + i;
                                        d[idx] = d[idx] + F::from_f64(go * s * (1.0 + (at(j) - y) / temperature));
                                    }
                                }
                            }
                        }
                    });
                }
                Op::TripletMax { node: t, left, right, argmax } => {
                    let (n, c) = (val(*t).shape()[0], val(*t).shape()[1]);
                    for (target, which) in [(*t, 0), (*left, 1), (*right, 2)] {
                        if !wants(target) {
                            continue;
                        }
                        acc(target, &mut |d| {
                            for i in 0..n {
                                for j in 0..n {
                                    for ch in 0..c {
                                        let o = (i * n + j) * c + ch;
                                        if argmax[o] == NO_ARG {
                                            continue;
                                        }
                                        let k = argmax[o] as usize;
                                        let at = match which {
                                            0 => k * c + ch,
                                            1 => (i * n + k) * c + ch,
                                            _ => (k * n + j) * c + ch,
                                        };
                                        d[at] = d[at] + g[o];
                                    }
                                }
                            }
                        });
                    }
                }
                Op::CrossEntropy { logits, probs, targets, k } => {
                    let scale = g[0] / F::from_f64(targets.len() as f64);
                    acc(*logits, &mut |d| {
                        for (r, &t) in targets.iter().enumerate() {
                            for j in 0..*k {
                                let mut p = probs[r * k + j];
                                if j == t {
                                    p = p - F::one();
                                }
                                d[r * k + j] = d[r * k + j] + p * scale;
                            }
                        }
                    });
                }
                Op::Mse { x, target, mask, count } => {
                    if *count > 0 {
                        let xd = val(*x).data();
                        let scale = g[0] * F::from_f64(2.0 / *count as f64);
                        acc(*x, &mut |d| {
                            for i in 0..d.len() {
                                if mask[i] {
                                    d[i] = d[i] + (xd[i] - target[i]) * scale;
                                }
                            }
                        });
                    }
                }
                Op::Sum(x) => acc(*x, &mut |d| d.iter_mut().for_each(|d| *d = *d + g[0])),
            }
        }
        Ok(Gradients { grads: leaf_grads })
    }
}

fn add_into<F: Real>(dst: &mut [F], src: &[F]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}
