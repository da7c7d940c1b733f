use std::collections::{HashMap, HashSet};

use super::ops::{expand, gemm, reduce_to, split_axis, NORM_EPS};
use super::{Op, Result, Tensor, TensorError};

fn parents(op: &Op) -> Vec<&Tensor> {
    match op {
        Op::Leaf => vec![],
        Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Minimum(a, b) => vec![a, b],
        Op::Affine(a, _)
        | Op::Relu(a)
        | Op::Tanh(a)
        | Op::Sigmoid(a)
        | Op::Log(a)
        | Op::Softmax(a)
        | Op::Sum(a, _)
        | Op::Mean(a, _)
        | Op::SumAll(a)
        | Op::L2Normalize(a)
        | Op::Norm(a)
        | Op::Reshape(a)
        | Op::Clamp { x: a, .. }
        | Op::SliceLast { x: a, .. } => vec![a],
        Op::WeightedMean { x, w, .. } => vec![x, w],
        Op::BatchedMatVec { m, x, .. } => vec![m, x],
        Op::Concat(parts) => parts.iter().collect(),
    }
}

struct Accumulator {
    grads: HashMap<u64, Vec<f64>>,
}

impl Accumulator {
    fn add(&mut self, t: &Tensor, g: Vec<f64>) {
        if !t.requires_grad() {
            return;
        }
        match self.grads.get_mut(&t.id()) {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
            None => {
                self.grads.insert(t.id(), g);
            }
        }
    }
}

impl Tensor {
    /// Back-propagates from this scalar into every reachable parameter leaf,
    /// adding to any gradient already stored there.
    pub fn backward(&self) -> Result<()> {
        if self.len() != 1 {
            return Err(TensorError::NonScalarLoss(self.shape().to_vec()));
        }
        if !self.requires_grad() {
            return Err(TensorError::NotOnTape);
        }

        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        let mut nodes = Vec::new();
        seen.insert(self.id());
        while let Some(t) = stack.pop() {
            for p in parents(&t.0.op) {
                if p.requires_grad() && seen.insert(p.id()) {
                    stack.push(p.clone());
                }
            }
            nodes.push(t);
        }
        // Ids increase with creation, so descending id is a reverse topological order.
        nodes.sort_unstable_by(|a, b| b.id().cmp(&a.id()));

        let mut acc = Accumulator { grads: HashMap::new() };
        acc.grads.insert(self.id(), vec![1.0]);
        for node in &nodes {
            let Some(g) = acc.grads.remove(&node.id()) else {
                continue;
            };
            if node.is_leaf() {
                let mut slot = node.0.grad.borrow_mut();
                match slot.as_mut() {
                    Some(existing) => existing.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    None => *slot = Some(g),
                }
                continue;
            }
            node.propagate(&g, &mut acc);
        }
        Ok(())
    }

    fn propagate(&self, g: &[f64], acc: &mut Accumulator) {
        let out = self.values();
        let shape = self.shape();
        match &self.0.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (k, n) = (b.shape()[0], b.shape()[1]);
                let m = a.len() / k.max(1);
                if a.requires_grad() {
                    // dA = dC · Bᵀ
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, g, n as isize, 1, b.values(), 1, n as isize, &mut ga, false);
                    acc.add(a, ga);
                }
                if b.requires_grad() {
                    // dB = Aᵀ · dC
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, a.values(), 1, k as isize, g, n as isize, 1, &mut gb, false);
                    acc.add(b, gb);
                }
            }
            Op::Add(a, b) => {
                acc.add(a, reduce_to(g, shape, a.shape()));
                acc.add(b, reduce_to(g, shape, b.shape()));
            }
            Op::Sub(a, b) => {
                acc.add(a, reduce_to(g, shape, a.shape()));
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                acc.add(b, reduce_to(&neg, shape, b.shape()));
            }
            Op::Mul(a, b) => {
                if a.requires_grad() {
                    let bv = expand(b.values(), b.shape(), shape);
                    let ga: Vec<f64> = g.iter().zip(bv.iter()).map(|(x, y)| x * y).collect();
                    acc.add(a, reduce_to(&ga, shape, a.shape()));
                }
                if b.requires_grad() {
                    let av = expand(a.values(), a.shape(), shape);
                    let gb: Vec<f64> = g.iter().zip(av.iter()).map(|(x, y)| x * y).collect();
                    acc.add(b, reduce_to(&gb, shape, b.shape()));
                }
            }
            Op::Affine(a, scale) => acc.add(a, g.iter().map(|v| v * scale).collect()),
            Op::Relu(a) => {
                let ga = g
                    .iter()
                    .zip(a.values())
                    .map(|(&gi, &x)| if x > 0.0 { gi } else { 0.0 })
                    .collect();
                acc.add(a, ga);
            }
            Op::Tanh(a) => acc.add(a, g.iter().zip(out).map(|(gi, y)| gi * (1.0 - y * y)).collect()),
            Op::Sigmoid(a) => acc.add(a, g.iter().zip(out).map(|(gi, y)| gi * y * (1.0 - y)).collect()),
            Op::Log(a) => acc.add(a, g.iter().zip(a.values()).map(|(gi, x)| gi / x).collect()),
            Op::Softmax(a) => {
                let n = *shape.last().unwrap();
                let mut ga = vec![0.0; g.len()];
                for ((grow, yrow), dst) in g.chunks(n).zip(out.chunks(n)).zip(ga.chunks_mut(n)) {
                    let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    for ((d, gi), yi) in dst.iter_mut().zip(grow).zip(yrow) {
                        *d = yi * (gi - dot);
                    }
                }
                acc.add(a, ga);
            }
            Op::Sum(a, axis) | Op::Mean(a, axis) => {
                let (outer, n, inner) = split_axis(a.shape(), *axis);
                let factor = if matches!(self.0.op, Op::Mean(..)) {
                    1.0 / n as f64
                } else {
                    1.0
                };
                let mut ga = vec![0.0; a.len()];
                for o in 0..outer {
                    let src = &g[o * inner..(o + 1) * inner];
                    for j in 0..n {
                        let dst = &mut ga[(o * n + j) * inner..(o * n + j + 1) * inner];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d = s * factor;
                        }
                    }
                }
                acc.add(a, ga);
            }
            Op::SumAll(a) => acc.add(a, vec![g[0]; a.len()]),
            Op::WeightedMean { x, w, axis } => {
                let (outer, n, inner) = split_axis(x.shape(), *axis);
                let (xv, wv) = (x.values(), w.values());
                let mut gx = vec![0.0; x.len()];
                let mut gw = vec![0.0; w.len()];
                for o in 0..outer {
                    let total: f64 = wv[o * n..(o + 1) * n].iter().sum();
                    let go = &g[o * inner..(o + 1) * inner];
                    let yo = &out[o * inner..(o + 1) * inner];
                    for j in 0..n {
                        let wj = wv[o * n + j];
                        let off = (o * n + j) * inner;
                        let mut dw = 0.0;
                        for i in 0..inner {
                            gx[off + i] = go[i] * wj / total;
                            dw += go[i] * (xv[off + i] - yo[i]);
                        }
                        gw[o * n + j] = dw / total;
                    }
                }
                acc.add(x, gx);
                acc.add(w, gw);
            }
            Op::Concat(parts) => {
                let total = *shape.last().unwrap();
                let rows = g.len() / total.max(1);
                let mut offset = 0;
                for p in parts {
                    let w = *p.shape().last().unwrap();
                    if p.requires_grad() {
                        let mut gp = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            gp.extend_from_slice(&g[r * total + offset..r * total + offset + w]);
                        }
                        acc.add(p, gp);
                    }
                    offset += w;
                }
            }
            Op::L2Normalize(a) => {
                let n = *shape.last().unwrap();
                let mut ga = vec![0.0; a.len()];
                for ((xrow, grow), dst) in a.values().chunks(n).zip(g.chunks(n)).zip(ga.chunks_mut(n)) {
                    let norm = xrow.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let d = norm.max(NORM_EPS);
                    // Below the floor the op is a plain scaling by 1/ε.
                    let gx: f64 = grow.iter().zip(xrow).map(|(a, b)| a * b).sum();
                    let coef = if norm > NORM_EPS { gx / (norm * norm * norm) } else { 0.0 };
                    for ((di, gi), xi) in dst.iter_mut().zip(grow).zip(xrow) {
                        *di = gi / d - xi * coef;
                    }
                }
                acc.add(a, ga);
            }
            Op::Norm(a) => {
                let n = *a.shape().last().unwrap();
                let mut ga = vec![0.0; a.len()];
                for (r, (xrow, dst)) in a.values().chunks(n).zip(ga.chunks_mut(n)).enumerate() {
                    if out[r] > 0.0 {
                        for (d, x) in dst.iter_mut().zip(xrow) {
                            *d = g[r] * x / out[r];
                        }
                    }
                }
                acc.add(a, ga);
            }
            Op::Minimum(a, b) => {
                let mut ga = vec![0.0; g.len()];
                let mut gb = vec![0.0; g.len()];
                for (i, (&x, &y)) in a.values().iter().zip(b.values()).enumerate() {
                    if x <= y {
                        ga[i] = g[i];
                    } else {
                        gb[i] = g[i];
                    }
                }
                acc.add(a, ga);
                acc.add(b, gb);
            }
            Op::Clamp { x, lo, hi } => {
                let gx = g
                    .iter()
                    .zip(x.values())
                    .map(|(&gi, &v)| if v > *lo && v < *hi { gi } else { 0.0 })
                    .collect();
                acc.add(x, gx);
            }
            Op::BatchedMatVec { m, x, transpose } => {
                let (batch, k) = (x.shape()[0], x.shape()[1]);
                let mut gm = vec![0.0; m.len()];
                let mut gx = vec![0.0; x.len()];
                for b in 0..batch {
                    let mat = &m.values()[b * 9..b * 9 + 9];
                    let gmat = &mut gm[b * 9..b * 9 + 9];
                    for p in 0..k {
                        let base = (b * k + p) * 3;
                        let v = &x.values()[base..base + 3];
                        let gy = &g[base..base + 3];
                        for i in 0..3 {
                            for j in 0..3 {
                                if *transpose {
                                    // y_i = Σ_j M[j][i] v_j
                                    gmat[3 * j + i] += gy[i] * v[j];
                                    gx[base + j] += mat[3 * j + i] * gy[i];
                                } else {
                                    gmat[3 * i + j] += gy[i] * v[j];
                                    gx[base + j] += mat[3 * i + j] * gy[i];
                                }
                            }
                        }
                    }
                }
                acc.add(m, gm);
                acc.add(x, gx);
            }
            Op::Reshape(a) => acc.add(a, g.to_vec()),
            Op::SliceLast { x, start } => {
                let n = *x.shape().last().unwrap();
                let len = *shape.last().unwrap();
                let mut gx = vec![0.0; x.len()];
                for (dst, src) in gx.chunks_mut(n).zip(g.chunks(len.max(1))) {
                    dst[*start..*start + len].copy_from_slice(src);
                }
                acc.add(x, gx);
            }
        }
    }
}
