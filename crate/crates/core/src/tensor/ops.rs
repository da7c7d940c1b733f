use std::borrow::Cow;

use super::{numel, Op, Result, Tensor, TensorError};

/// Guard added to vector norms before dividing.
pub const NORM_EPS: f64 = 1e-12;

/// NumPy-style broadcast of two shapes (right-aligned, size-1 axes stretch).
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// For every flat index of `out`, the flat index of the broadcast source.
pub(crate) fn broadcast_index(input: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let mut strides = vec![0usize; rank];
    let mut acc = 1;
    for i in (0..rank).rev() {
        let offset = rank - input.len();
        if i >= offset {
            let d = input[i - offset];
            strides[i] = if d == 1 { 0 } else { acc };
            acc *= d;
        }
    }
    let total = numel(out);
    let mut map = Vec::with_capacity(total);
    let mut counter = vec![0usize; rank];
    let mut src = 0usize;
    for _ in 0..total {
        map.push(src);
        for axis in (0..rank).rev() {
            counter[axis] += 1;
            src += strides[axis];
            if counter[axis] < out[axis] {
                break;
            }
            src -= strides[axis] * counter[axis];
            counter[axis] = 0;
        }
    }
    map
}

pub(crate) fn expand<'a>(values: &'a [f64], input: &[usize], out: &[usize]) -> Cow<'a, [f64]> {
    if input == out {
        Cow::Borrowed(values)
    } else {
        Cow::Owned(broadcast_index(input, out).into_iter().map(|i| values[i]).collect())
    }
}

/// Sums a gradient of shape `out` down to the broadcast source shape `input`.
pub(crate) fn reduce_to(grad: &[f64], out: &[usize], input: &[usize]) -> Vec<f64> {
    if input == out {
        return grad.to_vec();
    }
    let mut acc = vec![0.0; numel(input)];
    for (g, i) in grad.iter().zip(broadcast_index(input, out)) {
        acc[i] += g;
    }
    acc
}

/// Splits `shape` around `axis` into (outer, axis length, inner).
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (numel(&shape[..axis]), shape[axis], numel(&shape[axis + 1..]))
}

/// Row-major `c = a (m×k) · b (k×n)` with arbitrary strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: callers pass slices whose extents cover every strided access for
    // the given dimensions; `c` is exactly m×n row-major.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn bad_axis(op: &'static str, t: &Tensor, axis: usize) -> TensorError {
    TensorError::InvalidArgument {
        op,
        msg: format!("axis {axis} out of range for shape {:?}", t.shape()),
    }
}

impl Tensor {
    fn unary(&self, op: Op, f: impl Fn(f64) -> f64) -> Tensor {
        let values = self.values().iter().map(|&v| f(v)).collect();
        Tensor::from_op(values, self.shape().to_vec(), op, &[self])
    }

    fn binary(&self, other: &Tensor, name: &'static str, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let shape = broadcast_shape(self.shape(), other.shape()).ok_or_else(|| mismatch(name, self, other))?;
        let a = expand(self.values(), self.shape(), &shape);
        let b = expand(other.values(), other.shape(), &shape);
        let values = a.iter().zip(b.iter()).map(|(&x, &y)| f(x, y)).collect();
        Ok(Tensor::from_op(values, shape, op, &[self, other]))
    }

    /// `self [.., k] · other [k, m] -> [.., m]`; leading axes are flattened into rows.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (a, b) = (self.shape(), other.shape());
        if a.is_empty() || b.len() != 2 || a[a.len() - 1] != b[0] {
            return Err(mismatch("matmul", self, other));
        }
        let (k, n) = (b[0], b[1]);
        let m = self.len() / k.max(1);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.values(), k as isize, 1, other.values(), n as isize, 1, &mut out, false);
        let mut shape = a[..a.len() - 1].to_vec();
        shape.push(n);
        Ok(Tensor::from_op(out, shape, Op::MatMul(self.clone(), other.clone()), &[self, other]))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "add", Op::Add(self.clone(), other.clone()), |x, y| x + y)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "sub", Op::Sub(self.clone(), other.clone()), |x, y| x - y)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "mul", Op::Mul(self.clone(), other.clone()), |x, y| x * y)
    }

    /// `scale * self + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> Tensor {
        self.unary(Op::Affine(self.clone(), scale), |v| scale * v + shift)
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.affine(factor, 0.0)
    }

    pub fn relu(&self) -> Tensor {
        self.unary(Op::Relu(self.clone()), |v| if v > 0.0 { v } else { 0.0 })
    }

    pub fn tanh(&self) -> Tensor {
        self.unary(Op::Tanh(self.clone()), f64::tanh)
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary(Op::Sigmoid(self.clone()), sigmoid)
    }

    pub fn log(&self) -> Tensor {
        self.unary(Op::Log(self.clone()), f64::ln)
    }

    /// Softmax over the last axis.
    pub fn softmax(&self) -> Result<Tensor> {
        let n = *self.shape().last().ok_or_else(|| bad_axis("softmax", self, 0))?;
        let mut out = self.values().to_vec();
        if n > 0 {
            for row in out.chunks_mut(n) {
                softmax_in_place(row);
            }
        }
        Ok(Tensor::from_op(out, self.shape().to_vec(), Op::Softmax(self.clone()), &[self]))
    }

    fn reduce_axis(&self, axis: usize, name: &'static str, mean: bool) -> Result<Tensor> {
        if axis >= self.shape().len() {
            return Err(bad_axis(name, self, axis));
        }
        let (outer, n, inner) = split_axis(self.shape(), axis);
        let mut out = vec![0.0; outer * inner];
        let v = self.values();
        for o in 0..outer {
            let dst = &mut out[o * inner..(o + 1) * inner];
            for j in 0..n {
                let src = &v[(o * n + j) * inner..(o * n + j + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        if mean {
            let inv = 1.0 / n as f64;
            out.iter_mut().for_each(|x| *x *= inv);
        }
        let mut shape = self.shape().to_vec();
        shape.remove(axis);
        let op = if mean {
            Op::Mean(self.clone(), axis)
        } else {
            Op::Sum(self.clone(), axis)
        };
        Ok(Tensor::from_op(out, shape, op, &[self]))
    }

    /// Sum over `axis`, which is removed from the shape.
    pub fn sum(&self, axis: usize) -> Result<Tensor> {
        self.reduce_axis(axis, "sum", false)
    }

    /// Mean over `axis`, which is removed from the shape.
    pub fn mean(&self, axis: usize) -> Result<Tensor> {
        self.reduce_axis(axis, "mean", true)
    }

    /// Sum of every element, as a rank-0 tensor.
    pub fn sum_all(&self) -> Tensor {
        let total = self.values().iter().sum();
        Tensor::from_op(vec![total], vec![], Op::SumAll(self.clone()), &[self])
    }

    pub fn mean_all(&self) -> Tensor {
        let n = self.len().max(1) as f64;
        self.sum_all().scale(1.0 / n)
    }

    /// `Σ_j w_j x_j / Σ_j w_j` over `axis`. `weights` has the shape of `self`
    /// truncated after `axis`.
    pub fn weighted_mean(&self, weights: &Tensor, axis: usize) -> Result<Tensor> {
        if axis >= self.shape().len() {
            return Err(bad_axis("weighted_mean", self, axis));
        }
        if weights.shape() != &self.shape()[..=axis] {
            return Err(mismatch("weighted_mean", self, weights));
        }
        let (outer, n, inner) = split_axis(self.shape(), axis);
        let (x, w) = (self.values(), weights.values());
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            let wrow = &w[o * n..(o + 1) * n];
            let total: f64 = wrow.iter().sum();
            let dst = &mut out[o * inner..(o + 1) * inner];
            for (j, &wj) in wrow.iter().enumerate() {
                let src = &x[(o * n + j) * inner..(o * n + j + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += wj * s;
                }
            }
            dst.iter_mut().for_each(|d| *d /= total);
        }
        let mut shape = self.shape().to_vec();
        shape.remove(axis);
        let op = Op::WeightedMean {
            x: self.clone(),
            w: weights.clone(),
            axis,
        };
        Ok(Tensor::from_op(out, shape, op, &[self, weights]))
    }

    /// Concatenation along the last axis; leading axes must agree.
    pub fn concat(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or(TensorError::InvalidArgument {
            op: "concat",
            msg: "no inputs".into(),
        })?;
        let lead = &first.shape()[..first.shape().len().saturating_sub(1)];
        if first.shape().is_empty() {
            return Err(bad_axis("concat", first, 0));
        }
        for p in parts {
            if p.shape().is_empty() || &p.shape()[..p.shape().len() - 1] != lead {
                return Err(mismatch("concat", first, p));
            }
        }
        let widths: Vec<usize> = parts.iter().map(|p| *p.shape().last().unwrap()).collect();
        let total: usize = widths.iter().sum();
        let rows = numel(lead);
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&p.values()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        let refs: Vec<&Tensor> = parts.iter().collect();
        Ok(Tensor::from_op(out, shape, Op::Concat(parts.to_vec()), &refs))
    }

    /// `x / max(‖x‖, 1e-12)` along the last axis.
    pub fn l2_normalize(&self) -> Result<Tensor> {
        let n = *self.shape().last().ok_or_else(|| bad_axis("l2_normalize", self, 0))?;
        let mut out = self.values().to_vec();
        for row in out.chunks_mut(n.max(1)) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            let d = norm.max(NORM_EPS);
            row.iter_mut().for_each(|v| *v /= d);
        }
        Ok(Tensor::from_op(out, self.shape().to_vec(), Op::L2Normalize(self.clone()), &[self]))
    }

    /// Euclidean norm along the last axis, which is removed.
    pub fn norm(&self) -> Result<Tensor> {
        let n = *self.shape().last().ok_or_else(|| bad_axis("norm", self, 0))?;
        let out = self
            .values()
            .chunks(n.max(1))
            .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let shape = self.shape()[..self.shape().len() - 1].to_vec();
        Ok(Tensor::from_op(out, shape, Op::Norm(self.clone()), &[self]))
    }

    /// Elementwise minimum; ties select (and route gradient to) `self`.
    pub fn minimum(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(mismatch("minimum", self, other));
        }
        let out = self
            .values()
            .iter()
            .zip(other.values())
            .map(|(&a, &b)| if a <= b { a } else { b })
            .collect();
        let op = Op::Minimum(self.clone(), other.clone());
        Ok(Tensor::from_op(out, self.shape().to_vec(), op, &[self, other]))
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        self.unary(Op::Clamp { x: self.clone(), lo, hi }, |v| v.clamp(lo, hi))
    }

    /// For `m: [B,3,3]` and `x: [B,K,3]`, computes `m_b · x_bk` (or `m_bᵀ · x_bk`).
    pub fn batched_matvec3(m: &Tensor, x: &Tensor, transpose: bool) -> Result<Tensor> {
        let (ms, xs) = (m.shape(), x.shape());
        if ms.len() != 3 || ms[1] != 3 || ms[2] != 3 || xs.len() != 3 || xs[2] != 3 || xs[0] != ms[0] {
            return Err(mismatch("batched_matvec3", m, x));
        }
        let (batch, k) = (xs[0], xs[1]);
        let mut out = vec![0.0; batch * k * 3];
        for b in 0..batch {
            let mat = &m.values()[b * 9..b * 9 + 9];
            for p in 0..k {
                let base = (b * k + p) * 3;
                let v = &x.values()[base..base + 3];
                for i in 0..3 {
                    out[base + i] = if transpose {
                        mat[i] * v[0] + mat[3 + i] * v[1] + mat[6 + i] * v[2]
                    } else {
                        mat[3 * i] * v[0] + mat[3 * i + 1] * v[1] + mat[3 * i + 2] * v[2]
                    };
                }
            }
        }
        let op = Op::BatchedMatVec {
            m: m.clone(),
            x: x.clone(),
            transpose,
        };
        Ok(Tensor::from_op(out, xs.to_vec(), op, &[m, x]))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.len() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        Ok(Tensor::from_op(
            self.values().to_vec(),
            shape.to_vec(),
            Op::Reshape(self.clone()),
            &[self],
        ))
    }

    /// Columns `start..start + len` of the last axis.
    pub fn slice_last(&self, start: usize, len: usize) -> Result<Tensor> {
        let n = *self.shape().last().ok_or_else(|| bad_axis("slice_last", self, 0))?;
        if start + len > n {
            return Err(TensorError::InvalidArgument {
                op: "slice_last",
                msg: format!("range {start}..{} exceeds last axis {n}", start + len),
            });
        }
        let out = self
            .values()
            .chunks(n)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let mut shape = self.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        Ok(Tensor::from_op(out, shape, Op::SliceLast { x: self.clone(), start }, &[self]))
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}
