//! Training objectives. All losses return rank-0 tensors.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

/// Sign-agnostic distance `min(‖n − n̂‖, ‖n + n̂‖)` per sample: `[B,3] → [B]`.
pub fn loss_normal_per_sample(pred: &Tensor, gt: &Tensor) -> Result<Tensor> {
    if pred.shape() != gt.shape() || pred.shape().len() != 2 || pred.shape()[1] != 3 {
        return Err(Error::invalid(format!(
            "normal loss needs matching [B,3] inputs, got {:?} and {:?}",
            pred.shape(),
            gt.shape()
        )));
    }
    let minus = gt.sub(pred)?.norm()?;
    let plus = gt.add(pred)?.norm()?;
    Ok(minus.minimum(&plus)?)
}

/// Batch mean of [`loss_normal_per_sample`].
pub fn loss_normal(pred: &Tensor, gt: &Tensor) -> Result<Tensor> {
    Ok(loss_normal_per_sample(pred, gt)?.mean(0)?)
}

/// Binary cross-entropy `−mean(y log p + (1 − y) log(1 − p))` over every
/// point of every patch.
pub fn loss_plane(probs: &Tensor, labels: &Tensor) -> Result<Tensor> {
    if probs.shape() != labels.shape() {
        return Err(Error::invalid(format!(
            "plane loss shapes differ: {:?} vs {:?}",
            probs.shape(),
            labels.shape()
        )));
    }
    let p = probs.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let pos = labels.mul(&p.log())?;
    let neg = labels.affine(-1.0, 1.0).mul(&p.affine(-1.0, 1.0).log())?;
    Ok(pos.add(&neg)?.mean_all().scale(-1.0))
}

/// The single-scale objective: normal term plus plane term, unweighted.
/// The plane term is the classification loss from [`loss_plane`].
pub fn loss_total(normal: &Tensor, plane: &Tensor) -> Result<Tensor> {
    Ok(normal.add(plane)?)
}

/// Multi-scale objective.
///
/// `per_scale_normal[s]` holds the `[B]` per-sample normal losses of scale
/// `s`, `scale_weights` is the `[B,S]` softmax output of the scale network and
/// `per_scale_main[s]` the scalar plane-classification loss of scale `s`. The
/// result is `mean_b Σ_s v_bs L_normal(b,s) + (1/S) Σ_s L_main(s)`.
pub fn loss_multi(per_scale_normal: &[Tensor], scale_weights: &Tensor, per_scale_main: &[Tensor]) -> Result<Tensor> {
    Ok(loss_multi_terms(per_scale_normal, scale_weights, per_scale_main)?.total)
}

/// The two summands of [`loss_multi`] alongside their sum.
pub struct MultiLoss {
    /// `mean_b Σ_s v_bs L_normal(b,s)`.
    pub normal: Tensor,
    /// `(1/S) Σ_s L_main(s)`.
    pub plane: Tensor,
    pub total: Tensor,
}

pub fn loss_multi_terms(per_scale_normal: &[Tensor], scale_weights: &Tensor, per_scale_main: &[Tensor]) -> Result<MultiLoss> {
    let s = per_scale_normal.len();
    if s == 0 || per_scale_main.len() != s {
        return Err(Error::invalid(format!(
            "multi-scale loss needs one normal and one main term per scale, got {s} and {}",
            per_scale_main.len()
        )));
    }
    let batch = per_scale_normal[0].len();
    if scale_weights.shape() != [batch, s] {
        return Err(Error::invalid(format!(
            "scale weights must be [{batch},{s}], got {:?}",
            scale_weights.shape()
        )));
    }
    let columns = per_scale_normal
        .iter()
        .map(|l| l.reshape(&[batch, 1]))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let normal = Tensor::concat(&columns)?.mul(scale_weights)?.sum(1)?.mean(0)?;
    let mut main = per_scale_main[0].clone();
    for m in &per_scale_main[1..] {
        main = main.add(m)?;
    }
    let plane = main.scale(1.0 / s as f64);
    let total = normal.add(&plane)?;
    Ok(MultiLoss { normal, plane, total })
}
