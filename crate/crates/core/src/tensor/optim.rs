//! Stochastic gradient descent with classic momentum.

use super::{ParamStore, Result, Tensor, TensorError};

/// `v ← momentum·v + g; p ← p − lr·v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    learning_rate: f64,
    momentum: f64,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Sgd> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(TensorError::InvalidArgument {
                op: "sgd",
                msg: format!("learning rate must be positive, got {learning_rate}"),
            });
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(TensorError::InvalidArgument {
                op: "sgd",
                msg: format!("momentum must lie in [0, 1), got {momentum}"),
            });
        }
        Ok(Sgd {
            learning_rate,
            momentum,
            velocity: Vec::new(),
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn velocity(&self) -> &[Vec<f64>] {
        &self.velocity
    }

    /// Applies one update from explicit gradients, aligned with `params`.
    pub fn step_with(&mut self, params: &mut ParamStore, grads: &[Vec<f64>]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(TensorError::InvalidArgument {
                op: "sgd",
                msg: format!("{} gradients for {} parameters", grads.len(), params.len()),
            });
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| vec![0.0; p.values.len()]).collect();
        }
        for ((param, grad), vel) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            if grad.len() != param.values.len() {
                return Err(TensorError::ShapeMismatch {
                    op: "sgd",
                    lhs: param.shape.clone(),
                    rhs: vec![grad.len()],
                });
            }
            for ((p, g), v) in param.values.iter_mut().zip(grad).zip(vel.iter_mut()) {
                *v = self.momentum * *v + g;
                *p -= self.learning_rate * *v;
            }
        }
        Ok(())
    }

    /// Takes the gradients out of `leaves` (clearing them) and applies one update.
    pub fn step(&mut self, params: &mut ParamStore, leaves: &[Tensor]) -> Result<()> {
        let grads = take_grads(params, leaves)?;
        self.step_with(params, &grads)
    }
}

/// Removes the gradients from bound leaves, failing on any missing one.
pub fn take_grads(params: &ParamStore, leaves: &[Tensor]) -> Result<Vec<Vec<f64>>> {
    if leaves.len() != params.len() {
        return Err(TensorError::InvalidArgument {
            op: "sgd",
            msg: format!("{} leaves for {} parameters", leaves.len(), params.len()),
        });
    }
    params
        .iter()
        .zip(leaves)
        .map(|(p, t)| t.take_grad().ok_or_else(|| TensorError::MissingGrad(p.name.clone())))
        .collect()
}
