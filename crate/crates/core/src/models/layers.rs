use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{ParamBinding, ParamId, ParamStore, Result, Tensor};

/// Fully connected layer `x · W + b` applied over the last axis.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    /// Weights and bias uniform in ±1/√fan_in.
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, bias: bool, rng: &mut ChaCha8Rng) -> Linear {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
        let weight = store.add(format!("{name}.weight"), &[fan_in, fan_out], w);
        let bias = bias.then(|| {
            let b: Vec<f64> = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            store.add(format!("{name}.bias"), &[fan_out], b)
        });
        Linear {
            weight,
            bias,
            fan_in,
            fan_out,
        }
    }

    pub fn forward(&self, p: &ParamBinding, x: &Tensor) -> Result<Tensor> {
        let y = x.matmul(p.get(self.weight))?;
        match self.bias {
            Some(b) => y.add(p.get(b)),
            None => Ok(y),
        }
    }
}

/// Stack of linear layers with ReLU after every hidden layer, and after the
/// last one too when `relu_out` is set.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub relu_out: bool,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, widths: &[usize], relu_out: bool, rng: &mut ChaCha8Rng) -> Mlp {
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = input;
        for (i, &w) in widths.iter().enumerate() {
            layers.push(Linear::new(store, &format!("{name}.{i}"), fan_in, w, true, rng));
            fan_in = w;
        }
        Mlp { layers, relu_out }
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map(|l| l.fan_out).unwrap_or(0)
    }

    pub fn forward(&self, p: &ParamBinding, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(p, &h)?;
            if i < last || self.relu_out {
                h = h.relu();
            }
        }
        Ok(h)
    }
}
