use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Linear, Mlp};
use super::{check_finite, quat_to_rot, ModelConfig, Pooling};
use crate::data::Vec3;
use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::tensor::params::{read_checkpoint, write_checkpoint};
use crate::tensor::{ParamBinding, ParamStore, Tensor};

/// Stacks patch coordinates into a `[B,K,3]` tensor. All patches must share K.
pub fn batch_coords(patches: &[&Patch]) -> Result<Tensor> {
    let k = patches.first().map(|p| p.k()).ok_or_else(|| Error::invalid("empty patch batch"))?;
    if let Some(p) = patches.iter().find(|p| p.k() != k) {
        return Err(Error::invalid(format!(
            "patch at point {} has {} rows, expected {k}",
            p.center_index,
            p.k()
        )));
    }
    let values = patches.iter().flat_map(|p| p.coords.iter().flatten().copied()).collect();
    Ok(Tensor::new(values, &[patches.len(), k, 3])?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardOptions {
    /// Skip the quaternion transformer and use the identity rotation.
    pub identity_transform: bool,
}

/// Every intermediate a caller may need from one forward pass.
pub struct SingleOutput {
    /// Unit normals in the original patch frame, `[B,3]`.
    pub normals: Tensor,
    pub plane_logits: Tensor,
    /// Per-point plane probabilities, `[B,K]`.
    pub plane_probs: Tensor,
    /// Pooled patch feature, `[B,F]`.
    pub global: Tensor,
    /// Raw transformer output `[B,4]` (normalised only inside the rotation).
    pub quaternion: Tensor,
    pub rotation: Tensor,
    /// Pooling weights `[B,K]`, uniform for mean pooling.
    pub pool_weights: Tensor,
}

/// One patch's inference result.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalPrediction {
    pub normal: Vec3,
    pub plane_probs: Vec<f64>,
    pub quaternion: [f64; 4],
    /// Softmax scale weights, multi-scale only.
    pub scale_weights: Option<Vec<f64>>,
    pub selected_scale: Option<usize>,
}

/// Patch network: quaternion transformer, shared per-point MLP, symmetric
/// pooling, normal regressor and per-point plane classifier.
#[derive(Debug, Clone)]
pub struct SingleScaleModel {
    config: ModelConfig,
    params: ParamStore,
    qstn_point: Mlp,
    qstn_head: Mlp,
    point_mlp: Mlp,
    pool: Option<Linear>,
    normal_head: Mlp,
    // The classifier's first layer acts on [point ‖ global]; splitting the
    // weight lets the global half be computed once per patch.
    plane_point: Linear,
    plane_global: Linear,
    plane_rest: Mlp,
}

impl SingleScaleModel {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let p = &mut params;
        let f = config.feature_width();

        let qstn_point = Mlp::new(p, "qstn.point", 3, &config.qstn_point_mlp, true, &mut rng);
        let mut qstn_widths = config.qstn_head.clone();
        qstn_widths.push(4);
        let qstn_head = Mlp::new(p, "qstn.head", qstn_point.output_width(), &qstn_widths, false, &mut rng);
        // Start at the identity rotation.
        let last_bias = qstn_head.layers.last().and_then(|l| l.bias).expect("head has a bias");
        p.get_mut(last_bias).values = vec![1.0, 0.0, 0.0, 0.0];

        let point_mlp = Mlp::new(p, "feat", 3, &config.point_mlp, true, &mut rng);
        // No bias: the softmax over the patch would cancel it.
        let pool = (config.pooling == Pooling::Weighted).then(|| Linear::new(p, "pool", f, 1, false, &mut rng));

        let mut normal_widths = config.normal_head.clone();
        normal_widths.push(3);
        let normal_head = Mlp::new(p, "normal", f, &normal_widths, false, &mut rng);

        let h0 = config.plane_head[0];
        let plane_point = Linear::new(p, "plane.in_point", f, h0, true, &mut rng);
        let plane_global = Linear::new(p, "plane.in_global", f, h0, false, &mut rng);
        let mut plane_widths = config.plane_head[1..].to_vec();
        plane_widths.push(1);
        let plane_rest = Mlp::new(p, "plane", h0, &plane_widths, false, &mut rng);

        Ok(SingleScaleModel {
            config: config.clone(),
            params,
            qstn_point,
            qstn_head,
            point_mlp,
            pool,
            normal_head,
            plane_point,
            plane_global,
            plane_rest,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Runs the network on `coords: [B,K,3]` using the bound parameters.
    pub fn forward(&self, p: &ParamBinding, coords: &Tensor, opts: ForwardOptions) -> Result<SingleOutput> {
        let shape = coords.shape();
        if shape.len() != 3 || shape[2] != 3 || shape[0] == 0 || shape[1] == 0 {
            return Err(Error::invalid(format!("patch batch must be [B,K,3], got {shape:?}")));
        }
        let (b, k) = (shape[0], shape[1]);
        let f = self.config.feature_width();

        let (quaternion, rotation) = if opts.identity_transform {
            let q = Tensor::new([1.0, 0.0, 0.0, 0.0].repeat(b), &[b, 4])?;
            let r = Tensor::new([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0].repeat(b), &[b, 3, 3])?;
            (q, r)
        } else {
            let h = self.qstn_point.forward(p, coords)?.mean(1)?;
            let q = self.qstn_head.forward(p, &h)?;
            check_finite(&q, "qstn")?;
            let r = quat_to_rot(&q)?;
            (q, r)
        };
        let x = Tensor::batched_matvec3(&rotation, coords, false)?;

        let feat = self.point_mlp.forward(p, &x)?;
        check_finite(&feat, "feat")?;
        let (global, pool_weights) = match &self.pool {
            Some(pool) => {
                let w = pool.forward(p, &feat)?.reshape(&[b, k])?.softmax()?;
                (feat.weighted_mean(&w, 1)?, w)
            }
            None => (feat.mean(1)?, Tensor::full(&[b, k], 1.0 / k as f64)),
        };
        check_finite(&global, "pool")?;

        let raw = self.normal_head.forward(p, &global)?;
        check_finite(&raw, "normal")?;
        let unit = raw.l2_normalize()?.reshape(&[b, 1, 3])?;
        let normals = Tensor::batched_matvec3(&rotation, &unit, true)?.reshape(&[b, 3])?;

        let local = self.plane_point.forward(p, &feat)?;
        let shared = self.plane_global.forward(p, &global)?.reshape(&[b, 1, self.plane_global.fan_out])?;
        let hidden = local.add(&shared)?.relu();
        let plane_logits = self.plane_rest.forward(p, &hidden)?.reshape(&[b, k])?;
        check_finite(&plane_logits, "plane")?;
        let plane_probs = plane_logits.sigmoid();
        debug_assert_eq!(global.shape(), [b, f]);

        Ok(SingleOutput {
            normals,
            plane_logits,
            plane_probs,
            global,
            quaternion,
            rotation,
            pool_weights,
        })
    }

    /// Inference without gradient tracking.
    pub fn predict(&self, patches: &[&Patch]) -> Result<Vec<NormalPrediction>> {
        let binding = self.params.bind(false);
        let out = self.forward(&binding, &batch_coords(patches)?, ForwardOptions::default())?;
        Ok(split_predictions(&out))
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        write_checkpoint(BufWriter::new(file), &[("", &self.params)]).map_err(|e| Error::io(path, e))
    }

    /// Loads values saved by [`save_checkpoint`](Self::save_checkpoint) into a
    /// model of the same architecture. `prefix` selects a group inside a
    /// multi-scale checkpoint (`""` for single-scale files).
    pub fn load_checkpoint(&mut self, path: impl AsRef<Path>, prefix: &str) -> Result<()> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let entries = read_checkpoint(BufReader::new(file))?;
        self.params.load_entries(prefix, &entries)?;
        Ok(())
    }
}

pub(crate) fn split_predictions(out: &SingleOutput) -> Vec<NormalPrediction> {
    let k = out.plane_probs.shape()[1];
    let n = out.normals.values();
    let q = out.quaternion.values();
    out.plane_probs
        .values()
        .chunks(k)
        .enumerate()
        .map(|(b, probs)| NormalPrediction {
            normal: [n[3 * b], n[3 * b + 1], n[3 * b + 2]],
            plane_probs: probs.to_vec(),
            quaternion: [q[4 * b], q[4 * b + 1], q[4 * b + 2], q[4 * b + 3]],
            scale_weights: None,
            selected_scale: None,
        })
        .collect()
}
