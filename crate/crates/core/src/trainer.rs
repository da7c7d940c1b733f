//! Patch dataset assembly and the shuffled-minibatch SGD loops.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::PointCloud;
use crate::error::{Error, Result};
use crate::models::{
    batch_coords, loss_multi_terms, loss_normal, loss_normal_per_sample, loss_plane, loss_total, ForwardOptions, ModelConfig,
    MultiScaleModel, SingleScaleModel,
};
use crate::patch::{derive_seed, extract_patch, label_patch, LabelConfig, Patch, SpatialIndex, DEFAULT_K};
use crate::tensor::{Sgd, Tensor};

const CENTER_STREAM: u64 = 0xC3;
const PATCH_STREAM: u64 = 0x9A;
const SHUFFLE_STREAM: u64 = 0x5F;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Patch radii as fractions of the bounding-box diagonal, ascending.
    pub radii: Vec<f64>,
    pub batch_size_single: usize,
    pub batch_size_multi: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub patches_per_shape: usize,
    pub seed: u64,
    /// Points per patch.
    pub k: usize,
    pub labels: LabelConfig,
    /// Write a checkpoint every this many epochs (0 = only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            radii: vec![0.01, 0.03, 0.05],
            batch_size_single: 64,
            batch_size_multi: 16,
            learning_rate: 1e-4,
            momentum: 0.9,
            epochs: 20,
            patches_per_shape: 500,
            seed: 0,
            k: DEFAULT_K,
            labels: LabelConfig::default(),
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() {
            return Err(Error::invalid("at least one radius is required"));
        }
        if let Some(r) = self.radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::invalid(format!("radius must be positive, got {r}")));
        }
        if self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("radii must be strictly ascending, got {:?}", self.radii)));
        }
        if self.batch_size_single == 0 || self.batch_size_multi == 0 {
            return Err(Error::invalid("batch sizes must be at least 1"));
        }
        if self.k == 0 || self.patches_per_shape == 0 {
            return Err(Error::invalid("k and patches_per_shape must be at least 1"));
        }
        Sgd::new(self.learning_rate, self.momentum)?;
        self.labels.validate()
    }
}

/// One training sample: the patches around one centre point, one per radius.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    pub shape: usize,
    pub center: usize,
    pub patches: Vec<Patch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchDataset {
    pub radii: Vec<f64>,
    pub shape_names: Vec<String>,
    pub samples: Vec<PatchSample>,
}

impl PatchDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_scales(&self) -> usize {
        self.radii.len()
    }
}

/// Samples `patches_per_shape` distinct centres per shape (all usable points
/// when the shape is smaller) and precomputes labelled patches at every
/// radius. Points without a neighbour inside the smallest radius cannot form
/// a patch and are never chosen.
pub fn build_dataset(shapes: &[PointCloud], config: &TrainConfig) -> Result<PatchDataset> {
    config.validate()?;
    let r_min = config.radii[0];
    let mut centers = Vec::new();
    for (s, cloud) in shapes.iter().enumerate() {
        let index = SpatialIndex::build(&cloud.points)?;
        let abs = r_min * cloud.bbox_diagonal();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, CENTER_STREAM, s as u64));
        let mut order: Vec<usize> = (0..cloud.len()).collect();
        order.shuffle(&mut rng);
        let mut picked: Vec<usize> = order
            .into_iter()
            .filter(|&c| index.radius_query(cloud.points[c], abs).len() > 1)
            .take(config.patches_per_shape)
            .collect();
        picked.sort_unstable();
        centers.extend(picked.into_iter().map(|c| (s, c)));
    }
    build_dataset_at(shapes, &centers, config)
}

/// Builds labelled patches at explicitly chosen `(shape, centre)` pairs.
pub fn build_dataset_at(shapes: &[PointCloud], centers: &[(usize, usize)], config: &TrainConfig) -> Result<PatchDataset> {
    config.validate()?;
    if let Some(c) = shapes.iter().find(|c| c.normals.is_none()) {
        return Err(Error::invalid(format!("shape `{}` has no ground-truth normals", c.name)));
    }
    let indices = shapes
        .iter()
        .map(|c| SpatialIndex::build(&c.points))
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::with_capacity(centers.len());
    for &(s, center) in centers {
        let cloud = shapes
            .get(s)
            .ok_or_else(|| Error::invalid(format!("shape index {s} out of range")))?;
        let mut patches = Vec::with_capacity(config.radii.len());
        for (ri, &r) in config.radii.iter().enumerate() {
            let seed = derive_seed(derive_seed(config.seed, PATCH_STREAM, s as u64), center as u64, ri as u64);
            let mut patch = extract_patch(cloud, &indices[s], center, r, config.k, seed)?;
            label_patch(&mut patch, &config.labels)?;
            patches.push(patch);
        }
        samples.push(PatchSample {
            shape: s,
            center,
            patches,
        });
    }
    Ok(PatchDataset {
        radii: config.radii.clone(),
        shape_names: shapes.iter().map(|c| c.name.clone()).collect(),
        samples,
    })
}

/// Epoch means of the loss terms, weighted by batch size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub normal: f64,
    pub plane: f64,
    pub total: f64,
}

/// Writes `epoch,L_normal,L_main,L_total` rows.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,L_normal,L_main,L_total\n");
    for h in history {
        let _ = writeln!(out, "{},{:?},{:?},{:?}", h.epoch, h.normal, h.plane, h.total);
    }
    out
}

/// Where and how often to save checkpoints during training.
#[derive(Debug, Clone, Default)]
pub struct CheckpointPlan {
    /// Final checkpoint path; periodic ones get an `.epochN` suffix.
    pub path: Option<PathBuf>,
}

impl CheckpointPlan {
    fn periodic(&self, epoch: usize, every: usize) -> Option<PathBuf> {
        let path = self.path.as_ref()?;
        (every > 0 && epoch % every == 0).then(|| {
            let mut p = path.clone().into_os_string();
            p.push(format!(".epoch{epoch}"));
            PathBuf::from(p)
        })
    }
}

fn gt_normals(patches: &[&Patch]) -> Result<Tensor> {
    let mut v = Vec::with_capacity(patches.len() * 3);
    for p in patches {
        let n = p
            .gt_center_normal
            .ok_or_else(|| Error::invalid(format!("patch at point {} lacks a ground-truth normal", p.center_index)))?;
        v.extend_from_slice(&n);
    }
    Ok(Tensor::new(v, &[patches.len(), 3])?)
}

fn label_tensor(patches: &[&Patch]) -> Result<Tensor> {
    let k = patches[0].k();
    let mut v = Vec::with_capacity(patches.len() * k);
    for p in patches {
        let labels = p
            .plane_labels
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("patch at point {} is unlabelled", p.center_index)))?;
        v.extend(labels.iter().map(|&l| if l { 1.0 } else { 0.0 }));
    }
    Ok(Tensor::new(v, &[patches.len(), k])?)
}

/// The per-epoch sample order shared by both loops, so that runs with equal
/// seeds and batch sizes visit identical batches.
struct Shuffler {
    rng: ChaCha8Rng,
    order: Vec<usize>,
}

impl Shuffler {
    fn new(n: usize, seed: u64) -> Self {
        Shuffler {
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, SHUFFLE_STREAM, 0)),
            order: (0..n).collect(),
        }
    }

    fn next_epoch(&mut self) -> &[usize] {
        self.order.shuffle(&mut self.rng);
        &self.order
    }
}

struct Running {
    n: usize,
    normal: f64,
    plane: f64,
    total: f64,
}

impl Running {
    fn new() -> Self {
        Running {
            n: 0,
            normal: 0.0,
            plane: 0.0,
            total: 0.0,
        }
    }

    fn add(&mut self, count: usize, normal: f64, plane: f64, total: f64) {
        let w = count as f64;
        self.n += count;
        self.normal += w * normal;
        self.plane += w * plane;
        self.total += w * total;
    }

    fn finish(&self, epoch: usize) -> EpochStats {
        let n = self.n as f64;
        EpochStats {
            epoch,
            normal: self.normal / n,
            plane: self.plane / n,
            total: self.total / n,
        }
    }
}

fn check_loss(v: f64, epoch: usize, batch: usize) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { epoch, batch })
    }
}

/// Trains `model` on the patches of scale index `scale` with the
/// normal-plus-plane objective. Returns one [`EpochStats`] per epoch.
pub fn train_single(
    dataset: &PatchDataset,
    scale: usize,
    model: &mut SingleScaleModel,
    config: &TrainConfig,
    checkpoints: &CheckpointPlan,
) -> Result<Vec<EpochStats>> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    if scale >= dataset.num_scales() {
        return Err(Error::invalid(format!("scale {scale} not in dataset with {} radii", dataset.num_scales())));
    }
    let mut opt = Sgd::new(config.learning_rate, config.momentum)?;
    let mut shuffler = Shuffler::new(dataset.len(), config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let order = shuffler.next_epoch().to_vec();
        let mut running = Running::new();
        for (bi, chunk) in order.chunks(config.batch_size_single).enumerate() {
            let patches: Vec<&Patch> = chunk.iter().map(|&i| &dataset.samples[i].patches[scale]).collect();
            let binding = model.params().bind(true);
            let out = model.forward(&binding, &batch_coords(&patches)?, ForwardOptions::default())?;
            let ln = loss_normal(&out.normals, &gt_normals(&patches)?)?;
            let lp = loss_plane(&out.plane_probs, &label_tensor(&patches)?)?;
            let total = loss_total(&ln, &lp)?;
            check_loss(total.item(), epoch, bi + 1)?;
            total.backward()?;
            opt.step(model.params_mut(), binding.tensors())?;
            running.add(chunk.len(), ln.item(), lp.item(), total.item());
        }
        history.push(running.finish(epoch));
        if let Some(path) = checkpoints.periodic(epoch, config.checkpoint_every) {
            model.save_checkpoint(path)?;
        }
    }
    if let Some(path) = &checkpoints.path {
        model.save_checkpoint(path)?;
    }
    Ok(history)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MultiTrainOptions {
    /// Keep subnet parameters fixed and train only the scale network.
    pub freeze_subnets: bool,
}

/// Trains a multi-scale model; `dataset` must hold one patch per radius of
/// the model for every sample. In the returned stats `normal` is the
/// v-weighted normal term and `plane` the 1/S-averaged plane term.
pub fn train_multi(
    dataset: &PatchDataset,
    model: &mut MultiScaleModel,
    config: &TrainConfig,
    options: MultiTrainOptions,
    checkpoints: &CheckpointPlan,
) -> Result<Vec<EpochStats>> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    if dataset.radii != model.radii() {
        return Err(Error::invalid(format!(
            "dataset radii {:?} differ from model radii {:?}",
            dataset.radii,
            model.radii()
        )));
    }
    let s = model.num_scales();
    let mut sub_opts: Vec<Sgd> = (0..s)
        .map(|_| Sgd::new(config.learning_rate, config.momentum))
        .collect::<std::result::Result<_, _>>()?;
    let mut scale_opt = Sgd::new(config.learning_rate, config.momentum)?;
    let mut shuffler = Shuffler::new(dataset.len(), config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let order = shuffler.next_epoch().to_vec();
        let mut running = Running::new();
        for (bi, chunk) in order.chunks(config.batch_size_multi).enumerate() {
            let per_scale: Vec<Vec<&Patch>> = (0..s)
                .map(|si| chunk.iter().map(|&i| &dataset.samples[i].patches[si]).collect())
                .collect();
            let coords = per_scale.iter().map(|p| batch_coords(p)).collect::<Result<Vec<_>>>()?;
            let binding = model.bind(!options.freeze_subnets, true);
            let out = model.forward(&binding, &coords)?;
            let mut normal_terms = Vec::with_capacity(s);
            let mut plane_terms = Vec::with_capacity(s);
            for (si, o) in out.per_scale.iter().enumerate() {
                normal_terms.push(loss_normal_per_sample(&o.normals, &gt_normals(&per_scale[si])?)?);
                plane_terms.push(loss_plane(&o.plane_probs, &label_tensor(&per_scale[si])?)?);
            }
            let loss = loss_multi_terms(&normal_terms, &out.weights, &plane_terms)?;
            check_loss(loss.total.item(), epoch, bi + 1)?;
            loss.total.backward()?;
            if !options.freeze_subnets {
                for ((opt, net), b) in sub_opts.iter_mut().zip(model.subnets_mut()).zip(&binding.subnets) {
                    opt.step(net.params_mut(), b.tensors())?;
                }
            }
            scale_opt.step(model.scale_params_mut(), binding.scale.tensors())?;
            running.add(chunk.len(), loss.normal.item(), loss.plane.item(), loss.total.item());
        }
        history.push(running.finish(epoch));
        if let Some(path) = checkpoints.periodic(epoch, config.checkpoint_every) {
            model.save_checkpoint(path)?;
        }
    }
    if let Some(path) = &checkpoints.path {
        model.save_checkpoint(path)?;
    }
    Ok(history)
}

/// Architecture and sampling settings stored next to a checkpoint so that
/// evaluation can rebuild the network. Saved as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    /// Subnet radii; a single entry for single-scale models.
    pub radii: Vec<f64>,
    pub k: usize,
    pub multi_scale: bool,
    pub model: ModelConfig,
}

impl ModelMeta {
    /// `<checkpoint>.meta.toml`.
    pub fn path_for(checkpoint: &Path) -> PathBuf {
        let mut p = checkpoint.as_os_str().to_owned();
        p.push(".meta.toml");
        PathBuf::from(p)
    }

    pub fn save(&self, checkpoint: &Path) -> Result<()> {
        let path = Self::path_for(checkpoint);
        let text = toml::to_string(self).map_err(|e| Error::invalid(format!("model metadata: {e}")))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(checkpoint: &Path) -> Result<Self> {
        let path = Self::path_for(checkpoint);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: ModelMeta = toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        meta.model.validate()?;
        Ok(meta)
    }
}
