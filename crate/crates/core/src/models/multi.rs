use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::Mlp;
use super::single::split_predictions;
use super::{batch_coords, check_finite, ForwardOptions, ModelConfig, NormalPrediction, SingleOutput, SingleScaleModel};
use crate::data::Vec3;
use crate::error::{Error, Result};
use crate::patch::{derive_seed, Patch};
use crate::tensor::params::{read_checkpoint, write_checkpoint};
use crate::tensor::{ParamBinding, ParamStore, Tensor};

const SCALE_NET_STREAM: u64 = 0x5CA1E;

/// Parameter bindings for every subnet plus the scale network.
pub struct MultiBinding {
    pub subnets: Vec<ParamBinding>,
    pub scale: ParamBinding,
}

pub struct MultiOutput {
    pub per_scale: Vec<SingleOutput>,
    /// Scale-network logits `[B,S]`.
    pub logits: Tensor,
    /// Softmax of the logits, `[B,S]`.
    pub weights: Tensor,
    /// Arg-max of the weights per sample, ties to the smallest index.
    pub selected: Vec<usize>,
    /// Normal of the selected subnet per sample.
    pub normals: Vec<Vec3>,
}

/// `S` single-scale subnets, one per radius, and a scale network reading
/// their concatenated global features.
#[derive(Debug, Clone)]
pub struct MultiScaleModel {
    radii: Vec<f64>,
    subnets: Vec<SingleScaleModel>,
    scale_params: ParamStore,
    scale_net: Mlp,
}

impl MultiScaleModel {
    /// Fresh model. Subnet `s` is initialised exactly like
    /// `SingleScaleModel::new(config, seed + s)`.
    pub fn new(config: &ModelConfig, radii: &[f64], seed: u64) -> Result<Self> {
        let subnets = (0..radii.len())
            .map(|s| SingleScaleModel::new(config, seed.wrapping_add(s as u64)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_subnets(subnets, radii, seed)
    }

    /// Wraps existing (for instance pretrained) subnets.
    pub fn from_subnets(subnets: Vec<SingleScaleModel>, radii: &[f64], seed: u64) -> Result<Self> {
        if radii.is_empty() || subnets.len() != radii.len() {
            return Err(Error::invalid(format!(
                "{} subnets for {} radii",
                subnets.len(),
                radii.len()
            )));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::invalid(format!("radius must be positive, got {r}")));
        }
        let config = subnets[0].config().clone();
        if subnets.iter().any(|s| s.config() != &config) {
            return Err(Error::invalid("all subnets must share one architecture"));
        }
        let s = radii.len();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SCALE_NET_STREAM, 0));
        let mut scale_params = ParamStore::new();
        let scale_net = Mlp::new(
            &mut scale_params,
            "scale",
            s * config.feature_width(),
            &[config.scale_net_hidden, s],
            false,
            &mut rng,
        );
        Ok(MultiScaleModel {
            radii: radii.to_vec(),
            subnets,
            scale_params,
            scale_net,
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn num_scales(&self) -> usize {
        self.radii.len()
    }

    pub fn subnets(&self) -> &[SingleScaleModel] {
        &self.subnets
    }

    pub fn subnets_mut(&mut self) -> &mut [SingleScaleModel] {
        &mut self.subnets
    }

    pub fn scale_params(&self) -> &ParamStore {
        &self.scale_params
    }

    pub fn scale_params_mut(&mut self) -> &mut ParamStore {
        &mut self.scale_params
    }

    pub fn bind(&self, train_subnets: bool, train_scale_net: bool) -> MultiBinding {
        MultiBinding {
            subnets: self.subnets.iter().map(|s| s.params().bind(train_subnets)).collect(),
            scale: self.scale_params.bind(train_scale_net),
        }
    }

    /// `coords[s]` is the `[B,K,3]` batch at radius `s`; all share B and the
    /// order of centre points.
    pub fn forward(&self, p: &MultiBinding, coords: &[Tensor]) -> Result<MultiOutput> {
        if coords.len() != self.num_scales() || p.subnets.len() != self.num_scales() {
            return Err(Error::invalid(format!(
                "expected {} scales, got {} patch batches",
                self.num_scales(),
                coords.len()
            )));
        }
        let batch = coords[0].shape().first().copied().unwrap_or(0);
        if coords.iter().any(|c| c.shape().first() != Some(&batch)) {
            return Err(Error::invalid("patch batches differ in size across scales"));
        }
        let per_scale = self
            .subnets
            .iter()
            .zip(&p.subnets)
            .zip(coords)
            .map(|((net, binding), x)| net.forward(binding, x, ForwardOptions::default()))
            .collect::<Result<Vec<_>>>()?;
        let globals: Vec<Tensor> = per_scale.iter().map(|o| o.global.clone()).collect();
        let logits = self.scale_net.forward(&p.scale, &Tensor::concat(&globals)?)?;
        check_finite(&logits, "scale")?;
        let weights = logits.softmax()?;
        let s = self.num_scales();
        let selected: Vec<usize> = weights.values().chunks(s).map(argmax_first).collect();
        let normals = selected
            .iter()
            .enumerate()
            .map(|(b, &sel)| {
                let n = per_scale[sel].normals.values();
                [n[3 * b], n[3 * b + 1], n[3 * b + 2]]
            })
            .collect();
        Ok(MultiOutput {
            per_scale,
            logits,
            weights,
            selected,
            normals,
        })
    }

    /// Inference: `patches[s][b]` is the patch of sample `b` at radius `s`.
    /// Plane probabilities and quaternion are those of the selected subnet.
    pub fn predict(&self, patches: &[Vec<&Patch>]) -> Result<Vec<NormalPrediction>> {
        let coords = patches.iter().map(|ps| batch_coords(ps)).collect::<Result<Vec<_>>>()?;
        let out = self.forward(&self.bind(false, false), &coords)?;
        let per_scale: Vec<Vec<NormalPrediction>> = out.per_scale.iter().map(split_predictions).collect();
        let s = self.num_scales();
        Ok(out
            .selected
            .iter()
            .enumerate()
            .map(|(b, &sel)| {
                let mut pred = per_scale[sel][b].clone();
                debug_assert_eq!(pred.normal, out.normals[b]);
                pred.scale_weights = Some(out.weights.values()[b * s..(b + 1) * s].to_vec());
                pred.selected_scale = Some(sel);
                pred
            })
            .collect())
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let prefixes: Vec<String> = (0..self.num_scales()).map(|s| format!("subnet{s}.")).collect();
        let mut groups: Vec<(&str, &ParamStore)> = prefixes.iter().map(String::as_str).zip(self.subnets.iter().map(|s| s.params())).collect();
        groups.push(("", &self.scale_params));
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        write_checkpoint(BufWriter::new(file), &groups).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let entries = read_checkpoint(BufReader::new(file))?;
        for (s, net) in self.subnets.iter_mut().enumerate() {
            net.params_mut().load_entries(&format!("subnet{s}."), &entries)?;
        }
        self.scale_params.load_entries("", &entries)?;
        Ok(())
    }
}

fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Pooling;

    fn tiny() -> ModelConfig {
        ModelConfig {
            point_mlp: vec![8, 16],
            qstn_point_mlp: vec![8],
            qstn_head: vec![8],
            normal_head: vec![8],
            plane_head: vec![8],
            pooling: Pooling::Weighted,
            scale_net_hidden: 8,
        }
    }

    #[test]
    fn ties_go_to_smallest_index() {
        assert_eq!(argmax_first(&[0.5, 0.5]), 0);
        assert_eq!(argmax_first(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax_first(&[0.1, 0.2, 0.7]), 2);
    }

    #[test]
    fn subnets_match_single_initialisation() {
        let m = MultiScaleModel::new(&tiny(), &[0.03, 0.05], 7).unwrap();
        assert_eq!(m.subnets()[0].params(), SingleScaleModel::new(&tiny(), 7).unwrap().params());
        assert_eq!(m.subnets()[1].params(), SingleScaleModel::new(&tiny(), 8).unwrap().params());
    }

    #[test]
    fn uniform_logits_select_first_scale() {
        let mut m = MultiScaleModel::new(&tiny(), &[0.03, 0.05, 0.07], 1).unwrap();
        for p in m.scale_params_mut().iter_mut() {
            p.values.iter_mut().for_each(|v| *v = 0.0);
        }
        let x = Tensor::full(&[2, 6, 3], 0.1);
        let coords = vec![x.clone(), x.clone(), x];
        let out = m.forward(&m.bind(false, false), &coords).unwrap();
        assert!(out.weights.values().iter().all(|&w| (w - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(out.selected, vec![0, 0]);
        assert!(m.forward(&m.bind(false, false), &coords[..2]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("multi.ckpt");
        let a = MultiScaleModel::new(&tiny(), &[0.03, 0.05], 1).unwrap();
        a.save_checkpoint(&path).unwrap();
        let mut b = MultiScaleModel::new(&tiny(), &[0.03, 0.05], 2).unwrap();
        b.load_checkpoint(&path).unwrap();
        assert_eq!(a.scale_params(), b.scale_params());
        assert_eq!(a.subnets()[1].params(), b.subnets()[1].params());
    }
}
