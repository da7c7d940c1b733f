//! The single-scale forward pass recomputed in plain f64 from the named
//! parameters, for the configuration where the transformer is the identity
//! and pooling is uniform.

mod common;

use lpfc::models::{batch_coords, ForwardOptions, ModelConfig, Pooling, SingleScaleModel};
use lpfc::patch::Patch;
use lpfc::tensor::ParamStore;

struct Dense {
    w: Vec<f64>,
    b: Option<Vec<f64>>,
    fan_in: usize,
    fan_out: usize,
}

fn dense(params: &ParamStore, name: &str) -> Dense {
    let w = params.by_name(&format!("{name}.weight")).unwrap_or_else(|| panic!("no {name}.weight"));
    Dense {
        w: w.values.clone(),
        b: params.by_name(&format!("{name}.bias")).map(|b| b.values.clone()),
        fan_in: w.shape[0],
        fan_out: w.shape[1],
    }
}

fn apply(layer: &Dense, x: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), layer.fan_in);
    (0..layer.fan_out)
        .map(|o| {
            let mut s = layer.b.as_ref().map_or(0.0, |b| b[o]);
            for (i, xi) in x.iter().enumerate() {
                s += xi * layer.w[i * layer.fan_out + o];
            }
            s
        })
        .collect()
}

fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

fn mlp(params: &ParamStore, name: &str, depth: usize, x: &[f64], relu_out: bool) -> Vec<f64> {
    let mut h = x.to_vec();
    for i in 0..depth {
        h = apply(&dense(params, &format!("{name}.{i}")), &h);
        if i + 1 < depth || relu_out {
            h = relu(h);
        }
    }
    h
}

struct Reference {
    normal: [f64; 3],
    probs: Vec<f64>,
}

fn reference(params: &ParamStore, cfg: &ModelConfig, patch: &Patch) -> Reference {
    let feats: Vec<Vec<f64>> = patch
        .coords
        .iter()
        .map(|p| mlp(params, "feat", cfg.point_mlp.len(), p, true))
        .collect();
    let k = feats.len() as f64;
    let f = feats[0].len();
    let global: Vec<f64> = (0..f).map(|c| feats.iter().map(|v| v[c]).sum::<f64>() / k).collect();
    let raw = mlp(params, "normal", cfg.normal_head.len() + 1, &global, false);
    let len = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
    let normal = [raw[0] / len, raw[1] / len, raw[2] / len];
    let shared = apply(&dense(params, "plane.in_global"), &global);
    let probs = feats
        .iter()
        .map(|fj| {
            let local = apply(&dense(params, "plane.in_point"), fj);
            let h: Vec<f64> = local.iter().zip(&shared).map(|(a, b)| (a + b).max(0.0)).collect();
            let logit = mlp(params, "plane", cfg.plane_head.len(), &h, false)[0];
            1.0 / (1.0 + (-logit).exp())
        })
        .collect();
    Reference { normal, probs }
}

fn check(model: &SingleScaleModel, patches: &[Patch]) {
    let refs: Vec<&Patch> = patches.iter().collect();
    let out = model
        .forward(
            &model.params().bind(false),
            &batch_coords(&refs).unwrap(),
            ForwardOptions { identity_transform: true },
        )
        .unwrap();
    let k = patches[0].k();
    for (b, patch) in patches.iter().enumerate() {
        let r = reference(model.params(), model.config(), patch);
        for a in 0..3 {
            let got = out.normals.values()[3 * b + a];
            assert!((got - r.normal[a]).abs() < 1e-12, "normal[{b}][{a}]: {got} vs {}", r.normal[a]);
        }
        for j in 0..k {
            let got = out.plane_probs.values()[b * k + j];
            assert!((got - r.probs[j]).abs() < 1e-12, "prob[{b}][{j}]");
        }
    }
}

fn config(pooling: Pooling) -> ModelConfig {
    ModelConfig {
        point_mlp: vec![16, 24],
        qstn_point_mlp: vec![8],
        qstn_head: vec![8],
        normal_head: vec![12, 6],
        plane_head: vec![10, 5],
        pooling,
        scale_net_hidden: 8,
    }
}

#[test]
fn mean_pooling_matches_plain_reference() {
    let model = SingleScaleModel::new(&config(Pooling::Mean), 4).unwrap();
    check(&model, &common::random_patches(3, 20, 8));
}

#[test]
fn weighted_pooling_with_zero_pool_weights_matches_plain_reference() {
    let mut model = SingleScaleModel::new(&config(Pooling::Weighted), 4).unwrap();
    let params = model.params_mut();
    let id = (0..params.len())
        .map(lpfc::tensor::ParamId)
        .find(|&id| params.get(id).name == "pool.weight")
        .unwrap();
    params.get_mut(id).values.iter_mut().for_each(|v| *v = 0.0);
    check(&model, &common::random_patches(3, 20, 9));
}

#[test]
fn identity_quaternion_at_init_only_in_the_bias() {
    let model = SingleScaleModel::new(&config(Pooling::Weighted), 1).unwrap();
    assert_eq!(model.params().by_name("qstn.head.1.bias").unwrap().values, vec![1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn full_transform_rotates_the_normal_back() {
    // With a trained-looking rotation the output lies in the input frame:
    // rotating the input patch by R0 must rotate a transform-free network's
    // normal by R0 as well.
    let model = SingleScaleModel::new(&config(Pooling::Mean), 2).unwrap();
    let patches = common::random_patches(1, 16, 3);
    let out = model
        .forward(
            &model.params().bind(false),
            &batch_coords(&[&patches[0]]).unwrap(),
            ForwardOptions::default(),
        )
        .unwrap();
    let r = out.rotation.values();
    let n = out.normals.values();
    // The canonical-frame normal is R·n and must match the network run on
    // the rotated coordinates with the identity transform.
    let mut rotated = patches[0].clone();
    for p in &mut rotated.coords {
        let q = *p;
        *p = [0, 1, 2].map(|i| (0..3).map(|j| r[3 * i + j] * q[j]).sum());
    }
    let canon = model
        .forward(
            &model.params().bind(false),
            &batch_coords(&[&rotated]).unwrap(),
            ForwardOptions { identity_transform: true },
        )
        .unwrap();
    let rn: Vec<f64> = (0..3).map(|i| (0..3).map(|j| r[3 * i + j] * n[j]).sum()).collect();
    for a in 0..3 {
        assert!((rn[a] - canon.normals.values()[a]).abs() < 1e-10);
    }
}
