//! Oracles shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use lpfc::models::{batch_coords, loss_normal, loss_plane, loss_total, ForwardOptions, ModelConfig, SingleScaleModel};
use lpfc::patch::Patch;
use lpfc::tensor::{ParamStore, Tensor, TensorError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Denominator floor of the relative error, so that gradients which are
/// zero on both sides do not divide by zero.
pub const REL_FLOOR: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Reduces any output to a scalar with fixed pseudo-random weights, so that
/// every output element contributes a distinct amount to the gradient.
fn project(y: &Tensor, seed: u64) -> Result<Tensor, TensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w = Tensor::new(w, y.shape())?;
    Ok(y.mul(&w)?.sum_all())
}

/// Compares reverse-mode gradients of `f` with central differences at
/// every input element. Returns the largest relative error.
pub fn fd_check<E: std::fmt::Debug>(inputs: &[(Vec<f64>, Vec<usize>)], f: impl Fn(&[Tensor]) -> Result<Tensor, E>) -> f64 {
    let leaves: Vec<Tensor> = inputs
        .iter()
        .map(|(v, s)| Tensor::parameter(v.clone(), s).unwrap())
        .collect();
    let y = project(&f(&leaves).unwrap(), 99).unwrap();
    y.backward().unwrap();
    let eval = |vals: &[Vec<f64>]| -> f64 {
        let ts: Vec<Tensor> = vals
            .iter()
            .zip(inputs)
            .map(|(v, (_, s))| Tensor::new(v.clone(), s).unwrap())
            .collect();
        project(&f(&ts).unwrap(), 99).unwrap().item()
    };
    let mut worst = 0.0f64;
    let mut vals: Vec<Vec<f64>> = inputs.iter().map(|(v, _)| v.clone()).collect();
    for (i, leaf) in leaves.iter().enumerate() {
        let g = leaf.grad().unwrap_or_else(|| vec![0.0; leaf.len()]);
        for j in 0..vals[i].len() {
            let x0 = vals[i][j];
            vals[i][j] = x0 + FD_STEP;
            let up = eval(&vals);
            vals[i][j] = x0 - FD_STEP;
            let down = eval(&vals);
            vals[i][j] = x0;
            worst = worst.max(rel_err(g[j], (up - down) / (2.0 * FD_STEP)));
        }
    }
    worst
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Values bounded away from zero, so that piecewise ops are smooth under
/// the finite-difference step.
fn off_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// `(name, worst relative error)` for every differentiable primitive.
pub fn primitive_gradient_errors() -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    let a = uniform(&mut rng, 24, -1.0, 1.0);
    let b = uniform(&mut rng, 24, -1.0, 1.0);
    let row = uniform(&mut rng, 4, -1.0, 1.0);
    let pos = uniform(&mut rng, 24, 0.2, 2.0);
    let m = uniform(&mut rng, 20, -1.0, 1.0);
    let x234 = |v: &Vec<f64>| (v.clone(), vec![2, 3, 4]);

    out.push((
        "matmul",
        fd_check(&[x234(&a), (m.clone(), vec![4, 5])], |t| t[0].matmul(&t[1])),
    ));
    out.push(("add (broadcast)", fd_check(&[x234(&a), (row.clone(), vec![4])], |t| t[0].add(&t[1]))));
    out.push(("sub (broadcast)", fd_check(&[x234(&a), (row.clone(), vec![4])], |t| t[0].sub(&t[1]))));
    out.push(("mul", fd_check(&[x234(&a), x234(&b)], |t| t[0].mul(&t[1]))));
    out.push((
        "mul (broadcast batch)",
        fd_check(&[x234(&a), (uniform(&mut rng, 12, -1.0, 1.0), vec![3, 4])], |t| t[0].mul(&t[1])),
    ));
    out.push(("affine", fd_check(&[x234(&a)], |t| Ok::<_, TensorError>(t[0].affine(-2.0, 0.5)))));
    out.push(("scale", fd_check(&[x234(&a)], |t| Ok::<_, TensorError>(t[0].scale(3.0)))));
    out.push(("relu", fd_check(&[x234(&off_zero(&mut rng, 24))], |t| Ok::<_, TensorError>(t[0].relu()))));
    out.push(("tanh", fd_check(&[x234(&a)], |t| Ok::<_, TensorError>(t[0].tanh()))));
    out.push(("sigmoid", fd_check(&[x234(&a)], |t| Ok::<_, TensorError>(t[0].sigmoid()))));
    out.push(("log", fd_check(&[x234(&pos)], |t| Ok::<_, TensorError>(t[0].log()))));
    out.push(("softmax", fd_check(&[x234(&a)], |t| t[0].softmax())));
    for axis in 0..3 {
        let name = ["sum axis 0", "sum axis 1", "sum axis 2"][axis];
        out.push((name, fd_check(&[x234(&a)], |t| t[0].sum(axis))));
        let name = ["mean axis 0", "mean axis 1", "mean axis 2"][axis];
        out.push((name, fd_check(&[x234(&a)], |t| t[0].mean(axis))));
    }
    out.push(("sum_all", fd_check(&[x234(&a)], |t| Ok::<_, TensorError>(t[0].sum_all()))));
    out.push(("mean_all", fd_check(&[x234(&a)], |t| Ok::<_, TensorError>(t[0].mean_all()))));
    out.push((
        "weighted_mean axis 1",
        fd_check(&[x234(&a), (uniform(&mut rng, 6, 0.2, 1.0), vec![2, 3])], |t| {
            t[0].weighted_mean(&t[1], 1)
        }),
    ));
    out.push((
        "concat",
        fd_check(&[x234(&a), (uniform(&mut rng, 12, -1.0, 1.0), vec![2, 3, 2])], |t| {
            Tensor::concat(&[t[0].clone(), t[1].clone()])
        }),
    ));
    out.push(("l2_normalize", fd_check(&[x234(&a)], |t| t[0].l2_normalize())));
    out.push(("norm", fd_check(&[x234(&a)], |t| t[0].norm())));
    let shifted: Vec<f64> = a
        .iter()
        .zip(off_zero(&mut rng, 24))
        .map(|(x, d)| x + 0.5 * d)
        .collect();
    out.push((
        "minimum",
        fd_check(&[x234(&a), x234(&shifted)], |t| t[0].minimum(&t[1])),
    ));
    out.push((
        "clamp",
        fd_check(&[x234(&uniform(&mut rng, 24, -0.4, 0.4))], |t| Ok::<_, TensorError>(t[0].clamp(-0.5, 0.5))),
    ));
    for transpose in [false, true] {
        out.push((
            if transpose { "batched_matvec3 (transposed)" } else { "batched_matvec3" },
            fd_check(
                &[
                    (uniform(&mut rng, 18, -1.0, 1.0), vec![2, 3, 3]),
                    (uniform(&mut rng, 24, -1.0, 1.0), vec![2, 4, 3]),
                ],
                |t| Tensor::batched_matvec3(&t[0], &t[1], transpose),
            ),
        ));
    }
    out.push(("reshape", fd_check(&[x234(&a)], |t| t[0].reshape(&[6, 4]))));
    out.push(("slice_last", fd_check(&[x234(&a)], |t| t[0].slice_last(1, 2))));
    out
}

/// Synthetic labelled patches for gradient checks: random points in the
/// unit ball with random unit normals and alternating labels.
pub fn random_patches(count: usize, k: usize, seed: u64) -> Vec<Patch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|b| {
            let coords: Vec<[f64; 3]> = (0..k)
                .map(|_| [0; 3].map(|_: i32| rng.random_range(-0.6..0.6)))
                .collect();
            let n = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0f64];
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            let n = n.map(|x| x / len);
            Patch {
                center_index: b,
                radius: 0.05,
                coords,
                source_indices: (0..k).collect(),
                gt_center_normal: Some(n),
                gt_point_normals: Some(vec![n; k]),
                plane_labels: Some((0..k).map(|j| (j + b) % 3 != 0).collect()),
            }
        })
        .collect()
}

/// Normal-plus-plane training objective of one batch, computed from an
/// explicit parameter set so that parameters can be perturbed.
pub fn single_loss(model: &SingleScaleModel, params: &ParamStore, coords: &Tensor, patches: &[Patch], trainable: bool) -> (Tensor, Vec<Tensor>) {
    let binding = params.bind(trainable);
    let out = model.forward(&binding, coords, ForwardOptions::default()).unwrap();
    let gt: Vec<f64> = patches.iter().flat_map(|p| p.gt_center_normal.unwrap()).collect();
    let gt = Tensor::new(gt, &[patches.len(), 3]).unwrap();
    let labels: Vec<f64> = patches
        .iter()
        .flat_map(|p| p.plane_labels.as_ref().unwrap().iter().map(|&l| f64::from(u8::from(l))))
        .collect();
    let labels = Tensor::new(labels, out.plane_probs.shape()).unwrap();
    let loss = loss_total(
        &loss_normal(&out.normals, &gt).unwrap(),
        &loss_plane(&out.plane_probs, &labels).unwrap(),
    )
    .unwrap();
    (loss, binding.tensors().to_vec())
}

/// End-to-end check of the reduced-width single-scale model. Every
/// parameter tensor is probed at `per_tensor` random entries (all entries
/// when smaller). Returns `(worst relative error, entries probed)`.
pub fn model_gradient_error(k: usize, per_tensor: usize, seed: u64) -> (f64, usize) {
    let config = ModelConfig::reduced();
    assert_eq!(config.feature_width(), 128);
    let model = SingleScaleModel::new(&config, seed).unwrap();
    let patches = random_patches(2, k, seed + 1);
    let refs: Vec<&Patch> = patches.iter().collect();
    let coords = batch_coords(&refs).unwrap();
    let (loss, leaves) = single_loss(&model, model.params(), &coords, &patches, true);
    loss.backward().unwrap();
    let grads: Vec<Vec<f64>> = leaves.iter().map(|l| l.grad().unwrap()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
    let mut params = model.params().clone();
    let mut worst = 0.0f64;
    let mut probed = 0;
    for (i, g) in grads.iter().enumerate() {
        let n = g.len();
        let picks: Vec<usize> = if n <= per_tensor {
            (0..n).collect()
        } else {
            rand::seq::index::sample(&mut rng, n, per_tensor).into_vec()
        };
        for j in picks {
            let id = lpfc::tensor::ParamId(i);
            let x0 = params.get(id).values[j];
            params.get_mut(id).values[j] = x0 + FD_STEP;
            let up = single_loss(&model, &params, &coords, &patches, false).0.item();
            params.get_mut(id).values[j] = x0 - FD_STEP;
            let down = single_loss(&model, &params, &coords, &patches, false).0.item();
            params.get_mut(id).values[j] = x0;
            worst = worst.max(rel_err(g[j], (up - down) / (2.0 * FD_STEP)));
            probed += 1;
        }
    }
    (worst, probed)
}
