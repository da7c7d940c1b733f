//! Acceptance runner: one `[PASS]`, `[FAIL]` or `[SKIP]` line per criterion,
//! followed by indented diagnostics.
//!
//! Environment:
//! - `LPFC_ACCEPTANCE_ONLY=1,3` runs a subset of the criteria.
//! - `LPFC_ACCEPTANCE_STRICT=1` makes any failure a nonzero exit status.
//! - `LPFC_PCPNET_ROOT` points at the PCPNet dataset for criterion 7.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use lpfc::data::{add_noise, gen_shape, NoiseSpec, PointCloud, ShapeKind};
use lpfc::eval::{
    baseline_sweep, evaluate, load_pcpnet_categories, unoriented_angle, BaselineEstimator, BaselineKind,
    MultiScaleEstimator, SingleScaleEstimator, PCPNET_TEST_SPLITS,
};
use lpfc::models::{
    batch_coords, loss_normal_per_sample, quat_to_rot, ModelConfig, MultiScaleModel, SingleScaleModel,
};
use lpfc::patch::{derive_seed, extract_patch, label_patch, normalize_errors, LabelConfig, Patch, SpatialIndex};
use lpfc::tensor::Tensor;
use lpfc::trainer::{build_dataset, train_multi, train_single, CheckpointPlan, MultiTrainOptions, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass,
    Fail,
    Skip,
}

struct Report {
    outcome: Outcome,
    summary: String,
    details: Vec<String>,
}

impl Report {
    fn new(pass: bool, summary: impl Into<String>, details: Vec<String>) -> Self {
        Report {
            outcome: if pass { Outcome::Pass } else { Outcome::Fail },
            summary: summary.into(),
            details,
        }
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn noisy(kind: &str, n: usize, sigma: f64, seed: u64) -> PointCloud {
    let base = gen_shape(kind.parse::<ShapeKind>().unwrap(), n, seed).unwrap();
    let mut c = add_noise(&base, NoiseSpec { sigma, seed: derive_seed(seed, 0xA0, 1) }).unwrap();
    c.name = format!("{kind} σ={sigma}");
    c
}

// ---------------------------------------------------------------- 1

fn criterion_1() -> Report {
    let t = Instant::now();
    let prims = common::primitive_gradient_errors();
    let prim_worst = prims.iter().map(|p| p.1).fold(0.0, f64::max);
    let failing: Vec<String> = prims
        .iter()
        .filter(|p| !(p.1 < 1e-4))
        .map(|(n, e)| format!("{n}: {e:.3e}"))
        .collect();
    let (model_worst, probed) = common::model_gradient_error(64, 200, 11);
    let elapsed = t.elapsed();
    let pass = failing.is_empty() && model_worst < 1e-3 && elapsed < Duration::from_secs(120);
    let mut details = vec![
        format!("{} primitives, worst relative error {prim_worst:.3e} (limit 1e-4)", prims.len()),
        format!("reduced model K=64 F=128: {probed} parameter entries, worst relative error {model_worst:.3e} (limit 1e-3)"),
        format!("runtime {:.1} s (limit 120 s)", secs(elapsed)),
    ];
    details.extend(failing);
    Report::new(pass, "finite-difference gradient suite", details)
}

// ---------------------------------------------------------------- 2

/// Face of a dihedral sample, read off its coordinates: face A is the z = 0
/// half-plane, face B the rotated one.
fn dihedral_face(p: [f64; 3]) -> bool {
    p[2] == 0.0
}

fn criterion_2() -> Report {
    let cfg = LabelConfig::default();
    let radius = 0.05;
    let mut mismatched = 0usize;
    let mut total = 0usize;
    let mut two_face = 0usize;
    for i in 0..50 {
        let angle = 30.0 + 120.0 * i as f64 / 49.0;
        let cloud = gen_shape(ShapeKind::dihedral(angle), 5000, 100 + i).unwrap();
        let index = SpatialIndex::build(&cloud.points).unwrap();
        let abs = radius * cloud.bbox_diagonal();
        // Centre: the sample closest to a point at a quarter radius from the
        // edge on face A, so that the patch straddles both faces.
        let target = [0.25 * abs, 0.0, 0.0];
        let d2 = |p: &[f64; 3]| (0..3).map(|a| (p[a] - target[a]).powi(2)).sum::<f64>();
        let center = (0..cloud.len()).min_by(|&a, &b| d2(&cloud.points[a]).total_cmp(&d2(&cloud.points[b]))).unwrap();
        let mut patch = extract_patch(&cloud, &index, center, radius, 500, i).unwrap();
        label_patch(&mut patch, &cfg).unwrap();
        let labels = patch.plane_labels.as_ref().unwrap();
        let center_face = dihedral_face(cloud.points[center]);
        let faces: Vec<bool> = patch.source_indices.iter().map(|&s| dihedral_face(cloud.points[s])).collect();
        let both = faces.iter().any(|&f| f != center_face);
        two_face += usize::from(both);
        for (&f, &l) in faces.iter().zip(labels) {
            total += 1;
            mismatched += usize::from(l != (f == center_face));
        }
    }
    let mut plane_bad = 0usize;
    let mut plane_total = 0usize;
    for i in 0..10 {
        let cloud = gen_shape("plane".parse().unwrap(), 5000, 300 + i).unwrap();
        let index = SpatialIndex::build(&cloud.points).unwrap();
        for c in (0..5).map(|j| j * 997 + i as usize) {
            let mut patch = extract_patch(&cloud, &index, c, radius, 500, c as u64).unwrap();
            label_patch(&mut patch, &cfg).unwrap();
            let labels = patch.plane_labels.unwrap();
            plane_total += labels.len();
            plane_bad += labels.iter().filter(|&&l| !l).count();
        }
    }
    let pass = mismatched == 0 && plane_bad == 0 && two_face == 50;
    Report::new(
        pass,
        "plane labels match the two-face partition",
        vec![
            format!("dihedral 30°–150°: {two_face}/50 patches straddle the edge, {mismatched}/{total} labels disagree with the geometric face partition"),
            format!("single-plane patches: {plane_bad}/{plane_total} points labelled as error points"),
        ],
    )
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Report {
    let t = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    let sphere = gen_shape("sphere".parse().unwrap(), 10_000, 5).unwrap();
    let plane = gen_shape("plane".parse().unwrap(), 10_000, 6).unwrap();
    let rmse = |cloud: &PointCloud, kind: BaselineKind| evaluate(cloud, &BaselineEstimator { kind, radius: 0.05 }, 1).unwrap();
    let sp = rmse(&sphere, BaselineKind::Pca);
    let sj = rmse(&sphere, BaselineKind::Jet);
    let pp = rmse(&plane, BaselineKind::Pca);
    let pj = rmse(&plane, BaselineKind::Jet);
    pass &= sp.rmse < 2.0 && sj.rmse < 2.0 && sj.rmse <= sp.rmse;
    pass &= pp.rmse < 1e-6 && pj.rmse < 1e-6;
    pass &= sp.excluded + sj.excluded + pp.excluded + pj.excluded == 0;
    let elapsed = t.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    details.push(format!("sphere 10k r=0.05: PCA {:.4}°, jet {:.4}° (limit 2°, jet ≤ PCA)", sp.rmse, sj.rmse));
    details.push(format!("plane 10k r=0.05: PCA {:.2e}°, jet {:.2e}° (limit 1e-6°)", pp.rmse, pj.rmse));
    details.push(format!(
        "excluded points: {}; runtime {:.1} s (limit 60 s)",
        sp.excluded + sj.excluded + pp.excluded + pj.excluded,
        secs(elapsed)
    ));
    Report::new(pass, "PCA and jet baselines on noiseless shapes", details)
}

// ---------------------------------------------------------------- 4

const SMOKE_KINDS: [&str; 4] = ["plane", "sphere", "dihedral:60", "dihedral:120"];
const SMOKE_NOISE: [f64; 2] = [0.0, 0.012];
/// Patch size used by the training experiments; the criterion fixes the
/// optimiser, widths and data but not the patch size.
const SMOKE_K: usize = 128;

fn smoke_clouds(seed: u64) -> Vec<PointCloud> {
    let mut out = Vec::new();
    for (i, kind) in SMOKE_KINDS.iter().enumerate() {
        for (j, &sigma) in SMOKE_NOISE.iter().enumerate() {
            out.push(noisy(kind, 10_000, sigma, derive_seed(seed, i as u64, j as u64)));
        }
    }
    out
}

fn criterion_4() -> Report {
    let t = Instant::now();
    let train = smoke_clouds(1);
    let cfg = TrainConfig {
        radii: vec![0.05],
        batch_size_single: 64,
        learning_rate: 1e-4,
        momentum: 0.9,
        epochs: 20,
        patches_per_shape: 500,
        k: SMOKE_K,
        seed: 0,
        ..TrainConfig::default()
    };
    let dataset = build_dataset(&train, &cfg).unwrap();
    let mut model = SingleScaleModel::new(&ModelConfig::reduced(), 0).unwrap();
    let history = train_single(&dataset, 0, &mut model, &cfg, &CheckpointPlan::default()).unwrap();
    let train_time = t.elapsed();

    let totals: Vec<f64> = history.iter().map(|h| h.total).collect();
    let monotone = totals.windows(2).all(|w| w[1] < w[0]);
    let decreased = totals.last() < totals.first();
    let pass_a = monotone && decreased;

    // Plane classifier on held-out dihedral patches.
    let held_out = smoke_clouds(2);
    let dihedrals: Vec<PointCloud> = held_out.iter().filter(|c| c.name.starts_with("dihedral")).cloned().collect();
    let eval_cfg = TrainConfig { patches_per_shape: 200, seed: 9, ..cfg.clone() };
    let eval_set = build_dataset(&dihedrals, &eval_cfg).unwrap();
    let (mut correct, mut points, mut positives) = (0usize, 0usize, 0usize);
    for chunk in eval_set.samples.chunks(64) {
        let patches: Vec<&Patch> = chunk.iter().map(|s| &s.patches[0]).collect();
        for (pred, patch) in model.predict(&patches).unwrap().iter().zip(&patches) {
            for (&p, &l) in pred.plane_probs.iter().zip(patch.plane_labels.as_ref().unwrap()) {
                correct += usize::from((p > 0.5) == l);
                positives += usize::from(l);
                points += 1;
            }
        }
    }
    let accuracy = correct as f64 / points as f64;
    let majority = (positives.max(points - positives)) as f64 / points as f64;
    let pass_b = accuracy >= 0.9;

    // RMSE against PCA on the noisy held-out clouds.
    let net = SingleScaleEstimator { model: &model, radius: 0.05, k: SMOKE_K, seed: 4 };
    let pca = BaselineEstimator { kind: BaselineKind::Pca, radius: 0.05 };
    let mut rows = Vec::new();
    let (mut net_sum, mut pca_sum, mut n_noisy) = (0.0, 0.0, 0);
    for cloud in &held_out {
        let mut c = cloud.clone();
        c.eval_indices = Some((0..400).map(|i| i * 25).collect());
        let a = evaluate(&c, &net, 1).unwrap();
        let b = evaluate(&c, &pca, 1).unwrap();
        rows.push(format!("  {:22} net {:6.2}°  PCA {:6.2}°", c.name, a.rmse, b.rmse));
        if c.name.ends_with("σ=0.012") {
            net_sum += a.rmse;
            pca_sum += b.rmse;
            n_noisy += 1;
        }
    }
    let (net_avg, pca_avg) = (net_sum / n_noisy as f64, pca_sum / n_noisy as f64);
    let pass_c = net_avg <= pca_avg;
    let elapsed = t.elapsed();
    let pass_t = elapsed <= Duration::from_secs(30 * 60);

    let mut details = vec![
        format!(
            "dataset {} patches, K={SMOKE_K}, reduced widths, 20 epochs, batch 64, lr 1e-4, momentum 0.9; training {:.0} s",
            dataset.len(),
            secs(train_time)
        ),
        format!(
            "(a) {}: L_total epoch 1 {:.5} -> epoch 20 {:.5}, strictly decreasing every epoch: {monotone}",
            verdict(pass_a),
            totals[0],
            totals[totals.len() - 1]
        ),
        format!(
            "(b) {}: held-out dihedral plane-label accuracy {:.2}% over {points} points (limit 90%; majority class {:.2}%)",
            verdict(pass_b),
            100.0 * accuracy,
            100.0 * majority
        ),
        format!(
            "(c) {}: σ=0.012 held-out mean RMSE net {net_avg:.2}° vs PCA {pca_avg:.2}° (net must be ≤ PCA)",
            verdict(pass_c)
        ),
    ];
    details.extend(rows);
    details.push(format!("runtime {:.0} s (limit 1800 s)", secs(elapsed)));
    Report::new(pass_a && pass_b && pass_c && pass_t, "single-scale training smoke", details)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

// ---------------------------------------------------------------- 5

const TREND_KINDS: [&str; 4] = ["sphere", "dihedral:60", "dihedral:90", "cube"];
const TREND_RADII: [f64; 2] = [0.03, 0.05];
const TREND_K: usize = 64;
const TREND_POINTS: usize = 40_000;

fn trend_training_clouds() -> Vec<PointCloud> {
    let mut out = Vec::new();
    for (i, kind) in TREND_KINDS.iter().enumerate() {
        for (j, &sigma) in [0.0, 0.012].iter().enumerate() {
            out.push(noisy(kind, TREND_POINTS, sigma, derive_seed(50, i as u64, j as u64)));
        }
    }
    out
}

/// Largest-scale fraction and median weight of the larger scale on one
/// cloud.
fn trend_eval(model: &MultiScaleModel, cloud: &PointCloud) -> (f64, f64, f64) {
    let est = MultiScaleEstimator { model, k: TREND_K, seed: 3 };
    let res = evaluate(cloud, &est, 1).unwrap();
    let hist = res.scale_histogram.clone().unwrap();
    let frac = hist[1] as f64 / hist.iter().sum::<usize>() as f64;
    let index = SpatialIndex::build(&cloud.points).unwrap();
    let mut w = Vec::new();
    for &c in cloud.eval_indices.as_ref().unwrap() {
        let patches: Option<Vec<Patch>> = TREND_RADII
            .iter()
            .enumerate()
            .map(|(s, &r)| extract_patch(cloud, &index, c, r, TREND_K, derive_seed(3, c as u64, s as u64)).ok())
            .collect();
        if let Some(ps) = patches {
            let batches: Vec<Vec<&Patch>> = ps.iter().map(|p| vec![p]).collect();
            w.push(model.predict(&batches).unwrap()[0].scale_weights.as_ref().unwrap()[1]);
        }
    }
    w.sort_by(f64::total_cmp);
    (frac, w[w.len() / 2], res.rmse)
}

fn criterion_5() -> Report {
    let t = Instant::now();
    let mut details = Vec::new();

    // S=1 reproduction of the single-scale loop.
    let small: Vec<PointCloud> = vec![noisy("sphere", 3000, 0.0065, 1), noisy("dihedral:90", 3000, 0.0, 2)];
    let cfg1 = TrainConfig {
        radii: vec![0.05],
        batch_size_single: 16,
        batch_size_multi: 16,
        learning_rate: 1e-3,
        epochs: 3,
        patches_per_shape: 40,
        k: 32,
        seed: 21,
        ..TrainConfig::default()
    };
    let ds1 = build_dataset(&small, &cfg1).unwrap();
    let mut single = SingleScaleModel::new(&ModelConfig::reduced(), cfg1.seed).unwrap();
    let h_single = train_single(&ds1, 0, &mut single, &cfg1, &CheckpointPlan::default()).unwrap();
    let mut multi1 = MultiScaleModel::new(&ModelConfig::reduced(), &cfg1.radii, cfg1.seed).unwrap();
    let h_multi = train_multi(&ds1, &mut multi1, &cfg1, MultiTrainOptions::default(), &CheckpointPlan::default()).unwrap();
    let bitwise = h_single == h_multi && single.params() == multi1.subnets()[0].params();
    details.push(format!(
        "S=1 vs single-scale, {} patches × {} epochs: loss histories bitwise equal: {}, final parameters equal: {}",
        ds1.len(),
        cfg1.epochs,
        h_single == h_multi,
        single.params() == multi1.subnets()[0].params()
    ));

    // Selection trend with S=2: subnets pretrained per radius, then the
    // scale network trained on top of the frozen subnets.
    let train = trend_training_clouds();
    let pre_cfg = |r: f64| TrainConfig {
        radii: vec![r],
        batch_size_single: 64,
        learning_rate: 1e-2,
        momentum: 0.9,
        epochs: 50,
        patches_per_shape: 500,
        k: TREND_K,
        seed: 0,
        ..TrainConfig::default()
    };
    let mut subnets = Vec::new();
    for (s, &r) in TREND_RADII.iter().enumerate() {
        let cfg = pre_cfg(r);
        let ds = build_dataset(&train, &cfg).unwrap();
        let mut net = SingleScaleModel::new(&ModelConfig::reduced(), s as u64).unwrap();
        let h = train_single(&ds, 0, &mut net, &cfg, &CheckpointPlan::default()).unwrap();
        details.push(format!(
            "subnet r={r}: L_normal {:.4} -> {:.4} over {} epochs",
            h[0].normal,
            h[h.len() - 1].normal,
            h.len()
        ));
        subnets.push(net);
    }
    let mut model = MultiScaleModel::from_subnets(subnets, &TREND_RADII, 0).unwrap();
    let multi_cfg = TrainConfig {
        radii: TREND_RADII.to_vec(),
        batch_size_multi: 16,
        learning_rate: 1e-3,
        momentum: 0.9,
        epochs: 10,
        patches_per_shape: 500,
        k: TREND_K,
        seed: 0,
        ..TrainConfig::default()
    };
    let ds = build_dataset(&train, &multi_cfg).unwrap();
    let h = train_multi(&ds, &mut model, &multi_cfg, MultiTrainOptions { freeze_subnets: true }, &CheckpointPlan::default()).unwrap();
    details.push(format!(
        "scale network: L_multi {:.4} -> {:.4} over {} epochs (subnets frozen)",
        h[0].total,
        h[h.len() - 1].total,
        h.len()
    ));

    let (mut clean_frac, mut noisy_frac) = (0.0, 0.0);
    let test_kinds = ["sphere", "dihedral:60", "cube"];
    for (i, kind) in test_kinds.iter().enumerate() {
        let mut row = format!("  {kind:12}");
        for sigma in [0.0, 0.012] {
            let mut c = noisy(kind, TREND_POINTS, sigma, derive_seed(77, i as u64, 0));
            c.eval_indices = Some((0..400).map(|j| j * 97).collect());
            let (frac, w_med, rmse) = trend_eval(&model, &c);
            if sigma == 0.0 {
                clean_frac += frac;
            } else {
                noisy_frac += frac;
            }
            row.push_str(&format!(
                "  σ={sigma}: large-scale fraction {:5.1}%, median large-scale weight {w_med:.3}, RMSE {rmse:.2}°",
                100.0 * frac
            ));
        }
        details.push(row);
    }
    clean_frac /= test_kinds.len() as f64;
    noisy_frac /= test_kinds.len() as f64;
    let trend = noisy_frac > clean_frac;
    details.push(format!(
        "large-scale selection fraction σ=0.012 {:.1}% vs σ=0 {:.1}% (must be strictly larger): {}",
        100.0 * noisy_frac,
        100.0 * clean_frac,
        verdict(trend)
    ));
    details.push(format!("runtime {:.0} s", secs(t.elapsed())));
    Report::new(bitwise && trend, "multi-scale selection trend and S=1 equivalence", details)
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let unit = |rng: &mut ChaCha8Rng| -> [f64; 3] { [0; 3].map(|_: i32| rng.random_range(-1.0..1.0)) };
    let mut details = Vec::new();

    let mut angle_ok = true;
    for _ in 0..10_000 {
        let (a, b) = (unit(&mut rng), unit(&mut rng));
        let neg = a.map(|x| -x);
        let ab = unoriented_angle(a, b).unwrap();
        angle_ok &= ab == unoriented_angle(b, a).unwrap() && ab == unoriented_angle(neg, b).unwrap();
    }
    details.push(format!("unoriented angle symmetric and sign-invariant bitwise on 10^4 pairs: {angle_ok}"));

    let n = 2000;
    let pred: Vec<f64> = (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let gt: Vec<f64> = (0..n).flat_map(|_| {
        let v = unit(&mut rng);
        let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        v.map(|x| x / l)
    }).collect();
    let p = Tensor::new(pred.clone(), &[n, 3]).unwrap();
    let pn = Tensor::new(pred.iter().map(|x| -x).collect(), &[n, 3]).unwrap();
    let g = Tensor::new(gt, &[n, 3]).unwrap();
    let loss_ok = loss_normal_per_sample(&p, &g).unwrap().values() == loss_normal_per_sample(&pn, &g).unwrap().values();
    details.push(format!("normal loss sign-invariant bitwise on {n} samples: {loss_ok}"));

    let mut range_ok = true;
    for _ in 0..1000 {
        let k = rng.random_range(1..50);
        let errs: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();
        range_ok &= normalize_errors(&errs).iter().all(|&v| (0.0..1.0).contains(&v));
    }
    details.push(format!("normalized errors in [0, 1) on 1000 random patches: {range_ok}"));

    let q: Vec<f64> = (0..4 * 10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r = quat_to_rot(&Tensor::new(q, &[10_000, 4]).unwrap()).unwrap();
    let mut ortho = 0.0f64;
    for m in r.values().chunks(9) {
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[3 * k + i] * m[3 * k + j]).sum();
                ortho = ortho.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    let ortho_ok = ortho < 1e-9;
    details.push(format!("‖RᵀR − I‖∞ over 10^4 random quaternions: {ortho:.2e} (limit 1e-9)"));

    let model = MultiScaleModel::new(&ModelConfig::reduced(), &[0.01, 0.03, 0.05], 5).unwrap();
    let per_scale: Vec<Vec<Patch>> = (0..3).map(|s| common::random_patches(32, 24, 40 + s)).collect();
    let coords: Vec<Tensor> = per_scale
        .iter()
        .map(|ps| batch_coords(&ps.iter().collect::<Vec<_>>()).unwrap())
        .collect();
    let out = model.forward(&model.bind(false, false), &coords).unwrap();
    let sum_err = out
        .weights
        .values()
        .chunks(3)
        .map(|w| (w.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let softmax_ok = sum_err < 1e-9;
    details.push(format!("scale weights sum to 1 within {sum_err:.2e} (limit 1e-9)"));
    let mut select_ok = true;
    for (b, w) in out.weights.values().chunks(3).enumerate() {
        let mut best = 0;
        for s in 1..3 {
            if w[s] > w[best] {
                best = s;
            }
        }
        let row = &out.per_scale[best].normals.values()[3 * b..3 * b + 3];
        select_ok &= out.selected[b] == best && out.normals[b].as_slice() == row;
    }
    let refs: Vec<Vec<&Patch>> = per_scale.iter().map(|ps| ps.iter().collect()).collect();
    for (b, pred) in model.predict(&refs).unwrap().iter().enumerate() {
        select_ok &= pred.normal == out.normals[b] && pred.selected_scale == Some(out.selected[b]);
    }
    details.push(format!("arg-max selection equals the reported normal bitwise on 32 samples: {select_ok}"));

    let pass = angle_ok && loss_ok && range_ok && ortho_ok && softmax_ok && select_ok;
    Report::new(pass, "metric and model identities", details)
}

// ---------------------------------------------------------------- 7

const PAPER_PCA_AVERAGE: f64 = 16.25;

fn pcpnet_root() -> Option<PathBuf> {
    let candidates = std::env::var_os("LPFC_PCPNET_ROOT")
        .map(PathBuf::from)
        .into_iter()
        .chain(["/root/data/pcpnet", "data/pcpnet"].map(PathBuf::from));
    candidates.into_iter().find(|p| PCPNET_TEST_SPLITS.iter().all(|(_, f)| p.join(f).is_file()))
}

fn criterion_7() -> Report {
    let Some(root) = pcpnet_root() else {
        return Report {
            outcome: Outcome::Skip,
            summary: "PCPNet end-to-end check".into(),
            details: vec!["dataset not found; set LPFC_PCPNET_ROOT to the PCPNet directory".into()],
        };
    };
    let cats = load_pcpnet_categories(&root).unwrap();
    let radii = [0.01, 0.02, 0.03, 0.05, 0.07];
    let (reports, best) = baseline_sweep(&cats, BaselineKind::Pca, &radii, 1).unwrap();
    let avg = reports[best].overall_average;
    let pass = (avg - PAPER_PCA_AVERAGE).abs() <= 3.0;
    let mut details = vec![format!(
        "best PCA radius {} with average {avg:.2}° (target {PAPER_PCA_AVERAGE} ± 3)",
        radii[best]
    )];
    details.extend(lpfc::eval::format_table(&reports).lines().map(|l| format!("  {l}")));
    Report::new(pass, "PCPNet end-to-end check", details)
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("LPFC_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let strict = std::env::var("LPFC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [(usize, fn() -> Report); 7] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
    ];
    let mut failed = 0;
    for (id, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let report = run();
        let tag = match report.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => {
                failed += 1;
                "FAIL"
            }
            Outcome::Skip => "SKIP",
        };
        println!("[{tag}] criterion {id}: {}", report.summary);
        for d in &report.details {
            println!("    {d}");
        }
    }
    println!("acceptance: {failed} criteria failing");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
