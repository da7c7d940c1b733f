//! Trains a small single-scale network with the plane-label loss on noisy
//! spheres and cylinders, saves it, and compares it with PCA on held-out
//! clouds. Curved shapes are used because on plane-heavy data a short run
//! settles on predicting one constant normal.
//!
//! Usage: `cargo run --release --example train_single [epochs]`

use lpfc::data::{add_noise, gen_shape, NoiseSpec, PointCloud};
use lpfc::eval::{evaluate, BaselineEstimator, BaselineKind, SingleScaleEstimator};
use lpfc::models::{ModelConfig, SingleScaleModel};
use lpfc::trainer::{build_dataset, history_csv, train_single, CheckpointPlan, TrainConfig};

fn clouds(seed: u64, points: usize) -> lpfc::Result<Vec<PointCloud>> {
    let mut out = Vec::new();
    for (i, kind) in ["sphere", "cylinder", "sphere", "cylinder"].iter().enumerate() {
        let base = gen_shape(kind.parse()?, points, seed + i as u64)?;
        let mut c = add_noise(&base, NoiseSpec { sigma: 0.0065, seed: seed + 10 + i as u64 })?;
        c.name = format!("{kind}_{i}");
        out.push(c);
    }
    Ok(out)
}

fn main() -> lpfc::Result<()> {
    let epochs = std::env::args().nth(1).map_or(30, |s| s.parse().expect("epochs must be an integer"));
    let cfg = TrainConfig {
        radii: vec![0.05],
        k: 64,
        epochs,
        learning_rate: 1e-2,
        patches_per_shape: 300,
        ..TrainConfig::default()
    };
    let data = build_dataset(&clouds(1, 10_000)?, &cfg)?;
    let mut model = SingleScaleModel::new(&ModelConfig::reduced(), cfg.seed)?;
    let plan = CheckpointPlan { path: Some("single.ckpt".into()) };
    let history = train_single(&data, 0, &mut model, &cfg, &plan)?;
    print!("{}", history_csv(&history));

    for mut cloud in clouds(50, 10_000)? {
        cloud.eval_indices = Some((0..cloud.len()).step_by(25).collect());
        let net = evaluate(&cloud, &SingleScaleEstimator { model: &model, radius: 0.05, k: cfg.k, seed: 0 }, 1)?;
        let pca = evaluate(&cloud, &BaselineEstimator { kind: BaselineKind::Pca, radius: 0.05 }, 1)?;
        println!("{:16} net {:6.2}°  pca {:6.2}°", cloud.name, net.rmse, pca.rmse);
    }
    Ok(())
}
