//! Multi-scale training in two stages: each subnet is first pretrained at
//! its own radius, then the scale network learns to pick between them while
//! the subnets stay frozen. Prints which scale it chooses per noise level.

use lpfc::data::{add_noise, gen_shape, NoiseSpec, PointCloud};
use lpfc::eval::{evaluate, MultiScaleEstimator};
use lpfc::models::{ModelConfig, MultiScaleModel, SingleScaleModel};
use lpfc::trainer::{build_dataset, train_multi, train_single, CheckpointPlan, MultiTrainOptions, TrainConfig};

fn noisy(kind: &str, sigma: f64, seed: u64) -> lpfc::Result<PointCloud> {
    let mut c = add_noise(&gen_shape(kind.parse()?, 10_000, seed)?, NoiseSpec { sigma, seed: seed + 1 })?;
    c.name = format!("{kind} σ={sigma}");
    Ok(c)
}

fn main() -> lpfc::Result<()> {
    let radii = vec![0.03, 0.06];
    let mut shapes = Vec::new();
    for (i, kind) in ["sphere", "dihedral:90", "cube"].iter().enumerate() {
        for sigma in [0.0, 0.012] {
            shapes.push(noisy(kind, sigma, 2 * i as u64)?);
        }
    }
    let cfg = TrainConfig { radii: radii.clone(), k: 32, epochs: 25, learning_rate: 1e-2, patches_per_shape: 200, ..TrainConfig::default() };
    let data = build_dataset(&shapes, &cfg)?;
    let mut subnets = Vec::new();
    for s in 0..radii.len() {
        let mut m = SingleScaleModel::new(&ModelConfig::reduced(), cfg.seed + s as u64)?;
        let h = train_single(&data, s, &mut m, &cfg, &CheckpointPlan::default())?;
        println!("subnet r={}: L_total {:.4} -> {:.4}", radii[s], h[0].total, h.last().unwrap().total);
        subnets.push(m);
    }
    let mut model = MultiScaleModel::from_subnets(subnets, &radii, cfg.seed)?;
    let stage2 = TrainConfig { epochs: 5, learning_rate: 1e-3, ..cfg.clone() };
    let h = train_multi(&data, &mut model, &stage2, MultiTrainOptions { freeze_subnets: true }, &CheckpointPlan::default())?;
    println!("scale net: L_multi {:.4} -> {:.4}", h[0].total, h.last().unwrap().total);

    for kind in ["sphere", "cube"] {
        for sigma in [0.0, 0.012] {
            let mut cloud = noisy(kind, sigma, 40)?;
            cloud.eval_indices = Some((0..cloud.len()).step_by(50).collect());
            let e = evaluate(&cloud, &MultiScaleEstimator { model: &model, k: cfg.k, seed: 0 }, 1)?;
            let hist = e.scale_histogram.unwrap();
            let total: usize = hist.iter().sum();
            println!(
                "{:18} rmse {:6.2}°  large-scale share {:.2}",
                cloud.name,
                e.rmse,
                hist[1] as f64 / total as f64
            );
        }
    }
    Ok(())
}
