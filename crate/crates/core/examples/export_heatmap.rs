//! Colours each point of a noisy cube by its PCA angle error and writes
//! the result as an ASCII PLY file.

use lpfc::data::{add_noise, gen_shape, write_ply, Coloring, NoiseSpec};
use lpfc::eval::{evaluate, BaselineEstimator, BaselineKind};

fn main() -> lpfc::Result<()> {
    let cloud = add_noise(&gen_shape("cube".parse()?, 20_000, 4)?, NoiseSpec { sigma: 0.0065, seed: 5 })?;
    let e = evaluate(&cloud, &BaselineEstimator { kind: BaselineKind::Pca, radius: 0.05 }, 1)?;
    let mut angles = vec![f64::NAN; cloud.len()];
    for (&i, a) in e.points.iter().zip(&e.angles) {
        angles[i] = a.unwrap_or(f64::NAN);
    }
    write_ply(&cloud, Coloring::Heatmap(&angles), "cube_heatmap.ply")?;
    let bad = angles.iter().filter(|&&a| a > 30.0).count();
    println!("rmse {:.2}°, {bad} points above 30° (near edges); wrote cube_heatmap.ply", e.rmse);
    Ok(())
}
