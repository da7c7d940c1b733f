//! PCA and jet normals across noise levels and neighbourhood sizes.

use lpfc::data::perturb::NOISE_LEVELS;
use lpfc::data::{add_noise, gen_shape, NoiseSpec};
use lpfc::eval::{evaluate, BaselineEstimator, BaselineKind};

fn main() -> lpfc::Result<()> {
    let radii = [0.01, 0.03, 0.05, 0.08];
    for kind in ["sphere", "cylinder", "cube"] {
        let base = gen_shape(kind.parse()?, 10_000, 3)?;
        println!("{kind}");
        print!("  {:>8}", "σ");
        for r in radii {
            print!("  PCA r={r:<5} jet r={r:<5}");
        }
        println!();
        for (j, &sigma) in NOISE_LEVELS.iter().enumerate() {
            let mut cloud = add_noise(&base, NoiseSpec { sigma, seed: j as u64 })?;
            cloud.eval_indices = Some((0..cloud.len()).step_by(10).collect());
            print!("  {sigma:>8}");
            for radius in radii {
                for kind in [BaselineKind::Pca, BaselineKind::Jet] {
                    let e = evaluate(&cloud, &BaselineEstimator { kind, radius }, 1)?;
                    print!("  {:>11.2}", e.rmse);
                }
            }
            println!();
        }
    }
    Ok(())
}
