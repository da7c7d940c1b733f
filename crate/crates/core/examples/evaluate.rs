//! Category report for PCA and jet over synthetic noise categories, in the
//! same text and CSV formats the CLI writes.

use lpfc::data::perturb::NOISE_LEVELS;
use lpfc::data::{add_noise, gen_shape, NoiseSpec, PointCloud};
use lpfc::eval::{evaluate_categories, format_table, BaselineEstimator, BaselineKind};

fn main() -> lpfc::Result<()> {
    let names = ["No Noise", "Small Noise", "Middle Noise", "Large Noise"];
    let bases: Vec<PointCloud> = ["sphere", "cylinder", "cube"]
        .iter()
        .enumerate()
        .map(|(i, k)| gen_shape(k.parse()?, 10_000, i as u64))
        .collect::<lpfc::Result<_>>()?;
    let mut categories = Vec::new();
    for (name, &sigma) in names.iter().zip(&NOISE_LEVELS) {
        let clouds = bases
            .iter()
            .map(|b| {
                let mut c = add_noise(b, NoiseSpec { sigma, seed: 9 })?;
                c.eval_indices = Some((0..c.len()).step_by(20).collect());
                Ok(c)
            })
            .collect::<lpfc::Result<Vec<_>>>()?;
        categories.push((name.to_string(), clouds));
    }
    let mut reports = Vec::new();
    for kind in [BaselineKind::Pca, BaselineKind::Jet] {
        reports.push(evaluate_categories(&categories, &BaselineEstimator { kind, radius: 0.03 }, 1)?);
    }
    println!("{}", format_table(&reports));
    print!("{}", reports[0].to_csv());
    Ok(())
}
