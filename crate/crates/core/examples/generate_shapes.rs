//! Writes every synthetic shape at the four noise levels, plus the two
//! density variations, as `.xyz` + `.normals` pairs with a split file.
//!
//! Usage: `cargo run --release --example generate_shapes [out_dir]`

use std::fs;
use std::path::PathBuf;

use lpfc::data::perturb::NOISE_LEVELS;
use lpfc::data::{add_noise, apply_density, gen_shape, save_cloud, DensityPattern, NoiseSpec};

fn main() -> lpfc::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic".into()));
    fs::create_dir_all(&out).map_err(|e| lpfc::Error::Io { path: out.clone(), source: e })?;
    let mut names = Vec::new();
    for (i, kind) in ["plane", "sphere", "cylinder", "cube", "dihedral:60", "dihedral:120"].iter().enumerate() {
        let base = gen_shape(kind.parse()?, 20_000, i as u64)?;
        for (j, &sigma) in NOISE_LEVELS.iter().enumerate() {
            let mut c = add_noise(&base, NoiseSpec { sigma, seed: 100 + j as u64 })?;
            c.name = format!("{}_n{j}", kind.replace(':', "_"));
            save_cloud(&c, out.join(format!("{}.xyz", c.name)))?;
            names.push(c.name);
        }
        let patterns = [
            ("stripes", DensityPattern::Stripes { axis: 0, period: 0.25, p_low: 0.15, p_high: 1.0 }),
            ("gradient", DensityPattern::Gradient { axis: 0, p_low: 0.05, p_high: 1.0 }),
        ];
        for (label, pattern) in patterns {
            let mut c = apply_density(&base, pattern, 7)?;
            c.name = format!("{}_{label}", kind.replace(':', "_"));
            println!("{:24} {:>6} points", c.name, c.len());
            save_cloud(&c, out.join(format!("{}.xyz", c.name)))?;
            names.push(c.name);
        }
    }
    let split = out.join("all.txt");
    fs::write(&split, names.join("\n") + "\n").map_err(|e| lpfc::Error::Io { path: split.clone(), source: e })?;
    println!("wrote {} clouds and {}", names.len(), split.display());
    Ok(())
}
