//! Plane labels of patches straddling a dihedral edge, for several opening
//! angles and both thresholds, written as coloured PLY files.

use lpfc::data::{gen_shape, write_ply, Coloring, ShapeKind};
use lpfc::patch::{error_distance, extract_patch, label_patch, normalize_errors, LabelConfig, SpatialIndex};

fn main() -> lpfc::Result<()> {
    let cfg = LabelConfig::default();
    for angle in [45.0, 90.0, 135.0] {
        let cloud = gen_shape(ShapeKind::dihedral(angle), 20_000, 1)?;
        let index = SpatialIndex::build(&cloud.points)?;
        // The face-A sample nearest to the edge, away from the borders.
        let center = (0..cloud.len())
            .filter(|&i| cloud.points[i][2] == 0.0 && cloud.points[i][1].abs() < 0.2)
            .min_by(|&a, &b| cloud.points[a][0].total_cmp(&cloud.points[b][0]))
            .expect("face A is sampled");
        for radius in [0.02, 0.05] {
            let mut patch = extract_patch(&cloud, &index, center, radius, 500, 0)?;
            label_patch(&mut patch, &cfg)?;
            let labels = patch.plane_labels.clone().unwrap();
            let p = normalize_errors(&error_distance(patch.gt_point_normals.as_ref().unwrap(), patch.gt_center_normal.unwrap()));
            let planes = labels.iter().filter(|&&l| l).count();
            println!(
                "angle {angle:>5}° r={radius}: θ={} -> {planes}/{} plane points; normalized error of the other face {:.4}",
                cfg.effective_theta(radius),
                labels.len(),
                p.iter().copied().fold(0.0, f64::max)
            );
            let mut rows: Vec<(usize, bool)> = patch.source_indices.iter().copied().zip(labels).collect();
            rows.sort_unstable();
            rows.dedup();
            let (keep, flags): (Vec<usize>, Vec<bool>) = rows.into_iter().unzip();
            write_ply(&cloud.select(&keep), Coloring::Labels(&flags), format!("labels_{angle}_{radius}.ply"))?;
        }
    }
    Ok(())
}
