use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SpatialIndex;
use crate::data::{PointCloud, Vec3};
use crate::error::{Error, Result};

/// Points per patch.
pub const DEFAULT_K: usize = 500;

/// A fixed-size neighbourhood translated to its centre and scaled by the
/// absolute radius, so every row lies in the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub center_index: usize,
    /// Radius as a fraction of the cloud's bounding-box diagonal.
    pub radius: f64,
    pub coords: Vec<Vec3>,
    pub source_indices: Vec<usize>,
    pub gt_center_normal: Option<Vec3>,
    pub gt_point_normals: Option<Vec<Vec3>>,
    pub plane_labels: Option<Vec<bool>>,
}

impl Patch {
    pub fn k(&self) -> usize {
        self.coords.len()
    }

    /// Number of distinct cloud points in the patch (before padding).
    pub fn distinct_points(&self) -> usize {
        let mut s = self.source_indices.clone();
        s.sort_unstable();
        s.dedup();
        s.len()
    }
}

/// Mixes a base seed with two stream identifiers (splitmix64 finaliser).
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Gathers the radius-`radius` neighbourhood of point `center` (radius as a
/// fraction of the bbox diagonal) and resamples it to exactly `k` rows.
///
/// Oversized neighbourhoods keep the centre plus a uniform subset without
/// replacement; undersized ones are padded by drawing existing neighbours
/// with replacement. Ground-truth normals follow the same row order.
pub fn extract_patch(
    cloud: &PointCloud,
    index: &SpatialIndex,
    center: usize,
    radius: f64,
    k: usize,
    seed: u64,
) -> Result<Patch> {
    if center >= cloud.len() {
        return Err(Error::invalid(format!("centre {center} out of range for {} points", cloud.len())));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("patch radius must be positive, got {radius}")));
    }
    if k == 0 {
        return Err(Error::invalid("patch size must be at least 1"));
    }
    let abs_radius = radius * cloud.bbox_diagonal();
    let c = cloud.points[center];
    let neighbors: Vec<usize> = index
        .radius_query(c, abs_radius)
        .into_iter()
        .filter(|&i| i != center)
        .collect();
    if neighbors.is_empty() {
        return Err(Error::Degenerate(format!(
            "point {center} has no neighbours within radius {radius}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(k);
    rows.push(center);
    if neighbors.len() + 1 >= k {
        let mut pick = sample(&mut rng, neighbors.len(), k - 1).into_vec();
        pick.sort_unstable();
        rows.extend(pick.into_iter().map(|j| neighbors[j]));
    } else {
        rows.extend_from_slice(&neighbors);
        let real = rows.len();
        for _ in real..k {
            let j = rng.random_range(0..real);
            rows.push(rows[j]);
        }
    }

    let inv = 1.0 / abs_radius;
    let coords = rows
        .iter()
        .map(|&i| {
            let p = cloud.points[i];
            [(p[0] - c[0]) * inv, (p[1] - c[1]) * inv, (p[2] - c[2]) * inv]
        })
        .collect();
    let (gt_center_normal, gt_point_normals) = match &cloud.normals {
        Some(n) => (Some(n[center]), Some(rows.iter().map(|&i| n[i]).collect())),
        None => (None, None),
    };
    Ok(Patch {
        center_index: center,
        radius,
        coords,
        source_indices: rows,
        gt_center_normal,
        gt_point_normals,
        plane_labels: None,
    })
}
