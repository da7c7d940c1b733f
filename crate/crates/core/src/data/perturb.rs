//! Coordinate noise and non-uniform density resampling.
//!
//! Both leave the ground-truth normals untouched: they describe the clean
//! surface the perturbed samples came from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::PointCloud;
use crate::error::{Error, Result};

/// The noise levels used for the standard test categories.
pub const NOISE_LEVELS: [f64; 4] = [0.0, 0.00125, 0.0065, 0.012];

/// Gaussian noise with standard deviation `sigma · bbox_diagonal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

pub fn add_noise(cloud: &PointCloud, spec: NoiseSpec) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::invalid("cannot add noise to an empty cloud"));
    }
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(Error::invalid(format!("noise sigma must be non-negative, got {}", spec.sigma)));
    }
    let mut out = cloud.clone();
    if spec.sigma == 0.0 {
        return Ok(out);
    }
    let std = spec.sigma * cloud.bbox_diagonal();
    let normal = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let points = cloud
        .points
        .iter()
        .map(|p| {
            [
                p[0] + normal.sample(&mut rng),
                p[1] + normal.sample(&mut rng),
                p[2] + normal.sample(&mut rng),
            ]
        })
        .collect();
    out.replace_points(points);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityPattern {
    /// Alternating slabs along `axis`, each `period / 2` of the extent wide;
    /// points in the even slabs survive with `p_low`, the rest with `p_high`.
    Stripes {
        axis: usize,
        period: f64,
        p_low: f64,
        p_high: f64,
    },
    /// Survival probability rising linearly from `p_low` to `p_high` along `axis`.
    Gradient { axis: usize, p_low: f64, p_high: f64 },
}

impl DensityPattern {
    fn check(&self) -> Result<()> {
        let (axis, lo, hi) = match *self {
            DensityPattern::Stripes {
                axis,
                period,
                p_low,
                p_high,
            } => {
                if !(period > 0.0 && period.is_finite()) {
                    return Err(Error::invalid(format!("stripe period must be positive, got {period}")));
                }
                (axis, p_low, p_high)
            }
            DensityPattern::Gradient { axis, p_low, p_high } => (axis, p_low, p_high),
        };
        if axis > 2 {
            return Err(Error::invalid(format!("axis {axis} out of range")));
        }
        for p in [lo, hi] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("keep probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn keep_probability(&self, t: f64) -> f64 {
        match *self {
            DensityPattern::Stripes {
                period, p_low, p_high, ..
            } => {
                let slab = (t / (period / 2.0)).floor() as i64;
                if slab % 2 == 0 {
                    p_low
                } else {
                    p_high
                }
            }
            DensityPattern::Gradient { p_low, p_high, .. } => p_low + (p_high - p_low) * t,
        }
    }

    fn axis(&self) -> usize {
        match *self {
            DensityPattern::Stripes { axis, .. } | DensityPattern::Gradient { axis, .. } => axis,
        }
    }
}

/// Randomly thins the cloud according to `pattern`. The result may be empty.
pub fn apply_density(cloud: &PointCloud, pattern: DensityPattern, seed: u64) -> Result<PointCloud> {
    pattern.check()?;
    let axis = pattern.axis();
    let lo = cloud.points.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
    let hi = cloud.points.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
    let extent = hi - lo;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep: Vec<usize> = (0..cloud.len())
        .filter(|&i| {
            let t = if extent > 0.0 { (cloud.points[i][axis] - lo) / extent } else { 0.0 };
            rng.random::<f64>() < pattern.keep_probability(t)
        })
        .collect();
    Ok(cloud.select(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_shape, ShapeKind};

    #[test]
    fn zero_noise_is_identity() {
        let c = gen_shape(ShapeKind::sphere(), 300, 1).unwrap();
        let n = add_noise(&c, NoiseSpec { sigma: 0.0, seed: 4 }).unwrap();
        assert_eq!(n, c);
    }

    #[test]
    fn noise_keeps_normals_and_is_seeded() {
        let c = gen_shape(ShapeKind::sphere(), 300, 1).unwrap();
        let spec = NoiseSpec { sigma: 0.0065, seed: 4 };
        let a = add_noise(&c, spec).unwrap();
        let b = add_noise(&c, spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.normals, c.normals);
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn noise_standard_deviation_matches_sigma() {
        // Unit bbox diagonal: a 1/√3 cube.
        let side = 1.0 / 3f64.sqrt();
        let c = gen_shape(ShapeKind::Cube { side }, 12_000, 2).unwrap();
        assert!((c.bbox_diagonal() - 1.0).abs() < 1e-12);
        let n = add_noise(&c, NoiseSpec { sigma: 0.012, seed: 8 }).unwrap();
        let diffs: Vec<f64> = c
            .points
            .iter()
            .zip(&n.points)
            .flat_map(|(a, b)| (0..3).map(move |k| b[k] - a[k]))
            .collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
        let std = var.sqrt();
        assert!((std - 0.012).abs() < 0.15 * 0.012, "std {std}");
    }

    #[test]
    fn full_keep_probability_is_identity() {
        let c = gen_shape(ShapeKind::plane(), 300, 3).unwrap();
        for pattern in [
            DensityPattern::Gradient { axis: 0, p_low: 1.0, p_high: 1.0 },
            DensityPattern::Stripes { axis: 1, period: 0.2, p_low: 1.0, p_high: 1.0 },
        ] {
            let d = apply_density(&c, pattern, 1).unwrap();
            assert_eq!(d.points, c.points);
            assert_eq!(d.normals, c.normals);
        }
    }

    #[test]
    fn zero_keep_probability_empties_cloud() {
        let c = gen_shape(ShapeKind::plane(), 300, 3).unwrap();
        let d = apply_density(&c, DensityPattern::Gradient { axis: 0, p_low: 0.0, p_high: 0.0 }, 1).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn gradient_thins_one_end() {
        let c = gen_shape(ShapeKind::plane(), 20_000, 5).unwrap();
        let d = apply_density(&c, DensityPattern::Gradient { axis: 0, p_low: 0.1, p_high: 1.0 }, 7).unwrap();
        let decile = |lo: f64, hi: f64| d.points.iter().filter(|p| p[0] >= lo && p[0] < hi).count();
        let first = decile(-0.5, -0.4);
        let last = decile(0.4, 0.5 + 1e-12);
        assert!(last as f64 >= 5.0 * first as f64, "first {first}, last {last}");
    }

    #[test]
    fn density_output_is_a_subset() {
        let c = gen_shape(ShapeKind::sphere(), 2000, 5).unwrap();
        let d = apply_density(&c, DensityPattern::Stripes { axis: 2, period: 0.25, p_low: 0.2, p_high: 0.9 }, 2).unwrap();
        assert!(d.len() < c.len());
        assert!(d.points.iter().all(|p| c.points.contains(p)));
    }

    #[test]
    fn rejects_bad_probabilities() {
        let c = gen_shape(ShapeKind::plane(), 100, 3).unwrap();
        assert!(apply_density(&c, DensityPattern::Gradient { axis: 0, p_low: -0.1, p_high: 1.0 }, 1).is_err());
        assert!(apply_density(&c, DensityPattern::Gradient { axis: 0, p_low: 0.1, p_high: 1.5 }, 1).is_err());
    }
}
