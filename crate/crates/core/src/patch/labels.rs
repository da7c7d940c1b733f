use serde::{Deserialize, Serialize};

use super::Patch;
use crate::data::Vec3;
use crate::error::{Error, Result};

/// Thresholds for turning normalised normal deviations into plane labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelConfig {
    pub theta: f64,
    /// Looser threshold used when the patch radius is at most `small_scale_cutoff`.
    pub theta_small: f64,
    pub small_scale_cutoff: f64,
    /// Added to the range when normalising deviations.
    pub epsilon: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            theta: 0.5,
            theta_small: 0.8,
            small_scale_cutoff: 0.03,
            epsilon: 0.01,
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("theta", self.theta), ("theta_small", self.theta_small)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn effective_theta(&self, radius: f64) -> f64 {
        if radius <= self.small_scale_cutoff {
            self.theta_small
        } else {
            self.theta
        }
    }
}

/// Per-point deviation `min(‖n_j − n_t‖, ‖n_j + n_t‖)` from the centre normal.
pub fn error_distance(point_normals: &[Vec3], center_normal: Vec3) -> Vec<f64> {
    point_normals
        .iter()
        .map(|n| {
            let mut minus = 0.0;
            let mut plus = 0.0;
            for a in 0..3 {
                minus += (n[a] - center_normal[a]).powi(2);
                plus += (n[a] + center_normal[a]).powi(2);
            }
            minus.sqrt().min(plus.sqrt())
        })
        .collect()
}

/// `(P − min P) / (max P − min P + ε)` with ε = 0.01.
pub fn normalize_errors(errors: &[f64]) -> Vec<f64> {
    normalize_errors_with(errors, LabelConfig::default().epsilon)
}

/// Same as [`normalize_errors`] with an explicit ε.
pub fn normalize_errors_with(errors: &[f64], epsilon: f64) -> Vec<f64> {
    let lo = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    errors.iter().map(|e| (e - lo) / (hi - lo + epsilon)).collect()
}

/// `true` (plane point) where the normalised deviation is at most the
/// radius-dependent threshold.
pub fn plane_labels(normalized: &[f64], config: &LabelConfig, radius: f64) -> Vec<bool> {
    let theta = config.effective_theta(radius);
    normalized.iter().map(|&p| p <= theta).collect()
}

/// Computes and stores the plane labels of a patch with ground-truth normals.
pub fn label_patch(patch: &mut Patch, config: &LabelConfig) -> Result<()> {
    let (Some(center), Some(normals)) = (patch.gt_center_normal, patch.gt_point_normals.as_ref()) else {
        return Err(Error::invalid(format!(
            "patch at point {} has no ground-truth normals",
            patch.center_index
        )));
    };
    let p = normalize_errors_with(&error_distance(normals, center), config.epsilon);
    patch.plane_labels = Some(plane_labels(&p, config, patch.radius));
    Ok(())
}
