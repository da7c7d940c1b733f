//! Single-scale normal network with a per-point plane classifier, the
//! multi-scale network with learned scale selection, and their losses.

mod config;
mod layers;
pub mod losses;
mod multi;
mod quat;
mod single;

pub use config::{ModelConfig, Pooling};
pub use layers::{Linear, Mlp};
pub use losses::{loss_multi, loss_multi_terms, MultiLoss, loss_normal, loss_normal_per_sample, loss_plane, loss_total, PROB_CLAMP};
pub use multi::{MultiBinding, MultiOutput, MultiScaleModel};
pub use quat::{quat_to_rot, rotation_from_euler, rotation_matrix};
pub use single::{batch_coords, ForwardOptions, NormalPrediction, SingleOutput, SingleScaleModel};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub(crate) fn check_finite(t: &Tensor, layer: &str) -> Result<()> {
    if t.values().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(layer.to_string()))
    }
}
