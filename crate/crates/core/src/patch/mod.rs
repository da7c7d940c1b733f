//! Radius neighbourhoods, fixed-size patch resampling/normalisation, and
//! per-point plane labels derived from ground-truth normal deviation.

mod extract;
mod index;
mod labels;

pub use extract::{derive_seed, extract_patch, Patch, DEFAULT_K};
pub use index::SpatialIndex;
pub use labels::{error_distance, label_patch, normalize_errors, normalize_errors_with, plane_labels, LabelConfig};
