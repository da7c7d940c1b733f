use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Learned per-point weights, softmax-normalised over the patch.
    Weighted,
    /// Plain arithmetic mean.
    Mean,
}

/// Layer widths. Every MLP here is a list of hidden/output widths; inputs
/// are implied by the previous stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Shared per-point MLP; the last width is the feature width F.
    pub point_mlp: Vec<usize>,
    /// Per-point MLP of the quaternion transformer (mean-pooled afterwards).
    pub qstn_point_mlp: Vec<usize>,
    /// Hidden widths between the pooled transformer feature and the quaternion.
    pub qstn_head: Vec<usize>,
    /// Hidden widths of the normal regressor F → … → 3.
    pub normal_head: Vec<usize>,
    /// Hidden widths of the per-point classifier over [point ‖ global] features.
    pub plane_head: Vec<usize>,
    pub pooling: Pooling,
    /// Hidden width of the scale-estimation MLP (S·F → hidden → S).
    pub scale_net_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            point_mlp: vec![64, 128, 1024],
            qstn_point_mlp: vec![64, 128, 1024],
            qstn_head: vec![512, 256],
            normal_head: vec![512, 256],
            plane_head: vec![256, 64],
            pooling: Pooling::Weighted,
            scale_net_hidden: 256,
        }
    }
}

impl ModelConfig {
    /// Desk-scale profile: 128-wide point features and narrow heads.
    pub fn reduced() -> Self {
        ModelConfig {
            point_mlp: vec![64, 128],
            qstn_point_mlp: vec![64, 128],
            qstn_head: vec![128, 64],
            normal_head: vec![128, 64],
            plane_head: vec![64],
            pooling: Pooling::Weighted,
            scale_net_hidden: 64,
        }
    }

    pub fn feature_width(&self) -> usize {
        *self.point_mlp.last().unwrap_or(&0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, widths) in [
            ("point_mlp", &self.point_mlp),
            ("qstn_point_mlp", &self.qstn_point_mlp),
            ("plane_head", &self.plane_head),
        ] {
            if widths.is_empty() {
                return Err(Error::invalid(format!("{name} needs at least one layer")));
            }
        }
        let all = self
            .point_mlp
            .iter()
            .chain(&self.qstn_point_mlp)
            .chain(&self.qstn_head)
            .chain(&self.normal_head)
            .chain(&self.plane_head);
        if all.copied().any(|w| w == 0) || self.scale_net_hidden == 0 {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ModelConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("model config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}
