//! End-to-end orchestration: manifests, feature assembly, training, grid
//! search, evaluation, model files and the synthetic corpus.

mod dataset;
mod eval;
mod features;
mod grid;
mod model;
mod synth;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canny::CannyConfig;
use crate::error::{Error, Result};
use crate::imgio::Rect;
use crate::regions::RegionLayout;

pub use dataset::{split, Manifest, ManifestRecord, Split};
pub use eval::{evaluate, EvalReport};
pub use features::{
    build_features, extract_regions, load_region_sets, preprocess, FeatureExtractor,
    LabeledFeatures, Normalizer, PreparedData,
};
pub use grid::{
    cell_seed, grid_search, GridCell, GridResult, DEFAULT_HIDDEN_GRID, DEFAULT_RATE_GRID,
};
pub use model::{train_model, ExpressionModel, TrainingMetadata, MODEL_FORMAT_VERSION};
pub use synth::{synth_dataset, synth_face, SynthFace};

/// Default PCA dimension per region; five regions give 200 features.
pub const DEFAULT_COMPONENTS: usize = 40;

/// Everything that turns an image into a region set and feature vector.
/// Also the schema of the optional `--config` file, where every field may
/// be omitted.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Face window in the input image; `null` centers a window of the
    /// layout's face size (the whole image when sizes already match).
    pub crop: Option<Rect>,
    pub canny: CannyConfig,
    pub layout: RegionLayout,
    /// PCA components kept per region.
    pub components: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            crop: None,
            canny: CannyConfig::default(),
            layout: RegionLayout::default(),
            components: DEFAULT_COMPONENTS,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.canny.validate()?;
        self.layout.validate()?;
        if let Some(r) = self.crop {
            if r.w != self.layout.face_width || r.h != self.layout.face_height {
                return Err(Error::InvalidArgument(format!(
                    "crop {r} does not match the {}x{} face layout",
                    self.layout.face_width, self.layout.face_height
                )));
            }
        }
        if self.components == 0 {
            return Err(Error::InvalidArgument("components must be positive".into()));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.components * self.layout.regions.len()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
        Self::from_json(&text).map_err(|e| e.at_path(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_file() {
        let cfg = PipelineConfig::from_json(
            r#"{"canny": {"thresholds": {"mode": "absolute", "low": 20, "high": 60}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.components, 40);
        assert_eq!(cfg.layout, RegionLayout::default());
        assert_eq!(cfg.canny, CannyConfig::absolute(20.0, 60.0).unwrap());
        assert_eq!(cfg.feature_dim(), 200);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(PipelineConfig::from_json(r#"{"components": 0}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(PipelineConfig::from_json(
            r#"{"canny": {"thresholds": {"mode": "absolute", "low": 9, "high": 3}}}"#
        )
        .is_err());
        assert!(
            PipelineConfig::from_json(r#"{"crop": {"x": 0, "y": 0, "w": 10, "h": 10}}"#).is_err()
        );
    }
}
