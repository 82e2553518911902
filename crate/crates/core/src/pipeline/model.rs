use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{
    extract_regions, FeatureExtractor, LabeledFeatures, Normalizer, PreparedData,
};
use super::{Manifest, PipelineConfig};
use crate::error::{Error, Result};
use crate::imgio::{read_pgm_file, GrayImage};
use crate::label::{Expression, NUM_CLASSES};
use crate::mlp::{init_weights, train, MlpModel, TrainConfig, TrainReport};

pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub learning_rate: f64,
    pub hidden: usize,
    pub max_epochs: usize,
    pub target_error: f64,
    pub epochs_run: usize,
    pub final_mse: f64,
    pub seed: u64,
}

/// Everything needed to classify a raw image, persisted as one JSON
/// document.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpressionModel {
    pub version: u64,
    pub pipeline: PipelineConfig,
    pub features: FeatureExtractor,
    pub normalizer: Normalizer,
    pub mlp: MlpModel,
    /// Output node `i` reports `labels[i]`.
    pub labels: Vec<Expression>,
    pub training: TrainingMetadata,
}

/// Trains a `features-hidden-7` network on the prepared training split.
/// Weights are initialized from `cfg.seed`, which also drives the epoch
/// shuffles.
pub fn train_model(
    data: &PreparedData,
    pipeline: &PipelineConfig,
    hidden: usize,
    cfg: &TrainConfig,
) -> Result<(ExpressionModel, TrainReport)> {
    cfg.validate()?;
    if hidden == 0 {
        return Err(Error::InvalidArgument(
            "hidden layer size must be positive".into(),
        ));
    }
    let topology = [data.extractor.output_dim(), hidden, NUM_CLASSES];
    let mut mlp = init_weights(&topology, cfg.seed)?;
    let report = train(&mut mlp, &data.train.features, &data.train.targets(), cfg)?;
    let model = ExpressionModel {
        version: MODEL_FORMAT_VERSION,
        pipeline: pipeline.clone(),
        features: data.extractor.clone(),
        normalizer: data.normalizer.clone(),
        mlp,
        labels: Expression::ALL.to_vec(),
        training: TrainingMetadata {
            learning_rate: cfg.learning_rate,
            hidden,
            max_epochs: cfg.max_epochs,
            target_error: cfg.target_error,
            epochs_run: report.epochs_run,
            final_mse: report.final_mse,
            seed: cfg.seed,
        },
    };
    model.validate()?;
    Ok((model, report))
}

impl ExpressionModel {
    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: self.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        self.pipeline
            .validate()
            .map_err(|e| Error::InvalidModel(format!("pipeline: {e}")))?;
        let lengths = self.pipeline.layout.patch_lengths();
        if self.features.pca.len() != lengths.len() {
            return Err(Error::InvalidModel(format!(
                "{} PCA models for {} regions",
                self.features.pca.len(),
                lengths.len()
            )));
        }
        for (pca, len) in self.features.pca.iter().zip(lengths) {
            pca.validate()?;
            if pca.input_dim() != len {
                return Err(Error::InvalidModel(format!(
                    "PCA input dimension {} does not match patch length {len}",
                    pca.input_dim()
                )));
            }
        }
        self.normalizer.validate()?;
        self.mlp.validate()?;
        let dim = self.features.output_dim();
        if self.normalizer.mean.len() != dim || self.mlp.input_dim() != dim {
            return Err(Error::InvalidModel(format!(
                "PCA output dimension {dim} does not match normalizer ({}) and MLP input ({})",
                self.normalizer.mean.len(),
                self.mlp.input_dim()
            )));
        }
        if self.mlp.output_dim() != NUM_CLASSES || self.labels != Expression::ALL {
            return Err(Error::InvalidModel(
                "label mapping must list the seven classes in output order".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and validates a model document; the version is checked before
    /// the rest of the schema.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::InvalidModel("missing or invalid `version` field".into()))?;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let model: ExpressionModel = serde_json::from_value(value)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
        Self::from_json(&text).map_err(|e| e.at_path(path))
    }

    pub fn feature_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    /// Normalized feature vector for a raw (uncropped) image.
    pub fn features_for_image(&self, img: &GrayImage) -> Result<Vec<f64>> {
        let set = extract_regions(img, &self.pipeline)?;
        self.normalizer.apply(&self.features.project(&set)?)
    }

    /// Label and the seven output activations for a normalized vector.
    pub fn classify_features(&self, features: &[f64]) -> Result<(Expression, Vec<f64>)> {
        self.mlp.classify(features)
    }

    pub fn classify_image(&self, img: &GrayImage) -> Result<(Expression, Vec<f64>)> {
        self.classify_features(&self.features_for_image(img)?)
    }

    /// Classifies already-normalized vectors and scores them.
    pub fn evaluate(&self, data: &LabeledFeatures) -> Result<super::EvalReport> {
        super::evaluate(&self.mlp, data)
    }

    /// Loads and featurizes every record of `manifest`.
    pub fn featurize(&self, manifest: &Manifest) -> Result<LabeledFeatures> {
        use rayon::prelude::*;
        let features = manifest
            .records
            .par_iter()
            .map(|r| {
                let path = manifest.resolve(r);
                let img = read_pgm_file(&path)?;
                self.features_for_image(&img).map_err(|e| e.at_path(&path))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledFeatures {
            paths: manifest
                .records
                .iter()
                .map(|r| manifest.resolve(r))
                .collect(),
            features,
            labels: manifest.records.iter().map(|r| r.label).collect(),
        })
    }
}
