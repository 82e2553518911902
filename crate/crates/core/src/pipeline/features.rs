use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Manifest, PipelineConfig};
use crate::canny::{canny, EdgeMap};
use crate::error::{Error, Result};
use crate::imgio::{crop, histogram_equalize, read_pgm_file, GrayImage, Rect};
use crate::label::Expression;
use crate::pca::PcaModel;
use crate::regions::{extract_all, RegionSet};

/// Crop, equalize and run Canny: the face image patches are cut from, and
/// the edge map that locates them.
pub fn preprocess(img: &GrayImage, cfg: &PipelineConfig) -> Result<(GrayImage, EdgeMap)> {
    let (fw, fh) = (cfg.layout.face_width, cfg.layout.face_height);
    let rect = match cfg.crop {
        Some(r) => r,
        None => Rect::centered(img.width(), img.height(), fw, fh).ok_or(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min: fw.max(fh),
        })?,
    };
    let face = histogram_equalize(&crop(img, rect)?);
    let edges = canny(&face, &cfg.canny)?;
    Ok((face, edges))
}

pub fn extract_regions(img: &GrayImage, cfg: &PipelineConfig) -> Result<RegionSet> {
    let (face, edges) = preprocess(img, cfg)?;
    extract_all(&face, &edges, &cfg.layout)
}

/// Region sets for every manifest record, in manifest order. Failures name
/// the offending file.
pub fn load_region_sets(manifest: &Manifest, cfg: &PipelineConfig) -> Result<Vec<RegionSet>> {
    manifest
        .records
        .par_iter()
        .map(|r| {
            let path = manifest.resolve(r);
            let img = read_pgm_file(&path)?;
            extract_regions(&img, cfg).map_err(|e| e.at_path(&path))
        })
        .collect()
}

/// One PCA model per region; projections concatenate in region order.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct FeatureExtractor {
    pub pca: Vec<PcaModel>,
}

impl FeatureExtractor {
    pub fn fit(training: &[RegionSet], components: usize) -> Result<Self> {
        let Some(first) = training.first() else {
            return Err(Error::InvalidArgument("no training images for PCA".into()));
        };
        let pca = (0..first.patches.len())
            .into_par_iter()
            .map(|region| {
                let samples: Vec<Vec<f64>> = training
                    .iter()
                    .map(|s| s.patches[region].values.clone())
                    .collect();
                PcaModel::fit(&samples, components)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureExtractor { pca })
    }

    pub fn output_dim(&self) -> usize {
        self.pca.iter().map(PcaModel::output_dim).sum()
    }

    /// Concatenated per-region projections.
    pub fn project(&self, set: &RegionSet) -> Result<Vec<f64>> {
        if set.patches.len() != self.pca.len() {
            return Err(Error::DimensionMismatch {
                expected: self.pca.len(),
                got: set.patches.len(),
            });
        }
        let mut out = Vec::with_capacity(self.output_dim());
        for (model, patch) in self.pca.iter().zip(&set.patches) {
            out.extend(model.project(&patch.values)?);
        }
        Ok(out)
    }
}

/// Per-dimension z-score from training statistics (population deviation).
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Dimensions whose deviation was below `1e-12` and replaced by 1.
    #[serde(default)]
    pub degenerate: Vec<usize>,
}

impl Normalizer {
    pub fn fit(vectors: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::InvalidArgument(
                "no vectors to fit a normalizer".into(),
            ));
        };
        let dim = first.len();
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for v in vectors {
            for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let mut degenerate = Vec::new();
        let std = var
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let sd = (s / n).sqrt();
                if sd < 1e-12 {
                    degenerate.push(i);
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Normalizer {
            mean,
            std,
            degenerate,
        })
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: v.len(),
            });
        }
        Ok(v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != self.std.len() {
            return Err(Error::InvalidModel(
                "normalizer mean/std lengths differ".into(),
            ));
        }
        if self.mean.iter().any(|v| !v.is_finite())
            || self.std.iter().any(|s| !(s.is_finite() && *s > 0.0))
        {
            return Err(Error::InvalidModel(
                "normalizer has invalid statistics".into(),
            ));
        }
        Ok(())
    }
}

/// Normalized feature vectors with their labels.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct LabeledFeatures {
    pub paths: Vec<PathBuf>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Expression>,
}

impl LabeledFeatures {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn targets(&self) -> Vec<Vec<f64>> {
        self.labels.iter().map(|l| l.one_hot()).collect()
    }
}

/// Fitted feature stages plus normalized train and test features.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub extractor: FeatureExtractor,
    pub normalizer: Normalizer,
    pub train: LabeledFeatures,
    pub test: LabeledFeatures,
}

/// Extracts regions from every image, fits the per-region PCA and the
/// normalizer on the training images only, and projects both sides.
pub fn build_features(
    train: &Manifest,
    test: &Manifest,
    cfg: &PipelineConfig,
) -> Result<PreparedData> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("training manifest is empty".into()));
    }
    let train_sets = load_region_sets(train, cfg)?;
    let test_sets = load_region_sets(test, cfg)?;
    let extractor = FeatureExtractor::fit(&train_sets, cfg.components)?;
    let project = |sets: &[RegionSet]| -> Result<Vec<Vec<f64>>> {
        sets.iter().map(|s| extractor.project(s)).collect()
    };
    let raw_train = project(&train_sets)?;
    let raw_test = project(&test_sets)?;
    let normalizer = Normalizer::fit(&raw_train)?;
    let labeled = |m: &Manifest, raw: Vec<Vec<f64>>| -> Result<LabeledFeatures> {
        Ok(LabeledFeatures {
            paths: m.records.iter().map(|r| m.resolve(r)).collect(),
            features: raw
                .iter()
                .map(|v| normalizer.apply(v))
                .collect::<Result<_>>()?,
            labels: m.records.iter().map(|r| r.label).collect(),
        })
    };
    let train = labeled(train, raw_train)?;
    let test = labeled(test, raw_test)?;
    Ok(PreparedData {
        extractor,
        normalizer,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn normalizer_statistics() {
        let mut rng = SeededRng::new(2);
        let vs: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.uniform(-3.0, 9.0), rng.normal() * 40.0, 5.0])
            .collect();
        let norm = Normalizer::fit(&vs).unwrap();
        assert_eq!(norm.degenerate, vec![2]);
        let out: Vec<Vec<f64>> = vs.iter().map(|v| norm.apply(v).unwrap()).collect();
        for d in 0..2 {
            let mean = out.iter().map(|v| v[d]).sum::<f64>() / 30.0;
            let var = out.iter().map(|v| (v[d] - mean).powi(2)).sum::<f64>() / 30.0;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
        assert!(out.iter().all(|v| v[2] == 0.0));
        assert!(norm.apply(&[1.0]).is_err());
    }

    #[test]
    fn preprocess_crops_centered_face() {
        let img = GrayImage::from_fn(256, 256, |x, y| ((x * 3 + y) % 256) as u8).unwrap();
        let (face, edges) = preprocess(&img, &PipelineConfig::default()).unwrap();
        assert_eq!((face.width(), face.height()), (85, 85));
        assert_eq!((edges.width, edges.height), (85, 85));
        let small = GrayImage::filled(40, 40, 0).unwrap();
        assert!(preprocess(&small, &PipelineConfig::default()).is_err());
    }
}
