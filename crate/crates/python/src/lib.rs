//! Python bindings for `facexpr`.
//!
//! Images cross the boundary as `GrayImage` objects (or PGM bytes), vectors
//! as lists of floats. Library errors raise `FacexprError`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use facexpr::canny::{canny as run_canny, CannyConfig};
use facexpr::imgio;
use facexpr::mlp::{self, TrainConfig};
use facexpr::pca;
use facexpr::pipeline::{self, Manifest, PipelineConfig};
use facexpr::Expression;

create_exception!(pyfacexpr, FacexprError, PyException);

fn err(e: facexpr::Error) -> PyErr {
    FacexprError::new_err(e.to_string())
}

fn label(name: &str) -> PyResult<Expression> {
    name.parse().map_err(err)
}

/// 8-bit grayscale image.
#[pyclass(name = "GrayImage", module = "pyfacexpr", from_py_object)]
#[derive(Clone)]
pub struct PyGrayImage {
    inner: imgio::GrayImage,
}

#[pymethods]
impl PyGrayImage {
    #[new]
    fn new(width: usize, height: usize, pixels: Vec<u8>) -> PyResult<Self> {
        Ok(Self {
            inner: imgio::GrayImage::new(width, height, pixels).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: imgio::read_pgm_file(&path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_pgm(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: imgio::load_pgm(data).map_err(err)?,
        })
    }

    fn to_pgm<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &imgio::save_pgm(&self.inner))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        facexpr::write_atomic(&path, &imgio::save_pgm(&self.inner)).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    /// Row-major pixel bytes.
    fn pixels<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.pixels())
    }

    fn get(&self, x: usize, y: usize) -> PyResult<u8> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(FacexprError::new_err(format!(
                "pixel ({x}, {y}) out of range"
            )));
        }
        Ok(self.inner.get(x, y))
    }

    fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> PyResult<Self> {
        Ok(Self {
            inner: imgio::crop(&self.inner, imgio::Rect::new(x, y, w, h)).map_err(err)?,
        })
    }

    fn equalize(&self) -> Self {
        Self {
            inner: imgio::histogram_equalize(&self.inner),
        }
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("GrayImage({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Canny edge map of `image` as a 0/255 image. Thresholds default to the
/// relative rule; pass both `low` and `high` for absolute ones.
#[pyfunction]
#[pyo3(signature = (image, low=None, high=None))]
fn canny(image: &PyGrayImage, low: Option<f64>, high: Option<f64>) -> PyResult<PyGrayImage> {
    let cfg = match (low, high) {
        (Some(l), Some(h)) => CannyConfig::absolute(l, h).map_err(err)?,
        (None, None) => CannyConfig::default(),
        _ => return Err(FacexprError::new_err("low and high must be given together")),
    };
    let edges = run_canny(&image.inner, &cfg).map_err(err)?;
    Ok(PyGrayImage {
        inner: edges.to_image(),
    })
}

/// Principal component model.
#[pyclass(name = "PcaModel", module = "pyfacexpr")]
pub struct PyPcaModel {
    inner: pca::PcaModel,
}

#[pymethods]
impl PyPcaModel {
    #[staticmethod]
    fn fit(samples: Vec<Vec<f64>>, k: usize) -> PyResult<Self> {
        Ok(Self {
            inner: pca::PcaModel::fit(&samples, k).map_err(err)?,
        })
    }

    fn project(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.project(&x).map_err(err)
    }

    fn reconstruct(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.reconstruct(&y).map_err(err)
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean.clone()
    }

    #[getter]
    fn components(&self) -> Vec<Vec<f64>> {
        self.inner.components.clone()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }
}

/// Symmetric eigendecomposition of a square matrix given as rows; returns
/// `(values, vectors)` sorted by descending value.
#[pyfunction]
fn sym_eigen(matrix: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = matrix.len();
    if matrix.iter().any(|r| r.len() != n) {
        return Err(FacexprError::new_err("matrix must be square"));
    }
    let flat: Vec<f64> = matrix.into_iter().flatten().collect();
    let e = pca::sym_eigen(&flat, n).map_err(err)?;
    Ok((e.values, e.vectors))
}

/// Sigmoid multilayer perceptron.
#[pyclass(name = "Mlp", module = "pyfacexpr")]
pub struct PyMlp {
    inner: mlp::MlpModel,
}

#[pymethods]
impl PyMlp {
    /// Weights drawn uniformly from [-0.5, 0.5] with `seed`.
    #[new]
    #[pyo3(signature = (topology, seed=0))]
    fn new(topology: Vec<usize>, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: mlp::init_weights(&topology, seed).map_err(err)?,
        })
    }

    #[getter]
    fn topology(&self) -> Vec<usize> {
        self.inner.topology.clone()
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict(&x).map_err(err)
    }

    /// One online update; returns the sample error before it.
    fn backprop_step(&mut self, x: Vec<f64>, target: Vec<f64>, rate: f64) -> PyResult<f64> {
        self.inner.backprop_step(&x, &target, rate).map_err(err)
    }

    /// Trains in place and returns the per-epoch MSE history.
    #[pyo3(signature = (inputs, targets, rate=0.3, max_epochs=200_000, target_error=1e-7, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &mut self,
        py: Python<'_>,
        inputs: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
        rate: f64,
        max_epochs: usize,
        target_error: f64,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let cfg = TrainConfig {
            learning_rate: rate,
            max_epochs,
            target_error,
            seed,
        };
        let model = &mut self.inner;
        let report = py
            .detach(|| mlp::train(model, &inputs, &targets, &cfg))
            .map_err(err)?;
        Ok(report.history)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| err(e.into()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: mlp::MlpModel = serde_json::from_str(text).map_err(|e| err(e.into()))?;
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }
}

/// A trained end-to-end classifier.
#[pyclass(name = "ExpressionModel", module = "pyfacexpr")]
pub struct PyExpressionModel {
    inner: pipeline::ExpressionModel,
}

#[pymethods]
impl PyExpressionModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: pipeline::ExpressionModel::load(&path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: pipeline::ExpressionModel::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn labels(&self) -> Vec<&'static str> {
        self.inner.labels.iter().map(|l| l.as_str()).collect()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    /// Normalized feature vector of a raw image.
    fn features(&self, image: &PyGrayImage) -> PyResult<Vec<f64>> {
        self.inner.features_for_image(&image.inner).map_err(err)
    }

    /// `(label, activations)` for a raw image.
    fn classify(&self, image: &PyGrayImage) -> PyResult<(&'static str, Vec<f64>)> {
        let (l, y) = self.inner.classify_image(&image.inner).map_err(err)?;
        Ok((l.as_str(), y))
    }

    /// `(label, activations)` for an already-normalized feature vector.
    fn classify_features(&self, features: Vec<f64>) -> PyResult<(&'static str, Vec<f64>)> {
        let (l, y) = self.inner.classify_features(&features).map_err(err)?;
        Ok((l.as_str(), y))
    }

    /// Pooled and average per-class accuracy (percent) on the `test`
    /// records of a manifest, or on all of them when none are tagged.
    fn evaluate(&self, py: Python<'_>, manifest: PathBuf) -> PyResult<(f64, f64)> {
        let m = Manifest::load(&manifest).map_err(err)?;
        let m = if m.has_split_tags() { m.by_tag().1 } else { m };
        let model = &self.inner;
        let report = py
            .detach(|| model.featurize(&m).and_then(|d| model.evaluate(&d)))
            .map_err(err)?;
        Ok((report.pooled, report.average_per_class))
    }
}

/// Splits `manifest` (seeded, stratified unless it carries split tags),
/// fits features and trains a model. Returns the model and its pooled test
/// accuracy in percent (`None` without a test split).
#[pyfunction]
#[pyo3(signature = (manifest, hidden=10, rate=0.3, max_epochs=200_000, target_error=1e-7, seed=7, per_class_test=10))]
#[allow(clippy::too_many_arguments)]
fn train_model(
    py: Python<'_>,
    manifest: PathBuf,
    hidden: usize,
    rate: f64,
    max_epochs: usize,
    target_error: f64,
    seed: u64,
    per_class_test: usize,
) -> PyResult<(PyExpressionModel, Option<f64>)> {
    let cfg = TrainConfig {
        learning_rate: rate,
        max_epochs,
        target_error,
        seed,
    };
    let run = || -> facexpr::Result<_> {
        let m = Manifest::load(&manifest)?;
        let (train, test) = if m.has_split_tags() {
            m.by_tag()
        } else {
            pipeline::split(&m, seed, per_class_test)?
        };
        let pc = PipelineConfig::default();
        let data = pipeline::build_features(&train, &test, &pc)?;
        let (model, _) = pipeline::train_model(&data, &pc, hidden, &cfg)?;
        let acc = if data.test.is_empty() {
            None
        } else {
            Some(model.evaluate(&data.test)?.pooled)
        };
        Ok((model, acc))
    };
    let (model, acc) = py.detach(run).map_err(err)?;
    Ok((PyExpressionModel { inner: model }, acc))
}

/// Writes a synthetic corpus and returns the manifest path.
#[pyfunction]
#[pyo3(signature = (out_dir, per_class=20, seed=7))]
fn synth_dataset(out_dir: PathBuf, per_class: usize, seed: u64) -> PyResult<PathBuf> {
    pipeline::synth_dataset(seed, per_class, &out_dir).map_err(err)?;
    Ok(out_dir.join("manifest.csv"))
}

/// One synthetic face of the given class.
#[pyfunction]
fn synth_face(label_name: &str, seed: u64) -> PyResult<PyGrayImage> {
    Ok(PyGrayImage {
        inner: pipeline::synth_face(label(label_name)?, seed).image,
    })
}

/// The seven class names in output-node order.
#[pyfunction]
fn labels() -> Vec<&'static str> {
    Expression::ALL.iter().map(|l| l.as_str()).collect()
}

#[pymodule]
fn pyfacexpr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FacexprError", m.py().get_type::<FacexprError>())?;
    m.add_class::<PyGrayImage>()?;
    m.add_class::<PyPcaModel>()?;
    m.add_class::<PyMlp>()?;
    m.add_class::<PyExpressionModel>()?;
    m.add_function(wrap_pyfunction!(canny, m)?)?;
    m.add_function(wrap_pyfunction!(sym_eigen, m)?)?;
    m.add_function(wrap_pyfunction!(train_model, m)?)?;
    m.add_function(wrap_pyfunction!(synth_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(synth_face, m)?)?;
    m.add_function(wrap_pyfunction!(labels, m)?)?;
    Ok(())
}
