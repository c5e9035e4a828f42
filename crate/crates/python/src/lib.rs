//! Python bindings for `mlzoom_core`.

use std::collections::BTreeSet;

use mlzoom_core as core;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// 8-bit grayscale image, row-major.
#[pyclass(name = "GrayImage", module = "mlzoom", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrayImage(core::GrayImage);

#[pymethods]
impl PyGrayImage {
    #[new]
    fn new(width: usize, height: usize, pixels: &[u8]) -> PyResult<Self> {
        core::GrayImage::new(width, height, pixels.to_vec()).py().map(Self)
    }

    #[staticmethod]
    fn filled(width: usize, height: usize, value: u8) -> PyResult<Self> {
        core::GrayImage::filled(width, height, value).py().map(Self)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.height(), self.0.width())
    }

    fn pixels<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.0.pixels())
    }

    fn get(&self, x: usize, y: usize) -> PyResult<u8> {
        if x >= self.0.width() || y >= self.0.height() {
            return Err(PyValueError::new_err(format!("({x}, {y}) is outside the image")));
        }
        Ok(self.0.get(x, y))
    }

    fn crop_even(&self) -> PyResult<Self> {
        self.0.crop_even().py().map(Self)
    }

    fn block_average(&self) -> PyResult<Self> {
        self.0.block_average().py().map(Self)
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        core::save_image(&self.0, path).py()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("GrayImage({}x{})", self.0.width(), self.0.height())
    }
}

/// Training pairs from an averaging pyramid: `(feature, (tl, tr, bl, br))`.
#[pyclass(name = "TrainingSet", module = "mlzoom", frozen)]
struct PyTrainingSet(core::TrainingSet);

#[pymethods]
impl PyTrainingSet {
    fn pairs(&self) -> Vec<(u8, [u8; 4])> {
        self.0.pairs().iter().map(|p| (p.feature, p.labels)).collect()
    }

    fn levels(&self) -> Vec<u32> {
        self.0.levels().to_vec()
    }

    fn save_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        core::dump_pairs(&self.0, path).py()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "RegressionTree", module = "mlzoom", frozen)]
struct PyRegressionTree(core::RegressionTree);

#[pymethods]
impl PyRegressionTree {
    #[staticmethod]
    #[pyo3(signature = (pairs, min_samples_split = 2))]
    fn fit(pairs: &PyTrainingSet, min_samples_split: usize) -> PyResult<Self> {
        core::RegressionTree::fit(&pairs.0, core::FitParams { min_samples_split })
            .py()
            .map(Self)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        core::RegressionTree::from_json(text).py().map(Self)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        core::RegressionTree::load(path).py().map(Self)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py()
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.0.save(path).py()
    }

    fn predict(&self, g: f64) -> [f64; 4] {
        self.0.predict(g)
    }

    /// Training-set scores: a dict with `r2_per_output`, `r2_uniform` and tree size.
    fn score<'py>(&self, py: Python<'py>, pairs: &PyTrainingSet) -> PyResult<Bound<'py, PyDict>> {
        fit_report_dict(py, &core::score_r2(&self.0, &pairs.0).py()?)
    }

    #[getter]
    fn n_samples(&self) -> u64 {
        self.0.n_samples()
    }

    #[getter]
    fn n_leaves(&self) -> usize {
        self.0.n_leaves()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.0.depth()
    }

    fn upscale_once(&self, img: &PyGrayImage) -> PyGrayImage {
        PyGrayImage(core::upscale_once(&img.0, &self.0))
    }
}

fn fit_report_dict<'py>(py: Python<'py>, r: &core::FitReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("r2_per_output", r.r2_per_output)?;
    d.set_item("r2_uniform", r.r2_uniform)?;
    d.set_item("n_samples", r.n_samples)?;
    d.set_item("n_leaves", r.n_leaves)?;
    d.set_item("depth", r.depth)?;
    Ok(d)
}

#[pyfunction]
fn load_image(path: std::path::PathBuf) -> PyResult<PyGrayImage> {
    core::load_image(path).py().map(PyGrayImage)
}

#[pyfunction]
fn save_image(img: &PyGrayImage, path: std::path::PathBuf) -> PyResult<()> {
    core::save_image(&img.0, path).py()
}

#[pyfunction]
fn mse(a: &PyGrayImage, b: &PyGrayImage) -> PyResult<f64> {
    core::mse(&a.0, &b.0).py()
}

#[pyfunction]
fn psnr(a: &PyGrayImage, b: &PyGrayImage) -> PyResult<f64> {
    core::psnr(&a.0, &b.0).py()
}

/// Classical enlargement; `method` is nearest, bilinear or bicubic.
#[pyfunction]
#[pyo3(signature = (img, factor, method = "bicubic"))]
fn resample(img: &PyGrayImage, factor: usize, method: &str) -> PyResult<PyGrayImage> {
    let m: core::Interpolation = method.parse().py()?;
    core::resample_baseline(&img.0, factor, m).py().map(PyGrayImage)
}

/// All pyramid levels, finest first.
#[pyfunction]
fn build_pyramid(img: &PyGrayImage) -> PyResult<Vec<PyGrayImage>> {
    let p = core::build_pyramid(&img.0).py()?;
    Ok(p.levels().iter().cloned().map(PyGrayImage).collect())
}

#[pyfunction]
#[pyo3(signature = (img, augment = ""))]
fn extract_pairs(img: &PyGrayImage, augment: &str) -> PyResult<PyTrainingSet> {
    let transforms = core::Transform::parse_list(augment).py()?;
    core::pyramid::training_set(&img.0, &transforms).py().map(PyTrainingSet)
}

fn config(blur: bool, blur_passes: usize, augment: &str, retrain_per_step: bool) -> PyResult<core::UpscaleConfig> {
    let augment_transforms: BTreeSet<_> = core::Transform::parse_list(augment).py()?;
    Ok(core::UpscaleConfig {
        blur_enabled: blur,
        blur_passes,
        augment_transforms,
        retrain_per_step,
        ..core::UpscaleConfig::default()
    })
}

/// Enlarges `img` by `factor`; returns `(image, fit_report)`.
#[pyfunction]
#[pyo3(signature = (img, factor, blur = true, blur_passes = 2, augment = "", retrain_per_step = false))]
fn upscale<'py>(
    py: Python<'py>,
    img: &PyGrayImage,
    factor: usize,
    blur: bool,
    blur_passes: usize,
    augment: &str,
    retrain_per_step: bool,
) -> PyResult<(PyGrayImage, Bound<'py, PyDict>)> {
    let cfg = config(blur, blur_passes, augment, retrain_per_step)?;
    let src = img.0.clone();
    let result = py.detach(move || core::upscale(&src, factor, &cfg)).py()?;
    let report = fit_report_dict(py, &result.fit_report)?;
    report.set_item("steps_applied", result.steps_applied)?;
    Ok((PyGrayImage(result.image), report))
}

/// Downsample `img` by `factor`, restore it with every method and score each.
/// Returns a list of dicts with `method`, `factor`, `psnr_db`, `mse`, `train_r2`.
#[pyfunction]
#[pyo3(signature = (img, factor, image_id = "image"))]
fn roundtrip_eval<'py>(
    py: Python<'py>,
    img: &PyGrayImage,
    factor: usize,
    image_id: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let src = img.0.clone();
    let id = image_id.to_string();
    let records = py
        .detach(move || core::bench::roundtrip_eval(&id, &src, factor, &core::UpscaleConfig::default()))
        .py()?;
    records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("image_id", &r.image_id)?;
            d.set_item("method", r.method.name())?;
            d.set_item("factor", r.factor)?;
            d.set_item("psnr_db", r.psnr)?;
            d.set_item("mse", r.mse)?;
            d.set_item("train_r2", r.train_r2)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn mlzoom(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrayImage>()?;
    m.add_class::<PyTrainingSet>()?;
    m.add_class::<PyRegressionTree>()?;
    m.add_function(wrap_pyfunction!(load_image, m)?)?;
    m.add_function(wrap_pyfunction!(save_image, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(resample, m)?)?;
    m.add_function(wrap_pyfunction!(build_pyramid, m)?)?;
    m.add_function(wrap_pyfunction!(extract_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(upscale, m)?)?;
    m.add_function(wrap_pyfunction!(roundtrip_eval, m)?)?;
    Ok(())
}
