//! Python bindings: the `conformal_ridge` extension module.
//!
//! Training data is passed as a list of rows plus a list of labels. Errors
//! from the library surface as `conformal_ridge.ConformalRidgeError`, a
//! subclass of `ValueError`.
//!
//! ```python
//! import conformal_ridge as cr
//! iv = cr.crr_predict([[0.0], [1.0], [2.0]], [0.1, 0.9, 2.2], [1.5], a=1.0, epsilon=0.5)
//! print(iv.lower, iv.upper)
//! ```

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyModule;

use conformal_ridge as core;
use conformal_ridge::{Dataset, RayPredictionSet, RidgeConfig};

create_exception!(conformal_ridge, ConformalRidgeError, PyValueError);

fn to_py(e: core::Error) -> PyErr {
    ConformalRidgeError::new_err(e.to_string())
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn dataset(objects: Vec<Vec<f64>>, labels: Vec<f64>) -> PyResult<Dataset> {
    Dataset::from_rows(&objects, &labels).py_err()
}

fn method_name(m: core::Method) -> &'static str {
    match m {
        core::Method::Brr => "BRR",
        core::Method::Crr => "CRR",
        core::Method::UpperCrr => "UPPER_CRR",
        core::Method::LowerCrr => "LOWER_CRR",
    }
}

/// Closed interval `[lower, upper]`; endpoints may be infinite.
#[pyclass(frozen, skip_from_py_object, name = "PredictionInterval", module = "conformal_ridge")]
#[derive(Clone)]
struct PyPredictionInterval {
    inner: core::PredictionInterval,
}

#[pymethods]
impl PyPredictionInterval {
    #[getter]
    fn lower(&self) -> f64 {
        self.inner.lower
    }

    #[getter]
    fn upper(&self) -> f64 {
        self.inner.upper
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn method(&self) -> &'static str {
        method_name(self.inner.method)
    }

    fn contains(&self, y: f64) -> bool {
        self.inner.contains(y)
    }

    fn width(&self) -> f64 {
        self.inner.width()
    }

    fn is_full_line(&self) -> bool {
        self.inner.is_full_line()
    }

    fn __contains__(&self, y: f64) -> bool {
        self.inner.contains(y)
    }

    fn __repr__(&self) -> String {
        format!(
            "PredictionInterval(lower={}, upper={}, epsilon={}, method='{}')",
            self.inner.lower,
            self.inner.upper,
            self.inner.epsilon,
            method_name(self.inner.method)
        )
    }
}

impl From<core::PredictionInterval> for PyPredictionInterval {
    fn from(inner: core::PredictionInterval) -> Self {
        Self { inner }
    }
}

/// Bayesian ridge interval `ŷ ∓ √(1+g) σ z_{ε/2}`.
#[pyfunction]
#[pyo3(signature = (objects, labels, x, a, sigma, epsilon))]
fn brr_predict(
    objects: Vec<Vec<f64>>,
    labels: Vec<f64>,
    x: Vec<f64>,
    a: f64,
    sigma: f64,
    epsilon: f64,
) -> PyResult<PyPredictionInterval> {
    let train = dataset(objects, labels)?;
    let cfg = RidgeConfig::new(a, sigma, epsilon).py_err()?;
    Ok(core::brr_predict(&train, &x, &cfg).py_err()?.into())
}

/// Predictive mean and variance `(ŷ, (1+g)σ²)` of the test label.
#[pyfunction]
fn brr_predictive(objects: Vec<Vec<f64>>, labels: Vec<f64>, x: Vec<f64>, a: f64, sigma: f64) -> PyResult<(f64, f64)> {
    let train = dataset(objects, labels)?;
    let cfg = RidgeConfig::new(a, sigma, 0.5).py_err()?;
    let p = core::brr_conditional_density_params(&train, &x, &cfg).py_err()?;
    Ok((p.mean, p.variance))
}

/// Conformalized ridge interval; `grid` enables the pointwise fallback for
/// configurations the analytic route refuses.
#[pyfunction]
#[pyo3(signature = (objects, labels, x, a, epsilon, grid=None))]
fn crr_predict(
    py: Python<'_>,
    objects: Vec<Vec<f64>>,
    labels: Vec<f64>,
    x: Vec<f64>,
    a: f64,
    epsilon: f64,
    grid: Option<Vec<f64>>,
) -> PyResult<PyPredictionInterval> {
    let train = dataset(objects, labels)?;
    let iv = py.detach(|| match grid {
        Some(g) => core::crr_predict_with_fallback(&train, &x, a, epsilon, &g).map(|p| p.interval),
        None => core::crr_predict(&train, &x, a, epsilon),
    });
    Ok(iv.py_err()?.into())
}

fn ray_bounds(r: RayPredictionSet) -> (f64, f64) {
    r.bounds()
}

/// Upper one-sided CRR at level `delta`, as `(lower, upper)` bounds.
#[pyfunction]
fn upper_crr_predict(
    objects: Vec<Vec<f64>>,
    labels: Vec<f64>,
    x: Vec<f64>,
    a: f64,
    delta: f64,
) -> PyResult<(f64, f64)> {
    let train = dataset(objects, labels)?;
    Ok(ray_bounds(core::upper_crr_predict(&train, &x, a, delta).py_err()?))
}

/// Lower one-sided CRR at level `delta`, as `(lower, upper)` bounds.
#[pyfunction]
fn lower_crr_predict(
    objects: Vec<Vec<f64>>,
    labels: Vec<f64>,
    x: Vec<f64>,
    a: f64,
    delta: f64,
) -> PyResult<(f64, f64)> {
    let train = dataset(objects, labels)?;
    Ok(ray_bounds(core::lower_crr_predict(&train, &x, a, delta).py_err()?))
}

/// Thresholds `t_i`, one per training observation.
#[pyfunction]
fn ray_thresholds(objects: Vec<Vec<f64>>, labels: Vec<f64>, x: Vec<f64>, a: f64) -> PyResult<Vec<f64>> {
    let train = dataset(objects, labels)?;
    Ok(core::ray_thresholds(&train, &x, a).py_err()?.thresholds)
}

/// Conformal p-value of the postulated label `y`; `tau` selects the smoothed version.
#[pyfunction]
#[pyo3(signature = (objects, labels, x, y, a, tau=None))]
fn crr_pvalue(
    objects: Vec<Vec<f64>>,
    labels: Vec<f64>,
    x: Vec<f64>,
    y: f64,
    a: f64,
    tau: Option<f64>,
) -> PyResult<f64> {
    let train = dataset(objects, labels)?;
    match tau {
        Some(t) => core::smoothed_pvalue(&train, &x, y, a, t),
        None => core::crr_pvalue(&train, &x, y, a),
    }
    .py_err()
}

/// Interval from the first `n − 1` observations for each later one.
#[pyclass(name = "OnlinePredictor", module = "conformal_ridge")]
struct PyOnlinePredictor {
    inner: core::OnlinePredictor,
}

#[pymethods]
impl PyOnlinePredictor {
    #[new]
    fn new(a: f64, epsilon: f64) -> PyResult<Self> {
        Ok(Self {
            inner: core::OnlinePredictor::new(a, epsilon).py_err()?,
        })
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<PyPredictionInterval> {
        Ok(self.inner.predict(&x).py_err()?.into())
    }

    fn observe(&mut self, x: Vec<f64>, y: f64) -> PyResult<()> {
        self.inner.observe(&x, y).py_err()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// `(variance, std)` of the limiting law of `√n (B* − C*)`.
#[pyfunction]
#[pyo3(signature = (epsilon, sigma=1.0, quadform=0.0))]
fn theorem1_variance(epsilon: f64, sigma: f64, quadform: f64) -> PyResult<(f64, f64)> {
    let spec = core::TheoremVarianceSpec::new(epsilon, sigma, quadform).py_err()?;
    let v = core::theorem1_variance(&spec).py_err()?;
    Ok((v.variance, v.std))
}

#[pyfunction]
fn std_asymptote(epsilon: f64) -> PyResult<f64> {
    core::std_asymptote(epsilon).py_err()
}

/// Upper-tail standard normal quantile `Φ⁻¹(1 − delta)`.
#[pyfunction]
fn normal_quantile(delta: f64) -> PyResult<f64> {
    core::normal_quantile(delta).py_err()
}

/// Rows `(epsilon, std_upper, std_lower, asymptote)`.
#[pyfunction]
fn curve_table(eps_grid: Vec<f64>) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let t = core::curve_table(&eps_grid).py_err()?;
    Ok(t.rows
        .iter()
        .map(|r| (r.epsilon, r.std_upper, r.std_lower, r.asymptote))
        .collect())
}

/// `μ'(C + μμ')⁻¹μ` for a mean vector and covariance matrix given as rows.
#[pyfunction]
fn quadform_identity(mu: Vec<f64>, c: Vec<Vec<f64>>) -> PyResult<f64> {
    let m = core::Matrix::from_rows(&c).py_err()?;
    core::quadform_identity(&mu, &m).py_err()
}

fn generative_spec(
    p: usize,
    object_law: &str,
    object_mean: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
    prior_a: f64,
    sigma: f64,
    seed: u64,
) -> PyResult<core::GenerativeSpec> {
    let object_law = match object_law {
        "standard_gaussian" => core::ObjectLaw::StandardGaussian,
        "uniform_cube" => core::ObjectLaw::UniformCube,
        "constant_one" => core::ObjectLaw::ConstantOne,
        "gaussian_with_mean" => core::ObjectLaw::GaussianWithMean(
            object_mean.ok_or_else(|| PyValueError::new_err("gaussian_with_mean needs object_mean"))?,
        ),
        other => return Err(PyValueError::new_err(format!("unknown object law {other:?}"))),
    };
    let weight_law = match weights {
        Some(w) => core::WeightLaw::Fixed(w),
        None => core::WeightLaw::GaussianPrior { a: prior_a },
    };
    let spec = core::GenerativeSpec {
        p,
        object_law,
        weight_law,
        sigma,
        seed,
    };
    spec.validate().py_err()?;
    Ok(spec)
}

fn json_to_dict<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

/// Coverage experiment; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (n, trials, seed, a=1.0, sigma=1.0, epsilon=0.1, p=1, object_law="standard_gaussian",
                    object_mean=None, weights=None, prior_a=None, smoothed=true, include_trials=false))]
#[allow(clippy::too_many_arguments)]
fn coverage_experiment<'py>(
    py: Python<'py>,
    n: usize,
    trials: usize,
    seed: u64,
    a: f64,
    sigma: f64,
    epsilon: f64,
    p: usize,
    object_law: &str,
    object_mean: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
    prior_a: Option<f64>,
    smoothed: bool,
    include_trials: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = generative_spec(p, object_law, object_mean, weights, prior_a.unwrap_or(a), sigma, seed)?;
    let mut cfg = core::ExperimentConfig::new(n, a, epsilon, trials);
    cfg.smoothed = smoothed;
    let report = py.detach(|| core::coverage_experiment(&spec, &cfg)).py_err()?;
    json_to_dict(py, &report.to_json(include_trials))
}

/// Endpoint-difference experiment; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (n, trials, seed, a=1.0, sigma=1.0, epsilon=0.1, p=1, object_law="standard_gaussian",
                    object_mean=None, weights=None, prior_a=None, std_tolerance=0.10, include_trials=false))]
#[allow(clippy::too_many_arguments)]
fn endpoint_diff_experiment<'py>(
    py: Python<'py>,
    n: usize,
    trials: usize,
    seed: u64,
    a: f64,
    sigma: f64,
    epsilon: f64,
    p: usize,
    object_law: &str,
    object_mean: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
    prior_a: Option<f64>,
    std_tolerance: f64,
    include_trials: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = generative_spec(p, object_law, object_mean, weights, prior_a.unwrap_or(a), sigma, seed)?;
    let mut cfg = core::ExperimentConfig::new(n, a, epsilon, trials);
    cfg.std_tolerance = std_tolerance;
    let report = py.detach(|| core::endpoint_diff_experiment(&spec, &cfg)).py_err()?;
    json_to_dict(py, &report.to_json(include_trials))
}

#[pymodule]
#[pyo3(name = "conformal_ridge")]
fn conformal_ridge_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConformalRidgeError", m.py().get_type::<ConformalRidgeError>())?;
    m.add_class::<PyPredictionInterval>()?;
    m.add_class::<PyOnlinePredictor>()?;
    m.add_function(wrap_pyfunction!(brr_predict, m)?)?;
    m.add_function(wrap_pyfunction!(brr_predictive, m)?)?;
    m.add_function(wrap_pyfunction!(crr_predict, m)?)?;
    m.add_function(wrap_pyfunction!(upper_crr_predict, m)?)?;
    m.add_function(wrap_pyfunction!(lower_crr_predict, m)?)?;
    m.add_function(wrap_pyfunction!(ray_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(crr_pvalue, m)?)?;
    m.add_function(wrap_pyfunction!(theorem1_variance, m)?)?;
    m.add_function(wrap_pyfunction!(std_asymptote, m)?)?;
    m.add_function(wrap_pyfunction!(normal_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(curve_table, m)?)?;
    m.add_function(wrap_pyfunction!(quadform_identity, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(endpoint_diff_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
