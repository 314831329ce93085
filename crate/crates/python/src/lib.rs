//! Python bindings: procedures, calibration, efficiency tables, sweeps and
//! the exact Bernoulli oracle.
//!
//! Composite results (calibration reports, sweep curves, oracle reports)
//! are returned as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use seqmt::calibration::{calibrate_analytic, IsScheme};
use seqmt::engine::{replication_rng, tag, try_par_indexed};
use seqmt::simulation::{
    default_oracle_cases, enumerate_exact, run_oracle_case, ErrorEstimation, RECIPES,
};
use seqmt::theory::{
    are_decentralized, are_synchronous, empirical_error, format_rational, gaussian_kl_exact,
    parse_rational, KlPair, RateRegime,
};
use seqmt::{
    analytic_thresholds, calibrate_monte_carlo, fwe_bound, run_replication, run_sweep,
    ConfigSelection, DecisionRecord, Error, ErrorMetric, ErrorTargets, ErrorType, McSettings,
    PriorBounds, ProcedureKind, SignalConfig, SweepSpec, Thresholds, DEFAULT_HORIZON,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Precondition(_) | Error::EnumerationTooLarge(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn kind(name: &str) -> PyResult<ProcedureKind> {
    ProcedureKind::parse(name).map_err(py_err)
}

fn error_type(name: &str) -> PyResult<ErrorType> {
    match name {
        "type1" | "I" => Ok(ErrorType::TypeI),
        "type2" | "II" => Ok(ErrorType::TypeII),
        other => Err(PyValueError::new_err(format!(
            "error type must be 'type1' or 'type2', got {other:?}"
        ))),
    }
}

fn selection(name: &str) -> PyResult<ConfigSelection> {
    match name {
        "auto" => Ok(ConfigSelection::Auto),
        "canonical" => Ok(ConfigSelection::Canonical),
        "exhaustive" => Ok(ConfigSelection::Exhaustive),
        other => Err(PyValueError::new_err(format!(
            "selection must be auto, canonical or exhaustive, got {other:?}"
        ))),
    }
}

fn settings(replications: usize, seed: u64, horizon: u64) -> PyResult<McSettings> {
    McSettings::new(replications, seed, horizon).map_err(py_err)
}

/// A priori bounds `l <= |A| <= u` on the number of signals among `k` streams.
#[pyclass(name = "PriorBounds", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyPriorBounds {
    inner: PriorBounds,
}

#[pymethods]
impl PyPriorBounds {
    #[new]
    fn new(l: usize, u: usize, k: usize) -> PyResult<Self> {
        Ok(Self {
            inner: PriorBounds::new(l, u, k).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn uninformative(k: usize) -> PyResult<Self> {
        Ok(Self {
            inner: PriorBounds::uninformative(k).map_err(py_err)?,
        })
    }

    #[getter]
    fn l(&self) -> usize {
        self.inner.l
    }

    #[getter]
    fn u(&self) -> usize {
        self.inner.u
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    fn admits(&self, size: usize) -> bool {
        self.inner.admits(size)
    }

    fn __repr__(&self) -> String {
        format!("PriorBounds(l={}, u={}, k={})", self.inner.l, self.inner.u, self.inner.k)
    }
}

/// Stopping levels `a, b` (SPRT exits) and `c, d` (gap levels), in nats.
#[pyclass(name = "Thresholds", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyThresholds {
    inner: Thresholds,
}

#[pymethods]
impl PyThresholds {
    #[new]
    fn new(a: f64, b: f64, c: f64, d: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Thresholds::new(a, b, c, d).map_err(py_err)?,
        })
    }

    /// Thresholds of `kind` driven by the single free parameter `x`.
    #[staticmethod]
    fn coupled(kind_name: &str, prior: &PyPriorBounds, x: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Thresholds::coupled(kind(kind_name)?, &prior.inner, x).map_err(py_err)?,
        })
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    #[getter]
    fn d(&self) -> f64 {
        self.inner.d
    }

    fn __repr__(&self) -> String {
        let t = &self.inner;
        format!("Thresholds(a={}, b={}, c={}, d={})", t.a, t.b, t.c, t.d)
    }
}

/// Simple-hypothesis stream model.
#[pyclass(name = "Model", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyModel {
    inner: seqmt::Model,
}

#[pymethods]
impl PyModel {
    /// Unit-variance Gaussian, mean 0 under the null and `mu` under the alternative.
    #[staticmethod]
    fn gaussian(mu: f64) -> PyResult<Self> {
        Ok(Self {
            inner: seqmt::Model::gaussian(mu).map_err(py_err)?,
        })
    }

    /// Bernoulli with success probability `p0` under the null and `p1` under the alternative.
    #[staticmethod]
    fn bernoulli(p0: f64, p1: f64) -> PyResult<Self> {
        Ok(Self {
            inner: seqmt::Model::bernoulli(p0, p1).map_err(py_err)?,
        })
    }

    /// KL numbers `(I, J)`.
    fn kl(&self) -> (f64, f64) {
        use seqmt::StreamModel;
        (self.inner.kl_alt(), self.inner.kl_null())
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

fn models(list: &[PyRef<'_, PyModel>]) -> Vec<seqmt::Model> {
    list.iter().map(|m| m.inner).collect()
}

/// Set of signal streams among `k`, given by one-based labels.
#[pyclass(name = "SignalConfig", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PySignalConfig {
    inner: SignalConfig,
}

#[pymethods]
impl PySignalConfig {
    #[new]
    fn new(k: usize, labels: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: SignalConfig::from_labels(k, &labels).map_err(py_err)?,
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    /// One-based labels of the signals.
    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.signals().map(|i| i + 1).collect()
    }

    fn __repr__(&self) -> String {
        format!("SignalConfig({})", self.inner.label())
    }
}

/// Stopping times and decisions of one replication.
#[pyclass(name = "DecisionRecord", frozen)]
struct PyDecisionRecord {
    inner: DecisionRecord,
}

#[pymethods]
impl PyDecisionRecord {
    #[getter]
    fn stop_time(&self) -> Vec<u64> {
        self.inner.stop_time.clone()
    }

    /// `True` where a signal was declared.
    #[getter]
    fn decision(&self) -> Vec<bool> {
        self.inner.decision.clone()
    }

    #[getter]
    fn overall_stop(&self) -> u64 {
        self.inner.overall_stop
    }

    fn __repr__(&self) -> String {
        format!(
            "DecisionRecord(stop_time={:?}, decision={:?})",
            self.inner.stop_time, self.inner.decision
        )
    }
}

/// Closed-form thresholds meeting familywise targets `alpha`, `beta`.
#[pyfunction]
fn analytic(kind_name: &str, alpha: f64, beta: f64, prior: &PyPriorBounds) -> PyResult<PyThresholds> {
    let targets = ErrorTargets::new(alpha, beta).map_err(py_err)?;
    Ok(PyThresholds {
        inner: analytic_thresholds(kind(kind_name)?, &targets, &prior.inner).map_err(py_err)?,
    })
}

/// Calibration report as a dict; `method` is "analytic" or "monte_carlo".
#[pyfunction]
#[pyo3(signature = (kind_name, models_list, prior, alpha, beta, method="analytic", replications=10_000, seed=1, horizon=DEFAULT_HORIZON, selection_name="auto"))]
#[allow(clippy::too_many_arguments)]
fn calibrate(
    py: Python<'_>,
    kind_name: &str,
    models_list: Vec<PyRef<'_, PyModel>>,
    prior: &PyPriorBounds,
    alpha: f64,
    beta: f64,
    method: &str,
    replications: usize,
    seed: u64,
    horizon: u64,
    selection_name: &str,
) -> PyResult<Py<PyAny>> {
    let k = kind(kind_name)?;
    let targets = ErrorTargets::new(alpha, beta).map_err(py_err)?;
    let ms = models(&models_list);
    let p = prior.inner;
    let result = match method {
        "analytic" => calibrate_analytic(k, &p, &targets),
        "monte_carlo" => {
            let s = settings(replications, seed, horizon)?;
            let sel = selection(selection_name)?;
            py.detach(|| calibrate_monte_carlo(k, &ms, &p, &targets, &sel, &s))
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "method must be analytic or monte_carlo, got {other:?}"
            )))
        }
    }
    .map_err(py_err)?;
    to_py(py, &result)
}

/// Upper bound on the familywise error of `error_type` ("type1"/"type2").
#[pyfunction]
fn error_bound(
    kind_name: &str,
    prior: &PyPriorBounds,
    thresholds: &PyThresholds,
    config: &PySignalConfig,
    error_type_name: &str,
) -> PyResult<f64> {
    Ok(fwe_bound(
        kind(kind_name)?,
        &prior.inner,
        &thresholds.inner,
        &config.inner,
        error_type(error_type_name)?,
    ))
}

/// Replication `index` of the reproducible stream named by `seed`.
#[pyfunction]
#[pyo3(signature = (kind_name, models_list, config, thresholds, prior, seed=1, index=0, horizon=DEFAULT_HORIZON))]
#[allow(clippy::too_many_arguments)]
fn replicate(
    kind_name: &str,
    models_list: Vec<PyRef<'_, PyModel>>,
    config: &PySignalConfig,
    thresholds: &PyThresholds,
    prior: &PyPriorBounds,
    seed: u64,
    index: u64,
    horizon: u64,
) -> PyResult<PyDecisionRecord> {
    let k = kind(kind_name)?;
    let mut rng = replication_rng(seed, tag(&[0xB1D, k as u64]), index);
    let inner = run_replication(
        k,
        &models(&models_list),
        &config.inner,
        &thresholds.inner,
        &prior.inner,
        &mut rng,
        horizon,
    )
    .map_err(py_err)?;
    Ok(PyDecisionRecord { inner })
}

/// Plain Monte Carlo error metrics and mean decision times; metrics whose
/// conditioning event never occurred map to `None`.
#[pyfunction]
#[pyo3(signature = (kind_name, models_list, config, thresholds, prior, replications=10_000, seed=1, horizon=DEFAULT_HORIZON))]
#[allow(clippy::too_many_arguments)]
fn error_rates(
    py: Python<'_>,
    kind_name: &str,
    models_list: Vec<PyRef<'_, PyModel>>,
    config: &PySignalConfig,
    thresholds: &PyThresholds,
    prior: &PyPriorBounds,
    replications: usize,
    seed: u64,
    horizon: u64,
) -> PyResult<Py<PyAny>> {
    #[derive(Serialize)]
    struct Rates {
        metrics: Vec<seqmt::ErrorReport>,
        mean_time: Vec<f64>,
    }
    let k = kind(kind_name)?;
    let ms = models(&models_list);
    let (c, t, p) = (&config.inner, &thresholds.inner, &prior.inner);
    let s = settings(replications, seed, horizon)?;
    let rates = py
        .detach(|| -> seqmt::Result<Rates> {
            let cell = tag(&[0xB1D, k as u64]);
            let records = try_par_indexed(s.replications, |i| {
                let mut rng = replication_rng(s.seed, cell, i);
                run_replication(k, &ms, c, t, p, &mut rng, s.horizon)
            })?;
            let metrics = ErrorMetric::ALL
                .iter()
                .map(|&m| empirical_error(&records, c, m))
                .collect::<seqmt::Result<_>>()?;
            let n = records.len() as f64;
            let mean_time = (0..c.k())
                .map(|j| records.iter().map(|r| r.stop_time[j] as f64).sum::<f64>() / n)
                .collect();
            Ok(Rates { metrics, mean_time })
        })
        .map_err(py_err)?;
    to_py(py, &rates)
}

/// Exact efficiency table of `family` ("decentralized" or "synchronous").
///
/// KL numbers come from Gaussian `means` or explicit `(I, J)` pairs, all as
/// decimal or fraction strings. Without `l`/`u` each row uses the known
/// count `l = u = |A|`. `r` is the ratio `|log alpha| / |log beta|`.
#[pyfunction]
#[pyo3(signature = (family, rows, means=None, kl=None, l=None, u=None, r="1"))]
fn are_table(
    family: &str,
    rows: Vec<Vec<usize>>,
    means: Option<Vec<String>>,
    kl: Option<Vec<(String, String)>>,
    l: Option<usize>,
    u: Option<usize>,
    r: &str,
) -> PyResult<Vec<Vec<String>>> {
    let kls: Vec<KlPair<num_rational::Rational64>> = match (means, kl) {
        (Some(means), None) => means
            .iter()
            .map(|m| parse_rational(m).map(gaussian_kl_exact))
            .collect::<seqmt::Result<_>>()
            .map_err(py_err)?,
        (None, Some(pairs)) => pairs
            .iter()
            .map(|(i, j)| Ok((parse_rational(i)?, parse_rational(j)?)))
            .collect::<seqmt::Result<_>>()
            .map_err(py_err)?,
        _ => return Err(PyValueError::new_err("give exactly one of means or kl")),
    };
    let k = kls.len();
    let regime = RateRegime::Ratio(parse_rational(r).map_err(py_err)?);
    rows.iter()
        .map(|labels| {
            let c = SignalConfig::from_labels(k, labels)?;
            let prior = match (l, u) {
                (Some(l), Some(u)) => PriorBounds::new(l, u, k)?,
                (None, None) => PriorBounds::new(c.size(), c.size(), k)?,
                _ => return Err(Error::config("give both l and u or neither")),
            };
            (0..k)
                .map(|j| {
                    let v = match family {
                        "decentralized" => are_decentralized(j, &c, &prior, &kls)?,
                        "synchronous" => are_synchronous(j, &c, &prior, &kls, &regime)?,
                        other => return Err(Error::config(format!("unknown family {other:?}"))),
                    };
                    Ok(format_rational(&v))
                })
                .collect()
        })
        .collect::<seqmt::Result<_>>()
        .map_err(py_err)
}

/// Expected decision time against error rate curves, one dict per
/// procedure and configuration.
#[pyfunction]
#[pyo3(signature = (kinds, models_list, prior, configs, grid, replications=10_000, seed=1, horizon=DEFAULT_HORIZON, max_replications=None, estimation="auto", allow_partial=false))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    py: Python<'_>,
    kinds: Vec<String>,
    models_list: Vec<PyRef<'_, PyModel>>,
    prior: &PyPriorBounds,
    configs: Vec<PyRef<'_, PySignalConfig>>,
    grid: Vec<f64>,
    replications: usize,
    seed: u64,
    horizon: u64,
    max_replications: Option<usize>,
    estimation: &str,
    allow_partial: bool,
) -> PyResult<Py<PyAny>> {
    let kinds = kinds.iter().map(|k| kind(k)).collect::<PyResult<Vec<_>>>()?;
    let mut spec = SweepSpec::new(
        kinds,
        models(&models_list),
        prior.inner,
        configs.iter().map(|c| c.inner.clone()).collect(),
        grid,
        settings(replications, seed, horizon)?,
    );
    spec.estimation = match estimation {
        "auto" => ErrorEstimation::Auto,
        "plain" => ErrorEstimation::Plain,
        "importance_sampling" => ErrorEstimation::ImportanceSampling,
        other => return Err(PyValueError::new_err(format!("unknown estimation {other:?}"))),
    };
    spec.scheme = IsScheme::Auto;
    spec.allow_partial = allow_partial;
    if let Some(m) = max_replications {
        spec.max_replications = m;
    }
    spec.validate().map_err(py_err)?;
    let curves = py.detach(|| run_sweep(&spec)).map_err(py_err)?;
    to_py(py, &curves)
}

/// Exact law of a Bernoulli procedure up to `depth` steps.
#[pyfunction]
fn exact_distribution(
    py: Python<'_>,
    kind_name: &str,
    models_list: Vec<PyRef<'_, PyModel>>,
    config: &PySignalConfig,
    thresholds: &PyThresholds,
    prior: &PyPriorBounds,
    depth: u64,
) -> PyResult<Py<PyAny>> {
    let ms = models(&models_list);
    let k = kind(kind_name)?;
    let (c, t, p) = (&config.inner, &thresholds.inner, &prior.inner);
    let exact = py.detach(|| enumerate_exact(&ms, k, c, t, p, depth)).map_err(py_err)?;
    to_py(py, &exact)
}

/// Built-in oracle comparisons, one report per case.
#[pyfunction]
#[pyo3(signature = (replications=10_000, seed=1))]
fn oracle(py: Python<'_>, replications: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let s = settings(replications, seed, DEFAULT_HORIZON)?;
    let reports = py
        .detach(|| -> seqmt::Result<Vec<_>> {
            default_oracle_cases()?
                .iter()
                .map(|c| run_oracle_case(c, &s))
                .collect()
        })
        .map_err(py_err)?;
    #[derive(Serialize)]
    struct Summary {
        case: String,
        passes: bool,
        worst_sigmas: f64,
        residual_mass: f64,
        rows: Vec<seqmt::simulation::OracleRow>,
    }
    let out: Vec<Summary> = reports
        .into_iter()
        .map(|r| Summary {
            case: r.case.name.clone(),
            passes: r.passes(),
            worst_sigmas: r.worst_sigmas(),
            residual_mass: r.exact.residual_mass,
            rows: r.rows,
        })
        .collect();
    to_py(py, &out)
}

/// Names and descriptions of the built-in sweep presets.
#[pyfunction]
fn recipes() -> Vec<(&'static str, &'static str)> {
    RECIPES.to_vec()
}

#[pymodule]
#[pyo3(name = "seqmt")]
fn seqmt_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", seqmt::VERSION)?;
    m.add_class::<PyPriorBounds>()?;
    m.add_class::<PyThresholds>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PySignalConfig>()?;
    m.add_class::<PyDecisionRecord>()?;
    m.add_function(wrap_pyfunction!(analytic, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(error_bound, m)?)?;
    m.add_function(wrap_pyfunction!(replicate, m)?)?;
    m.add_function(wrap_pyfunction!(error_rates, m)?)?;
    m.add_function(wrap_pyfunction!(are_table, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(exact_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(recipes, m)?)?;
    Ok(())
}
