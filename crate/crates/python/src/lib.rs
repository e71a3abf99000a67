//! Python bindings: privatize data, analyze a release, impute statistics and
//! run simulation tables.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use pumba::constraints::CountSupport;
use pumba::experiments::harness::mechanism_for;
use pumba::experiments::{emit_table, preset, run_experiment, Design, ExperimentConfig, TableFormat};
use pumba::imputation::{impute as impute_release, ImputationOptions};
use pumba::mechanisms::release;
use pumba::models::{model_for_task, CountyPublic, CountyTable, RawData, TaskModel};
use pumba::pumba::{pumba_draws, pumba_meancov};
use pumba::{PosteriorSummary, PrivateRelease, RngHandle};

fn err(e: pumba::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn design_for(task: &str) -> PyResult<Design> {
    match task {
        "bounded_mean" => Ok(Design::BoundedMean),
        "linreg_ssp" => Ok(Design::LinregSsp),
        "county_linear" => Ok(Design::CountyLinear),
        "county_logistic" => Ok(Design::CountyLogistic),
        other => Err(PyValueError::new_err(format!("unknown task '{other}'"))),
    }
}

fn support_for(name: &str) -> PyResult<CountSupport> {
    match name {
        "continuous" => Ok(CountSupport::Continuous),
        "discrete" => Ok(CountSupport::Discrete),
        other => Err(PyValueError::new_err(format!("support must be 'continuous' or 'discrete', got '{other}'"))),
    }
}

fn model_for(task: &str, public_csv: Option<&str>, support: &str) -> PyResult<Box<dyn TaskModel>> {
    let public = public_csv.map(|s| CountyPublic::read_csv(s.as_bytes())).transpose().map_err(err)?;
    model_for_task(task, public, support_for(support)?).map_err(err)
}

/// A privatized statistic with its noise law and privacy budget.
#[pyclass(name = "PrivateRelease", frozen, module = "pumba_py")]
struct PyRelease {
    inner: PrivateRelease,
}

#[pymethods]
impl PyRelease {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: PrivateRelease::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn task_id(&self) -> &str {
        &self.inner.task_id
    }

    #[getter]
    fn n(&self) -> u64 {
        self.inner.n
    }

    #[getter]
    fn s_dp(&self) -> Vec<f64> {
        self.inner.s_dp.clone()
    }

    #[getter]
    fn noise_scales(&self) -> Vec<f64> {
        self.inner.noise.scales.clone()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.budget.epsilon
    }

    fn __repr__(&self) -> String {
        format!("PrivateRelease(task_id='{}', n={}, dim={})", self.inner.task_id, self.inner.n, self.inner.dim())
    }
}

#[pyclass(name = "PosteriorSummary", frozen, module = "pumba_py")]
struct PySummary {
    inner: PosteriorSummary,
}

#[pymethods]
impl PySummary {
    #[getter]
    fn mode(&self) -> &str {
        match self.inner.mode {
            pumba::PosteriorMode::Draws => "draws",
            pumba::PosteriorMode::MeanCov => "mean_cov",
        }
    }

    #[getter]
    fn param_names(&self) -> Vec<String> {
        self.inner.param_names.clone()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean.clone()
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        self.inner.cov.to_rows()
    }

    /// `(lo, hi)` per parameter.
    #[getter]
    fn intervals(&self) -> Vec<(f64, f64)> {
        self.inner.intervals.iter().map(|c| (c.lo, c.hi)).collect()
    }

    #[getter]
    fn level(&self) -> f64 {
        self.inner.intervals.first().map_or(f64::NAN, |c| c.level)
    }

    #[getter]
    fn draws(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.draws.clone()
    }

    #[getter]
    fn mc_standard_errors(&self) -> Vec<f64> {
        self.inner.mc_standard_errors.clone()
    }

    #[getter]
    fn imputation_acceptance_rate(&self) -> f64 {
        self.inner.imputation.acceptance_rate
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("PosteriorSummary(mode='{}', params={:?})", self.mode(), self.inner.param_names)
    }
}

/// Privatize raw data. `data` is a list of floats for `bounded_mean`, a list
/// of `(x, y)` pairs for `linreg_ssp`, and county-table CSV text for the
/// county tasks.
#[pyfunction]
#[pyo3(signature = (task, data, epsilon, sensitivity = 8f64.sqrt(), seed = 1))]
fn privatize(task: &str, data: &Bound<'_, PyAny>, epsilon: Vec<f64>, sensitivity: f64, seed: u64) -> PyResult<PyRelease> {
    let design = design_for(task)?;
    let raw = match design {
        Design::BoundedMean => RawData::Scalars(data.extract()?),
        Design::LinregSsp => RawData::Pairs(data.extract()?),
        _ => {
            let text: String = data.extract()?;
            RawData::Counties(CountyTable::read_csv(text.as_bytes()).map_err(err)?)
        }
    };
    let public = match &raw {
        RawData::Counties(t) => Some(t.public()),
        _ => None,
    };
    let model = model_for_task(task, public, CountSupport::Continuous).map_err(err)?;
    let t = model.statistic(&raw).map_err(err)?;
    let mut cfg = ExperimentConfig {
        design,
        ..Default::default()
    };
    cfg.privacy.epsilon = epsilon;
    cfg.county.sensitivity = sensitivity;
    let (noise, budget) = mechanism_for(&cfg, model.k()).map_err(err)?;
    let inner = release(&mut RngHandle::new(seed, 0), &t, &noise, &budget).map_err(err)?;
    Ok(PyRelease { inner })
}

/// Posterior summary of a release. `mode` is `"draws"` or `"mean_cov"`.
#[pyfunction]
#[pyo3(signature = (release, mode = "draws", draws = 1000, level = 0.95, seed = 1, public_csv = None, support = "continuous"))]
#[allow(clippy::too_many_arguments)]
fn analyze(
    py: Python<'_>,
    release: &PyRelease,
    mode: &str,
    draws: usize,
    level: f64,
    seed: u64,
    public_csv: Option<&str>,
    support: &str,
) -> PyResult<PySummary> {
    let model = model_for(&release.inner.task_id, public_csv, support)?;
    let rel = &release.inner;
    let inner = py
        .detach(|| {
            let mut rng = RngHandle::new(seed, 0);
            match mode {
                "draws" => pumba_draws(&mut rng, rel, model.as_ref(), draws, level),
                "mean_cov" => pumba_meancov(&mut rng, rel, model.as_ref(), draws, level),
                other => Err(pumba::Error::Config(format!("mode must be 'draws' or 'mean_cov', got '{other}'"))),
            }
        })
        .map_err(err)?;
    Ok(PySummary { inner })
}

/// Confidential statistics drawn from the noise law given the release,
/// restricted to the statistic's support. One row per draw.
#[pyfunction]
#[pyo3(signature = (release, draws = 1000, seed = 1, public_csv = None, support = "continuous"))]
fn impute(
    py: Python<'_>,
    release: &PyRelease,
    draws: usize,
    seed: u64,
    public_csv: Option<&str>,
    support: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let model = model_for(&release.inner.task_id, public_csv, support)?;
    let cs = model.constraints(release.inner.n).map_err(err)?;
    let rel = &release.inner;
    let report = py
        .detach(|| impute_release(&mut RngHandle::new(seed, 0), rel, &cs, draws, &ImputationOptions::default()))
        .map_err(err)?;
    Ok(report.draws)
}

/// Run the experiment described by TOML text and return the table as CSV
/// or markdown.
#[pyfunction]
#[pyo3(signature = (config_toml, seed = None, replicates = None, format = None))]
fn simulate(py: Python<'_>, config_toml: &str, seed: Option<u64>, replicates: Option<usize>, format: Option<&str>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(b) = replicates {
        cfg.replicates = b;
    }
    match format {
        Some("csv") => cfg.format = TableFormat::Csv,
        Some("markdown") => cfg.format = TableFormat::Markdown,
        Some(other) => return Err(PyValueError::new_err(format!("format must be 'csv' or 'markdown', got '{other}'"))),
        None => {}
    }
    py.detach(|| run_experiment(&cfg).and_then(|t| emit_table(&t, cfg.format)))
        .map_err(err)
}

/// TOML text of a named preset configuration.
#[pyfunction]
fn preset_config(name: &str) -> PyResult<String> {
    preset(name).and_then(|c| c.to_toml_string()).map_err(err)
}

#[pymodule]
fn pumba_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("TASK_IDS", pumba::models::TASK_IDS.to_vec())?;
    m.add("PRESET_NAMES", pumba::experiments::presets::PRESET_NAMES.to_vec())?;
    m.add_class::<PyRelease>()?;
    m.add_class::<PySummary>()?;
    m.add_function(wrap_pyfunction!(privatize, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(impute, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(preset_config, m)?)?;
    Ok(())
}
