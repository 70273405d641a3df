//! Python bindings: configuration, drop generation and inspection, path-loss
//! helpers and the Monte-Carlo experiment.

use std::collections::BTreeMap;

use absf_core::config::ScenarioConfig;
use absf_core::deployment::{advance_step_with, generate_scenario, Scenario};
use absf_core::harness::{self, Scheme};
use absf_core::propagation::{self, ShadowingField};
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Scenario parameters. Keyword overrides use dotted config keys.
#[pyclass(name = "Config", module = "absf_sim", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml = "", overrides = Vec::new()))]
    fn new(toml: &str, overrides: Vec<String>) -> PyResult<Self> {
        let inner = ScenarioConfig::from_toml_with_overrides(toml, &overrides).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Copy with `key=value` overrides applied.
    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        Self::new(&self.inner.to_toml_string(), overrides)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[getter]
    fn num_mues(&self) -> usize {
        self.inner.num_mues
    }

    #[getter]
    fn num_henbs(&self) -> usize {
        self.inner.num_henbs
    }

    #[getter]
    fn num_runs(&self) -> usize {
        self.inner.num_runs
    }

    #[getter]
    fn num_steps(&self) -> usize {
        self.inner.num_steps
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.rng_seed
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(num_mues={}, num_henbs={}, num_runs={}, num_steps={}, seed={})",
            self.inner.num_mues, self.inner.num_henbs, self.inner.num_runs, self.inner.num_steps, self.inner.rng_seed
        )
    }
}

/// Per-victim requirement.
#[pyclass(name = "Victim", module = "absf_sim", get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyVictim {
    mue_id: u32,
    sinr_db: f64,
    aggressors: Vec<u32>,
    alpha: f64,
    feasible: bool,
    post_sinr_db: f64,
}

/// Victims, per-HeNB rates, coalitions and patterns of one drop under the
/// adaptive scheme.
#[pyclass(name = "DropAnalysis", module = "absf_sim", get_all)]
struct PyDropAnalysis {
    run: usize,
    step: usize,
    mue_ids: Vec<u32>,
    henb_ids: Vec<u32>,
    sinr_db: Vec<f64>,
    post_sinr_db: Vec<f64>,
    victims: Vec<PyVictim>,
    /// HeNB id -> required rate, aggressors only.
    henb_rates: BTreeMap<u32, f64>,
    /// HeNB id -> pattern string such as `XX........`, aggressors only.
    patterns: BTreeMap<u32, String>,
    /// Member HeNB ids per coalition.
    coalitions: Vec<Vec<u32>>,
}

/// One drop at one displacement step.
#[pyclass(name = "Scenario", module = "absf_sim")]
struct PyScenario {
    inner: Scenario,
    shadowing: ShadowingField,
}

#[pymethods]
impl PyScenario {
    /// Generate drop `run` and advance it `step` times.
    #[staticmethod]
    #[pyo3(signature = (config, run = 0, step = 0))]
    fn generate(config: &PyConfig, run: usize, step: usize) -> PyResult<Self> {
        let cfg = &config.inner;
        if step > cfg.num_steps {
            return Err(PyIndexError::new_err(format!(
                "step {step} > num_steps {}",
                cfg.num_steps
            )));
        }
        let mut inner = generate_scenario(cfg, run).map_err(value_err)?;
        let shadowing = ShadowingField::for_scenario(&inner);
        for _ in 0..step {
            inner = advance_step_with(&inner, &shadowing).map_err(value_err)?;
        }
        Ok(Self { inner, shadowing })
    }

    /// Parse the scenario text format.
    #[staticmethod]
    fn from_text(text: &str, config: &PyConfig) -> PyResult<Self> {
        let inner = Scenario::from_text(text, &config.inner).map_err(value_err)?;
        let shadowing = ShadowingField::for_scenario(&inner);
        Ok(Self { inner, shadowing })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Next displacement step.
    fn advance(&self) -> PyResult<Self> {
        Ok(Self {
            inner: advance_step_with(&self.inner, &self.shadowing).map_err(value_err)?,
            shadowing: self.shadowing.clone(),
        })
    }

    #[getter]
    fn step(&self) -> usize {
        self.inner.step_index
    }

    #[getter]
    fn run(&self) -> usize {
        self.inner.run_index
    }

    /// `(id, kind, x, y, indoor)` per node.
    fn nodes(&self) -> Vec<(u32, &'static str, f64, f64, bool)> {
        self.inner
            .nodes
            .iter()
            .map(|n| (n.id.0, n.kind.as_str(), n.position.x, n.position.y, n.indoor))
            .collect()
    }

    fn min_mue_henb_distance(&self) -> Option<f64> {
        self.inner.min_mue_henb_distance()
    }

    fn analyze(&self) -> PyResult<PyDropAnalysis> {
        let a = harness::analyze_drop(&self.inner, &self.shadowing).map_err(value_err)?;
        let plan = harness::plan_for(&Scheme::proposed(), &a, &self.inner.config);
        let post = harness::post_muting_gamma(&a.report, &plan);
        let r = &a.report;
        let db = absf_core::units::linear_to_db;
        let henb = |f: usize| r.henb_ids[f].0;
        let aggressor_idx: Vec<usize> = (0..r.num_henbs()).filter(|&f| a.victim_sets.is_aggressor(f)).collect();
        Ok(PyDropAnalysis {
            run: self.inner.run_index,
            step: self.inner.step_index,
            mue_ids: r.mue_ids.iter().map(|i| i.0).collect(),
            henb_ids: r.henb_ids.iter().map(|i| i.0).collect(),
            sinr_db: r.gamma_db.clone(),
            post_sinr_db: post.iter().map(|&g| db(g)).collect(),
            victims: a
                .requirements
                .iter()
                .map(|q| PyVictim {
                    mue_id: q.mue_id.0,
                    sinr_db: r.gamma_db[q.mue],
                    aggressors: a.aggressors.of(q.mue).iter().map(|&f| henb(f)).collect(),
                    alpha: q.alpha,
                    feasible: q.feasible,
                    post_sinr_db: db(post[q.mue]),
                })
                .collect(),
            henb_rates: aggressor_idx.iter().map(|&f| (henb(f), a.henb_rates[f])).collect(),
            patterns: aggressor_idx
                .iter()
                .map(|&f| (henb(f), plan.patterns[f].to_string()))
                .collect(),
            coalitions: a
                .coalitions
                .iter()
                .map(|c| c.members.iter().map(|&f| henb(f)).collect())
                .collect(),
        })
    }
}

/// Outcome of [`run_experiment`]: CSV text per file name and the summary JSON.
#[pyclass(name = "Experiment", module = "absf_sim", get_all)]
struct PyExperiment {
    runs_completed: usize,
    csv: BTreeMap<String, String>,
    summary_json: String,
}

#[pymethods]
impl PyExperiment {
    /// `(mean, stddev, n)` of `metric` for `scheme` at every step. Metrics:
    /// muted_rate, sinr_pre_db, sinr_post_db, mue_throughput_kbps,
    /// fue_throughput_kbps, outage.
    fn trace(&self, scheme: &str, metric: &str) -> PyResult<Vec<(f64, f64, usize)>> {
        let v: serde_json::Value = serde_json::from_str(&self.summary_json).map_err(value_err)?;
        let t = v["schemes"]
            .as_array()
            .and_then(|a| a.iter().find(|s| s["scheme"]["label"] == scheme))
            .ok_or_else(|| value_err(format!("unknown scheme {scheme}")))?;
        t["steps"]
            .as_array()
            .unwrap_or(&Vec::new())
            .iter()
            .map(|s| {
                let m = &s[metric];
                match (m["mean"].as_f64(), m["stddev"].as_f64(), m["n"].as_u64()) {
                    (Some(a), Some(b), Some(n)) => Ok((a, b, n as usize)),
                    _ => Err(value_err(format!("unknown metric {metric}"))),
                }
            })
            .collect()
    }
}

/// Run the Monte-Carlo experiment. `schemes` is a comma-separated list such
/// as `"proposed,fixed:0.1,none"`.
#[pyfunction]
#[pyo3(signature = (config, schemes = "proposed,fixed:0.1,fixed:0.2,fixed:0.3,none", workers = 1))]
fn run_experiment(py: Python<'_>, config: &PyConfig, schemes: &str, workers: usize) -> PyResult<PyExperiment> {
    let schemes = Scheme::parse_list(schemes).map_err(value_err)?;
    let cfg = config.inner.clone();
    let report = py
        .detach(move || harness::run_experiment(&cfg, &schemes, workers))
        .map_err(value_err)?;
    Ok(PyExperiment {
        runs_completed: report.runs_completed,
        csv: report
            .csv_documents()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        summary_json: report.summary_json(),
    })
}

#[pyfunction]
#[pyo3(signature = (distance, indoor = false, wall_loss = 20.0))]
fn macro_pathloss(distance: f64, indoor: bool, wall_loss: f64) -> PyResult<f64> {
    propagation::macro_pathloss(distance, indoor, wall_loss).map_err(value_err)
}

#[pyfunction]
fn femto_pathloss(distance: f64) -> PyResult<f64> {
    propagation::femto_pathloss(distance).map_err(value_err)
}

/// Contiguous blanking pattern for `alpha` in a frame of `subframes`.
#[pyfunction]
#[pyo3(signature = (alpha, subframes = 10, offset = 0))]
fn quantize(alpha: f64, subframes: usize, offset: usize) -> PyResult<String> {
    if subframes == 0 {
        return Err(value_err("subframes must be >= 1"));
    }
    let frame = absf_core::config::FrameConfig {
        subframes,
        ..Default::default()
    };
    Ok(absf_core::absf::quantize_pattern(alpha, &frame, offset).to_string())
}

#[pymodule]
fn absf_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyDropAnalysis>()?;
    m.add_class::<PyVictim>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(macro_pathloss, m)?)?;
    m.add_function(wrap_pyfunction!(femto_pathloss, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    Ok(())
}
