//! Python bindings: metrics, planning, prompt rendering and the pipeline runner.

use std::path::PathBuf;

use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use genrefine::corpus::{DatasetName, IntentKey};
use genrefine::runner::{Pipeline, PipelineConfig, ToyOptions};
use genrefine::Error;

pyo3::create_exception!(genrefine_py, GenrefineError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Usage(_) | Error::Argument(_) | Error::Domain(_) => PyValueError::new_err(e.to_string()),
        other => GenrefineError::new_err(format!("{other} (exit code {})", other.exit_code())),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| GenrefineError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// distinct-n over documents given as lists of utterances.
#[pyfunction]
fn distinct_n(documents: Vec<Vec<String>>, n: usize) -> PyResult<f64> {
    genrefine::evalkit::distinct_n(&documents, n).map_err(to_py)
}

/// Geometric mean of token probabilities, computed in log space.
#[pyfunction]
fn geometric_mean(probabilities: Vec<f64>) -> PyResult<f64> {
    genrefine::selection::geometric_mean(&probabilities).map_err(to_py)
}

/// One-tailed paired t-test of `a > b`.
#[pyfunction]
#[pyo3(signature = (a, b, alpha = 0.05))]
fn paired_t_test<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>, alpha: f64) -> PyResult<Bound<'py, PyAny>> {
    let r = genrefine::evalkit::paired_t_test_one_tail(&a, &b, alpha).map_err(to_py)?;
    json_to_py(py, &r)
}

/// Seeded trial plans for `clinc150` or `sgd` as a list of dicts.
#[pyfunction]
fn plan_trials<'py>(py: Python<'py>, dataset: &str, seed: u64, n_trials: usize) -> PyResult<Bound<'py, PyAny>> {
    let plans = match dataset.parse::<DatasetName>().map_err(to_py)? {
        DatasetName::Clinc150 => genrefine::splitter::plan_clinc150_trials(seed, n_trials),
        DatasetName::Sgd => genrefine::splitter::plan_sgd_trials(seed, n_trials),
        DatasetName::Custom => Err(Error::Usage("dataset: custom datasets need a corpus; use run_pipeline".into())),
    }
    .map_err(to_py)?;
    json_to_py(py, &plans)
}

#[pyfunction]
#[pyo3(signature = (intent, domain, inputs, n = 1))]
fn build_refiner_prompt(intent: &str, domain: &str, inputs: Vec<String>, n: usize) -> PyResult<String> {
    let key = IntentKey::new(intent, domain).map_err(to_py)?;
    genrefine::refiner::build_refiner_prompt(&key, &inputs, n).map_err(to_py)
}

/// Write a toy corpus, mock script and config into `directory`; returns the config path.
#[pyfunction]
#[pyo3(signature = (directory, noisy = false, seq2seq = "lexical", n_trials = 3))]
fn write_toy_workspace(directory: PathBuf, noisy: bool, seq2seq: &str, n_trials: usize) -> PyResult<String> {
    let opts = ToyOptions {
        noisy,
        seq2seq: seq2seq.to_string(),
        n_trials,
        ..ToyOptions::default()
    };
    let path = genrefine::runner::write_toy_workspace(&directory, &opts).map_err(to_py)?;
    Ok(path.to_string_lossy().into_owned())
}

/// Split, then run every stage; returns the aggregate report as a dict.
#[pyfunction]
fn run_pipeline<'py>(py: Python<'py>, config_path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let agg = py
        .detach(|| {
            let cfg = PipelineConfig::load(&config_path)?;
            Pipeline::split(cfg)?.run_all()
        })
        .map_err(to_py)?;
    json_to_py(py, &agg)
}

/// Run one stage (`generate`, `select`, `refine`, `evaluate`, `report`) of an existing run.
#[pyfunction]
#[pyo3(signature = (out_dir, stage, resume = false))]
fn run_stage(py: Python<'_>, out_dir: PathBuf, stage: &str, resume: bool) -> PyResult<()> {
    let stage = stage.to_string();
    py.detach(|| {
        let mut p = Pipeline::open(&out_dir)?.with_resume(resume);
        match stage.as_str() {
            "generate" => p.generate(),
            "select" => p.select(),
            "refine" => p.refine(),
            "evaluate" => p.evaluate().map(|_| ()),
            "report" => p.report().map(|_| ()),
            other => Err(Error::Usage(format!("stage: unknown stage `{other}`"))),
        }
    })
    .map_err(to_py)
}

#[pymodule]
pub fn genrefine_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("GenrefineError", m.py().get_type::<GenrefineError>())?;
    m.add_function(wrap_pyfunction!(distinct_n, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_mean, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(plan_trials, m)?)?;
    m.add_function(wrap_pyfunction!(build_refiner_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(write_toy_workspace, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(run_stage, m)?)?;
    Ok(())
}
