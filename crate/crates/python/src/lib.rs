//! Python bindings.
//!
//! Instances, run configurations and reports cross the boundary as JSON
//! strings in the same formats the command-line tool reads and writes, so
//! Python callers can use `json.loads` on every result.

use ddro::ambiguity::{is_nonempty as nonempty, AmbiguityType, Risk};
use ddro::bench::enumerate_two_stage;
use ddro::bench::patterns::{pattern_cases, pattern_instance as pattern};
use ddro::model::{generate_instance, Distribution, GenSpec, Instance};
use ddro::sddip::{run, run_type3_bounds, RunConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_error(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_type(ty: u8) -> PyResult<AmbiguityType> {
    match ty {
        1 => Ok(AmbiguityType::Type1),
        2 => Ok(AmbiguityType::Type2),
        3 => Ok(AmbiguityType::Type3),
        _ => Err(PyValueError::new_err(format!("ambiguity type must be 1, 2 or 3, got {ty}"))),
    }
}

fn parse_instance(json: &str) -> PyResult<Instance> {
    let inst = Instance::from_json(json).map_err(value_error)?;
    inst.validate().map_err(value_error)?;
    Ok(inst)
}

fn parse_config(json: Option<&str>) -> PyResult<RunConfig> {
    json.map_or_else(|| Ok(RunConfig::default()), |s| serde_json::from_str(s).map_err(value_error))
}

/// Generates a seeded instance and returns it as JSON.
#[pyfunction]
#[pyo3(signature = (seed, t=2, i=3, j=1, k=10, rho=0.5, distribution="normal", budget=100.0))]
#[allow(clippy::too_many_arguments)]
fn generate(seed: u64, t: usize, i: usize, j: usize, k: usize, rho: f64, distribution: &str, budget: f64) -> PyResult<String> {
    let distribution = match distribution {
        "normal" => Distribution::Normal,
        "lognormal" | "log_normal" => Distribution::LogNormal,
        other => return Err(PyValueError::new_err(format!("unknown distribution {other:?}"))),
    };
    let spec = GenSpec { rho_bar: rho, distribution, budget, ..GenSpec::new(seed, t, i, j, k) };
    let inst = generate_instance(&spec);
    inst.validate().map_err(value_error)?;
    Ok(inst.to_json())
}

/// Two-stage pattern instance (for example `"1-1"`) with a seeded support of
/// size `k`, as JSON.
#[pyfunction]
#[pyo3(signature = (case_id, seed=0, k=20))]
fn pattern_instance(case_id: &str, seed: u64, k: usize) -> PyResult<String> {
    let case = [AmbiguityType::Type1, AmbiguityType::Type2, AmbiguityType::Type3]
        .into_iter()
        .flat_map(pattern_cases)
        .find(|c| c.id == case_id)
        .ok_or_else(|| PyValueError::new_err(format!("unknown pattern {case_id:?}")))?;
    if k == 0 {
        return Err(PyValueError::new_err("k must be positive"));
    }
    Ok(pattern(&case, seed, k).to_json())
}

/// Runs the decomposition solver and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (instance, config=None))]
fn solve(py: Python<'_>, instance: &str, config: Option<&str>) -> PyResult<String> {
    let inst = parse_instance(instance)?;
    let cfg = parse_config(config)?;
    let report = py.detach(|| run(&inst, &cfg)).map_err(runtime_error)?;
    Ok(report.to_json())
}

/// Runs both Type-3 bounding passes and returns `(lower_report,
/// upper_report)` as JSON.
#[pyfunction]
#[pyo3(signature = (instance, config=None))]
fn solve_type3_bounds(py: Python<'_>, instance: &str, config: Option<&str>) -> PyResult<(String, String)> {
    let inst = parse_instance(instance)?;
    let cfg = parse_config(config)?;
    let (lo, hi) = py.detach(|| run_type3_bounds(&inst, &cfg)).map_err(runtime_error)?;
    Ok((lo.to_json(), hi.to_json()))
}

/// Enumerates every budget-feasible first-stage decision of a two-stage
/// instance and returns the candidate table as JSON.
#[pyfunction]
#[pyo3(signature = (instance, ty=1, risk_lambda=None, risk_alpha=0.95))]
fn enumerate(py: Python<'_>, instance: &str, ty: u8, risk_lambda: Option<f64>, risk_alpha: f64) -> PyResult<String> {
    let inst = parse_instance(instance)?;
    let ty = parse_type(ty)?;
    let risk = risk_lambda.map(|lambda| Risk { lambda, alpha: risk_alpha });
    let e = py.detach(|| enumerate_two_stage(&inst, ty, risk)).map_err(runtime_error)?;
    serde_json::to_string_pretty(&e).map_err(runtime_error)
}

/// Whether the stage-`stage` ambiguity set is nonempty at decision `x`.
#[pyfunction]
#[pyo3(signature = (instance, ty, stage, x))]
fn is_nonempty(instance: &str, ty: u8, stage: usize, x: Vec<f64>) -> PyResult<bool> {
    let inst = parse_instance(instance)?;
    if x.len() != inst.i {
        return Err(PyValueError::new_err(format!("x has {} entries, expected {}", x.len(), inst.i)));
    }
    if !(2..=inst.t).contains(&stage) {
        return Err(PyValueError::new_err(format!("stage must lie in 2..={}", inst.t)));
    }
    Ok(nonempty(&inst, parse_type(ty)?, stage, &x))
}

#[pymodule]
fn ddro_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(pattern_instance, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_type3_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(is_nonempty, m)?)?;
    Ok(())
}
