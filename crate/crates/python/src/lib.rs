//! Python bindings: the contact reference, tuning, spectra and a pass-through
//! to the command-line interface.

use std::collections::BTreeMap;

use ::faddeev1d as core;
use core::analysis;
use core::config::RunConfig;
use core::error::Error;
use core::faddeev::Symmetry;
use core::potentials::{PotentialSpec, Shape};
use core::twobody;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn config(json: Option<&str>) -> PyResult<RunConfig> {
    match json {
        Some(text) => RunConfig::from_json(text).map_err(py_err),
        None => Ok(RunConfig::default()),
    }
}

fn shape(name: &str) -> PyResult<Shape> {
    name.parse().map_err(py_err)
}

/// Contact-interaction ratios `{n: eps}` for mass ratio `alpha`.
#[pyfunction]
#[pyo3(signature = (alpha = 20.0))]
fn reference_ratios(py: Python<'_>, alpha: f64) -> PyResult<BTreeMap<usize, f64>> {
    py.detach(|| analysis::reference_ratios(alpha)).map_err(py_err)
}

/// Strength that puts two-body state `r` at `e2`. Returns
/// `(v0, achieved_e2, iterations)`.
#[pyfunction]
#[pyo3(signature = (shape_name, r, e2, config_json = None))]
fn tune(
    py: Python<'_>,
    shape_name: &str,
    r: usize,
    e2: f64,
    config_json: Option<&str>,
) -> PyResult<(f64, f64, usize)> {
    let cfg = config(config_json)?;
    let s = shape(shape_name)?;
    let t = py
        .detach(|| {
            let grid = cfg.grid.build(e2)?;
            twobody::tune_magnitude(s, r, e2, &grid)
        })
        .map_err(py_err)?;
    Ok((t.potential.v0, t.achieved, t.iterations))
}

/// Two-body bound states of a fixed-strength potential as `(r, energy, parity)`.
#[pyfunction]
#[pyo3(signature = (shape_name, v0, r_max = 10, grid_e2 = -1e-3))]
fn two_body(
    py: Python<'_>,
    shape_name: &str,
    v0: f64,
    r_max: usize,
    grid_e2: f64,
) -> PyResult<Vec<(usize, f64, i32)>> {
    let p = PotentialSpec::new(shape(shape_name)?, v0).map_err(py_err)?;
    let grid = RunConfig::default().grid.build(grid_e2).map_err(py_err)?;
    let states = py.detach(|| twobody::bound_energies(&p, &grid, r_max)).map_err(py_err)?;
    Ok(states.into_iter().map(|s| (s.r, s.energy, s.parity)).collect())
}

/// Three-body states of `shape` tuned to resonance `r` at `e2`, as a list of
/// dicts with keys `n`, `symmetry`, `energy` and `ratio`.
#[pyfunction]
#[pyo3(signature = (shape_name, r, e2, symmetry = None, include = None, config_json = None))]
fn spectrum<'py>(
    py: Python<'py>,
    shape_name: &str,
    r: usize,
    e2: f64,
    symmetry: Option<&str>,
    include: Option<Vec<usize>>,
    config_json: Option<&str>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config(config_json)?;
    let s = shape(shape_name)?;
    let sym: Option<Symmetry> = symmetry.map(str::parse).transpose().map_err(py_err)?;
    let states = py
        .detach(|| {
            let p = analysis::prepare(&cfg, s, r, e2, include.as_deref())?;
            match sym {
                Some(sym) => p.solver.find_states(sym),
                None => p.states(),
            }
        })
        .map_err(py_err)?;
    states
        .iter()
        .map(|st| {
            let d = PyDict::new(py);
            d.set_item("n", st.n)?;
            d.set_item("symmetry", st.symmetry.name())?;
            d.set_item("energy", st.energy)?;
            d.set_item("ratio", st.ratio)?;
            Ok(d)
        })
        .collect()
}

/// Runs the command-line interface with `args` (without the program name)
/// and returns `(exit_code, stdout)`.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> (i32, String) {
    let mut out = Vec::new();
    let code = py.detach(|| core::cli::run(std::iter::once("faddeev1d".to_string()).chain(args), &mut out));
    (code, String::from_utf8_lossy(&out).into_owned())
}

#[pymodule]
fn faddeev1d(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(reference_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(tune, m)?)?;
    m.add_function(wrap_pyfunction!(two_body, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
