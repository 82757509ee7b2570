//! Python bindings: models, grids, the full-order solver, manifold fitting and
//! reduced model runs. Vectors are Python lists, matrices lists of rows.

use std::path::PathBuf;

use esrom::config::{ExperimentConfig, ManifoldKind};
use esrom::fitting::{coordinates, fit_quadratic, fit_rational_quadratic, pod_basis, reconstruction_error, FitConfig};
use esrom::fom::{integrate_fom, sample_initial_condition, SemiDiscretization, SnapshotSet, TimeConfig};
use esrom::manifold::{AnyManifold, LinearManifold, Manifold};
use esrom::rom::{initial_coords, run_rom, RomConfig, RomVariant, RunStatus};
use esrom::{CellState, DissipationSpec};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: esrom::Error) -> PyErr {
    match e {
        esrom::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = r.len();
    let m = r.first().map_or(0, Vec::len);
    if r.iter().any(|row| row.len() != m) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| r[i][j]))
}

#[pyclass(name = "Model", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel(esrom::Model);

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (name, g=None, gamma=None))]
    fn new(name: &str, g: Option<f64>, gamma: Option<f64>) -> PyResult<Self> {
        let model = match (name.parse::<esrom::Model>().map_err(err)?, g, gamma) {
            (esrom::Model::ShallowWater { .. }, Some(g), None) => esrom::Model::ShallowWater { g },
            (esrom::Model::Euler { .. }, None, Some(gamma)) => esrom::Model::Euler { gamma },
            (m, None, None) => m,
            _ => return Err(PyValueError::new_err(format!("parameter does not apply to {name}"))),
        };
        model.validate().map_err(err)?;
        Ok(Self(model))
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.0.name()
    }

    #[getter]
    fn n_vars(&self) -> usize {
        self.0.n_vars()
    }

    fn entropy(&self, u: Vec<f64>) -> PyResult<f64> {
        self.0.entropy(&CellState::from_slice(&u)).map_err(err)
    }

    fn entropy_variables(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.0.entropy_variables(&CellState::from_slice(&u)).map_err(err)?.to_vec())
    }

    fn entropy_variables_inverse(&self, eta: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.0.entropy_variables_inverse(&CellState::from_slice(&eta)).map_err(err)?.to_vec())
    }

    fn flux_potential(&self, u: Vec<f64>) -> PyResult<f64> {
        self.0.flux_potential(&CellState::from_slice(&u)).map_err(err)
    }

    fn ec_flux(&self, u_l: Vec<f64>, u_r: Vec<f64>) -> PyResult<Vec<f64>> {
        let f = self.0.ec_flux(&CellState::from_slice(&u_l), &CellState::from_slice(&u_r));
        Ok(f.map_err(err)?.to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Model({:?})", self.0)
    }
}

#[pyclass(name = "Grid", frozen)]
struct PyGrid(esrom::Grid);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(n_cells: usize, n_vars: usize, a: f64, b: f64) -> PyResult<Self> {
        Ok(Self(esrom::Grid::uniform(n_cells, n_vars, a, b).map_err(err)?))
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.0.n_cells()
    }

    #[getter]
    fn n_dof(&self) -> usize {
        self.0.n_dof()
    }

    fn cell_centers(&self) -> Vec<f64> {
        self.0.cell_centers()
    }
}

#[pyclass(name = "ExperimentConfig", frozen)]
struct PyConfig(ExperimentConfig);

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self(ExperimentConfig::parse(text).map_err(err)?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(ExperimentConfig::load(&path).map_err(err)?))
    }

    #[getter]
    fn model(&self) -> PyModel {
        PyModel(self.0.model)
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.0.n_cells
    }

    #[getter]
    fn r(&self) -> usize {
        self.0.fit.fit.r
    }

    #[getter]
    fn rom_runs(&self) -> Vec<String> {
        self.0.rom.runs.iter().map(|r| r.name()).collect()
    }
}

#[pyclass(name = "Snapshots", frozen)]
struct PySnapshots(SnapshotSet);

#[pymethods]
impl PySnapshots {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(esrom::io::load_snapshots(&path).map_err(err)?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        esrom::io::save_snapshots(&path, &self.0).map_err(err)
    }

    #[getter]
    fn n_snapshots(&self) -> usize {
        self.0.n_snapshots()
    }

    #[getter]
    fn n_dof(&self) -> usize {
        self.0.n_dof()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    fn column(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.0.n_snapshots() {
            return Err(PyValueError::new_err(format!("snapshot {j} out of range")));
        }
        Ok(self.0.column(j))
    }
}

#[pyclass(name = "Manifold", frozen)]
struct PyManifold(AnyManifold);

#[pymethods]
impl PyManifold {
    /// Linear manifold from a basis given as rows.
    #[staticmethod]
    fn linear(basis: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self(LinearManifold::new(from_rows(&basis)?).into()))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self(esrom::io::load_manifold(&path).map_err(err)?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        esrom::io::save_manifold(&path, &self.0).map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn n_dof(&self) -> usize {
        self.0.n_dof()
    }

    fn decode(&self, a: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.decode(&a).map_err(err)
    }

    fn jacobian(&self, a: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.0.jacobian(&a).map_err(err)?))
    }
}

/// Integrates the configured full-order model; returns the snapshots and the
/// total entropy at every step.
#[pyfunction]
fn run_fom(py: Python<'_>, config: &PyConfig) -> PyResult<(PySnapshots, Vec<f64>)> {
    let cfg = &config.0;
    let (snaps, trace) = py
        .detach(|| {
            let grid = cfg.grid()?;
            let u0 = sample_initial_condition(&grid, |x| cfg.ic.eval(x, &cfg.model));
            let sd = SemiDiscretization::new(cfg.model, &grid, cfg.fom_dissipation)?
                .with_dissipation_scale(cfg.dissipation_scale)?;
            integrate_fom(&sd, &u0, cfg.time)
        })
        .map_err(err)?;
    Ok((PySnapshots(snaps), trace.samples.iter().map(|s| s.total).collect()))
}

/// Full-order right-hand side `du/dt`.
#[pyfunction]
#[pyo3(signature = (model, grid, u, dissipation="none", dissipation_scale=0.5))]
fn fom_rhs(
    model: &PyModel,
    grid: &PyGrid,
    u: Vec<f64>,
    dissipation: &str,
    dissipation_scale: f64,
) -> PyResult<Vec<f64>> {
    let spec: DissipationSpec = dissipation.parse().map_err(err)?;
    SemiDiscretization::new(model.0, &grid.0, spec)
        .and_then(|sd| sd.with_dissipation_scale(dissipation_scale))
        .and_then(|sd| sd.rhs(&u))
        .map_err(err)
}

/// POD basis (rows) and the sorted singular values.
#[pyfunction]
fn pod(snapshots: &PySnapshots, r: usize) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let (basis, sigma) = pod_basis(&snapshots.0.data, r).map_err(err)?;
    Ok((rows(&basis), sigma))
}

/// Fits a manifold of the given kind; returns `(manifold, basis, eps_xt_max)`.
#[pyfunction]
#[pyo3(signature = (snapshots, kind, r, ridge=0.5, max_iters=200))]
fn fit(
    py: Python<'_>,
    snapshots: &PySnapshots,
    kind: &str,
    r: usize,
    ridge: f64,
    max_iters: usize,
) -> PyResult<(PyManifold, PyManifold, f64)> {
    let kind: ManifoldKind = kind.parse().map_err(err)?;
    let x = &snapshots.0.data;
    let n_cells = snapshots.0.n_cells;
    let (m, basis, eps) = py
        .detach(|| -> esrom::Result<_> {
            let (basis, _) = pod_basis(x, r)?;
            let m: AnyManifold = match kind {
                ManifoldKind::Linear => LinearManifold::new(basis.clone()).into(),
                ManifoldKind::Quadratic => fit_quadratic(x, &basis, ridge)?.into(),
                ManifoldKind::Rational => {
                    let mut cfg = FitConfig::new(r);
                    cfg.lm.max_iters = max_iters;
                    fit_rational_quadratic(x, &basis, n_cells, &cfg)?.0.into()
                }
            };
            let a = coordinates(&basis, x)?;
            let (_, eps) = reconstruction_error(&m, x, &a)?;
            Ok((m, basis, eps))
        })
        .map_err(err)?;
    Ok((PyManifold(m), PyManifold(LinearManifold::new(basis).into()), eps))
}

/// Runs a reduced model from the first snapshot. Returns a dict of per-step
/// series plus `status` and, on failure, `fail_reason` and `fail_time`.
#[pyfunction]
#[pyo3(signature = (config, snapshots, manifold, basis, variant="entropy_stable", tse=true))]
fn rom<'py>(
    py: Python<'py>,
    config: &PyConfig,
    snapshots: &PySnapshots,
    manifold: &PyManifold,
    basis: &PyManifold,
    variant: &str,
    tse: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = &config.0;
    let AnyManifold::Linear(basis) = &basis.0 else {
        return Err(PyValueError::new_err("basis must be a linear manifold"));
    };
    let variant: RomVariant = variant.parse().map_err(err)?;
    let rc = RomConfig {
        variant,
        tse,
        time: TimeConfig { t_end: cfg.rom.t_end, ..cfg.time },
        spec: cfg.rom.dissipation,
        dissipation_scale: cfg.dissipation_scale,
    };
    let x0 = snapshots.0.column(0);
    let trace = py
        .detach(|| {
            let grid = cfg.grid()?;
            let init = initial_coords(&x0, basis.basis(), tse)?;
            run_rom(&manifold.0, &cfg.model, &grid, &rc, &init)
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("t", trace.steps.iter().map(|s| s.t).collect::<Vec<_>>())?;
    d.set_item("entropy", trace.steps.iter().map(|s| s.entropy).collect::<Vec<_>>())?;
    d.set_item("rate_cons", trace.steps.iter().map(|s| s.rate_cons).collect::<Vec<_>>())?;
    d.set_item("rate_diss", trace.steps.iter().map(|s| s.rate_diss).collect::<Vec<_>>())?;
    d.set_item("eps_pi", trace.steps.iter().map(|s| s.eps_pi).collect::<Vec<_>>())?;
    d.set_item("alpha", trace.steps.iter().map(|s| s.alpha).collect::<Vec<_>>())?;
    d.set_item("coords", trace.coords.clone())?;
    match &trace.status {
        RunStatus::Ok => d.set_item("status", "ok")?,
        RunStatus::Failed { fail_time, fail_reason, .. } => {
            d.set_item("status", "failed")?;
            d.set_item("fail_reason", fail_reason)?;
            d.set_item("fail_time", fail_time)?;
        }
    }
    Ok(d)
}

#[pymodule]
fn pyesrom(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PySnapshots>()?;
    m.add_class::<PyManifold>()?;
    m.add_function(wrap_pyfunction!(run_fom, m)?)?;
    m.add_function(wrap_pyfunction!(fom_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(pod, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(rom, m)?)?;
    Ok(())
}
