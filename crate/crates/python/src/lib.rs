//! Python bindings: grids, fields, runs, extensions, excess and dimension tools.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use sqg_core::datum::{generate_datum, DatumKind, InitialDatum, Normalization};
use sqg_core::excess::{excess, ExcessParams};
use sqg_core::extension::{extend, weighted_dirichlet_energy, VerticalGrid};
use sqg_core::regularity::{box_dimension, dimension_formulas, vitali_cover, SpaceTimeBall};
use sqg_core::solver::{self, PrescribedVelocity, SolverConfig, Trajectory, VelocityMode};
use sqg_core::spectral::{fractional_laplacian, gagliardo_seminorm_global, riesz_velocity};
use sqg_core::{Cylinder, GridSpec, ScalarField, SqgError};

fn py_err(e: SqgError) -> PyErr {
    match e {
        SqgError::Io(m) => PyIOError::new_err(m),
        SqgError::Config(_) | SqgError::Parameter(_) | SqgError::Geometry(_) | SqgError::Precondition(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyGrid(GridSpec);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n, box_length = std::f64::consts::TAU, alpha = 0.45))]
    fn new(n: usize, box_length: f64, alpha: f64) -> PyResult<Self> {
        GridSpec::new(n, box_length, alpha).map(PyGrid).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn box_length(&self) -> f64 {
        self.0.box_length
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    fn __repr__(&self) -> String {
        format!("Grid(n={}, box_length={}, alpha={})", self.0.n, self.0.box_length, self.0.alpha)
    }
}

#[pyclass(name = "Field", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyField(ScalarField);

#[pymethods]
impl PyField {
    /// Row-major values, x index fastest.
    #[new]
    #[pyo3(signature = (grid, values, time = 0.0))]
    fn new(grid: &PyGrid, values: Vec<f64>, time: f64) -> PyResult<Self> {
        if values.len() != grid.0.len() {
            return Err(PyValueError::new_err(format!("expected {} values, got {}", grid.0.len(), values.len())));
        }
        ScalarField::from_values(grid.0, values, time).map(PyField).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (grid, k_max, seed, l2 = 1.0, slope = 1.0))]
    fn random_bandlimited(grid: &PyGrid, k_max: f64, seed: u64, l2: f64, slope: f64) -> PyResult<Self> {
        let spec = InitialDatum {
            kind: DatumKind::RandomBandlimited { k_min: 1.0, k_max, slope },
            normalize: Normalization::L2(l2),
        };
        generate_datum(&spec, &grid.0, seed).map(PyField).map_err(py_err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    #[getter]
    fn time(&self) -> f64 {
        self.0.time()
    }

    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    fn l2_norm(&self) -> f64 {
        self.0.l2_norm()
    }

    fn sup_norm(&self) -> f64 {
        self.0.sup_norm()
    }

    fn fractional_laplacian(&self, s: f64) -> PyResult<PyField> {
        fractional_laplacian(&self.0, s).map(PyField).map_err(py_err)
    }

    /// (u1, u2) = R^perp theta.
    fn riesz_velocity(&self) -> (PyField, PyField) {
        let u = riesz_velocity(&self.0);
        (PyField(u.u1), PyField(u.u2))
    }

    fn gagliardo_seminorm(&self, s: f64) -> f64 {
        gagliardo_seminorm_global(&self.0, s)
    }

    /// (weighted Dirichlet energy of the extension, its ratio to the squared seminorm).
    #[pyo3(signature = (levels = 64, y_max = None))]
    fn extension_energy(&self, levels: usize, y_max: Option<f64>) -> PyResult<(f64, f64)> {
        let g = self.0.grid();
        let vg = VerticalGrid::graded(y_max.unwrap_or(0.5 * g.box_length), levels, g.alpha).map_err(py_err)?;
        let e = weighted_dirichlet_energy(&extend(&self.0, &vg).map_err(py_err)?, None).map_err(py_err)?.total;
        let s = gagliardo_seminorm_global(&self.0, g.alpha);
        Ok((e, if s > 0.0 { e / (s * s) } else { 0.0 }))
    }
}

#[pyclass(name = "Run", frozen)]
struct PyRun {
    traj: Trajectory,
    defect: f64,
    linf: Vec<f64>,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.traj.times.clone()
    }

    #[getter]
    fn max_relative_energy_defect(&self) -> f64 {
        self.defect
    }

    #[getter]
    fn linf(&self) -> Vec<f64> {
        self.linf.clone()
    }

    #[getter]
    fn completed(&self) -> bool {
        matches!(self.traj.status, solver::RunStatus::Completed)
    }

    fn frame(&self, k: usize) -> PyResult<PyField> {
        self.traj.thetas.get(k).cloned().map(PyField).ok_or_else(|| PyValueError::new_err("frame index out of range"))
    }

    fn __len__(&self) -> usize {
        self.traj.len()
    }

    /// (E^S, E^V, E^NL, total) on Q_r(x, t) with the default parameter pack.
    fn excess(&self, x: (f64, f64), t: f64, r: f64) -> PyResult<(f64, f64, f64, f64)> {
        let a = self.traj.alpha();
        let cyl = Cylinder::parabolic([x.0, x.1], t, r, a).map_err(py_err)?;
        let e = excess(&self.traj, &cyl, &ExcessParams::default_for(a)).map_err(py_err)?;
        Ok((e.e_s, e.e_v, e.e_nl, e.total))
    }
}

/// Integrates from `theta0`; `coupled=False` freezes the velocity at zero.
#[pyfunction]
#[pyo3(signature = (theta0, dt, t_end, eps_visc = 0.0, coupled = true, stride = 1))]
fn run(py: Python<'_>, theta0: &PyField, dt: f64, t_end: f64, eps_visc: f64, coupled: bool, stride: usize) -> PyResult<PyRun> {
    let mode = if coupled { VelocityMode::Coupled } else { VelocityMode::Prescribed(PrescribedVelocity::Zero) };
    let cfg = SolverConfig::new(*theta0.0.grid(), dt, t_end)
        .map_err(py_err)?
        .with_eps(eps_visc)
        .with_stride(stride)
        .with_velocity(mode);
    let th = theta0.0.clone();
    let out = py.detach(move || solver::run(&th, &cfg)).map_err(py_err)?;
    Ok(PyRun {
        defect: out.ledger.max_relative_defect(),
        linf: out.ledger.rows.iter().map(|r| r.linf).collect(),
        traj: out.trajectory,
    })
}

/// Dictionary-free tuple (beta_q, limit_dim, alpha0, delta_holder, scheffer_p).
#[pyfunction]
#[pyo3(signature = (alpha, q = None))]
fn dimensions(alpha: f64, q: Option<f64>) -> PyResult<(f64, f64, f64, f64, f64)> {
    let f = dimension_formulas(alpha, q).map_err(py_err)?;
    Ok((f.beta_q, f.limit_dim, f.alpha0, f.delta_holder, f.scheffer_p))
}

/// (slope, stderr) of the box-counting fit.
#[pyfunction]
fn box_counting(points: Vec<(f64, f64, f64)>, scales: Vec<f64>) -> PyResult<(f64, f64)> {
    let pts: Vec<[f64; 3]> = points.into_iter().map(|p| [p.0, p.1, p.2]).collect();
    let d = box_dimension(&pts, &scales).map_err(py_err)?;
    Ok((d.slope, d.stderr))
}

/// Indices of a disjoint Vitali subfamily of equal- or mixed-radius spacetime balls.
#[pyfunction]
fn vitali(balls: Vec<(f64, f64, f64, f64)>) -> Vec<usize> {
    let b: Vec<SpaceTimeBall> = balls.into_iter().map(|b| SpaceTimeBall { center: [b.0, b.1, b.2], radius: b.3 }).collect();
    vitali_cover(&b)
}

#[pymodule]
fn sqgreg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(dimensions, m)?)?;
    m.add_function(wrap_pyfunction!(box_counting, m)?)?;
    m.add_function(wrap_pyfunction!(vitali, m)?)?;
    Ok(())
}
