//! Python bindings for `egp-core`.
//!
//! States are passed around as `GaussianState` objects; matrices cross the
//! boundary as nested lists and complex numbers as Python `complex`.

use egp_core::circulant;
use egp_core::fock_oracle::{self, OracleKind, OracleSpec};
use egp_core::gaussian;
use egp_core::linalg::CMatrix;
use egp_core::momentum_shift::{self, PolarizationBreakdown, ShiftSpec};
use egp_core::rice_mele::{self, Band, PumpProtocol, RiceMeleParams};
use egp_core::winding::{self, LoopAnalysis};
use egp_core::{Complex64, DMatrix, DVector, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(egp, NumericalError, PyRuntimeError, "A numerical check inside egp failed.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidLattice(_) | Error::InvalidInput(_) | Error::InvalidState(_) | Error::ChemicalPotential { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => NumericalError::new_err(e.to_string()),
    }
}

fn square<T: Copy + PartialEq + std::fmt::Debug + 'static>(rows: Vec<Vec<T>>) -> PyResult<DMatrix<T>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a square matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows_of<T: Copy + PartialEq + std::fmt::Debug + 'static>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[pyclass(name = "LatticeSpec", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyLattice(egp_core::LatticeSpec);

#[pymethods]
impl PyLattice {
    #[new]
    #[pyo3(signature = (cells, sites_per_cell = 1, gauge_offset = 0.5))]
    fn new(cells: usize, sites_per_cell: usize, gauge_offset: f64) -> PyResult<Self> {
        egp_core::LatticeSpec::new(cells, sites_per_cell, gauge_offset).map(PyLattice).map_err(to_py)
    }

    #[getter]
    fn cells(&self) -> usize {
        self.0.cells()
    }

    #[getter]
    fn sites_per_cell(&self) -> usize {
        self.0.sites_per_cell()
    }

    #[getter]
    fn gauge_offset(&self) -> f64 {
        self.0.gauge_offset()
    }

    #[getter]
    fn modes(&self) -> usize {
        self.0.modes()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Shift phase `theta` of mode `(cell, site)`.
    fn phase(&self, cell: usize, site: usize) -> f64 {
        self.0.phase(cell, site)
    }

    fn __repr__(&self) -> String {
        format!(
            "LatticeSpec(cells={}, sites_per_cell={}, gauge_offset={})",
            self.0.cells(),
            self.0.sites_per_cell(),
            self.0.gauge_offset()
        )
    }
}

/// Polarization breakdown of one state.
#[pyclass(name = "Polarization", frozen, get_all)]
struct PyPolarization {
    expectation: Complex64,
    abs_t: f64,
    det_term_phase: f64,
    mean_term: Complex64,
    log_det_one_minus_w: Complex64,
    p_unwrapped: f64,
    p_reduced: f64,
}

impl From<PolarizationBreakdown> for PyPolarization {
    fn from(b: PolarizationBreakdown) -> Self {
        PyPolarization {
            expectation: b.expectation,
            abs_t: b.abs_t,
            det_term_phase: b.det_term_phase,
            mean_term: b.mean_term,
            log_det_one_minus_w: b.log_det_one_minus_w,
            p_unwrapped: b.p_unwrapped,
            p_reduced: b.p_reduced,
        }
    }
}

#[pymethods]
impl PyPolarization {
    fn __repr__(&self) -> String {
        format!("Polarization(p_reduced={}, abs_t={})", self.p_reduced, self.abs_t)
    }
}

#[pyclass(name = "Validation", frozen, get_all)]
struct PyValidation {
    symmetry_defect: f64,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
    purity: f64,
    classical: bool,
    valid: bool,
}

/// A Gaussian state given by its quadrature covariance matrix and mean,
/// ordered cell-major, site-next, `(q, p)` innermost.
#[pyclass(name = "GaussianState", frozen, from_py_object)]
#[derive(Clone)]
struct PyState(gaussian::GaussianState);

#[pymethods]
impl PyState {
    #[new]
    fn new(lattice: PyLattice, covariance: Vec<Vec<f64>>, mean: Vec<f64>) -> PyResult<Self> {
        let v = square(covariance)?;
        gaussian::GaussianState::new(lattice.0, v, DVector::from_vec(mean)).map(PyState).map_err(to_py)
    }

    #[staticmethod]
    fn vacuum(lattice: PyLattice) -> Self {
        PyState(gaussian::GaussianState::vacuum(lattice.0))
    }

    #[staticmethod]
    fn coherent(lattice: PyLattice, amplitudes: Vec<Complex64>) -> PyResult<Self> {
        gaussian::coherent_state(lattice.0, &amplitudes).map(PyState).map_err(to_py)
    }

    #[staticmethod]
    fn uniform_coherent(lattice: PyLattice, per_cell: Vec<Complex64>) -> PyResult<Self> {
        gaussian::uniform_coherent_state(lattice.0, &per_cell).map(PyState).map_err(to_py)
    }

    /// Thermal state of the quadratic hopping matrix `h`.
    #[staticmethod]
    fn thermal(lattice: PyLattice, hopping: Vec<Vec<Complex64>>, beta: f64, mu: f64) -> PyResult<Self> {
        let h: CMatrix = square(hopping)?;
        gaussian::thermal_state(&h, beta, mu, lattice.0).map(PyState).map_err(to_py)
    }

    #[staticmethod]
    fn squeezed_vacuum(lattice: PyLattice, squeezing: Vec<f64>) -> PyResult<Self> {
        gaussian::squeezed_vacuum_state(lattice.0, &squeezing).map(PyState).map_err(to_py)
    }

    #[staticmethod]
    fn two_mode_squeezed(lattice: PyLattice, r: f64) -> PyResult<Self> {
        gaussian::two_mode_squeezed_state(lattice.0, r).map(PyState).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (lattice, seed, classical = false, translation_invariant = false))]
    fn random(lattice: PyLattice, seed: u64, classical: bool, translation_invariant: bool) -> Self {
        PyState(if translation_invariant {
            gaussian::random_translation_invariant_state(lattice.0, seed, classical)
        } else {
            gaussian::random_gaussian_state(lattice.0, seed, classical)
        })
    }

    /// Thermal Rice-Mele chain with hoppings `w1`, `w2` and staggering `delta`.
    #[staticmethod]
    fn rice_mele_thermal(lattice: PyLattice, w1: f64, w2: f64, delta: f64, beta: f64, mu: f64) -> PyResult<Self> {
        let p = RiceMeleParams::new(w1, w2, delta).map_err(to_py)?;
        rice_mele::rmm_thermal_state(&p, lattice.0, beta, mu).map(PyState).map_err(to_py)
    }

    #[staticmethod]
    fn mixture(states: Vec<PyState>, weights: Vec<f64>) -> PyResult<Self> {
        let refs: Vec<&gaussian::GaussianState> = states.iter().map(|s| &s.0).collect();
        gaussian::mixture(&refs, &weights).map(PyState).map_err(to_py)
    }

    #[getter]
    fn lattice(&self) -> PyLattice {
        PyLattice(*self.0.lattice())
    }

    #[getter]
    fn covariance(&self) -> Vec<Vec<f64>> {
        rows_of(self.0.covariance())
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.0.mean().iter().copied().collect()
    }

    fn validate(&self) -> PyValidation {
        let r = self.0.validate();
        PyValidation {
            symmetry_defect: r.symmetry_defect,
            min_eigenvalue: r.min_eigenvalue,
            max_eigenvalue: r.max_eigenvalue,
            purity: r.purity,
            classical: r.classical,
            valid: r.valid,
        }
    }

    /// `<T>` with the lattice shift phases, or with explicit per-mode phases.
    #[pyo3(signature = (phases = None))]
    fn expectation_t(&self, phases: Option<Vec<f64>>) -> PyResult<Complex64> {
        let shift = match phases {
            Some(p) => ShiftSpec::from_phases(p).map_err(to_py)?,
            None => ShiftSpec::from_lattice(self.0.lattice()),
        };
        momentum_shift::expectation_t_with(&self.0, &shift).map_err(to_py)
    }

    fn polarization(&self) -> PyResult<PyPolarization> {
        momentum_shift::polarization(&self.0).map(Into::into).map_err(to_py)
    }

    fn classical_bound(&self) -> PyResult<f64> {
        momentum_shift::classical_bound(&self.0).map_err(to_py)
    }

    /// `ln det(1 - W)` through the block-circulant reduction.
    fn reduced_log_det(&self) -> PyResult<Complex64> {
        let blocks = circulant::cell_bloch_blocks(&self.0).map_err(to_py)?;
        circulant::reduced_log_det(&blocks).map_err(to_py)
    }

    fn decay_bound(&self) -> PyResult<f64> {
        circulant::decay_bound(&self.0).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("GaussianState(modes={})", self.0.lattice().modes())
    }
}

/// Result of a winding analysis along a parameter loop.
#[pyclass(name = "Winding", frozen, get_all)]
struct PyWinding {
    delta_p: f64,
    zero_count: i64,
    trace_winding: f64,
    mean_term_winding: f64,
    lambdas: Vec<f64>,
    p_unwrapped: Vec<f64>,
}

impl From<LoopAnalysis> for PyWinding {
    fn from(a: LoopAnalysis) -> Self {
        PyWinding {
            delta_p: a.winding.delta_p,
            zero_count: a.winding.zero_count,
            trace_winding: a.trace_winding,
            mean_term_winding: a.winding.mean_term_winding,
            lambdas: a.track.samples.iter().map(|s| s.lambda).collect(),
            p_unwrapped: a.track.samples.iter().map(|s| s.p_unwrapped).collect(),
        }
    }
}

#[pymethods]
impl PyWinding {
    fn __repr__(&self) -> String {
        format!("Winding(delta_p={}, zero_count={})", self.delta_p, self.zero_count)
    }
}

/// Polarization winding along a built-in loop: `rmm-thermal`,
/// `rmm-coherent`, `random-classical` or `random-squeezed`.
#[pyfunction]
#[pyo3(signature = (kind, lattice, amplitude = 1.0, beta = 1.0, mu = None, seed = 0, samples = 32, trace_samples = 64))]
#[allow(clippy::too_many_arguments)]
fn loop_winding(
    py: Python<'_>,
    kind: &str,
    lattice: PyLattice,
    amplitude: f64,
    beta: f64,
    mu: Option<f64>,
    seed: u64,
    samples: usize,
    trace_samples: usize,
) -> PyResult<PyWinding> {
    let lat = lattice.0;
    let mu = mu.unwrap_or(-3.0 * amplitude);
    let lp = match kind {
        "rmm-thermal" => winding::rmm_thermal_loop(amplitude, lat, beta, mu, samples),
        "rmm-coherent" => winding::rmm_coherent_loop(amplitude, lat, samples),
        "random-classical" => winding::random_classical_loop(lat, seed, samples),
        "random-squeezed" => winding::random_squeezed_loop(lat, seed, samples),
        other => return Err(PyValueError::new_err(format!("unknown loop {other:?}"))),
    }
    .map_err(to_py)?;
    py.detach(|| winding::analyze_loop(&lp, trace_samples)).map(Into::into).map_err(to_py)
}

/// Chern number of the polarization of the thermal two-band family.
#[pyfunction]
#[pyo3(signature = (lattice, mass = 1.0, beta = 1.0, mu = -4.0, slices = 32))]
fn chern_via_polarization(py: Python<'_>, lattice: PyLattice, mass: f64, beta: f64, mu: f64, slices: usize) -> PyResult<i64> {
    let fam = winding::qwz_thermal_family(mass, lattice.0, beta, mu, slices).map_err(to_py)?;
    py.detach(|| winding::chern_via_polarization(&fam)).map(|c| c.chern).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (w1, w2, delta, band = "lower", samples = 64))]
fn zak_phase(w1: f64, w2: f64, delta: f64, band: &str, samples: usize) -> PyResult<f64> {
    let band = match band {
        "lower" => Band::Lower,
        "upper" => Band::Upper,
        other => return Err(PyValueError::new_err(format!("band must be 'lower' or 'upper', got {other:?}"))),
    };
    let p = RiceMeleParams::new(w1, w2, delta).map_err(to_py)?;
    rice_mele::zak_phase(&p, band, samples).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (amplitude = 1.0, steps = 256))]
fn zak_winding(amplitude: f64, steps: usize) -> PyResult<i64> {
    let p = PumpProtocol::reference(amplitude, 1.0).map_err(to_py)?;
    rice_mele::zak_winding(&p, steps).map_err(to_py)
}

/// `(w1, w2, delta)` of the reference pump at `t / T = fraction`.
#[pyfunction]
#[pyo3(signature = (fraction, amplitude = 1.0))]
fn pump_params(fraction: f64, amplitude: f64) -> PyResult<(f64, f64, f64)> {
    let p = PumpProtocol::reference(amplitude, 1.0).map_err(to_py)?.params_at_fraction(fraction);
    Ok((p.w1, p.w2, p.delta))
}

/// Particle flux per cycle of the reference pump at rescaled cycle time `AT`.
#[pyfunction]
#[pyo3(signature = (cycle_time, amplitude = 1.0, steps = None))]
fn pump_flux(py: Python<'_>, cycle_time: f64, amplitude: f64, steps: Option<usize>) -> PyResult<f64> {
    let protocol = PumpProtocol::reference(amplitude, cycle_time / amplitude).map_err(to_py)?;
    let steps = steps.unwrap_or_else(|| rice_mele::default_steps(&protocol));
    py.detach(|| {
        let traj = rice_mele::evolve_pump(&protocol, None, steps)?;
        rice_mele::integrated_flux(&traj, &protocol)
    })
    .map_err(to_py)
}

#[pyfunction]
fn adiabatic_flux() -> PyResult<f64> {
    rice_mele::adiabatic_flux(&PumpProtocol::reference(1.0, 1.0).map_err(to_py)?).map_err(to_py)
}

#[pyfunction]
fn oracle_coherent(phases: Vec<f64>, amplitudes: Vec<Complex64>) -> PyResult<Complex64> {
    fock_oracle::oracle_coherent(&phases, &amplitudes).map_err(to_py)
}

#[pyfunction]
fn oracle_thermal_mode(theta: f64, nbar: f64) -> Complex64 {
    fock_oracle::oracle_thermal_mode(theta, nbar)
}

#[pyfunction]
fn oracle_squeezed(theta: f64, r: f64) -> Complex64 {
    fock_oracle::oracle_squeezed(theta, r)
}

#[pyfunction]
fn oracle_tmsv(theta1: f64, theta2: f64, r: f64) -> Complex64 {
    fock_oracle::oracle_tmsv(theta1, theta2, r)
}

/// Truncated-Fock `<T>` for `thermal` (param = nbar), `squeezed` or
/// `two-mode-squeezed` (param = r); returns `(value, tail)`.
#[pyfunction]
#[pyo3(signature = (kind, param, phases, cutoff = 400))]
fn oracle_fock(kind: &str, param: f64, phases: Vec<f64>, cutoff: usize) -> PyResult<(Complex64, f64)> {
    let kind = match kind {
        "thermal" => OracleKind::Thermal { nbar: param },
        "squeezed" => OracleKind::SqueezedVacuum { r: param },
        "two-mode-squeezed" => OracleKind::TwoModeSqueezed { r: param },
        other => return Err(PyValueError::new_err(format!("unknown oracle {other:?}"))),
    };
    let spec = OracleSpec::new(kind, phases, cutoff).map_err(to_py)?;
    let v = fock_oracle::oracle_fock_truncated(&spec).map_err(to_py)?;
    Ok((v.value, v.tail))
}

#[pymodule]
fn egp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add("ADIABATIC_FLUX", rice_mele::ADIABATIC_FLUX)?;
    m.add_class::<PyLattice>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyPolarization>()?;
    m.add_class::<PyValidation>()?;
    m.add_class::<PyWinding>()?;
    m.add_function(wrap_pyfunction!(loop_winding, m)?)?;
    m.add_function(wrap_pyfunction!(chern_via_polarization, m)?)?;
    m.add_function(wrap_pyfunction!(zak_phase, m)?)?;
    m.add_function(wrap_pyfunction!(zak_winding, m)?)?;
    m.add_function(wrap_pyfunction!(pump_params, m)?)?;
    m.add_function(wrap_pyfunction!(pump_flux, m)?)?;
    m.add_function(wrap_pyfunction!(adiabatic_flux, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_coherent, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_thermal_mode, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_squeezed, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_tmsv, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_fock, m)?)?;
    Ok(())
}
