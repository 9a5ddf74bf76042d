//! Expectation value of the momentum-shift operator and the resulting
//! polarization, evaluated densely from the Gaussian closed form
//!
//! ```text
//! <T> = 2^N [det(V + 1) det(1 - W)]^{-1/2} exp(-1/2 alpha0^T M^{-1} alpha0)
//! W   = (V - 1)(V + 1)^{-1} U
//! M   = V - 1 + 2 (1 - U)^{-1}
//! ```
//!
//! `U` carries `e^{i theta_j}` on both quadratures of mode `j`. The square
//! root is fixed by continuation along `theta -> lambda theta`, starting from
//! `<T> = 1` at `lambda = 0`. Each continuation sample also carries the exact
//! derivative `d/dlambda Im ln det(1 - W)`, so steps that wrap by a full turn
//! are refined as well.

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, LatticeSpec};
use crate::linalg::{self, CMatrix, LogDet, RMatrix};
use nalgebra::DVector;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Per-step phase bound of the branch continuation.
pub const HOMOTOPY_MAX_JUMP: f64 = PI / 2.0;
const HOMOTOPY_INITIAL_STEPS: usize = 8;
const HOMOTOPY_MAX_SAMPLES: usize = 1 << 16;
const SOLVE_RESIDUAL: f64 = 1e-8;

/// Momentum-shift phases `theta_j` per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    phases: Vec<f64>,
}

impl ShiftSpec {
    pub fn from_lattice(lattice: &LatticeSpec) -> Self {
        let mut phases = Vec::with_capacity(lattice.modes());
        for r in 0..lattice.cells() {
            for s in 0..lattice.sites_per_cell() {
                phases.push(lattice.phase(r, s).rem_euclid(2.0 * PI));
            }
        }
        ShiftSpec { phases }
    }

    /// Arbitrary per-mode phases; none may be a multiple of `2 pi`, which
    /// would make `1 - U` singular.
    pub fn from_phases(phases: Vec<f64>) -> Result<Self> {
        for (j, th) in phases.iter().enumerate() {
            let red = th.rem_euclid(2.0 * PI);
            if !th.is_finite() || red < 1e-12 || 2.0 * PI - red < 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "phase {th} of mode {j} is a multiple of 2 pi"
                )));
            }
        }
        Ok(ShiftSpec { phases })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn modes(&self) -> usize {
        self.phases.len()
    }

    /// Diagonal of `U(lambda)` over the `2N` quadratures.
    fn diagonal(&self, lambda: f64) -> Vec<Complex64> {
        self.phases
            .iter()
            .flat_map(|th| {
                let z = Complex64::from_polar(1.0, lambda * th);
                [z, z]
            })
            .collect()
    }
}

pub fn shift_phases(lattice: &LatticeSpec) -> ShiftSpec {
    ShiftSpec::from_lattice(lattice)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationBreakdown {
    /// `<T>` itself.
    pub expectation: Complex64,
    pub abs_t: f64,
    /// `-(1/2) Im ln det(1 - W)` on the continuation branch.
    pub det_term_phase: f64,
    /// `s = -(1/2) alpha0^T M^{-1} alpha0`.
    pub mean_term: Complex64,
    /// `ln det(1 - W)` on the continuation branch.
    pub log_det_one_minus_w: Complex64,
    /// `(det_term_phase + Im s) / 2 pi`, not reduced.
    pub p_unwrapped: f64,
    /// `p_unwrapped` reduced to `(-1/2, 1/2]`.
    pub p_reduced: f64,
}

pub fn reduce_polarization(p: f64) -> f64 {
    let mut y = p.rem_euclid(1.0);
    if y > 0.5 {
        y -= 1.0;
    }
    y
}

/// Spectral data of `V` reused by every evaluation.
#[derive(Debug, Clone)]
pub(crate) struct CovarianceSpectrum {
    /// `(V - 1)(V + 1)^{-1}`.
    pub contraction: RMatrix,
    /// `sum ln(v_j + 1)`.
    pub ln_det_v_plus_one: f64,
    /// `sum ln(2 / (v_j + 1)) = ln det(1 - A)`.
    pub ln_det_one_minus_a: f64,
    /// Operator norm of the contraction, `max |(v - 1)/(v + 1)|`.
    pub contraction_norm: f64,
    pub min_eigenvalue: f64,
}

impl CovarianceSpectrum {
    pub fn new(state: &GaussianState) -> Result<Self> {
        state.require_valid()?;
        let eig = linalg::symmetric_eigen(&linalg::symmetrize(state.covariance()));
        let vals = &eig.eigenvalues;
        let f = vals.map(|v| (v - 1.0) / (v + 1.0));
        let q = &eig.eigenvectors;
        let contraction = linalg::symmetrize(&(q * nalgebra::DMatrix::from_diagonal(&f) * q.transpose()));
        let contraction_norm = f.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if !(contraction_norm < 1.0) {
            return Err(Error::InvalidState(format!(
                "contraction norm {contraction_norm} is not below 1"
            )));
        }
        Ok(CovarianceSpectrum {
            contraction,
            ln_det_v_plus_one: vals.iter().map(|v| (v + 1.0).ln()).sum(),
            ln_det_one_minus_a: vals.iter().map(|v| (2.0 / (v + 1.0)).ln()).sum(),
            contraction_norm,
            min_eigenvalue: vals.min(),
        })
    }

    /// `ln det(1 - A U(lambda))` and `d/dlambda` of its imaginary part,
    /// `-Im Tr[(1 - W)^{-1} A i Theta U]`.
    pub fn log_det_with_rate(&self, shift: &ShiftSpec, lambda: f64) -> (LogDet, Option<f64>) {
        let (ld, inv) = linalg::log_det_and_inverse(self.one_minus_w(shift, lambda));
        let rate = inv.map(|x| {
            let diag = shift.diagonal(lambda);
            let n = self.contraction.nrows();
            let mut tr = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let mut xa = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    xa += x[(j, k)] * self.contraction[(k, j)];
                }
                let th = shift.phases[j / 2];
                tr += xa * Complex64::new(0.0, th) * diag[j];
            }
            -tr.im
        });
        (ld, rate)
    }

    /// `1 - A U(lambda)`.
    pub fn one_minus_w(&self, shift: &ShiftSpec, lambda: f64) -> CMatrix {
        let diag = shift.diagonal(lambda);
        let n = self.contraction.nrows();
        CMatrix::from_fn(n, n, |i, j| {
            let one = if i == j { 1.0 } else { 0.0 };
            Complex64::new(one, 0.0) - diag[j] * self.contraction[(i, j)]
        })
    }
}

fn check_shift(state: &GaussianState, shift: &ShiftSpec) -> Result<()> {
    if shift.modes() != state.lattice().modes() {
        return Err(Error::InvalidInput(format!(
            "shift has {} phases, state has {} modes",
            shift.modes(),
            state.lattice().modes()
        )));
    }
    Ok(())
}

/// `W = (V - 1)(V + 1)^{-1} U`.
pub fn w_matrix(state: &GaussianState, shift: &ShiftSpec) -> Result<CMatrix> {
    check_shift(state, shift)?;
    let spec = CovarianceSpectrum::new(state)?;
    let n = spec.contraction.nrows();
    Ok(CMatrix::identity(n, n) - spec.one_minus_w(shift, 1.0))
}

/// `M = V - 1 + 2 (1 - U)^{-1}`.
pub fn m_matrix(state: &GaussianState, shift: &ShiftSpec) -> Result<CMatrix> {
    check_shift(state, shift)?;
    let diag = shift.diagonal(1.0);
    let v = state.covariance();
    let n = v.nrows();
    Ok(CMatrix::from_fn(n, n, |i, j| {
        let mut z = Complex64::new(v[(i, j)], 0.0);
        if i == j {
            z += -1.0 + 2.0 / (Complex64::new(1.0, 0.0) - diag[i]);
        }
        z
    }))
}

/// `det(1 - W)` without any branch information.
pub fn det_one_minus_w(state: &GaussianState, shift: &ShiftSpec) -> Result<LogDet> {
    check_shift(state, shift)?;
    let spec = CovarianceSpectrum::new(state)?;
    Ok(linalg::log_det(spec.one_minus_w(shift, 1.0)))
}

/// `ln det(1 - W)` with the imaginary part continued from `lambda = 0`.
pub fn log_det_one_minus_w(state: &GaussianState, shift: &ShiftSpec) -> Result<Complex64> {
    check_shift(state, shift)?;
    let spec = CovarianceSpectrum::new(state)?;
    continued_log_det(&spec, shift)
}

pub(crate) fn continued_log_det(spec: &CovarianceSpectrum, shift: &ShiftSpec) -> Result<Complex64> {
    let track = linalg::track_phase(
        0.0,
        1.0,
        linalg::TrackOptions {
            initial_segments: HOMOTOPY_INITIAL_STEPS,
            max_jump: HOMOTOPY_MAX_JUMP,
            max_samples: HOMOTOPY_MAX_SAMPLES,
        },
        |lambda| Ok::<_, Error>(spec.log_det_with_rate(shift, lambda)),
        |d| d.0.phase,
        |d| d.1,
    )?
    .map_err(|_| Error::HomotopyFailure {
        limit: HOMOTOPY_MAX_JUMP,
    })?;
    let first = &track[0].payload.0;
    // det(1 - A) is real and positive; anything else means a broken state.
    if first.phase.re <= 0.0 || (first.ln_abs - spec.ln_det_one_minus_a).abs() > 1e-6 * (1.0 + spec.ln_det_one_minus_a.abs()) {
        return Err(Error::InvalidState("det(1 - A) is not positive".into()));
    }
    let last = track.last().expect("track has at least two samples");
    if last.payload.0.is_singular() {
        return Err(Error::HomotopyFailure {
            limit: HOMOTOPY_MAX_JUMP,
        });
    }
    Ok(Complex64::new(last.payload.0.ln_abs, last.arg + first.phase.arg()))
}

pub fn mean_term(state: &GaussianState) -> Result<Complex64> {
    mean_term_with(state, &ShiftSpec::from_lattice(state.lattice()))
}

pub fn mean_term_with(state: &GaussianState, shift: &ShiftSpec) -> Result<Complex64> {
    state.require_valid()?;
    let alpha = state.mean();
    if alpha.iter().all(|x| *x == 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let m = m_matrix(state, shift)?;
    let rhs: DVector<Complex64> = alpha.map(|x| Complex64::new(x, 0.0));
    let x = m.clone().lu().solve(&rhs).ok_or(Error::SingularSolve {
        residual: f64::INFINITY,
    })?;
    let residual = (&m * &x - &rhs).norm() / rhs.norm();
    if !(residual <= SOLVE_RESIDUAL) {
        return Err(Error::SingularSolve { residual });
    }
    Ok(-0.5 * rhs.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<Complex64>())
}

pub fn expectation_t(state: &GaussianState) -> Result<Complex64> {
    Ok(polarization(state)?.expectation)
}

pub fn expectation_t_with(state: &GaussianState, shift: &ShiftSpec) -> Result<Complex64> {
    Ok(polarization_with(state, shift)?.expectation)
}

pub fn polarization(state: &GaussianState) -> Result<PolarizationBreakdown> {
    polarization_with(state, &ShiftSpec::from_lattice(state.lattice()))
}

pub fn polarization_with(state: &GaussianState, shift: &ShiftSpec) -> Result<PolarizationBreakdown> {
    check_shift(state, shift)?;
    let spec = CovarianceSpectrum::new(state)?;
    let log_det = continued_log_det(&spec, shift)?;
    let s = mean_term_with(state, shift)?;
    Ok(assemble(state.lattice().modes(), spec.ln_det_v_plus_one, log_det, s))
}

pub(crate) fn assemble(
    modes: usize,
    ln_det_v_plus_one: f64,
    log_det: Complex64,
    mean_term: Complex64,
) -> PolarizationBreakdown {
    let ln_t = Complex64::new(modes as f64 * 2f64.ln() - 0.5 * ln_det_v_plus_one, 0.0) - 0.5 * log_det + mean_term;
    let det_term_phase = -0.5 * log_det.im;
    let p_unwrapped = (det_term_phase + mean_term.im) / (2.0 * PI);
    PolarizationBreakdown {
        expectation: ln_t.exp(),
        abs_t: ln_t.re.exp(),
        det_term_phase,
        mean_term,
        log_det_one_minus_w: log_det,
        p_unwrapped,
        p_reduced: reduce_polarization(p_unwrapped),
    }
}

/// `((1 + lambda_min(V)) / 2)^{-nL}`, the modulus bound for classical states.
pub fn classical_bound(state: &GaussianState) -> Result<f64> {
    let spec = CovarianceSpectrum::new(state)?;
    Ok(((1.0 + spec.min_eigenvalue) / 2.0).powi(-(state.lattice().modes() as i32)))
}

/// Operator norm of `(V - 1)(V + 1)^{-1}`.
pub fn contraction_norm(state: &GaussianState) -> Result<f64> {
    Ok(CovarianceSpectrum::new(state)?.contraction_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{self, coherent_state, squeezed_vacuum_state, thermal_state, uniform_coherent_state};

    fn lat(l: usize, n: usize) -> LatticeSpec {
        LatticeSpec::with_default_offset(l, n).unwrap()
    }

    fn thermal_mode_state(nbar: f64, lattice: LatticeSpec) -> GaussianState {
        let v = RMatrix::identity(2, 2) * (2.0 * nbar + 1.0);
        GaussianState::new(lattice, v, DVector::zeros(2)).unwrap()
    }

    #[test]
    fn phases_of_small_lattices() {
        assert_eq!(shift_phases(&lat(1, 1)).phases(), &[PI]);
        let two = shift_phases(&lat(2, 1));
        assert!((two.phases()[0] - PI / 2.0).abs() < 1e-15);
        assert!((two.phases()[1] - 3.0 * PI / 2.0).abs() < 1e-15);
        // Full geometric sum over the cells vanishes for every site.
        let l = lat(5, 3);
        let sh = shift_phases(&l);
        for s in 0..3 {
            let sum: Complex64 = (0..5)
                .map(|r| Complex64::from_polar(1.0, sh.phases()[l.mode_index(r, s)]))
                .sum();
            assert!(sum.norm() < 1e-14);
        }
        assert!(ShiftSpec::from_phases(vec![0.0]).is_err());
        assert!(ShiftSpec::from_phases(vec![4.0 * PI]).is_err());
    }

    #[test]
    fn vacuum_is_one() {
        let l = lat(3, 2);
        let b = polarization(&GaussianState::vacuum(l)).unwrap();
        assert_eq!(b.expectation, Complex64::new(1.0, 0.0));
        assert_eq!(b.p_unwrapped, 0.0);
    }

    #[test]
    fn thermal_mode_at_pi() {
        let t = expectation_t(&thermal_mode_state(1.0, lat(1, 1))).unwrap();
        assert!((t - Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn squeezed_mode_at_half_pi() {
        let r = 1f64.asinh();
        let s = squeezed_vacuum_state(lat(1, 1), &[r]).unwrap();
        let shift = ShiftSpec::from_phases(vec![PI / 2.0]).unwrap();
        let t = expectation_t_with(&s, &shift).unwrap();
        assert!((t - Complex64::new(1.0 / 3f64.sqrt(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn two_thermal_modes() {
        let l = lat(2, 1);
        let mut v = RMatrix::identity(4, 4);
        v[(0, 0)] = 3.0;
        v[(1, 1)] = 3.0;
        let s = GaussianState::new(l, v, DVector::zeros(4)).unwrap();
        let b = polarization(&s).unwrap();
        let expected = Complex64::new(0.5, 0.0) / Complex64::new(1.0, -0.5);
        assert!((b.expectation - expected).norm() < 1e-14);
        assert!((b.p_unwrapped - 0.5f64.atan() / (2.0 * PI)).abs() < 1e-14);
        assert!((b.p_unwrapped - 0.07379).abs() < 1e-5);
    }

    #[test]
    fn coherent_rice_mele_state() {
        let l = lat(4, 2);
        let s = uniform_coherent_state(l, &[Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]).unwrap();
        let b = polarization(&s).unwrap();
        assert!((b.expectation - Complex64::new((-4f64).exp(), 0.0)).norm() < 1e-14);
        assert!(b.p_unwrapped.abs() < 1e-14);
        assert!((b.mean_term - Complex64::new(-4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn mean_term_hermitian_part_is_v() {
        let l = lat(2, 2);
        let s = gaussian::random_gaussian_state(l, 3, false);
        let m = m_matrix(&s, &shift_phases(&l)).unwrap();
        let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let v = linalg::to_complex(s.covariance());
        assert!(linalg::max_abs(&(herm - v)) < 1e-12);
        let t = mean_term(&s).unwrap();
        assert!(t.re < 0.0);
    }

    #[test]
    fn invalid_state_is_rejected() {
        let l = lat(1, 1);
        let v = RMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let s = GaussianState::new(l, v, DVector::zeros(2)).unwrap();
        assert!(matches!(polarization(&s), Err(Error::InvalidState(_))));
    }

    #[test]
    fn coherent_matches_normal_ordering() {
        let l = lat(3, 1);
        let amps = [Complex64::new(0.3, -0.2), Complex64::new(-1.1, 0.4), Complex64::new(0.0, 0.7)];
        let s = coherent_state(l, &amps).unwrap();
        let sh = shift_phases(&l);
        let expected: Complex64 = amps
            .iter()
            .zip(sh.phases())
            .map(|(a, th)| (Complex64::from_polar(1.0, *th) - 1.0) * a.norm_sqr())
            .sum::<Complex64>()
            .exp();
        let t = expectation_t(&s).unwrap();
        assert!((t - expected).norm() < 1e-13);
    }

    #[test]
    fn thermal_with_complex_hopping_matches_number_formula() {
        // Number-conserving state: <T> = 1 / det(1 - G (e^{i theta} - 1)),
        // G_ij = <a_i^dag a_j>.
        let l = lat(3, 1);
        let h = CMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(0.2, 0.0),
                Complex64::new(0.1, 0.5),
                Complex64::new(-0.3, 0.2),
                Complex64::new(0.1, -0.5),
                Complex64::new(-0.4, 0.0),
                Complex64::new(0.0, -0.6),
                Complex64::new(-0.3, -0.2),
                Complex64::new(0.0, 0.6),
                Complex64::new(0.9, 0.0),
            ],
        );
        let s = thermal_state(&h, 1.1, -2.5, l).unwrap();
        let occ = gaussian::ModeOccupation::thermal(&h, 1.1, -2.5).unwrap();
        let g = occ.correlation().transpose();
        let sh = shift_phases(&l);
        let d = CMatrix::from_diagonal(&DVector::from_iterator(
            3,
            sh.phases().iter().map(|th| Complex64::from_polar(1.0, *th) - 1.0),
        ));
        let expected = Complex64::new(1.0, 0.0) / (CMatrix::identity(3, 3) - g * d).determinant();
        let t = expectation_t(&s).unwrap();
        assert!((t - expected).norm() < 1e-12 * expected.norm());
    }

    #[test]
    fn continued_branch_equals_eigenvalue_sum() {
        // sum_i Log(1 - w_i) is continuous along any path that keeps every
        // |w_i| < 1, so it has to agree with the continuation exactly.
        for seed in 0..24u64 {
            let l = lat(3 + (seed % 4) as usize, 1 + (seed % 3) as usize);
            let s = if seed % 2 == 0 {
                gaussian::random_gaussian_state(l, seed, seed % 4 == 0)
            } else {
                gaussian::random_translation_invariant_state(l, seed, seed % 3 == 0)
            };
            let sh = shift_phases(&l);
            let w = w_matrix(&s, &sh).unwrap();
            let eig = w.schur().eigenvalues().unwrap();
            let reference: Complex64 = eig.iter().map(|w| (Complex64::new(1.0, 0.0) - w).ln()).sum();
            let tracked = log_det_one_minus_w(&s, &sh).unwrap();
            assert!((tracked - reference).norm() < 1e-9, "seed {seed}: {tracked} vs {reference}");
        }
    }
}
