//! Polarization along closed loops of Gaussian states.
//!
//! A loop is sampled on `lambda in [0, 1]`; the phase of `det(1 - W(lambda))`
//! is unwrapped with bisection wherever neighbouring samples differ by more
//! than the tolerance. Two detectors read the result: the net change of the
//! unwrapped polarization and the argument-principle count `M` of zeros of
//! `det(1 - W)` enclosed by the loop. With `P = (-arg det(1 - W) / 2 + Im s) / 2 pi`
//! they are tied by `Delta P = -M / 2`.
//!
//! A trace-quadrature evaluation of `M` is provided as an independent check.

use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianState, LatticeSpec};
use crate::linalg::{self, CMatrix, LogDet, RMatrix};
use crate::momentum_shift::{self, CovarianceSpectrum, ShiftSpec};
use crate::rice_mele::{self, PumpProtocol};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::fmt;

pub const DEFAULT_TOLERANCE: f64 = PI / 2.0;
pub const DEFAULT_INITIAL_SAMPLES: usize = 32;
pub const MAX_SAMPLES: usize = 1 << 20;
pub const CLOSURE_TOLERANCE: f64 = 1e-12;
pub const INTEGER_RESIDUAL: f64 = 1e-3;

type Sampler = dyn Fn(f64) -> Result<GaussianState> + Send + Sync;

/// A closed path `lambda -> state(lambda)` with `state(1) = state(0)`.
pub struct ParameterLoop {
    sampler: Box<Sampler>,
    initial_samples: usize,
    tolerance: f64,
    max_samples: usize,
}

impl fmt::Debug for ParameterLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParameterLoop")
            .field("initial_samples", &self.initial_samples)
            .field("tolerance", &self.tolerance)
            .field("max_samples", &self.max_samples)
            .finish_non_exhaustive()
    }
}

impl ParameterLoop {
    pub fn new(
        sampler: impl Fn(f64) -> Result<GaussianState> + Send + Sync + 'static,
        initial_samples: usize,
    ) -> Result<Self> {
        if initial_samples < 8 {
            return Err(Error::InvalidInput(format!(
                "a loop needs at least 8 initial samples, got {initial_samples}"
            )));
        }
        Ok(ParameterLoop {
            sampler: Box::new(sampler),
            initial_samples,
            tolerance: DEFAULT_TOLERANCE,
            max_samples: MAX_SAMPLES,
        })
    }

    /// The loop that stays at `state`.
    pub fn constant(state: GaussianState, initial_samples: usize) -> Result<Self> {
        Self::new(move |_| Ok(state.clone()), initial_samples)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance < PI) {
            return Err(Error::InvalidInput(format!("tolerance {tolerance} outside (0, pi)")));
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    pub fn with_initial_samples(mut self, initial_samples: usize) -> Result<Self> {
        if initial_samples < 8 {
            return Err(Error::InvalidInput(format!(
                "a loop needs at least 8 initial samples, got {initial_samples}"
            )));
        }
        self.initial_samples = initial_samples;
        Ok(self)
    }

    pub fn with_max_samples(mut self, max_samples: usize) -> Self {
        self.max_samples = max_samples.max(self.initial_samples + 1);
        self
    }

    pub fn initial_samples(&self) -> usize {
        self.initial_samples
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn state_at(&self, lambda: f64) -> Result<GaussianState> {
        (self.sampler)(lambda)
    }

    /// Largest entry of `V(1) - V(0)` and `alpha(1) - alpha(0)`.
    pub fn closure_defect(&self) -> Result<f64> {
        let a = self.state_at(0.0)?;
        let b = self.state_at(1.0)?;
        if a.covariance().shape() != b.covariance().shape() {
            return Ok(f64::INFINITY);
        }
        let dv = linalg::max_abs(&(a.covariance() - b.covariance()));
        let dm = (a.mean() - b.mean()).amax();
        Ok(dv.max(dm))
    }

    fn check_closed(&self) -> Result<()> {
        let defect = self.closure_defect()?;
        if !(defect <= CLOSURE_TOLERANCE) {
            return Err(Error::OpenLoop { defect });
        }
        Ok(())
    }
}

/// One point of a polarization track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSample {
    pub lambda: f64,
    pub p_unwrapped: f64,
    pub abs_t: f64,
    /// `-(1/2)` times the unwrapped argument of `det(1 - W)`.
    pub det_term_phase: f64,
    pub mean_term: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationTrack {
    pub samples: Vec<LoopSample>,
    /// Unwrapped change of `arg det(1 - W)` over the loop.
    pub det_arg_change: f64,
}

struct RawSample {
    log_det: LogDet,
    mean_term: Complex64,
    ln_det_v_plus_one: f64,
    modes: usize,
}

fn raw_sample(state: &GaussianState) -> Result<RawSample> {
    let shift = ShiftSpec::from_lattice(state.lattice());
    let spec = CovarianceSpectrum::new(state)?;
    let log_det = linalg::log_det(spec.one_minus_w(&shift, 1.0));
    if log_det.is_singular() {
        return Err(Error::InvalidState("det(1 - W) vanishes".into()));
    }
    Ok(RawSample {
        log_det,
        mean_term: momentum_shift::mean_term_with(state, &shift)?,
        ln_det_v_plus_one: spec.ln_det_v_plus_one,
        modes: state.lattice().modes(),
    })
}

/// Samples the loop and returns `P(lambda)` continued from the homotopy
/// branch at `lambda = 0`.
pub fn track_polarization(lp: &ParameterLoop) -> Result<PolarizationTrack> {
    lp.check_closed()?;
    let track = linalg::track_phase(
        0.0,
        1.0,
        linalg::TrackOptions {
            initial_segments: lp.initial_samples,
            max_jump: lp.tolerance,
            max_samples: lp.max_samples,
        },
        |lambda| raw_sample(&lp.state_at(lambda)?),
        |r| r.log_det.phase,
        |_| None,
    )?
    .map_err(|e| Error::RefinementExhausted { samples: e.samples })?;

    let anchor = momentum_shift::log_det_one_minus_w(&lp.state_at(0.0)?, &ShiftSpec::from_lattice(lp.state_at(0.0)?.lattice()))?;
    let samples = track
        .iter()
        .map(|s| {
            let r = &s.payload;
            let log_det = Complex64::new(r.log_det.ln_abs, anchor.im + s.arg);
            let b = momentum_shift::assemble(r.modes, r.ln_det_v_plus_one, log_det, r.mean_term);
            LoopSample {
                lambda: s.t,
                p_unwrapped: b.p_unwrapped,
                abs_t: b.abs_t,
                det_term_phase: b.det_term_phase,
                mean_term: r.mean_term,
            }
        })
        .collect();
    Ok(PolarizationTrack {
        samples,
        det_arg_change: track.last().expect("non-empty track").arg,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindingResult {
    /// `P(1) - P(0)` on the unwrapped track.
    pub delta_p: f64,
    pub nearest_half_integer: f64,
    pub half_integer_residual: f64,
    /// Zeros of `det(1 - W)` enclosed by the loop.
    pub zero_count: i64,
    /// Net change of `Im s`, in turns.
    pub mean_term_winding: f64,
    /// `(lambda, P_unwrapped)`.
    pub samples: Vec<(f64, f64)>,
}

fn round_winding(value: f64) -> Result<i64> {
    let rounded = value.round();
    let residual = (value - rounded).abs();
    if !(residual <= INTEGER_RESIDUAL) {
        return Err(Error::NonIntegerWinding { value, residual });
    }
    Ok(rounded as i64)
}

pub fn winding_number(track: &PolarizationTrack) -> Result<WindingResult> {
    let first = track.samples.first().ok_or_else(|| Error::InvalidInput("empty track".into()))?;
    let last = track.samples.last().expect("non-empty");
    let delta_p = last.p_unwrapped - first.p_unwrapped;
    let half = (2.0 * delta_p).round() / 2.0;
    let zero_count = round_winding(track.det_arg_change / (2.0 * PI))?;
    Ok(WindingResult {
        delta_p,
        nearest_half_integer: half,
        half_integer_residual: (delta_p - half).abs(),
        zero_count,
        mean_term_winding: (last.mean_term.im - first.mean_term.im) / (2.0 * PI),
        samples: track.samples.iter().map(|s| (s.lambda, s.p_unwrapped)).collect(),
    })
}

/// `M` from the accumulated argument of `det(1 - W(lambda))`.
pub fn zero_count(lp: &ParameterLoop) -> Result<i64> {
    Ok(winding_number(&track_polarization(lp)?)?.zero_count)
}

/// Winding number of `det F(lambda)` around zero for an arbitrary closed
/// matrix loop on `[0, 1]`.
pub fn det_winding(
    f: impl Fn(f64) -> Result<CMatrix>,
    initial_samples: usize,
    tolerance: f64,
    max_samples: usize,
) -> Result<i64> {
    let track = linalg::track_phase(
        0.0,
        1.0,
        linalg::TrackOptions {
            initial_segments: initial_samples.max(8),
            max_jump: tolerance,
            max_samples,
        },
        |lambda| Ok::<_, Error>(linalg::log_det(f(lambda)?)),
        |d| d.phase,
        |_| None,
    )?
    .map_err(|e| Error::RefinementExhausted { samples: e.samples })?;
    round_winding(track.last().expect("non-empty").arg / (2.0 * PI))
}

/// Zeros of the scalar function `g` inside the circle `|chi - center| = radius`.
pub fn zero_count_contour(
    g: impl Fn(Complex64) -> Complex64,
    center: Complex64,
    radius: f64,
    initial_samples: usize,
) -> Result<i64> {
    det_winding(
        |lambda| {
            let chi = center + Complex64::from_polar(radius, 2.0 * PI * lambda);
            Ok(CMatrix::from_element(1, 1, g(chi)))
        },
        initial_samples,
        DEFAULT_TOLERANCE,
        MAX_SAMPLES,
    )
}

/// `(1 / 2 pi) int_0^1 Im Tr[F^{-1} dF/dlambda] dlambda` by the periodic
/// trapezoid rule on `samples` points, with central differences for `dF`.
/// Returns the raw (unrounded) value.
pub fn trace_quadrature_winding(f: impl Fn(f64) -> Result<CMatrix>, samples: usize) -> Result<f64> {
    if samples < 8 {
        return Err(Error::InvalidInput(format!("need at least 8 quadrature points, got {samples}")));
    }
    let h = 1e-5;
    let mut total = 0.0;
    for j in 0..samples {
        let lambda = j as f64 / samples as f64;
        let m = f(lambda)?;
        let dm = (f(lambda + h)? - f(lambda - h)?) / Complex64::new(2.0 * h, 0.0);
        let lu = m.lu();
        let x = lu.solve(&dm).ok_or(Error::SingularSolve { residual: f64::INFINITY })?;
        total += x.trace().im;
    }
    Ok(total / samples as f64 / (2.0 * PI))
}

/// Trace-quadrature estimate of `M` for a bosonic loop, sampling the loop at
/// `lambda` outside `[0, 1]` through periodic extension.
pub fn zero_count_trace_quadrature(lp: &ParameterLoop, samples: usize) -> Result<f64> {
    lp.check_closed()?;
    trace_quadrature_winding(
        |lambda| {
            let state = lp.state_at(lambda.rem_euclid(1.0))?;
            let shift = ShiftSpec::from_lattice(state.lattice());
            Ok(CovarianceSpectrum::new(&state)?.one_minus_w(&shift, 1.0))
        },
        samples,
    )
}

/// Both detectors plus the trace cross-check on one loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopAnalysis {
    pub track: PolarizationTrack,
    pub winding: WindingResult,
    pub trace_winding: f64,
}

impl LoopAnalysis {
    /// `Delta P = -M/2` and the trace estimate rounds to `M`.
    pub fn consistent(&self) -> bool {
        let w = &self.winding;
        (w.delta_p + 0.5 * w.zero_count as f64).abs() <= 1e-6
            && (self.trace_winding - w.zero_count as f64).abs() <= INTEGER_RESIDUAL
    }

    /// The no-winding contract for bosonic Gaussian loops.
    pub fn null(&self) -> bool {
        self.winding.delta_p.abs() <= 1e-6 && self.winding.zero_count == 0
    }
}

pub fn analyze_loop(lp: &ParameterLoop, trace_samples: usize) -> Result<LoopAnalysis> {
    let track = track_polarization(lp)?;
    let winding = winding_number(&track)?;
    let trace_winding = zero_count_trace_quadrature(lp, trace_samples)?;
    Ok(LoopAnalysis {
        track,
        winding,
        trace_winding,
    })
}

fn random_symmetric(rng: &mut ChaCha8Rng, dim: usize, sigma: f64) -> RMatrix {
    let mut g = RMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let x: f64 = rng.sample(StandardNormal);
            g[(i, j)] = sigma * x;
            g[(j, i)] = sigma * x;
        }
    }
    g
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| scale * rng.random_range(-1.0..1.0))
}

fn cell_periodic_mean(rng: &mut ChaCha8Rng, lattice: &LatticeSpec, scale: f64) -> DVector<f64> {
    let b = 2 * lattice.sites_per_cell();
    let cell = random_vector(rng, b, scale);
    DVector::from_fn(lattice.dim(), |i, _| cell[i % b])
}

fn displacement(a: &DVector<f64>, b: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let x = 2.0 * PI * lambda;
    a * x.cos() + b * x.sin()
}

/// Classical loop mixing three random translation-invariant classical
/// states with weights `1 + cos(2 pi lambda + 2 pi j / 3)`, plus a circular
/// cell-periodic displacement.
pub fn random_classical_loop(lattice: LatticeSpec, seed: u64, initial_samples: usize) -> Result<ParameterLoop> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00c1_a551_ca10);
    let anchors: Vec<GaussianState> = (0..3)
        .map(|_| gaussian::random_translation_invariant_state(lattice, rng.random(), true))
        .collect();
    let a = cell_periodic_mean(&mut rng, &lattice, 1.0);
    let b = cell_periodic_mean(&mut rng, &lattice, 1.0);
    ParameterLoop::new(
        move |lambda| {
            let w: Vec<f64> = (0..3)
                .map(|j| (1.0 + (2.0 * PI * lambda + 2.0 * PI * j as f64 / 3.0).cos()) / 3.0)
                .collect();
            let refs: Vec<&GaussianState> = anchors.iter().collect();
            gaussian::mixture(&refs, &w)?.with_mean(displacement(&a, &b, lambda))
        },
        initial_samples,
    )
}

/// Pure nonclassical loop `V = S(lambda) S(lambda)^T` with
/// `S = exp(Omega G(lambda))`, `G = G0 + G1 cos(2 pi lambda) + G2 sin(2 pi lambda)`,
/// plus a circular displacement.
pub fn random_squeezed_loop(lattice: LatticeSpec, seed: u64, initial_samples: usize) -> Result<ParameterLoop> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_59ee_2ed0);
    let dim = lattice.dim();
    let sigma = 0.35 / (dim as f64).sqrt();
    let g: Vec<RMatrix> = (0..3).map(|_| random_symmetric(&mut rng, dim, sigma)).collect();
    let a = random_vector(&mut rng, dim, 1.0);
    let b = random_vector(&mut rng, dim, 1.0);
    ParameterLoop::new(
        move |lambda| {
            let x = 2.0 * PI * lambda;
            let gen = &g[0] + &g[1] * x.cos() + &g[2] * x.sin();
            let s = gaussian::symplectic_from_generator(&gen);
            let v = linalg::symmetrize(&(&s * s.transpose()));
            GaussianState::new(lattice, v, displacement(&a, &b, lambda))
        },
        initial_samples,
    )
}

/// Thermal Rice-Mele states along the reference pump, `lambda = t / T`.
pub fn rmm_thermal_loop(
    amplitude: f64,
    lattice: LatticeSpec,
    beta: f64,
    mu: f64,
    initial_samples: usize,
) -> Result<ParameterLoop> {
    let protocol = PumpProtocol::reference(amplitude, 1.0)?;
    ParameterLoop::new(
        move |lambda| rice_mele::rmm_thermal_state(&protocol.params_at_fraction(lambda), lattice, beta, mu),
        initial_samples,
    )
}

/// Coherent states in the instantaneous lower `k = 0` eigenvector along the
/// reference pump.
pub fn rmm_coherent_loop(amplitude: f64, lattice: LatticeSpec, initial_samples: usize) -> Result<ParameterLoop> {
    let protocol = PumpProtocol::reference(amplitude, 1.0)?;
    ParameterLoop::new(
        move |lambda| rice_mele::rmm_coherent_state(&protocol.params_at_fraction(lambda), lattice),
        initial_samples,
    )
}

/// Two-band Bloch matrix `sin kx sx + sin ky sy + (m + cos kx + cos ky) sz`.
pub fn qwz_bloch(m: f64, kx: f64, ky: f64) -> CMatrix {
    let x = kx.sin();
    let y = ky.sin();
    let z = m + kx.cos() + ky.cos();
    CMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(z, 0.0), Complex64::new(x, -y), Complex64::new(x, y), Complex64::new(-z, 0.0)],
    )
}

/// Thermal states of the chain `h(kx; ky)` along `x`, one per `ky = 2 pi lambda`.
pub fn qwz_thermal_family(
    m: f64,
    lattice: LatticeSpec,
    beta: f64,
    mu: f64,
    initial_samples: usize,
) -> Result<ParameterLoop> {
    if lattice.sites_per_cell() != 2 {
        return Err(Error::InvalidLattice("the two-band family needs 2 sites per cell".into()));
    }
    ParameterLoop::new(
        move |lambda| {
            let ky = 2.0 * PI * lambda;
            gaussian::thermal_state_bloch(lattice, |kx| qwz_bloch(m, kx, ky), beta, mu)
        },
        initial_samples,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChernResult {
    pub chern: i64,
    pub winding: WindingResult,
}

/// Winding of the momentum-resolved polarization `P_x(ky)` across the
/// Brillouin zone.
pub fn chern_via_polarization(family: &ParameterLoop) -> Result<ChernResult> {
    let winding = winding_number(&track_polarization(family)?)?;
    let chern = round_winding(winding.delta_p)?;
    Ok(ChernResult { chern, winding })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(l: usize, n: usize) -> LatticeSpec {
        LatticeSpec::with_default_offset(l, n).unwrap()
    }

    #[test]
    fn constant_loop_is_flat() {
        let s = gaussian::random_gaussian_state(lat(3, 2), 4, false);
        let p0 = momentum_shift::polarization(&s).unwrap().p_unwrapped;
        let lp = ParameterLoop::constant(s, 8).unwrap();
        let track = track_polarization(&lp).unwrap();
        assert_eq!(track.samples.len(), 9);
        for smp in &track.samples {
            assert!((smp.p_unwrapped - p0).abs() < 1e-14);
        }
        let w = winding_number(&track).unwrap();
        assert_eq!(w.zero_count, 0);
        assert!(w.delta_p.abs() < 1e-14);
    }

    #[test]
    fn short_or_open_loops_are_rejected() {
        let l = lat(2, 1);
        assert!(ParameterLoop::constant(GaussianState::vacuum(l), 4).is_err());
        let open = ParameterLoop::new(
            move |lambda| GaussianState::new(l, RMatrix::identity(4, 4) * (1.0 + lambda), DVector::zeros(4)),
            8,
        )
        .unwrap();
        assert!(matches!(track_polarization(&open), Err(Error::OpenLoop { .. })));
    }

    #[test]
    fn planted_scalar_zeros() {
        let c = Complex64::new(0.0, 0.0);
        assert_eq!(zero_count_contour(|z| 1.0 - z, c, 2.0, 8).unwrap(), 1);
        assert_eq!(zero_count_contour(|z| 1.0 - z * z, c, 2.0, 8).unwrap(), 2);
        assert_eq!(zero_count_contour(|z| 1.0 - z * z, c, 0.5, 8).unwrap(), 0);
        // Poles count negatively.
        assert_eq!(zero_count_contour(|z| 1.0 / (z - 0.3), c, 2.0, 8).unwrap(), -1);
    }

    #[test]
    fn planted_matrix_zeros_and_trace_check() {
        // det(1 - chi A) with eigenvalues of A at 1, 0.8 and 0.1: along |chi| = 2
        // the zeros chi = 1 and 1.25 are enclosed, chi = 10 is not.
        let a = CMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.8, 0.0),
            Complex64::new(0.1, 0.0),
        ]));
        let f = |lambda: f64| {
            let chi = Complex64::from_polar(2.0, 2.0 * PI * lambda);
            Ok(CMatrix::identity(3, 3) - &a * chi)
        };
        assert_eq!(det_winding(f, 8, DEFAULT_TOLERANCE, MAX_SAMPLES).unwrap(), 2);
        let q = trace_quadrature_winding(f, 256).unwrap();
        assert!((q - 2.0).abs() < 1e-6, "{q}");
    }

    #[test]
    fn zero_on_contour_exhausts_refinement() {
        let f = |lambda: f64| {
            let chi = Complex64::from_polar(1.0, 2.0 * PI * lambda + 1e-3);
            Ok(CMatrix::from_element(1, 1, Complex64::new(-1.0, 0.0) + chi))
        };
        // The zero at chi = -1 sits within 1e-3 of the contour.
        let r = det_winding(f, 8, DEFAULT_TOLERANCE, 64);
        assert!(matches!(r, Err(Error::RefinementExhausted { .. })), "{r:?}");
    }

    #[test]
    fn rice_mele_thermal_loop_has_no_winding() {
        let lp = rmm_thermal_loop(1.0, lat(4, 2), 1.0, -3.0, 16).unwrap();
        let a = analyze_loop(&lp, 64).unwrap();
        assert!(a.null(), "{:?}", a.winding);
        assert!(a.consistent());
        assert!(a.trace_winding.abs() < 1e-6);
        assert!(a.winding.mean_term_winding.abs() < 1e-12);
    }

    #[test]
    fn coherent_pump_loop_has_zero_polarization() {
        let lp = rmm_coherent_loop(1.0, lat(4, 2), 16).unwrap();
        let track = track_polarization(&lp).unwrap();
        for s in &track.samples {
            assert!(s.p_unwrapped.abs() < 1e-12);
        }
    }

    #[test]
    fn random_loops_have_no_winding() {
        for seed in 0..6 {
            let c = random_classical_loop(lat(4, 2), seed, 16).unwrap();
            let a = analyze_loop(&c, 64).unwrap();
            assert!(a.null() && a.consistent(), "classical {seed}: {:?}", a.winding.delta_p);
            for s in &a.track.samples {
                assert!(s.abs_t > 0.0 && s.abs_t < 1.0);
            }
            let q = random_squeezed_loop(lat(3, 2), seed, 16).unwrap();
            let a = analyze_loop(&q, 64).unwrap();
            assert!(a.null() && a.consistent(), "squeezed {seed}: {:?}", a.winding.delta_p);
        }
    }

    #[test]
    fn classical_loop_states_are_classical() {
        let lp = random_classical_loop(lat(3, 2), 9, 8).unwrap();
        for j in 0..10 {
            let r = lp.state_at(j as f64 / 10.0).unwrap().validate();
            assert!(r.valid && r.classical);
        }
        let sq = random_squeezed_loop(lat(3, 2), 9, 8).unwrap();
        let r = sq.state_at(0.3).unwrap().validate();
        assert!(r.valid && !r.classical && (r.purity - 1.0).abs() < 1e-8);
    }

    #[test]
    fn doubling_samples_changes_nothing() {
        let lp = random_squeezed_loop(lat(3, 2), 77, 8).unwrap();
        let a = winding_number(&track_polarization(&lp).unwrap()).unwrap();
        let lp = lp.with_initial_samples(16).unwrap();
        let b = winding_number(&track_polarization(&lp).unwrap()).unwrap();
        assert_eq!(a.zero_count, b.zero_count);
        assert!((a.delta_p - b.delta_p).abs() < 1e-12);
    }

    #[test]
    fn gauge_offset_does_not_change_winding() {
        let mut deltas = Vec::new();
        for delta in [0.25, 0.5, 0.75] {
            let l = LatticeSpec::new(4, 2, delta).unwrap();
            let lp = rmm_thermal_loop(1.0, l, 1.0, -3.0, 16).unwrap();
            deltas.push(winding_number(&track_polarization(&lp).unwrap()).unwrap().delta_p);
        }
        for d in &deltas {
            assert!((d - deltas[0]).abs() < 1e-9);
        }
    }

    /// Lattice (Fukui-Hatsugai-Suzuki) Chern number of the lower band.
    fn band_chern(m: f64, grid: usize) -> i64 {
        let u = |i: usize, j: usize| {
            let kx = 2.0 * PI * (i % grid) as f64 / grid as f64;
            let ky = 2.0 * PI * (j % grid) as f64 / grid as f64;
            let e = linalg::hermitian_eigen(&qwz_bloch(m, kx, ky));
            let lo = if e.eigenvalues[0] < e.eigenvalues[1] { 0 } else { 1 };
            e.eigenvectors.column(lo).into_owned()
        };
        let link = |a: &nalgebra::DVector<Complex64>, b: &nalgebra::DVector<Complex64>| {
            let z = a.dotc(b);
            z / z.norm()
        };
        let mut total = 0.0;
        for i in 0..grid {
            for j in 0..grid {
                let (a, b, c, d) = (u(i, j), u(i + 1, j), u(i + 1, j + 1), u(i, j + 1));
                let f = link(&a, &b) * link(&b, &c) * link(&c, &d) * link(&d, &a);
                total += f.arg();
            }
        }
        (total / (2.0 * PI)).round() as i64
    }

    #[test]
    fn two_band_family_is_topological_but_polarization_does_not_wind() {
        assert_eq!(band_chern(1.0, 24).abs(), 1);
        assert_eq!(band_chern(3.0, 24), 0);
        let fam = qwz_thermal_family(1.0, lat(4, 2), 1.0, -4.0, 16).unwrap();
        assert_eq!(chern_via_polarization(&fam).unwrap().chern, 0);
    }

    #[test]
    fn trivial_families() {
        let l = lat(4, 2);
        let vac = ParameterLoop::constant(GaussianState::vacuum(l), 8).unwrap();
        let r = chern_via_polarization(&vac).unwrap();
        assert_eq!(r.chern, 0);
        assert!(r.winding.samples.iter().all(|(_, p)| *p == 0.0));
        let flat = ParameterLoop::new(
            move |_| gaussian::thermal_state_bloch(l, |kx| qwz_bloch(1.0, kx, 0.7), 1.0, -4.0),
            8,
        )
        .unwrap();
        assert_eq!(chern_via_polarization(&flat).unwrap().chern, 0);
    }
}
