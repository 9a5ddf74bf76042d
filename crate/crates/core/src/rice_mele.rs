//! Bosonic Rice-Mele chain: Bloch data, Zak phase, and the coherent-state
//! pump of the `k = 0` mode.
//!
//! The Bloch Hamiltonian is `h_k = Q_k . sigma` with
//! `Q_k = (w1 + w2 cos k, w2 sin k, Delta)`. The real-space hopping matrix has
//! `-w1` within a cell, `-w2` between cells and `+Delta`, `-Delta` on the two
//! sublattices, which yields the same `+-|Q_k|` spectrum.

use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianState, LatticeSpec};
use crate::linalg::{self, CMatrix};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Momentum samples used for Zak phases along a protocol.
pub const ZAK_SAMPLES: usize = 64;
pub const GAP_TOLERANCE: f64 = 1e-12;
pub const NORM_TOLERANCE: f64 = 1e-8;
pub const MIN_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiceMeleParams {
    pub w1: f64,
    pub w2: f64,
    pub delta: f64,
}

impl RiceMeleParams {
    pub fn new(w1: f64, w2: f64, delta: f64) -> Result<Self> {
        if !(w1.is_finite() && w2.is_finite() && delta.is_finite()) {
            return Err(Error::InvalidInput("Rice-Mele parameters must be finite".into()));
        }
        Ok(RiceMeleParams { w1, w2, delta })
    }

    /// `Q(k)` at a continuous momentum.
    pub fn q_at(&self, k: f64) -> [f64; 3] {
        [self.w1 + self.w2 * k.cos(), self.w2 * k.sin(), self.delta]
    }
}

fn momentum(k: usize, cells: usize) -> f64 {
    2.0 * PI * k as f64 / cells as f64
}

pub fn bloch_vector(params: &RiceMeleParams, k: usize, cells: usize) -> Result<[f64; 3]> {
    if cells == 0 || k >= cells {
        return Err(Error::InvalidInput(format!("momentum index {k} outside 0..{cells}")));
    }
    Ok(params.q_at(momentum(k, cells)))
}

fn norm3(q: &[f64; 3]) -> f64 {
    (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt()
}

/// `(eps_minus, eps_plus) = (-|Q_k|, |Q_k|)`.
pub fn band_energies(params: &RiceMeleParams, k: usize, cells: usize) -> Result<(f64, f64)> {
    let e = norm3(&bloch_vector(params, k, cells)?);
    Ok((-e, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Lower,
    Upper,
}

/// Normalized eigenvector of `Q . sigma` for the requested band, or `None`
/// when `Q` vanishes.
pub fn band_eigenvector(q: &[f64; 3], band: Band) -> Option<[Complex64; 2]> {
    let e = norm3(q);
    if !(e > GAP_TOLERANCE) {
        return None;
    }
    let (x, y, z) = (q[0], q[1], q[2]);
    let off = Complex64::new(x, -y);
    // Two algebraically equivalent forms; take whichever is better conditioned.
    let (a, b) = match band {
        Band::Lower => {
            if z <= 0.0 {
                (Complex64::new(e - z, 0.0), -off.conj())
            } else {
                (off, Complex64::new(-(z + e), 0.0))
            }
        }
        Band::Upper => {
            if z >= 0.0 {
                (Complex64::new(e + z, 0.0), off.conj())
            } else {
                (off, Complex64::new(e - z, 0.0))
            }
        }
    };
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    Some([a / n, b / n])
}

/// Zak phase `-Im ln prod_j <u(k_j)|u(k_{j+1})>` from a closed Wilson loop
/// with `samples` momenta.
pub fn zak_phase(params: &RiceMeleParams, band: Band, samples: usize) -> Result<f64> {
    if samples < 16 {
        return Err(Error::InvalidInput(format!("Zak phase needs at least 16 momenta, got {samples}")));
    }
    let mut vecs = Vec::with_capacity(samples);
    for j in 0..samples {
        let q = params.q_at(momentum(j, samples));
        let u = band_eigenvector(&q, band).ok_or(Error::GapClosure { k: j, gap: norm3(&q) })?;
        vecs.push(u);
    }
    let mut prod = Complex64::new(1.0, 0.0);
    for j in 0..samples {
        let u = &vecs[j];
        let v = &vecs[(j + 1) % samples];
        let overlap = u[0].conj() * v[0] + u[1].conj() * v[1];
        prod *= overlap;
        prod /= prod.norm();
    }
    let mut phi = linalg::wrap_angle(-prod.arg());
    if phi == -PI {
        phi = PI;
    }
    Ok(phi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PumpShape {
    /// `w1 = A cos^2(pi t/T)`, `w2 = A sin^2(pi t/T)`, `Delta = A sin(2 pi t/T)`.
    Reference,
    /// The reference loop with `Delta` shifted by `offset * A`.
    ShiftedStaggering { offset: f64 },
    /// Time-independent parameters.
    Constant(RiceMeleParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpProtocol {
    pub amplitude: f64,
    pub period: f64,
    pub shape: PumpShape,
}

impl PumpProtocol {
    pub fn new(amplitude: f64, period: f64, shape: PumpShape) -> Result<Self> {
        if !(amplitude.is_finite() && period.is_finite() && period > 0.0) {
            return Err(Error::InvalidInput(format!(
                "pump needs finite amplitude and positive period (A = {amplitude}, T = {period})"
            )));
        }
        Ok(PumpProtocol { amplitude, period, shape })
    }

    pub fn reference(amplitude: f64, period: f64) -> Result<Self> {
        Self::new(amplitude, period, PumpShape::Reference)
    }

    /// Parameters at time `t`.
    pub fn params_at(&self, t: f64) -> RiceMeleParams {
        let a = self.amplitude;
        let x = PI * t / self.period;
        match self.shape {
            PumpShape::Reference => RiceMeleParams {
                w1: a * x.cos().powi(2),
                w2: a * x.sin().powi(2),
                delta: a * (2.0 * x).sin(),
            },
            PumpShape::ShiftedStaggering { offset } => RiceMeleParams {
                w1: a * x.cos().powi(2),
                w2: a * x.sin().powi(2),
                delta: a * (2.0 * x).sin() + offset * a,
            },
            PumpShape::Constant(p) => p,
        }
    }

    /// Parameters at loop fraction `lambda = t / T`.
    pub fn params_at_fraction(&self, lambda: f64) -> RiceMeleParams {
        self.params_at(lambda * self.period)
    }

    /// The dimensionless cycle time `A T`.
    pub fn cycle_time(&self) -> f64 {
        self.amplitude * self.period
    }
}

/// Unwrapped lower-band Zak phase along one period, from an adaptively
/// refined time grid starting with `steps` segments.
pub fn zak_trace(protocol: &PumpProtocol, steps: usize, samples: usize) -> Result<Vec<(f64, f64)>> {
    let track = linalg::track_phase(
        0.0,
        protocol.period,
        linalg::TrackOptions {
            initial_segments: steps.max(8),
            max_jump: PI / 4.0,
            max_samples: 1 << 20,
        },
        |t| zak_phase(&protocol.params_at(t), Band::Lower, samples),
        |phi| Complex64::from_polar(1.0, *phi),
        |_| None,
    )?
    .map_err(|e| Error::RefinementExhausted { samples: e.samples })?;
    let start = track[0].payload;
    Ok(track.into_iter().map(|s| (s.t, start + s.arg)).collect())
}

/// Integer winding of the lower-band Zak phase over one period.
pub fn zak_winding(protocol: &PumpProtocol, steps: usize) -> Result<i64> {
    let trace = zak_trace(protocol, steps, ZAK_SAMPLES)?;
    let total = trace.last().expect("trace is non-empty").1 - trace[0].1;
    let value = total / (2.0 * PI);
    let rounded = value.round();
    let residual = (value - rounded).abs();
    if residual > 1e-3 {
        return Err(Error::NonIntegerWinding { value, residual });
    }
    Ok(rounded as i64)
}

/// Amplitudes `(alpha, beta)` of the `k = 0` mode on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpTrajectory {
    pub times: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    /// Lower instantaneous energy `-|Q_0(t)|`.
    pub energies: Vec<f64>,
}

impl PumpTrajectory {
    pub fn norm(&self, i: usize) -> f64 {
        self.alpha[i].norm_sqr() + self.beta[i].norm_sqr()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Default RK4 step count: `10^4` per period, raised so that the phase
/// advanced per step stays below about `0.007 rad` on long cycles.
pub fn default_steps(protocol: &PumpProtocol) -> usize {
    let scaled = (200.0 * protocol.cycle_time().abs()).ceil() as usize;
    scaled.max(10_000)
}

/// Lower eigenvector of `h_0(t)` scaled to unit cell occupancy, or an error
/// when the `k = 0` gap closes.
pub fn lower_eigenstate(params: &RiceMeleParams) -> Result<[Complex64; 2]> {
    let q = params.q_at(0.0);
    band_eigenvector(&q, Band::Lower).ok_or(Error::GapClosure { k: 0, gap: norm3(&q) })
}

fn h0_apply(q: &[f64; 3], psi: &[Complex64; 2]) -> [Complex64; 2] {
    // -i h psi with h = [[z, x - i y], [x + i y, -z]].
    let off = Complex64::new(q[0], -q[1]);
    let h0 = q[2] * psi[0] + off * psi[1];
    let h1 = off.conj() * psi[0] - q[2] * psi[1];
    let mi = Complex64::new(0.0, -1.0);
    [mi * h0, mi * h1]
}

/// Integrates `i d/dt (alpha, beta) = h_0(t) (alpha, beta)` over one period
/// with classical fourth-order Runge-Kutta.
pub fn evolve_pump(protocol: &PumpProtocol, initial: Option<[Complex64; 2]>, steps: usize) -> Result<PumpTrajectory> {
    if steps < MIN_STEPS {
        return Err(Error::InvalidInput(format!("need at least {MIN_STEPS} steps per period, got {steps}")));
    }
    let mut psi = match initial {
        Some(v) => {
            if v.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::InvalidInput("initial amplitudes must be finite".into()));
            }
            v
        }
        None => lower_eigenstate(&protocol.params_at(0.0))?,
    };
    let h = protocol.period / steps as f64;
    let q = |t: f64| protocol.params_at(t).q_at(0.0);
    let mut traj = PumpTrajectory {
        times: Vec::with_capacity(steps + 1),
        alpha: Vec::with_capacity(steps + 1),
        beta: Vec::with_capacity(steps + 1),
        energies: Vec::with_capacity(steps + 1),
    };
    let record = |traj: &mut PumpTrajectory, t: f64, psi: &[Complex64; 2]| {
        traj.times.push(t);
        traj.alpha.push(psi[0]);
        traj.beta.push(psi[1]);
        traj.energies.push(-norm3(&q(t)));
    };
    record(&mut traj, 0.0, &psi);
    let axpy = |a: &[Complex64; 2], s: f64, b: &[Complex64; 2]| [a[0] + b[0] * s, a[1] + b[1] * s];
    for i in 0..steps {
        let t = i as f64 * h;
        let qm = q(t + 0.5 * h);
        let k1 = h0_apply(&q(t), &psi);
        let k2 = h0_apply(&qm, &axpy(&psi, 0.5 * h, &k1));
        let k3 = h0_apply(&qm, &axpy(&psi, 0.5 * h, &k2));
        let k4 = h0_apply(&q(t + h), &axpy(&psi, h, &k3));
        for c in 0..2 {
            psi[c] += (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]) * (h / 6.0);
        }
        record(&mut traj, (i + 1) as f64 * h, &psi);
    }
    let n0 = traj.norm(0);
    let drift = (0..traj.len()).map(|i| (traj.norm(i) - n0).abs()).fold(0.0, f64::max) / n0.max(f64::MIN_POSITIVE);
    if drift > NORM_TOLERANCE {
        return Err(Error::NormDrift { drift });
    }
    Ok(traj)
}

/// `|<u_-(t)|psi(t)>|^2 / |psi|^2` at sample `i`.
pub fn lower_band_fidelity(traj: &PumpTrajectory, protocol: &PumpProtocol, i: usize) -> Result<f64> {
    let u = lower_eigenstate(&protocol.params_at(traj.times[i]))?;
    let overlap = u[0].conj() * traj.alpha[i] + u[1].conj() * traj.beta[i];
    Ok(overlap.norm_sqr() / traj.norm(i))
}

/// `Phi = int_0^T w2(t) i (alpha beta^* - alpha^* beta) dt` by composite
/// Simpson (trapezoid when the step count is odd).
pub fn integrated_flux(traj: &PumpTrajectory, protocol: &PumpProtocol) -> Result<f64> {
    let n = traj.len();
    if n < 2 {
        return Err(Error::InvalidInput("trajectory needs at least two samples".into()));
    }
    let span = traj.times[n - 1] - traj.times[0];
    if (span - protocol.period).abs() > 1e-9 * protocol.period {
        return Err(Error::InvalidInput(format!(
            "trajectory spans {span}, protocol period is {}",
            protocol.period
        )));
    }
    let f: Vec<f64> = (0..n)
        .map(|i| {
            let w2 = protocol.params_at(traj.times[i]).w2;
            // i (a b* - a* b) = -2 Im(a b*)
            -2.0 * w2 * (traj.alpha[i] * traj.beta[i].conj()).im
        })
        .collect();
    let h = span / (n - 1) as f64;
    let segments = n - 1;
    let total = if segments.is_multiple_of(2) {
        let mut s = f[0] + f[n - 1];
        for (i, v) in f.iter().enumerate().take(n - 1).skip(1) {
            s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        s * h / 3.0
    } else {
        (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1])) * h
    };
    Ok(total)
}

/// Adiabatic flux of the reference loop,
/// `(1/2) int_0^pi cos^2 t / (sin^2 t + 1)^{3/2} dt`.
pub fn adiabatic_flux(protocol: &PumpProtocol) -> Result<f64> {
    if protocol.shape != PumpShape::Reference {
        return Err(Error::InvalidInput("adiabatic flux is defined for the reference protocol".into()));
    }
    let out = quadrature::double_exponential::integrate(
        |t: f64| t.cos().powi(2) / (t.sin().powi(2) + 1.0).powf(1.5),
        0.0,
        PI,
        1e-13,
    );
    Ok(0.5 * out.integral)
}

/// Closed value of [`adiabatic_flux`], `Gamma(3/4)^2 / sqrt(2 pi)`.
pub const ADIABATIC_FLUX: f64 = 0.599_070_117_367_796;

/// Real-space single-particle Hamiltonian on a periodic `n = 2` chain.
pub fn rmm_hopping_matrix(params: &RiceMeleParams, lattice: &LatticeSpec) -> Result<CMatrix> {
    if lattice.sites_per_cell() != 2 {
        return Err(Error::InvalidLattice(format!(
            "Rice-Mele chain needs 2 sites per cell, got {}",
            lattice.sites_per_cell()
        )));
    }
    let l = lattice.cells();
    let mut h = CMatrix::zeros(2 * l, 2 * l);
    for r in 0..l {
        let a = lattice.mode_index(r, 0);
        let b = lattice.mode_index(r, 1);
        let next = lattice.mode_index((r + 1) % l, 0);
        h[(a, a)] += Complex64::new(params.delta, 0.0);
        h[(b, b)] -= Complex64::new(params.delta, 0.0);
        h[(a, b)] -= Complex64::new(params.w1, 0.0);
        h[(b, a)] -= Complex64::new(params.w1, 0.0);
        h[(b, next)] -= Complex64::new(params.w2, 0.0);
        h[(next, b)] -= Complex64::new(params.w2, 0.0);
    }
    Ok(h)
}

/// Bloch matrix of [`rmm_hopping_matrix`], `sum_d H_{0,d} e^{i k d}`.
pub fn rmm_bloch_matrix(params: &RiceMeleParams, k: f64) -> CMatrix {
    let off = -params.w1 - params.w2 * Complex64::from_polar(1.0, -k);
    CMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(params.delta, 0.0), off, off.conj(), Complex64::new(-params.delta, 0.0)],
    )
}

/// Grand-canonical thermal state of the chain; requires `mu` below the lower
/// band.
pub fn rmm_thermal_state(params: &RiceMeleParams, lattice: LatticeSpec, beta: f64, mu: f64) -> Result<GaussianState> {
    if lattice.sites_per_cell() != 2 {
        return Err(Error::InvalidLattice(format!(
            "Rice-Mele chain needs 2 sites per cell, got {}",
            lattice.sites_per_cell()
        )));
    }
    gaussian::thermal_state_bloch(lattice, |k| rmm_bloch_matrix(params, k), beta, mu)
}

/// Coherent state with every cell in the lower `k = 0` eigenvector, at unit
/// cell occupancy.
pub fn rmm_coherent_state(params: &RiceMeleParams, lattice: LatticeSpec) -> Result<GaussianState> {
    let u = lower_eigenstate(params)?;
    gaussian::uniform_coherent_state(lattice, &u)
}
