//! Fock-space oracles for `<T>` on one and two modes.
//!
//! `T` acts as `exp(i theta n)` on each mode, so its expectation value only
//! involves photon-number probabilities. The closed forms below follow from
//! summing the corresponding geometric or exponential series; the truncated
//! variant sums the same series term by term from the state amplitudes.

use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianState, LatticeSpec};
use num_complex::Complex64;

/// Largest truncation tail accepted by [`oracle_fock_truncated`].
pub const TAIL_TOLERANCE: f64 = 1e-9;

/// `exp(sum_j (e^{i theta_j} - 1) |alpha_j|^2)`.
pub fn oracle_coherent(phases: &[f64], amplitudes: &[Complex64]) -> Result<Complex64> {
    if phases.len() != amplitudes.len() {
        return Err(Error::InvalidInput(format!(
            "{} phases for {} amplitudes",
            phases.len(),
            amplitudes.len()
        )));
    }
    let exponent: Complex64 = phases
        .iter()
        .zip(amplitudes)
        .map(|(th, a)| (Complex64::from_polar(1.0, *th) - 1.0) * a.norm_sqr())
        .sum();
    Ok(exponent.exp())
}

/// `(1 - q) / (1 - q e^{i theta})` with `q = nbar / (nbar + 1)`.
pub fn oracle_thermal_mode(theta: f64, nbar: f64) -> Complex64 {
    let q = nbar / (nbar + 1.0);
    Complex64::new(1.0 - q, 0.0) / (1.0 - q * Complex64::from_polar(1.0, theta))
}

/// `1 / sqrt(cosh^2 r - e^{2 i theta} sinh^2 r)`.
///
/// The radicand stays on a circle of radius `sinh^2 r` around `cosh^2 r`, so
/// it never leaves the right half-plane and the principal root is continuous
/// in `theta`.
pub fn oracle_squeezed(theta: f64, r: f64) -> Complex64 {
    let z = r.cosh().powi(2) - Complex64::from_polar(1.0, 2.0 * theta) * r.sinh().powi(2);
    z.sqrt().inv()
}

/// `(1 - t^2) / (1 - t^2 e^{i(theta1 + theta2)})` with `t = tanh r`.
pub fn oracle_tmsv(theta1: f64, theta2: f64, r: f64) -> Complex64 {
    let t2 = r.tanh().powi(2);
    Complex64::new(1.0 - t2, 0.0) / (1.0 - t2 * Complex64::from_polar(1.0, theta1 + theta2))
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleKind {
    /// Product of coherent states, one amplitude per mode.
    Coherent { amplitudes: Vec<Complex64> },
    Thermal { nbar: f64 },
    SqueezedVacuum { r: f64 },
    TwoModeSqueezed { r: f64 },
}

impl OracleKind {
    pub fn modes(&self) -> usize {
        match self {
            OracleKind::Coherent { amplitudes } => amplitudes.len(),
            OracleKind::Thermal { .. } | OracleKind::SqueezedVacuum { .. } => 1,
            OracleKind::TwoModeSqueezed { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OracleKind::Coherent { .. } => "coherent",
            OracleKind::Thermal { .. } => "thermal",
            OracleKind::SqueezedVacuum { .. } => "squeezed_vacuum",
            OracleKind::TwoModeSqueezed { .. } => "two_mode_squeezed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpec {
    pub kind: OracleKind,
    /// One phase per mode.
    pub phases: Vec<f64>,
    /// Largest photon number kept per mode.
    pub cutoff: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedValue {
    pub value: Complex64,
    /// Probability mass beyond the cutoff.
    pub tail: f64,
}

impl OracleSpec {
    pub fn new(kind: OracleKind, phases: Vec<f64>, cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::InvalidInput("cutoff must be at least 1".into()));
        }
        if phases.len() != kind.modes() {
            return Err(Error::InvalidInput(format!(
                "{} oracle needs {} phases, got {}",
                kind.name(),
                kind.modes(),
                phases.len()
            )));
        }
        let finite = match &kind {
            OracleKind::Coherent { amplitudes } => amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite()),
            OracleKind::Thermal { nbar } => nbar.is_finite() && *nbar >= 0.0,
            OracleKind::SqueezedVacuum { r } | OracleKind::TwoModeSqueezed { r } => r.is_finite(),
        };
        if !finite || phases.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput(format!("{} oracle parameters out of range", kind.name())));
        }
        Ok(OracleSpec { kind, phases, cutoff })
    }

    /// Closed-form value of `<T>`.
    pub fn closed_form(&self) -> Result<Complex64> {
        let th = &self.phases;
        Ok(match &self.kind {
            OracleKind::Coherent { amplitudes } => oracle_coherent(th, amplitudes)?,
            OracleKind::Thermal { nbar } => oracle_thermal_mode(th[0], *nbar),
            OracleKind::SqueezedVacuum { r } => oracle_squeezed(th[0], *r),
            OracleKind::TwoModeSqueezed { r } => oracle_tmsv(th[0], th[1], *r),
        })
    }

    /// The same state as a [`GaussianState`] on an `n = 1` chain with one
    /// cell per mode. The chain's own phases are irrelevant; pair it with
    /// [`OracleSpec::phases`].
    pub fn gaussian_state(&self) -> Result<GaussianState> {
        let lattice = LatticeSpec::with_default_offset(self.kind.modes(), 1)?;
        match &self.kind {
            OracleKind::Coherent { amplitudes } => gaussian::coherent_state(lattice, amplitudes),
            OracleKind::Thermal { nbar } => {
                let v = crate::linalg::RMatrix::identity(2, 2) * (2.0 * nbar + 1.0);
                GaussianState::new(lattice, v, nalgebra::DVector::zeros(2))
            }
            OracleKind::SqueezedVacuum { r } => gaussian::squeezed_vacuum_state(lattice, &[*r]),
            OracleKind::TwoModeSqueezed { r } => gaussian::two_mode_squeezed_state(lattice, *r),
        }
    }
}

/// Photon-number distribution of one mode up to `cutoff`, continued past the
/// cutoff only to measure the discarded mass.
struct Distribution {
    kept: Vec<f64>,
    tail: f64,
}

/// Sums the discarded terms of a series whose terms eventually decrease.
fn tail_sum(mut next: impl FnMut() -> f64) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for _ in 0..1_000_000 {
        let p = next();
        sum += p;
        if p <= prev && p <= 1e-18 * sum.max(1e-300) {
            break;
        }
        if p == 0.0 {
            break;
        }
        prev = p;
    }
    sum
}

fn coherent_distribution(alpha: Complex64, cutoff: usize) -> Distribution {
    let n = alpha.norm_sqr();
    // Amplitudes alpha^m / sqrt(m!) e^{-|alpha|^2 / 2}.
    let mut c = Complex64::new((-0.5 * n).exp(), 0.0);
    let mut kept = Vec::with_capacity(cutoff + 1);
    for m in 0..=cutoff {
        kept.push(c.norm_sqr());
        c = c * alpha / ((m + 1) as f64).sqrt();
    }
    let mut m = cutoff + 1;
    let tail = tail_sum(|| {
        let p = c.norm_sqr();
        c = c * alpha / ((m + 1) as f64).sqrt();
        m += 1;
        p
    });
    Distribution { kept, tail }
}

fn thermal_distribution(nbar: f64, cutoff: usize) -> Distribution {
    let q = nbar / (nbar + 1.0);
    let kept = (0..=cutoff).map(|m| (1.0 - q) * q.powi(m as i32)).collect();
    Distribution {
        kept,
        tail: q.powi(cutoff as i32 + 1),
    }
}

fn squeezed_distribution(r: f64, cutoff: usize) -> Distribution {
    // c_{2k} = (-tanh r)^k sqrt((2k)!) / (2^k k!) / sqrt(cosh r).
    let t = r.tanh();
    let mut c = 1.0 / r.cosh().sqrt();
    let mut kept = vec![0.0; cutoff + 1];
    let mut k = 0usize;
    while 2 * k <= cutoff {
        kept[2 * k] = c * c;
        c *= -t * (((2 * k + 1) as f64) / ((2 * k + 2) as f64)).sqrt();
        k += 1;
    }
    let tail = tail_sum(|| {
        let p = c * c;
        c *= -t * (((2 * k + 1) as f64) / ((2 * k + 2) as f64)).sqrt();
        k += 1;
        p
    });
    Distribution { kept, tail }
}

fn tmsv_distribution(r: f64, cutoff: usize) -> Distribution {
    // sech r tanh^n r on |n, n>.
    let t2 = r.tanh().powi(2);
    let p0 = 1.0 - t2;
    let kept = (0..=cutoff).map(|n| p0 * t2.powi(n as i32)).collect();
    Distribution {
        kept,
        tail: t2.powi(cutoff as i32 + 1),
    }
}

fn phase_sum(dist: &Distribution, theta: f64) -> Complex64 {
    dist.kept
        .iter()
        .enumerate()
        .map(|(m, p)| Complex64::from_polar(*p, theta * m as f64))
        .sum()
}

/// `Tr[rho T]` in the Fock basis truncated at `spec.cutoff` photons per
/// mode.
pub fn oracle_fock_truncated(spec: &OracleSpec) -> Result<TruncatedValue> {
    let cutoff = spec.cutoff;
    let th = &spec.phases;
    let (value, tail) = match &spec.kind {
        OracleKind::Coherent { amplitudes } => {
            let mut value = Complex64::new(1.0, 0.0);
            let mut kept_mass = 1.0;
            for (a, theta) in amplitudes.iter().zip(th) {
                let d = coherent_distribution(*a, cutoff);
                value *= phase_sum(&d, *theta);
                kept_mass *= 1.0 - d.tail;
            }
            (value, 1.0 - kept_mass)
        }
        OracleKind::Thermal { nbar } => {
            let d = thermal_distribution(*nbar, cutoff);
            (phase_sum(&d, th[0]), d.tail)
        }
        OracleKind::SqueezedVacuum { r } => {
            let d = squeezed_distribution(*r, cutoff);
            (phase_sum(&d, th[0]), d.tail)
        }
        OracleKind::TwoModeSqueezed { r } => {
            let d = tmsv_distribution(*r, cutoff);
            (phase_sum(&d, th[0] + th[1]), d.tail)
        }
    };
    if tail > TAIL_TOLERANCE {
        return Err(Error::CutoffTooSmall { tail });
    }
    Ok(TruncatedValue { value, tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn coherent_closed_form() {
        assert_eq!(oracle_coherent(&[1.0, 2.0], &[Complex64::default(); 2]).unwrap(), Complex64::new(1.0, 0.0));
        let single = oracle_coherent(&[PI], &[Complex64::new(1.0, 0.0)]).unwrap();
        assert!(close(single, Complex64::new((-2f64).exp(), 0.0), 1e-15));
        assert!(oracle_coherent(&[PI], &[]).is_err());
        // Phases of a full four-site ring sum to zero.
        let th: Vec<f64> = (0..4).map(|r| 2.0 * PI * (r as f64 + 0.5) / 4.0).collect();
        let a = [Complex64::new(1.0, 0.0); 4];
        assert!(close(oracle_coherent(&th, &a).unwrap(), Complex64::new((-4f64).exp(), 0.0), 1e-14));
    }

    #[test]
    fn thermal_closed_form() {
        assert_eq!(oracle_thermal_mode(0.7, 0.0), Complex64::new(1.0, 0.0));
        assert!(close(oracle_thermal_mode(PI, 1.0), Complex64::new(1.0 / 3.0, 0.0), 1e-15));
        assert!(close(oracle_thermal_mode(PI / 2.0, 1.0), Complex64::new(0.4, 0.2), 1e-15));
    }

    #[test]
    fn squeezed_closed_form() {
        assert!(close(oracle_squeezed(1.3, 0.0), Complex64::new(1.0, 0.0), 1e-15));
        for r in [0.2, 1.0, 2.5] {
            assert!(close(oracle_squeezed(PI, r), Complex64::new(1.0, 0.0), 1e-12));
        }
        let r = 1f64.asinh();
        assert!(close(oracle_squeezed(PI / 2.0, r), Complex64::new(1.0 / 3f64.sqrt(), 0.0), 1e-14));
    }

    #[test]
    fn tmsv_closed_form() {
        assert_eq!(oracle_tmsv(0.4, 2.0, 0.0), Complex64::new(1.0, 0.0));
        assert!(close(oracle_tmsv(0.3, 1.1, 0.6), oracle_tmsv(1.0, 0.4, 0.6), 1e-14));
        let r = (0.5f64.sqrt()).atanh();
        assert!(close(oracle_tmsv(PI / 3.0, 2.0 * PI / 3.0, r), Complex64::new(1.0 / 3.0, 0.0), 1e-14));
    }

    #[test]
    fn truncated_matches_closed_forms() {
        let cases = [
            (OracleKind::Coherent { amplitudes: vec![Complex64::new(1.0, 0.0)] }, vec![0.9], 40),
            (OracleKind::Thermal { nbar: 2.0 }, vec![PI], 200),
            (OracleKind::SqueezedVacuum { r: 0.8814 }, vec![0.4], 200),
            (OracleKind::TwoModeSqueezed { r: 0.5 }, vec![0.4, 2.0], 200),
            (
                OracleKind::Coherent { amplitudes: vec![Complex64::new(0.3, 1.2), Complex64::new(-2.0, 0.1)] },
                vec![1.0, 5.0],
                80,
            ),
        ];
        for (kind, phases, cutoff) in cases {
            let spec = OracleSpec::new(kind, phases, cutoff).unwrap();
            let t = oracle_fock_truncated(&spec).unwrap();
            let exact = spec.closed_form().unwrap();
            assert!(close(t.value, exact, 1e-10), "{spec:?}: {} vs {exact}", t.value);
            assert!(t.value.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn thermal_at_pi_is_parity() {
        let spec = OracleSpec::new(OracleKind::Thermal { nbar: 2.0 }, vec![PI], 200).unwrap();
        let q = 2.0 / 3.0;
        let t = oracle_fock_truncated(&spec).unwrap().value;
        assert!(close(t, Complex64::new((1.0 - q) / (1.0 + q), 0.0), 1e-9));
    }

    #[test]
    fn small_cutoff_is_rejected() {
        let spec = OracleSpec::new(OracleKind::Thermal { nbar: 5.0 }, vec![1.0], 2).unwrap();
        assert!(matches!(oracle_fock_truncated(&spec), Err(Error::CutoffTooSmall { .. })));
        assert!(OracleSpec::new(OracleKind::Thermal { nbar: 5.0 }, vec![1.0], 0).is_err());
        assert!(OracleSpec::new(OracleKind::TwoModeSqueezed { r: 0.1 }, vec![1.0], 10).is_err());
    }

    #[test]
    fn doubling_cutoff_is_stable() {
        let kind = OracleKind::SqueezedVacuum { r: 0.3 };
        let a = oracle_fock_truncated(&OracleSpec::new(kind.clone(), vec![0.7], 60).unwrap()).unwrap();
        let b = oracle_fock_truncated(&OracleSpec::new(kind, vec![0.7], 120).unwrap()).unwrap();
        assert!((a.value - b.value).norm() < 1e-10);
    }

    #[test]
    fn gaussian_states_match_kind() {
        let spec = OracleSpec::new(OracleKind::TwoModeSqueezed { r: 0.3 }, vec![1.0, 2.0], 50).unwrap();
        let s = spec.gaussian_state().unwrap();
        assert_eq!(s.lattice().modes(), 2);
        assert!(s.validate().valid);
    }
}
