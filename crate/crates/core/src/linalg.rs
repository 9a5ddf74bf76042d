//! Small dense linear-algebra helpers shared by the physics modules.

use nalgebra::{DMatrix, Dyn, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

pub type RMatrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex64>;

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn symmetric_eigen(m: &RMatrix) -> SymmetricEigen<f64, Dyn> {
    SymmetricEigen::new(m.clone())
}

pub fn hermitian_eigen(m: &CMatrix) -> SymmetricEigen<Complex64, Dyn> {
    SymmetricEigen::new(m.clone())
}

/// Largest absolute entry.
pub fn max_abs<T: nalgebra::ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|x| x.clone().abs()).fold(0.0, f64::max)
}

/// `a - a^T` measured entrywise.
pub fn symmetry_defect(m: &RMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &RMatrix) -> RMatrix {
    (m + m.transpose()) * 0.5
}

/// Determinant split into modulus (as a logarithm) and a unit phase, so large
/// matrices neither overflow nor underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub ln_abs: f64,
    pub phase: Complex64,
}

impl LogDet {
    pub fn value(&self) -> Complex64 {
        self.phase * self.ln_abs.exp()
    }

    pub fn is_singular(&self) -> bool {
        self.ln_abs == f64::NEG_INFINITY
    }

    /// Relative distance `|a - b| / |b|` computed without leaving log space
    /// more than necessary.
    pub fn relative_error(&self, reference: &LogDet) -> f64 {
        let ratio = (self.ln_abs - reference.ln_abs).exp();
        (self.phase * ratio - reference.phase).norm()
    }
}

pub fn log_det(m: CMatrix) -> LogDet {
    assert!(m.is_square());
    if m.nrows() == 0 {
        return LogDet {
            ln_abs: 0.0,
            phase: Complex64::new(1.0, 0.0),
        };
    }
    log_det_of_lu(&m.lu())
}

/// Log-determinant together with the inverse, sharing one factorization.
pub fn log_det_and_inverse(m: CMatrix) -> (LogDet, Option<CMatrix>) {
    assert!(m.is_square());
    if m.nrows() == 0 {
        return (log_det(m.clone()), Some(m));
    }
    let lu = m.lu();
    let ld = log_det_of_lu(&lu);
    let inv = if ld.is_singular() { None } else { lu.try_inverse() };
    (ld, inv)
}

fn log_det_of_lu(lu: &nalgebra::LU<Complex64, Dyn, Dyn>) -> LogDet {
    let sign: f64 = lu.p().determinant();
    let u = lu.u();
    let mut ln_abs = 0.0;
    let mut phase = Complex64::new(sign, 0.0);
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        let r = d.norm();
        if r == 0.0 {
            return LogDet {
                ln_abs: f64::NEG_INFINITY,
                phase: Complex64::new(0.0, 0.0),
            };
        }
        ln_abs += r.ln();
        phase *= d / r;
    }
    let r = phase.norm();
    LogDet {
        ln_abs,
        phase: phase / r,
    }
}

/// Reduces an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// One point of an adaptively sampled phase track.
#[derive(Debug, Clone)]
pub struct PhaseSample<S> {
    pub t: f64,
    pub payload: S,
    /// Accumulated (unwrapped) argument relative to the first sample.
    pub arg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackExhausted {
    pub samples: usize,
}

/// Step control for [`track_phase`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOptions {
    pub initial_segments: usize,
    /// Largest accepted phase increment between neighbouring samples.
    pub max_jump: f64,
    pub max_samples: usize,
}

/// Samples `eval` on `[lo, hi]`, bisecting every segment whose phase
/// increment (of `unit(payload)`) exceeds `max_jump`, and accumulates the
/// increments into a continuous argument starting at zero.
///
/// When `rate` supplies the derivative of the argument at a sample, a segment
/// is also split if the trapezoidal prediction `(g_a + g_b) h / 2` exceeds the
/// bound or disagrees with the observed increment by more than half of it,
/// which catches increments that alias by a multiple of `2 pi`.
///
/// Fails with [`TrackExhausted`] when more than `max_samples` points would be
/// needed, which only happens when the tracked function comes close to zero.
pub fn track_phase<S, E>(
    lo: f64,
    hi: f64,
    opts: TrackOptions,
    eval: impl Fn(f64) -> Result<S, E>,
    unit: impl Fn(&S) -> Complex64,
    rate: impl Fn(&S) -> Option<f64>,
) -> Result<std::result::Result<Vec<PhaseSample<S>>, TrackExhausted>, E> {
    let segments = opts.initial_segments.max(1);
    let max_jump = opts.max_jump;
    let mut pts: Vec<(f64, S, Complex64)> = Vec::with_capacity(segments + 1);
    for i in 0..=segments {
        let t = lo + (hi - lo) * (i as f64) / (segments as f64);
        let s = eval(t)?;
        let u = unit(&s);
        pts.push((t, s, u));
    }

    let needs_split = |a: &(f64, S, Complex64), b: &(f64, S, Complex64)| -> bool {
        let jump = (b.2 * a.2.conj()).arg();
        if !jump.is_finite() || jump.abs() > max_jump {
            return true;
        }
        if let (Some(ga), Some(gb)) = (rate(&a.1), rate(&b.1)) {
            let predicted = 0.5 * (ga + gb) * (b.0 - a.0);
            if !predicted.is_finite() || predicted.abs() > max_jump || (predicted - jump).abs() > 0.5 * max_jump {
                return true;
            }
        }
        false
    };

    loop {
        let mut mids: Vec<Option<(f64, S, Complex64)>> = Vec::with_capacity(pts.len());
        let mut inserted = 0usize;
        for w in pts.windows(2) {
            if needs_split(&w[0], &w[1]) {
                if pts.len() + inserted + 1 > opts.max_samples {
                    return Ok(Err(TrackExhausted {
                        samples: pts.len() + inserted + 1,
                    }));
                }
                let t = 0.5 * (w[0].0 + w[1].0);
                let s = eval(t)?;
                let u = unit(&s);
                mids.push(Some((t, s, u)));
                inserted += 1;
            } else {
                mids.push(None);
            }
        }
        if inserted == 0 {
            break;
        }
        let mut next = Vec::with_capacity(pts.len() + inserted);
        let mut mids = mids.into_iter();
        for p in pts {
            next.push(p);
            if let Some(Some(m)) = mids.next() {
                next.push(m);
            }
        }
        pts = next;
    }

    let mut out = Vec::with_capacity(pts.len());
    let mut arg = 0.0;
    let mut prev: Option<Complex64> = None;
    for (t, payload, u) in pts {
        if let Some(p) = prev {
            arg += (u * p.conj()).arg();
        }
        prev = Some(u);
        out.push(PhaseSample { t, payload, arg });
    }
    Ok(Ok(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!(wrap_angle(0.0).abs() < 1e-15);
    }

    #[test]
    fn log_det_matches_direct_determinant() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(1.0, 0.5),
                Complex64::new(0.2, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.3, 0.1),
                Complex64::new(-2.0, 0.0),
                Complex64::new(0.4, 0.4),
                Complex64::new(0.0, 1.0),
                Complex64::new(1.0, 1.0),
                Complex64::new(0.5, 0.0),
            ],
        );
        let direct = m.clone().determinant();
        let ld = log_det(m);
        assert!((ld.value() - direct).norm() < 1e-12 * direct.norm());
    }

    #[test]
    fn tracker_unwraps_full_turns() {
        // e^{3 i 2 pi t} winds three times.
        let track = track_phase(
            0.0,
            1.0,
            TrackOptions {
                initial_segments: 4,
                max_jump: PI / 2.0,
                max_samples: 1 << 12,
            },
            |t| Ok::<_, ()>(Complex64::from_polar(1.0, 6.0 * PI * t)),
            |z| *z,
            |_| None,
        )
        .unwrap()
        .unwrap();
        let total = track.last().unwrap().arg;
        assert!((total - 6.0 * PI).abs() < 1e-12);
        for w in track.windows(2) {
            assert!((w[1].arg - w[0].arg).abs() <= PI / 2.0 + 1e-12);
        }
    }

    #[test]
    fn rate_detects_aliasing() {
        // Eight turns sampled on an eight-segment grid look constant without
        // the derivative.
        let opts = TrackOptions {
            initial_segments: 8,
            max_jump: PI / 2.0,
            max_samples: 1 << 12,
        };
        let eval = |t: f64| Ok::<_, ()>(t);
        let unit = |t: &f64| Complex64::from_polar(1.0, 16.0 * PI * t);
        let blind = track_phase(0.0, 1.0, opts, eval, unit, |_| None).unwrap().unwrap();
        assert!(blind.last().unwrap().arg.abs() < 1e-9);
        let seen = track_phase(0.0, 1.0, opts, eval, unit, |_| Some(16.0 * PI)).unwrap().unwrap();
        assert!((seen.last().unwrap().arg - 16.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn tracker_reports_exhaustion() {
        // About a thousand turns cannot be resolved within 64 samples.
        let res = track_phase(
            0.0,
            1.0,
            TrackOptions {
                initial_segments: 8,
                max_jump: PI / 2.0,
                max_samples: 64,
            },
            |t| Ok::<_, ()>(Complex64::from_polar(1.0, 2.0 * PI * 1000.37 * t)),
            |z| *z,
            |_| Some(2.0 * PI * 1000.37),
        )
        .unwrap();
        assert!(res.is_err());
    }
}
