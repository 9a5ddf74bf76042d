//! Block-circulant reduction of `det(1 - W)` for translation-invariant states.
//!
//! With `V` block-circulant in the cell index, the cell Fourier transform maps
//! `(V - 1)(V + 1)^{-1}` to blocks `a_k` and `U` to a cyclic shift times the
//! internal phase block `D = diag_s(e^{2 pi i x_{0,s} / L})`. The `2nL`
//! determinant then collapses to `det(1 - m_{L-1} ... m_1 m_0)` with
//! `m_k = a_k D`, costing `O(L n^3)`.

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, LatticeSpec};
use crate::linalg::{self, CMatrix, LogDet};
use crate::momentum_shift::{CovarianceSpectrum, ShiftSpec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::time::Instant;

/// Relative circulant defect admitted by [`cell_bloch_blocks`].
pub const CIRCULANT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct BlochBlocks {
    lattice: LatticeSpec,
    /// Fourier blocks of the covariance, one per momentum.
    pub v_k: Vec<CMatrix>,
    /// Diagonal of the internal phase block, length `2n`.
    pub internal_phase: Vec<Complex64>,
    /// `((v_k - 1)(v_k + 1)^{-1}) D`.
    pub m_k: Vec<CMatrix>,
    /// Largest `|eig((v_k - 1)(v_k + 1)^{-1})|` over all blocks, bounding every `|eig(m_k)|`.
    pub block_norm: f64,
}

impl BlochBlocks {
    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    /// Inverse cell Fourier transform of `v_k`, which must reproduce `V`.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let l = self.lattice.cells();
        let b = 2 * self.lattice.sites_per_cell();
        let mut c_d = Vec::with_capacity(l);
        for d in 0..l {
            let mut c = CMatrix::zeros(b, b);
            for (k, vk) in self.v_k.iter().enumerate() {
                c += vk * Complex64::from_polar(1.0 / l as f64, -2.0 * PI * (k * d) as f64 / l as f64);
            }
            c_d.push(c);
        }
        let mut v = DMatrix::zeros(l * b, l * b);
        for r in 0..l {
            for rp in 0..l {
                let c = &c_d[(rp + l - r) % l];
                for i in 0..b {
                    for j in 0..b {
                        v[(r * b + i, rp * b + j)] = c[(i, j)].re;
                    }
                }
            }
        }
        v
    }
}

/// Largest deviation of `V_{r, r'}` from `V_{0, r' - r}`, relative to `max |V|`.
pub fn circulant_defect(state: &GaussianState) -> f64 {
    let lat = state.lattice();
    let l = lat.cells();
    let b = 2 * lat.sites_per_cell();
    let v = state.covariance();
    let mut worst = 0.0f64;
    for r in 0..l {
        for rp in 0..l {
            let d = (rp + l - r) % l;
            for i in 0..b {
                for j in 0..b {
                    worst = worst.max((v[(r * b + i, rp * b + j)] - v[(i, d * b + j)]).abs());
                }
            }
        }
    }
    let mean = state.mean();
    for r in 1..l {
        for i in 0..b {
            worst = worst.max((mean[r * b + i] - mean[i]).abs());
        }
    }
    worst / linalg::max_abs(v).max(1.0)
}

/// Fourier blocks of a translation-invariant state. `V` is positive definite
/// exactly when every `v_k` is, so positivity is checked block by block.
pub fn cell_bloch_blocks(state: &GaussianState) -> Result<BlochBlocks> {
    state.require_symmetric()?;
    let defect = circulant_defect(state);
    if defect > CIRCULANT_TOLERANCE {
        return Err(Error::NotTranslationInvariant { defect });
    }
    let lat = *state.lattice();
    let l = lat.cells();
    let n = lat.sites_per_cell();
    let b = 2 * n;
    let v = state.covariance();

    let internal_phase: Vec<Complex64> = (0..n)
        .flat_map(|s| {
            let z = Complex64::from_polar(1.0, lat.phase(0, s));
            [z, z]
        })
        .collect();

    let c_d: Vec<CMatrix> = (0..l)
        .map(|d| linalg::to_complex(&v.view((0, d * b), (b, b)).into_owned()))
        .collect();

    let mut v_k = Vec::with_capacity(l);
    let mut m_k = Vec::with_capacity(l);
    let mut block_norm = 0.0f64;
    for k in 0..l {
        let mut vk = CMatrix::zeros(b, b);
        for (d, c) in c_d.iter().enumerate() {
            vk += c * Complex64::from_polar(1.0, 2.0 * PI * (k * d % l) as f64 / l as f64);
        }
        let vk = (&vk + vk.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = linalg::hermitian_eigen(&vk);
        if eig.eigenvalues.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidState(format!("Bloch block {k} is not positive definite")));
        }
        let f = eig.eigenvalues.map(|x| (x - 1.0) / (x + 1.0));
        block_norm = block_norm.max(f.iter().map(|x| x.abs()).fold(0.0, f64::max));
        let q = &eig.eigenvectors;
        let fd = DMatrix::from_diagonal(&f.map(|x| Complex64::new(x, 0.0)));
        let a = q * fd * q.adjoint();
        let m = CMatrix::from_fn(b, b, |i, j| a[(i, j)] * internal_phase[j]);
        v_k.push(vk);
        m_k.push(m);
    }
    if !(block_norm < 1.0) {
        return Err(Error::InvalidState(format!("block norm {block_norm} is not below 1")));
    }
    Ok(BlochBlocks {
        lattice: lat,
        v_k,
        internal_phase,
        m_k,
        block_norm,
    })
}

/// `m_{L-1} ... m_1 m_0`.
pub fn block_product(blocks: &BlochBlocks) -> CMatrix {
    let b = blocks.internal_phase.len();
    blocks
        .m_k
        .iter()
        .fold(CMatrix::identity(b, b), |acc, m| m * acc)
}

pub fn reduced_determinant(blocks: &BlochBlocks) -> Complex64 {
    reduced_log_det_value(blocks).value()
}

pub fn reduced_log_det_value(blocks: &BlochBlocks) -> LogDet {
    let p = block_product(blocks);
    let b = p.nrows();
    linalg::log_det(CMatrix::identity(b, b) - p)
}

/// Frobenius norm below which [`reduced_log_det`] sums `-sum_j Tr(P^j) / j`.
const SERIES_NORM: f64 = 0.5;

/// `ln det(1 - m_{L-1} ... m_0)`, with the argument continued along
/// `det(1 - tau P)`, `tau in [0, 1]`. Every eigenvalue of `tau P` stays inside
/// the unit disk, so this is the same branch as the dense continuation.
///
/// For small `P` the logarithm is summed as `-sum_j Tr(P^j) / j`, which keeps
/// full relative accuracy when `det(1 - P)` is within rounding of 1.
pub fn reduced_log_det(blocks: &BlochBlocks) -> Result<Complex64> {
    let p = block_product(blocks);
    let b = p.nrows();
    if p.norm() <= SERIES_NORM {
        return Ok(log_det_series(&p));
    }
    let track = linalg::track_phase(
        0.0,
        1.0,
        linalg::TrackOptions {
            initial_segments: 4,
            max_jump: PI / 2.0,
            max_samples: 1 << 16,
        },
        |tau| {
            let (ld, inv) = linalg::log_det_and_inverse(CMatrix::identity(b, b) - &p * Complex64::new(tau, 0.0));
            let rate = inv.map(|x| -(x * &p).trace().im);
            Ok::<_, Error>((ld, rate))
        },
        |d| d.0.phase,
        |d| d.1,
    )?
    .map_err(|_| Error::HomotopyFailure { limit: PI / 2.0 })?;
    let last = track.last().expect("non-empty track");
    Ok(Complex64::new(last.payload.0.ln_abs, last.arg))
}

fn log_det_series(p: &CMatrix) -> Complex64 {
    let mut power = p.clone();
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 1..200 {
        let term = power.trace() / j as f64;
        sum -= term;
        if term.norm() <= 1e-18 * sum.norm() || term.norm() == 0.0 {
            break;
        }
        power = &power * p;
    }
    sum
}

/// `max_j |(v_j - 1)/(v_j + 1)|` over the eigenvalues of `V`.
pub fn lambda_max(state: &GaussianState) -> Result<f64> {
    Ok(CovarianceSpectrum::new(state)?.contraction_norm)
}

/// `epsilon = 4 lambda_max^L`, bounding `|Im ln det(1 - W)|` to first order.
pub fn decay_bound(state: &GaussianState) -> Result<f64> {
    let lm = lambda_max(state)?;
    Ok(4.0 * lm.powi(state.lattice().cells() as i32))
}

/// Dense `det(1 - W)` evaluated the way the momentum-shift module does it.
pub fn dense_determinant(state: &GaussianState) -> Result<LogDet> {
    let spec = CovarianceSpectrum::new(state)?;
    let shift = ShiftSpec::from_lattice(state.lattice());
    Ok(linalg::log_det(spec.one_minus_w(&shift, 1.0)))
}

/// One row of the dense-vs-reduced benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub cells: usize,
    pub sites_per_cell: usize,
    pub dense_seconds: f64,
    pub reduced_seconds: f64,
    pub relative_det_error: f64,
}

/// Times both determinant paths on one translation-invariant state.
pub fn bench_dense_vs_reduced(state: &GaussianState) -> Result<BenchRow> {
    let t0 = Instant::now();
    let dense = dense_determinant(state)?;
    let dense_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let blocks = cell_bloch_blocks(state)?;
    let reduced = reduced_log_det_value(&blocks);
    let reduced_seconds = t1.elapsed().as_secs_f64();

    Ok(BenchRow {
        cells: state.lattice().cells(),
        sites_per_cell: state.lattice().sites_per_cell(),
        dense_seconds,
        reduced_seconds,
        relative_det_error: reduced.relative_error(&dense),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{random_gaussian_state, random_translation_invariant_state};
    use crate::momentum_shift;
    use nalgebra::DVector;

    fn lat(l: usize, n: usize) -> LatticeSpec {
        LatticeSpec::with_default_offset(l, n).unwrap()
    }

    #[test]
    fn scalar_identity_blocks() {
        let l = lat(4, 2);
        let v = DMatrix::identity(16, 16) * 2.5;
        let s = GaussianState::new(l, v, DVector::zeros(16)).unwrap();
        let blocks = cell_bloch_blocks(&s).unwrap();
        for vk in &blocks.v_k {
            assert!(linalg::max_abs(&(vk - CMatrix::identity(4, 4) * Complex64::new(2.5, 0.0))) < 1e-14);
        }
        let vac = GaussianState::vacuum(l);
        let b = cell_bloch_blocks(&vac).unwrap();
        assert_eq!(reduced_determinant(&b), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn uniform_thermal_chain() {
        // n = 1, nbar = 1, L = 3: det = (1 + q^3)^2 with q = 1/2.
        let l = lat(3, 1);
        let s = GaussianState::new(l, DMatrix::identity(6, 6) * 3.0, DVector::zeros(6)).unwrap();
        let d = reduced_determinant(&cell_bloch_blocks(&s).unwrap());
        assert!((d - Complex64::new(81.0 / 64.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn matches_dense_on_random_state() {
        let l = lat(6, 2);
        for seed in [1u64, 2, 3] {
            let s = random_translation_invariant_state(l, seed, seed % 2 == 0);
            let blocks = cell_bloch_blocks(&s).unwrap();
            let reduced = reduced_log_det_value(&blocks);
            let dense = dense_determinant(&s).unwrap();
            assert!(reduced.relative_error(&dense) < 1e-10);
            assert!((blocks.reassemble() - s.covariance()).abs().max() < 1e-10);

            let branch_reduced = reduced_log_det(&blocks).unwrap();
            let shift = ShiftSpec::from_lattice(&l);
            let branch_dense = momentum_shift::log_det_one_minus_w(&s, &shift).unwrap();
            assert!((branch_reduced - branch_dense).norm() < 1e-9, "{branch_reduced} vs {branch_dense}");
        }
    }

    #[test]
    fn cyclic_rotation_preserves_determinant() {
        let l = lat(5, 2);
        let s = random_translation_invariant_state(l, 11, false);
        let mut blocks = cell_bloch_blocks(&s).unwrap();
        let d0 = reduced_determinant(&blocks);
        blocks.m_k.rotate_left(2);
        let d1 = reduced_determinant(&blocks);
        assert!((d0 - d1).norm() < 1e-12 * d0.norm());
    }

    #[test]
    fn rejects_non_circulant() {
        let l = lat(3, 1);
        let mut v = DMatrix::identity(6, 6);
        v[(0, 0)] = 3.0;
        v[(1, 1)] = 3.0;
        let s = GaussianState::new(l, v, DVector::zeros(6)).unwrap();
        assert!(matches!(cell_bloch_blocks(&s), Err(Error::NotTranslationInvariant { .. })));
        let generic = random_gaussian_state(l, 1, true);
        assert!(cell_bloch_blocks(&generic).is_err());
    }

    #[test]
    fn lambda_max_values() {
        let l = lat(2, 1);
        let s = GaussianState::new(l, DMatrix::identity(4, 4) * 3.0, DVector::zeros(4)).unwrap();
        assert!((lambda_max(&s).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(lambda_max(&GaussianState::vacuum(l)).unwrap(), 0.0);
        assert_eq!(decay_bound(&GaussianState::vacuum(l)).unwrap(), 0.0);

        let r = 0.7;
        let sq = crate::gaussian::squeezed_vacuum_state(l, &[r, r]).unwrap();
        assert!((lambda_max(&sq).unwrap() - r.tanh()).abs() < 1e-14);

        let ten = lat(10, 1);
        let s = GaussianState::new(ten, DMatrix::identity(20, 20) * 3.0, DVector::zeros(20)).unwrap();
        assert!((decay_bound(&s).unwrap() - 0.00390625).abs() < 1e-15);
    }

    #[test]
    fn series_matches_lu_for_small_products() {
        let l = LatticeSpec::with_default_offset(3, 2).unwrap();
        let params = crate::rice_mele::RiceMeleParams::new(0.7, 0.2, 0.4).unwrap();
        let s = crate::rice_mele::rmm_thermal_state(&params, l, 1.0, -2.0).unwrap();
        let blocks = cell_bloch_blocks(&s).unwrap();
        let p = block_product(&blocks);
        assert!(p.norm() <= SERIES_NORM);
        let b = p.nrows();
        let lu = linalg::log_det(CMatrix::identity(b, b) - &p);
        let series = log_det_series(&p);
        assert!((series.re - lu.ln_abs).abs() < 1e-14);
        assert!((series.im - lu.phase.arg()).abs() < 1e-14);
    }
}
