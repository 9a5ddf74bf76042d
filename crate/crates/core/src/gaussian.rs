//! Lattice geometry and Gaussian bosonic states in the quadrature picture.
//!
//! A state over `N = n L` modes is a real symmetric `2N x 2N` covariance
//! matrix `V` (vacuum = identity) and a real mean vector
//! `alpha0 = (<a + a^dag>, -i <a - a^dag>)` per mode. Quadratures are ordered
//! cell-major, site-next, `(q, p)` innermost.

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Relative symmetry tolerance accepted by [`GaussianState::validate`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    cells: usize,
    sites_per_cell: usize,
    gauge_offset: f64,
}

impl LatticeSpec {
    pub const DEFAULT_OFFSET: f64 = 0.5;

    pub fn new(cells: usize, sites_per_cell: usize, gauge_offset: f64) -> Result<Self> {
        if cells == 0 || sites_per_cell == 0 {
            return Err(Error::InvalidLattice(format!(
                "cells ({cells}) and sites per cell ({sites_per_cell}) must be positive"
            )));
        }
        if !(gauge_offset > 0.0 && gauge_offset < 1.0) {
            return Err(Error::InvalidLattice(format!(
                "gauge offset {gauge_offset} must lie strictly inside (0, 1)"
            )));
        }
        let spec = LatticeSpec {
            cells,
            sites_per_cell,
            gauge_offset,
        };
        // x / L is never an integer for 0 < delta < 1, but guard against
        // rounding for very large lattices.
        for r in 0..cells {
            for s in 0..sites_per_cell {
                let frac = spec.position(r, s) / cells as f64;
                if (frac - frac.round()).abs() < 1e-14 {
                    return Err(Error::InvalidLattice(format!(
                        "site ({r}, {s}) sits on the gauge origin"
                    )));
                }
            }
        }
        Ok(spec)
    }

    pub fn with_default_offset(cells: usize, sites_per_cell: usize) -> Result<Self> {
        Self::new(cells, sites_per_cell, Self::DEFAULT_OFFSET)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn sites_per_cell(&self) -> usize {
        self.sites_per_cell
    }

    pub fn gauge_offset(&self) -> f64 {
        self.gauge_offset
    }

    /// Number of bosonic modes `n L`.
    pub fn modes(&self) -> usize {
        self.cells * self.sites_per_cell
    }

    /// Dimension `2 n L` of the quadrature vector.
    pub fn dim(&self) -> usize {
        2 * self.modes()
    }

    pub fn mode_index(&self, cell: usize, site: usize) -> usize {
        cell * self.sites_per_cell + site
    }

    /// Site coordinate `x = r + (s + delta) / n` in lattice units.
    pub fn position(&self, cell: usize, site: usize) -> f64 {
        cell as f64 + (site as f64 + self.gauge_offset) / self.sites_per_cell as f64
    }

    /// Momentum-shift phase `2 pi x / L`, always strictly inside `(0, 2 pi)`.
    pub fn phase(&self, cell: usize, site: usize) -> f64 {
        2.0 * PI * self.position(cell, site) / self.cells as f64
    }
}

pub fn make_lattice(cells: usize, sites_per_cell: usize, gauge_offset: f64) -> Result<LatticeSpec> {
    LatticeSpec::new(cells, sites_per_cell, gauge_offset)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    lattice: LatticeSpec,
    covariance: RMatrix,
    mean: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub symmetry_defect: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `min eig(V) >= 1`; pure coherent states sit on the boundary and count as classical.
    pub classical: bool,
    /// `det(V)^{-1/2}`, only meaningful for a valid state.
    pub purity: f64,
    pub valid: bool,
}

impl GaussianState {
    /// Wraps a covariance matrix and mean vector. Only shapes and finiteness
    /// are checked here; physical validity is reported by [`validate`](Self::validate).
    pub fn new(lattice: LatticeSpec, covariance: RMatrix, mean: DVector<f64>) -> Result<Self> {
        let dim = lattice.dim();
        if covariance.nrows() != dim || covariance.ncols() != dim {
            return Err(Error::InvalidInput(format!(
                "covariance is {}x{}, lattice needs {dim}x{dim}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.len() != dim {
            return Err(Error::InvalidInput(format!(
                "mean has length {}, lattice needs {dim}",
                mean.len()
            )));
        }
        if covariance.iter().chain(mean.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite covariance or mean".into()));
        }
        Ok(GaussianState {
            lattice,
            covariance,
            mean,
        })
    }

    pub fn vacuum(lattice: LatticeSpec) -> Self {
        let dim = lattice.dim();
        GaussianState {
            lattice,
            covariance: RMatrix::identity(dim, dim),
            mean: DVector::zeros(dim),
        }
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn covariance(&self) -> &RMatrix {
        &self.covariance
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Same state relabelled onto another lattice with identical mode count
    /// (used to compare gauge offsets).
    pub fn with_lattice(&self, lattice: LatticeSpec) -> Result<Self> {
        Self::new(lattice, self.covariance.clone(), self.mean.clone())
    }

    pub fn with_mean(&self, mean: DVector<f64>) -> Result<Self> {
        Self::new(self.lattice, self.covariance.clone(), mean)
    }

    pub fn validate(&self) -> ValidationReport {
        let v = &self.covariance;
        let scale = linalg::max_abs(v).max(1.0);
        let symmetry_defect = linalg::symmetry_defect(v);
        let eig = linalg::symmetric_eigen(&linalg::symmetrize(v)).eigenvalues;
        let min_eigenvalue = eig.min();
        let max_eigenvalue = eig.max();
        let valid = symmetry_defect <= SYMMETRY_TOLERANCE * scale && min_eigenvalue > 0.0;
        let purity = if valid {
            (-0.5 * eig.iter().map(|x| x.ln()).sum::<f64>()).exp()
        } else {
            f64::NAN
        };
        ValidationReport {
            symmetry_defect,
            min_eigenvalue,
            max_eigenvalue,
            classical: valid && min_eigenvalue >= 1.0 - 1e-12,
            purity,
            valid,
        }
    }

    /// Symmetry part of [`GaussianState::validate`] alone, for callers that
    /// certify positivity some other way.
    pub(crate) fn require_symmetric(&self) -> Result<()> {
        let v = &self.covariance;
        let defect = linalg::symmetry_defect(v);
        if !(defect <= SYMMETRY_TOLERANCE * linalg::max_abs(v).max(1.0)) {
            return Err(Error::InvalidState(format!("symmetry defect {defect:e}")));
        }
        Ok(())
    }

    pub(crate) fn require_valid(&self) -> Result<ValidationReport> {
        let report = self.validate();
        if !report.valid {
            return Err(Error::InvalidState(format!(
                "symmetry defect {:e}, min eigenvalue {:e}",
                report.symmetry_defect, report.min_eigenvalue
            )));
        }
        Ok(report)
    }
}

pub fn coherent_state(lattice: LatticeSpec, amplitudes: &[Complex64]) -> Result<GaussianState> {
    if amplitudes.len() != lattice.modes() {
        return Err(Error::InvalidInput(format!(
            "{} amplitudes for {} modes",
            amplitudes.len(),
            lattice.modes()
        )));
    }
    let mut mean = DVector::zeros(lattice.dim());
    for (j, a) in amplitudes.iter().enumerate() {
        mean[2 * j] = 2.0 * a.re;
        mean[2 * j + 1] = 2.0 * a.im;
    }
    GaussianState::new(lattice, RMatrix::identity(lattice.dim(), lattice.dim()), mean)
}

/// Translation-invariant coherent state repeating the per-cell amplitudes
/// in every cell.
pub fn uniform_coherent_state(lattice: LatticeSpec, per_cell: &[Complex64]) -> Result<GaussianState> {
    if per_cell.len() != lattice.sites_per_cell() {
        return Err(Error::InvalidInput(format!(
            "{} per-cell amplitudes for {} sites per cell",
            per_cell.len(),
            lattice.sites_per_cell()
        )));
    }
    let amps: Vec<Complex64> = (0..lattice.cells()).flat_map(|_| per_cell.iter().copied()).collect();
    coherent_state(lattice, &amps)
}

impl ModeOccupation {
    /// Bose-Einstein occupation of the eigenmodes of a hermitian hopping matrix.
    pub fn thermal(hopping: &CMatrix, beta: f64, mu: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidInput(format!("inverse temperature {beta} must be positive")));
        }
        let eig = linalg::hermitian_eigen(hopping);
        let gap = eig.eigenvalues.iter().map(|e| e - mu).fold(f64::INFINITY, f64::min);
        if !(gap > 0.0) {
            return Err(Error::ChemicalPotential { gap });
        }
        let energies: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let occupations = energies.iter().map(|e| bose_einstein(beta * (e - mu))).collect();
        Ok(ModeOccupation {
            energies,
            occupations,
            eigenvectors: eig.eigenvectors,
        })
    }

    /// `N = sum_j nbar_j v_j v_j^dag`, with `N_ik = <a_k^dag a_i>`.
    pub fn correlation(&self) -> CMatrix {
        let n = self.eigenvectors.nrows();
        let mut out = CMatrix::zeros(n, n);
        for (j, nbar) in self.occupations.iter().enumerate() {
            let v = self.eigenvectors.column(j);
            out += (v * v.adjoint()) * Complex64::new(*nbar, 0.0);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeOccupation {
    pub energies: Vec<f64>,
    pub occupations: Vec<f64>,
    pub eigenvectors: CMatrix,
}

/// `1 / (e^x - 1)`, written to stay accurate for small `x` and zero for large.
pub fn bose_einstein(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

/// Covariance of a number-conserving Gaussian state with one-body
/// correlation `N_ik = <a_k^dag a_i>` (zero mean).
pub fn covariance_from_correlation(lattice: LatticeSpec, corr: &CMatrix) -> Result<GaussianState> {
    let modes = lattice.modes();
    if corr.nrows() != modes || corr.ncols() != modes {
        return Err(Error::InvalidInput(format!(
            "correlation matrix is {}x{}, lattice has {modes} modes",
            corr.nrows(),
            corr.ncols()
        )));
    }
    let dim = lattice.dim();
    let mut v = RMatrix::zeros(dim, dim);
    for i in 0..modes {
        for k in 0..modes {
            // Hermitian part only, so the result is exactly symmetric.
            let z = 0.5 * (corr[(i, k)] + corr[(k, i)].conj());
            let d = if i == k { 1.0 } else { 0.0 };
            v[(2 * i, 2 * k)] = d + 2.0 * z.re;
            v[(2 * i + 1, 2 * k + 1)] = d + 2.0 * z.re;
            v[(2 * i, 2 * k + 1)] = -2.0 * z.im;
            v[(2 * i + 1, 2 * k)] = 2.0 * z.im;
        }
    }
    GaussianState::new(lattice, v, DVector::zeros(dim))
}

pub fn thermal_state(hopping: &CMatrix, beta: f64, mu: f64, lattice: LatticeSpec) -> Result<GaussianState> {
    if hopping.nrows() != lattice.modes() || hopping.ncols() != lattice.modes() {
        return Err(Error::InvalidInput(format!(
            "hopping matrix is {}x{}, lattice has {} modes",
            hopping.nrows(),
            hopping.ncols(),
            lattice.modes()
        )));
    }
    let occ = ModeOccupation::thermal(hopping, beta, mu)?;
    covariance_from_correlation(lattice, &occ.correlation())
}

/// Thermal state of a translation-invariant hopping Hamiltonian given by its
/// `n x n` Bloch matrix `h(k)`, assembled directly from per-momentum data.
///
/// The Bloch matrix convention is `h(k) = sum_d H_{0,d} e^{i k d}` where
/// `H_{0,d}` couples cell 0 (rows) with cell `d` (columns).
pub fn thermal_state_bloch(
    lattice: LatticeSpec,
    bloch: impl Fn(f64) -> CMatrix,
    beta: f64,
    mu: f64,
) -> Result<GaussianState> {
    let l = lattice.cells();
    let n = lattice.sites_per_cell();
    let mut per_k = Vec::with_capacity(l);
    for kk in 0..l {
        let k = 2.0 * PI * kk as f64 / l as f64;
        let h = bloch(k);
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "Bloch matrix is {}x{}, expected {n}x{n}",
                h.nrows(),
                h.ncols()
            )));
        }
        per_k.push(ModeOccupation::thermal(&h, beta, mu)?.correlation());
    }
    // N_{(r,s),(r',s')} = (1/L) sum_k e^{i k (r - r')} N_k[s, s'].
    let mut by_distance = Vec::with_capacity(l);
    for d in 0..l {
        let mut c = CMatrix::zeros(n, n);
        for (kk, nk) in per_k.iter().enumerate() {
            let k = 2.0 * PI * kk as f64 / l as f64;
            c += nk * Complex64::from_polar(1.0 / l as f64, k * d as f64);
        }
        by_distance.push(c);
    }
    let mut corr = CMatrix::zeros(lattice.modes(), lattice.modes());
    for r in 0..l {
        for rp in 0..l {
            let d = (r + l - rp) % l;
            let block = &by_distance[d];
            for s in 0..n {
                for sp in 0..n {
                    corr[(lattice.mode_index(r, s), lattice.mode_index(rp, sp))] = block[(s, sp)];
                }
            }
        }
    }
    covariance_from_correlation(lattice, &corr)
}

pub fn squeezed_vacuum_state(lattice: LatticeSpec, squeezing: &[f64]) -> Result<GaussianState> {
    if squeezing.len() != lattice.modes() {
        return Err(Error::InvalidInput(format!(
            "{} squeezing parameters for {} modes",
            squeezing.len(),
            lattice.modes()
        )));
    }
    let mut v = RMatrix::zeros(lattice.dim(), lattice.dim());
    for (j, r) in squeezing.iter().enumerate() {
        v[(2 * j, 2 * j)] = (2.0 * r).exp();
        v[(2 * j + 1, 2 * j + 1)] = (-2.0 * r).exp();
    }
    GaussianState::new(lattice, v, DVector::zeros(lattice.dim()))
}

/// Two-mode squeezed vacuum on a two-mode lattice.
pub fn two_mode_squeezed_state(lattice: LatticeSpec, r: f64) -> Result<GaussianState> {
    if lattice.modes() != 2 {
        return Err(Error::InvalidInput(format!(
            "two-mode squeezing needs 2 modes, lattice has {}",
            lattice.modes()
        )));
    }
    let c = (2.0 * r).cosh();
    let s = (2.0 * r).sinh();
    #[rustfmt::skip]
    let v = RMatrix::from_row_slice(4, 4, &[
        c, 0.0, s, 0.0,
        0.0, c, 0.0, -s,
        s, 0.0, c, 0.0,
        0.0, -s, 0.0, c,
    ]);
    GaussianState::new(lattice, v, DVector::zeros(4))
}

/// Symplectic form, block diagonal with `[[0, 1], [-1, 0]]` per mode.
pub fn symplectic_form(modes: usize) -> RMatrix {
    let mut omega = RMatrix::zeros(2 * modes, 2 * modes);
    for j in 0..modes {
        omega[(2 * j, 2 * j + 1)] = 1.0;
        omega[(2 * j + 1, 2 * j)] = -1.0;
    }
    omega
}

/// `exp(Omega G)` for a symmetric generator `G`.
pub fn symplectic_from_generator(generator: &RMatrix) -> RMatrix {
    let omega = symplectic_form(generator.nrows() / 2);
    (omega * generator).exp()
}

/// Scale of the random symplectic generator, in units of `1/sqrt(dim)`.
const GENERATOR_SCALE: f64 = 0.35;

/// Random Gaussian state `V = S D S^T` with `S = exp(Omega G)` and thermal
/// symplectic spectrum `D`. Deterministic for a fixed seed. With `classical`
/// set, `D` is scaled up until `min eig(V) >= 1`.
pub fn random_gaussian_state(lattice: LatticeSpec, seed: u64, classical: bool) -> GaussianState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = lattice.dim();
    let sigma = GENERATOR_SCALE / (dim as f64).sqrt();
    let mut g = RMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let x: f64 = rng.sample(StandardNormal);
            g[(i, j)] = sigma * x;
            g[(j, i)] = sigma * x;
        }
    }
    let nbar: Vec<f64> = (0..lattice.modes()).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut mean = DVector::zeros(dim);
    for x in mean.iter_mut() {
        *x = rng.random_range(-1.0..1.0);
    }
    assemble_random(lattice, &g, &nbar, mean, classical)
}

/// Random state that commutes with cell translations: block-circulant
/// generator and cell-independent occupations, zero mean.
pub fn random_translation_invariant_state(lattice: LatticeSpec, seed: u64, classical: bool) -> GaussianState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = lattice.cells();
    let b = 2 * lattice.sites_per_cell();
    let dim = lattice.dim();
    let sigma = GENERATOR_SCALE / (dim as f64).sqrt();
    let mut g = RMatrix::zeros(dim, dim);
    for d in 0..l {
        let mut block = RMatrix::zeros(b, b);
        for x in block.iter_mut() {
            *x = sigma * rng.sample::<f64, _>(StandardNormal);
        }
        for r in 0..l {
            let rp = (r + d) % l;
            let tb = block.transpose();
            let mut view = g.view_mut((r * b, rp * b), (b, b));
            view += &block;
            let mut view_t = g.view_mut((rp * b, r * b), (b, b));
            view_t += &tb;
        }
    }
    let per_cell: Vec<f64> = (0..lattice.sites_per_cell()).map(|_| rng.random_range(0.0..1.0)).collect();
    let nbar: Vec<f64> = (0..l).flat_map(|_| per_cell.iter().copied()).collect();
    assemble_random(lattice, &g, &nbar, DVector::zeros(dim), classical)
}

fn assemble_random(
    lattice: LatticeSpec,
    generator: &RMatrix,
    nbar: &[f64],
    mean: DVector<f64>,
    classical: bool,
) -> GaussianState {
    let s = symplectic_from_generator(generator);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        lattice.dim(),
        nbar.iter().flat_map(|n| [2.0 * n + 1.0, 2.0 * n + 1.0]),
    ));
    let mut v = linalg::symmetrize(&(&s * d * s.transpose()));
    if classical {
        loop {
            let min = linalg::symmetric_eigen(&v).eigenvalues.min();
            if min >= 1.0 {
                break;
            }
            v *= (1.0 + 1e-12) / min;
        }
    }
    GaussianState {
        lattice,
        covariance: v,
        mean,
    }
}

/// Convex combination `sum_i w_i V_i`, `sum_i w_i alpha_i` of states on the
/// same lattice.
pub fn mixture(states: &[&GaussianState], weights: &[f64]) -> Result<GaussianState> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidInput("empty mixture".into()))?;
    if states.len() != weights.len() {
        return Err(Error::InvalidInput("weights and states differ in length".into()));
    }
    let dim = first.lattice.dim();
    let mut v = RMatrix::zeros(dim, dim);
    let mut mean = DVector::zeros(dim);
    for (s, w) in states.iter().zip(weights) {
        if s.lattice.dim() != dim {
            return Err(Error::InvalidInput("mixture of states on different lattices".into()));
        }
        v += &s.covariance * *w;
        mean += &s.mean * *w;
    }
    GaussianState::new(first.lattice, linalg::symmetrize(&v), mean)
}

pub fn validate(state: &GaussianState) -> ValidationReport {
    state.validate()
}
