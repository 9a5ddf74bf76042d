use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("chemical potential above band minimum (min(eps - mu) = {gap:e})")]
    ChemicalPotential { gap: f64 },

    #[error("homotopy failure: phase increment could not be bounded below {limit} rad")]
    HomotopyFailure { limit: f64 },

    #[error("refinement exhausted after {samples} samples")]
    RefinementExhausted { samples: usize },

    #[error("non-integer winding {value} (residual {residual:e})")]
    NonIntegerWinding { value: f64, residual: f64 },

    #[error("linear solve residual {residual:e} exceeds tolerance")]
    SingularSolve { residual: f64 },

    #[error("not translation invariant (circulant defect {defect:e})")]
    NotTranslationInvariant { defect: f64 },

    #[error("loop does not close (defect {defect:e})")]
    OpenLoop { defect: f64 },

    #[error("gap closure at k = {k} (|Q| = {gap:e})")]
    GapClosure { k: usize, gap: f64 },

    #[error("norm drift {drift:e} exceeds tolerance; increase the step count")]
    NormDrift { drift: f64 },

    #[error("cutoff too small: truncation tail {tail:e}")]
    CutoffTooSmall { tail: f64 },
}
