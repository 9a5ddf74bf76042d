//! Many-body polarization (ensemble geometric phase) of Gaussian bosonic
//! lattice states.
//!
//! The crate evaluates `<T>`, the expectation value of the lattice
//! momentum-shift operator, for arbitrary Gaussian states through a closed
//! form in the quadrature covariance matrix and mean vector. On top of that it
//! provides:
//!
//! * a block-circulant fast path for translation-invariant states
//!   ([`circulant`]),
//! * loop tracking and two independent winding detectors ([`winding`]),
//! * the bosonic Rice-Mele pump with Zak phase and particle flux
//!   ([`rice_mele`]),
//! * Fock-space oracles used to certify the closed form ([`fock_oracle`]).
//!
//! Quadratures are ordered cell-major, site-next, `(q, p)` innermost, with the
//! vacuum normalized to the identity covariance.

pub mod circulant;
pub mod error;
pub mod fock_oracle;
pub mod gaussian;
pub mod linalg;
pub mod momentum_shift;
pub mod rice_mele;
pub mod winding;

pub use error::{Error, Result};
pub use gaussian::{GaussianState, LatticeSpec, ModeOccupation, ValidationReport};
pub use momentum_shift::{PolarizationBreakdown, ShiftSpec};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
