//! Error types shared across the crate.
//!
//! Every fallible public routine returns [`Result<T>`](Result) with the
//! [`Error`] enum below. Variants are grouped by how a caller should react:
//!
//! * **input errors** (`InvalidPotential`, `InvalidTestFunction`,
//!   `InvalidGrid`, `InvalidConfig`, `Io`, `Json`) — the request itself is
//!   malformed; fix the input and retry,
//! * **numerical failures** (`Integration`, `RootNotFound`, `NearMultiple`,
//!   `BranchAmbiguity`, `BranchCrossing`, `IncompleteSearch`,
//!   `DegeneratePair`, `FormulaInapplicable`, `NotABandPoint`) — the
//!   computation could not be completed reliably at the requested tolerance;
//!   these are raised instead of returning silently wrong numbers,
//! * **divergence** (`NonconvergentLimit`) — a principal-value style limit
//!   failed to stabilize, which for this operator class is a meaningful
//!   analytic outcome (non-integrable singular terms), not a bug.

use num_complex::Complex64;
use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All error conditions produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A potential definition violated its invariants (non-finite
    /// coefficients, duplicate Fourier modes, ...).
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    /// A test-function definition violated its invariants (empty support,
    /// samples that do not vanish at the support endpoints, ...).
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),

    /// A grid specification violated its invariants (too few points,
    /// quasimomentum nodes exactly on 0 or pi, ...).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A run configuration file or CLI flag combination was malformed.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The adaptive ODE integrator failed (step-count budget exhausted,
    /// state overflow, or a conserved quantity drifted beyond tolerance).
    #[error("ODE integration failure: {0}")]
    Integration(String),

    /// A root search (Newton iteration or winding-number subdivision) did
    /// not converge inside its search region.
    #[error("root not found: {0}")]
    RootNotFound(String),

    /// A Newton iterate for a band point passed too close to a zero of the
    /// discriminant derivative, so the "simple point" contract cannot be
    /// certified; the caller should switch to the multiple-point machinery.
    #[error("iterate near a multiple point of the discriminant (lambda ~ {lambda}, |F'| = {df_abs:.3e})")]
    NearMultiple { lambda: Complex64, df_abs: f64 },

    /// Consecutive discriminant values along a path differ too much for the
    /// square-root branch of `sqrt(4 - F^2)` to be continued unambiguously.
    #[error("branch ambiguity while continuing sqrt(4 - F^2) at path index {index}: |F_j - F_(j-1)| = {jump:.3e}")]
    BranchAmbiguity { index: usize, jump: f64 },

    /// A traced eigenvalue branch jumped discontinuously between adjacent
    /// quasimomentum nodes, indicating the tracker crossed onto a different
    /// branch (usually near an unflagged multiple point).
    #[error("branch crossing while tracing a band at node index {index}: |lambda_j - lambda_(j-1)| = {jump:.3e} exceeds the continuity bound {bound:.3e}")]
    BranchCrossing { index: usize, jump: f64, bound: f64 },

    /// Winding-number bookkeeping shows that a region contains more zeros
    /// than the search located.
    #[error("incomplete root search: located multiplicity {found} but the region winding number is {expected}")]
    IncompleteSearch { found: usize, expected: usize },

    /// The biorthogonal pairing `(psi_star, psi)` is numerically zero, so the
    /// dual pair cannot be normalized (the point behaves like a spectral
    /// singularity at the working tolerance).
    #[error("degenerate biorthogonal pair: {0}")]
    DegeneratePair(String),

    /// A closed-form shortcut does not apply at this point (e.g. the
    /// pairing identity requires phi(1, lambda) != 0 and the primary Floquet
    /// formula; fall back to direct quadrature).
    #[error("closed-form expression inapplicable here: {0}")]
    FormulaInapplicable(String),

    /// A `(lambda, t)` pair handed to a routine that requires an exact Bloch
    /// eigenpair does not satisfy the characteristic equation.
    #[error("(lambda, t) is not a band point: characteristic residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotABandPoint { residual: f64, tol: f64 },

    /// A shrinking-excision limit failed to stabilize. For expansions with
    /// pairing disabled near a non-removable spectral singularity this is the
    /// mathematically expected outcome.
    #[error("limit did not converge: {0}")]
    NonconvergentLimit(String),

    /// Filesystem failure while reading inputs or writing artifacts.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure for configs, potentials, or reports.
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the command-line driver maps this error to.
    ///
    /// * `2` — invalid configuration or input,
    /// * `3` — numerical failure (root finding, continuation, integration),
    /// * `4` — non-convergent limit diagnostics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidPotential(_)
            | Error::InvalidTestFunction(_)
            | Error::InvalidGrid(_)
            | Error::InvalidConfig(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::NonconvergentLimit(_) => 4,
            _ => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_partition_variants() {
        assert_eq!(Error::InvalidConfig("x".into()).exit_code(), 2);
        assert_eq!(Error::InvalidPotential("x".into()).exit_code(), 2);
        assert_eq!(Error::RootNotFound("x".into()).exit_code(), 3);
        assert_eq!(
            Error::NearMultiple {
                lambda: Complex64::new(1.0, 0.0),
                df_abs: 1e-12
            }
            .exit_code(),
            3
        );
        assert_eq!(Error::NonconvergentLimit("x".into()).exit_code(), 4);
    }

    #[test]
    fn messages_carry_context() {
        let e = Error::BranchCrossing {
            index: 7,
            jump: 2.0,
            bound: 0.5,
        };
        let msg = e.to_string();
        assert!(msg.contains("index 7"));
        assert!(msg.contains("2.000e0") || msg.contains("2.0e0") || msg.contains("2e0"));
    }
}
