use thiserror::Error;

/// Every failure the library can report. Variants carry enough context to be
/// surfaced verbatim by the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("factorization could not be certified up to {bits} bits of root precision")]
    FactorizationFailed { bits: u32 },
    #[error("root accuracy {requested:e} unreachable at {bits} bits")]
    PrecisionExhausted { requested: f64, bits: u32 },
    #[error("moduli {a} and {b} can be neither certified equal nor distinct")]
    AmbiguousModuli { a: f64, b: f64 },
    /// Carries the classification computed anyway when the matrix is nonsingular.
    #[error("determinant {det} is not a unit; matrix is not in GL(d,Z)")]
    NotInGLdZ { det: String, classification: Option<Box<crate::classify::Classification>> },
    #[error("inverse iteration is not a contraction (bound {bound})")]
    NotContracting { bound: f64 },
    #[error("no convergence after {iterations} iterations (last update {last_update:e})")]
    NoConvergence { iterations: usize, last_update: f64 },
    #[error("H0 = Id + h0 is not certified to be a diffeomorphism (bound {bound})")]
    NotDiffeo { bound: f64 },
    #[error("grid too coarse: interpolation residual {residual:e} exceeds {tol:e}")]
    GridTooCoarse { residual: f64, tol: f64 },
    #[error("center series diverging at frequency {frequency:?}")]
    Diverging { frequency: Vec<i64> },
    #[error("mode {mode:?} is orthogonal to every basis direction")]
    OrthogonalMode { mode: Vec<i64> },
    #[error("automorphism is not ergodic (cyclotomic factor Phi_{m})")]
    NotErgodic { m: u64 },
    #[error("correlation signal below truncation tail bound for every n >= 1")]
    SignalBelowTail,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
