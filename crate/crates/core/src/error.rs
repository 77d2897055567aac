use thiserror::Error;

/// Errors produced by the analysis modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An eigenvalue sits on or too close to the unit circle.
    #[error("matrix is not hyperbolic: eigenvalue modulus {modulus} within {tol} of 1")]
    NotHyperbolic { modulus: f64, tol: f64 },

    /// Coefficient tail has not decayed below the requested tolerance.
    #[error("coefficients decay too slowly: tail deviation {tail} at n = {n_max} exceeds {tol}")]
    SlowDecay { tail: f64, n_max: usize, tol: f64 },

    /// Consecutive loop samples are too far apart for frame transport.
    #[error("loop sampling inadequate: projector gap {gap} (limit {limit})")]
    SamplingInadequate { gap: f64, limit: f64 },

    /// Stable dimensions at +infinity and -infinity differ.
    #[error("nonzero Fredholm index: stable dims {plus} at +inf vs {minus} at -inf")]
    NonzeroIndex { plus: usize, minus: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The two parity routes disagree; usually a sign of under-sampling.
    #[error("parity routes disagree: sign-change route {route_a}, index-bundle route {route_b}")]
    InconsistentParity { route_a: i32, route_b: i32 },

    /// Holonomy or crossing determinant too close to zero to trust.
    #[error("degenerate determinant {value} at {context}")]
    Degenerate { value: f64, context: String },

    #[error("Newton did not converge after {iterations} iterations (last residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("amplitude {eps} exceeds configured cap {cap}")]
    OutOfRegime { eps: f64, cap: f64 },

    /// An (A0)-(A4) assumption failed; the witness describes the measured violation.
    #[error("assumption {name} failed: {witness}")]
    AssumptionFailed { name: String, witness: String },
}

pub type Result<T> = std::result::Result<T, Error>;
