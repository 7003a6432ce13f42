use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} sites, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dense guard: {n_sites} qubits exceeds the limit of {limit} for {what}")]
    SizeGuard {
        what: &'static str,
        n_sites: usize,
        limit: usize,
    },

    #[error("invalid ladder configuration: {field}: {message}")]
    InvalidConfig { field: &'static str, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resonant propagator squared is not proportional to the identity (residual {residual:.3e})")]
    NotProportionalToIdentity { residual: f64 },

    #[error("Krylov propagation did not converge: error estimate {estimate:.3e} at substep {substep:.3e}")]
    KrylovNonConvergence { estimate: f64, substep: f64 },

    #[error("Fourier cutoff m_max = {m_max} insufficient: tail estimate {tail:.3e} exceeds {tolerance:.3e}")]
    CutoffInsufficient {
        m_max: usize,
        tail: f64,
        tolerance: f64,
    },

    #[error("expectation value has imaginary part {imag:.3e}; operator is not Hermitian")]
    NonHermitian { imag: f64 },

    #[error("state norm deviates from one by {deviation:.3e}")]
    NotNormalized { deviation: f64 },

    #[error("trajectory is missing samples at offset {offset}")]
    MissingOffset { offset: f64 },

    #[error("protocol cannot be aligned for the requested time map: {0}")]
    NotAlignable(String),

    #[error("symmetry verification failed: {relation} residual {residual:.3e} > {tolerance:.3e}")]
    VerificationFailed {
        relation: String,
        residual: f64,
        tolerance: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
