use thiserror::Error;

/// Errors raised by the simulator, the entanglement measures and the solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (max |M - M^dagger| = {residual:e})")]
    NonHermitianInput { residual: f64 },

    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    IndexOutOfRange { index: usize, num_qubits: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid bit string: {0}")]
    InvalidBits(String),

    #[error("temperature must be nonnegative, got {0}")]
    NegativeTemperature(f64),

    #[error("W state needs at least 2 qubits, got {0}")]
    TooSmall(usize),

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("shuttle ground-state outcome has probability {0:e}")]
    ZeroProbabilityOutcome(f64),

    #[error("register state is not pure (purity {0})")]
    NotPure(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("duplicate qubit index {0}")]
    DuplicateIndex(usize),

    #[error("GMN supports 2 to 4 parties, got {0}")]
    DimensionTooLarge(usize),

    #[error("SDP solver failed: {0}")]
    SolverFailure(String),

    #[error("SDP is infeasible: {0}")]
    Infeasible(String),

    #[error("SDP iteration limit reached (gap {gap:e})")]
    IterationLimit { gap: f64 },

    #[error("malformed SDP: {0}")]
    MalformedProblem(String),

    #[error("witness certificate invalid: {0}")]
    CertificateInvalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
