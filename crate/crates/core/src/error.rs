use thiserror::Error;

/// Errors raised by the library. Each variant maps to a stable reason code
/// (see [`CertifyError::reason`]) so front ends can report failures in a
/// machine-readable way.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("invalid formula shape: {0}")]
    InvalidShape(String),
    #[error("integer overflow computing {0}")]
    Overflow(String),
    #[error("input has {got} bits but the formula has {expected} leaves")]
    LengthMismatch { expected: usize, got: usize },
    #[error("could not parse bit string: {0}")]
    BadBits(String),
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("{what} size {size} exceeds cap {cap}")]
    CapExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },
    #[error("invalid function table: {0}")]
    InvalidTable(String),
    #[error("invalid adversary matrix: {0}")]
    InvalidGamma(String),
    #[error("invalid dual witness: {0}")]
    InvalidWitness(String),
    #[error("matrix is not symmetric (entry ({row}, {col}))")]
    NotSymmetric { row: usize, col: usize },
    #[error("every masked matrix is zero; the ratio is undefined")]
    DegenerateWitness,
    #[error("no pair of inputs with different labels")]
    NoDifferingPair,
    #[error("formula evaluates to {actual} but a {requested}-certificate was requested")]
    ValueMismatch { requested: u8, actual: u8 },
    #[error("invalid cost model: {0}")]
    InvalidModel(String),
    #[error("procedure did not halt within {budget} cost units")]
    DidNotHalt { budget: f64 },
    #[error("restart cap of {cap} reached without a certificate")]
    RestartCapExceeded { cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl CertifyError {
    /// Short snake_case identifier for the failure class.
    pub fn reason(&self) -> &'static str {
        match self {
            CertifyError::InvalidShape(_) => "invalid_shape",
            CertifyError::Overflow(_) => "overflow",
            CertifyError::LengthMismatch { .. } => "length_mismatch",
            CertifyError::BadBits(_) => "bad_bits",
            CertifyError::IndexOutOfRange { .. } => "index_out_of_range",
            CertifyError::CapExceeded { .. } => "cap_exceeded",
            CertifyError::InvalidTable(_) => "invalid_table",
            CertifyError::InvalidGamma(_) => "invalid_gamma",
            CertifyError::InvalidWitness(_) => "invalid_witness",
            CertifyError::NotSymmetric { .. } => "not_symmetric",
            CertifyError::DegenerateWitness => "degenerate_witness",
            CertifyError::NoDifferingPair => "no_differing_pair",
            CertifyError::ValueMismatch { .. } => "value_mismatch",
            CertifyError::InvalidModel(_) => "invalid_model",
            CertifyError::DidNotHalt { .. } => "did_not_halt",
            CertifyError::RestartCapExceeded { .. } => "restart_cap_exceeded",
            CertifyError::InvalidArgument(_) => "invalid_argument",
        }
    }
}

pub type Result<T> = std::result::Result<T, CertifyError>;
