use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// The CLI maps each variant onto a stable exit code, see [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A clone process with fewer outputs than inputs, or no outputs at all.
    #[error("invalid clone process {n_in} -> {m_out}: need m_out >= n_in and m_out >= 1")]
    InvalidProcess { n_in: u32, m_out: u32 },

    #[error("invalid amplifier parameters: {0}")]
    InvalidParams(String),

    /// A value outside the domain of the operation (negative photon number, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncated Fock space too small: tail mass {tail_mass:e} exceeds {tolerance:e} at n_max = {n_max}")]
    Truncation {
        n_max: usize,
        tail_mass: f64,
        tolerance: f64,
    },

    #[error("post-selection on {m_total} photons is empty (P = {probability:e})")]
    EmptySelection { m_total: u32, probability: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("raw-power input requires a calibration config")]
    MissingCalibration,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code: 2 usage, 3 numerical, 4 input parse, 5 degenerate fit.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidProcess { .. } | Error::InvalidParams(_) | Error::InvalidArgument(_) => 2,
            Error::MissingCalibration => 2,
            Error::Truncation { .. } | Error::EmptySelection { .. } => 3,
            Error::Parse { .. } | Error::Io(_) => 4,
            Error::DegenerateFit(_) => 5,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
