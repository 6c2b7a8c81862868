use thiserror::Error;

/// Errors raised by the laboratory.
///
/// Variants are grouped so that the command-line front end can map them onto
/// exit codes: configuration problems, resolution / finiteness diagnostics,
/// and plain invalid input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("non-positive potential sample v0({x}) = {value}")]
    NonPositivePotential { x: f64, value: f64 },

    #[error("unknown catalog profile `{0}`")]
    UnknownProfile(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("point x = {x} is not critical (|V0'| = {slope:e})")]
    NotCritical { x: f64, slope: f64 },

    #[error("classification failed at x = {x}: {reason}")]
    Classification { x: f64, reason: String },

    #[error("critical set exceeds the cap of {cap} elements ({found} found)")]
    CriticalCapExceeded { cap: usize, found: usize },

    #[error("window not resolvable: {0}")]
    UnresolvableWindow(String),

    #[error("range basis of the compression is empty")]
    EmptyRange,

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("insufficient data for a fit: {0}")]
    InsufficientData(String),

    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("empty family: {0}")]
    EmptyFamily(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Diagnostics that concern numerical resolution or the finiteness cap
    /// rather than malformed input.
    pub fn is_diagnostic(&self) -> bool {
        matches!(
            self,
            Error::Resolution(_) | Error::CriticalCapExceeded { .. } | Error::UnresolvableWindow(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
