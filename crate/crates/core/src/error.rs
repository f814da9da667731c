use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid support [{g_min}, {g_max}]: {reason}")]
    InvalidSupport { g_min: f64, g_max: f64, reason: &'static str },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature of `{integrand}` did not converge (estimate {estimate:e}, error {error:e}) after {subdivisions} subdivisions")]
    Quadrature { integrand: String, estimate: f64, error: f64, subdivisions: usize },

    #[error("{what} = {value} is outside the domain {domain}")]
    Domain { what: &'static str, value: f64, domain: String },

    #[error("queue state {beta} is outside the solved range [0, {beta_max}]")]
    OutOfRange { beta: f64, beta_max: f64 },

    #[error("{solver} failed to converge: {reason}")]
    NoConvergence { solver: &'static str, reason: String },

    #[error("policy `{policy}` violated its contract at slot {slot}: {reason}")]
    ContractViolation { policy: String, slot: usize, reason: String },

    #[error("scheduling gain is undefined for an empty packet (B = 0)")]
    UndefinedGain,

    #[error("malformed {what}: {reason}")]
    Parse { what: &'static str, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
