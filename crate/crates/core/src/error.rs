use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter out of domain: {name} = {value} ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("constraint set is empty")]
    EmptySet,

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("state {value} lies outside the state domain in coordinate {coord}")]
    OutsideDomain { coord: usize, value: f64 },

    #[error("correlation identity violated by {deviation:e}")]
    Correlation { deviation: f64 },

    #[error("regression design is rank deficient at step {step}")]
    RankDeficient { step: usize },

    #[error("Picard iteration did not converge at step {step}, path {path} (last update {residual:e})")]
    PicardDiverged {
        step: usize,
        path: usize,
        residual: f64,
    },

    #[error("time grid or path set mismatch: {0}")]
    GridMismatch(&'static str),

    #[error("non-positive wealth at step {step}, path {path}")]
    NonPositiveWealth { step: usize, path: usize },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }
}
