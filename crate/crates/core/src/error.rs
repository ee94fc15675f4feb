use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("singular parameter: {0}")]
    Singular(String),
    #[error("unsupported regime: {0}")]
    Unsupported(String),
    #[error("empty bulk: {0}")]
    EmptyBulk(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("contour error: {0}")]
    Contour(String),
    #[error("degenerate degree: leading coefficient of the degree-{degree} polynomial is {leading:e}; effective degree is {effective_degree}")]
    DegenerateDegree {
        degree: usize,
        effective_degree: usize,
        leading: f64,
    },
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
}

impl Error {
    /// Whether the failure is caused by the caller's parameters, as opposed to
    /// a numerical coverage or convergence problem.
    pub fn is_parameter_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Parameter(_)
                | Error::Singular(_)
                | Error::Unsupported(_)
                | Error::EmptyBulk(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
