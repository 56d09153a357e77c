use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument outside the domain of definition: {0}")]
    Domain(String),
    #[error("kernel not admissible: {0}")]
    NotAdmissible(String),
    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("singular assembly: {0}")]
    SingularAssembly(String),
    #[error("ill-conditioned system (kappa estimate {kappa:e})")]
    IllConditioned { kappa: f64 },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("too few nodes: {0}")]
    TooFewNodes(String),
    #[error("interior nodes not unisolvent for degree {0}")]
    NotUnisolvent(usize),
    #[error("boundary node at a singular location (|v| = {0:e})")]
    SingularLocation(f64),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("linear solver: {0}")]
    Solver(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
