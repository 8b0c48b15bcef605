use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph is not connected")]
    Disconnected,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("vertex {0:?} is not a vertex of the diluted lattice")]
    NotInLattice((i64, i64)),

    #[error("vertex {0} is out of range")]
    VertexOutOfRange(usize),

    #[error("edge {0} is out of range")]
    EdgeOutOfRange(usize),

    #[error("environment is not normalized at the reference edge {0}")]
    NotNormalized(usize),

    #[error("tree enumeration limit exceeded: {0}")]
    EnumerationLimit(String),

    #[error("quadrature: {0}")]
    Quadrature(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
