use thiserror::Error;

/// Errors produced by mesh construction, model setup, the solver and the
/// experiment harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A triangle violates the acute-angle / orthogonality requirements.
    #[error("inadmissible mesh: {message} (triangles: {triangles:?})")]
    Admissibility { message: String, triangles: Vec<usize> },

    #[error("mesh topology error: {0}")]
    Topology(String),

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("domain error at M = {value}: {message}")]
    Domain { value: f64, message: String },

    #[error("initial data error: {0}")]
    Data(String),

    /// A trial state left the admissible set {u >= 0, M < 1}.
    #[error("inadmissible trial state in cell {cell}")]
    InadmissibleTrial { cell: usize },

    #[error("linear solver: {0}")]
    LinearSolve(String),

    #[error("Newton failed: {0}")]
    NewtonFailure(String),

    #[error("solver failure at t = {time}: {message}")]
    Solver { time: f64, message: String },

    #[error("unsupported mesh: {0}")]
    UnsupportedMesh(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Process exit code used by the command-line front end.
    ///
    /// 2 is configuration/data, 3 is solver, 4 is mesh.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::Model(_)
            | Error::Domain { .. }
            | Error::Data(_)
            | Error::Io { .. } => 2,
            Error::InadmissibleTrial { .. }
            | Error::LinearSolve(_)
            | Error::NewtonFailure(_)
            | Error::Solver { .. } => 3,
            Error::Admissibility { .. }
            | Error::Topology(_)
            | Error::DegenerateMesh(_)
            | Error::UnsupportedMesh(_) => 4,
        }
    }

    pub(crate) fn domain(value: f64, message: impl Into<String>) -> Self {
        Error::Domain {
            value,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
