use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("linear solve error: {0}")]
    LinearSolve(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// IO error with a plain message (e.g. to add path context).
    pub fn io(msg: impl Into<String>) -> Error {
        Error::Io(std::io::Error::other(msg.into()))
    }

    /// CLI exit code: 1 config, 2 mesh, 3 solver (and linear algebra), 4 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Mesh(_) => 2,
            Error::Solver(_) | Error::LinearSolve(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
