use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate conic: zero coefficient")]
    DegenerateConic,
    #[error("degenerate fibre: coordinate t{0} is zero")]
    DegenerateFibre(usize),
    #[error("arithmetic overflow while evaluating {0}")]
    Overflow(&'static str),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("unknown builtin family `{0}`")]
    UnknownBuiltin(String),
    #[error("identity check failed: {0}")]
    Mismatch(String),
    #[error("element is not in the projective subgroup")]
    NotProjective,
    #[error("request too large: {0}")]
    TooLarge(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
