use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The residual `norm(max(p - q, 0))` has no mass (p and q coincide).
    #[error("empty residual: target is fully covered by the draft")]
    EmptyResidual,

    /// The draft distribution puts (numerically) all of its mass on one token.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("end of trace: {0}")]
    EndOfTrace(String),

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Parse { .. } => 3,
            Error::ResourceLimit(_) => 4,
            Error::Internal(_) => 5,
            Error::Io(_) => 6,
            Error::EndOfTrace(_) => 7,
            Error::InvalidArgument(_) | Error::EmptyResidual | Error::Degenerate(_) => 1,
        }
    }
}
