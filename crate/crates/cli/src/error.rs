use thiserror::Error;

/// A failed subcommand, carrying its process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Nothing usable was produced: exit status 1.
    #[error("{0}")]
    Empty(String),
    /// Bad configuration, arguments, or input files: exit status 2.
    #[error("{0}")]
    Config(String),
    /// A remote service failed: exit status 3.
    #[error("{0}")]
    Upstream(String),
}

impl CliError {
    pub fn empty(msg: impl Into<String>) -> Self {
        Self::Empty(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn upstream(msg: impl Into<String>) -> Self {
        Self::Upstream(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Empty(_) => 1,
            Self::Config(_) => 2,
            Self::Upstream(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Config(e.to_string())
    }
}
