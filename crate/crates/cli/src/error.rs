use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 2;
    pub const PARSE: u8 = 3;
    pub const NUMERIC: u8 = 4;
    pub const IO: u8 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {}{msg}", path.display(), line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: Option<u64>,
        msg: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] knnclutter::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: Option<u64>, msg: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        use knnclutter::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Parse { .. } => exit::PARSE,
            CliError::Io { .. } => exit::IO,
            CliError::Core(e) => match e {
                E::InvalidK(_) | E::InvalidParams(_) | E::InvalidKSet | E::InvalidConfig(_) => {
                    exit::USAGE
                }
                E::InvalidWindow { .. }
                | E::PointOutsideWindow { .. }
                | E::LengthMismatch { .. }
                | E::MissingTruth
                | E::OutOfRange { .. } => exit::PARSE,
                E::TooFewPoints { .. }
                | E::DegenerateDistances
                | E::DegenerateComponent { .. }
                | E::NonFinite { .. }
                | E::KSetTooLarge { .. }
                | E::PatternTooSmall { .. } => exit::NUMERIC,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
