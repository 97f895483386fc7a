use std::fmt;
use std::process::ExitCode;

/// Failure classes, each with its own process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Data = 1,
    Config = 2,
    Infeasible = 3,
    RunState = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn new(kind: Kind, msg: impl fmt::Display) -> Self {
        CliError {
            kind,
            source: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind as u8)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags an error with its exit class.
pub trait Classify<T> {
    fn or_kind(self, kind: Kind) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_kind(self, kind: Kind) -> CliResult<T> {
        self.map_err(|e| CliError {
            kind,
            source: e.into(),
        })
    }
}
