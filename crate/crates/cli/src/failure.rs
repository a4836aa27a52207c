use std::fmt;
use std::process::ExitCode;

use vortex_census::Error;

/// A failed run, classified by exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, configuration or specification: exit 1.
    Usage(String),
    /// Unreadable or invalid data, or a numeric breakdown: exit 2.
    Data(String),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Failure::Data(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(1),
            Failure::Data(_) => ExitCode::from(2),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Spec(_) | Error::UnknownFilter(_) | Error::Level(_) | Error::Size(_) => Failure::Usage(msg),
            _ => Failure::Data(msg),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Data(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(format!("json: {e}"))
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;
