use std::fmt;
use std::process::ExitCode;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Io,
    Validation,
    NonConvergence,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Io => 1,
            Kind::Validation => 2,
            Kind::NonConvergence => 3,
        }
    }
}

/// Error carrying the exit status it maps to. Anything that is not an I/O
/// failure while writing outputs counts as a validation error.
#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(kind: Kind, error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            error: error.into(),
        }
    }

    pub fn validation(msg: impl fmt::Display) -> Self {
        Self::new(Kind::Validation, anyhow::anyhow!("{msg}"))
    }

    pub fn non_convergence(msg: impl fmt::Display) -> Self {
        Self::new(Kind::NonConvergence, anyhow::anyhow!("{msg}"))
    }

    /// Prints the error as one JSON object on stderr and returns the exit
    /// status.
    pub fn report(&self) -> ExitCode {
        #[derive(Serialize)]
        struct Doc<'a> {
            error: Kind,
            message: String,
            exit_code: u8,
            #[serde(skip_serializing_if = "<[_]>::is_empty")]
            causes: &'a [String],
        }
        let causes: Vec<String> = self.error.chain().skip(1).map(|c| c.to_string()).collect();
        let doc = Doc {
            error: self.kind,
            message: self.error.to_string(),
            exit_code: self.kind.code(),
            causes: &causes,
        };
        eprintln!("{}", serde_json::to_string(&doc).expect("error document serializes"));
        ExitCode::from(self.kind.code())
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        let error = e.into();
        let kind = if error.chain().any(|c| c.is::<std::io::Error>()) {
            Kind::Io
        } else {
            Kind::Validation
        };
        Self { kind, error }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
