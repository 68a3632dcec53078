use std::fmt::Display;
use std::path::Path;

use mfa_core::Error;

pub const NUMERICAL: u8 = 1;
pub const IO_CONFIG: u8 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: IO_CONFIG,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: NUMERICAL,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl Display) -> Self {
        Self::config(format!("{}: {err}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() || matches!(e, Error::Mismatch(_)) {
            NUMERICAL
        } else {
            IO_CONFIG
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::io(path, e))
}
