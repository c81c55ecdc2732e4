use langexp_core::Error;
use serde::Serialize;

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
}

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_DATA: i32 = 2;

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: "validation",
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: "data",
            message: message.into(),
        }
    }

    /// A check that ran to completion but did not pass.
    pub fn check(message: impl Into<String>) -> Self {
        Self {
            kind: "check_failed",
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.kind == "validation" {
            EXIT_VALIDATION
        } else {
            EXIT_DATA
        }
    }

    /// One-line JSON record for stderr.
    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            error: &'a str,
            exit_code: i32,
            message: &'a str,
        }
        serde_json::to_string(&Record {
            error: self.kind,
            exit_code: self.exit_code(),
            message: &self.message,
        })
        .expect("plain record")
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::validation(e.to_string())
        } else {
            Failure::data(e.to_string())
        }
    }
}
