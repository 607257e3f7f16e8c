use secdeliv_core::Error;

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub msg: String,
}

impl CliError {
    pub fn io(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            msg: msg.into(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            msg: msg.into(),
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            msg: msg.into(),
        }
    }

    /// Prefixes the message with where it happened.
    pub fn context(mut self, what: impl std::fmt::Display) -> Self {
        self.msg = format!("{what}: {}", self.msg);
        self
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => EXIT_IO,
            Error::Infeasible(_) | Error::Degenerate(_) => EXIT_INFEASIBLE,
            Error::Numerical(_) => EXIT_NUMERICAL,
            Error::Domain { .. } | Error::Unsupported { .. } | Error::Contract(_) | Error::InvalidConfig(_) => EXIT_CONFIG,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::io(e.to_string())
        } else {
            CliError::config(e.to_string())
        }
    }
}
