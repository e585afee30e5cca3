use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Parse { line: usize, message: String },
    Validation(String),
    Io(String),
    Core(hatsim_core::Error),
}

impl CliError {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        CliError::Parse { line, message: message.into() }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Validation(_) => "validation",
            CliError::Io(_) => "io",
            CliError::Core(e) => e.code(),
        }
    }

    /// 2 for bad input, 4 when no root exists, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 2,
            CliError::Core(hatsim_core::Error::Config(_)) => 2,
            CliError::Core(hatsim_core::Error::NoRoot(_)) => 4,
            CliError::Io(_) | CliError::Core(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse { line, message } => write!(f, "line {line}: {message}"),
            CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<hatsim_core::Error> for CliError {
    fn from(e: hatsim_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
