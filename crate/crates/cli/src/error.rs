use std::fmt;

/// Exit code for a rejected invocation or input.
pub const EXIT_USAGE: u8 = 2;
/// Exit code for a failure after validation passed.
pub const EXIT_RUNTIME: u8 = 1;

/// A failure tagged with the phase it happened in. Validation runs before
/// any file is written, so a usage error leaves the filesystem untouched.
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, e) = match self {
            Self::Usage(e) => ("invalid input", e),
            Self::Runtime(e) => ("failed", e),
        };
        write!(f, "{kind}: {e:#}")
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait Phase<T> {
    fn usage(self) -> CliResult<T>;
    fn runtime(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Phase<T> for Result<T, E> {
    fn usage(self) -> CliResult<T> {
        self.map_err(|e| CliError::Usage(e.into()))
    }

    fn runtime(self) -> CliResult<T> {
        self.map_err(|e| CliError::Runtime(e.into()))
    }
}

macro_rules! usage_bail {
    ($($arg:tt)*) => {
        return Err($crate::error::CliError::Usage(anyhow::anyhow!($($arg)*)))
    };
}
pub(crate) use usage_bail;
