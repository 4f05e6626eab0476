use std::fmt;
use std::process::ExitCode;

pub const IO: u8 = 2;
pub const USAGE: u8 = 64;
pub const NUMERICAL: u8 = 70;

/// An error paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn io(error: anyhow::Error) -> Self {
        Self { code: IO, error }
    }

    pub fn usage(error: anyhow::Error) -> Self {
        Self { code: USAGE, error }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

/// Filesystem and parse problems map to 2, numerical failures to 70 and
/// everything else (bad parameters, inconsistent inputs) to 64.
impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let mut code = USAGE;
        for cause in error.chain() {
            if let Some(e) = cause.downcast_ref::<nescope_core::Error>() {
                code = match e {
                    _ if e.is_io() => IO,
                    nescope_core::Error::Parse { .. } => IO,
                    _ if e.is_numerical() => NUMERICAL,
                    _ => USAGE,
                };
                break;
            }
            if cause.is::<std::io::Error>() {
                code = IO;
                break;
            }
        }
        Self { code, error }
    }
}

impl From<nescope_core::Error> for Failure {
    fn from(e: nescope_core::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_the_cause() {
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(Failure::from(nescope_core::Error::Io(io)).code, IO);
        let num = nescope_core::Error::Singular("x".into());
        assert_eq!(Failure::from(num).code, NUMERICAL);
        let wrapped =
            anyhow::Error::from(nescope_core::Error::Singular("x".into())).context("outer");
        assert_eq!(Failure::from(wrapped).code, NUMERICAL);
        assert_eq!(Failure::from(anyhow::anyhow!("bad flag")).code, USAGE);
    }
}
