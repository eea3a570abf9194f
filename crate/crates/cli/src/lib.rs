//! Command-line pipelines over the Grassmannian harmonic-analysis library:
//! table emission, Monte Carlo experiments, certified series, and the
//! verification suite. Everything here is plumbing; the mathematics lives in
//! the core crate.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::fmt;

/// Failure that terminates a command with exit code 2 before or during
/// computation: bad flags, malformed config, violated preconditions.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<grassmann_core::Error> for ConfigError {
    fn from(e: grassmann_core::Error) -> Self {
        ConfigError(e.to_string())
    }
}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError(e.to_string())
    }
}

impl From<serde_json::Error> for ConfigError {
    fn from(e: serde_json::Error) -> Self {
        ConfigError(e.to_string())
    }
}

/// Commands resolve to a process exit code: 0 for success, 3 for a failed
/// numerical certification; configuration problems surface as `ConfigError`
/// and exit with 2.
pub type CmdResult = Result<u8, ConfigError>;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_CERTIFICATION: u8 = 3;

/// Runs a closure inside a dedicated rayon pool of the requested size, or on
/// the ambient pool when no worker count is given. Results never depend on
/// the choice; this only controls resource usage.
pub fn with_workers<T, F>(workers: Option<usize>, f: F) -> Result<T, ConfigError>
where
    F: FnOnce() -> T + Send,
    T: Send,
{
    match workers {
        None => Ok(f()),
        Some(0) => Err(ConfigError("workers must be at least 1".into())),
        Some(w) => {
            let pool = grassmann_core::rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| ConfigError(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
