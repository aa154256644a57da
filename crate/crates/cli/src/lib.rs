//! Library behind the `qho` binary: configuration, the four subcommands and
//! their file formats. Kept as a library so the acceptance suite can drive
//! the same code paths without spawning processes.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod config;
pub mod output;
pub mod simulate;
pub mod sweep;
pub mod validate;

use std::fmt;

pub use config::{Overrides, RawConfig, RunConfig};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn from_core(e: qho_core::Error) -> Self {
        Self(e.to_string())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] qho_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use qho_core::Error as E;
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Core(e) => match e {
                E::Resonance { .. } | E::Domain(_) | E::Precision { .. } => EXIT_DOMAIN,
                // Grid trouble means the grid settings do not fit the physics.
                E::InvalidParameter { .. }
                | E::InsufficientSamples { .. }
                | E::GridTooSmall(_)
                | E::GridTooCoarse(_)
                | E::Leakage { .. } => EXIT_CONFIG,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
