//! Experiment runner behind the `rbmm` binary.

use std::fmt;

pub mod config;
pub mod experiment;
pub mod gendata;
pub mod io;
pub mod probe;

#[derive(Debug)]
pub enum CliError {
    /// Bad or incomplete configuration; exit code 2.
    Config(String),
    /// The solver or a data generator hit a numerical failure; exit code 3.
    Numerical(rbmm::Error),
    /// File system trouble; exit code 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Errors that mean the configuration asked for something impossible
    /// count as config errors; everything else is numerical.
    pub fn from_build(e: rbmm::Error) -> Self {
        use rbmm::Error::*;
        match e {
            ContractViolation(_) | ShapeMismatch { .. } | UnsupportedKind { .. } | UnsupportedFamily { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub(crate) fn io_err(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Reads and resolves a config file, applying command-line overrides.
pub fn load_config(
    path: &std::path::Path,
    seed: Option<u64>,
    out: Option<std::path::PathBuf>,
) -> Result<config::RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = config::parse(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    Ok(cfg)
}
