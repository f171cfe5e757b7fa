//! Library surface of the phaseamp command-line tool, exposed so the
//! integration suite can drive scenarios in-process.

pub mod archive;
pub mod commands;
pub mod config;
pub mod presets;

use std::fmt;

/// Command-level error, carrying the process exit code policy:
/// 2 config, 3 regime/precondition, 4 oracle-check failure, 1 otherwise.
#[derive(Clone, Debug)]
pub enum CmdError {
    Config(String),
    Regime(String),
    OracleCheck(String),
    Io(String),
    Run(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 2,
            CmdError::Regime(_) => 3,
            CmdError::OracleCheck(_) => 4,
            CmdError::Io(_) | CmdError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Config(m) => write!(f, "config error: {m}"),
            CmdError::Regime(m) => write!(f, "regime error: {m}"),
            CmdError::OracleCheck(m) => write!(f, "oracle check failed: {m}"),
            CmdError::Io(m) => write!(f, "io error: {m}"),
            CmdError::Run(m) => write!(f, "run error: {m}"),
        }
    }
}

impl std::error::Error for CmdError {}

impl From<phaseamp::Error> for CmdError {
    fn from(e: phaseamp::Error) -> Self {
        use phaseamp::Error::*;
        match e {
            InvalidParameter { .. } => CmdError::Config(e.to_string()),
            Truncation { .. }
            | ThinningSizeGuard { .. }
            | OracleResolution { .. }
            | Regime { .. }
            | DegenerateFit { .. }
            | FitDidNotConverge { .. }
            | AllInconclusive => CmdError::Regime(e.to_string()),
            WorkerPanic { .. } => CmdError::Run(e.to_string()),
        }
    }
}
