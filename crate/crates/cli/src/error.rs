use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] lanebal_core::Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;
pub const EXIT_SOLVER_LIMIT: u8 = 4;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use lanebal_core::Error as E;
        match self {
            Self::Core(E::InstanceTooLarge { .. }) => EXIT_SOLVER_LIMIT,
            Self::Core(
                E::UnknownScenario { .. }
                | E::InvalidArgument(_)
                | E::InvalidRange { .. }
                | E::TooFewDevices { .. }
                | E::NoObservations
                | E::InvalidObservation(_),
            ) => EXIT_INPUT,
            Self::Core(_) => EXIT_INVARIANT,
            Self::Read { .. } | Self::Parse { .. } | Self::Usage(_) => EXIT_INPUT,
            // output failures are environmental; report them like bad input
            Self::Write { .. } | Self::Csv(_) => EXIT_INPUT,
        }
    }
}
