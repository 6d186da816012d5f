use std::io;

use thiserror::Error;
use tnsynth::circuit::CircuitError;
use tnsynth::noise::NoiseError;
use tnsynth::synth::SynthError;
use tnsynth::tables::TableError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("threshold not met: {0}")]
    ThresholdNotMet(String),
    #[error("corrupt table: {0}")]
    CorruptTable(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    /// 0 ok, 2 usage, 3 input, 4 threshold not met, 5 corrupt table, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::ThresholdNotMet(_) => 4,
            CliError::CorruptTable(_) => 5,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        match e {
            TableError::Corrupt(_) | TableError::UnsupportedVersion(_) => CliError::CorruptTable(e.to_string()),
            TableError::Io(_) => CliError::Input(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidConfig(_) | SynthError::BudgetNotCovered { .. } | SynthError::TooLarge(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<CircuitError> for CliError {
    fn from(e: CircuitError) -> Self {
        match e {
            CircuitError::Synthesis(s) => s.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<NoiseError> for CliError {
    fn from(e: NoiseError) -> Self {
        match e {
            NoiseError::Synthesis(s) => s.into(),
            NoiseError::BadProbability(_) => CliError::Usage(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
