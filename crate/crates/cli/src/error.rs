use std::fmt;

use posdelay::checkpoint::CheckpointError;
use posdelay::datasets::DatasetError;
use posdelay::eventprop::EventPropError;
use posdelay::probes::ProbeError;
use posdelay::pruning::PruneError;
use posdelay::topology::TopologyError;
use posdelay::training::TrainError;

/// A failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or config: exit 2.
    Usage(String),
    /// Unreadable, malformed or mismatched data, or an output that cannot be written: exit 3.
    Data(String),
    /// Non-finite values or a failed gradient check: exit 4.
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            TrainError::Sim(_) => CliError::Data(e.to_string()),
            TrainError::ZeroMeanDelay(_) | TrainError::NonFinite { .. } | TrainError::Adjoint(_) => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<TopologyError> for CliError {
    fn from(e: TopologyError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<ProbeError> for CliError {
    fn from(e: ProbeError) -> Self {
        match e {
            ProbeError::Invalid(_) => CliError::Usage(e.to_string()),
            ProbeError::Shape(_) | ProbeError::EmptyDataset | ProbeError::Sim(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<PruneError> for CliError {
    fn from(e: PruneError) -> Self {
        match e {
            PruneError::Invalid(m) => CliError::Usage(m),
            PruneError::Eval(t) => t.into(),
            PruneError::Topology(t) => t.into(),
        }
    }
}

impl From<EventPropError> for CliError {
    fn from(e: EventPropError) -> Self {
        match e {
            EventPropError::Sim(_) => CliError::Usage(e.to_string()),
            EventPropError::Mismatch(_) => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(format!("writing CSV: {e}"))
    }
}
