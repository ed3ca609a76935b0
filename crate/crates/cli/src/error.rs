use narlab_latent::LatentError;
use narlab_model::ModelError;
use narlab_training::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 usage, 3 data or schema, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFinite(_) => CliError::Numeric(e.to_string()),
            ModelError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => CliError::Numeric(e.to_string()),
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            TrainError::Model(m) => m.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<LatentError> for CliError {
    fn from(e: LatentError) -> Self {
        match e {
            LatentError::NonFinite(_) => CliError::Numeric(e.to_string()),
            LatentError::Config(_) | LatentError::Unknown { .. } => CliError::Usage(e.to_string()),
            LatentError::Model(m) => m.into(),
            LatentError::Train(t) => t.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

macro_rules! data_error {
    ($($ty:ty),+) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })+
    };
}

data_error!(narlab_graph::GraphError, narlab_algorithms::AlgoError, serde_json::Error, csv::Error);
