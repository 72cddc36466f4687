use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("empty region: {0}")]
    EmptyRegion(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("case {case}: cannot fill missing modalities {missing:?} from available {available:?}")]
    Unfillable {
        case: String,
        missing: Vec<String>,
        available: Vec<String>,
    },
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error(transparent)]
    Nn(#[from] octnet::NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::EmptyRegion(_) | Error::Unfillable { .. } | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 3,
            Error::Undefined(_) | Error::Runtime(_) | Error::Nn(_) => 4,
        }
    }
}

pub(crate) fn data_err(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}
