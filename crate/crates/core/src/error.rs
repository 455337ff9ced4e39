use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name}: missing required column `{column}`")]
    MissingColumn { source_name: String, column: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("duplicate expedition id `{0}`")]
    DuplicateExpedition(String),

    #[error("unknown climber `{0}`")]
    UnknownClimber(String),

    #[error("expedition `{0}` has no members; success rate undefined")]
    UndefinedRate(String),

    #[error("climber `{climber_id}` cannot be binarized: missing {field}")]
    Binarization {
        climber_id: String,
        field: &'static str,
    },

    #[error("expedition `{0}` has no binarizable members")]
    EmptyBipartite(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("degenerate graph: {0}")]
    DegenerateGraph(&'static str),

    #[error("empty group: {0}")]
    EmptyGroup(&'static str),

    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("invalid layer weights: {0}")]
    InvalidWeights(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible synthetic configuration: {0}")]
    InfeasibleConfig(String),

    #[error("report has nothing to compare")]
    EmptyReport,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for input/configuration problems, 1 for analysis failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::MissingColumn { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Config(_)
            | Error::DuplicateExpedition(_)
            | Error::InfeasibleConfig(_) => 2,
            _ => 1,
        }
    }

    /// Short category tag used as the prefix of CLI error messages.
    pub fn category(&self) -> &'static str {
        if self.exit_code() == 2 {
            "input"
        } else {
            "analysis"
        }
    }
}
