use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{path}: cannot read: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: missing header row; expected columns: {expected}")]
    MissingHeader { path: PathBuf, expected: String },

    #[error("{path}: {detail}; expected columns: {expected}")]
    Schema {
        path: PathBuf,
        detail: String,
        expected: String,
    },

    #[error("{path}: row {row}, column {column} ({name}): cannot parse {token:?} as a number")]
    Cell {
        path: PathBuf,
        row: usize,
        column: usize,
        name: String,
        token: String,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: invalid model-set file: {source}")]
    ModelSet {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl CliError {
    /// 2 for anything wrong with the inputs, 3 for failures of the computation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 3,
            _ => 2,
        }
    }
}

impl From<scorelab::scores::ScoreError> for CliError {
    fn from(e: scorelab::scores::ScoreError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<scorelab::estimation::EstimationError> for CliError {
    fn from(e: scorelab::estimation::EstimationError) -> Self {
        use scorelab::estimation::EstimationError as E;
        match e {
            E::Specification(_) | E::EmptyData | E::OutsideDomain { .. } | E::BadObservation { .. } | E::NoSampler { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<scorelab::gmrf::GmrfError> for CliError {
    fn from(e: scorelab::gmrf::GmrfError) -> Self {
        use scorelab::gmrf::GmrfError as E;
        match e {
            E::InvalidData(_) | E::WishartNonexistent { .. } | E::NonPositiveMultiplier { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<scorelab::modelsel::ModelSelError> for CliError {
    fn from(e: scorelab::modelsel::ModelSelError) -> Self {
        use scorelab::modelsel::ModelSelError as E;
        match e {
            E::DimensionMismatch(_) | E::UnsupportedRule { .. } | E::Specification(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}
