use thiserror::Error;

use crate::interp::VariogramModel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),

    #[error("index ({i}, {j}) out of bounds for {nx}x{ny} grid")]
    OutOfBounds {
        i: usize,
        j: usize,
        nx: usize,
        ny: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("variogram fit failed: {reason}")]
    FitFailure {
        reason: String,
        best: VariogramModel,
    },

    #[error("kriging system is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("map spec incomplete for {map_type}: missing {field}")]
    IncompleteSpec {
        map_type: &'static str,
        field: &'static str,
    },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical stages (fitting, linear solves) as
    /// opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_numerical(),
            e => matches!(e, Error::FitFailure { .. } | Error::IllConditioned(_)),
        }
    }

    /// Pipeline stage that failed, if known.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
