use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ScfoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ScfoError {
    /// An input left the box `u^L <= u <= u^U`.
    #[error("input component {index} = {value} violates {bound} bound {limit}")]
    Domain {
        index: usize,
        value: f64,
        bound: BoundSide,
        limit: f64,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A constraint reached or crossed zero at an applied iterate.
    #[error("safety violation at iteration {iteration}: g_{constraint} = {value:e} >= 0")]
    Safety {
        iteration: usize,
        constraint: usize,
        value: f64,
    },

    #[error("solver degenerate after {iterations} iterations: {detail}")]
    Degenerate { iterations: usize, detail: String },

    #[error("algorithm {algorithm}: {detail}")]
    Algorithm { algorithm: String, detail: String },

    #[error("configuration error in `{field}`: {detail}")]
    Config { field: String, detail: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
}

impl std::fmt::Display for BoundSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundSide::Lower => f.write_str("lower"),
            BoundSide::Upper => f.write_str("upper"),
        }
    }
}

impl ScfoError {
    pub(crate) fn config(field: impl Into<String>, detail: impl Into<String>) -> Self {
        ScfoError::Config {
            field: field.into(),
            detail: detail.into(),
        }
    }

    pub fn is_safety(&self) -> bool {
        matches!(self, ScfoError::Safety { .. })
    }
}
