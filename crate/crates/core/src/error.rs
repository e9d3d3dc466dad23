use thiserror::Error;

use crate::network::Violation;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: malformed documents, invalid networks, out-of-domain parameters.
    Validation,
    /// The input was accepted but the computation could not produce a result.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error: {0}")]
    Syntax(#[from] serde_json::Error),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("duplicate identifier `{0}`")]
    DuplicateIdentifier(String),

    #[error("cycle detected through node `{0}`")]
    Cycle(String),

    #[error("invalid network: {}", summarize(.0))]
    InvalidNetwork(Vec<Violation>),

    #[error("valve configuration does not match the demand nodes: {0}")]
    ConfigMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{count} demand nodes exceed the enumeration cap of {cap}")]
    TooManySinks { count: usize, cap: usize },

    #[error("source head {source_head} is below sink head {sink_head}")]
    NoDrivingHead { source_head: f64, sink_head: f64 },

    #[error("unbounded flow: node `{0}` is joined to an open sink by a zero-resistance path under positive head")]
    Unbounded(String),

    #[error("indeterminate flow split at `{0}`: several open sinks hang off it through zero resistance (lump coincident sinks first)")]
    IndeterminateSplit(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("linear program is unbounded")]
    LpUnbounded,

    #[error("schedule stalled: sinks {0:?} have remaining demand and no sink receives flow")]
    Stalled(Vec<String>),

    #[error("flow target unreachable: {0}")]
    UnreachableTarget(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Syntax(_) => "Syntax",
            Error::UnknownNode(_) => "UnknownNode",
            Error::DuplicateIdentifier(_) => "DuplicateIdentifier",
            Error::Cycle(_) => "Cycle",
            Error::InvalidNetwork(_) => "InvalidNetwork",
            Error::ConfigMismatch(_) => "ConfigMismatch",
            Error::Domain(_) => "Domain",
            Error::TooManySinks { .. } => "TooManySinks",
            Error::NoDrivingHead { .. } => "NoDrivingHead",
            Error::Unbounded(_) => "Unbounded",
            Error::IndeterminateSplit(_) => "IndeterminateSplit",
            Error::NumericFailure(_) => "NumericFailure",
            Error::Infeasible(_) => "Infeasible",
            Error::LpUnbounded => "LpUnbounded",
            Error::Stalled(_) => "Stalled",
            Error::UnreachableTarget(_) => "UnreachableTarget",
            Error::Io(_) => "Io",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Syntax(_)
            | Error::UnknownNode(_)
            | Error::DuplicateIdentifier(_)
            | Error::Cycle(_)
            | Error::InvalidNetwork(_)
            | Error::ConfigMismatch(_)
            | Error::Domain(_)
            | Error::TooManySinks { .. }
            | Error::NoDrivingHead { .. }
            | Error::Io(_) => ErrorClass::Validation,
            Error::Unbounded(_)
            | Error::IndeterminateSplit(_)
            | Error::NumericFailure(_)
            | Error::Infeasible(_)
            | Error::LpUnbounded
            | Error::Stalled(_)
            | Error::UnreachableTarget(_) => ErrorClass::Numeric,
        }
    }
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
