use thiserror::Error;

use crate::lp::LpStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("failed to parse instance file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid column: {0}")]
    InvalidColumn(String),

    #[error("invalid LP model: {0}")]
    InvalidModel(String),

    #[error("LP solve failed: {0}")]
    LpFailure(String),

    #[error("LP solution is not optimal (status {0:?})")]
    NotOptimal(LpStatus),

    #[error("missing dual value for {0}")]
    MissingDual(String),

    #[error("pricing refused: {0}")]
    PricingRefused(String),

    #[error("column generated twice: {0}")]
    DuplicateColumn(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
