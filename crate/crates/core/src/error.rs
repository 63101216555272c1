use thiserror::Error;

use crate::dsl::ParseError;
use crate::jet::JetError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("degenerate metric at {point}: smallest |eigenvalue| {min_abs_eigenvalue:e} vs scale {scale:e}")]
    DegenerateMetric {
        point: String,
        min_abs_eigenvalue: f64,
        scale: f64,
    },
    #[error("connection is not regular at this point: {0}")]
    NotRegular(String),
    #[error("inadmissible symmetry: {0}")]
    InadmissibleSymmetry(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
