// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: {1}")]
    InvalidDimension(usize, &'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("operation is trace-increasing (largest eigenvalue of sum K^dag K is {0})")]
    TraceIncreasing(f64),
    #[error("degenerate channel: zero trace")]
    DegenerateChannel,
    #[error("probe is filtered to zero (ideal weight {0:e})")]
    FilteredToZero(f64),
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("zero operator")]
    ZeroOperator,
    #[error("probability {0:e} is negative beyond roundoff")]
    NegativeProbability(f64),
    #[error("sampled mode needs at least one shot per probe")]
    ZeroShots,
    #[error("insufficient data: probe {probe} of basis '{basis}' has no counts but nonzero ideal weight")]
    InsufficientData { basis: String, probe: usize },
    #[error("missing u-basis statistics and the e-basis is not an eigenbasis of K^dag K")]
    MissingUBasis,
    #[error("e-basis is not the right eigenbasis of the filter (residual {0:e})")]
    NotEigenbasis(f64),
    #[error("incomplete cross-overlap table: probe {probe} was not measured along left singular vector {vector}")]
    IncompleteCrossOverlaps { probe: usize, vector: usize },
    #[error("ideal output of probe {probe} is not part of its measurement basis")]
    MissingIdealOutcome { probe: usize },
    #[error("empty measurement record")]
    EmptyRecord,
    #[error("measurement record has no counts")]
    AllZeroRecord,
    #[error("schema violation: {0}")]
    Schema(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
