use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid transition system: {0}")]
    InvalidSystem(String),

    #[error("word {0:?} is not admissible")]
    Inadmissible(Vec<usize>),

    #[error("transition system is not topologically mixing")]
    NotMixing,

    #[error("sequence does not declare a dependence length (inexact sequence)")]
    InexactSequence,

    #[error("operation requires an additive sequence backed by a locally constant potential")]
    NotAdditive,

    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("admissible cylinder {0:?} has zero mass")]
    ZeroMass(Vec<usize>),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("root finding failed on branch {branch} for target {target}")]
    RootFinding { branch: usize, target: f64 },

    #[error("cylinder diameter equals 1 at n = {0}; log-diameter quotient undefined")]
    DivisionHazard(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
