use thiserror::Error;

use crate::extended::SettingIndependenceWitness;
use crate::rational::Rational;
use crate::types::SettingPair;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} entries, found {found}")]
    WrongLength { expected: usize, found: usize },

    #[error("entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: Rational },

    /// `deficit` is `1 - sum`, exact.
    #[error("entries do not sum to 1 (deficit {deficit})")]
    SumNotOne { deficit: Rational },

    #[error("invalid pair tables: {0}")]
    InvalidTables(String),

    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),

    #[error("setting pair {0} was never sampled")]
    EmptyPair(SettingPair),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("message function reads the current setting: {0}")]
    PolicyViolation(Box<SettingIndependenceWitness>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Raised by a model's own component functions when they reject their inputs.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("model evaluation failure: {0}")]
pub struct ModelError(pub String);
