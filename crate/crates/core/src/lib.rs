//! Exact and Monte Carlo tools for three-setting two-station correlation
//! experiments: instruction-set averages, joint realizability of pairwise
//! tables, time-extended local models and counting audits.

pub mod error;
pub mod extended;
pub mod fallacy;
pub mod instruction;
pub mod lp;
pub mod rational;
pub mod realizability;
pub mod rng;
pub mod runlog;
pub mod stats;
pub mod types;

pub use error::{Error, ModelError, Result};
pub use rational::Rational;
pub use rng::MasterSeed;
pub use types::{
    InstructionSet, Outcome, ProbabilityVector8, RunRecord, Setting, SettingPair, Station, Time,
};
