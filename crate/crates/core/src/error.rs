//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors surfaced by environments, oracles, networks, and estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid configuration (bad hyperparameter, malformed table, ...).
    Config(String),
    /// Invalid runtime input (empty dataset, tau outside (0,1), ...).
    Input(String),
    /// A resource limit was exceeded (e.g. atom count in exact Bellman iteration).
    Resource(String),
    /// Internal invariant violation (shape mismatch between coupled structures).
    Internal(String),
    /// Training produced a non-finite or exploding loss.
    TrainingDiverged {
        /// Optimizer step at which divergence was detected.
        step: usize,
        /// Offending loss value.
        loss: f64,
    },
    /// An importance ratio is undefined: the behavior policy assigns zero
    /// probability to an observed action.
    DegenerateRatio(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Input(msg) => write!(f, "input error: {msg}"),
            Error::Resource(msg) => write!(f, "resource error: {msg}"),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
            Error::TrainingDiverged { step, loss } => {
                write!(f, "training diverged at step {step}: loss = {loss}")
            }
            Error::DegenerateRatio(msg) => write!(f, "degenerate importance ratio: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
