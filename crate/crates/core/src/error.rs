//! Error type shared by the core algorithms.

use alloc::string::String;
use core::fmt;

/// Errors surfaced by corpus handling, training, scoring, and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input collection that must be non-empty was empty. The payload
    /// names what was missing (e.g. `"normal scores"`).
    Empty(&'static str),
    /// A ratio split was asked to produce more parts than there are traces.
    TooFewTraces { have: usize, need: usize },
    /// A configuration field held an unusable value; the message says which.
    InvalidConfig(String),
    /// A training batch produced a non-finite loss (diverged or bad input).
    NonFiniteLoss { batch: usize },
    /// A score or input vector contained NaN/inf where a finite value is
    /// required. The payload names the offending collection.
    NonFinite(&'static str),
    /// Ensemble inputs disagreed on member count or trace count.
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// Neighbor or cluster count `k` exceeds the number of available points.
    KTooLarge { k: usize, points: usize },
    /// A requested detection-rate target lies outside `(0, 1]`.
    BadDetectionRate(f64),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Empty(what) => write!(f, "{what} must not be empty"),
            Error::TooFewTraces { have, need } => {
                write!(f, "need at least {need} traces for this split, got {have}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::NonFiniteLoss { batch } => {
                write!(f, "non-finite loss on batch {batch}; training diverged")
            }
            Error::NonFinite(what) => write!(f, "{what} contain a non-finite value"),
            Error::LengthMismatch {
                what,
                expected,
                got,
            } => write!(f, "{what}: expected {expected} entries, got {got}"),
            Error::KTooLarge { k, points } => {
                write!(f, "k = {k} exceeds the {points} available points")
            }
            Error::BadDetectionRate(t) => {
                write!(f, "detection-rate target {t} is outside (0, 1]")
            }
        }
    }
}

impl core::error::Error for Error {}

/// Convenience alias used across the crate.
pub type Result<T> = core::result::Result<T, Error>;
