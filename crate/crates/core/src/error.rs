use std::fmt;

use thiserror::Error;

/// A single violated invariant found by validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Where in the potential description the problem sits, e.g. `matrix[0][1]` or `cell[2]`.
    pub path: String,
    pub message: String,
}

impl Violation {
    pub(crate) fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {}", join(.0))]
    Invalid(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("amplitude overflow beyond x = {last_x}")]
    AmplitudeOverflow { last_x: f64 },

    #[error("knots undefined: trace is complex-valued")]
    KnotsUndefined,

    #[error("mismatched grids: {0}")]
    GridMismatch(String),

    #[error("not a gap: |D({energy})| = {abs_discriminant} <= 1")]
    NotAGap { energy: f64, abs_discriminant: f64 },

    #[error("degenerate, no beating: E = {energy} sits on a zone edge")]
    DegenerateEdge { energy: f64 },

    #[error("no bumps: trace has {knots} knot(s), need at least 2")]
    NoBumps { knots: usize },

    #[error("no open channels at E = {energy}")]
    NoOpenChannels { energy: f64 },

    #[error("matching degenerate: condition number {condition:e}")]
    MatchingDegenerate { condition: f64 },

    #[error("potential does not decay: {0}")]
    NotDecaying(String),

    #[error("support mismatch: k*L = {kl} is not {mode}*pi")]
    SupportMismatch { kl: f64, mode: u32 },

    #[error("channel 2 not closed: eps2 = {threshold} <= E = {energy}")]
    ChannelNotClosed { threshold: f64, energy: f64 },

    #[error("no gap to track: {0}")]
    NoGapToTrack(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
