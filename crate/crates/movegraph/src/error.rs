//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("non-monotonic timestamp {t_ms} ms after {prev_ms} ms in channel '{channel}'{}", loc(.line))]
    NonMonotonicTimestamp {
        channel: String,
        line: Option<u64>,
        t_ms: u64,
        prev_ms: u64,
    },

    #[error("duplicate timestamp {t_ms} ms in channel '{channel}'{}", loc(.line))]
    DuplicateTimestamp {
        channel: String,
        line: Option<u64>,
        t_ms: u64,
    },

    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    CoordinateOutOfRange { lat: f64, lon: f64 },

    #[error("non-finite value in {context}")]
    NonFiniteValue { context: &'static str },

    #[error("value out of range in {context}: {value}")]
    ValueOutOfRange { context: &'static str, value: f64 },

    #[error("sample payload does not match channel kind (expected {expected})")]
    PayloadKindMismatch { expected: &'static str },

    #[error("recording has no channels")]
    EmptyRecording,

    #[error("duplicate channel name '{0}'")]
    DuplicateChannelName(String),

    #[error("unknown channel '{0}'")]
    UnknownChannel(String),

    #[error("channel '{channel}' has kind {actual}, operation needs {expected}")]
    WrongChannelKind {
        channel: String,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("channel '{channel}' has too few samples (need at least {needed})")]
    NotEnoughSamples { channel: String, needed: usize },

    #[error("invalid window: from {from_ms} ms > to {to_ms} ms")]
    InvalidWindow { from_ms: u64, to_ms: u64 },

    #[error("timestamp {at_ms} ms outside channel span [{first_ms}, {last_ms}] ms")]
    OutsideChannelSpan {
        at_ms: u64,
        first_ms: u64,
        last_ms: u64,
    },

    #[error("projection distance {distance_m:.1} m exceeds local-plane limit of {limit_m:.0} m")]
    ProjectionRangeExceeded { distance_m: f64, limit_m: f64 },

    #[error("gate endpoints must be distinct")]
    DegenerateGate,

    #[error("invalid trigger: {reason}")]
    InvalidTrigger { reason: String },

    #[error("duplicate node id '{0}'")]
    DuplicateNodeId(String),

    #[error("edge {from} -> {to} references undefined node '{missing}'")]
    DanglingEdge {
        from: String,
        to: String,
        missing: String,
    },

    #[error("grammar has no start node")]
    NoStartNode,

    #[error("grammar has no finish node")]
    NoFinishNode,

    #[error("edge {from} -> {to} has min duration {min_ms} ms > max duration {max_ms} ms")]
    InvalidDurationBounds {
        from: String,
        to: String,
        min_ms: u64,
        max_ms: u64,
    },

    #[error("node '{0}' has no trigger binding")]
    MissingTriggerBinding(String),

    #[error("non-finish node '{0}' has no outgoing edge")]
    DeadEndNode(String),

    #[error("conflicting duplicate edges {from} -> {to} (ambiguous transition)")]
    AmbiguousTransition { from: String, to: String },

    #[error("grammar config: {0}")]
    GrammarJson(#[from] serde_json::Error),

    #[error("{stage} exceeded exploration cap: {explored} states explored, cap {cap}")]
    CapExceeded {
        stage: &'static str,
        explored: u64,
        cap: u64,
    },

    #[error("cannot rank an empty candidate list")]
    EmptyRankingInput,

    #[error("invalid partial solution: {reason}")]
    InvalidSolution { reason: String },

    #[error("invalid track plan: {reason}")]
    InvalidPlan { reason: String },

    #[error("warm-up crossing at {crossing_s} s is not before race start at {race_start_s} s")]
    WarmupAfterRaceStart { crossing_s: f64, race_start_s: f64 },
}

fn loc(line: &Option<u64>) -> String {
    match line {
        Some(n) => format!(" (line {n})"),
        None => String::new(),
    }
}
