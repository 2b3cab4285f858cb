//! movegraph — movement-sequence recognition over multi-sensor recordings.
//!
//! The library turns raw sensor recordings (GNSS position/speed, IMU
//! acceleration and angular rate) into recognized movement sequences:
//!
//! 1. **Triggers** ([`triggers`]) scan individual channels for points of
//!    interest: threshold edges, signal peaks, and virtual-gate crossings.
//! 2. A **movement grammar** ([`grammar`]) — a directed graph whose nodes
//!    are point-of-interest types and whose edges encode temporal order,
//!    optionally with min/max duration bounds — is compiled into a finite
//!    automaton with multiple start states; inputs that do not label an
//!    outgoing edge leave the state unchanged.
//! 3. The **recognizer** ([`recognizer`]) matches the automaton against the
//!    point-of-interest stream from every start firing, collects all
//!    partial solutions, combines the non-overlapping ones into candidate
//!    total solutions, and ranks them by covered duration, then by number
//!    of parts.
//! 4. **Metrics** ([`metrics`]) derive per-segment statistics (durations,
//!    mean speed, acceleration aggregates) from the optimal solution.
//!
//! [`synth`] generates deterministic biathlon-style telemetry with exact
//! ground truth, which is how the whole pipeline is verified without real
//! sensor hardware. See the crate examples for end-to-end walkthroughs,
//! or the `movegraph` binary for a file-based workflow.
//!
//! ```
//! use movegraph::synth::{self, TrackPlan};
//! use movegraph::recognizer::{recognize, RecognizeOptions};
//!
//! let mut plan = TrackPlan::default();
//! plan.lap_count = 2;
//! plan.shooting_laps = vec![2];
//! plan.penalties_per_bout = vec![1];
//! let (recording, truth) = synth::generate(&plan).unwrap();
//! let grammar = synth::biathlon_grammar(&plan).unwrap();
//! let result = recognize(&recording, &grammar, &RecognizeOptions::default()).unwrap();
//! assert_eq!(result.optimal.node_sequence(), truth.expected_sequence);
//! ```

pub mod error;
pub mod geo;
pub mod grammar;
pub mod metrics;
pub mod recognizer;
pub mod synth;
pub mod timeseries;
pub mod triggers;

pub mod cli;

pub use error::{Error, Result};
pub use timeseries::{
    load_recording, save_recording, Channel, ChannelKind, GeoPoint, Recording, RecordingFormat,
    Sample, SampleValue, Timestamp,
};

use std::path::Path;

/// Writes a file atomically: the content lands in a temporary sibling first
/// and is renamed into place, so readers never observe a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}
