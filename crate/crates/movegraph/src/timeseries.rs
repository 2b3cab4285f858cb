//! Immutable multi-channel time-series model and CSV ingestion.
//!
//! A [`Recording`] holds named [`Channel`]s with independent sample rates;
//! nothing is resampled or aligned at ingestion. Timestamps are integer
//! milliseconds, which preserves 50–200 Hz IMU resolution without float
//! drift. Units are fixed when data enters the system: speed in m/s,
//! acceleration in G, angular rate in deg/s.
//!
//! Recordings and channels are immutable once built (mutation requires
//! `&mut`, so a shared reference can be read from any number of threads).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Milliseconds since the recording epoch. Non-negative, totally ordered.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Timestamp(u64);

impl Timestamp {
    pub fn from_ms(ms: u64) -> Self {
        Timestamp(ms)
    }

    pub fn as_ms(self) -> u64 {
        self.0
    }

    /// Milliseconds elapsed since `earlier`. Saturates at zero if `earlier`
    /// is actually later.
    pub fn millis_since(self, earlier: Timestamp) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// A WGS84 coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Validates range bounds (lat in [-90, 90], lon in [-180, 180]) and
    /// rejects non-finite components.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::NonFiniteValue {
                context: "geographic coordinate",
            });
        }
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::CoordinateOutOfRange { lat, lon });
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// What a channel carries per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// GNSS position fixes (`GeoPoint`).
    Position,
    /// Speed over ground in m/s, non-negative.
    Speed,
    /// 3-axis acceleration in G.
    Accel,
    /// 3-axis angular rate in deg/s.
    Gyro,
    /// Any single-valued signal in caller-defined units.
    GenericScalar,
}

impl ChannelKind {
    pub fn is_scalar(self) -> bool {
        matches!(self, ChannelKind::Speed | ChannelKind::GenericScalar)
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Position => "position",
            ChannelKind::Speed => "speed",
            ChannelKind::Accel => "accel",
            ChannelKind::Gyro => "gyro",
            ChannelKind::GenericScalar => "generic_scalar",
        }
    }

    /// Kind implied by a CSV channel name. Unknown names are generic scalars.
    pub fn from_channel_name(name: &str) -> Self {
        match name {
            "position" => ChannelKind::Position,
            "speed" => ChannelKind::Speed,
            "accel" => ChannelKind::Accel,
            "gyro" => ChannelKind::Gyro,
            _ => ChannelKind::GenericScalar,
        }
    }
}

/// Payload of one sample; arity is fixed by the owning channel's kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleValue {
    Position(GeoPoint),
    Scalar(f64),
    Vector3([f64; 3]),
}

impl SampleValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            SampleValue::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_position(&self) -> Option<GeoPoint> {
        match self {
            SampleValue::Position(p) => Some(*p),
            _ => None,
        }
    }

    pub fn as_vector3(&self) -> Option<[f64; 3]> {
        match self {
            SampleValue::Vector3(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: Timestamp,
    pub value: SampleValue,
}

/// One uniformly-typed signal with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    kind: ChannelKind,
    nominal_rate_hz: f64,
    samples: Vec<Sample>,
}

impl Channel {
    pub fn new(kind: ChannelKind, nominal_rate_hz: f64) -> Result<Self> {
        if !(nominal_rate_hz.is_finite() && nominal_rate_hz > 0.0) {
            return Err(Error::ValueOutOfRange {
                context: "channel nominal rate (Hz)",
                value: nominal_rate_hz,
            });
        }
        Ok(Channel {
            kind,
            nominal_rate_hz,
            samples: Vec::new(),
        })
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn nominal_rate_hz(&self) -> f64 {
        self.nominal_rate_hz
    }

    /// Nominal sample period in milliseconds.
    pub fn period_ms(&self) -> f64 {
        1000.0 / self.nominal_rate_hz
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first_t(&self) -> Option<Timestamp> {
        self.samples.first().map(|s| s.t)
    }

    pub fn last_t(&self) -> Option<Timestamp> {
        self.samples.last().map(|s| s.t)
    }

    /// Appends a sample, enforcing strict timestamp order and payload arity.
    pub fn push(&mut self, t: Timestamp, value: SampleValue) -> Result<()> {
        self.check_payload(&value)?;
        if let Some(last) = self.samples.last() {
            if t == last.t {
                return Err(Error::DuplicateTimestamp {
                    channel: self.kind.name().to_string(),
                    line: None,
                    t_ms: t.as_ms(),
                });
            }
            if t < last.t {
                return Err(Error::NonMonotonicTimestamp {
                    channel: self.kind.name().to_string(),
                    line: None,
                    t_ms: t.as_ms(),
                    prev_ms: last.t.as_ms(),
                });
            }
        }
        self.samples.push(Sample { t, value });
        Ok(())
    }

    fn check_payload(&self, value: &SampleValue) -> Result<()> {
        let ok = match (self.kind, value) {
            (ChannelKind::Position, SampleValue::Position(_)) => true,
            (ChannelKind::Speed, SampleValue::Scalar(v)) => {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue {
                        context: "speed sample",
                    });
                }
                if *v < 0.0 {
                    return Err(Error::ValueOutOfRange {
                        context: "speed (m/s, must be >= 0)",
                        value: *v,
                    });
                }
                true
            }
            (ChannelKind::GenericScalar, SampleValue::Scalar(v)) => {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue {
                        context: "scalar sample",
                    });
                }
                true
            }
            (ChannelKind::Accel | ChannelKind::Gyro, SampleValue::Vector3(v)) => {
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFiniteValue {
                        context: "vector sample",
                    });
                }
                true
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::PayloadKindMismatch {
                expected: self.kind.name(),
            })
        }
    }

    /// Samples with `from <= t <= to`, order preserved. Empty result allowed.
    pub fn slice(&self, from: Timestamp, to: Timestamp) -> Result<Channel> {
        if from > to {
            return Err(Error::InvalidWindow {
                from_ms: from.as_ms(),
                to_ms: to.as_ms(),
            });
        }
        let lo = self.samples.partition_point(|s| s.t < from);
        let hi = self.samples.partition_point(|s| s.t <= to);
        Ok(Channel {
            kind: self.kind,
            nominal_rate_hz: self.nominal_rate_hz,
            samples: self.samples[lo..hi].to_vec(),
        })
    }

    /// Linear interpolation of a scalar channel at `at`. Exact sample hits
    /// return the stored value. `at` must lie within the channel span.
    pub fn resample_linear(&self, at: Timestamp) -> Result<f64> {
        if !self.kind.is_scalar() {
            return Err(Error::WrongChannelKind {
                channel: self.kind.name().to_string(),
                expected: "scalar",
                actual: self.kind.name(),
            });
        }
        let (first, last) = match (self.first_t(), self.last_t()) {
            (Some(f), Some(l)) => (f, l),
            _ => {
                return Err(Error::NotEnoughSamples {
                    channel: self.kind.name().to_string(),
                    needed: 1,
                })
            }
        };
        if at < first || at > last {
            return Err(Error::OutsideChannelSpan {
                at_ms: at.as_ms(),
                first_ms: first.as_ms(),
                last_ms: last.as_ms(),
            });
        }
        let idx = self.samples.partition_point(|s| s.t < at);
        let right = &self.samples[idx];
        if right.t == at {
            return Ok(right.value.as_scalar().expect("scalar channel"));
        }
        let left = &self.samples[idx - 1];
        let v0 = left.value.as_scalar().expect("scalar channel");
        let v1 = right.value.as_scalar().expect("scalar channel");
        let span = (right.t.as_ms() - left.t.as_ms()) as f64;
        let frac = (at.as_ms() - left.t.as_ms()) as f64 / span;
        Ok(v0 + frac * (v1 - v0))
    }
}

/// An immutable set of named channels from one session.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    id: String,
    channels: BTreeMap<String, Channel>,
}

impl Recording {
    pub fn new(id: impl Into<String>) -> Self {
        Recording {
            id: id.into(),
            channels: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn insert_channel(&mut self, name: impl Into<String>, channel: Channel) -> Result<()> {
        let name = name.into();
        if self.channels.contains_key(&name) {
            return Err(Error::DuplicateChannelName(name));
        }
        self.channels.insert(name, channel);
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.get(name)
    }

    pub fn require_channel(&self, name: &str) -> Result<&Channel> {
        self.channel(name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    /// Channels in name order (deterministic iteration).
    pub fn channels(&self) -> impl Iterator<Item = (&str, &Channel)> {
        self.channels.iter().map(|(n, c)| (n.as_str(), c))
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Earliest and latest timestamp over all channels.
    pub fn time_span(&self) -> Option<(Timestamp, Timestamp)> {
        let first = self.channels.values().filter_map(Channel::first_t).min()?;
        let last = self.channels.values().filter_map(Channel::last_t).max()?;
        Some((first, last))
    }
}

/// Supported on-disk recording formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordingFormat {
    Csv,
}

const CSV_HEADER: [&str; 5] = ["timestamp_ms", "channel", "v0", "v1", "v2"];

/// Loads a recording from the row-per-sample CSV schema
/// (`timestamp_ms,channel,v0,v1,v2`).
///
/// Rows of one channel must appear in strictly increasing timestamp order;
/// out-of-order or duplicate timestamps are hard errors, never silently
/// dropped. Channel kinds are implied by the channel name; unknown names
/// become generic scalar channels.
pub fn load_recording(path: impl AsRef<Path>, format: RecordingFormat) -> Result<Recording> {
    let RecordingFormat::Csv = format;
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "recording".to_string());
    load_recording_from_reader(file, id)
}

pub fn load_recording_from_reader(reader: impl std::io::Read, id: String) -> Result<Recording> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    {
        let headers = csv_reader.headers().map_err(csv_to_row_error)?;
        if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::MalformedRow {
                line: 1,
                reason: format!(
                    "expected header '{}', got '{}'",
                    CSV_HEADER.join(","),
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
    }

    let mut channels: BTreeMap<String, Channel> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        match csv_reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_to_row_error(e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        parse_row(&record, line, &mut channels)?;
    }

    if channels.is_empty() {
        return Err(Error::EmptyRecording);
    }
    let mut recording = Recording::new(id);
    for (name, channel) in channels {
        recording.insert_channel(name, channel)?;
    }
    Ok(recording)
}

fn parse_row(
    record: &csv::StringRecord,
    line: u64,
    channels: &mut BTreeMap<String, Channel>,
) -> Result<()> {
    let field = |i: usize| record.get(i).unwrap_or("");
    let t_ms: u64 = field(0).trim().parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("bad timestamp_ms '{}'", field(0)),
    })?;
    let name = field(1).trim();
    if name.is_empty() {
        return Err(Error::MalformedRow {
            line,
            reason: "empty channel name".to_string(),
        });
    }
    let kind = ChannelKind::from_channel_name(name);

    let num = |i: usize| -> Result<f64> {
        field(i)
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::MalformedRow {
                line,
                reason: format!("bad numeric field v{} '{}'", i - 2, field(i)),
            })
    };

    let value = match kind {
        ChannelKind::Position => {
            let lat = num(2)?;
            let lon = num(3)?;
            SampleValue::Position(GeoPoint::new(lat, lon)?)
        }
        ChannelKind::Speed | ChannelKind::GenericScalar => SampleValue::Scalar(num(2)?),
        ChannelKind::Accel | ChannelKind::Gyro => SampleValue::Vector3([num(2)?, num(3)?, num(4)?]),
    };

    // Rates are not stored in the file; they are inferred after load from the
    // sample spacing. A placeholder is used while rows accumulate.
    let channel = match channels.get_mut(name) {
        Some(c) => c,
        None => {
            channels.insert(name.to_string(), Channel::new(kind, 1.0)?);
            channels.get_mut(name).unwrap()
        }
    };
    channel.push(Timestamp::from_ms(t_ms), value).map_err(|e| match e {
        Error::DuplicateTimestamp { t_ms, .. } => Error::DuplicateTimestamp {
            channel: name.to_string(),
            line: Some(line),
            t_ms,
        },
        Error::NonMonotonicTimestamp { t_ms, prev_ms, .. } => Error::NonMonotonicTimestamp {
            channel: name.to_string(),
            line: Some(line),
            t_ms,
            prev_ms,
        },
        other => other,
    })?;
    channel.nominal_rate_hz = infer_rate(&channel.samples);
    Ok(())
}

fn infer_rate(samples: &[Sample]) -> f64 {
    if samples.len() < 2 {
        return 1.0;
    }
    let span_ms = samples.last().unwrap().t.as_ms() - samples.first().unwrap().t.as_ms();
    if span_ms == 0 {
        return 1.0;
    }
    (samples.len() - 1) as f64 * 1000.0 / span_ms as f64
}

fn csv_to_row_error(e: csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    Error::MalformedRow {
        line,
        reason: e.to_string(),
    }
}

/// Writes a recording in the same CSV schema accepted by [`load_recording`].
/// Rows are merged over all channels and ordered by (timestamp, channel
/// name), so identical recordings serialize to identical bytes.
pub fn save_recording(recording: &Recording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_recording_csv(recording, &mut buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    crate::write_atomic(path, &buf)
}

pub fn write_recording_csv(recording: &Recording, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{}", CSV_HEADER.join(","))?;

    let mut rows: Vec<(u64, &str, String)> = Vec::new();
    for (name, channel) in recording.channels() {
        for sample in channel.samples() {
            let fields = match sample.value {
                SampleValue::Position(p) => format!("{},{},", p.lat, p.lon),
                SampleValue::Scalar(v) => format!("{v},,"),
                SampleValue::Vector3([x, y, z]) => format!("{x},{y},{z}"),
            };
            rows.push((sample.t.as_ms(), name, fields));
        }
    }
    rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    for (t, name, fields) in rows {
        writeln!(out, "{t},{name},{fields}")?;
    }
    Ok(())
}
