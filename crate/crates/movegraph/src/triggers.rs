//! Triggers turn raw channels into timestamped points of interest.
//!
//! Three trigger families cover the sensors handled here:
//!
//! * **Edge** — threshold crossings on a scalar channel. A sample is in
//!   state 1 when its value is `>= threshold`; a crossing is a state change
//!   between consecutive samples, so holding above the threshold never
//!   retriggers. No debounce is applied: false firings are expected and are
//!   suppressed later by the grammar's temporal constraints, not here.
//! * **Peak** — local maxima (or minima) by neighbor comparison, with
//!   optional prominence and minimum-separation filtering.
//! * **Gate** — crossings of a geographic line segment (a virtual gate) by
//!   the position channel.
//!
//! All detectors are stateless and deterministic; evaluating the same
//! channel twice yields identical output.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo::{self, PlanarPoint, SegmentPair};
use crate::timeseries::{Channel, ChannelKind, GeoPoint, Recording, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeDirection {
    Rising,
    Falling,
    /// Both rising and falling.
    Change,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTriggerSpec {
    pub channel: String,
    pub threshold: f64,
    pub direction: EdgeDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakPolarity {
    Maxima,
    Minima,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakTriggerSpec {
    pub channel: String,
    pub min_prominence: f64,
    pub min_separation_ms: u64,
    pub polarity: PeakPolarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDirection {
    Any,
    LeftToRight,
    RightToLeft,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateTriggerSpec {
    pub channel: String,
    pub gate: (GeoPoint, GeoPoint),
    pub direction_filter: GateDirection,
}

/// A trigger of any family, ready to bind to a grammar node.
#[derive(Debug, Clone, PartialEq)]
pub enum TriggerSpec {
    Edge(EdgeTriggerSpec),
    Peak(PeakTriggerSpec),
    Gate(GateTriggerSpec),
}

impl TriggerSpec {
    pub fn edge(channel: impl Into<String>, threshold: f64, direction: EdgeDirection) -> Self {
        TriggerSpec::Edge(EdgeTriggerSpec {
            channel: channel.into(),
            threshold,
            direction,
        })
    }

    pub fn peak(
        channel: impl Into<String>,
        min_prominence: f64,
        min_separation_ms: u64,
        polarity: PeakPolarity,
    ) -> Self {
        TriggerSpec::Peak(PeakTriggerSpec {
            channel: channel.into(),
            min_prominence,
            min_separation_ms,
            polarity,
        })
    }

    pub fn gate(
        channel: impl Into<String>,
        gate: (GeoPoint, GeoPoint),
        direction_filter: GateDirection,
    ) -> Self {
        TriggerSpec::Gate(GateTriggerSpec {
            channel: channel.into(),
            gate,
            direction_filter,
        })
    }

    pub fn channel(&self) -> &str {
        match self {
            TriggerSpec::Edge(s) => &s.channel,
            TriggerSpec::Peak(s) => &s.channel,
            TriggerSpec::Gate(s) => &s.channel,
        }
    }

    /// Short description used as the POI `source` tag.
    pub fn source_tag(&self) -> String {
        match self {
            TriggerSpec::Edge(s) => format!("edge({})", s.channel),
            TriggerSpec::Peak(s) => format!("peak({})", s.channel),
            TriggerSpec::Gate(s) => format!("gate({})", s.channel),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TriggerSpec::Edge(s) => {
                if !s.threshold.is_finite() {
                    return Err(Error::InvalidTrigger {
                        reason: "edge threshold must be finite".to_string(),
                    });
                }
            }
            TriggerSpec::Peak(s) => {
                if !(s.min_prominence.is_finite() && s.min_prominence >= 0.0) {
                    return Err(Error::InvalidTrigger {
                        reason: "peak min_prominence must be >= 0".to_string(),
                    });
                }
            }
            TriggerSpec::Gate(s) => {
                if s.gate.0 == s.gate.1 {
                    return Err(Error::DegenerateGate);
                }
            }
        }
        Ok(())
    }
}

/// A trigger bound to the grammar node it fires for.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub node: String,
    pub trigger: TriggerSpec,
}

impl Binding {
    pub fn new(node: impl Into<String>, trigger: TriggerSpec) -> Self {
        Binding {
            node: node.into(),
            trigger,
        }
    }
}

/// A timestamped firing of a trigger bound to a grammar node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PointOfInterest {
    pub node: String,
    #[serde(rename = "t_ms")]
    pub t: Timestamp,
    pub source: String,
}

fn require_scalar<'a>(channel: &'a Channel, name: &str) -> Result<&'a Channel> {
    if channel.kind().is_scalar() {
        Ok(channel)
    } else {
        Err(Error::WrongChannelKind {
            channel: name.to_string(),
            expected: "scalar",
            actual: channel.kind().name(),
        })
    }
}

/// Rounds an interpolated crossing time into the open interval between the
/// bracketing samples, keeping outputs strictly ordered even when the
/// crossing falls arbitrarily close to a sample.
fn clamp_between(t0: u64, t1: u64, t_float: f64) -> u64 {
    debug_assert!(t1 > t0);
    let rounded = t_float.round() as u64;
    if t1 - t0 < 2 {
        return t1;
    }
    rounded.clamp(t0 + 1, t1 - 1)
}

/// Threshold-edge detection on a scalar channel. Crossing timestamps are
/// linearly interpolated between the bracketing samples.
pub fn detect_edges(channel: &Channel, spec: &EdgeTriggerSpec) -> Result<Vec<Timestamp>> {
    TriggerSpec::Edge(spec.clone()).validate()?;
    let channel = require_scalar(channel, &spec.channel)?;
    if channel.len() < 2 {
        return Err(Error::NotEnoughSamples {
            channel: spec.channel.clone(),
            needed: 2,
        });
    }
    let samples = channel.samples();
    let state = |v: f64| v >= spec.threshold;
    let mut out = Vec::new();
    for pair in samples.windows(2) {
        let v0 = pair[0].value.as_scalar().expect("scalar channel");
        let v1 = pair[1].value.as_scalar().expect("scalar channel");
        let (s0, s1) = (state(v0), state(v1));
        let fire = match spec.direction {
            EdgeDirection::Rising => !s0 && s1,
            EdgeDirection::Falling => s0 && !s1,
            EdgeDirection::Change => s0 != s1,
        };
        if !fire {
            continue;
        }
        let t0 = pair[0].t.as_ms();
        let t1 = pair[1].t.as_ms();
        let frac = (spec.threshold - v0) / (v1 - v0);
        let t_cross = t0 as f64 + frac * (t1 - t0) as f64;
        out.push(Timestamp::from_ms(clamp_between(t0, t1, t_cross)));
    }
    Ok(out)
}

/// Peak detection by neighbor comparison.
///
/// A peak is a sample strictly greater than both neighbors; a plateau of
/// equal values bounded by smaller neighbors peaks at its midpoint sample.
/// Prominence follows the usual definition: height above the higher of the
/// two valley floors reached before a taller sample (or the series edge).
/// Among peaks closer than `min_separation_ms` the higher one wins.
pub fn detect_peaks(channel: &Channel, spec: &PeakTriggerSpec) -> Result<Vec<Timestamp>> {
    TriggerSpec::Peak(spec.clone()).validate()?;
    let channel = require_scalar(channel, &spec.channel)?;
    let samples = channel.samples();
    if samples.len() < 3 {
        return Ok(Vec::new());
    }
    let sign = match spec.polarity {
        PeakPolarity::Maxima => 1.0,
        PeakPolarity::Minima => -1.0,
    };
    let v: Vec<f64> = samples
        .iter()
        .map(|s| sign * s.value.as_scalar().expect("scalar channel"))
        .collect();

    // candidate plateaus
    let mut candidates: Vec<usize> = Vec::new();
    let n = v.len();
    let mut i = 1;
    while i + 1 < n {
        if v[i] > v[i - 1] {
            let start = i;
            let mut end = i;
            while end + 1 < n && v[end + 1] == v[start] {
                end += 1;
            }
            if end + 1 < n && v[end + 1] < v[start] {
                candidates.push((start + end) / 2);
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }

    // prominence filter
    let prominence = |p: usize| -> f64 {
        let h = v[p];
        let mut left_base = h;
        for j in (0..p).rev() {
            if v[j] > h {
                break;
            }
            left_base = left_base.min(v[j]);
        }
        let mut right_base = h;
        for value in v.iter().skip(p + 1) {
            if *value > h {
                break;
            }
            right_base = right_base.min(*value);
        }
        h - left_base.max(right_base)
    };
    let mut peaks: Vec<usize> = candidates
        .into_iter()
        .filter(|&p| prominence(p) >= spec.min_prominence)
        .collect();

    // separation filter: higher peaks claim their window first
    if spec.min_separation_ms > 0 && peaks.len() > 1 {
        let mut order = peaks.clone();
        order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap().then(a.cmp(&b)));
        let mut kept: Vec<usize> = Vec::new();
        for p in order {
            let tp = samples[p].t.as_ms();
            let clear = kept.iter().all(|&k| {
                let tk = samples[k].t.as_ms();
                tp.abs_diff(tk) >= spec.min_separation_ms
            });
            if clear {
                kept.push(p);
            }
        }
        kept.sort_unstable();
        peaks = kept;
    }

    Ok(peaks.into_iter().map(|p| samples[p].t).collect())
}

/// Virtual-gate crossing detection on a position channel.
///
/// Fixes and gate endpoints are projected onto a plane anchored at the gate
/// midpoint, then every consecutive fix pair is intersected with the gate
/// segment. Crossing timestamps interpolate between the two fix times by the
/// intersection fraction. A fix lying exactly on the gate is counted once:
/// each step owns the half-open parameter range `[0, 1)` (the final step is
/// closed).
pub fn detect_gate_crossings(channel: &Channel, spec: &GateTriggerSpec) -> Result<Vec<Timestamp>> {
    TriggerSpec::Gate(spec.clone()).validate()?;
    if channel.kind() != ChannelKind::Position {
        return Err(Error::WrongChannelKind {
            channel: spec.channel.clone(),
            expected: "position",
            actual: channel.kind().name(),
        });
    }
    let samples = channel.samples();
    if samples.len() < 2 {
        return Ok(Vec::new());
    }

    let origin = GeoPoint::new(
        (spec.gate.0.lat + spec.gate.1.lat) / 2.0,
        (spec.gate.0.lon + spec.gate.1.lon) / 2.0,
    )?;
    let b1 = geo::project_local(origin, spec.gate.0)?;
    let b2 = geo::project_local(origin, spec.gate.1)?;

    let mut fixes: Vec<PlanarPoint> = Vec::with_capacity(samples.len());
    for s in samples {
        let p = s.value.as_position().expect("position channel");
        fixes.push(geo::project_local(origin, p)?);
    }

    let mut out = Vec::new();
    for i in 0..fixes.len() - 1 {
        let a1 = fixes[i];
        let a2 = fixes[i + 1];
        let hit = match geo::segment_intersection(&SegmentPair { a1, a2, b1, b2 }) {
            Some(h) => h,
            None => continue,
        };
        let last_step = i + 2 == fixes.len();
        if hit.u >= 1.0 && !last_step {
            continue; // the next step owns this shared endpoint
        }
        if !direction_matches(spec.direction_filter, b1, b2, a1, a2) {
            continue;
        }
        let t0 = samples[i].t.as_ms();
        let t1 = samples[i + 1].t.as_ms();
        let t_cross = t0 as f64 + hit.u * (t1 - t0) as f64;
        out.push(Timestamp::from_ms(clamp_between(t0, t1, t_cross)));
    }
    out.dedup();
    Ok(out)
}

fn direction_matches(
    filter: GateDirection,
    b1: PlanarPoint,
    b2: PlanarPoint,
    a1: PlanarPoint,
    a2: PlanarPoint,
) -> bool {
    match filter {
        GateDirection::Any => true,
        GateDirection::LeftToRight => {
            geo::side_of_line(b1, b2, a1) > 0.0 && geo::side_of_line(b1, b2, a2) <= 0.0
        }
        GateDirection::RightToLeft => {
            geo::side_of_line(b1, b2, a1) < 0.0 && geo::side_of_line(b1, b2, a2) >= 0.0
        }
    }
}

/// Runs every binding against the recording and merges the firings into one
/// stream ordered by time; simultaneous firings order by node id, then by
/// source tag.
pub fn run_triggers(recording: &Recording, bindings: &[Binding]) -> Result<Vec<PointOfInterest>> {
    let mut pois: Vec<PointOfInterest> = Vec::new();
    for binding in bindings {
        let channel_name = binding.trigger.channel();
        let channel = recording.require_channel(channel_name)?;
        let source = binding.trigger.source_tag();
        let timestamps = match &binding.trigger {
            TriggerSpec::Edge(spec) => detect_edges(channel, spec)?,
            TriggerSpec::Peak(spec) => detect_peaks(channel, spec)?,
            TriggerSpec::Gate(spec) => detect_gate_crossings(channel, spec)?,
        };
        pois.extend(timestamps.into_iter().map(|t| PointOfInterest {
            node: binding.node.clone(),
            t,
            source: source.clone(),
        }));
    }
    pois.sort_by(|a, b| {
        a.t.cmp(&b.t)
            .then_with(|| a.node.cmp(&b.node))
            .then_with(|| a.source.cmp(&b.source))
    });
    Ok(pois)
}
