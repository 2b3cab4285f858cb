//! Deterministic synthetic biathlon telemetry with exact ground truth.
//!
//! The generator lays a closed course on a local plane near a configurable
//! origin and moves an athlete along it at piecewise-constant speed: start
//! spur across the start line, uphill past two gates, through the shooting
//! range (slowing below the 1 m/s shooting threshold on shooting laps),
//! past the penalty gate with one extra loop per missed shot, and on the
//! final lap straight to the finish line (which shares the start-line
//! geometry, as on a real track). Gate crossings land exactly on straight
//! stretches, so every planted event time is analytic.
//!
//! [`GroundTruth`] lists every trigger firing the recording should produce
//! (including the deliberately "wrong" speed edges at race start and
//! finish), the node sequence of the correct segmentation, and its segment
//! durations. Crossing times are computed geometrically from the continuous
//! path — independently of the sampled channels the detectors see — which
//! is what makes the generator usable as a test oracle.
//!
//! Seeded noise: GNSS position noise is a first-order Gauss–Markov walk
//! (zero-mean Gaussian with the configured stationary sigma, 20 s
//! correlation). White per-fix noise at 10 Hz would make the track jitter
//! back and forth across a gate line within a single real crossing, which
//! no receiver does; the correlated walk keeps crossings physical while
//! preserving the configured absolute error. Speed and IMU noise are white.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{self, PlanarPoint, SegmentPair};
use crate::grammar::MovementGraph;
use crate::timeseries::{Channel, ChannelKind, GeoPoint, Recording, SampleValue, Timestamp};
use crate::triggers::{EdgeDirection, GateDirection, TriggerSpec};

/// Noise levels per channel family. All zero-mean Gaussian.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub position_sigma_m: f64,
    pub speed_sigma_mps: f64,
    pub accel_sigma_g: f64,
    pub gyro_sigma_dps: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            position_sigma_m: 0.5,
            speed_sigma_mps: 0.05,
            accel_sigma_g: 0.02,
            gyro_sigma_dps: 0.5,
        }
    }
}

impl NoiseParams {
    pub fn none() -> Self {
        NoiseParams {
            position_sigma_m: 0.0,
            speed_sigma_mps: 0.0,
            accel_sigma_g: 0.0,
            gyro_sigma_dps: 0.0,
        }
    }
}

/// A virtual gate: a geographic line segment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub a: GeoPoint,
    pub b: GeoPoint,
}

/// The six gates of the course: start/finish line `s`, uphill gates `g1`
/// and `g2`, range gates `g3` and `g4`, and the penalty gate `p`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GateSet {
    pub s: Gate,
    pub g1: Gate,
    pub g2: Gate,
    pub g3: Gate,
    pub g4: Gate,
    pub p: Gate,
}

/// Everything the generator needs to plan one recording.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrackPlan {
    pub lap_count: u32,
    /// Laps with a shooting bout (1-based; the final lap cannot shoot, it
    /// heads to the finish instead of the range).
    pub shooting_laps: Vec<u32>,
    /// Penalty loops per shooting bout, aligned with `shooting_laps`.
    pub penalties_per_bout: Vec<u32>,
    pub base_speed_mps: f64,
    /// Travel speed across the shooting mat; must sit below the 1 m/s
    /// shooting trigger.
    pub shooting_speed_mps: f64,
    pub imu_rate_hz: f64,
    pub gnss_rate_hz: f64,
    pub noise_seed: u64,
    /// The athlete stands at the start pen until this moment; warm-up
    /// motion can be injected into the idle window.
    pub race_start_s: f64,
    pub course_scale: f64,
    pub origin: GeoPoint,
    /// Mean vertical acceleration planted during each bout (lying vs
    /// standing posture reads differently).
    pub bout_z_accel_g: Vec<f64>,
    pub noise: NoiseParams,
    /// Explicit gate geometry; omitted means the canonical layout around
    /// `origin` scaled by `course_scale`.
    pub gates: Option<GateSet>,
}

impl Default for TrackPlan {
    fn default() -> Self {
        TrackPlan {
            lap_count: 6,
            shooting_laps: vec![2, 4],
            penalties_per_bout: vec![2, 1],
            base_speed_mps: 5.0,
            shooting_speed_mps: 0.4,
            imu_rate_hz: 50.0,
            gnss_rate_hz: 10.0,
            noise_seed: 42,
            race_start_s: 10.0,
            course_scale: 1.0,
            origin: GeoPoint { lat: 47.0, lon: 15.0 },
            bout_z_accel_g: vec![0.33, -0.03],
            noise: NoiseParams::default(),
            gates: None,
        }
    }
}

/// A planted event: the node that should fire and the exact moment.
#[derive(Debug, Clone, Serialize, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExpectedEvent {
    pub node: String,
    pub t_ms: u64,
}

/// The oracle for one generated recording.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GroundTruth {
    /// Every firing the trigger stage should report, including the spurious
    /// speed edges at race start and race end.
    pub expected_pois: Vec<ExpectedEvent>,
    /// Steps of the correct segmentation, in order.
    pub expected_steps: Vec<ExpectedEvent>,
    pub expected_sequence: Vec<String>,
    pub expected_segment_durations_ms: Vec<u64>,
}

impl GroundTruth {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }

    /// Planted firing times for one node, milliseconds.
    pub fn poi_times(&self, node: &str) -> Vec<u64> {
        self.expected_pois
            .iter()
            .filter(|e| e.node == node)
            .map(|e| e.t_ms)
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Canonical course layout (planar meters, scaled by `course_scale`)
// ---------------------------------------------------------------------------

const PEN: (f64, f64) = (-120.0, -80.0);
const S_MID: (f64, f64) = (-120.0, -40.0);
const C_D: (f64, f64) = (-120.0, 0.0);
const G1_MID: (f64, f64) = (0.0, 0.0);
const C_A: (f64, f64) = (200.0, 0.0);
const G2_MID: (f64, f64) = (200.0, 150.0);
const C_B: (f64, f64) = (200.0, 300.0);
const G3_MID: (f64, f64) = (140.0, 300.0);
const MAT_IN: (f64, f64) = (76.0, 300.0);
const MAT_OUT: (f64, f64) = (64.0, 300.0);
const G4_MID: (f64, f64) = (0.0, 300.0);
const P_MID: (f64, f64) = (-60.0, 300.0);
const P_EXIT: (f64, f64) = (-80.0, 300.0);
const LOOP_1: (f64, f64) = (-80.0, 330.0);
const LOOP_2: (f64, f64) = (-40.0, 330.0);
const LOOP_3: (f64, f64) = (-40.0, 300.0);
const C_C: (f64, f64) = (-120.0, 300.0);
const F_T1: (f64, f64) = (200.0, 220.0);
const F_T2: (f64, f64) = (-120.0, 220.0);

const GATE_HALF_WIDTH: f64 = 5.0;

/// Course distances along the path between consecutive grammar nodes,
/// used to derive duration windows for the grammar.
const DIST_S_UE: f64 = 160.0;
const DIST_UE_UL: f64 = 350.0;
const DIST_UL_RE: f64 = 210.0;
const DIST_UL_F: f64 = 650.0;
const DIST_RE_SS: f64 = 64.0;
const DIST_RE_RL_PASS: f64 = 140.0;
const DIST_SF_RL: f64 = 64.0;
const DIST_RL_P: f64 = 60.0;
const DIST_P_UE: f64 = 480.0;
const LOOP_LEN: f64 = 140.0;
const MAT_LEN: f64 = 12.0;

const SPEED_TRIGGER_MPS: f64 = 1.0;
const TAIL_STANDSTILL_S: f64 = 5.0;
const NOISE_CORRELATION_S: f64 = 20.0;

fn scaled(p: (f64, f64), scale: f64) -> PlanarPoint {
    PlanarPoint::new(p.0 * scale, p.1 * scale)
}

impl TrackPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidPlan { reason });
        if self.lap_count == 0 {
            return bad("lap_count must be at least 1".into());
        }
        let mut prev = 0;
        for &lap in &self.shooting_laps {
            if lap == 0 || lap >= self.lap_count {
                return bad(format!(
                    "shooting lap {lap} out of range (the final lap goes to the finish)"
                ));
            }
            if lap <= prev {
                return bad("shooting_laps must be strictly increasing".into());
            }
            prev = lap;
        }
        if self.penalties_per_bout.len() != self.shooting_laps.len() {
            return bad(format!(
                "penalties_per_bout has {} entries for {} shooting laps",
                self.penalties_per_bout.len(),
                self.shooting_laps.len()
            ));
        }
        if !(self.base_speed_mps.is_finite() && self.base_speed_mps > 1.5) {
            return bad("base_speed_mps must exceed 1.5 m/s".into());
        }
        if !(self.shooting_speed_mps > 0.0 && self.shooting_speed_mps < SPEED_TRIGGER_MPS) {
            return bad(format!(
                "shooting_speed_mps must sit in (0, {SPEED_TRIGGER_MPS}) to fire the speed trigger"
            ));
        }
        for (rate, name) in [(self.imu_rate_hz, "imu_rate_hz"), (self.gnss_rate_hz, "gnss_rate_hz")]
        {
            if !(rate.is_finite() && rate > 0.0 && rate <= 1000.0) {
                return bad(format!("{name} must be in (0, 1000]"));
            }
        }
        if !(0.2..=10.0).contains(&self.course_scale) {
            return bad("course_scale must be in [0.2, 10]".into());
        }
        if !(self.race_start_s.is_finite() && self.race_start_s >= 1.0) {
            return bad("race_start_s must be at least 1 s".into());
        }
        if !self.bout_z_accel_g.is_empty()
            && self.bout_z_accel_g.len() < self.shooting_laps.len()
        {
            return bad("bout_z_accel_g must cover every shooting bout (or be empty)".into());
        }
        Ok(())
    }

    /// Gate geometry in use: explicit gates, or the canonical layout.
    pub fn gate_set(&self) -> Result<GateSet> {
        if let Some(gates) = &self.gates {
            return Ok(gates.clone());
        }
        let sc = self.course_scale;
        let gate = |center: (f64, f64), vertical: bool| -> Result<Gate> {
            let (dx, dy) = if vertical {
                (0.0, GATE_HALF_WIDTH * sc)
            } else {
                (GATE_HALF_WIDTH * sc, 0.0)
            };
            Ok(Gate {
                a: geo::unproject_local(
                    self.origin,
                    PlanarPoint::new(center.0 * sc - dx, center.1 * sc - dy),
                )?,
                b: geo::unproject_local(
                    self.origin,
                    PlanarPoint::new(center.0 * sc + dx, center.1 * sc + dy),
                )?,
            })
        };
        Ok(GateSet {
            s: gate(S_MID, false)?, // crossed heading north: horizontal line
            g1: gate(G1_MID, true)?,
            g2: gate(G2_MID, false)?,
            g3: gate(G3_MID, true)?,
            g4: gate(G4_MID, true)?,
            p: gate(P_MID, true)?,
        })
    }

    fn bout_duration_s(&self) -> f64 {
        MAT_LEN * self.course_scale / self.shooting_speed_mps
    }

    fn bout_z(&self, bout_index: usize) -> f64 {
        if self.bout_z_accel_g.is_empty() {
            if bout_index % 2 == 0 {
                0.33
            } else {
                -0.03
            }
        } else {
            self.bout_z_accel_g[bout_index]
        }
    }
}

/// The biathlon movement grammar matching the generator's course: the nine
/// nodes, eleven temporal dependencies, and duration windows derived from
/// the plan's speeds so that only same-lap transitions are admissible.
/// The start edge keeps the classic 60 s rule that rejects warm-up line
/// crossings.
pub fn biathlon_grammar(plan: &TrackPlan) -> Result<MovementGraph> {
    plan.validate()?;
    let gates = plan.gate_set()?;
    let v = plan.base_speed_mps;
    let sc = plan.course_scale;
    let ms = |seconds: f64| -> u64 { (seconds * 1000.0).round() as u64 };
    let travel = |dist: f64| dist * sc / v;

    if travel(DIST_S_UE) * 1.25 > 60.0 {
        return Err(Error::InvalidPlan {
            reason: "start spur slower than the 60 s start-to-uphill rule allows".into(),
        });
    }
    let bout_s = plan.bout_duration_s();

    let gate_trigger =
        |g: &Gate| TriggerSpec::gate("position", (g.a, g.b), GateDirection::Any);

    MovementGraph::builder()
        .node("S", "Start", true, false, gate_trigger(&gates.s))
        .node("UE", "Enter uphill", false, false, gate_trigger(&gates.g1))
        .node("UL", "Exit uphill", false, false, gate_trigger(&gates.g2))
        .node("RE", "Enter shooting range", false, false, gate_trigger(&gates.g3))
        .node(
            "SS",
            "Start shooting",
            false,
            false,
            TriggerSpec::edge("speed", SPEED_TRIGGER_MPS, EdgeDirection::Falling),
        )
        .node(
            "SF",
            "Finish shooting",
            false,
            false,
            TriggerSpec::edge("speed", SPEED_TRIGGER_MPS, EdgeDirection::Rising),
        )
        .node("RL", "Leave shooting range", false, false, gate_trigger(&gates.g4))
        .node("P", "Penalty round", false, false, gate_trigger(&gates.p))
        .node("F", "Finish", false, true, gate_trigger(&gates.s))
        .edge_bounded("S", "UE", None, Some(60_000))
        .edge_bounded("UE", "UL", None, Some(ms(travel(DIST_UE_UL) * 1.8)))
        .edge_bounded("UL", "RE", None, Some(ms(travel(DIST_UL_RE) * 1.8)))
        .edge_bounded("UL", "F", None, Some(ms(travel(DIST_UL_F) * 1.8)))
        .edge_bounded("RE", "SS", None, Some(ms(travel(DIST_RE_SS) * 1.8)))
        .edge_bounded("RE", "RL", None, Some(ms(travel(DIST_RE_RL_PASS) * 1.5)))
        .edge_bounded("SS", "SF", None, Some(ms(bout_s * 1.5)))
        .edge_bounded("SF", "RL", None, Some(ms(travel(DIST_SF_RL) * 1.8)))
        .edge_bounded("RL", "P", None, Some(ms(travel(DIST_RL_P) * 2.0)))
        .edge_bounded("P", "P", None, Some(ms(travel(LOOP_LEN) * 1.4)))
        .edge_bounded("P", "UE", None, Some(ms(travel(DIST_P_UE) * 1.25)))
        .build()
}

// ---------------------------------------------------------------------------
// Timed path construction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Leg {
    p0: PlanarPoint,
    p1: PlanarPoint,
    t0_s: f64,
    t1_s: f64,
    speed: f64,
}

#[derive(Debug, Clone, Copy)]
struct Bout {
    t0_s: f64,
    t1_s: f64,
    z_g: f64,
}

#[derive(Debug, Default)]
struct Timeline {
    legs: Vec<Leg>,
    bouts: Vec<Bout>,
    /// Planned path steps (node, exact time).
    markers: Vec<(String, f64)>,
    end_s: f64,
}

struct CourseBuilder {
    t: f64,
    pos: PlanarPoint,
    timeline: Timeline,
}

impl CourseBuilder {
    fn new(start: PlanarPoint) -> Self {
        CourseBuilder {
            t: 0.0,
            pos: start,
            timeline: Timeline::default(),
        }
    }

    fn wait_until(&mut self, t_s: f64) {
        if t_s <= self.t {
            return;
        }
        self.timeline.legs.push(Leg {
            p0: self.pos,
            p1: self.pos,
            t0_s: self.t,
            t1_s: t_s,
            speed: 0.0,
        });
        self.t = t_s;
    }

    fn go(&mut self, to: PlanarPoint, speed: f64) {
        let dist = ((to.x - self.pos.x).powi(2) + (to.y - self.pos.y).powi(2)).sqrt();
        if dist == 0.0 {
            return;
        }
        let t1 = self.t + dist / speed;
        self.timeline.legs.push(Leg {
            p0: self.pos,
            p1: to,
            t0_s: self.t,
            t1_s: t1,
            speed,
        });
        self.pos = to;
        self.t = t1;
    }

    fn go_mark(&mut self, to: PlanarPoint, speed: f64, node: &str) {
        self.go(to, speed);
        self.timeline.markers.push((node.to_string(), self.t));
    }

    fn mark(&mut self, node: &str) {
        self.timeline.markers.push((node.to_string(), self.t));
    }

    fn finish(mut self) -> Timeline {
        self.timeline.end_s = self.t;
        self.timeline
    }
}

fn build_race_timeline(plan: &TrackPlan) -> Timeline {
    let sc = plan.course_scale;
    let v = plan.base_speed_mps;
    let at = |p: (f64, f64)| scaled(p, sc);

    let mut c = CourseBuilder::new(at(PEN));
    c.wait_until(plan.race_start_s);
    c.go_mark(at(S_MID), v, "S");
    c.go(at(C_D), v);

    let mut bout_index = 0usize;
    for lap in 1..=plan.lap_count {
        c.go_mark(at(G1_MID), v, "UE");
        c.go(at(C_A), v);
        c.go_mark(at(G2_MID), v, "UL");
        if lap == plan.lap_count {
            c.go(at(F_T1), v);
            c.go(at(F_T2), v);
            c.go_mark(at(S_MID), v, "F");
            c.go(at(PEN), v);
            break;
        }
        c.go(at(C_B), v);
        c.go_mark(at(G3_MID), v, "RE");
        c.go(at(MAT_IN), v);
        if plan.shooting_laps.contains(&lap) {
            c.mark("SS");
            let t0 = c.t;
            c.go(at(MAT_OUT), plan.shooting_speed_mps);
            c.mark("SF");
            c.timeline.bouts.push(Bout {
                t0_s: t0,
                t1_s: c.t,
                z_g: plan.bout_z(bout_index),
            });
            bout_index += 1;
        } else {
            c.go(at(MAT_OUT), v);
        }
        c.go_mark(at(G4_MID), v, "RL");
        c.go_mark(at(P_MID), v, "P");
        c.go(at(P_EXIT), v);
        let penalties = plan
            .shooting_laps
            .iter()
            .position(|&l| l == lap)
            .map(|i| plan.penalties_per_bout[i])
            .unwrap_or(0);
        for _ in 0..penalties {
            c.go(at(LOOP_1), v);
            c.go(at(LOOP_2), v);
            c.go(at(LOOP_3), v);
            c.go_mark(at(P_MID), v, "P");
            c.go(at(P_EXIT), v);
        }
        c.go(at(C_C), v);
        c.go(at(C_D), v);
    }
    let stop = c.t;
    c.wait_until(stop + TAIL_STANDSTILL_S);
    c.finish()
}

// ---------------------------------------------------------------------------
// Ground-truth events
// ---------------------------------------------------------------------------

/// Gate crossings of the continuous timed path, computed geometrically.
/// Each leg owns the half-open parameter range [0, 1) so a path vertex that
/// sits exactly on a gate line counts once.
fn gate_crossings(legs: &[Leg], gate: (PlanarPoint, PlanarPoint)) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, leg) in legs.iter().enumerate() {
        if leg.speed == 0.0 {
            continue;
        }
        let hit = geo::segment_intersection(&SegmentPair {
            a1: leg.p0,
            a2: leg.p1,
            b1: gate.0,
            b2: gate.1,
        });
        if let Some(hit) = hit {
            if hit.u >= 1.0 && i + 1 != legs.len() {
                continue;
            }
            out.push(leg.t0_s + hit.u * (leg.t1_s - leg.t0_s));
        }
    }
    out
}

/// Speed-threshold transitions between consecutive legs (standstill counts
/// as zero speed before and after the path).
fn speed_edges(legs: &[Leg], end_s: f64) -> (Vec<f64>, Vec<f64>) {
    let mut profile: Vec<(f64, f64)> = Vec::new(); // (time, new speed)
    let mut prev_speed = 0.0f64;
    for leg in legs {
        if leg.speed != prev_speed {
            profile.push((leg.t0_s, leg.speed));
            prev_speed = leg.speed;
        }
    }
    if prev_speed != 0.0 {
        profile.push((end_s, 0.0));
    }
    let mut falling = Vec::new();
    let mut rising = Vec::new();
    let mut current = 0.0f64;
    for (t, next) in profile {
        if current >= SPEED_TRIGGER_MPS && next < SPEED_TRIGGER_MPS {
            falling.push(t);
        } else if current < SPEED_TRIGGER_MPS && next >= SPEED_TRIGGER_MPS {
            rising.push(t);
        }
        current = next;
    }
    (falling, rising)
}

fn to_ms(t_s: f64) -> u64 {
    (t_s * 1000.0).round() as u64
}

fn ground_truth(plan: &TrackPlan, timeline: &Timeline) -> Result<GroundTruth> {
    let gates = plan.gate_set()?;
    let project_gate = |g: &Gate| -> Result<(PlanarPoint, PlanarPoint)> {
        Ok((
            geo::project_local(plan.origin, g.a)?,
            geo::project_local(plan.origin, g.b)?,
        ))
    };

    let mut pois: Vec<ExpectedEvent> = Vec::new();
    let node_gates: [(&str, &Gate); 7] = [
        ("S", &gates.s),
        ("UE", &gates.g1),
        ("UL", &gates.g2),
        ("RE", &gates.g3),
        ("RL", &gates.g4),
        ("P", &gates.p),
        ("F", &gates.s), // finish shares the start line
    ];
    for (node, gate) in node_gates {
        for t in gate_crossings(&timeline.legs, project_gate(gate)?) {
            pois.push(ExpectedEvent {
                node: node.to_string(),
                t_ms: to_ms(t),
            });
        }
    }
    let (falling, rising) = speed_edges(&timeline.legs, timeline.end_s);
    for t in falling {
        pois.push(ExpectedEvent {
            node: "SS".to_string(),
            t_ms: to_ms(t),
        });
    }
    for t in rising {
        pois.push(ExpectedEvent {
            node: "SF".to_string(),
            t_ms: to_ms(t),
        });
    }
    pois.sort_by(|a, b| (a.t_ms, &a.node).cmp(&(b.t_ms, &b.node)));

    let expected_steps: Vec<ExpectedEvent> = timeline
        .markers
        .iter()
        .map(|(node, t)| ExpectedEvent {
            node: node.clone(),
            t_ms: to_ms(*t),
        })
        .collect();

    // every planned step must be backed by a planted event; a mismatch means
    // the course geometry no longer matches the gate set
    for step in &expected_steps {
        let backed = pois
            .iter()
            .any(|p| p.node == step.node && p.t_ms.abs_diff(step.t_ms) <= 1);
        if !backed {
            return Err(Error::InvalidPlan {
                reason: format!(
                    "course does not cross the '{}' trigger at the planned moment {} ms; \
                     check the gate layout",
                    step.node, step.t_ms
                ),
            });
        }
    }
    // and the interior gates must not be crossed anywhere else
    for node in ["UE", "UL", "RE", "RL", "P"] {
        let events = pois.iter().filter(|p| p.node == node).count();
        let planned = expected_steps.iter().filter(|s| s.node == node).count();
        if events != planned {
            return Err(Error::InvalidPlan {
                reason: format!(
                    "course crosses the '{node}' gate {events} times but the plan expects {planned}"
                ),
            });
        }
    }

    let expected_sequence: Vec<String> =
        expected_steps.iter().map(|e| e.node.clone()).collect();
    let expected_segment_durations_ms: Vec<u64> = expected_steps
        .windows(2)
        .map(|w| w[1].t_ms - w[0].t_ms)
        .collect();

    Ok(GroundTruth {
        expected_pois: pois,
        expected_steps,
        expected_sequence,
        expected_segment_durations_ms,
    })
}

// ---------------------------------------------------------------------------
// Channel sampling
// ---------------------------------------------------------------------------

/// Box–Muller on top of a seeded stream.
struct Gauss {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Gauss {
    fn new(rng: ChaCha8Rng) -> Self {
        Gauss { rng, spare: None }
    }

    fn next(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        let mut u1: f64 = self.rng.gen();
        while u1 <= f64::MIN_POSITIVE {
            u1 = self.rng.gen();
        }
        let u2: f64 = self.rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Independent noise streams for the race section and the pre-race window,
/// so that replacing the pre-race window never disturbs race samples.
fn channel_rng(seed: u64, tag: u64, prefix: bool) -> Gauss {
    let mut s = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    if prefix {
        s ^= 0xD6E8_FEB8_6659_FD93;
    }
    Gauss::new(ChaCha8Rng::seed_from_u64(s))
}

struct PathSampler<'a> {
    legs: &'a [Leg],
    cursor: usize,
}

impl<'a> PathSampler<'a> {
    fn new(legs: &'a [Leg]) -> Self {
        PathSampler { legs, cursor: 0 }
    }

    fn leg_at(&mut self, t_s: f64) -> Option<&'a Leg> {
        while self.cursor < self.legs.len() && self.legs[self.cursor].t1_s <= t_s {
            self.cursor += 1;
        }
        self.legs.get(self.cursor)
    }

    fn position(&mut self, t_s: f64) -> PlanarPoint {
        match self.leg_at(t_s) {
            Some(leg) => {
                let span = leg.t1_s - leg.t0_s;
                let frac = if span > 0.0 {
                    ((t_s - leg.t0_s) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                PlanarPoint::new(
                    leg.p0.x + frac * (leg.p1.x - leg.p0.x),
                    leg.p0.y + frac * (leg.p1.y - leg.p0.y),
                )
            }
            None => self.legs.last().map(|l| l.p1).unwrap_or(PlanarPoint::new(0.0, 0.0)),
        }
    }

    fn speed(&mut self, t_s: f64) -> f64 {
        self.leg_at(t_s).map(|l| l.speed).unwrap_or(0.0)
    }
}

fn sample_times(rate_hz: f64, duration_ms: u64) -> impl Iterator<Item = u64> {
    let period = 1000.0 / rate_hz;
    (0u64..)
        .map(move |k| (k as f64 * period).round() as u64)
        .take_while(move |t| *t < duration_ms)
}

/// Samples all four channels of a timeline. Samples before the race start
/// draw noise from the pre-race streams, the rest from the race streams.
fn sample_channels(
    plan: &TrackPlan,
    timeline: &Timeline,
    duration_ms: u64,
) -> Result<Vec<(String, Channel)>> {
    let race_start_ms = to_ms(plan.race_start_s);
    let is_prefix = |t_ms: u64| t_ms < race_start_ms;

    // position: Gauss-Markov noise, one independent walk per window
    let mut position = Channel::new(ChannelKind::Position, plan.gnss_rate_hz)?;
    {
        let sigma = plan.noise.position_sigma_m;
        let dt_s = 1.0 / plan.gnss_rate_hz;
        let alpha = (-dt_s / NOISE_CORRELATION_S).exp();
        let step = sigma * (1.0 - alpha * alpha).sqrt();
        let mut sampler = PathSampler::new(&timeline.legs);
        let mut streams = [
            (channel_rng(plan.noise_seed, 1, true), None::<(f64, f64)>),
            (channel_rng(plan.noise_seed, 1, false), None),
        ];
        for t_ms in sample_times(plan.gnss_rate_hz, duration_ms) {
            let p = sampler.position(t_ms as f64 / 1000.0);
            let (x, y) = if sigma > 0.0 {
                let (gauss, state) = &mut streams[usize::from(!is_prefix(t_ms))];
                let (nx, ny) = match state {
                    Some((sx, sy)) => {
                        let nx = alpha * *sx + step * gauss.next();
                        let ny = alpha * *sy + step * gauss.next();
                        (nx, ny)
                    }
                    None => (sigma * gauss.next(), sigma * gauss.next()),
                };
                *state = Some((nx, ny));
                (p.x + nx, p.y + ny)
            } else {
                (p.x, p.y)
            };
            position.push(
                Timestamp::from_ms(t_ms),
                SampleValue::Position(geo::unproject_local(
                    plan.origin,
                    PlanarPoint::new(x, y),
                )?),
            )?;
        }
    }

    // speed: white noise, clamped at zero
    let mut speed = Channel::new(ChannelKind::Speed, plan.gnss_rate_hz)?;
    {
        let sigma = plan.noise.speed_sigma_mps;
        let mut sampler = PathSampler::new(&timeline.legs);
        let mut pre = channel_rng(plan.noise_seed, 2, true);
        let mut race = channel_rng(plan.noise_seed, 2, false);
        for t_ms in sample_times(plan.gnss_rate_hz, duration_ms) {
            let mut v = sampler.speed(t_ms as f64 / 1000.0);
            if sigma > 0.0 {
                let g = if is_prefix(t_ms) { &mut pre } else { &mut race };
                v = (v + sigma * g.next()).max(0.0);
            }
            speed.push(Timestamp::from_ms(t_ms), SampleValue::Scalar(v))?;
        }
    }

    // accel: flat x/y, planted z profile (1 G upright, bout value while
    // shooting)
    let mut accel = Channel::new(ChannelKind::Accel, plan.imu_rate_hz)?;
    {
        let sigma = plan.noise.accel_sigma_g;
        let mut pre = channel_rng(plan.noise_seed, 3, true);
        let mut race = channel_rng(plan.noise_seed, 3, false);
        let mut bout_cursor = 0usize;
        for t_ms in sample_times(plan.imu_rate_hz, duration_ms) {
            let t_s = t_ms as f64 / 1000.0;
            while bout_cursor < timeline.bouts.len() && timeline.bouts[bout_cursor].t1_s <= t_s {
                bout_cursor += 1;
            }
            let z_base = match timeline.bouts.get(bout_cursor) {
                Some(b) if b.t0_s <= t_s && t_s < b.t1_s => b.z_g,
                _ => 1.0,
            };
            let v = if sigma > 0.0 {
                let g = if is_prefix(t_ms) { &mut pre } else { &mut race };
                [sigma * g.next(), sigma * g.next(), z_base + sigma * g.next()]
            } else {
                [0.0, 0.0, z_base]
            };
            accel.push(Timestamp::from_ms(t_ms), SampleValue::Vector3(v))?;
        }
    }

    // gyro: white noise around zero
    let mut gyro = Channel::new(ChannelKind::Gyro, plan.imu_rate_hz)?;
    {
        let sigma = plan.noise.gyro_sigma_dps;
        let mut pre = channel_rng(plan.noise_seed, 4, true);
        let mut race = channel_rng(plan.noise_seed, 4, false);
        for t_ms in sample_times(plan.imu_rate_hz, duration_ms) {
            let v = if sigma > 0.0 {
                let g = if is_prefix(t_ms) { &mut pre } else { &mut race };
                [sigma * g.next(), sigma * g.next(), sigma * g.next()]
            } else {
                [0.0, 0.0, 0.0]
            };
            gyro.push(Timestamp::from_ms(t_ms), SampleValue::Vector3(v))?;
        }
    }

    Ok(vec![
        ("position".to_string(), position),
        ("speed".to_string(), speed),
        ("accel".to_string(), accel),
        ("gyro".to_string(), gyro),
    ])
}

/// Generates one recording and its ground truth from a plan. The same plan
/// (including the seed) always produces the identical recording.
pub fn generate(plan: &TrackPlan) -> Result<(Recording, GroundTruth)> {
    plan.validate()?;
    let timeline = build_race_timeline(plan);
    let truth = ground_truth(plan, &timeline)?;

    let duration_ms = (timeline.end_s.ceil() as u64) * 1000;
    let mut recording = Recording::new(format!(
        "synth-biathlon-{}laps-seed{}",
        plan.lap_count, plan.noise_seed
    ));
    for (name, channel) in sample_channels(plan, &timeline, duration_ms)? {
        recording.insert_channel(name, channel)?;
    }
    Ok((recording, truth))
}

/// Replaces the pre-race standstill of `recording` with warm-up motion that
/// crosses the start line at exactly the requested moments (and sidesteps
/// around the narrow gate on the way back, so the crossing count is exact).
/// Race-section samples are copied over untouched: recognizing the injected
/// recording with a start-window constraint must give the same result as
/// the clean one. No crossings requested returns the recording unchanged.
pub fn inject_warmup_crossings(
    recording: &Recording,
    plan: &TrackPlan,
    crossing_times_s: &[f64],
) -> Result<Recording> {
    plan.validate()?;
    if crossing_times_s.is_empty() {
        return Ok(recording.clone());
    }
    for &t in crossing_times_s {
        if t >= plan.race_start_s {
            return Err(Error::WarmupAfterRaceStart {
                crossing_s: t,
                race_start_s: plan.race_start_s,
            });
        }
    }
    let first = crossing_times_s[0];
    if first < 10.0 {
        return Err(Error::InvalidPlan {
            reason: "first warm-up crossing must be at least 10 s into the recording".into(),
        });
    }
    for w in crossing_times_s.windows(2) {
        if w[1] - w[0] < 5.0 {
            return Err(Error::InvalidPlan {
                reason: "warm-up crossings need at least 5 s spacing".into(),
            });
        }
    }
    let last = *crossing_times_s.last().unwrap();
    if last + 15.0 > plan.race_start_s {
        return Err(Error::InvalidPlan {
            reason: "warm-up must end at least 15 s before the race start".into(),
        });
    }

    let sc = plan.course_scale;
    let pen = scaled(PEN, sc);
    let gates = plan.gate_set()?;
    let s_a = geo::project_local(plan.origin, gates.s.a)?;
    let s_b = geo::project_local(plan.origin, gates.s.b)?;
    let s_mid = PlanarPoint::new((s_a.x + s_b.x) / 2.0, (s_a.y + s_b.y) / 2.0);

    // approach axis: from the pen through the line
    let (dx, dy) = (s_mid.x - pen.x, s_mid.y - pen.y);
    let len = (dx * dx + dy * dy).sqrt();
    let (ux, uy) = (dx / len, dy / len);
    let reach = GATE_HALF_WIDTH * sc;
    let below = PlanarPoint::new(s_mid.x - ux * reach, s_mid.y - uy * reach);
    let above = PlanarPoint::new(s_mid.x + ux * reach, s_mid.y + uy * reach);
    // sidestep goes around the end of the line segment
    let side = 2.0 * GATE_HALF_WIDTH * sc;
    let offset = |p: PlanarPoint| PlanarPoint::new(p.x + -uy * side, p.y + ux * side);
    let dash_speed = reach; // 2 * reach meters in 2 seconds

    let mut c = CourseBuilder::new(pen);
    c.wait_until(first - 1.0 - len / dash_speed);
    c.go(below, dash_speed);
    let mut above_line = false;
    for &w in crossing_times_s {
        c.wait_until(w - 1.0);
        c.go(if above_line { below } else { above }, dash_speed);
        above_line = !above_line;
    }
    if above_line {
        c.go(offset(above), dash_speed);
        c.go(offset(below), dash_speed);
    }
    c.go(pen, dash_speed);
    c.wait_until(plan.race_start_s);
    let warmup = c.finish();

    let race_start_ms = to_ms(plan.race_start_s);
    let prefix_channels = sample_channels(plan, &warmup, race_start_ms)?;

    let mut out = Recording::new(format!("{}+warmup", recording.id()));
    for (name, prefix) in prefix_channels {
        let original = recording.require_channel(&name)?;
        let mut merged = Channel::new(original.kind(), original.nominal_rate_hz())?;
        for sample in prefix.samples() {
            merged.push(sample.t, sample.value)?;
        }
        for sample in original.samples() {
            if sample.t.as_ms() >= race_start_ms {
                merged.push(sample.t, sample.value)?;
            }
        }
        out.insert_channel(name, merged)?;
    }
    // any extra channels pass through untouched
    for (name, channel) in recording.channels() {
        if out.channel(name).is_none() {
            out.insert_channel(name, channel.clone())?;
        }
    }
    Ok(out)
}
