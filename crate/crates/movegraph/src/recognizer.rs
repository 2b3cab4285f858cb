//! Matching the automaton against the point-of-interest stream.
//!
//! The search starts at every firing of a start node and explores forward:
//! from the state reached at time `t1`, every *later* firing that labels an
//! explicit transition whose duration window admits `t2 - t1` opens a
//! branch. Firings without an explicit transition are simply skipped (the
//! automaton's no-effect rule), which is why a false early firing cannot
//! block the real one behind it. Every arrival in an accepting state records
//! the path walked so far as a [`PartialSolution`]; the result is the full
//! set of grammar paths matched against increasing sub-sequences of the
//! stream, deduplicated.
//!
//! Partial solutions are then combined into every temporally valid
//! non-overlapping subset ([`combine`]) and ranked ([`rank`]). Ranking
//! maximizes covered duration first and the number of partial solutions
//! second: maximizing count alone promotes fragmented matches built from
//! false firings, while coverage alone cannot separate candidates with
//! equal span. Remaining ties fall through a deterministic chain (earliest
//! start, most steps, node sequence, timestamps), so the winner never
//! depends on enumeration order.
//!
//! Exploration is bounded: pathological grammars (dense graphs without
//! duration windows) can make either stage exponential, so both carry a
//! configurable explored-state cap and report an error when they hit it.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grammar::{compile, Automaton, MovementGraph};
use crate::timeseries::{Recording, Timestamp};
use crate::triggers::{run_triggers, PointOfInterest};

/// One consumed firing in a matched path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathStep {
    pub node: String,
    pub t: Timestamp,
}

impl PathStep {
    pub fn new(node: impl Into<String>, t: Timestamp) -> Self {
        PathStep {
            node: node.into(),
            t,
        }
    }
}

impl Ord for PathStep {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.t, &self.node).cmp(&(other.t, &other.node))
    }
}

impl PartialOrd for PathStep {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for PathStep {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("PathStep", 2)?;
        s.serialize_field("node", &self.node)?;
        s.serialize_field("t_ms", &self.t.as_ms())?;
        s.end()
    }
}

/// One matched start-to-finish path with its consumed firing times.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PartialSolution {
    steps: Vec<PathStep>,
}

impl PartialSolution {
    /// Steps must be non-empty and non-decreasing in time. Whether the steps
    /// follow grammar edges is checked separately by [`validate_against`].
    ///
    /// [`validate_against`]: PartialSolution::validate_against
    pub fn new(steps: Vec<PathStep>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidSolution {
                reason: "empty step list".to_string(),
            });
        }
        if steps.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::InvalidSolution {
                reason: "steps decrease in time".to_string(),
            });
        }
        Ok(PartialSolution { steps })
    }

    pub fn steps(&self) -> &[PathStep] {
        &self.steps
    }

    pub fn start_t(&self) -> Timestamp {
        self.steps.first().expect("non-empty").t
    }

    pub fn end_t(&self) -> Timestamp {
        self.steps.last().expect("non-empty").t
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_t().millis_since(self.start_t())
    }

    pub fn node_sequence(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.node.as_str()).collect()
    }

    /// Re-checks this solution independently of the search that produced it:
    /// first node is a start, last is a finish, every consecutive pair is an
    /// explicit graph edge, and every duration bound holds.
    pub fn validate_against(&self, graph: &MovementGraph) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidSolution { reason });
        let first = &self.steps[0];
        let last = &self.steps[self.steps.len() - 1];
        match graph.node(&first.node) {
            Some(n) if n.is_start => {}
            _ => return fail(format!("first node '{}' is not a start node", first.node)),
        }
        match graph.node(&last.node) {
            Some(n) if n.is_finish => {}
            _ => return fail(format!("last node '{}' is not a finish node", last.node)),
        }
        for w in self.steps.windows(2) {
            let bounds = match graph.edge_bounds(&w[0].node, &w[1].node) {
                Some(b) => b,
                None => {
                    return fail(format!(
                        "no edge {} -> {} in the grammar",
                        w[0].node, w[1].node
                    ))
                }
            };
            let dt = w[1].t.millis_since(w[0].t);
            if !bounds.admits(dt) {
                return fail(format!(
                    "edge {} -> {} traversed in {} ms outside its bounds",
                    w[0].node, w[1].node, dt
                ));
            }
        }
        Ok(())
    }
}

impl Serialize for PartialSolution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("PartialSolution", 1)?;
        s.serialize_field("steps", &self.steps)?;
        s.end()
    }
}

/// An ordered set of non-overlapping partial solutions. The empty value is
/// the distinguished "nothing recognized" result.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct TotalSolution {
    parts: Vec<PartialSolution>,
}

impl TotalSolution {
    /// Parts are sorted by start time; consecutive parts may share a
    /// boundary timestamp but must not overlap.
    pub fn new(mut parts: Vec<PartialSolution>) -> Result<Self> {
        parts.sort();
        for w in parts.windows(2) {
            if w[0].end_t() > w[1].start_t() {
                return Err(Error::InvalidSolution {
                    reason: format!(
                        "parts overlap: [{}, {}] and [{}, {}]",
                        w[0].start_t(),
                        w[0].end_t(),
                        w[1].start_t(),
                        w[1].end_t()
                    ),
                });
            }
        }
        Ok(TotalSolution { parts })
    }

    pub fn empty() -> Self {
        TotalSolution::default()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn parts(&self) -> &[PartialSolution] {
        &self.parts
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    /// Sum of part durations in milliseconds.
    pub fn covered_ms(&self) -> u64 {
        self.parts.iter().map(PartialSolution::duration_ms).sum()
    }

    pub fn start_t(&self) -> Option<Timestamp> {
        self.parts.first().map(PartialSolution::start_t)
    }

    pub fn total_steps(&self) -> usize {
        self.parts.iter().map(|p| p.steps().len()).sum()
    }

    /// Node ids of all steps, parts concatenated in order.
    pub fn node_sequence(&self) -> Vec<&str> {
        self.parts
            .iter()
            .flat_map(|p| p.steps().iter().map(|s| s.node.as_str()))
            .collect()
    }

    fn timestamps(&self) -> Vec<Timestamp> {
        self.parts
            .iter()
            .flat_map(|p| p.steps().iter().map(|s| s.t))
            .collect()
    }
}

impl Serialize for TotalSolution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("TotalSolution", 3)?;
        s.serialize_field("parts", &self.parts)?;
        s.serialize_field("covered_ms", &self.covered_ms())?;
        s.serialize_field("part_count", &self.part_count())?;
        s.end()
    }
}

/// Exploration limits for the search and combination stages.
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub max_explored_states: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_explored_states: 1_000_000,
        }
    }
}

/// Finds every partial solution in the stream (see module docs).
/// `pois` must be sorted by time. An empty stream yields an empty result.
pub fn find_partial_solutions(
    automaton: &Automaton,
    pois: &[PointOfInterest],
) -> Result<Vec<PartialSolution>> {
    find_partial_solutions_with(automaton, pois, &SearchOptions::default())
}

pub fn find_partial_solutions_with(
    automaton: &Automaton,
    pois: &[PointOfInterest],
    options: &SearchOptions,
) -> Result<Vec<PartialSolution>> {
    debug_assert!(pois.windows(2).all(|w| w[0].t <= w[1].t));
    let mut ctx = SearchCtx {
        automaton,
        pois,
        explored: 0,
        cap: options.max_explored_states,
        found: BTreeSet::new(),
        path: Vec::new(),
    };
    for (idx, poi) in pois.iter().enumerate() {
        if automaton.is_start(&poi.node) {
            ctx.path.push(PathStep::new(poi.node.clone(), poi.t));
            ctx.explore(&poi.node, idx)?;
            ctx.path.pop();
        }
    }
    Ok(ctx.found.into_iter().collect())
}

struct SearchCtx<'a> {
    automaton: &'a Automaton,
    pois: &'a [PointOfInterest],
    explored: u64,
    cap: u64,
    found: BTreeSet<PartialSolution>,
    path: Vec<PathStep>,
}

impl SearchCtx<'_> {
    fn explore(&mut self, state: &str, idx: usize) -> Result<()> {
        self.explored += 1;
        if self.explored > self.cap {
            return Err(Error::CapExceeded {
                stage: "partial-solution search",
                explored: self.explored,
                cap: self.cap,
            });
        }
        if self.automaton.is_accepting(state) {
            self.found
                .insert(PartialSolution::new(self.path.clone()).expect("search path is ordered"));
        }
        let t_here = self.pois[idx].t;
        for j in idx + 1..self.pois.len() {
            let candidate = &self.pois[j];
            let bounds = match self.automaton.transition(state, &candidate.node) {
                Some(b) => b,
                None => continue, // no effect, skip over it
            };
            if !bounds.admits(candidate.t.millis_since(t_here)) {
                continue;
            }
            self.path.push(PathStep::new(candidate.node.clone(), candidate.t));
            self.explore(&candidate.node, j)?;
            self.path.pop();
        }
        Ok(())
    }
}

/// All temporally valid combinations of partial solutions: every non-empty
/// subset whose parts, sorted by start time, never overlap (a shared
/// boundary timestamp is allowed). Timestamps are fixed; nothing shifts on
/// the time axis. Every single part is itself a valid combination.
pub fn combine(parts: &[PartialSolution]) -> Result<Vec<TotalSolution>> {
    combine_with(parts, &SearchOptions::default())
}

pub fn combine_with(
    parts: &[PartialSolution],
    options: &SearchOptions,
) -> Result<Vec<TotalSolution>> {
    let mut sorted: Vec<&PartialSolution> = parts.iter().collect();
    sorted.sort();
    let mut ctx = CombineCtx {
        sorted: &sorted,
        explored: 0,
        cap: options.max_explored_states,
        current: Vec::new(),
        out: Vec::new(),
    };
    ctx.enumerate(0)?;
    Ok(ctx.out)
}

struct CombineCtx<'a> {
    sorted: &'a [&'a PartialSolution],
    explored: u64,
    cap: u64,
    current: Vec<PartialSolution>,
    out: Vec<TotalSolution>,
}

impl CombineCtx<'_> {
    fn enumerate(&mut self, idx: usize) -> Result<()> {
        self.explored += 1;
        if self.explored > self.cap {
            return Err(Error::CapExceeded {
                stage: "solution combination",
                explored: self.explored,
                cap: self.cap,
            });
        }
        if idx == self.sorted.len() {
            if !self.current.is_empty() {
                self.out.push(TotalSolution {
                    parts: self.current.clone(),
                });
            }
            return Ok(());
        }
        let part = self.sorted[idx];
        // include (parts are start-sorted, so checking the last included
        // part is enough for pairwise non-overlap)
        let compatible = self
            .current
            .last()
            .is_none_or(|last| last.end_t() <= part.start_t());
        if compatible {
            self.current.push(part.clone());
            self.enumerate(idx + 1)?;
            self.current.pop();
        }
        // skip
        self.enumerate(idx + 1)
    }
}

/// How candidates are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankStrategy {
    /// Maximize the summed duration of the parts.
    CoveredDuration,
    /// Maximize the number of parts. Kept mostly to demonstrate why it is a
    /// poor sole criterion: it promotes fragmented matches.
    PartCount,
    /// Covered duration first, then part count — the default.
    Combined,
}

fn cmp_candidates(
    a: &TotalSolution,
    b: &TotalSolution,
    strategy: RankStrategy,
) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    let primary = match strategy {
        RankStrategy::CoveredDuration => a.covered_ms().cmp(&b.covered_ms()),
        RankStrategy::PartCount => a
            .part_count()
            .cmp(&b.part_count())
            .then(a.covered_ms().cmp(&b.covered_ms())),
        RankStrategy::Combined => a
            .covered_ms()
            .cmp(&b.covered_ms())
            .then(a.part_count().cmp(&b.part_count())),
    };
    // deterministic tail: earlier start, then the longer match, then the
    // smaller node sequence, earlier timestamps, and finally structure
    primary
        .then_with(|| match (a.start_t(), b.start_t()) {
            (Some(sa), Some(sb)) => sb.cmp(&sa),
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
        })
        .then_with(|| a.total_steps().cmp(&b.total_steps()))
        .then_with(|| b.node_sequence().cmp(&a.node_sequence()))
        .then_with(|| b.timestamps().cmp(&a.timestamps()))
        .then_with(|| b.parts.cmp(&a.parts))
}

/// The best candidate under the combined ranking.
pub fn rank(candidates: &[TotalSolution]) -> Result<&TotalSolution> {
    rank_with(candidates, RankStrategy::Combined)
}

pub fn rank_with(
    candidates: &[TotalSolution],
    strategy: RankStrategy,
) -> Result<&TotalSolution> {
    candidates
        .iter()
        .max_by(|a, b| cmp_candidates(a, b, strategy))
        .ok_or(Error::EmptyRankingInput)
}

/// Per-run pipeline counters and stage timings.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub poi_counts: std::collections::BTreeMap<String, usize>,
    pub partial_solution_count: usize,
    pub candidate_count: usize,
    pub trigger_scan: Duration,
    pub graph_search: Duration,
}

#[derive(Debug, Clone, Copy)]
pub struct RecognizeOptions {
    pub search: SearchOptions,
}

impl Default for RecognizeOptions {
    fn default() -> Self {
        RecognizeOptions {
            search: SearchOptions::default(),
        }
    }
}

/// Result of the full pipeline over one recording.
#[derive(Debug, Clone)]
pub struct RecognitionResult {
    pub pois: Vec<PointOfInterest>,
    pub partial_solutions: Vec<PartialSolution>,
    /// Best total solution; empty when nothing was recognized (which is a
    /// valid outcome, not an error).
    pub optimal: TotalSolution,
    pub diagnostics: Diagnostics,
}

impl RecognitionResult {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

impl Serialize for RecognitionResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        // stable wire shape; diagnostics (which contain wall-clock timings)
        // stay out so identical inputs serialize to identical bytes
        let mut map = serializer.serialize_map(Some(3))?;
        map.serialize_entry("pois", &self.pois)?;
        map.serialize_entry("partial_solutions", &self.partial_solutions)?;
        map.serialize_entry("optimal", &self.optimal)?;
        map.end()
    }
}

/// Runs triggers, search, combination and ranking over a recording.
pub fn recognize(
    recording: &Recording,
    graph: &MovementGraph,
    options: &RecognizeOptions,
) -> Result<RecognitionResult> {
    let bindings = graph.bindings();
    let scan_started = Instant::now();
    let pois = run_triggers(recording, &bindings)?;
    let trigger_scan = scan_started.elapsed();

    let automaton = compile(graph);
    let search_started = Instant::now();
    let partial_solutions = find_partial_solutions_with(&automaton, &pois, &options.search)?;
    let candidates = combine_with(&partial_solutions, &options.search)?;
    let optimal = if candidates.is_empty() {
        TotalSolution::empty()
    } else {
        rank(&candidates)?.clone()
    };
    let graph_search = search_started.elapsed();

    let mut poi_counts = std::collections::BTreeMap::new();
    for poi in &pois {
        *poi_counts.entry(poi.node.clone()).or_insert(0) += 1;
    }
    Ok(RecognitionResult {
        diagnostics: Diagnostics {
            poi_counts,
            partial_solution_count: partial_solutions.len(),
            candidate_count: candidates.len(),
            trigger_scan,
            graph_search,
        },
        pois,
        partial_solutions,
        optimal,
    })
}
