//! Movement grammars: directed graphs of points of interest, compiled into
//! a finite automaton for stream matching.
//!
//! Nodes stand for trigger firings (gate crossed, speed edge, peak); a
//! directed edge `A -> B` states that `B` may only follow `A`, optionally
//! within a duration window. The compiled automaton is the five-tuple
//! (states, alphabet, transitions, start states, accepting states),
//! generalized to several start states. Inputs that do not label an
//! outgoing edge of the current state have no effect — the state simply
//! keeps waiting — which is what lets the matcher skip over firings that
//! belong to other parts of the recording.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::GeoPoint;
use crate::triggers::{
    Binding, EdgeDirection, EdgeTriggerSpec, GateDirection, GateTriggerSpec, PeakPolarity,
    PeakTriggerSpec, TriggerSpec,
};

/// A grammar node: one point-of-interest type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: String,
    pub label: String,
    pub is_start: bool,
    pub is_finish: bool,
}

/// A temporal dependency between two nodes, with optional duration bounds
/// in milliseconds. Self-loops are allowed (repeated actions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub min_ms: Option<u64>,
    pub max_ms: Option<u64>,
}

/// Inclusive duration window attached to a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DurationBounds {
    pub min_ms: Option<u64>,
    pub max_ms: Option<u64>,
}

impl DurationBounds {
    pub fn admits(&self, dt_ms: u64) -> bool {
        if let Some(min) = self.min_ms {
            if dt_ms < min {
                return false;
            }
        }
        if let Some(max) = self.max_ms {
            if dt_ms > max {
                return false;
            }
        }
        true
    }
}

/// A validated movement grammar.
#[derive(Debug, Clone, PartialEq)]
pub struct MovementGraph {
    nodes: BTreeMap<String, NodeSpec>,
    edges: Vec<EdgeSpec>,
    bindings: BTreeMap<String, TriggerSpec>,
}

impl MovementGraph {
    /// Builds and validates a graph. Every node needs a trigger binding;
    /// at least one node must be a start and one a finish; edges must
    /// reference defined nodes; a non-finish node without outgoing edges is
    /// a dead end and rejected; two edges between the same pair of nodes
    /// with different bounds would make the transition ambiguous and are
    /// rejected (exact duplicates collapse to one).
    pub fn new(
        nodes: Vec<NodeSpec>,
        edges: Vec<EdgeSpec>,
        bindings: Vec<(String, TriggerSpec)>,
    ) -> Result<Self> {
        let mut node_map: BTreeMap<String, NodeSpec> = BTreeMap::new();
        for node in nodes {
            if node_map.contains_key(&node.id) {
                return Err(Error::DuplicateNodeId(node.id));
            }
            node_map.insert(node.id.clone(), node);
        }

        let mut deduped: Vec<EdgeSpec> = Vec::new();
        for edge in edges {
            for endpoint in [&edge.from, &edge.to] {
                if !node_map.contains_key(endpoint) {
                    return Err(Error::DanglingEdge {
                        from: edge.from.clone(),
                        to: edge.to.clone(),
                        missing: endpoint.clone(),
                    });
                }
            }
            if let (Some(min), Some(max)) = (edge.min_ms, edge.max_ms) {
                if min > max {
                    return Err(Error::InvalidDurationBounds {
                        from: edge.from,
                        to: edge.to,
                        min_ms: min,
                        max_ms: max,
                    });
                }
            }
            match deduped
                .iter()
                .find(|e| e.from == edge.from && e.to == edge.to)
            {
                None => deduped.push(edge),
                Some(existing) if *existing == edge => {} // exact duplicate
                Some(_) => {
                    return Err(Error::AmbiguousTransition {
                        from: edge.from,
                        to: edge.to,
                    })
                }
            }
        }

        if !node_map.values().any(|n| n.is_start) {
            return Err(Error::NoStartNode);
        }
        if !node_map.values().any(|n| n.is_finish) {
            return Err(Error::NoFinishNode);
        }

        let mut binding_map: BTreeMap<String, TriggerSpec> = BTreeMap::new();
        for (node, trigger) in bindings {
            if !node_map.contains_key(&node) {
                return Err(Error::DanglingEdge {
                    from: node.clone(),
                    to: node.clone(),
                    missing: node,
                });
            }
            trigger.validate()?;
            binding_map.insert(node, trigger);
        }
        for id in node_map.keys() {
            if !binding_map.contains_key(id) {
                return Err(Error::MissingTriggerBinding(id.clone()));
            }
        }

        for (id, node) in &node_map {
            if !node.is_finish && !deduped.iter().any(|e| &e.from == id) {
                return Err(Error::DeadEndNode(id.clone()));
            }
        }

        Ok(MovementGraph {
            nodes: node_map,
            edges: deduped,
            bindings: binding_map,
        })
    }

    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[EdgeSpec] {
        &self.edges
    }

    pub fn edge_bounds(&self, from: &str, to: &str) -> Option<DurationBounds> {
        self.edges
            .iter()
            .find(|e| e.from == from && e.to == to)
            .map(|e| DurationBounds {
                min_ms: e.min_ms,
                max_ms: e.max_ms,
            })
    }

    pub fn binding(&self, node: &str) -> Option<&TriggerSpec> {
        self.bindings.get(node)
    }

    /// Bindings in node-id order, ready for the trigger stage.
    pub fn bindings(&self) -> Vec<Binding> {
        self.bindings
            .iter()
            .map(|(node, trigger)| Binding::new(node.clone(), trigger.clone()))
            .collect()
    }

    pub fn start_nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes
            .values()
            .filter(|n| n.is_start)
            .map(|n| n.id.as_str())
    }

    pub fn finish_nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes
            .values()
            .filter(|n| n.is_finish)
            .map(|n| n.id.as_str())
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let config: GrammarConfig = serde_json::from_str(json)?;
        config.into_graph()
    }

    pub fn to_json_string(&self) -> String {
        let config = GrammarConfig::from_graph(self);
        serde_json::to_string_pretty(&config).expect("grammar config serializes")
    }
}

/// Parses and validates a grammar config file (JSON).
pub fn parse_grammar(path: impl AsRef<Path>) -> Result<MovementGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    MovementGraph::from_json_str(&text)
}

/// Fluent construction for programmatic grammars.
#[derive(Default)]
pub struct GraphBuilder {
    nodes: Vec<NodeSpec>,
    edges: Vec<EdgeSpec>,
    bindings: Vec<(String, TriggerSpec)>,
}

impl GraphBuilder {
    pub fn node(
        mut self,
        id: &str,
        label: &str,
        is_start: bool,
        is_finish: bool,
        trigger: TriggerSpec,
    ) -> Self {
        self.nodes.push(NodeSpec {
            id: id.to_string(),
            label: label.to_string(),
            is_start,
            is_finish,
        });
        self.bindings.push((id.to_string(), trigger));
        self
    }

    pub fn edge(mut self, from: &str, to: &str) -> Self {
        self.edges.push(EdgeSpec {
            from: from.to_string(),
            to: to.to_string(),
            min_ms: None,
            max_ms: None,
        });
        self
    }

    pub fn edge_bounded(
        mut self,
        from: &str,
        to: &str,
        min_ms: Option<u64>,
        max_ms: Option<u64>,
    ) -> Self {
        self.edges.push(EdgeSpec {
            from: from.to_string(),
            to: to.to_string(),
            min_ms,
            max_ms,
        });
        self
    }

    pub fn build(self) -> Result<MovementGraph> {
        MovementGraph::new(self.nodes, self.edges, self.bindings)
    }
}

/// The compiled automaton: node ids as states, point-of-interest node ids
/// as the input alphabet, explicit transitions only where the graph has an
/// edge. Any other input self-loops (no effect).
#[derive(Debug, Clone, PartialEq)]
pub struct Automaton {
    states: BTreeSet<String>,
    start_states: BTreeSet<String>,
    accepting: BTreeSet<String>,
    transitions: BTreeMap<String, BTreeMap<String, DurationBounds>>,
}

/// Outcome of feeding one input symbol to a state.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// The input labeled an outgoing edge; the automaton moved.
    Consumed(String),
    /// No explicit transition: the state is unchanged.
    NoEffect,
}

impl Automaton {
    pub fn states(&self) -> impl Iterator<Item = &str> {
        self.states.iter().map(String::as_str)
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn start_states(&self) -> impl Iterator<Item = &str> {
        self.start_states.iter().map(String::as_str)
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = &str> {
        self.accepting.iter().map(String::as_str)
    }

    pub fn is_start(&self, state: &str) -> bool {
        self.start_states.contains(state)
    }

    pub fn is_accepting(&self, state: &str) -> bool {
        self.accepting.contains(state)
    }

    /// The duration bounds of the explicit transition `from --input--> input`,
    /// if the graph has that edge.
    pub fn transition(&self, from: &str, input: &str) -> Option<DurationBounds> {
        self.transitions.get(from).and_then(|m| m.get(input)).copied()
    }

    /// Explicit outgoing transitions of a state.
    pub fn transitions_from(&self, from: &str) -> impl Iterator<Item = (&str, DurationBounds)> {
        self.transitions
            .get(from)
            .into_iter()
            .flat_map(|m| m.iter().map(|(to, b)| (to.as_str(), *b)))
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.values().map(BTreeMap::len).sum()
    }

    /// Feeds one input symbol, ignoring duration bounds. Any input that does
    /// not label an outgoing edge leaves the state unchanged.
    pub fn step(&self, state: &str, input: &str) -> StepOutcome {
        if self.transition(state, input).is_some() {
            StepOutcome::Consumed(input.to_string())
        } else {
            StepOutcome::NoEffect
        }
    }
}

/// Compiles a validated graph: states are node ids, start/accepting sets are
/// the flagged nodes, and each edge `A -> B` becomes the explicit transition
/// on input `B`. A self-loop edge `P -> P` is a *consuming* transition — it
/// advances the match and appends a step — unlike the implicit no-effect
/// self-loops on unmatched inputs.
pub fn compile(graph: &MovementGraph) -> Automaton {
    let states: BTreeSet<String> = graph.nodes().map(|n| n.id.clone()).collect();
    let start_states: BTreeSet<String> = graph.start_nodes().map(str::to_string).collect();
    let accepting: BTreeSet<String> = graph.finish_nodes().map(str::to_string).collect();
    let mut transitions: BTreeMap<String, BTreeMap<String, DurationBounds>> = BTreeMap::new();
    for edge in graph.edges() {
        transitions.entry(edge.from.clone()).or_default().insert(
            edge.to.clone(),
            DurationBounds {
                min_ms: edge.min_ms,
                max_ms: edge.max_ms,
            },
        );
    }
    Automaton {
        states,
        start_states,
        accepting,
        transitions,
    }
}

// ---------------------------------------------------------------------------
// JSON config layer
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrammarConfig {
    nodes: Vec<NodeConfig>,
    edges: Vec<EdgeConfig>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeConfig {
    id: String,
    label: String,
    #[serde(default)]
    start: bool,
    #[serde(default)]
    finish: bool,
    trigger: TriggerConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeConfig {
    from: String,
    to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_ms: Option<u64>,
}

fn default_position_channel() -> String {
    "position".to_string()
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum TriggerConfig {
    Edge {
        channel: String,
        threshold: f64,
        direction: EdgeDirectionConfig,
    },
    Peak {
        channel: String,
        min_prominence: f64,
        min_separation_ms: u64,
        polarity: PeakPolarityConfig,
    },
    Gate {
        lat1: f64,
        lon1: f64,
        lat2: f64,
        lon2: f64,
        direction: GateDirectionConfig,
        #[serde(default = "default_position_channel")]
        channel: String,
    },
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum EdgeDirectionConfig {
    Rising,
    Falling,
    Change,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum PeakPolarityConfig {
    Maxima,
    Minima,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum GateDirectionConfig {
    Any,
    LeftToRight,
    RightToLeft,
}

impl TriggerConfig {
    fn into_spec(self) -> Result<TriggerSpec> {
        Ok(match self {
            TriggerConfig::Edge {
                channel,
                threshold,
                direction,
            } => TriggerSpec::Edge(EdgeTriggerSpec {
                channel,
                threshold,
                direction: match direction {
                    EdgeDirectionConfig::Rising => EdgeDirection::Rising,
                    EdgeDirectionConfig::Falling => EdgeDirection::Falling,
                    EdgeDirectionConfig::Change => EdgeDirection::Change,
                },
            }),
            TriggerConfig::Peak {
                channel,
                min_prominence,
                min_separation_ms,
                polarity,
            } => TriggerSpec::Peak(PeakTriggerSpec {
                channel,
                min_prominence,
                min_separation_ms,
                polarity: match polarity {
                    PeakPolarityConfig::Maxima => PeakPolarity::Maxima,
                    PeakPolarityConfig::Minima => PeakPolarity::Minima,
                },
            }),
            TriggerConfig::Gate {
                lat1,
                lon1,
                lat2,
                lon2,
                direction,
                channel,
            } => TriggerSpec::Gate(GateTriggerSpec {
                channel,
                gate: (GeoPoint::new(lat1, lon1)?, GeoPoint::new(lat2, lon2)?),
                direction_filter: match direction {
                    GateDirectionConfig::Any => GateDirection::Any,
                    GateDirectionConfig::LeftToRight => GateDirection::LeftToRight,
                    GateDirectionConfig::RightToLeft => GateDirection::RightToLeft,
                },
            }),
        })
    }

    fn from_spec(spec: &TriggerSpec) -> Self {
        match spec {
            TriggerSpec::Edge(s) => TriggerConfig::Edge {
                channel: s.channel.clone(),
                threshold: s.threshold,
                direction: match s.direction {
                    EdgeDirection::Rising => EdgeDirectionConfig::Rising,
                    EdgeDirection::Falling => EdgeDirectionConfig::Falling,
                    EdgeDirection::Change => EdgeDirectionConfig::Change,
                },
            },
            TriggerSpec::Peak(s) => TriggerConfig::Peak {
                channel: s.channel.clone(),
                min_prominence: s.min_prominence,
                min_separation_ms: s.min_separation_ms,
                polarity: match s.polarity {
                    PeakPolarity::Maxima => PeakPolarityConfig::Maxima,
                    PeakPolarity::Minima => PeakPolarityConfig::Minima,
                },
            },
            TriggerSpec::Gate(s) => TriggerConfig::Gate {
                lat1: s.gate.0.lat,
                lon1: s.gate.0.lon,
                lat2: s.gate.1.lat,
                lon2: s.gate.1.lon,
                direction: match s.direction_filter {
                    GateDirection::Any => GateDirectionConfig::Any,
                    GateDirection::LeftToRight => GateDirectionConfig::LeftToRight,
                    GateDirection::RightToLeft => GateDirectionConfig::RightToLeft,
                },
                channel: s.channel.clone(),
            },
        }
    }
}

impl GrammarConfig {
    fn into_graph(self) -> Result<MovementGraph> {
        let mut nodes = Vec::new();
        let mut bindings = Vec::new();
        for node in self.nodes {
            bindings.push((node.id.clone(), node.trigger.into_spec()?));
            nodes.push(NodeSpec {
                id: node.id,
                label: node.label,
                is_start: node.start,
                is_finish: node.finish,
            });
        }
        let edges = self
            .edges
            .into_iter()
            .map(|e| EdgeSpec {
                from: e.from,
                to: e.to,
                min_ms: e.min_ms,
                max_ms: e.max_ms,
            })
            .collect();
        MovementGraph::new(nodes, edges, bindings)
    }

    fn from_graph(graph: &MovementGraph) -> Self {
        GrammarConfig {
            nodes: graph
                .nodes()
                .map(|n| NodeConfig {
                    id: n.id.clone(),
                    label: n.label.clone(),
                    start: n.is_start,
                    finish: n.is_finish,
                    trigger: TriggerConfig::from_spec(
                        graph.binding(&n.id).expect("validated graph"),
                    ),
                })
                .collect(),
            edges: graph
                .edges()
                .iter()
                .map(|e| EdgeConfig {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    min_ms: e.min_ms,
                    max_ms: e.max_ms,
                })
                .collect(),
        }
    }
}
