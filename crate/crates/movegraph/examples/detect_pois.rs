//! Trigger-level view: which points of interest fire, where, and why.
//!
//! Runs only the trigger stage of the pipeline on a short synthetic race
//! and prints the merged stream. Note the two "wrong" speed-edge firings —
//! the rising edge when the athlete launches off the start and the falling
//! edge when stopping after the finish look exactly like shooting-start and
//! shooting-finish to a threshold trigger. Triggers know nothing about
//! order; rejecting those impostors is the grammar's job.
//!
//! Run with: cargo run --example detect_pois

use movegraph::synth::{self, TrackPlan};
use movegraph::triggers::run_triggers;

fn main() {
    let plan = TrackPlan {
        lap_count: 2,
        shooting_laps: vec![1],
        penalties_per_bout: vec![1],
        bout_z_accel_g: vec![0.33],
        ..TrackPlan::default()
    };
    let (recording, truth) = synth::generate(&plan).expect("valid plan");
    let grammar = synth::biathlon_grammar(&plan).expect("grammar");

    let pois = run_triggers(&recording, &grammar.bindings()).expect("triggers");
    println!("{} points of interest from {} bindings:\n", pois.len(), grammar.node_count());
    println!("{:>10}  {:4}  {}", "time", "node", "source");
    for poi in &pois {
        let in_path = truth
            .expected_steps
            .iter()
            .any(|s| s.node == poi.node && s.t_ms.abs_diff(poi.t.as_ms()) <= 200);
        let tag = if in_path { "" } else { "   <- not part of the movement" };
        println!(
            "{:9.2}s  {:4}  {}{tag}",
            poi.t.as_ms() as f64 / 1000.0,
            poi.node,
            poi.source
        );
    }
}
