//! End-to-end recognition of a six-lap biathlon race.
//!
//! Generates a synthetic recording with two shooting bouts (two penalty
//! loops after the first, one after the second), recognizes it against the
//! biathlon movement grammar, and prints the recovered segmentation next
//! to the planted ground truth.
//!
//! Run with: cargo run --example recognize_race

use movegraph::recognizer::{recognize, RecognizeOptions};
use movegraph::synth::{self, TrackPlan};

fn main() {
    let plan = TrackPlan::default();
    println!("plan: {} laps, shooting on laps {:?}, penalties {:?}",
        plan.lap_count, plan.shooting_laps, plan.penalties_per_bout);

    let (recording, truth) = synth::generate(&plan).expect("valid plan");
    let rows: usize = recording.channels().map(|(_, c)| c.len()).sum();
    println!("recording: {} ({rows} samples across 4 channels)\n", recording.id());

    let grammar = synth::biathlon_grammar(&plan).expect("grammar for plan");
    let result = recognize(&recording, &grammar, &RecognizeOptions::default()).expect("pipeline");

    println!("points of interest: {}", result.pois.len());
    for (node, count) in &result.diagnostics.poi_counts {
        println!("  {node:3} fired {count} times");
    }
    println!(
        "\npartial solutions: {}, candidates: {}",
        result.diagnostics.partial_solution_count, result.diagnostics.candidate_count
    );
    println!(
        "stage timings: trigger scan {:.2} ms, graph search {:.3} ms",
        result.diagnostics.trigger_scan.as_secs_f64() * 1000.0,
        result.diagnostics.graph_search.as_secs_f64() * 1000.0
    );

    let optimal = &result.optimal;
    println!(
        "\noptimal solution: {} part(s), {:.1} s covered",
        optimal.part_count(),
        optimal.covered_ms() as f64 / 1000.0
    );

    // segment strip: every edge traversal with its duration
    println!("\nsegmentation:");
    let mut lap = 1;
    for part in optimal.parts() {
        for w in part.steps().windows(2) {
            let dt = (w[1].t.as_ms() - w[0].t.as_ms()) as f64 / 1000.0;
            let bar = "#".repeat((dt / 4.0).ceil() as usize);
            println!("  lap {lap} | {:>2} -> {:<2} {:7.2}s {bar}", w[0].node, w[1].node, dt);
            if w[1].node == "RL" {
                lap += 1;
            }
        }
    }

    let penalty_loops = optimal
        .node_sequence()
        .windows(2)
        .filter(|w| w[0] == "P" && w[1] == "P")
        .count();
    println!("\npenalty loops taken: {penalty_loops}");

    let matches = optimal.node_sequence()
        == truth.expected_sequence.iter().map(String::as_str).collect::<Vec<_>>();
    println!("matches planted ground truth: {matches}");
}
