//! Synthetic telemetry generation with ground truth.
//!
//! Builds a two-lap plan with one shooting bout, writes the recording CSV,
//! the ground-truth sidecar, and the matching grammar config into a
//! directory (first CLI argument, default `./synth-out`), then shows
//! what was planted.
//!
//! Run with: cargo run --example synthesize_race -- [out-dir]

use movegraph::synth::{self, TrackPlan};
use movegraph::timeseries::save_recording;

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "synth-out".to_string());
    let out = std::path::PathBuf::from(out);
    std::fs::create_dir_all(&out).expect("create output directory");

    let plan = TrackPlan {
        lap_count: 2,
        shooting_laps: vec![1],
        penalties_per_bout: vec![2],
        bout_z_accel_g: vec![0.33],
        noise_seed: 2024,
        ..TrackPlan::default()
    };

    let (recording, truth) = synth::generate(&plan).expect("valid plan");
    let grammar = synth::biathlon_grammar(&plan).expect("grammar");

    save_recording(&recording, out.join("recording.csv")).expect("write recording");
    std::fs::write(out.join("ground_truth.json"), truth.to_json_pretty()).expect("write truth");
    std::fs::write(out.join("grammar.json"), grammar.to_json_string()).expect("write grammar");

    println!("wrote recording.csv, ground_truth.json, grammar.json to {}", out.display());
    for (name, channel) in recording.channels() {
        println!(
            "  {name:8} {:6} samples @ {:5.1} Hz",
            channel.len(),
            channel.nominal_rate_hz()
        );
    }

    println!("\nplanted events:");
    for event in &truth.expected_pois {
        println!("  {:8.2}s  {}", event.t_ms as f64 / 1000.0, event.node);
    }
    println!("\nexpected segmentation: {}", truth.expected_sequence.join(" -> "));
    println!(
        "\nnext: cargo run -- recognize --recording {}/recording.csv --grammar {}/grammar.json --out {}/result",
        out.display(), out.display(), out.display()
    );
}
