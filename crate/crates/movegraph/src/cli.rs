//! File-based workflow behind the `movegraph` binary.
//!
//! Three subcommands cover the analyst loop: `synth` writes a synthetic
//! recording with its ground truth, `detect` dumps the point-of-interest
//! stream for plotting, `recognize` runs the full pipeline and writes the
//! solution plus per-segment reports. Exit codes are part of the contract:
//! 0 success, 2 input or config error, 3 exploration cap exceeded.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::metrics::{self, MetricsConfig};
use crate::recognizer::{recognize, RecognizeOptions, SearchOptions};
use crate::synth::{self, TrackPlan};
use crate::timeseries::{load_recording, write_recording_csv, RecordingFormat};
use crate::{grammar, write_atomic};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CAP: i32 = 3;

#[derive(Parser)]
#[command(
    name = "movegraph",
    version,
    about = "Movement-sequence recognition over multi-sensor recordings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print extra per-stage detail.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recording plus ground truth
    Synth {
        /// Track plan JSON (built-in defaults when omitted)
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Output directory
        #[arg(long, short)]
        out: PathBuf,
        /// Override the plan's noise seed
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the matching grammar config
        #[arg(long)]
        emit_grammar: bool,
    },
    /// Run the grammar's triggers and write the point-of-interest stream
    Detect {
        #[arg(long)]
        recording: PathBuf,
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Full pipeline: triggers, matching, combination, ranking, reports
    Recognize {
        #[arg(long)]
        recording: PathBuf,
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Exploration cap for the search and combination stages
        #[arg(long, default_value_t = 1_000_000)]
        max_search_states: u64,
        /// Node whose traversal ends a lap in the reports
        #[arg(long, default_value = "RL")]
        lap_node: String,
    },
}

/// Parses `args` and runs the chosen subcommand, returning the process exit
/// code. Kept separate from `main` so tests can drive it in-process.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; they are not failures
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Error::CapExceeded { stage, explored, cap }) => {
            eprintln!("error: {stage} exceeded the exploration cap ({explored} > {cap})");
            eprintln!("hint: tighten edge duration bounds or raise --max-search-states");
            EXIT_CAP
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            plan,
            out,
            seed,
            emit_grammar,
        } => cmd_synth(plan.as_deref(), &out, seed, emit_grammar, cli.verbose),
        Command::Detect {
            recording,
            grammar,
            out,
        } => cmd_detect(&recording, &grammar, &out, cli.verbose),
        Command::Recognize {
            recording,
            grammar,
            out,
            max_search_states,
            lap_node,
        } => cmd_recognize(
            &recording,
            &grammar,
            &out,
            max_search_states,
            &lap_node,
            cli.verbose,
        ),
    }
}

fn load_plan(path: Option<&Path>) -> Result<TrackPlan> {
    match path {
        None => Ok(TrackPlan::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            })?;
            let plan: TrackPlan = serde_json::from_str(&text)?;
            Ok(plan)
        }
    }
}

fn cmd_synth(
    plan_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    emit_grammar: bool,
    verbose: bool,
) -> Result<()> {
    let mut plan = load_plan(plan_path)?;
    if let Some(seed) = seed {
        plan.noise_seed = seed;
    }
    let (recording, truth) = synth::generate(&plan)?;

    let mut csv = Vec::new();
    write_recording_csv(&recording, &mut csv).map_err(|source| Error::Io {
        path: out.join("recording.csv"),
        source,
    })?;
    write_atomic(&out.join("recording.csv"), &csv)?;
    write_atomic(
        &out.join("ground_truth.json"),
        truth.to_json_pretty().as_bytes(),
    )?;
    if emit_grammar {
        let graph = synth::biathlon_grammar(&plan)?;
        write_atomic(&out.join("grammar.json"), graph.to_json_string().as_bytes())?;
    }

    let rows: usize = recording.channels().map(|(_, c)| c.len()).sum();
    println!(
        "synthesized {} ({} laps, {} rows) -> {}",
        recording.id(),
        plan.lap_count,
        rows,
        out.display()
    );
    if verbose {
        for (name, channel) in recording.channels() {
            println!("  channel {name}: {} samples @ {} Hz", channel.len(), channel.nominal_rate_hz());
        }
        println!("  planted events: {}", truth.expected_pois.len());
    }
    Ok(())
}

fn cmd_detect(recording: &Path, grammar_path: &Path, out: &Path, verbose: bool) -> Result<()> {
    let recording = load_recording(recording, RecordingFormat::Csv)?;
    let graph = grammar::parse_grammar(grammar_path)?;
    let pois = crate::triggers::run_triggers(&recording, &graph.bindings())?;

    let json = serde_json::json!({ "pois": pois });
    write_atomic(
        &out.join("pois.json"),
        serde_json::to_string_pretty(&json)
            .expect("poi list serializes")
            .as_bytes(),
    )?;

    let mut csv = String::from("node,t_ms,source\n");
    for poi in &pois {
        csv.push_str(&format!("{},{},{}\n", poi.node, poi.t.as_ms(), poi.source));
    }
    write_atomic(&out.join("poi.csv"), csv.as_bytes())?;

    println!("detected {} points of interest -> {}", pois.len(), out.display());
    if verbose {
        let mut counts = std::collections::BTreeMap::new();
        for poi in &pois {
            *counts.entry(poi.node.as_str()).or_insert(0usize) += 1;
        }
        for (node, n) in counts {
            println!("  {node}: {n}");
        }
    }
    Ok(())
}

fn cmd_recognize(
    recording_path: &Path,
    grammar_path: &Path,
    out: &Path,
    max_search_states: u64,
    lap_node: &str,
    verbose: bool,
) -> Result<()> {
    let recording = load_recording(recording_path, RecordingFormat::Csv)?;
    let graph = grammar::parse_grammar(grammar_path)?;
    let options = RecognizeOptions {
        search: SearchOptions {
            max_explored_states: max_search_states,
        },
    };
    let result = recognize(&recording, &graph, &options)?;

    write_atomic(
        &out.join("solution.json"),
        result.to_json_pretty().as_bytes(),
    )?;

    let metrics_config = MetricsConfig {
        lap_boundary_node: lap_node.to_string(),
        ..MetricsConfig::default()
    };
    let segments = metrics::segment_metrics(&result.optimal, &recording, &metrics_config);
    let mut seg_csv = Vec::new();
    metrics::write_segments_csv(&segments, &mut seg_csv).map_err(|source| Error::Io {
        path: out.join("segments.csv"),
        source,
    })?;
    write_atomic(&out.join("segments.csv"), &seg_csv)?;

    let reports = metrics::range_report(&result.optimal, &recording, &metrics_config);
    let mut range_csv = Vec::new();
    metrics::write_range_report_csv(recording.id(), &reports, &mut range_csv).map_err(
        |source| Error::Io {
            path: out.join("range_report.csv"),
            source,
        },
    )?;
    write_atomic(&out.join("range_report.csv"), &range_csv)?;

    let d = &result.diagnostics;
    println!(
        "pois={} partial_solutions={} candidates={} optimal_parts={} covered_ms={}",
        result.pois.len(),
        d.partial_solution_count,
        d.candidate_count,
        result.optimal.part_count(),
        result.optimal.covered_ms()
    );
    println!(
        "trigger_scan_ms={:.3} graph_search_ms={:.3}",
        d.trigger_scan.as_secs_f64() * 1000.0,
        d.graph_search.as_secs_f64() * 1000.0
    );
    if verbose {
        for (node, n) in &d.poi_counts {
            println!("  poi {node}: {n}");
        }
        for (i, part) in result.optimal.parts().iter().enumerate() {
            println!(
                "  part {i}: [{} .. {}] {} steps",
                part.start_t(),
                part.end_t(),
                part.steps().len()
            );
        }
    }
    println!("wrote solution.json, segments.csv, range_report.csv -> {}", out.display());
    Ok(())
}
