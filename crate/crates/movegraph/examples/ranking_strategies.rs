//! Why candidate solutions are ranked by coverage before count.
//!
//! Builds the pathological candidate set: one long match covering 100 s
//! against three short fragments totalling 84 s. Maximizing the number of
//! parts picks the fragments — short matches assembled from false triggers
//! beat one correct long match. Maximizing covered duration first repairs
//! that, and part count then only breaks genuine ties.
//!
//! Run with: cargo run --example ranking_strategies

use movegraph::recognizer::{rank_with, PartialSolution, PathStep, RankStrategy, TotalSolution};
use movegraph::timeseries::Timestamp;

fn span(a: u64, b: u64) -> PartialSolution {
    PartialSolution::new(vec![
        PathStep::new("S", Timestamp::from_ms(a * 1000)),
        PathStep::new("F", Timestamp::from_ms(b * 1000)),
    ])
    .unwrap()
}

fn describe(label: &str, s: &TotalSolution) {
    println!(
        "  {label}: {} part(s), {:.0} s covered",
        s.part_count(),
        s.covered_ms() as f64 / 1000.0
    );
    for part in s.parts() {
        println!(
            "      [{:>3.0} .. {:>3.0}] s",
            part.start_t().as_ms() as f64 / 1000.0,
            part.end_t().as_ms() as f64 / 1000.0
        );
    }
}

fn main() {
    let long = TotalSolution::new(vec![span(0, 100)]).unwrap();
    let fragments =
        TotalSolution::new(vec![span(0, 30), span(31, 60), span(61, 85)]).unwrap();

    println!("candidates:");
    describe("long     ", &long);
    describe("fragments", &fragments);

    let candidates = vec![long, fragments];
    for (strategy, name) in [
        (RankStrategy::PartCount, "maximize part count"),
        (RankStrategy::CoveredDuration, "maximize covered duration"),
        (RankStrategy::Combined, "coverage, then count (default)"),
    ] {
        let winner = rank_with(&candidates, strategy).unwrap();
        println!(
            "\nstrategy '{name}' picks: {} part(s), {:.0} s",
            winner.part_count(),
            winner.covered_ms() as f64 / 1000.0
        );
    }

    // where part count earns its keep: breaking an exact coverage tie in
    // favor of the finer segmentation
    let one = TotalSolution::new(vec![span(0, 60)]).unwrap();
    let two = TotalSolution::new(vec![span(0, 30), span(30, 60)]).unwrap();
    let tied = vec![one, two];
    let winner = rank_with(&tied, RankStrategy::Combined).unwrap();
    println!(
        "\nequal 60 s coverage, 1 part vs 2: combined ranking keeps {} parts",
        winner.part_count()
    );
}
