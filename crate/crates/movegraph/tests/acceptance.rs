//! Release acceptance suite. One test per criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).
//!
//! The recognition criteria run against synthetic recordings whose ground
//! truth is analytic, the search criteria against literal brute-force
//! oracles, and the performance criteria against wall-clock bounds with
//! wide margins so they stay meaningful on slow machines and debug builds.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use movegraph::grammar::{compile, MovementGraph};
use movegraph::recognizer::{
    combine, find_partial_solutions, rank, rank_with, recognize, PartialSolution, PathStep,
    RankStrategy, RecognizeOptions, TotalSolution,
};
use movegraph::synth::{self, TrackPlan};
use movegraph::timeseries::Timestamp;
use movegraph::triggers::{EdgeDirection, PointOfInterest, TriggerSpec};

fn criterion<F>(name: &str, body: F)
where
    F: FnOnce() + std::panic::UnwindSafe,
{
    match std::panic::catch_unwind(body) {
        Ok(()) => println!("acceptance {name}: PASS"),
        Err(cause) => {
            println!("acceptance {name}: FAIL");
            std::panic::resume_unwind(cause);
        }
    }
}

fn six_lap_plan(penalties: [u32; 2], seed: u64) -> TrackPlan {
    TrackPlan {
        penalties_per_bout: penalties.to_vec(),
        noise_seed: seed,
        ..TrackPlan::default()
    }
}

#[test]
fn criterion_1_segmentation_recovery() {
    criterion("criterion 1 (segmentation recovery)", || {
        for (i, penalties) in [[2u32, 1], [1, 0], [1, 1]].iter().enumerate() {
            let plan = six_lap_plan(*penalties, 100 + i as u64);
            let (recording, truth) = synth::generate(&plan).unwrap();
            let grammar = synth::biathlon_grammar(&plan).unwrap();

            let started = Instant::now();
            let result = recognize(&recording, &grammar, &RecognizeOptions::default()).unwrap();
            let elapsed = started.elapsed();

            let got: Vec<&str> = result.optimal.node_sequence();
            let want: Vec<&str> = truth.expected_sequence.iter().map(String::as_str).collect();
            assert_eq!(got, want, "penalties {penalties:?}: wrong node sequence");

            // penalty-loop traversal counts are part of the sequence match,
            // but assert them explicitly as well
            let self_loops = |seq: &[&str]| {
                seq.windows(2)
                    .filter(|w| w[0] == "P" && w[1] == "P")
                    .count()
            };
            assert_eq!(
                self_loops(&got),
                (penalties[0] + penalties[1]) as usize,
                "wrong number of penalty self-loop traversals"
            );
            assert!(
                elapsed < Duration::from_secs(5),
                "recognition took {elapsed:?}, budget 5 s"
            );
        }
    });
}

#[test]
fn criterion_2_penalty_gate_crossed_three_times() {
    criterion("criterion 2 (penalty special case)", || {
        // two missed shots: the athlete passes the penalty gate entering the
        // loop area and once per loop, crossing the same line three times
        let plan = TrackPlan {
            lap_count: 3,
            shooting_laps: vec![2],
            penalties_per_bout: vec![2],
            bout_z_accel_g: vec![0.33],
            ..TrackPlan::default()
        };
        let (recording, truth) = synth::generate(&plan).unwrap();
        let grammar = synth::biathlon_grammar(&plan).unwrap();
        let result = recognize(&recording, &grammar, &RecognizeOptions::default()).unwrap();

        let seq = result.optimal.node_sequence();
        assert_eq!(
            seq,
            truth
                .expected_sequence
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>()
        );

        // the bout lap carries a run of exactly three P steps: the entry
        // traversal plus two self-loops
        let mut runs = Vec::new();
        let mut run = 0usize;
        for node in &seq {
            if *node == "P" {
                run += 1;
            } else if run > 0 {
                runs.push(run);
                run = 0;
            }
        }
        assert_eq!(runs, vec![1, 3], "penalty runs per lap");

        // and the detector saw exactly three P firings inside that bout lap
        let p_times = truth.poi_times("P");
        assert_eq!(p_times.len(), 1 + 3, "one lap pass plus the bout's three");
        let detected_p = result.pois.iter().filter(|p| p.node == "P").count();
        assert_eq!(detected_p, p_times.len());
    });
}

#[test]
fn criterion_3_false_start_suppression() {
    criterion("criterion 3 (false-start suppression)", || {
        let plan = TrackPlan {
            race_start_s: 120.0,
            ..six_lap_plan([2, 1], 7)
        };
        let (clean, _) = synth::generate(&plan).unwrap();
        let grammar = synth::biathlon_grammar(&plan).unwrap();
        assert_eq!(
            grammar.edge_bounds("S", "UE").unwrap().max_ms,
            Some(60_000),
            "the start edge carries the 60 s window"
        );

        let injected = synth::inject_warmup_crossings(&clean, &plan, &[20.0, 45.0, 70.0]).unwrap();

        let options = RecognizeOptions::default();
        let clean_result = recognize(&clean, &grammar, &options).unwrap();
        let noisy_result = recognize(&injected, &grammar, &options).unwrap();

        // the warm-up crossings are visible to the triggers...
        let starts = |r: &movegraph::recognizer::RecognitionResult| {
            r.pois.iter().filter(|p| p.node == "S").count()
        };
        assert_eq!(starts(&noisy_result), starts(&clean_result) + 3);

        // ...and invisible to the recognizer
        assert_eq!(noisy_result.optimal, clean_result.optimal);
        assert_eq!(
            noisy_result.partial_solutions,
            clean_result.partial_solutions
        );
    });
}

// ---------------------------------------------------------------------------
// Criterion 4: brute-force equivalence on random instances
// ---------------------------------------------------------------------------

fn dummy_trigger() -> TriggerSpec {
    TriggerSpec::edge("x", 0.0, EdgeDirection::Rising)
}

fn random_graph(rng: &mut ChaCha8Rng) -> MovementGraph {
    loop {
        let node_count = rng.gen_range(2..=6usize);
        let ids: Vec<String> = (0..node_count).map(|i| format!("N{i}")).collect();
        let mut starts: Vec<bool> = (0..node_count).map(|_| rng.gen_bool(0.4)).collect();
        let mut finishes: Vec<bool> = (0..node_count).map(|_| rng.gen_bool(0.4)).collect();
        if !starts.iter().any(|&s| s) {
            starts[rng.gen_range(0..node_count)] = true;
        }
        if !finishes.iter().any(|&f| f) {
            finishes[rng.gen_range(0..node_count)] = true;
        }

        let mut edge_pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
        for from in 0..node_count {
            for to in 0..node_count {
                if rng.gen_bool(0.3) {
                    edge_pairs.insert((from, to));
                }
            }
        }
        // keep non-finish nodes alive
        for i in 0..node_count {
            if !finishes[i] && !edge_pairs.iter().any(|&(f, _)| f == i) {
                edge_pairs.insert((i, rng.gen_range(0..node_count)));
            }
        }

        let mut builder = MovementGraph::builder();
        for i in 0..node_count {
            builder = builder.node(&ids[i], &ids[i], starts[i], finishes[i], dummy_trigger());
        }
        for (from, to) in edge_pairs {
            let min_ms = if rng.gen_bool(0.5) {
                Some(rng.gen_range(0..300u64))
            } else {
                None
            };
            let max_ms = if rng.gen_bool(0.5) {
                Some(min_ms.unwrap_or(0) + rng.gen_range(0..900u64))
            } else {
                None
            };
            builder = builder.edge_bounded(&ids[from], &ids[to], min_ms, max_ms);
        }
        if let Ok(graph) = builder.build() {
            return graph;
        }
    }
}

fn random_pois(rng: &mut ChaCha8Rng, graph: &MovementGraph) -> Vec<PointOfInterest> {
    let ids: Vec<&str> = graph.nodes().map(|n| n.id.as_str()).collect();
    let count = rng.gen_range(0..=12usize);
    let mut t = 0u64;
    let mut pois = Vec::with_capacity(count);
    for _ in 0..count {
        t += rng.gen_range(0..400u64); // zero steps allowed: simultaneous firings
        pois.push(PointOfInterest {
            node: ids[rng.gen_range(0..ids.len())].to_string(),
            t: Timestamp::from_ms(t),
            source: "oracle".to_string(),
        });
    }
    pois.sort_by(|a, b| (a.t, &a.node).cmp(&(b.t, &b.node)));
    pois
}

/// Literal enumeration of all increasing index subsets that spell a valid
/// start-to-finish path with admissible durations.
fn oracle_partial_solutions(
    graph: &MovementGraph,
    pois: &[PointOfInterest],
) -> Vec<PartialSolution> {
    let n = pois.len();
    let mut out = BTreeSet::new();
    for mask in 1u32..(1u32 << n) {
        let chosen: Vec<&PointOfInterest> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &pois[i])
            .collect();
        let start_ok = graph
            .node(&chosen[0].node)
            .map(|nd| nd.is_start)
            .unwrap_or(false);
        let finish_ok = graph
            .node(&chosen[chosen.len() - 1].node)
            .map(|nd| nd.is_finish)
            .unwrap_or(false);
        if !start_ok || !finish_ok {
            continue;
        }
        let ok = chosen.windows(2).all(|w| {
            graph
                .edge_bounds(&w[0].node, &w[1].node)
                .map(|b| b.admits(w[1].t.millis_since(w[0].t)))
                .unwrap_or(false)
        });
        if !ok {
            continue;
        }
        out.insert(
            PartialSolution::new(
                chosen
                    .iter()
                    .map(|p| PathStep::new(p.node.clone(), p.t))
                    .collect(),
            )
            .unwrap(),
        );
    }
    out.into_iter().collect()
}

/// Literal power-set filter over the parts.
fn oracle_combinations(parts: &[PartialSolution]) -> BTreeSet<TotalSolution> {
    assert!(parts.len() <= 16);
    let mut out = BTreeSet::new();
    for mask in 1u32..(1u32 << parts.len()) {
        let subset: Vec<PartialSolution> = (0..parts.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| parts[i].clone())
            .collect();
        let mut sorted = subset.clone();
        sorted.sort();
        if sorted.windows(2).all(|w| w[0].end_t() <= w[1].start_t()) {
            out.insert(TotalSolution::new(subset).unwrap());
        }
    }
    out
}

#[test]
fn criterion_4_brute_force_equivalence() {
    criterion("criterion 4 (brute-force oracle equivalence)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xB10C_0DE);
        let mut nonempty_instances = 0usize;
        let mut checked = 0usize;
        let mut attempts = 0usize;
        while checked < 200 {
            attempts += 1;
            assert!(attempts < 20_000, "instance generation stalled");
            let graph = random_graph(&mut rng);
            let pois = random_pois(&mut rng, &graph);

            let expected = oracle_partial_solutions(&graph, &pois);
            if expected.len() > 16 {
                continue; // keep the power-set oracle below 2^16 subsets
            }
            checked += 1;

            let automaton = compile(&graph);
            let found = find_partial_solutions(&automaton, &pois).unwrap();
            assert_eq!(found, expected, "partial-solution sets differ");
            for sol in &found {
                sol.validate_against(&graph).unwrap();
            }

            let combined: BTreeSet<TotalSolution> =
                combine(&found).unwrap().into_iter().collect();
            let oracle_combined = oracle_combinations(&found);
            assert_eq!(combined, oracle_combined, "combination sets differ");

            if !combined.is_empty() {
                nonempty_instances += 1;
                let candidates: Vec<TotalSolution> = combined.iter().cloned().collect();
                let winner = rank(&candidates).unwrap();
                let best_key = candidates
                    .iter()
                    .map(|c| (c.covered_ms(), c.part_count()))
                    .max()
                    .unwrap();
                assert_eq!(
                    (winner.covered_ms(), winner.part_count()),
                    best_key,
                    "ranking winner does not attain the brute-force maximum"
                );
            }
        }
        assert!(
            nonempty_instances >= 40,
            "only {nonempty_instances} of 200 instances produced solutions; generator too sparse"
        );
    });
}

#[test]
fn criterion_5_ranking_pathology() {
    criterion("criterion 5 (ranking pathology)", || {
        let part = |a: u64, b: u64| {
            PartialSolution::new(vec![
                PathStep::new("A", Timestamp::from_ms(a)),
                PathStep::new("F", Timestamp::from_ms(b)),
            ])
            .unwrap()
        };
        // one long match against three fragments of strictly lower coverage
        let long = TotalSolution::new(vec![part(0, 100_000)]).unwrap();
        let fragments = TotalSolution::new(vec![
            part(0, 30_000),
            part(31_000, 60_000),
            part(61_000, 85_000),
        ])
        .unwrap();
        assert!(fragments.covered_ms() < long.covered_ms());

        let candidates = vec![long.clone(), fragments.clone()];
        assert_eq!(
            rank_with(&candidates, RankStrategy::PartCount).unwrap(),
            &fragments,
            "count-only ranking is expected to fall for the fragmented match"
        );
        assert_eq!(
            rank_with(&candidates, RankStrategy::Combined).unwrap(),
            &long,
            "combined ranking must not select the fragmented match"
        );
    });
}

#[test]
fn criterion_6_geometry_oracle() {
    criterion("criterion 6 (geometry oracle)", || {
        use movegraph::geo::{
            haversine_distance, segment_intersection, PlanarPoint, SegmentPair, EARTH_RADIUS_M,
        };
        use movegraph::timeseries::GeoPoint;

        // haversine: identity, antipodal, symmetry
        let vienna = GeoPoint::new(48.2, 16.3).unwrap();
        assert_eq!(haversine_distance(vienna, vienna), 0.0);
        let antipodal =
            haversine_distance(GeoPoint::new(0.0, 0.0).unwrap(), GeoPoint::new(0.0, 180.0).unwrap());
        assert!((antipodal - std::f64::consts::PI * EARTH_RADIUS_M).abs() < 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for _ in 0..200 {
            let p = GeoPoint::new(rng.gen_range(-80.0..80.0), rng.gen_range(-180.0..180.0)).unwrap();
            let q = GeoPoint::new(rng.gen_range(-80.0..80.0), rng.gen_range(-180.0..180.0)).unwrap();
            let d1 = haversine_distance(p, q);
            let d2 = haversine_distance(q, p);
            assert!((d1 - d2).abs() <= 1e-9 * d1.max(1.0));
        }

        // intersection against the orientation-test oracle
        fn orient(p: PlanarPoint, q: PlanarPoint, r: PlanarPoint) -> f64 {
            (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
        }
        fn on_segment(p: PlanarPoint, q: PlanarPoint, r: PlanarPoint) -> bool {
            orient(p, q, r) == 0.0
                && r.x >= p.x.min(q.x)
                && r.x <= p.x.max(q.x)
                && r.y >= p.y.min(q.y)
                && r.y <= p.y.max(q.y)
        }
        fn oracle(sp: &SegmentPair) -> bool {
            let o1 = orient(sp.a1, sp.a2, sp.b1);
            let o2 = orient(sp.a1, sp.a2, sp.b2);
            let o3 = orient(sp.b1, sp.b2, sp.a1);
            let o4 = orient(sp.b1, sp.b2, sp.a2);
            if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
                return true;
            }
            (o1 == 0.0 && on_segment(sp.a1, sp.a2, sp.b1))
                || (o2 == 0.0 && on_segment(sp.a1, sp.a2, sp.b2))
                || (o3 == 0.0 && on_segment(sp.b1, sp.b2, sp.a1))
                || (o4 == 0.0 && on_segment(sp.b1, sp.b2, sp.a2))
        }

        let mut rng = ChaCha8Rng::seed_from_u64(20_240_617);
        for i in 0..1000 {
            let mut p =
                || PlanarPoint::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let sp = SegmentPair {
                a1: p(),
                a2: p(),
                b1: p(),
                b2: p(),
            };
            assert_eq!(
                segment_intersection(&sp).is_some(),
                oracle(&sp),
                "pair {i} disagrees: {sp:?}"
            );
        }
    });
}

// ---------------------------------------------------------------------------
// Performance criteria
// ---------------------------------------------------------------------------

/// Large plan: a six-lap race at 200 Hz IMU, ~60 points of interest after
/// warm-up injection, roughly 700k samples in total.
fn large_plan(imu_rate_hz: f64) -> TrackPlan {
    TrackPlan {
        imu_rate_hz,
        shooting_laps: vec![2, 3, 4],
        penalties_per_bout: vec![3, 2, 2],
        bout_z_accel_g: vec![],
        race_start_s: 120.0,
        ..TrackPlan::default()
    }
}

fn search_stage(
    automaton: &movegraph::grammar::Automaton,
    pois: &[PointOfInterest],
) -> TotalSolution {
    let parts = find_partial_solutions(automaton, pois).unwrap();
    let candidates = combine(&parts).unwrap();
    rank(&candidates).unwrap().clone()
}

/// Smallest of `batches` timings, each averaging `reps` runs.
fn best_timing<F: FnMut()>(batches: usize, reps: u32, mut body: F) -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..batches {
        let started = Instant::now();
        for _ in 0..reps {
            body();
        }
        best = best.min(started.elapsed() / reps);
    }
    best
}

#[test]
fn criterion_7_performance_bounds() {
    criterion("criterion 7 (performance)", || {
        let plan = large_plan(200.0);
        let (recording, truth) = synth::generate(&plan).unwrap();
        let recording =
            synth::inject_warmup_crossings(&recording, &plan, &[20.0, 50.0, 80.0]).unwrap();
        let total_rows: usize = recording.channels().map(|(_, c)| c.len()).sum();
        assert!(
            total_rows >= 700_000,
            "dataset has {total_rows} rows, wanted a ~700k-sample load"
        );
        let grammar = synth::biathlon_grammar(&plan).unwrap();

        // full pipeline wall clock, one core
        let started = Instant::now();
        let result = recognize(&recording, &grammar, &RecognizeOptions::default()).unwrap();
        let config = movegraph::metrics::MetricsConfig::default();
        let segments = movegraph::metrics::segment_metrics(&result.optimal, &recording, &config);
        let reports = movegraph::metrics::range_report(&result.optimal, &recording, &config);
        let full_pipeline = started.elapsed();
        assert!(
            full_pipeline < Duration::from_secs(10),
            "full pipeline took {full_pipeline:?}, budget 10 s"
        );
        assert!(!segments.is_empty() && !reports.is_empty());
        assert_eq!(
            result.optimal.node_sequence(),
            truth
                .expected_sequence
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>()
        );

        // graph-search stage alone on the realistic stream
        let poi_count = result.pois.len();
        assert!(
            (40..=120).contains(&poi_count),
            "expected a realistic stream, got {poi_count} points of interest"
        );
        let automaton = compile(&grammar);
        let pois = result.pois.clone();
        let search = best_timing(9, 10, || {
            std::hint::black_box(search_stage(&automaton, std::hint::black_box(&pois)));
        });
        println!(
            "  (criterion 7 detail: {poi_count} pois, search stage {search:?}, pipeline {full_pipeline:?})"
        );
        assert!(
            search < Duration::from_millis(10),
            "graph-search stage took {search:?}, budget 10 ms"
        );
    });
}

#[test]
fn criterion_8_dataset_size_insensitivity() {
    criterion("criterion 8 (dataset-size insensitivity)", || {
        let mut streams = Vec::new();
        for imu_rate in [50.0, 200.0] {
            let plan = large_plan(imu_rate);
            let (recording, _) = synth::generate(&plan).unwrap();
            let grammar = synth::biathlon_grammar(&plan).unwrap();
            let result = recognize(&recording, &grammar, &RecognizeOptions::default()).unwrap();
            streams.push((compile(&grammar), result.pois));
        }
        // the point-of-interest streams are identical: IMU volume does not
        // reach the graph-search stage at all
        assert_eq!(streams[0].1, streams[1].1);

        let times: Vec<Duration> = streams
            .iter()
            .map(|(automaton, pois)| {
                best_timing(15, 20, || {
                    std::hint::black_box(search_stage(automaton, std::hint::black_box(pois)));
                })
            })
            .collect();
        let (t50, t200) = (times[0].as_secs_f64(), times[1].as_secs_f64());
        let rel = (t200 - t50).abs() / t50.max(t200);
        println!("  (criterion 8 detail: search {t50:.6}s at 50 Hz vs {t200:.6}s at 200 Hz, diff {:.1}%)", rel * 100.0);
        assert!(
            rel < 0.20,
            "graph-search time moved by {:.1}% when the IMU rate quadrupled",
            rel * 100.0
        );
    });
}

/// Comparing against published real-world range-time tables requires the
/// external dataset, so this reproduction is manual. The procedure:
/// convert the raw export to the `timestamp_ms,channel,v0,v1,v2` CSV
/// schema, write a grammar config with the track's gate coordinates and
/// the 1 m/s speed triggers, then run
/// `movegraph recognize --recording <csv> --grammar <json> --out <dir>`
/// and compare `range_report.csv` (range time, shooting time, mean
/// vertical acceleration while shooting) against the published table.
#[test]
#[ignore = "needs the externally published real dataset"]
fn criterion_9_real_dataset_reproduction() {
    criterion("criterion 9 (real-data comparability, manual)", || {
        panic!("supply the real dataset and follow the documented procedure");
    });
}

#[test]
fn acceptance_pipeline_is_deterministic() {
    // not a numbered criterion, but the suite relies on it: identical
    // inputs must serialize to identical bytes
    let plan = six_lap_plan([2, 1], 5);
    let (recording, _) = synth::generate(&plan).unwrap();
    let grammar = synth::biathlon_grammar(&plan).unwrap();
    let a = recognize(&recording, &grammar, &RecognizeOptions::default()).unwrap();
    let b = recognize(&recording, &grammar, &RecognizeOptions::default()).unwrap();
    assert_eq!(a.to_json_pretty(), b.to_json_pretty());
}
