//! Per-segment performance indicators derived from a recognized solution.
//!
//! Each consecutive step pair in each part of the optimal solution is one
//! segment. A segment carries its duration, the mean speed over its window,
//! and per-axis acceleration aggregates, all computed strictly over samples
//! inside `[start, end]`. Lap counting is driven by a configurable boundary
//! node (the gate that marks the end of a lap); shooting-bout reports pull
//! out the range and shooting windows the way coaches read them.

use std::io::Write;

use crate::recognizer::TotalSolution;
use crate::timeseries::{Channel, Recording, Timestamp};

/// Channel and node names the metrics stage should use.
#[derive(Debug, Clone)]
pub struct MetricsConfig {
    pub speed_channel: String,
    pub accel_channel: String,
    /// Each traversal of this node ends a lap.
    pub lap_boundary_node: String,
    pub range_enter_node: String,
    pub shooting_start_node: String,
    pub shooting_finish_node: String,
    pub range_leave_node: String,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            speed_channel: "speed".to_string(),
            accel_channel: "accel".to_string(),
            lap_boundary_node: "RL".to_string(),
            range_enter_node: "RE".to_string(),
            shooting_start_node: "SS".to_string(),
            shooting_finish_node: "SF".to_string(),
            range_leave_node: "RL".to_string(),
        }
    }
}

/// Statistics for one edge traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMetrics {
    pub edge: (String, String),
    pub lap_index: u32,
    pub start_t: Timestamp,
    pub end_t: Timestamp,
    pub duration_s: f64,
    pub mean_speed_mps: Option<f64>,
    pub mean_accel_g: Option<[f64; 3]>,
    /// Per-axis extreme by magnitude, sign preserved.
    pub max_accel_g: Option<[f64; 3]>,
}

/// One shooting bout, shaped like the published range summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeReport {
    pub lap_index: u32,
    pub range_time_s: f64,
    pub shooting_time_s: f64,
    pub shooting_z_accel_g: Option<f64>,
}

fn mean_scalar(channel: &Channel, from: Timestamp, to: Timestamp) -> Option<f64> {
    let window = channel.slice(from, to).ok()?;
    if window.is_empty() {
        return None;
    }
    let sum: f64 = window
        .samples()
        .iter()
        .filter_map(|s| s.value.as_scalar())
        .sum();
    Some(sum / window.len() as f64)
}

fn accel_aggregates(
    channel: &Channel,
    from: Timestamp,
    to: Timestamp,
) -> Option<([f64; 3], [f64; 3])> {
    let window = channel.slice(from, to).ok()?;
    if window.is_empty() {
        return None;
    }
    let mut sum = [0.0f64; 3];
    let mut max = [0.0f64; 3];
    for sample in window.samples() {
        let v = sample.value.as_vector3()?;
        for axis in 0..3 {
            sum[axis] += v[axis];
            if v[axis].abs() > max[axis].abs() {
                max[axis] = v[axis];
            }
        }
    }
    let n = window.len() as f64;
    Some(([sum[0] / n, sum[1] / n, sum[2] / n], max))
}

fn mean_accel_axis(channel: &Channel, from: Timestamp, to: Timestamp, axis: usize) -> Option<f64> {
    accel_aggregates(channel, from, to).map(|(mean, _)| mean[axis])
}

/// One [`SegmentMetrics`] per consecutive step pair in each part. A missing
/// channel leaves the corresponding aggregates empty instead of failing.
pub fn segment_metrics(
    solution: &TotalSolution,
    recording: &Recording,
    config: &MetricsConfig,
) -> Vec<SegmentMetrics> {
    let speed = recording.channel(&config.speed_channel);
    let accel = recording.channel(&config.accel_channel);
    let mut out = Vec::new();
    let mut lap: u32 = 1;
    for part in solution.parts() {
        for w in part.steps().windows(2) {
            let (from_step, to_step) = (&w[0], &w[1]);
            let (start_t, end_t) = (from_step.t, to_step.t);
            let (mean_accel_g, max_accel_g) =
                match accel.and_then(|c| accel_aggregates(c, start_t, end_t)) {
                    Some((mean, max)) => (Some(mean), Some(max)),
                    None => (None, None),
                };
            out.push(SegmentMetrics {
                edge: (from_step.node.clone(), to_step.node.clone()),
                lap_index: lap,
                start_t,
                end_t,
                duration_s: end_t.millis_since(start_t) as f64 / 1000.0,
                mean_speed_mps: speed.and_then(|c| mean_scalar(c, start_t, end_t)),
                mean_accel_g,
                max_accel_g,
            });
            if to_step.node == config.lap_boundary_node {
                lap += 1;
            }
        }
    }
    out
}

/// One report per shooting bout (range-enter .. range-leave traversal that
/// contains a shooting window). Solutions without bouts yield an empty list.
pub fn range_report(
    solution: &TotalSolution,
    recording: &Recording,
    config: &MetricsConfig,
) -> Vec<RangeReport> {
    let accel = recording.channel(&config.accel_channel);
    let mut out = Vec::new();
    let mut lap: u32 = 1;
    for part in solution.parts() {
        let steps = part.steps();
        for (i, step) in steps.iter().enumerate() {
            if step.node == config.range_enter_node {
                // scan forward for this bout's shooting window and range exit
                let mut ss: Option<Timestamp> = None;
                let mut shooting: Option<(Timestamp, Timestamp)> = None;
                let mut leave: Option<Timestamp> = None;
                for next in &steps[i + 1..] {
                    if next.node == config.shooting_start_node && ss.is_none() {
                        ss = Some(next.t);
                    } else if next.node == config.shooting_finish_node {
                        if let (Some(start), None) = (ss, shooting) {
                            shooting = Some((start, next.t));
                        }
                    } else if next.node == config.range_leave_node {
                        leave = Some(next.t);
                        break;
                    }
                }
                if let (Some((ss_t, sf_t)), Some(rl_t)) = (shooting, leave) {
                    out.push(RangeReport {
                        lap_index: lap,
                        range_time_s: rl_t.millis_since(step.t) as f64 / 1000.0,
                        shooting_time_s: sf_t.millis_since(ss_t) as f64 / 1000.0,
                        shooting_z_accel_g: accel.and_then(|c| mean_accel_axis(c, ss_t, sf_t, 2)),
                    });
                }
            }
            if step.node == config.lap_boundary_node && i > 0 {
                lap += 1;
            }
        }
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `segments.csv`: one row per segment.
pub fn write_segments_csv(
    segments: &[SegmentMetrics],
    out: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(
        out,
        "lap,edge_from,edge_to,duration_s,mean_speed_mps,max_accel_x_g,max_accel_y_g,max_accel_z_g"
    )?;
    for s in segments {
        let max = s.max_accel_g;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.lap_index,
            s.edge.0,
            s.edge.1,
            s.duration_s,
            fmt_opt(s.mean_speed_mps),
            fmt_opt(max.map(|m| m[0])),
            fmt_opt(max.map(|m| m[1])),
            fmt_opt(max.map(|m| m[2])),
        )?;
    }
    Ok(())
}

/// `range_report.csv`: one row per shooting bout.
pub fn write_range_report_csv(
    dataset: &str,
    reports: &[RangeReport],
    out: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(out, "dataset,lap,range_time_s,shooting_time_s,shooting_z_accel_g")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{}",
            dataset,
            r.lap_index,
            r.range_time_s,
            r.shooting_time_s,
            fmt_opt(r.shooting_z_accel_g),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recognizer::{PartialSolution, PathStep};
    use crate::timeseries::{ChannelKind, SampleValue};

    fn ts(ms: u64) -> Timestamp {
        Timestamp::from_ms(ms)
    }

    fn solution(steps: &[(&str, u64)]) -> TotalSolution {
        TotalSolution::new(vec![PartialSolution::new(
            steps
                .iter()
                .map(|&(n, t)| PathStep::new(n, ts(t)))
                .collect(),
        )
        .unwrap()])
        .unwrap()
    }

    fn recording_with_speed(points: &[(u64, f64)]) -> Recording {
        let mut rec = Recording::new("r");
        let mut c = Channel::new(ChannelKind::Speed, 10.0).unwrap();
        for &(t, v) in points {
            c.push(ts(t), SampleValue::Scalar(v)).unwrap();
        }
        rec.insert_channel("speed", c).unwrap();
        rec
    }

    #[test]
    fn duration_is_exact_timestamp_arithmetic() {
        let sol = solution(&[("UE", 10_000), ("UL", 70_000)]);
        let rec = recording_with_speed(&[(0, 1.0), (100_000, 1.0)]);
        let segs = segment_metrics(&sol, &rec, &MetricsConfig::default());
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].duration_s, 60.0);
        assert_eq!(segs[0].edge, ("UE".to_string(), "UL".to_string()));
    }

    #[test]
    fn constant_speed_segment_has_exact_mean() {
        let points: Vec<(u64, f64)> = (0..=100).map(|i| (i * 100, 3.0)).collect();
        let rec = recording_with_speed(&points);
        let sol = solution(&[("A", 1_000), ("B", 9_000)]);
        let segs = segment_metrics(&sol, &rec, &MetricsConfig::default());
        let mean = segs[0].mean_speed_mps.unwrap();
        assert!((mean - 3.0).abs() < 1e-9);
    }

    #[test]
    fn missing_channels_leave_aggregates_empty() {
        let rec = recording_with_speed(&[(0, 1.0), (10_000, 1.0)]);
        let sol = solution(&[("A", 0), ("B", 5_000)]);
        let segs = segment_metrics(&sol, &rec, &MetricsConfig::default());
        assert!(segs[0].mean_speed_mps.is_some());
        assert!(segs[0].mean_accel_g.is_none());
        assert!(segs[0].max_accel_g.is_none());
    }

    #[test]
    fn lap_index_increments_at_boundary_node() {
        let sol = solution(&[
            ("S", 0),
            ("RL", 10_000),
            ("UE", 20_000),
            ("RL", 30_000),
            ("UE", 40_000),
        ]);
        let rec = recording_with_speed(&[(0, 1.0), (50_000, 1.0)]);
        let segs = segment_metrics(&sol, &rec, &MetricsConfig::default());
        let laps: Vec<u32> = segs.iter().map(|s| s.lap_index).collect();
        assert_eq!(laps, vec![1, 2, 2, 3]);
    }

    #[test]
    fn segment_durations_sum_to_part_coverage() {
        let sol = solution(&[("A", 100), ("B", 7_350), ("C", 9_125), ("D", 44_001)]);
        let rec = recording_with_speed(&[(0, 1.0), (50_000, 1.0)]);
        let segs = segment_metrics(&sol, &rec, &MetricsConfig::default());
        let total_ms: f64 = segs.iter().map(|s| s.duration_s * 1000.0).sum();
        assert_eq!(total_ms.round() as u64, sol.covered_ms());
    }

    #[test]
    fn metrics_ignore_samples_outside_window() {
        let mut points: Vec<(u64, f64)> = (10..=20).map(|i| (i * 1000, 4.0)).collect();
        let rec_inner = recording_with_speed(&points);
        let sol = solution(&[("A", 10_000), ("B", 20_000)]);
        let m1 = segment_metrics(&sol, &rec_inner, &MetricsConfig::default());

        // appending samples outside the window must not change anything
        points.insert(0, (0, 99.0));
        points.push((30_000, 99.0));
        let rec_outer = recording_with_speed(&points);
        let m2 = segment_metrics(&sol, &rec_outer, &MetricsConfig::default());
        assert_eq!(m1[0].mean_speed_mps, m2[0].mean_speed_mps);
    }

    fn recording_with_accel(points: &[(u64, [f64; 3])]) -> Recording {
        let mut rec = Recording::new("r");
        let mut c = Channel::new(ChannelKind::Accel, 50.0).unwrap();
        for &(t, v) in points {
            c.push(ts(t), SampleValue::Vector3(v)).unwrap();
        }
        rec.insert_channel("accel", c).unwrap();
        rec
    }

    #[test]
    fn max_accel_is_extreme_by_magnitude_with_sign() {
        let rec = recording_with_accel(&[
            (0, [0.1, -0.5, 1.0]),
            (20, [-0.3, 0.2, 1.1]),
            (40, [0.2, -0.1, 0.9]),
        ]);
        let sol = solution(&[("A", 0), ("B", 40)]);
        let segs = segment_metrics(&sol, &rec, &MetricsConfig::default());
        assert_eq!(segs[0].max_accel_g.unwrap(), [-0.3, -0.5, 1.1]);
    }

    #[test]
    fn range_report_extracts_bout_windows() {
        let sol = solution(&[
            ("S", 0),
            ("RE", 10_000),
            ("SS", 20_000),
            ("SF", 50_000),
            ("RL", 60_000),
            ("F", 100_000),
        ]);
        let rec = recording_with_accel(&[
            (20_000, [0.0, 0.0, 0.33]),
            (30_000, [0.0, 0.0, 0.33]),
            (40_000, [0.0, 0.0, 0.33]),
            (50_000, [0.0, 0.0, 0.33]),
        ]);
        let reports = range_report(&sol, &rec, &MetricsConfig::default());
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!(r.range_time_s, 50.0);
        assert_eq!(r.shooting_time_s, 30.0);
        assert!((r.shooting_z_accel_g.unwrap() - 0.33).abs() < 1e-12);
        assert!(r.shooting_time_s <= r.range_time_s);
    }

    #[test]
    fn solution_without_bout_gives_empty_report() {
        let sol = solution(&[("S", 0), ("UE", 10_000), ("F", 20_000)]);
        let rec = recording_with_speed(&[(0, 1.0), (30_000, 1.0)]);
        assert!(range_report(&sol, &rec, &MetricsConfig::default()).is_empty());
    }

    #[test]
    fn pass_through_range_without_shooting_is_not_a_bout() {
        let sol = solution(&[("S", 0), ("RE", 10_000), ("RL", 20_000), ("F", 30_000)]);
        let rec = recording_with_speed(&[(0, 1.0), (40_000, 1.0)]);
        assert!(range_report(&sol, &rec, &MetricsConfig::default()).is_empty());
    }

    #[test]
    fn csv_headers_are_stable() {
        let mut buf = Vec::new();
        write_segments_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "lap,edge_from,edge_to,duration_s,mean_speed_mps,max_accel_x_g,max_accel_y_g,max_accel_z_g\n"
        );
        let mut buf = Vec::new();
        write_range_report_csv("r", &[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "dataset,lap,range_time_s,shooting_time_s,shooting_z_accel_g\n"
        );
    }
}
