//! Comparing two groups of seeded runs.

use std::fmt;

use crate::metrics::RunSummary;

/// Group-level comparison: medians of the per-seed final trailing averages,
/// median episodes-to-threshold among the seeds that reached it, and the
/// ratio of measured wall time per episode (group A over group B, absent
/// when either group carries no timing).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub threshold: f64,
    pub final_average_a: f64,
    pub final_average_b: f64,
    pub final_average_delta: f64,
    pub episodes_to_threshold_a: Option<f64>,
    pub episodes_to_threshold_b: Option<f64>,
    pub wall_per_episode_ratio: Option<f64>,
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn group_final_average(group: &[RunSummary]) -> f64 {
    let mut finals: Vec<f64> = group.iter().map(|s| s.final_average()).collect();
    median(&mut finals).unwrap_or(0.0)
}

fn group_threshold_crossing(group: &[RunSummary], threshold: f64) -> Option<f64> {
    let mut crossings: Vec<f64> = group
        .iter()
        .filter_map(|s| s.episodes_to_threshold(threshold))
        .map(|e| e as f64)
        .collect();
    median(&mut crossings)
}

fn group_wall_per_episode(group: &[RunSummary]) -> Option<f64> {
    let mut wall = 0.0;
    let mut episodes = 0usize;
    for summary in group {
        wall += summary.total_wall_s?;
        episodes += summary.records.len();
    }
    if episodes == 0 {
        return None;
    }
    Some(wall / episodes as f64)
}

pub fn compare_runs(a: &[RunSummary], b: &[RunSummary], threshold: f64) -> ComparisonReport {
    assert!(!a.is_empty() && !b.is_empty(), "both groups must be non-empty");
    let final_average_a = group_final_average(a);
    let final_average_b = group_final_average(b);
    let wall_per_episode_ratio = match (group_wall_per_episode(a), group_wall_per_episode(b)) {
        (Some(wa), Some(wb)) if wb > 0.0 => Some(wa / wb),
        _ => None,
    };
    ComparisonReport {
        threshold,
        final_average_a,
        final_average_b,
        final_average_delta: final_average_a - final_average_b,
        episodes_to_threshold_a: group_threshold_crossing(a, threshold),
        episodes_to_threshold_b: group_threshold_crossing(b, threshold),
        wall_per_episode_ratio,
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |value: Option<f64>| match value {
            Some(v) => format!("{v}"),
            None => "absent".to_string(),
        };
        writeln!(f, "threshold = {}", self.threshold)?;
        writeln!(f, "final_average_a = {}", self.final_average_a)?;
        writeln!(f, "final_average_b = {}", self.final_average_b)?;
        writeln!(f, "final_average_delta = {}", self.final_average_delta)?;
        writeln!(
            f,
            "episodes_to_threshold_a = {}",
            show(self.episodes_to_threshold_a)
        )?;
        writeln!(
            f,
            "episodes_to_threshold_b = {}",
            show(self.episodes_to_threshold_b)
        )?;
        writeln!(
            f,
            "wall_per_episode_ratio = {}",
            show(self.wall_per_episode_ratio)
        )
    }
}
