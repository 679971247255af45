//! Per-episode metrics shared by both learners and the harness.

/// One row of run output. `ret` is the episode's summed reward (the
/// cumulative reward plotted by the harness); `wall_ms` is 0 unless the run
/// was configured to record per-episode timing.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u32,
    pub ret: f64,
    pub length: u32,
    pub epsilon_at_end: f64,
    pub wall_ms: f64,
    pub global_step_at_end: u64,
}

/// Trailing mean with the window clamped at the start of the sequence:
/// element `i` averages `values[max(0, i - window + 1) ..= i]`.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        let n = (i + 1).min(window);
        out.push(sum / n as f64);
    }
    out
}

/// Everything one seeded run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
    pub moving_average: Vec<f64>,
    /// Hash of the canonical config text.
    pub fingerprint: String,
    /// Measured run duration; `None` when reconstructed from files that did
    /// not record timing.
    pub total_wall_s: Option<f64>,
}

impl RunSummary {
    pub fn returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ret).collect()
    }

    /// The trailing average at the final episode.
    pub fn final_average(&self) -> f64 {
        self.moving_average.last().copied().unwrap_or(0.0)
    }

    /// First episode index whose trailing average reaches `threshold`.
    pub fn episodes_to_threshold(&self, threshold: f64) -> Option<u32> {
        self.moving_average
            .iter()
            .position(|&m| m >= threshold)
            .map(|i| i as u32)
    }
}
