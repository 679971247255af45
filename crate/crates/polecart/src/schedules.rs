//! Epsilon-greedy action selection and the five decay schedules.
//!
//! All schedules are pure functions of the global environment-step counter.
//! The logarithmic rule uses the natural log; the run manifest records this.

use rand::Rng;

use crate::env::Action;
use crate::error::{Error, Result};

/// Decay rule for the exploration rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// `beta^t`.
    Exponential { beta: f64 },
    /// `max(0, 1 - t/horizon)`.
    Linear { horizon: f64 },
    /// `max(0, 1 - scale * ln(t + 1))`.
    Logarithmic { scale: f64 },
    /// `1 / (1 + rate * t)`.
    Inverse { rate: f64 },
    /// `beta^t * |sin(t / 2)|`.
    Sinusoidal { beta: f64 },
}

/// A decay rule plus an optional lower bound on epsilon (0 by default, i.e.
/// the published rules apply unmodified).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub floor: f64,
}

impl Schedule {
    pub fn new(kind: ScheduleKind) -> Self {
        Schedule { kind, floor: 0.0 }
    }

    pub fn with_floor(kind: ScheduleKind, floor: f64) -> Self {
        Schedule { kind, floor }
    }

    /// Exploration rate at global step `t`, clamped to `[0, 1]`.
    pub fn epsilon_at(&self, t: u64) -> f64 {
        let t = t as f64;
        let raw = match self.kind {
            ScheduleKind::Exponential { beta } => beta.powf(t),
            ScheduleKind::Linear { horizon } => (1.0 - t / horizon).max(0.0),
            ScheduleKind::Logarithmic { scale } => (1.0 - scale * (t + 1.0).ln()).max(0.0),
            ScheduleKind::Inverse { rate } => 1.0 / (1.0 + rate * t),
            ScheduleKind::Sinusoidal { beta } => beta.powf(t) * (0.5 * t).sin().abs(),
        };
        raw.max(self.floor).clamp(0.0, 1.0)
    }

    /// Short human-readable form, used in manifests.
    pub fn describe(&self) -> String {
        let rule = match self.kind {
            ScheduleKind::Exponential { beta } => format!("exponential(beta={beta})"),
            ScheduleKind::Linear { horizon } => format!("linear(horizon={horizon})"),
            ScheduleKind::Logarithmic { scale } => format!("logarithmic(scale={scale})"),
            ScheduleKind::Inverse { rate } => format!("inverse(rate={rate})"),
            ScheduleKind::Sinusoidal { beta } => format!("sinusoidal(beta={beta})"),
        };
        if self.floor > 0.0 {
            format!("{rule} floor={}", self.floor)
        } else {
            rule
        }
    }
}

/// Outcome of one epsilon-greedy draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExplorationDecision {
    pub explore: bool,
    pub chosen_action: Action,
}

/// Epsilon-greedy selection over an arbitrary number of actions; returns
/// `(explored, index)`.
///
/// Draws `c` uniform on `[0, 1)`; explores (uniform action) when
/// `c < epsilon`, otherwise exploits the argmax with uniform tie-breaking
/// among maxima.
pub fn select_index<R: Rng>(q_values: &[f64], epsilon: f64, rng: &mut R) -> Result<(bool, usize)> {
    if q_values.is_empty() {
        return Err(Error::EmptyQValues);
    }
    let c: f64 = rng.gen();
    if c < epsilon {
        return Ok((true, rng.gen_range(0..q_values.len())));
    }
    let best = q_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = q_values.iter().filter(|&&q| q == best).count();
    let pick = if ties == 1 { 0 } else { rng.gen_range(0..ties) };
    let index = q_values
        .iter()
        .enumerate()
        .filter(|(_, &q)| q == best)
        .nth(pick)
        .map(|(i, _)| i)
        .expect("at least one maximum exists");
    Ok((false, index))
}

/// Epsilon-greedy selection over the two cart-pole actions.
pub fn select_action<R: Rng>(
    q_values: &[f64; 2],
    epsilon: f64,
    rng: &mut R,
) -> ExplorationDecision {
    let (explore, index) =
        select_index(q_values, epsilon, rng).expect("two-element slice is never empty");
    ExplorationDecision {
        explore,
        chosen_action: Action::from_index(index).expect("index within action set"),
    }
}
