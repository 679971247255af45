//! Flat key-value experiment configuration.
//!
//! One dotted key per field, `key = value`, `#` comments, unknown keys are
//! errors. Every field has a default, so an empty file is a runnable config.
//! The canonical serialization lists every key in a fixed order and is what
//! the fingerprint hashes, so equal configs fingerprint equally.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mlp::OptimizerKind;
use crate::replay::ReplayStrategy;
use crate::schedules::{Schedule, ScheduleKind};
use crate::tabular::{DimensionSpec, Discretizer, EpsilonBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    Tabular,
    Dqn,
}

/// Which decay rule `schedule.kind` names; the numeric parameters live in
/// their own keys so switching kinds keeps the rest intact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKindTag {
    Exponential,
    Linear,
    Logarithmic,
    Inverse,
    Sinusoidal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub kind: ScheduleKindTag,
    pub beta: f64,
    pub horizon: f64,
    pub scale: f64,
    pub rate: f64,
    pub floor: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            kind: ScheduleKindTag::Exponential,
            beta: 0.9999,
            horizon: 25_000.0,
            scale: 0.1,
            rate: 3.0 / 1000.0,
            floor: 0.0,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Schedule {
        let kind = match self.kind {
            ScheduleKindTag::Exponential => ScheduleKind::Exponential { beta: self.beta },
            ScheduleKindTag::Linear => ScheduleKind::Linear { horizon: self.horizon },
            ScheduleKindTag::Logarithmic => ScheduleKind::Logarithmic { scale: self.scale },
            ScheduleKindTag::Inverse => ScheduleKind::Inverse { rate: self.rate },
            ScheduleKindTag::Sinusoidal => ScheduleKind::Sinusoidal { beta: self.beta },
        };
        Schedule::with_floor(kind, self.floor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub bins: [usize; 4],
    pub range_x: (f64, f64),
    pub range_v: (f64, f64),
    pub range_theta: (f64, f64),
    pub range_omega: (f64, f64),
    pub epsilon_basis: EpsilonBasis,
}

impl Default for TabularConfig {
    fn default() -> Self {
        TabularConfig {
            alpha: 0.1,
            gamma: 0.99,
            bins: [8, 8, 12, 12],
            range_x: (-2.4, 2.4),
            range_v: (-3.0, 3.0),
            range_theta: (-0.2095, 0.2095),
            range_omega: (-3.5, 3.5),
            epsilon_basis: EpsilonBasis::Episode,
        }
    }
}

impl TabularConfig {
    pub fn discretizer(&self) -> Result<Discretizer> {
        Discretizer::new([
            DimensionSpec { bins: self.bins[0], low: self.range_x.0, high: self.range_x.1 },
            DimensionSpec { bins: self.bins[1], low: self.range_v.0, high: self.range_v.1 },
            DimensionSpec {
                bins: self.bins[2],
                low: self.range_theta.0,
                high: self.range_theta.1,
            },
            DimensionSpec {
                bins: self.bins[3],
                low: self.range_omega.0,
                high: self.range_omega.1,
            },
        ])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub gamma: f64,
    pub lr: f64,
    pub widths: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub target_sync_every: u64,
    pub warmup: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: 0.99,
            lr: 1e-3,
            widths: vec![4, 8, 8, 2],
            optimizer: OptimizerKind::Adam,
            target_sync_every: 100,
            warmup: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayConfig {
    pub strategy: ReplayStrategy,
    pub capacity: usize,
    pub batch: usize,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            strategy: ReplayStrategy::Uniform,
            capacity: 10_000,
            batch: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerConfig {
    pub alpha: f64,
    pub beta0: f64,
    pub eps: f64,
    /// Steps until the IS exponent reaches 1; 0 means "auto", resolved to
    /// the run's maximum step budget (episodes x 500).
    pub t_final: u64,
}

impl Default for PerConfig {
    fn default() -> Self {
        PerConfig {
            alpha: 0.6,
            beta0: 0.4,
            eps: 1e-5,
            t_final: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    /// Trailing-average window for summaries and plots.
    pub window: usize,
    /// Record measured per-episode wall time in episode rows. Off by
    /// default: timing varies run to run, and the CSV contract is
    /// byte-reproducibility. Run-level timing is always collected
    /// separately.
    pub record_wall_time: bool,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            window: 100,
            record_wall_time: false,
        }
    }
}

/// Everything a run needs; see the field groups for defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: AlgorithmKind,
    pub episodes: u32,
    pub seeds: Vec<u64>,
    pub reward_on_termination: bool,
    pub schedule: ScheduleConfig,
    pub tabular: TabularConfig,
    pub dqn: DqnConfig,
    pub replay: ReplayConfig,
    pub per: PerConfig,
    pub harness: HarnessConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: AlgorithmKind::Dqn,
            episodes: 600,
            seeds: vec![1, 2, 3, 4, 5],
            reward_on_termination: false,
            schedule: ScheduleConfig::default(),
            tabular: TabularConfig::default(),
            dqn: DqnConfig::default(),
            replay: ReplayConfig::default(),
            per: PerConfig::default(),
            harness: HarnessConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses the flat format; unknown keys and malformed values are errors
    /// naming the offending key.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", line_no + 1))
            })?;
            config.apply(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    pub fn from_file(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "algorithm" => {
                self.algorithm = match value {
                    "tabular" => AlgorithmKind::Tabular,
                    "dqn" => AlgorithmKind::Dqn,
                    other => return Err(bad(key, other, "tabular|dqn")),
                }
            }
            "episodes" => self.episodes = parse_num(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "reward_on_termination" => self.reward_on_termination = parse_bool(key, value)?,
            "schedule.kind" => {
                self.schedule.kind = match value {
                    "exponential" => ScheduleKindTag::Exponential,
                    "linear" => ScheduleKindTag::Linear,
                    "logarithmic" => ScheduleKindTag::Logarithmic,
                    "inverse" => ScheduleKindTag::Inverse,
                    "sinusoidal" => ScheduleKindTag::Sinusoidal,
                    other => {
                        return Err(bad(
                            key,
                            other,
                            "exponential|linear|logarithmic|inverse|sinusoidal",
                        ))
                    }
                }
            }
            "schedule.beta" => self.schedule.beta = parse_num(key, value)?,
            "schedule.horizon" => self.schedule.horizon = parse_num(key, value)?,
            "schedule.scale" => self.schedule.scale = parse_num(key, value)?,
            "schedule.rate" => self.schedule.rate = parse_num(key, value)?,
            "schedule.floor" => self.schedule.floor = parse_num(key, value)?,
            "tabular.alpha" => self.tabular.alpha = parse_num(key, value)?,
            "tabular.gamma" => self.tabular.gamma = parse_num(key, value)?,
            "tabular.bins" => {
                let bins: Vec<usize> = parse_list(key, value)?;
                if bins.len() != 4 {
                    return Err(bad(key, value, "four comma-separated bin counts"));
                }
                self.tabular.bins = [bins[0], bins[1], bins[2], bins[3]];
            }
            "tabular.range.x" => self.tabular.range_x = parse_pair(key, value)?,
            "tabular.range.v" => self.tabular.range_v = parse_pair(key, value)?,
            "tabular.range.theta" => self.tabular.range_theta = parse_pair(key, value)?,
            "tabular.range.omega" => self.tabular.range_omega = parse_pair(key, value)?,
            "tabular.epsilon_basis" => {
                self.tabular.epsilon_basis = match value {
                    "episode" => EpsilonBasis::Episode,
                    "step" => EpsilonBasis::Step,
                    other => return Err(bad(key, other, "episode|step")),
                }
            }
            "dqn.gamma" => self.dqn.gamma = parse_num(key, value)?,
            "dqn.lr" => self.dqn.lr = parse_num(key, value)?,
            "dqn.widths" => self.dqn.widths = parse_list(key, value)?,
            "dqn.optimizer" => {
                self.dqn.optimizer = match value {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    other => return Err(bad(key, other, "adam|sgd")),
                }
            }
            "dqn.target_sync_every" => self.dqn.target_sync_every = parse_num(key, value)?,
            "dqn.warmup" => self.dqn.warmup = parse_num(key, value)?,
            "replay.strategy" => {
                self.replay.strategy = match value {
                    "none" => ReplayStrategy::NoReplay,
                    "uniform" => ReplayStrategy::Uniform,
                    "prioritized" => ReplayStrategy::Prioritized,
                    other => return Err(bad(key, other, "none|uniform|prioritized")),
                }
            }
            "replay.capacity" => self.replay.capacity = parse_num(key, value)?,
            "replay.batch" => self.replay.batch = parse_num(key, value)?,
            "per.alpha" => self.per.alpha = parse_num(key, value)?,
            "per.beta0" => self.per.beta0 = parse_num(key, value)?,
            "per.eps" => self.per.eps = parse_num(key, value)?,
            "per.t_final" => self.per.t_final = parse_num(key, value)?,
            "harness.window" => self.harness.window = parse_num(key, value)?,
            "harness.record_wall_time" => {
                self.harness.record_wall_time = parse_bool(key, value)?
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Fixed-order listing of every key; floats print in Rust's shortest
    /// round-trip form so parse(canonical(c)) == c.
    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        let algorithm = match self.algorithm {
            AlgorithmKind::Tabular => "tabular",
            AlgorithmKind::Dqn => "dqn",
        };
        let kind = match self.schedule.kind {
            ScheduleKindTag::Exponential => "exponential",
            ScheduleKindTag::Linear => "linear",
            ScheduleKindTag::Logarithmic => "logarithmic",
            ScheduleKindTag::Inverse => "inverse",
            ScheduleKindTag::Sinusoidal => "sinusoidal",
        };
        let optimizer = match self.dqn.optimizer {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        };
        let strategy = match self.replay.strategy {
            ReplayStrategy::NoReplay => "none",
            ReplayStrategy::Uniform => "uniform",
            ReplayStrategy::Prioritized => "prioritized",
        };
        let seeds = join(&self.seeds);
        let bins = join(&self.tabular.bins);
        let widths = join(&self.dqn.widths);

        let _ = writeln!(s, "algorithm = {algorithm}");
        let _ = writeln!(s, "episodes = {}", self.episodes);
        let _ = writeln!(s, "seeds = {seeds}");
        let _ = writeln!(s, "reward_on_termination = {}", self.reward_on_termination);
        let _ = writeln!(s, "schedule.kind = {kind}");
        let _ = writeln!(s, "schedule.beta = {}", self.schedule.beta);
        let _ = writeln!(s, "schedule.horizon = {}", self.schedule.horizon);
        let _ = writeln!(s, "schedule.scale = {}", self.schedule.scale);
        let _ = writeln!(s, "schedule.rate = {}", self.schedule.rate);
        let _ = writeln!(s, "schedule.floor = {}", self.schedule.floor);
        let _ = writeln!(s, "tabular.alpha = {}", self.tabular.alpha);
        let _ = writeln!(s, "tabular.gamma = {}", self.tabular.gamma);
        let _ = writeln!(s, "tabular.bins = {bins}");
        let _ = writeln!(s, "tabular.range.x = {}", pair(self.tabular.range_x));
        let _ = writeln!(s, "tabular.range.v = {}", pair(self.tabular.range_v));
        let _ = writeln!(s, "tabular.range.theta = {}", pair(self.tabular.range_theta));
        let _ = writeln!(s, "tabular.range.omega = {}", pair(self.tabular.range_omega));
        let basis = match self.tabular.epsilon_basis {
            EpsilonBasis::Episode => "episode",
            EpsilonBasis::Step => "step",
        };
        let _ = writeln!(s, "tabular.epsilon_basis = {basis}");
        let _ = writeln!(s, "dqn.gamma = {}", self.dqn.gamma);
        let _ = writeln!(s, "dqn.lr = {}", self.dqn.lr);
        let _ = writeln!(s, "dqn.widths = {widths}");
        let _ = writeln!(s, "dqn.optimizer = {optimizer}");
        let _ = writeln!(s, "dqn.target_sync_every = {}", self.dqn.target_sync_every);
        let _ = writeln!(s, "dqn.warmup = {}", self.dqn.warmup);
        let _ = writeln!(s, "replay.strategy = {strategy}");
        let _ = writeln!(s, "replay.capacity = {}", self.replay.capacity);
        let _ = writeln!(s, "replay.batch = {}", self.replay.batch);
        let _ = writeln!(s, "per.alpha = {}", self.per.alpha);
        let _ = writeln!(s, "per.beta0 = {}", self.per.beta0);
        let _ = writeln!(s, "per.eps = {}", self.per.eps);
        let _ = writeln!(s, "per.t_final = {}", self.per.t_final);
        let _ = writeln!(s, "harness.window = {}", self.harness.window);
        let _ = writeln!(s, "harness.record_wall_time = {}", self.harness.record_wall_time);
        s
    }

    /// FNV-1a hash of the canonical text, hex-encoded. Stable across
    /// platforms and releases, unlike the standard library hasher.
    pub fn fingerprint(&self) -> String {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.to_canonical_string().bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }

    /// The IS-annealing horizon with `auto` resolved against this config's
    /// maximum step budget.
    pub fn beta_horizon(&self) -> u64 {
        if self.per.t_final > 0 {
            self.per.t_final
        } else {
            (self.episodes as u64 * 500).max(1)
        }
    }

    /// Structural checks that are cheaper to do once up front.
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes: must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: need at least one seed".into()));
        }
        if !(0.0 < self.tabular.alpha && self.tabular.alpha <= 1.0) {
            return Err(Error::Config("tabular.alpha: must lie in (0, 1]".into()));
        }
        if !(0.0 < self.tabular.gamma && self.tabular.gamma <= 1.0) {
            return Err(Error::Config("tabular.gamma: must lie in (0, 1]".into()));
        }
        if !(0.0 < self.dqn.gamma && self.dqn.gamma <= 1.0) {
            return Err(Error::Config("dqn.gamma: must lie in (0, 1]".into()));
        }
        if self.dqn.lr <= 0.0 {
            return Err(Error::Config("dqn.lr: must be positive".into()));
        }
        if self.replay.batch == 0 || self.replay.capacity == 0 {
            return Err(Error::Config(
                "replay.batch and replay.capacity must be positive".into(),
            ));
        }
        if !(0.0 < self.per.beta0 && self.per.beta0 <= 1.0) {
            return Err(Error::Config("per.beta0: must lie in (0, 1]".into()));
        }
        if self.per.alpha < 0.0 {
            return Err(Error::Config("per.alpha: must be non-negative".into()));
        }
        if self.harness.window == 0 {
            return Err(Error::Config("harness.window: must be at least 1".into()));
        }
        if self.dqn.target_sync_every == 0 {
            return Err(Error::Config(
                "dqn.target_sync_every: must be at least 1".into(),
            ));
        }
        self.tabular.discretizer()?;
        Ok(())
    }
}

fn bad(key: &str, value: &str, expected: &str) -> Error {
    Error::Config(format!("{key}: `{value}` invalid, expected {expected}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: `{value}` is not a valid number")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(bad(key, other, "true|false")),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: `{part}` is not a valid number")))
        })
        .collect()
}

fn parse_pair(key: &str, value: &str) -> Result<(f64, f64)> {
    let nums: Vec<f64> = parse_list(key, value)?;
    if nums.len() != 2 {
        return Err(bad(key, value, "`low,high`"));
    }
    Ok((nums[0], nums[1]))
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn pair(p: (f64, f64)) -> String {
    format!("{},{}", p.0, p.1)
}
