//! Executing experiments: one independent run per seed, optionally in
//! parallel, plus directory-level output and reload.

use std::path::Path;
use std::time::Instant;

use crate::dqn::{DqnAgent, DqnOptions, TrainAbort};
use crate::env::{CartPole, EnvConfig};
use crate::error::{Error, Result};
use crate::harness::config::{AlgorithmKind, ExperimentConfig};
use crate::harness::csv;
use crate::harness::svg;
use crate::metrics::{moving_average, EpisodeRecord, RunSummary};
use crate::mlp::Mlp;
use crate::replay::{PerParams, ReplayBuffer};
use crate::rng::rng_for_seed;
use crate::tabular::{train_tabular, TabularParams};

/// Executes the run for one seed.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunSummary> {
    match run_seed(config, seed) {
        (_, Some(error)) => Err(error),
        (summary, None) => Ok(summary.expect("summary present when no error")),
    }
}

/// Like [`run_single`], but an aborted run still yields the summary of the
/// episodes it completed, so partial output can be flushed.
fn run_seed(config: &ExperimentConfig, seed: u64) -> (Option<RunSummary>, Option<Error>) {
    if let Err(e) = config.validate() {
        return (None, Some(e));
    }
    let started = Instant::now();
    let mut rng = rng_for_seed(seed);
    let mut env = CartPole::new(EnvConfig {
        reward_on_termination: config.reward_on_termination,
    });

    let (records, error) = match config.algorithm {
        AlgorithmKind::Tabular => {
            let discretizer = match config.tabular.discretizer() {
                Ok(d) => d,
                Err(e) => return (None, Some(e)),
            };
            let params = TabularParams {
                discretizer,
                alpha: config.tabular.alpha,
                gamma: config.tabular.gamma,
                schedule: config.schedule.build(),
                episodes: config.episodes,
                epsilon_basis: config.tabular.epsilon_basis,
            };
            let (_table, records) = train_tabular(
                &mut env,
                &params,
                &mut rng,
                config.harness.record_wall_time,
            );
            (records, None)
        }
        AlgorithmKind::Dqn => {
            let policy = match Mlp::init(&config.dqn.widths, &mut rng) {
                Ok(p) => p,
                Err(e) => return (None, Some(e)),
            };
            let buffer = ReplayBuffer::new(
                config.replay.strategy,
                config.replay.capacity,
                PerParams {
                    exponent: config.per.alpha,
                    epsilon: config.per.eps,
                },
            );
            let options = DqnOptions {
                gamma: config.dqn.gamma,
                target_sync_every: config.dqn.target_sync_every,
                batch_size: config.replay.batch,
                warmup: config.dqn.warmup,
                optimizer: config.dqn.optimizer,
                beta0: config.per.beta0,
                beta_horizon: config.beta_horizon(),
            };
            let mut agent = DqnAgent::new(policy, buffer, config.schedule.build(), options);
            match crate::dqn::train_dqn(
                &mut env,
                &mut agent,
                config.episodes,
                config.dqn.lr,
                &mut rng,
                config.harness.record_wall_time,
            ) {
                Ok(records) => (records, None),
                Err(abort) => {
                    let TrainAbort { records, error } = *abort;
                    (records, Some(error))
                }
            }
        }
    };

    let summary = summarize(config, seed, records, Some(started.elapsed().as_secs_f64()));
    (Some(summary), error)
}

fn summarize(
    config: &ExperimentConfig,
    seed: u64,
    records: Vec<EpisodeRecord>,
    total_wall_s: Option<f64>,
) -> RunSummary {
    let returns: Vec<f64> = records.iter().map(|r| r.ret).collect();
    RunSummary {
        seed,
        moving_average: moving_average(&returns, config.harness.window),
        records,
        fingerprint: config.fingerprint(),
        total_wall_s,
    }
}

/// One summary per configured seed, in seed order. Runs are mutually
/// independent; with the `parallel` feature they execute on the rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    config.validate()?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        config
            .seeds
            .par_iter()
            .map(|&seed| run_single(config, seed))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_experiment_sequential(config)
    }
}

/// Same contract as [`run_experiment`], forced onto the current thread.
/// Exists so the two execution modes can be compared directly.
pub fn run_experiment_sequential(config: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    config.validate()?;
    config
        .seeds
        .iter()
        .map(|&seed| run_single(config, seed))
        .collect()
}

/// Runs the experiment and writes everything into `dir`: one CSV per seed,
/// the manifest, the plot, and measured per-seed wall times (`timings.txt`,
/// the one output that is not byte-reproducible). On a mid-run abort the
/// completed seeds' CSVs are flushed before the error is returned.
pub fn execute_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<Vec<RunSummary>> {
    config.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let results: Vec<(u64, (Option<RunSummary>, Option<Error>))> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            config
                .seeds
                .par_iter()
                .map(|&seed| (seed, run_seed(config, seed)))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            config
                .seeds
                .iter()
                .map(|&seed| (seed, run_seed(config, seed)))
                .collect()
        }
    };

    // Flush every summary that exists, including the partial output of an
    // aborted seed, before surfacing the first error.
    let mut summaries = Vec::with_capacity(results.len());
    let mut first_error = None;
    for (seed, (summary, error)) in results {
        if let Some(summary) = summary {
            summaries.push(summary);
        }
        if let Some(error) = error {
            first_error.get_or_insert((seed, error));
        }
    }

    csv::write_outputs(config, &summaries, dir)?;
    let plottable: Vec<RunSummary> = summaries
        .iter()
        .filter(|s| !s.records.is_empty())
        .cloned()
        .collect();
    if !plottable.is_empty() {
        svg::emit_plot(&plottable, &dir.join("plot.svg"))?;
    }
    csv::write_timings(&summaries, dir)?;

    if let Some((seed, error)) = first_error {
        return Err(Error::Config(format!("seed {seed} aborted: {error}")));
    }
    Ok(summaries)
}

/// Rebuilds summaries from a run directory (CSVs plus manifest; timings are
/// picked up when present).
pub fn load_run_dir(dir: &Path) -> Result<Vec<RunSummary>> {
    let config = csv::read_manifest_config(dir)?;
    let timings = csv::read_timings(dir);
    let mut seeds: Vec<u64> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(seed) = name
            .strip_prefix("seed_")
            .and_then(|rest| rest.strip_suffix(".csv"))
            .and_then(|s| s.parse().ok())
        {
            seeds.push(seed);
        }
    }
    seeds.sort_unstable();
    if seeds.is_empty() {
        return Err(Error::Config(format!(
            "{}: no seed_*.csv files found",
            dir.display()
        )));
    }

    let mut summaries = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let records = csv::read_run_csv(&dir.join(format!("seed_{seed}.csv")))?;
        let mut summary = summarize(&config, seed, records, None);
        summary.total_wall_s = timings.get(&seed).copied();
        summaries.push(summary);
    }
    Ok(summaries)
}
