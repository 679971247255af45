//! `polecart` — seeded cart-pole RL experiments from config files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use polecart::harness::{
    compare_runs, emit_plot, execute_to_dir, load_run_dir, ExperimentConfig,
};

#[derive(Parser)]
#[command(
    name = "polecart",
    about = "Cart-pole Q-learning / DQN experiment runner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Flat key-value config file; an empty file runs the defaults.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Output directory (default: $POLECART_OUT, then ./polecart-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-plot a run directory into a standalone SVG.
    Plot {
        /// Run directory produced by `run` or `replicate`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two run directories.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Trailing-average threshold for episodes-to-threshold.
        #[arg(long, default_value_t = 200.0)]
        threshold: f64,
    },
    /// Run one of the pre-canned study configurations.
    Replicate {
        /// One of: 3, 4a, 4b, 4c, 4d, 5, 6, 7, 8a, 8b, 8c, 8d, 10.
        #[arg(long)]
        figure: String,
        /// Override the preset's seed list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Override the preset's episode count (useful for smoke tests).
        #[arg(long)]
        episodes: Option<u32>,
        /// Output directory (default: $POLECART_OUT, then ./polecart-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // One line, machine-parsable: error: <cause>: <cause>...
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seeds, out } => {
            let mut experiment = ExperimentConfig::from_file(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(seeds) = seeds {
                experiment.seeds = seeds;
            }
            let dir = resolve_out_dir(out);
            run_into(&experiment, &dir)
        }
        Command::Plot { input, out } => {
            let summaries = load_run_dir(&input)
                .with_context(|| format!("loading run dir {}", input.display()))?;
            emit_plot(&summaries, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Compare { a, b, threshold } => {
            let group_a =
                load_run_dir(&a).with_context(|| format!("loading run dir {}", a.display()))?;
            let group_b =
                load_run_dir(&b).with_context(|| format!("loading run dir {}", b.display()))?;
            let report = compare_runs(&group_a, &group_b, threshold);
            print!("{report}");
            Ok(())
        }
        Command::Replicate {
            figure,
            seeds,
            episodes,
            out,
        } => {
            let mut experiment = figure_config(&figure)?;
            if let Some(seeds) = seeds {
                experiment.seeds = seeds;
            }
            if let Some(episodes) = episodes {
                experiment.episodes = episodes;
            }
            let dir = resolve_out_dir(out).join(format!("fig{figure}"));
            run_into(&experiment, &dir)
        }
    }
}

fn run_into(experiment: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.txt"), experiment.to_canonical_string())
        .with_context(|| format!("writing config into {}", dir.display()))?;
    let summaries = execute_to_dir(experiment, dir)?;
    for summary in &summaries {
        println!(
            "seed {}: episodes={} final_avg={:.2} wall_s={:.2}",
            summary.seed,
            summary.records.len(),
            summary.final_average(),
            summary.total_wall_s.unwrap_or(0.0),
        );
    }
    println!("outputs in {}", dir.display());
    Ok(())
}

fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("POLECART_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("polecart-out"))
}

/// The study's experiment matrix. DQN presets run 600 episodes, tabular ones
/// 10000; seeds default to 1..=5.
fn figure_config(figure: &str) -> Result<ExperimentConfig> {
    use polecart::harness::AlgorithmKind;
    use polecart::replay::ReplayStrategy;

    let mut config = ExperimentConfig::default();
    config.seeds = vec![1, 2, 3, 4, 5];

    let tabular = |config: &mut ExperimentConfig| {
        config.algorithm = AlgorithmKind::Tabular;
        config.episodes = 10_000;
    };
    let dqn = |config: &mut ExperimentConfig, strategy: ReplayStrategy| {
        config.algorithm = AlgorithmKind::Dqn;
        config.episodes = 600;
        config.replay.strategy = strategy;
    };

    let set_kind = |config: &mut ExperimentConfig, kind: &str| {
        use polecart::harness::config::ScheduleKindTag;
        config.schedule.kind = match kind {
            "exponential" => ScheduleKindTag::Exponential,
            "linear" => ScheduleKindTag::Linear,
            "logarithmic" => ScheduleKindTag::Logarithmic,
            "inverse" => ScheduleKindTag::Inverse,
            "sinusoidal" => ScheduleKindTag::Sinusoidal,
            _ => unreachable!(),
        };
    };

    match figure {
        "3" | "10" => {
            tabular(&mut config);
            set_kind(&mut config, "exponential");
        }
        "4a" => {
            dqn(&mut config, ReplayStrategy::Uniform);
            set_kind(&mut config, "linear");
        }
        "4b" => {
            dqn(&mut config, ReplayStrategy::Uniform);
            set_kind(&mut config, "logarithmic");
        }
        "4c" => {
            dqn(&mut config, ReplayStrategy::Uniform);
            set_kind(&mut config, "inverse");
        }
        "4d" => {
            dqn(&mut config, ReplayStrategy::Uniform);
            set_kind(&mut config, "sinusoidal");
        }
        "5" => {
            dqn(&mut config, ReplayStrategy::Uniform);
            set_kind(&mut config, "exponential");
        }
        "6" => {
            dqn(&mut config, ReplayStrategy::NoReplay);
            set_kind(&mut config, "exponential");
        }
        "7" => {
            dqn(&mut config, ReplayStrategy::Prioritized);
            set_kind(&mut config, "exponential");
        }
        "8a" => {
            dqn(&mut config, ReplayStrategy::Prioritized);
            set_kind(&mut config, "linear");
        }
        "8b" => {
            dqn(&mut config, ReplayStrategy::Prioritized);
            set_kind(&mut config, "logarithmic");
        }
        "8c" => {
            dqn(&mut config, ReplayStrategy::Prioritized);
            set_kind(&mut config, "inverse");
        }
        "8d" => {
            dqn(&mut config, ReplayStrategy::Prioritized);
            set_kind(&mut config, "sinusoidal");
        }
        other => bail!("unknown figure `{other}`; expected one of 3, 4a-4d, 5, 6, 7, 8a-8d, 10"),
    }
    Ok(config)
}
