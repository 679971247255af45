//! CSV metric files, the run manifest, and the timing sidecar.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::metrics::{EpisodeRecord, RunSummary};
use crate::rng::PRNG_ALGORITHM;

pub const CSV_HEADER: &str = "episode,return,length,epsilon,wall_ms,global_step";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const TIMINGS_FILE: &str = "timings.txt";

pub fn csv_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

/// 17 significant digits: enough for exact f64 round-trips.
fn fmt_scalar(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes one run's records; an empty record list produces a header-only
/// file.
pub fn write_run_csv(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.episode,
            fmt_scalar(r.ret),
            r.length,
            fmt_scalar(r.epsilon_at_end),
            fmt_scalar(r.wall_ms),
            r.global_step_at_end,
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_run_csv(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "{}: unexpected header {other:?}",
                path.display()
            )))
        }
    }
    let mut records = Vec::new();
    for (line_no, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Config(format!(
                "{}: row {} has {} fields",
                path.display(),
                line_no + 2,
                fields.len()
            )));
        }
        let parse_err = |what: &str| {
            Error::Config(format!(
                "{}: row {}: bad {what}",
                path.display(),
                line_no + 2
            ))
        };
        records.push(EpisodeRecord {
            episode: fields[0].parse().map_err(|_| parse_err("episode"))?,
            ret: fields[1].parse().map_err(|_| parse_err("return"))?,
            length: fields[2].parse().map_err(|_| parse_err("length"))?,
            epsilon_at_end: fields[3].parse().map_err(|_| parse_err("epsilon"))?,
            wall_ms: fields[4].parse().map_err(|_| parse_err("wall_ms"))?,
            global_step_at_end: fields[5].parse().map_err(|_| parse_err("global_step"))?,
        });
    }
    Ok(records)
}

/// Per-seed CSVs plus the manifest (PRNG name, fingerprint, full canonical
/// config). Manifest content is deterministic.
pub fn write_outputs(
    config: &ExperimentConfig,
    summaries: &[RunSummary],
    dir: &Path,
) -> Result<()> {
    for summary in summaries {
        write_run_csv(&summary.records, &csv_path(dir, summary.seed))?;
    }
    let mut manifest = String::new();
    let _ = writeln!(manifest, "prng = {PRNG_ALGORITHM}");
    let _ = writeln!(manifest, "fingerprint = {}", config.fingerprint());
    let _ = writeln!(manifest, "log_base = e");
    manifest.push_str(&config.to_canonical_string());
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest).map_err(|e| Error::io(path, e))
}

/// Measured seconds per seed. Deliberately separate from the reproducible
/// outputs: wall time differs run to run.
pub fn write_timings(summaries: &[RunSummary], dir: &Path) -> Result<()> {
    let mut out = String::new();
    for summary in summaries {
        if let Some(secs) = summary.total_wall_s {
            let _ = writeln!(out, "seed_{} = {}", summary.seed, secs);
        }
    }
    let path = dir.join(TIMINGS_FILE);
    std::fs::write(&path, out).map_err(|e| Error::io(path, e))
}

pub fn read_timings(dir: &Path) -> BTreeMap<u64, f64> {
    let mut timings = BTreeMap::new();
    let Ok(text) = std::fs::read_to_string(dir.join(TIMINGS_FILE)) else {
        return timings;
    };
    for line in text.lines() {
        if let Some((key, value)) = line.split_once('=') {
            if let (Some(seed), Ok(secs)) = (
                key.trim().strip_prefix("seed_").and_then(|s| s.parse().ok()),
                value.trim().parse(),
            ) {
                timings.insert(seed, secs);
            }
        }
    }
    timings
}

/// Recovers the config from a manifest, skipping the meta lines.
pub fn read_manifest_config(dir: &Path) -> Result<ExperimentConfig> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let config_lines: Vec<&str> = text
        .lines()
        .filter(|line| {
            let key = line.split('=').next().unwrap_or("").trim();
            !matches!(key, "prng" | "fingerprint" | "log_base")
        })
        .collect();
    ExperimentConfig::parse(&config_lines.join("\n"))
}
