//! Run artifacts: `metrics.csv`, `run.json`, `summary.json`,
//! `schedule.json`, and the sweep's `index.csv`.
//!
//! `metrics.csv` columns, fixed and in order:
//! `round` (aggregation counter), `sim_time_s` (simulated seconds),
//! `accuracy` (test-set fraction in [0,1]), `cumulative_down_bits`,
//! `cumulative_up_bits` (completed-transfer totals), `cache_mean_staleness`
//! (rounds), `p_s_used` (percent kept), `p_q_used` (bits; 0 = none).
//! Floats use Rust's shortest round-trip formatting, so identical runs
//! produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;
use teasq_core::config::CompressionConfig;
use teasq_core::sim::{MetricsRecord, RunOutput};
use teasq_core::tune::SearchOutcome;
use teasq_core::ExperimentConfig;

/// Accuracy targets reported in `summary.json`'s time-to-accuracy table.
pub const ACCURACY_TARGETS: [f64; 9] = [0.5, 0.6, 0.68, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];

pub const METRICS_HEADER: &str = "round,sim_time_s,accuracy,cumulative_down_bits,\
cumulative_up_bits,cache_mean_staleness,p_s_used,p_q_used";

pub fn render_metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.round,
            r.sim_time_s,
            r.accuracy,
            r.cumulative_down_bits,
            r.cumulative_up_bits,
            r.cache_mean_staleness,
            r.p_s_used,
            r.p_q_used
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// First simulated time at which each target accuracy is reached, in file
/// order of the metrics records (`null` when never reached).
fn time_to_accuracy(records: &[MetricsRecord]) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = ACCURACY_TARGETS
        .iter()
        .map(|&target| {
            let hit = records.iter().find(|r| r.accuracy >= target);
            json!({
                "target": target,
                "sim_time_s": hit.map(|r| r.sim_time_s),
                "round": hit.map(|r| r.round),
            })
        })
        .collect();
    serde_json::Value::Array(rows)
}

pub fn summary_value(out: &RunOutput) -> serde_json::Value {
    let best = out.records.iter().map(|r| r.accuracy).fold(f64::NEG_INFINITY, f64::max);
    json!({
        "final_accuracy": out.final_accuracy,
        "best_accuracy": if out.records.is_empty() { out.final_accuracy } else { best },
        "rounds_completed": out.records.iter().map(|r| r.round).max().unwrap_or(0),
        "total_sim_time_s": out.total_sim_time_s,
        "total_down_bits": out.total_down_bits,
        "total_up_bits": out.total_up_bits,
        "total_down_bytes": out.total_down_bits.div_ceil(8),
        "total_up_bytes": out.total_up_bits.div_ceil(8),
        "max_staleness_observed": out.max_staleness_observed,
        "events_processed": out.events_processed,
        "time_to_accuracy": time_to_accuracy(&out.records),
    })
}

/// The config that reproduces this run bit-exactly: auto-tune is replaced
/// by the schedule it resolved to (the probe/search need not be repeated).
pub fn replay_config(config: &ExperimentConfig, out: &RunOutput) -> ExperimentConfig {
    let mut replay = config.clone();
    if matches!(replay.compression, CompressionConfig::AutoTune { .. }) {
        let schedule = out
            .resolved_schedule
            .as_ref()
            .expect("auto-tune always resolves a schedule");
        replay.compression =
            CompressionConfig::Schedule { per_round: schedule.per_round.clone() };
    }
    replay
}

pub fn run_json_value(config: &ExperimentConfig, out: &RunOutput) -> serde_json::Value {
    let replay = replay_config(config, out);
    let requested: serde_json::Value = if replay.compression == config.compression {
        serde_json::Value::Null
    } else {
        serde_json::to_value(&config.compression).expect("compression serializes")
    };
    json!({
        "config": replay,
        "requested_compression": requested,
        "resolved_schedule": out.resolved_schedule,
        "environment": {
            "package": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "devices": out.device_profiles,
        },
        "results": summary_value(out),
        "warnings": out.warnings,
    })
}

pub fn schedule_json_value(
    per_round: &[teasq_core::compress::CompressionParams],
    search: Option<&SearchOutcome>,
    warnings: &[String],
) -> serde_json::Value {
    json!({
        "per_round": per_round,
        "search": search,
        "warnings": warnings,
    })
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON serialization");
    text.push('\n');
    write_atomic(path, &text)
}

/// Writes the standard run artifacts into `dir`, creating it if needed.
pub fn write_run_artifacts(
    dir: &Path,
    config: &ExperimentConfig,
    out: &RunOutput,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&dir.join("metrics.csv"), &render_metrics_csv(&out.records))?;
    write_json(&dir.join("run.json"), &run_json_value(config, out))?;
    write_json(&dir.join("summary.json"), &summary_value(out))?;
    Ok(())
}

/// Output root: `--out`, else `$TEASQ_OUT_DIR`, else `./runs`.
pub fn out_root(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("TEASQ_OUT_DIR") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from("runs")
}

/// One sweep row for `index.csv`.
pub struct IndexRow {
    pub run_dir: String,
    pub values: Vec<String>,
    pub status: String,
    pub final_accuracy: Option<f64>,
    pub total_sim_time_s: Option<f64>,
    pub total_down_bits: Option<u64>,
    pub total_up_bits: Option<u64>,
    pub error: Option<String>,
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn render_index_csv(grid_keys: &[String], rows: &[IndexRow]) -> String {
    let mut out = String::new();
    out.push_str("run_dir");
    for k in grid_keys {
        out.push(',');
        out.push_str(&csv_escape(k));
    }
    out.push_str(",status,final_accuracy,total_sim_time_s,total_down_bits,total_up_bits,error\n");
    for row in rows {
        out.push_str(&csv_escape(&row.run_dir));
        for v in &row.values {
            out.push(',');
            out.push_str(&csv_escape(v));
        }
        let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_u = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            out,
            ",{},{},{},{},{},{}",
            row.status,
            opt_f(row.final_accuracy),
            opt_f(row.total_sim_time_s),
            opt_u(row.total_down_bits),
            opt_u(row.total_up_bits),
            csv_escape(row.error.as_deref().unwrap_or("")),
        )
        .expect("writing to a String cannot fail");
    }
    out
}
