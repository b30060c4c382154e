//! The four subcommands: `run`, `sweep`, `tune`, `validate-config`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use teasq_core::config::{CompressionConfig, DatasetConfig, ProtocolKind};
use teasq_core::data::DatasetHandle;
use teasq_core::sim::{self, RunOutput};
use teasq_core::ExperimentConfig;

use crate::config_file::{load_config, Override};
use crate::idx;
use crate::output;

/// Options shared by every subcommand (clap `CommonArgs` plus the dotted
/// overrides extracted before clap parsing).
#[derive(Debug, Clone, Default)]
pub struct CommonOpts {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub protocol: Option<String>,
    pub seed: Option<u64>,
    pub compression: Option<String>,
    pub schedule_file: Option<PathBuf>,
    pub quiet: bool,
    pub overrides: Vec<Override>,
}

impl CommonOpts {
    /// Dotted overrides followed by the shorthand flags (later wins).
    fn effective_overrides(&self) -> Vec<Override> {
        let mut v = self.overrides.clone();
        if let Some(p) = &self.protocol {
            v.push(Override { path: "protocol.kind".into(), raw: p.clone() });
        }
        if let Some(s) = self.seed {
            v.push(Override { path: "seed".into(), raw: s.to_string() });
        }
        if let Some(c) = &self.compression {
            v.push(Override { path: "compression.kind".into(), raw: c.clone() });
        }
        if let Some(f) = &self.schedule_file {
            v.push(Override {
                path: "compression.kind".into(),
                raw: "schedule-file".into(),
            });
            v.push(Override {
                path: "compression.path".into(),
                raw: format!("{:?}", f.display().to_string()),
            });
        }
        v
    }

    fn load(&self, grid: &[Override]) -> Result<ExperimentConfig> {
        load_config(self.config.as_deref(), grid, &self.effective_overrides())
    }
}

fn protocol_slug(p: &ProtocolKind) -> &'static str {
    match p {
        ProtocolKind::Teasq => "teasq",
        ProtocolKind::Tea => "tea",
        ProtocolKind::Teastatic => "teastatic",
        ProtocolKind::Fedavg { .. } => "fedavg",
        ProtocolKind::Fedasync { .. } => "fedasync",
    }
}

fn load_datasets(
    config: &ExperimentConfig,
    data_dir_flag: Option<&Path>,
) -> Result<(DatasetHandle, DatasetHandle)> {
    match config.dataset {
        DatasetConfig::Blobs { .. } => {
            sim::build_datasets(config).map_err(|e| anyhow!("building dataset: {e}"))
        }
        DatasetConfig::FashionMnist => {
            let dir = idx::data_dir(data_dir_flag);
            idx::load_fashion_mnist(&dir).with_context(|| {
                format!(
                    "loading fashion-mnist from {} (set TEASQ_DATA_DIR or pass --data-dir)",
                    dir.display()
                )
            })
        }
    }
}

fn execute(config: &ExperimentConfig, opts: &CommonOpts) -> Result<RunOutput> {
    let (train, test) = load_datasets(config, opts.data_dir.as_deref())?;
    sim::run(config, &train, &test).map_err(|e| anyhow!("simulation failed: {e}"))
}

/// `run`: one experiment, artifacts in one directory.
pub fn cmd_run(opts: &CommonOpts) -> Result<()> {
    let config = opts.load(&[])?;
    let out = execute(&config, opts)?;
    let dir = match &opts.out {
        Some(d) => d.clone(),
        None => output::out_root(None)
            .join(format!("{}-seed{}", protocol_slug(&config.protocol), config.seed)),
    };
    output::write_run_artifacts(&dir, &config, &out)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    if !opts.quiet {
        println!(
            "{}: {} rounds in {:.3} simulated s, final accuracy {:.4} -> {}",
            protocol_slug(&config.protocol),
            out.records.iter().map(|r| r.round).max().unwrap_or(0),
            out.total_sim_time_s,
            out.final_accuracy,
            dir.display()
        );
    }
    Ok(())
}

/// One grid axis: a dotted key and its raw values.
#[derive(Debug, Clone)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

/// Parses `--grid key=v1,v2,v3`.
pub fn parse_grid_axis(spec: &str) -> Result<GridAxis> {
    let (key, rest) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("grid spec `{spec}` is not of the form key=v1,v2,..."))?;
    let values: Vec<String> =
        rest.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect();
    if key.is_empty() || values.is_empty() {
        bail!("grid spec `{spec}` needs a key and at least one value");
    }
    Ok(GridAxis { key: key.to_string(), values })
}

fn sanitize_component(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || ".-_=".contains(c) { c } else { '_' })
        .collect()
}

/// `sweep`: the Cartesian product of the grid axes, one run directory per
/// point plus an `index.csv`. A failing point is recorded and the sweep
/// continues.
pub fn cmd_sweep(opts: &CommonOpts, grid_specs: &[String]) -> Result<()> {
    if grid_specs.is_empty() {
        bail!("sweep needs at least one --grid key=v1,v2,...");
    }
    let axes: Vec<GridAxis> =
        grid_specs.iter().map(|s| parse_grid_axis(s)).collect::<Result<_>>()?;
    let root = output::out_root(opts.out.as_deref());
    std::fs::create_dir_all(&root)
        .with_context(|| format!("creating {}", root.display()))?;

    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let grid_keys: Vec<String> = axes.iter().map(|a| a.key.clone()).collect();
    let mut rows = Vec::with_capacity(total);
    for flat in 0..total {
        // mixed-radix decode, first axis slowest
        let mut rem = flat;
        let mut radix = total;
        let mut point: Vec<&str> = Vec::with_capacity(axes.len());
        for a in &axes {
            radix /= a.values.len();
            point.push(a.values[rem / radix].as_str());
            rem %= radix;
        }

        let grid_overrides: Vec<Override> = axes
            .iter()
            .zip(&point)
            .map(|(a, v)| Override { path: a.key.clone(), raw: (*v).to_string() })
            .collect();
        let dir_name = axes
            .iter()
            .zip(&point)
            .map(|(a, v)| sanitize_component(&format!("{}={}", a.key, v)))
            .collect::<Vec<_>>()
            .join("__");
        let dir = root.join(&dir_name);
        let values: Vec<String> = point.iter().map(|v| (*v).to_string()).collect();

        let result = opts
            .load(&grid_overrides)
            .and_then(|config| execute(&config, opts).map(|out| (config, out)));
        match result {
            Ok((config, out)) => {
                output::write_run_artifacts(&dir, &config, &out)?;
                if !opts.quiet {
                    println!(
                        "{dir_name}: final accuracy {:.4} in {:.3} s",
                        out.final_accuracy, out.total_sim_time_s
                    );
                }
                rows.push(output::IndexRow {
                    run_dir: dir_name,
                    values,
                    status: "ok".into(),
                    final_accuracy: Some(out.final_accuracy),
                    total_sim_time_s: Some(out.total_sim_time_s),
                    total_down_bits: Some(out.total_down_bits),
                    total_up_bits: Some(out.total_up_bits),
                    error: None,
                });
            }
            Err(e) => {
                eprintln!("warning: grid point {dir_name} failed: {e:#}");
                rows.push(output::IndexRow {
                    run_dir: dir_name,
                    values,
                    status: "error".into(),
                    final_accuracy: None,
                    total_sim_time_s: None,
                    total_down_bits: None,
                    total_up_bits: None,
                    error: Some(format!("{e:#}")),
                });
            }
        }
    }
    let index = output::render_index_csv(&grid_keys, &rows);
    std::fs::write(root.join("index.csv"), index)
        .with_context(|| format!("writing {}", root.join("index.csv").display()))?;
    if !opts.quiet {
        println!("{} grid points -> {}", rows.len(), root.display());
    }
    Ok(())
}

/// `tune`: warm-up probe + greedy search + decay schedule, written to
/// `schedule.json` without running the full experiment.
pub fn cmd_tune(opts: &CommonOpts) -> Result<()> {
    let config = opts.load(&[])?;
    if !matches!(config.compression, CompressionConfig::AutoTune { .. }) {
        bail!("tune requires compression.kind = \"auto-tune\" (with sets and theta)");
    }
    let (train, test) = load_datasets(&config, opts.data_dir.as_deref())?;
    let plan = sim::plan_compression(&config, &train, &test)
        .map_err(|e| anyhow!("tuning failed: {e}"))?;
    let schedule = plan.schedule.expect("auto-tune always resolves a schedule");
    let dir = match &opts.out {
        Some(d) => d.clone(),
        None => output::out_root(None)
            .join(format!("tune-{}-seed{}", protocol_slug(&config.protocol), config.seed)),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let value = output::schedule_json_value(
        &schedule.per_round,
        plan.search.as_ref(),
        &plan.warnings,
    );
    output::write_json(&dir.join("schedule.json"), &value)?;
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
    if !opts.quiet {
        let found = plan.search.as_ref().expect("auto-tune records its search");
        println!(
            "tuned: p_s {}%, p_q {} bits (baseline accuracy {:.4}, {} evaluations) -> {}",
            found.params.p_s,
            found.params.p_q,
            found.baseline_accuracy,
            found.evaluations,
            dir.join("schedule.json").display()
        );
    }
    Ok(())
}

/// `validate-config`: parse, merge, validate; report and exit.
pub fn cmd_validate(opts: &CommonOpts) -> Result<()> {
    let config = opts.load(&[])?;
    println!(
        "config ok: protocol {}, {} devices, {} rounds, seed {}",
        protocol_slug(&config.protocol),
        config.num_devices,
        config.max_rounds,
        config.seed
    );
    Ok(())
}
