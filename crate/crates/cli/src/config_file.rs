//! Experiment config loading: TOML files (or a previous run's `run.json`),
//! dotted-path overrides, and the small fix-ups that make the file format
//! pleasant (string shorthands for `protocol`/`compression`, defaulted
//! `fedavg.m`, and `schedule-file` inlining).
//!
//! Precedence, lowest to highest: file < grid point < CLI overrides.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use teasq_core::ExperimentConfig;
use toml::Value;

/// One `key.path=value` override. Values are raw strings parsed as TOML
/// literals (numbers, booleans, arrays, inline tables) with a plain-string
/// fallback.
#[derive(Debug, Clone)]
pub struct Override {
    pub path: String,
    pub raw: String,
}

impl Override {
    pub fn parse(flag: &str) -> Result<Self> {
        let (path, raw) = flag
            .split_once('=')
            .ok_or_else(|| anyhow!("override `{flag}` is not of the form key.path=value"))?;
        if path.is_empty() {
            bail!("override `{flag}` has an empty key");
        }
        Ok(Override { path: path.to_string(), raw: raw.to_string() })
    }
}

/// Parses a raw override value as a TOML literal, falling back to a string.
pub fn parse_value(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    if let Ok(table) = toml::from_str::<toml::Table>(&wrapped) {
        if let Some(v) = table.get("v") {
            return v.clone();
        }
    }
    Value::String(raw.to_string())
}

/// Normalizes a key segment: flag-style dashes become the underscores the
/// config fields use.
fn norm_segment(seg: &str) -> String {
    seg.replace('-', "_")
}

/// Inserts `value` at the dotted `path`, creating intermediate tables.
pub fn insert_path(tree: &mut toml::Table, path: &str, value: Value) -> Result<()> {
    let segments: Vec<String> = path.split('.').map(norm_segment).collect();
    if segments.iter().any(|s| s.is_empty()) {
        bail!("override key `{path}` has an empty segment");
    }
    let mut table = tree;
    for seg in &segments[..segments.len() - 1] {
        let entry = table
            .entry(seg.clone())
            .or_insert_with(|| Value::Table(toml::Table::new()));
        // a string here is the `protocol = "fedavg"` shorthand; expand it
        // so deeper keys (e.g. protocol.m) can be set in either order
        if let Value::String(s) = entry {
            let mut t = toml::Table::new();
            t.insert("kind".into(), Value::String(s.clone()));
            *entry = Value::Table(t);
        }
        table = entry.as_table_mut().ok_or_else(|| {
            anyhow!("cannot override `{path}`: `{seg}` is not a table in the config")
        })?;
    }
    table.insert(segments.last().unwrap().clone(), value);
    Ok(())
}

/// Strips JSON nulls (TOML has no null; absent keys fall back to defaults).
fn json_to_toml(v: &serde_json::Value) -> Result<Option<Value>> {
    Ok(match v {
        serde_json::Value::Null => None,
        serde_json::Value::Bool(b) => Some(Value::Boolean(*b)),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(Value::Integer(i))
            } else if let Some(f) = n.as_f64() {
                Some(Value::Float(f))
            } else {
                bail!("number {n} does not fit the config's numeric types");
            }
        }
        serde_json::Value::String(s) => Some(Value::String(s.clone())),
        serde_json::Value::Array(items) => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                match json_to_toml(item)? {
                    Some(v) => out.push(v),
                    None => bail!("arrays may not contain null"),
                }
            }
            Some(Value::Array(out))
        }
        serde_json::Value::Object(map) => {
            let mut out = toml::Table::new();
            for (k, v) in map {
                if let Some(v) = json_to_toml(v)? {
                    out.insert(k.clone(), v);
                }
            }
            Some(Value::Table(out))
        }
    })
}

fn base_tree(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e == "json")
        || text.trim_start().starts_with('{');
    if is_json {
        let mut json: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing {} as JSON", path.display()))?;
        // a run.json stores the reproducible config under "config"
        if let Some(inner) = json.get_mut("config") {
            json = inner.take();
        }
        let toml = json_to_toml(&json)?
            .ok_or_else(|| anyhow!("{} holds null, not a config", path.display()))?;
        match toml {
            Value::Table(t) => Ok(t),
            _ => bail!("{} does not hold a config object", path.display()),
        }
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Reads a schedule file: either `{"per_round": [{"p_s":…,"p_q":…},…], …}`
/// (as written by `teasq tune`) or a bare JSON array of parameter pairs.
fn load_schedule_rounds(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading schedule file {}", path.display()))?;
    let json: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing schedule file {}", path.display()))?;
    let rounds = match &json {
        serde_json::Value::Array(_) => json.clone(),
        serde_json::Value::Object(map) => map
            .get("per_round")
            .cloned()
            .ok_or_else(|| anyhow!("{} has no `per_round` array", path.display()))?,
        _ => bail!("{} holds neither a schedule object nor an array", path.display()),
    };
    if !rounds.is_array() || rounds.as_array().unwrap().is_empty() {
        bail!("{}: `per_round` must be a non-empty array", path.display());
    }
    Ok(rounds)
}

/// String shorthands expand to tagged tables: `protocol = "tea"` means
/// `{ kind = "tea" }`.
fn expand_shorthand(tree: &mut toml::Table, key: &str) {
    if let Some(Value::String(s)) = tree.get(key) {
        let mut t = toml::Table::new();
        t.insert("kind".into(), Value::String(s.clone()));
        tree.insert(key.into(), Value::Table(t));
    }
}

fn get_f64(tree: &toml::Table, key: &str, default: f64) -> f64 {
    match tree.get(key) {
        Some(Value::Float(f)) => *f,
        Some(Value::Integer(i)) => *i as f64,
        _ => default,
    }
}

/// Applies the protocol/compression fix-ups after all overrides are merged.
fn fix_up(tree: &mut toml::Table, config_dir: &Path) -> Result<()> {
    expand_shorthand(tree, "protocol");
    expand_shorthand(tree, "compression");

    if let Some(Value::Table(protocol)) = tree.get("protocol").cloned().as_ref() {
        match protocol.get("kind").and_then(Value::as_str) {
            Some("fedavg") if !protocol.contains_key("m") => {
                // default participation mirrors the async concurrency cap
                let n = get_f64(tree, "num_devices", 100.0);
                let c = get_f64(tree, "c_fraction", 0.1);
                let m = ((n * c).floor() as i64).max(1);
                insert_path(tree, "protocol.m", Value::Integer(m))?;
            }
            Some("fedasync") if !protocol.contains_key("max_staleness") => {
                insert_path(tree, "protocol.max_staleness", Value::Integer(4))?;
            }
            _ => {}
        }
    }

    let is_schedule_file = matches!(
        tree.get("compression").and_then(Value::as_table).and_then(|t| t.get("kind")),
        Some(Value::String(k)) if k == "schedule-file"
    );
    if is_schedule_file {
        let comp = tree.get("compression").and_then(Value::as_table).unwrap();
        let path = comp
            .get("path")
            .and_then(Value::as_str)
            .ok_or_else(|| anyhow!("compression kind `schedule-file` needs a `path`"))?;
        let mut file = PathBuf::from(path);
        if file.is_relative() {
            file = config_dir.join(file);
        }
        let rounds = load_schedule_rounds(&file)?;
        let rounds_toml = json_to_toml(&rounds)?
            .ok_or_else(|| anyhow!("{}: schedule is null", file.display()))?;
        let mut inline = toml::Table::new();
        inline.insert("kind".into(), Value::String("schedule".into()));
        inline.insert("per_round".into(), rounds_toml);
        tree.insert("compression".into(), Value::Table(inline));
    }
    Ok(())
}

/// Every key the config schema accepts, by section. Serde rejects unknown
/// top-level keys itself, but the tagged sections (`protocol`, `model`,
/// `dataset`, `compression`) deserialize through internally-tagged enums,
/// which silently drop keys they don't recognize — a misplaced
/// `partition = "noniid2"` under `[dataset]` would otherwise change the
/// experiment without a word. This walk rejects any key serde would drop.
const TOP_KEYS: &[&str] = &[
    "protocol", "num_devices", "c_fraction", "cache_fraction", "alpha", "mu",
    "a_staleness", "local_epochs", "batch_size", "eta", "max_rounds",
    "time_budget_s", "model", "dataset", "partition", "channel", "compute",
    "compression", "seed", "eval_interval_s", "retry_interval_s",
];

fn section_keys(section: &str) -> Option<&'static [&'static str]> {
    Some(match section {
        "protocol" => &["kind", "m", "max_staleness"],
        "model" => &["arch", "input_dim", "num_classes", "hidden", "conv1_channels", "conv2_channels"],
        "dataset" => &["kind", "num_classes", "samples_per_class", "input_dim", "spread"],
        "compute" => &["a_k_min", "a_k_max", "phi_min", "phi_max"],
        "channel" => &[
            "bandwidth_hz", "pathloss_exp", "p_bs_dbm", "p_dev_dbm",
            "noise_dbm_per_mhz", "radius_m",
        ],
        "compression" => &[
            "kind", "p_s", "p_q", "per_round", "set_s", "set_q", "theta",
            "step_size", "probe_rounds", "path",
        ],
        _ => return None,
    })
}

fn reject_unknown(section: &str, table: &toml::Table, allowed: &[&str]) -> Result<()> {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            let hint = if TOP_KEYS.contains(&key.as_str()) {
                format!("; `{key}` is a top-level key, move it above the section headers")
            } else {
                String::new()
            };
            bail!(
                "unknown key `{key}` in [{section}] (allowed: {}){hint}",
                allowed.join(", ")
            );
        }
    }
    Ok(())
}

fn check_unknown_keys(tree: &toml::Table) -> Result<()> {
    reject_unknown("top level", tree, TOP_KEYS)?;
    for (section, value) in tree {
        let Some(allowed) = section_keys(section) else { continue };
        let Some(table) = value.as_table() else { continue };
        reject_unknown(section, table, allowed)?;
        if section == "compression" {
            if let Some(Value::Array(rounds)) = table.get("per_round") {
                for entry in rounds {
                    if let Some(t) = entry.as_table() {
                        reject_unknown("compression.per_round", t, &["p_s", "p_q"])?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Loads and resolves a config: file, then grid entries, then CLI
/// overrides, then fix-ups, then validation.
pub fn load_config(
    file: Option<&Path>,
    grid: &[Override],
    cli: &[Override],
) -> Result<ExperimentConfig> {
    let mut tree = match file {
        Some(p) => base_tree(p)?,
        None => toml::Table::new(),
    };
    for layer in [grid, cli] {
        for o in layer {
            insert_path(&mut tree, &o.path, parse_value(&o.raw))
                .with_context(|| format!("applying override {}={}", o.path, o.raw))?;
        }
    }
    let config_dir = file
        .and_then(|p| p.parent())
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fix_up(&mut tree, config_dir)?;
    check_unknown_keys(&tree)?;
    let config: ExperimentConfig = Value::Table(tree)
        .try_into()
        .map_err(|e| anyhow!("config does not match the schema: {e}"))?;
    config.validate().map_err(|e| anyhow!("invalid config: {e}"))?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use teasq_core::config::{CompressionConfig, ProtocolKind};

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn defaults_apply_when_no_file_is_given() {
        let config = load_config(None, &[], &[]).unwrap();
        assert_eq!(config.num_devices, 100);
        assert_eq!(config.seed, 1);
        assert!(matches!(config.protocol, ProtocolKind::Tea));
    }

    #[test]
    fn file_grid_cli_precedence_holds() {
        let dir = tempfile::tempdir().unwrap();
        let file = write(
            dir.path(),
            "exp.toml",
            "seed = 7\nalpha = 0.5\nmu = 0.2\n[protocol]\nkind = \"tea\"\n",
        );
        let grid = [Override::parse("alpha=0.8").unwrap(), Override::parse("mu=0.3").unwrap()];
        let cli = [Override::parse("mu=0.4").unwrap()];
        let config = load_config(Some(&file), &grid, &cli).unwrap();
        assert_eq!(config.seed, 7); // file
        assert_eq!(config.alpha, 0.8); // grid beats file
        assert_eq!(config.mu, 0.4); // cli beats grid
    }

    #[test]
    fn dotted_overrides_reach_nested_tables() {
        let cli = [
            Override::parse("protocol=teastatic").unwrap(),
            Override::parse("compute.a_k_min=3e-6").unwrap(),
            Override::parse("compute.a-k-max=4e-6").unwrap(), // dashes normalize
            Override::parse("channel.radius_m=900").unwrap(),
            Override::parse("compression.kind=\"static\"").unwrap(),
            Override::parse("compression.p_s=25.0").unwrap(),
            Override::parse("compression.p_q=8").unwrap(),
        ];
        let config = load_config(None, &[], &cli).unwrap();
        assert_eq!(config.compute.a_k_min, 3e-6);
        assert_eq!(config.compute.a_k_max, 4e-6);
        assert_eq!(config.channel.radius_m, 900.0);
        assert!(
            matches!(config.compression, CompressionConfig::Static { p_s, p_q } if p_s == 25.0 && p_q == 8)
        );
    }

    #[test]
    fn protocol_shorthand_defaults_fedavg_participation() {
        let cli = [Override::parse("protocol=fedavg").unwrap()];
        let config = load_config(None, &[], &cli).unwrap();
        // N=100, C=0.1 ⇒ m = 10
        assert!(matches!(config.protocol, ProtocolKind::Fedavg { m: 10 }));

        let cli = [
            Override::parse("protocol=fedavg").unwrap(),
            Override::parse("protocol.m=25").unwrap(),
        ];
        let config = load_config(None, &[], &cli).unwrap();
        assert!(matches!(config.protocol, ProtocolKind::Fedavg { m: 25 }));

        let cli = [Override::parse("protocol=fedasync").unwrap()];
        let config = load_config(None, &[], &cli).unwrap();
        assert!(matches!(config.protocol, ProtocolKind::Fedasync { max_staleness: 4 }));
    }

    #[test]
    fn schedule_file_kind_inlines_the_schedule() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "schedule.json",
            r#"{"per_round":[{"p_s":10.0,"p_q":4},{"p_s":25.0,"p_q":8}]}"#,
        );
        let file = write(
            dir.path(),
            "exp.toml",
            "max_rounds = 2\n[protocol]\nkind = \"teasq\"\n\
             [compression]\nkind = \"schedule-file\"\npath = \"schedule.json\"\n",
        );
        let config = load_config(Some(&file), &[], &[]).unwrap();
        match &config.compression {
            CompressionConfig::Schedule { per_round } => {
                assert_eq!(per_round.len(), 2);
                assert_eq!(per_round[0].p_s, 10.0);
                assert_eq!(per_round[1].p_q, 8);
            }
            other => panic!("expected an inline schedule, got {other:?}"),
        }
    }

    #[test]
    fn run_json_round_trips_as_a_config_file() {
        let cli = [
            Override::parse("seed=9").unwrap(),
            Override::parse("protocol=teastatic").unwrap(),
            Override::parse("compression.kind=static").unwrap(),
            Override::parse("compression.p_s=50").unwrap(),
            Override::parse("compression.p_q=4").unwrap(),
        ];
        let config = load_config(None, &[], &cli).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let run_json = serde_json::json!({
            "config": config,
            "results": {"final_accuracy": 0.5},
        });
        let path = write(dir.path(), "run.json", &serde_json::to_string(&run_json).unwrap());
        let reloaded = load_config(Some(&path), &[], &[]).unwrap();
        assert_eq!(reloaded, config);
    }

    #[test]
    fn keys_that_serde_would_drop_are_rejected() {
        // top-level key after a section header lands inside that section;
        // the tagged enums would silently ignore it
        let dir = tempfile::tempdir().unwrap();
        let file = write(
            dir.path(),
            "exp.toml",
            "seed = 1\n[dataset]\nkind = \"blobs\"\n\npartition = \"noniid2\"\n",
        );
        let err = load_config(Some(&file), &[], &[]).unwrap_err().to_string();
        assert!(err.contains("unknown key `partition` in [dataset]"), "{err}");
        assert!(err.contains("top-level key"), "{err}");

        let cli = [Override::parse("compression.p_z=4").unwrap()];
        let err = load_config(None, &[], &cli).unwrap_err().to_string();
        assert!(err.contains("unknown key `p_z` in [compression]"), "{err}");

        let cli = [Override::parse("concurrency=0.3").unwrap()];
        let err = load_config(None, &[], &cli).unwrap_err().to_string();
        assert!(err.contains("unknown key `concurrency`"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected_with_context() {
        let cli = [Override::parse("alpha=1.5").unwrap()];
        let err = load_config(None, &[], &cli).unwrap_err().to_string();
        assert!(err.contains("invalid config"), "{err}");

        let err = Override::parse("no-equals-sign").unwrap_err().to_string();
        assert!(err.contains("key.path=value"), "{err}");
    }
}
