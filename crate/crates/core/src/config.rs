//! Experiment configuration: one validated value describing a complete,
//! reproducible run — protocol, population, optimization hyper-parameters,
//! model, dataset, channel, device-compute heterogeneity, compression mode,
//! and seed.

use alloc::string::String;
use alloc::vec::Vec;

use crate::aggregate::fraction_floor;
use crate::compress::CompressionParams;
use crate::error::{Error, Result};
use crate::latency::ChannelConfig;
use crate::model::ModelSpec;

/// Which protocol the run executes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum ProtocolKind {
    /// Asynchronous cached aggregation with a compression schedule.
    Teasq,
    /// The same protocol with no compression at all.
    Tea,
    /// The same protocol with one fixed compression setting.
    Teastatic,
    /// Synchronous baseline: sample m devices, barrier on the slowest.
    Fedavg { m: usize },
    /// Asynchronous baseline: immediate mixing, staleness bounded by an
    /// in-flight cap.
    Fedasync { max_staleness: usize },
}

/// Where training data comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum DatasetConfig {
    /// IDX-format image files resolved by the runner from its data directory.
    FashionMnist,
    /// Synthetic Gaussian class blobs generated in-process.
    Blobs {
        #[cfg_attr(feature = "serde", serde(default = "defaults::blob_classes"))]
        num_classes: usize,
        #[cfg_attr(feature = "serde", serde(default = "defaults::blob_spc"))]
        samples_per_class: usize,
        #[cfg_attr(feature = "serde", serde(default = "defaults::blob_dim"))]
        input_dim: usize,
        #[cfg_attr(feature = "serde", serde(default = "defaults::blob_spread"))]
        spread: f64,
    },
}

/// How device shards are drawn from the training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PartitionKind {
    #[cfg_attr(feature = "serde", serde(rename = "iid"))]
    Iid,
    /// Each device draws from only two label classes.
    #[cfg_attr(feature = "serde", serde(rename = "noniid2"))]
    Noniid2,
}

/// Per-device compute heterogeneity: each device draws its capability floor
/// `a_k` and fluctuation rate `φ_k` uniformly from these ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ComputeConfig {
    pub a_k_min: f64,
    pub a_k_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        ComputeConfig { a_k_min: 1e-6, a_k_max: 2e-6, phi_min: 100.0, phi_max: 200.0 }
    }
}

/// Compression mode for model transfers.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum CompressionConfig {
    /// Dense 32-bit transfers, no codec at all.
    #[cfg_attr(feature = "serde", serde(rename = "none"))]
    Off,
    /// One fixed (p_s, p_q) for every round.
    Static { p_s: f64, p_q: u8 },
    /// An explicit per-round schedule (e.g. produced by the tuner).
    Schedule { per_round: Vec<CompressionParams> },
    /// Probe-train, search feasible (p_s, p_q), then decay stepwise.
    AutoTune {
        #[cfg_attr(feature = "serde", serde(default = "defaults::set_s"))]
        set_s: Vec<f64>,
        #[cfg_attr(feature = "serde", serde(default = "defaults::set_q"))]
        set_q: Vec<u8>,
        #[cfg_attr(feature = "serde", serde(default = "defaults::theta"))]
        theta: f64,
        #[cfg_attr(feature = "serde", serde(default = "defaults::step_size"))]
        step_size: u64,
        #[cfg_attr(feature = "serde", serde(default = "defaults::probe_rounds"))]
        probe_rounds: u64,
    },
}

#[cfg(feature = "serde")]
mod defaults {
    use alloc::vec::Vec;

    pub fn blob_classes() -> usize {
        10
    }
    pub fn blob_spc() -> usize {
        700
    }
    pub fn blob_dim() -> usize {
        32
    }
    pub fn blob_spread() -> f64 {
        0.3
    }
    pub fn set_s() -> Vec<f64> {
        alloc::vec![5.0, 10.0, 25.0, 50.0, 100.0]
    }
    pub fn set_q() -> Vec<u8> {
        alloc::vec![2, 4, 8, 16, 0]
    }
    pub fn theta() -> f64 {
        0.02
    }
    pub fn step_size() -> u64 {
        50
    }
    pub fn probe_rounds() -> u64 {
        20
    }
}

/// Complete description of one experiment run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    /// Total device population N.
    pub num_devices: usize,
    /// Concurrency fraction C: the cap is ⌊N·C⌋ (min 1).
    pub c_fraction: f64,
    /// Cache fraction γ: aggregation threshold K = ⌊N·γ⌋ (min 1).
    pub cache_fraction: f64,
    /// Base mixing rate α ∈ (0, 1].
    pub alpha: f64,
    /// Proximal regularization weight μ ≥ 0.
    pub mu: f64,
    /// Staleness-discount exponent a > 0.
    pub a_staleness: f64,
    /// Local epochs per task E.
    pub local_epochs: u64,
    /// Minibatch size B.
    pub batch_size: usize,
    /// Local learning rate η.
    pub eta: f64,
    /// Global round budget T.
    pub max_rounds: u64,
    /// Optional simulated wall-clock budget in seconds.
    pub time_budget_s: Option<f64>,
    pub model: ModelSpec,
    pub dataset: DatasetConfig,
    pub partition: PartitionKind,
    pub channel: ChannelConfig,
    pub compute: ComputeConfig,
    pub compression: CompressionConfig,
    pub seed: u64,
    /// Optional extra evaluation checkpoints every this many sim-seconds.
    pub eval_interval_s: Option<f64>,
    /// Denied devices poll again after this long (default: 0.2 × the fleet's
    /// mean compute latency).
    pub retry_interval_s: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            protocol: ProtocolKind::Tea,
            num_devices: 100,
            c_fraction: 0.1,
            cache_fraction: 0.1,
            alpha: 0.6,
            mu: 0.01,
            a_staleness: 0.5,
            local_epochs: 1,
            batch_size: 20,
            eta: 0.01,
            max_rounds: 100,
            time_budget_s: None,
            model: ModelSpec::logistic(784, 10),
            dataset: DatasetConfig::FashionMnist,
            partition: PartitionKind::Iid,
            channel: ChannelConfig::default(),
            compute: ComputeConfig::default(),
            compression: CompressionConfig::Off,
            seed: 1,
            eval_interval_s: None,
            retry_interval_s: None,
        }
    }
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(String::from(msg)))
    }
}

impl ExperimentConfig {
    /// In-flight concurrency cap ⌊N·C⌋ (min 1).
    pub fn cap(&self) -> usize {
        fraction_floor(self.num_devices, self.c_fraction)
    }

    /// Aggregation threshold K = ⌊N·γ⌋ (min 1).
    pub fn k_cache(&self) -> usize {
        fraction_floor(self.num_devices, self.cache_fraction)
    }

    /// Full structural validation; every run entry point calls this first.
    pub fn validate(&self) -> Result<()> {
        check(self.num_devices >= 1, "num_devices must be at least 1")?;
        check(
            self.c_fraction > 0.0 && self.c_fraction <= 1.0,
            "c_fraction must be in (0, 1]",
        )?;
        check(
            self.cache_fraction > 0.0 && self.cache_fraction <= 1.0,
            "cache_fraction must be in (0, 1]",
        )?;
        check(self.alpha > 0.0 && self.alpha <= 1.0, "alpha must be in (0, 1]")?;
        check(self.mu >= 0.0 && self.mu.is_finite(), "mu must be nonnegative")?;
        check(self.a_staleness > 0.0, "a_staleness must be positive")?;
        check(self.local_epochs >= 1, "local_epochs must be at least 1")?;
        check(self.batch_size >= 1, "batch_size must be at least 1")?;
        check(self.eta > 0.0 && self.eta.is_finite(), "eta must be positive")?;
        check(self.max_rounds >= 1, "max_rounds must be at least 1")?;
        if let Some(l) = self.time_budget_s {
            check(l > 0.0, "time_budget_s must be positive when set")?;
        }
        if let Some(dt) = self.eval_interval_s {
            check(dt > 0.0, "eval_interval_s must be positive when set")?;
        }
        if let Some(rt) = self.retry_interval_s {
            check(rt > 0.0, "retry_interval_s must be positive when set")?;
        }

        self.model.validate()?;
        if let DatasetConfig::Blobs { num_classes, samples_per_class, input_dim, spread } =
            self.dataset
        {
            check(num_classes >= 2, "blobs need at least 2 classes")?;
            check(samples_per_class >= 8, "blobs need at least 8 samples per class")?;
            check(input_dim >= 1, "blobs need a positive input_dim")?;
            check(spread > 0.0, "blob spread must be positive")?;
            check(
                input_dim == self.model.input_dim && num_classes == self.model.num_classes,
                "blob dimensions must match the model's input_dim and num_classes",
            )?;
        }

        check(self.channel.bandwidth_hz > 0.0, "bandwidth_hz must be positive")?;
        check(self.channel.pathloss_exp > 0.0, "pathloss_exp must be positive")?;
        check(self.channel.radius_m > 0.0, "radius_m must be positive")?;

        let c = &self.compute;
        check(
            c.a_k_min > 0.0 && c.a_k_max >= c.a_k_min,
            "compute a_k range must be positive and ordered",
        )?;
        check(
            c.phi_min > 0.0 && c.phi_max >= c.phi_min,
            "compute phi range must be positive and ordered",
        )?;

        match &self.compression {
            CompressionConfig::Off => {}
            CompressionConfig::Static { p_s, p_q } => {
                CompressionParams { p_s: *p_s, p_q: *p_q }.validate()?;
            }
            CompressionConfig::Schedule { per_round } => {
                check(!per_round.is_empty(), "compression schedule must be non-empty")?;
                for p in per_round {
                    p.validate()?;
                }
            }
            CompressionConfig::AutoTune { set_s, set_q, theta, step_size, probe_rounds } => {
                crate::tune::CompressionSets {
                    set_s: set_s.clone(),
                    set_q: set_q.clone(),
                    theta: *theta,
                    step_size: *step_size,
                    t_rounds: self.max_rounds,
                }
                .validate()?;
                check(*probe_rounds >= 1, "probe_rounds must be at least 1")?;
            }
        }

        match self.protocol {
            ProtocolKind::Tea => check(
                matches!(self.compression, CompressionConfig::Off),
                "protocol 'tea' runs without compression (kind = \"none\")",
            )?,
            ProtocolKind::Teastatic => check(
                matches!(self.compression, CompressionConfig::Static { .. }),
                "protocol 'teastatic' requires static compression parameters",
            )?,
            ProtocolKind::Teasq => check(
                !matches!(self.compression, CompressionConfig::Off),
                "protocol 'teasq' requires a compression mode (static, schedule, or auto-tune)",
            )?,
            ProtocolKind::Fedavg { m } => {
                check(m >= 1 && m <= self.num_devices, "fedavg m must be in [1, N]")?;
                check(
                    !matches!(self.compression, CompressionConfig::AutoTune { .. }),
                    "fedavg does not support auto-tuned compression",
                )?;
            }
            ProtocolKind::Fedasync { max_staleness } => {
                check(max_staleness >= 1, "fedasync max_staleness must be at least 1")?;
                check(
                    !matches!(self.compression, CompressionConfig::AutoTune { .. }),
                    "fedasync does not support auto-tuned compression",
                )?;
            }
        }
        Ok(())
    }
}
