//! Deterministic discrete-event simulator driving devices and the server
//! through the asynchronous cached-aggregation protocol and the synchronous
//! and asynchronous baselines.
//!
//! Events are processed in strict `(time, seq)` order from a binary heap;
//! all randomness flows from the config seed through named sub-streams, so
//! identical `(config, seed)` pairs produce bit-identical outputs. Time is
//! simulated: downloads, local computation, and uploads advance the clock
//! by the latency model's values, while server-side work is free.
//!
//! Transfer bits and their `TransferRecord`s are committed when a leg
//! *completes*, so cumulative counters always equal the sum over recorded
//! transfers even when a run stops mid-flight.

use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::aggregate::{
    weighted_average, AdmitDecision, AggregationSummary, CacheEntry, ReceiveOutcome, ServerState,
};
use crate::compress::{compress, decompress, CompressedUpdate, CompressionParams};
use crate::config::{
    CompressionConfig, DatasetConfig, ExperimentConfig, PartitionKind, ProtocolKind,
};
use crate::data::{make_blobs, partition_iid, partition_noniid_shards, DatasetHandle};
use crate::error::{Error, Result};
use crate::latency::{
    comm_latency, mean_compute_latency, place_devices, sample_compute_latency, transmission_rate,
    DeviceProfile, Direction, WorkloadSpec,
};
use crate::model::{evaluate, init_params, local_train};
use crate::params::ParamVector;
use crate::rng::{derive_seed, stream};
use crate::tune::{
    build_schedule, search_params, CompressionSchedule, CompressionSets, DecayEndpoint,
    SearchOutcome,
};

/// One metrics row: emitted per aggregation round plus optional
/// time-interval evaluation checkpoints.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsRecord {
    pub round: u64,
    pub sim_time_s: f64,
    pub accuracy: f64,
    pub cumulative_down_bits: u64,
    pub cumulative_up_bits: u64,
    /// Mean staleness of the most recent aggregation (0 before the first).
    pub cache_mean_staleness: f64,
    /// Sparsification level in effect for the row's round (100 = all kept).
    pub p_s_used: f64,
    /// Quantization width in effect for the row's round (0 = none).
    pub p_q_used: u8,
}

/// One completed transfer leg.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransferRecord {
    pub device: usize,
    pub direction: Direction,
    pub bits: u64,
    pub start_s: f64,
    pub end_s: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub transfers: Vec<TransferRecord>,
    pub aggregations: Vec<AggregationSummary>,
    pub final_global: ParamVector,
    pub final_accuracy: f64,
    /// Simulated time of the last processed event (the makespan).
    pub total_sim_time_s: f64,
    pub total_down_bits: u64,
    pub total_up_bits: u64,
    /// Largest staleness any aggregated entry carried.
    pub max_staleness_observed: u64,
    /// Number of simulation events processed (task legs, polls, checkpoints).
    pub events_processed: u64,
    /// The per-round compression schedule actually used (None = dense).
    pub resolved_schedule: Option<CompressionSchedule>,
    pub device_profiles: Vec<DeviceProfile>,
    pub warnings: Vec<String>,
}

/// A resolved compression plan: what the transfers will actually use.
#[derive(Debug, Clone)]
pub struct CompressionPlan {
    /// Per-round parameters, or `None` for dense (uncoded) transfers.
    pub schedule: Option<CompressionSchedule>,
    /// Present when the plan came from an auto-tune search.
    pub search: Option<SearchOutcome>,
    pub warnings: Vec<String>,
}

/// Builds the datasets a config describes. Synthetic blobs are generated
/// in-process; file-backed datasets must be loaded by the runner and passed
/// to [`run`] directly.
pub fn build_datasets(config: &ExperimentConfig) -> Result<(DatasetHandle, DatasetHandle)> {
    match config.dataset {
        DatasetConfig::Blobs { num_classes, samples_per_class, input_dim, spread } => {
            Ok(make_blobs(num_classes, samples_per_class, input_dim, spread, config.seed))
        }
        DatasetConfig::FashionMnist => Err(Error::Config(String::from(
            "fashion-mnist is file-backed; load it via the runner and pass it to run()",
        ))),
    }
}

// ---------------------------------------------------------------------------
// Event machinery

#[derive(Debug)]
enum EventKind {
    Request { device: usize },
    RetryPoll { device: usize },
    DownloadDone { device: usize, task: TaskCtx, bits: u64, start_s: f64 },
    ComputeDone { device: usize, grant_round: u64, grant_seq: u64, trained: ParamVector },
    UploadDone { device: usize, payload: UploadPayload, bits: u64, start_s: f64 },
    EvalCheckpoint,
}

#[derive(Debug)]
struct TaskCtx {
    grant_round: u64,
    grant_seq: u64,
    /// The model exactly as the device will see it (post-decompression).
    model: ParamVector,
}

#[derive(Debug)]
enum UploadPayload {
    Dense { weights: ParamVector, timestamp: u64 },
    Coded(CompressedUpdate),
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time.total_cmp(&other.time) == Ordering::Equal && self.seq == other.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // BinaryHeap is a max-heap; invert so the earliest (time, seq) pops first
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
            .reverse()
    }
}

#[derive(Debug, Clone)]
struct Device {
    profile: DeviceProfile,
    indices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TransferMode {
    /// Dense 32-bit transfers, no codec.
    Dense,
    /// Codec on both legs, parameters from the schedule.
    Coded,
}

/// Places devices, fixes their channel rates and compute capabilities, and
/// shards the training set.
fn setup_devices(config: &ExperimentConfig, train: &DatasetHandle) -> Result<Vec<Device>> {
    use rand::Rng;
    let n = config.num_devices;
    let distances = place_devices(n, &config.channel, config.seed);
    let partition = match config.partition {
        PartitionKind::Iid => partition_iid(train, n, config.seed)?,
        PartitionKind::Noniid2 => partition_noniid_shards(train, n, 2, config.seed)?,
    };
    let c = &config.compute;
    let mut devices = Vec::with_capacity(n);
    for (id, d) in distances.into_iter().enumerate() {
        let mut caps = stream(config.seed, "device-caps", id as u64);
        let a_k = if c.a_k_max > c.a_k_min {
            caps.gen_range(c.a_k_min..c.a_k_max)
        } else {
            c.a_k_min
        };
        let phi_k = if c.phi_max > c.phi_min {
            caps.gen_range(c.phi_min..c.phi_max)
        } else {
            c.phi_min
        };
        let indices = partition.assignments[id].clone();
        if indices.is_empty() {
            return Err(Error::Partition(alloc::format!(
                "device {id} received no samples; reduce num_devices or enlarge the dataset"
            )));
        }
        devices.push(Device {
            profile: DeviceProfile {
                id,
                distance_m: d,
                a_k,
                phi_k,
                n_k: indices.len(),
                r_down_bps: transmission_rate(d, Direction::Down, &config.channel),
                r_up_bps: transmission_rate(d, Direction::Up, &config.channel),
            },
            indices,
        });
    }
    Ok(devices)
}

/// Entry point: validates, resolves compression (running the auto-tune
/// probe if asked), and dispatches to the protocol's driver.
pub fn run(
    config: &ExperimentConfig,
    train: &DatasetHandle,
    test: &DatasetHandle,
) -> Result<RunOutput> {
    config.validate()?;
    if train.input_dim != config.model.input_dim
        || train.num_classes != config.model.num_classes
        || test.input_dim != config.model.input_dim
    {
        return Err(Error::Config(String::from(
            "dataset dimensions do not match the model spec",
        )));
    }
    match config.protocol {
        ProtocolKind::Fedavg { m } => run_fedavg(config, m, train, test),
        _ => run_async(config, train, test),
    }
}

/// Resolves the configured compression into the per-round parameters the
/// transfers will use, running the tuner's warm-up probe and greedy search
/// when auto-tune is requested. Validates the config first, so it can be
/// called stand-alone (e.g. by a `tune` command).
pub fn plan_compression(
    config: &ExperimentConfig,
    train: &DatasetHandle,
    test: &DatasetHandle,
) -> Result<CompressionPlan> {
    config.validate()?;
    match &config.compression {
        CompressionConfig::Off => {
            Ok(CompressionPlan { schedule: None, search: None, warnings: Vec::new() })
        }
        CompressionConfig::Static { p_s, p_q } => Ok(CompressionPlan {
            schedule: Some(CompressionSchedule::constant(
                CompressionParams { p_s: *p_s, p_q: *p_q },
                config.max_rounds,
            )),
            search: None,
            warnings: Vec::new(),
        }),
        CompressionConfig::Schedule { per_round } => Ok(CompressionPlan {
            schedule: Some(CompressionSchedule { per_round: per_round.clone() }),
            search: None,
            warnings: Vec::new(),
        }),
        CompressionConfig::AutoTune { set_s, set_q, theta, step_size, probe_rounds } => {
            // warm-up probe: the same population without compression
            let probe_cfg = ExperimentConfig {
                protocol: ProtocolKind::Tea,
                compression: CompressionConfig::Off,
                max_rounds: *probe_rounds,
                time_budget_s: None,
                eval_interval_s: None,
                seed: derive_seed(config.seed, "probe", 0),
                ..config.clone()
            };
            let probe = run_async(&probe_cfg, train, test)?;
            let sets = CompressionSets {
                set_s: set_s.clone(),
                set_q: set_q.clone(),
                theta: *theta,
                step_size: *step_size,
                t_rounds: config.max_rounds,
            };
            let found = search_params(&probe.final_global, test, &config.model, &sets)?;
            let mut warnings = Vec::new();
            if found.fell_back_lossless {
                warnings.push(String::from(
                    "auto-tune: no setting met the accuracy budget; using lossless parameters",
                ));
            }
            let schedule = if found.fell_back_lossless {
                CompressionSchedule::constant(found.params, config.max_rounds)
            } else {
                build_schedule(&found.params, &sets, DecayEndpoint::Found)?
            };
            Ok(CompressionPlan { schedule: Some(schedule), search: Some(found), warnings })
        }
    }
}

/// Driver for all asynchronous protocols (teasq / tea / teastatic /
/// fedasync): one event loop parameterized by cap, cache size, and codec.
fn run_async(
    config: &ExperimentConfig,
    train: &DatasetHandle,
    test: &DatasetHandle,
) -> Result<RunOutput> {
    let plan = plan_compression(config, train, test)?;
    let mode = if plan.schedule.is_some() { TransferMode::Coded } else { TransferMode::Dense };
    let devices = setup_devices(config, train)?;
    let (cap, k_cache) = match config.protocol {
        // fedasync bounds staleness with its in-flight cap and mixes per
        // arrival (cache of one)
        ProtocolKind::Fedasync { max_staleness } => (max_staleness, 1),
        _ => (config.cap(), config.k_cache()),
    };
    let n_total: usize = devices.iter().map(|d| d.profile.n_k).sum();
    let server = ServerState::new(
        init_params(&config.model, config.seed),
        cap,
        k_cache,
        config.alpha,
        config.a_staleness,
        n_total,
    );
    let mut engine = Engine::new(config, train, test, devices, server, mode, plan.schedule);
    engine.warnings = plan.warnings;
    engine.run_loop()?;
    Ok(engine.into_output())
}

struct Engine<'a> {
    config: &'a ExperimentConfig,
    train: &'a DatasetHandle,
    test: &'a DatasetHandle,
    devices: Vec<Device>,
    server: ServerState,
    mode: TransferMode,
    schedule: Option<CompressionSchedule>,
    queue: BinaryHeap<Event>,
    next_seq: u64,
    task_seq: u64,
    now: f64,
    retry_interval: f64,
    sim_rng: ChaCha8Rng,
    cum_down: u64,
    cum_up: u64,
    last_delta: f64,
    max_staleness_observed: u64,
    events_processed: u64,
    records: Vec<MetricsRecord>,
    transfers: Vec<TransferRecord>,
    aggregations: Vec<AggregationSummary>,
    warnings: Vec<String>,
    done: bool,
}

impl<'a> Engine<'a> {
    fn new(
        config: &'a ExperimentConfig,
        train: &'a DatasetHandle,
        test: &'a DatasetHandle,
        devices: Vec<Device>,
        server: ServerState,
        mode: TransferMode,
        schedule: Option<CompressionSchedule>,
    ) -> Self {
        // default retry: a fifth of the fleet's mean compute latency
        let retry_interval = config.retry_interval_s.unwrap_or_else(|| {
            let mean: f64 = devices
                .iter()
                .map(|d| {
                    let work = WorkloadSpec::new(
                        config.local_epochs,
                        d.profile.n_k,
                        config.batch_size,
                    );
                    mean_compute_latency(&d.profile, &work)
                })
                .sum::<f64>()
                / devices.len() as f64;
            (0.2 * mean).max(1e-9)
        });
        Engine {
            config,
            train,
            test,
            devices,
            server,
            mode,
            schedule,
            queue: BinaryHeap::new(),
            next_seq: 0,
            task_seq: 0,
            now: 0.0,
            retry_interval,
            sim_rng: stream(config.seed, "sim", 0),
            cum_down: 0,
            cum_up: 0,
            last_delta: 0.0,
            max_staleness_observed: 0,
            events_processed: 0,
            records: Vec::new(),
            transfers: Vec::new(),
            aggregations: Vec::new(),
            warnings: Vec::new(),
            done: false,
        }
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Event { time, seq, kind });
    }

    /// Compression parameters in effect for a given round (None = dense).
    fn params_for_round(&self, round: u64) -> Option<CompressionParams> {
        match self.mode {
            TransferMode::Dense => None,
            TransferMode::Coded => {
                Some(self.schedule.as_ref().expect("coded mode has a schedule").params_at(round))
            }
        }
    }

    fn run_loop(&mut self) -> Result<()> {
        for d in 0..self.devices.len() {
            self.push(0.0, EventKind::Request { device: d });
        }
        if let Some(dt) = self.config.eval_interval_s {
            self.push(dt, EventKind::EvalCheckpoint);
        }
        while let Some(ev) = self.queue.pop() {
            if let Some(budget) = self.config.time_budget_s {
                if ev.time > budget {
                    break;
                }
            }
            self.now = ev.time;
            self.events_processed += 1;
            match ev.kind {
                EventKind::Request { device } | EventKind::RetryPoll { device } => {
                    self.handle_request(device)?
                }
                EventKind::DownloadDone { device, task, bits, start_s } => {
                    self.handle_download_done(device, task, bits, start_s)?
                }
                EventKind::ComputeDone { device, grant_round, grant_seq, trained } => {
                    self.handle_compute_done(device, grant_round, grant_seq, trained)?
                }
                EventKind::UploadDone { device, payload, bits, start_s } => {
                    self.handle_upload_done(device, payload, bits, start_s)?
                }
                EventKind::EvalCheckpoint => self.handle_eval_checkpoint(),
            }
            if self.done {
                break;
            }
        }
        Ok(())
    }

    fn handle_request(&mut self, device: usize) -> Result<()> {
        match self.server.try_admit() {
            AdmitDecision::Granted { round } => {
                let grant_seq = self.task_seq;
                self.task_seq += 1;
                let (model, bits) = match self.params_for_round(round) {
                    None => (
                        self.server.global_weights.clone(),
                        self.server.global_weights.bit_size_uncompressed(),
                    ),
                    Some(params) => {
                        let u = compress(
                            &self.server.global_weights,
                            &params,
                            derive_seed(self.config.seed, "down", grant_seq),
                        )?;
                        let model = decompress(&u, &self.config.model)?;
                        (model, u.bit_size)
                    }
                };
                let dt = comm_latency(bits, self.devices[device].profile.r_down_bps);
                self.push(
                    self.now + dt,
                    EventKind::DownloadDone {
                        device,
                        task: TaskCtx { grant_round: round, grant_seq, model },
                        bits,
                        start_s: self.now,
                    },
                );
            }
            AdmitDecision::Denied => {
                self.push(self.now + self.retry_interval, EventKind::RetryPoll { device });
            }
        }
        Ok(())
    }

    fn handle_download_done(
        &mut self,
        device: usize,
        task: TaskCtx,
        bits: u64,
        start_s: f64,
    ) -> Result<()> {
        self.cum_down += bits;
        self.transfers.push(TransferRecord {
            device,
            direction: Direction::Down,
            bits,
            start_s,
            end_s: self.now,
        });
        let dev = &self.devices[device];
        // the device trains from — and anchors to — exactly what it received
        let trained = local_train(
            &task.model,
            &task.model,
            self.train,
            &dev.indices,
            self.config.local_epochs as usize,
            self.config.batch_size,
            self.config.eta,
            self.config.mu,
            derive_seed(self.config.seed, "train", task.grant_seq),
            &self.config.model,
        )?;
        let work =
            WorkloadSpec::new(self.config.local_epochs, dev.profile.n_k, self.config.batch_size);
        let l_cp = sample_compute_latency(&dev.profile, &work, &mut self.sim_rng);
        self.push(
            self.now + l_cp,
            EventKind::ComputeDone {
                device,
                grant_round: task.grant_round,
                grant_seq: task.grant_seq,
                trained,
            },
        );
        Ok(())
    }

    fn handle_compute_done(
        &mut self,
        device: usize,
        grant_round: u64,
        grant_seq: u64,
        trained: ParamVector,
    ) -> Result<()> {
        let (payload, bits) = match self.params_for_round(grant_round) {
            None => {
                let bits = trained.bit_size_uncompressed();
                (UploadPayload::Dense { weights: trained, timestamp: grant_round }, bits)
            }
            Some(params) => {
                let mut u = compress(
                    &trained,
                    &params,
                    derive_seed(self.config.seed, "up", grant_seq),
                )?;
                u.timestamp = grant_round;
                u.sender = device;
                let bits = u.bit_size;
                (UploadPayload::Coded(u), bits)
            }
        };
        let dt = comm_latency(bits, self.devices[device].profile.r_up_bps);
        self.push(
            self.now + dt,
            EventKind::UploadDone { device, payload, bits, start_s: self.now },
        );
        Ok(())
    }

    fn handle_upload_done(
        &mut self,
        device: usize,
        payload: UploadPayload,
        bits: u64,
        start_s: f64,
    ) -> Result<()> {
        self.cum_up += bits;
        self.transfers.push(TransferRecord {
            device,
            direction: Direction::Up,
            bits,
            start_s,
            end_s: self.now,
        });
        let n_k = self.devices[device].profile.n_k;
        let outcome = match payload {
            UploadPayload::Dense { weights, timestamp } => self.server.receive_entry(CacheEntry {
                sender: device,
                weights,
                timestamp,
                n_samples: n_k,
            })?,
            UploadPayload::Coded(u) => self.server.receive_update(&u, n_k, &self.config.model)?,
        };
        match outcome {
            ReceiveOutcome::Cached => {}
            ReceiveOutcome::Discarded(e) => {
                self.warnings.push(alloc::format!("device {device}: update discarded: {e}"));
            }
            ReceiveOutcome::Aggregated(summary) => {
                self.record_aggregation(summary);
                if self.server.round >= self.config.max_rounds {
                    self.done = true;
                    return Ok(());
                }
            }
        }
        // idle again: immediately request the next task
        self.push(self.now, EventKind::Request { device });
        Ok(())
    }

    fn record_aggregation(&mut self, summary: AggregationSummary) {
        self.last_delta = summary.mean_staleness;
        self.max_staleness_observed = self.max_staleness_observed.max(summary.max_staleness);
        let (p_s, p_q) = self.params_used(summary.round.saturating_sub(1));
        let accuracy = evaluate(&self.server.global_weights, self.test, &self.config.model);
        self.records.push(MetricsRecord {
            round: summary.round,
            sim_time_s: self.now,
            accuracy,
            cumulative_down_bits: self.cum_down,
            cumulative_up_bits: self.cum_up,
            cache_mean_staleness: summary.mean_staleness,
            p_s_used: p_s,
            p_q_used: p_q,
        });
        self.aggregations.push(summary);
    }

    fn params_used(&self, round: u64) -> (f64, u8) {
        match self.params_for_round(round) {
            None => (100.0, 0),
            Some(p) => (p.p_s, p.p_q),
        }
    }

    fn handle_eval_checkpoint(&mut self) {
        let accuracy = evaluate(&self.server.global_weights, self.test, &self.config.model);
        let (p_s, p_q) = self.params_used(self.server.round);
        self.records.push(MetricsRecord {
            round: self.server.round,
            sim_time_s: self.now,
            accuracy,
            cumulative_down_bits: self.cum_down,
            cumulative_up_bits: self.cum_up,
            cache_mean_staleness: self.last_delta,
            p_s_used: p_s,
            p_q_used: p_q,
        });
        if let Some(dt) = self.config.eval_interval_s {
            self.push(self.now + dt, EventKind::EvalCheckpoint);
        }
    }

    fn into_output(self) -> RunOutput {
        let final_accuracy = evaluate(&self.server.global_weights, self.test, &self.config.model);
        RunOutput {
            records: self.records,
            transfers: self.transfers,
            aggregations: self.aggregations,
            final_global: self.server.global_weights,
            final_accuracy,
            total_sim_time_s: self.now,
            total_down_bits: self.cum_down,
            total_up_bits: self.cum_up,
            max_staleness_observed: self.max_staleness_observed,
            events_processed: self.events_processed,
            resolved_schedule: self.schedule,
            device_profiles: self.devices.into_iter().map(|d| d.profile).collect(),
            warnings: self.warnings,
        }
    }
}

/// Synchronous baseline: every round samples `m` devices, trains them all
/// from the same global model, waits for the slowest (the barrier), and
/// replaces the global model with the sample-weighted mean.
fn run_fedavg(
    config: &ExperimentConfig,
    m: usize,
    train: &DatasetHandle,
    test: &DatasetHandle,
) -> Result<RunOutput> {
    let plan = plan_compression(config, train, test)?;
    let mode = if plan.schedule.is_some() { TransferMode::Coded } else { TransferMode::Dense };
    let schedule = plan.schedule;
    let devices = setup_devices(config, train)?;
    let mut global = init_params(&config.model, config.seed);
    let mut sim_rng = stream(config.seed, "sim", 0);
    let mut now = 0.0f64;
    let mut cum_down = 0u64;
    let mut cum_up = 0u64;
    let mut task_seq = 0u64;
    let mut records = Vec::new();
    let mut transfers = Vec::new();
    let mut warnings = plan.warnings;
    let mut events_processed = 0u64;

    let params_for = |round: u64| -> Option<CompressionParams> {
        match mode {
            TransferMode::Dense => None,
            TransferMode::Coded => {
                Some(schedule.as_ref().expect("coded mode has a schedule").params_at(round))
            }
        }
    };

    'rounds: for round in 0..config.max_rounds {
        let mut ids: Vec<usize> = (0..devices.len()).collect();
        ids.shuffle(&mut sim_rng);
        ids.truncate(m);

        let mut entries: Vec<CacheEntry> = Vec::with_capacity(m);
        let mut pending: Vec<TransferRecord> = Vec::with_capacity(2 * m);
        let mut round_dur = 0.0f64;
        let mut round_down = 0u64;
        let mut round_up = 0u64;

        for &d in &ids {
            let dev = &devices[d];
            let grant_seq = task_seq;
            task_seq += 1;
            let (model, down_bits) = match params_for(round) {
                None => (global.clone(), global.bit_size_uncompressed()),
                Some(p) => {
                    let u =
                        compress(&global, &p, derive_seed(config.seed, "down", grant_seq))?;
                    let model = decompress(&u, &config.model)?;
                    (model, u.bit_size)
                }
            };
            let trained = local_train(
                &model,
                &model,
                train,
                &dev.indices,
                config.local_epochs as usize,
                config.batch_size,
                config.eta,
                // plain FedAvg: no proximal anchor
                0.0,
                derive_seed(config.seed, "train", grant_seq),
                &config.model,
            )?;
            let (received, up_bits) = match params_for(round) {
                None => {
                    let bits = trained.bit_size_uncompressed();
                    (trained, bits)
                }
                Some(p) => {
                    let u =
                        compress(&trained, &p, derive_seed(config.seed, "up", grant_seq))?;
                    (decompress(&u, &config.model)?, u.bit_size)
                }
            };
            let work = WorkloadSpec::new(config.local_epochs, dev.profile.n_k, config.batch_size);
            let l_down = comm_latency(down_bits, dev.profile.r_down_bps);
            let l_cp = sample_compute_latency(&dev.profile, &work, &mut sim_rng);
            let l_up = comm_latency(up_bits, dev.profile.r_up_bps);
            pending.push(TransferRecord {
                device: d,
                direction: Direction::Down,
                bits: down_bits,
                start_s: now,
                end_s: now + l_down,
            });
            pending.push(TransferRecord {
                device: d,
                direction: Direction::Up,
                bits: up_bits,
                start_s: now + l_down + l_cp,
                end_s: now + l_down + l_cp + l_up,
            });
            round_down += down_bits;
            round_up += up_bits;
            round_dur = round_dur.max(l_down + l_cp + l_up);
            entries.push(CacheEntry {
                sender: d,
                weights: received,
                timestamp: 0,
                n_samples: dev.profile.n_k,
            });
        }

        let t_end = now + round_dur;
        if let Some(budget) = config.time_budget_s {
            if t_end > budget {
                warnings.push(alloc::format!(
                    "time budget reached during round {}; round not committed",
                    round + 1
                ));
                break 'rounds;
            }
        }
        now = t_end;
        cum_down += round_down;
        cum_up += round_up;
        // per selected device: download, compute, upload; plus the barrier
        events_processed += 3 * ids.len() as u64 + 1;
        transfers.extend(pending);
        // all timestamps equal → weights reduce to n_k; staleness plays no role
        let (mean, _) = weighted_average(&entries, 0, config.a_staleness)?;
        global = mean;

        let (p_s, p_q) = match params_for(round) {
            None => (100.0, 0),
            Some(p) => (p.p_s, p.p_q),
        };
        records.push(MetricsRecord {
            round: round + 1,
            sim_time_s: now,
            accuracy: evaluate(&global, test, &config.model),
            cumulative_down_bits: cum_down,
            cumulative_up_bits: cum_up,
            cache_mean_staleness: 0.0,
            p_s_used: p_s,
            p_q_used: p_q,
        });
    }

    let final_accuracy = evaluate(&global, test, &config.model);
    Ok(RunOutput {
        records,
        transfers,
        aggregations: Vec::new(),
        final_global: global,
        final_accuracy,
        total_sim_time_s: now,
        total_down_bits: cum_down,
        total_up_bits: cum_up,
        max_staleness_observed: 0,
        events_processed,
        resolved_schedule: schedule,
        device_profiles: devices.into_iter().map(|d| d.profile).collect(),
        warnings,
    })
}
