//! Server-side protocol state: admission under a concurrency cap, the FIFO
//! update cache, staleness-discounted weighted averaging, and the global
//! mixing step.
//!
//! The server grants a training task only while fewer than `cap` tasks are
//! in flight. Finished updates enter a FIFO cache; when the cache holds
//! exactly `k_cache` entries the server averages them with weights
//! `S(t−h_c)·n_c` where `S(s) = (s+1)^(−a)` discounts staleness, then mixes
//! the average `u` into the global model with an adaptive rate
//! `α^t = α·S(δ)` (δ = mean staleness): `w^{t+1} = α^t·u + (1−α^t)·w^t`.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::compress::{decompress, CompressedUpdate};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::params::ParamVector;

#[cfg(not(feature = "std"))]
use crate::fmath::F64Ext;

/// `max(1, ⌊n·frac⌋)` — how caps and cache sizes derive from fractions.
pub fn fraction_floor(n: usize, frac: f64) -> usize {
    ((n as f64 * frac).floor() as usize).max(1)
}

/// One cached (already decompressed) device update.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub sender: usize,
    pub weights: ParamVector,
    /// Global round the sender trained from (h_c).
    pub timestamp: u64,
    /// The sender's local sample count (n_c).
    pub n_samples: usize,
}

/// Outcome of an admission request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmitDecision {
    /// Task granted; the device should train from the round-`round` model.
    Granted { round: u64 },
    Denied,
}

/// What happened to a received update.
#[derive(Debug, Clone, PartialEq)]
pub enum ReceiveOutcome {
    /// Entered the cache; threshold not yet reached.
    Cached,
    /// Payload failed decompression and was dropped (in-flight slot freed).
    Discarded(Error),
    /// The cache filled and an aggregation fired.
    Aggregated(AggregationSummary),
}

/// Record of one aggregation step.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregationSummary {
    /// Round counter after the step (the new model's t).
    pub round: u64,
    /// Mean staleness δ of the aggregated entries.
    pub mean_staleness: f64,
    /// Largest single-entry staleness in the batch.
    pub max_staleness: u64,
    /// Effective mixing rate α^t = α·S(δ).
    pub alpha_t: f64,
    /// Senders in FIFO (arrival) order.
    pub senders: Vec<usize>,
}

/// The server's complete mutable state; a single logical actor driven from
/// the simulator's single-threaded event loop.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub global_weights: ParamVector,
    pub round: u64,
    pub cache: VecDeque<CacheEntry>,
    pub inflight: usize,
    /// Concurrency cap ⌊N·C⌋ (≥ 1).
    pub cap: usize,
    /// Aggregation threshold K = ⌊N·γ⌋ (≥ 1).
    pub k_cache: usize,
    /// Base mixing rate α ∈ (0, 1].
    pub alpha: f64,
    /// Staleness-discount exponent a > 0.
    pub a_staleness: f64,
    /// Total samples across all devices (kept for reference/reporting).
    pub n_total: usize,
}

impl ServerState {
    pub fn new(
        global_weights: ParamVector,
        cap: usize,
        k_cache: usize,
        alpha: f64,
        a_staleness: f64,
        n_total: usize,
    ) -> Self {
        debug_assert!(cap >= 1 && k_cache >= 1);
        debug_assert!(alpha > 0.0 && alpha <= 1.0);
        debug_assert!(a_staleness > 0.0);
        ServerState {
            global_weights,
            round: 0,
            cache: VecDeque::new(),
            inflight: 0,
            cap,
            k_cache,
            alpha,
            a_staleness,
            n_total,
        }
    }

    /// Grants a task iff strictly fewer than `cap` are in flight.
    pub fn try_admit(&mut self) -> AdmitDecision {
        if self.inflight < self.cap {
            self.inflight += 1;
            AdmitDecision::Granted { round: self.round }
        } else {
            AdmitDecision::Denied
        }
    }

    /// Ingests one finished update: frees the in-flight slot, decompresses,
    /// caches, and aggregates when the cache reaches `k_cache`.
    ///
    /// A payload that fails decompression is dropped (`Discarded`) — the
    /// slot is still freed. Receiving with nothing in flight, or an update
    /// stamped from a future round, is a protocol violation.
    pub fn receive_update(
        &mut self,
        u: &CompressedUpdate,
        n_k: usize,
        spec: &ModelSpec,
    ) -> Result<ReceiveOutcome> {
        if self.inflight == 0 {
            return Err(Error::Protocol(alloc::format!(
                "received an update from device {} with nothing in flight",
                u.sender
            )));
        }
        self.inflight -= 1;
        if u.timestamp > self.round {
            return Err(Error::Protocol(alloc::format!(
                "update stamped round {} but the server is at round {}",
                u.timestamp,
                self.round
            )));
        }
        let weights = match decompress(u, spec) {
            Ok(w) => w,
            Err(e) => return Ok(ReceiveOutcome::Discarded(e)),
        };
        self.cache_and_maybe_aggregate(CacheEntry {
            sender: u.sender,
            weights,
            timestamp: u.timestamp,
            n_samples: n_k,
        })
    }

    /// Ingests an already-decompressed update (the no-codec transfer path).
    /// Same bookkeeping as [`Self::receive_update`].
    pub fn receive_entry(&mut self, entry: CacheEntry) -> Result<ReceiveOutcome> {
        if self.inflight == 0 {
            return Err(Error::Protocol(alloc::format!(
                "received an update from device {} with nothing in flight",
                entry.sender
            )));
        }
        self.inflight -= 1;
        if entry.timestamp > self.round {
            return Err(Error::Protocol(alloc::format!(
                "update stamped round {} but the server is at round {}",
                entry.timestamp,
                self.round
            )));
        }
        self.cache_and_maybe_aggregate(entry)
    }

    fn cache_and_maybe_aggregate(&mut self, entry: CacheEntry) -> Result<ReceiveOutcome> {
        self.cache.push_back(entry);
        if self.cache.len() == self.k_cache {
            let (_, summary) = self.aggregate_round()?;
            Ok(ReceiveOutcome::Aggregated(summary))
        } else {
            Ok(ReceiveOutcome::Cached)
        }
    }

    /// Pops all `k_cache` entries FIFO, averages, and mixes into the global
    /// model. Must be called with a full cache.
    pub fn aggregate_round(&mut self) -> Result<(ParamVector, AggregationSummary)> {
        if self.cache.len() != self.k_cache {
            return Err(Error::Contract(alloc::format!(
                "aggregate_round needs exactly {} cached entries, found {}",
                self.k_cache,
                self.cache.len()
            )));
        }
        let entries: Vec<CacheEntry> = self.cache.drain(..).collect();
        let senders = entries.iter().map(|e| e.sender).collect();
        let max_staleness =
            entries.iter().map(|e| self.round - e.timestamp).max().unwrap_or(0);
        let (u, delta) = weighted_average(&entries, self.round, self.a_staleness)?;
        let (global, alpha_t) = self.mix_global(&u, delta);
        Ok((
            global,
            AggregationSummary {
                round: self.round,
                mean_staleness: delta,
                max_staleness,
                alpha_t,
                senders,
            },
        ))
    }

    /// Applies `w^{t+1} = α^t·u + (1−α^t)·w^t` with `α^t = α·S(δ)`, advances
    /// the round counter, and returns the new global model and α^t.
    pub fn mix_global(&mut self, u: &ParamVector, delta: f64) -> (ParamVector, f64) {
        debug_assert!(delta >= 0.0);
        let alpha_t = self.alpha * (delta + 1.0).powf(-self.a_staleness);
        let mixed = self
            .global_weights
            .zip_with(u, |w, v| alpha_t * v + (1.0 - alpha_t) * w)
            .expect("update must share the global model's layout");
        self.global_weights = mixed.clone();
        self.round += 1;
        (mixed, alpha_t)
    }
}

/// The staleness discount `S(t−h) = (t−h+1)^(−a)`.
pub fn staleness_weight(t: u64, h: u64, a: f64) -> Result<f64> {
    if h > t {
        return Err(Error::Contract(alloc::format!(
            "timestamp {h} is ahead of round {t}"
        )));
    }
    Ok(((t - h) as f64 + 1.0).powf(-a))
}

/// Staleness-and-size weighted mean of the cache:
/// `u = Σ S(t−h_c)·n_c·w_c / Σ S(t−h_c)·n_c`, plus δ = mean(t−h_c).
///
/// Accumulates in f64 and rounds once to f32 per coordinate.
pub fn weighted_average(entries: &[CacheEntry], t: u64, a: f64) -> Result<(ParamVector, f64)> {
    let first = entries
        .first()
        .ok_or_else(|| Error::Contract(alloc::string::String::from("empty cache")))?;
    let mut sums: Vec<Vec<f64>> = first
        .weights
        .tensors
        .iter()
        .map(|te| alloc::vec![0.0f64; te.values.len()])
        .collect();
    let mut denom = 0.0f64;
    let mut staleness_sum = 0.0f64;
    for e in entries {
        first.weights.check_same_layout(&e.weights)?;
        let s = staleness_weight(t, e.timestamp, a)?;
        let coeff = s * e.n_samples as f64;
        denom += coeff;
        staleness_sum += (t - e.timestamp) as f64;
        for (acc, te) in sums.iter_mut().zip(&e.weights.tensors) {
            for (a, &v) in acc.iter_mut().zip(&te.values) {
                *a += coeff * f64::from(v);
            }
        }
    }
    let mut out = first.weights.clone();
    for (te, acc) in out.tensors.iter_mut().zip(&sums) {
        for (v, &s) in te.values.iter_mut().zip(acc) {
            *v = (s / denom) as f32;
        }
    }
    Ok((out, staleness_sum / entries.len() as f64))
}
