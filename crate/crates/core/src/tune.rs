//! Greedy compression-parameter search and the stepwise decay schedule.
//!
//! Given a trained probe model and an accuracy-drop budget θ, the search
//! alternates between pushing the sparsification level toward higher
//! compression and tightening the quantization width one notch at a time,
//! relaxing sparsification whenever a harsher width breaks the budget. The
//! resulting pair seeds a per-round schedule that starts one notch *more*
//! compressed and decays toward less compression every `step_size` rounds.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::compress::{compress, decompress, CompressionParams, ALLOWED_PQ};
use crate::data::DatasetHandle;
use crate::error::{Error, Result};
use crate::model::{evaluate, ModelSpec};
use crate::params::ParamVector;

/// Fixed seed for the codec's stochastic rounding during search, so repeated
/// searches over the same probe are identical.
pub const SEARCH_SEED: u64 = 0x7ea5_11fe;

/// The search space and schedule horizon.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompressionSets {
    /// Sparsification levels, most-compressed first (ascending kept-%).
    pub set_s: Vec<f64>,
    /// Quantization widths, most-compressed first (ascending effective bits;
    /// the last element must be 32 or 0, i.e. no quantization).
    pub set_q: Vec<u8>,
    /// Accuracy-drop budget θ ≥ 0 (absolute, e.g. 0.02 for two points).
    pub theta: f64,
    /// Rounds between decay steps.
    pub step_size: u64,
    /// Schedule length T.
    pub t_rounds: u64,
}

/// Effective bits per retained value (0 means raw 32-bit).
fn effective_bits(p_q: u8) -> u8 {
    if p_q == 0 {
        32
    } else {
        p_q
    }
}

impl CompressionSets {
    pub fn validate(&self) -> Result<()> {
        if self.set_s.is_empty() || self.set_q.is_empty() {
            return Err(Error::Config(String::from("compression sets must be non-empty")));
        }
        for w in self.set_s.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Config(String::from(
                    "set_s must be strictly ascending (most-compressed first)",
                )));
            }
        }
        for &p_s in &self.set_s {
            (CompressionParams { p_s, p_q: 0 }).validate()?;
        }
        for &p_q in &self.set_q {
            if !ALLOWED_PQ.contains(&p_q) {
                return Err(Error::Config(alloc::format!("set_q contains invalid width {p_q}")));
            }
        }
        for w in self.set_q.windows(2) {
            if effective_bits(w[0]) >= effective_bits(w[1]) {
                return Err(Error::Config(String::from(
                    "set_q must be strictly ascending in effective bits",
                )));
            }
        }
        let last = *self.set_q.last().expect("non-empty");
        if effective_bits(last) != 32 {
            return Err(Error::Config(String::from(
                "set_q's least-compressed element must be 32 or 0 (no quantization)",
            )));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::Config(String::from("theta must be nonnegative")));
        }
        if self.step_size == 0 {
            return Err(Error::Config(String::from("step_size must be positive")));
        }
        if self.t_rounds == 0 {
            return Err(Error::Config(String::from("t_rounds must be positive")));
        }
        Ok(())
    }

    fn index_of_s(&self, p_s: f64) -> Option<usize> {
        self.set_s.iter().position(|&x| x == p_s)
    }

    fn index_of_q(&self, p_q: u8) -> Option<usize> {
        self.set_q.iter().position(|&x| x == p_q)
    }
}

/// Result of the greedy search.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchOutcome {
    pub params: CompressionParams,
    /// True when no setting met the budget and the search fell back to
    /// fully lossless parameters.
    pub fell_back_lossless: bool,
    /// Distinct accuracy evaluations performed (≤ |set_s|·|set_q|).
    pub evaluations: usize,
    /// The probe model's uncompressed accuracy.
    pub baseline_accuracy: f64,
}

/// Per-round compression parameters for a whole run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompressionSchedule {
    pub per_round: Vec<CompressionParams>,
}

impl CompressionSchedule {
    /// Parameters for round `t`; constant at the last entry past the end.
    pub fn params_at(&self, t: u64) -> CompressionParams {
        let idx = (t as usize).min(self.per_round.len() - 1);
        self.per_round[idx]
    }

    /// A schedule that repeats one setting for every round.
    pub fn constant(params: CompressionParams, t_rounds: u64) -> Self {
        CompressionSchedule { per_round: alloc::vec![params; t_rounds.max(1) as usize] }
    }
}

/// Greedy alternating search for the most compressed (p_s, p_q) whose
/// compress→decompress round trip keeps the probe's test accuracy within
/// θ of its uncompressed accuracy.
///
/// Starting from the most-compressed p_s and the identity quantization
/// width, the search (1) relaxes p_s until the budget holds, (2) pushes p_s
/// back toward higher compression as far as the budget allows, (3) tries
/// one harsher quantization notch, relaxing p_s again if needed, and
/// repeats until neither parameter can move. Evaluations are memoized, so
/// at most |set_s|·|set_q| accuracy tests run.
pub fn search_params(
    probe_w: &ParamVector,
    testset: &DatasetHandle,
    spec: &ModelSpec,
    sets: &CompressionSets,
) -> Result<SearchOutcome> {
    sets.validate()?;
    let baseline = evaluate(probe_w, testset, spec);
    let floor = baseline - sets.theta;

    let mut memo: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut feasible = |i_s: usize, i_q: usize| -> Result<bool> {
        let acc = match memo.get(&(i_s, i_q)) {
            Some(&a) => a,
            None => {
                let params =
                    CompressionParams { p_s: sets.set_s[i_s], p_q: sets.set_q[i_q] };
                let u = compress(probe_w, &params, SEARCH_SEED)?;
                let acc = evaluate(&decompress(&u, spec)?, testset, spec);
                memo.insert((i_s, i_q), acc);
                acc
            }
        };
        Ok(acc >= floor)
    };

    let last_s = sets.set_s.len() - 1;
    let mut i_s = 0usize;
    let mut i_q = sets.set_q.len() - 1; // identity width

    // establish feasibility at the identity width by relaxing p_s
    while !feasible(i_s, i_q)? {
        if i_s == last_s {
            return Ok(SearchOutcome {
                params: CompressionParams::LOSSLESS,
                fell_back_lossless: true,
                evaluations: memo.len(),
                baseline_accuracy: baseline,
            });
        }
        i_s += 1;
    }

    loop {
        // push sparsification toward higher compression while it holds
        while i_s > 0 && feasible(i_s - 1, i_q)? {
            i_s -= 1;
        }
        // try one harsher quantization notch, relaxing p_s if needed
        if i_q == 0 {
            break;
        }
        let j_q = i_q - 1;
        let mut j_s = i_s;
        while !feasible(j_s, j_q)? {
            if j_s == last_s {
                break;
            }
            j_s += 1;
        }
        if !feasible(j_s, j_q)? {
            break; // even the least-compressed p_s cannot support j_q
        }
        i_s = j_s;
        i_q = j_q;
    }

    Ok(SearchOutcome {
        params: CompressionParams { p_s: sets.set_s[i_s], p_q: sets.set_q[i_q] },
        fell_back_lossless: false,
        evaluations: memo.len(),
        baseline_accuracy: baseline,
    })
}

/// Where the decay stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayEndpoint {
    /// Decay stops at the values the search found (the default).
    Found,
    /// Decay continues all the way to the least-compressed list ends.
    LeastCompressed,
}

/// Builds the per-round schedule: round 0 starts one position *more*
/// compressed than `found` (clamped to the list start); every `step_size`
/// rounds both parameters move one position toward less compression,
/// clamping at the endpoint.
pub fn build_schedule(
    found: &CompressionParams,
    sets: &CompressionSets,
    endpoint: DecayEndpoint,
) -> Result<CompressionSchedule> {
    sets.validate()?;
    let found_s = sets.index_of_s(found.p_s).ok_or_else(|| {
        Error::Config(alloc::format!("found p_s = {} is not in set_s", found.p_s))
    })?;
    let found_q = sets.index_of_q(found.p_q).ok_or_else(|| {
        Error::Config(alloc::format!("found p_q = {} is not in set_q", found.p_q))
    })?;

    let (end_s, end_q) = match endpoint {
        DecayEndpoint::Found => (found_s, found_q),
        DecayEndpoint::LeastCompressed => (sets.set_s.len() - 1, sets.set_q.len() - 1),
    };
    let start_s = found_s.saturating_sub(1);
    let start_q = found_q.saturating_sub(1);

    // start ≤ end always holds: start is found−1 (clamped at 0) and end is
    // found or the list's last index
    let per_round = (0..sets.t_rounds)
        .map(|t| {
            let steps = (t / sets.step_size) as usize;
            CompressionParams {
                p_s: sets.set_s[(start_s + steps).min(end_s)],
                p_q: sets.set_q[(start_q + steps).min(end_q)],
            }
        })
        .collect();
    Ok(CompressionSchedule { per_round })
}
