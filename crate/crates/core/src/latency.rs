//! Wireless-channel and device-compute latency models.
//!
//! Devices sit uniformly on a disk around the base station; each gets a
//! fixed downlink/uplink Shannon rate from its distance, transmit power,
//! path loss, and noise floor. Local computation time follows a shifted
//! exponential: a hard capability floor `a_k·τ·b` plus an exponential tail
//! with rate `φ_k/(τ·b)`, where `τ` is the number of gradient steps and `b`
//! the batch size. A round's latency is download + compute + upload.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::rng;

#[cfg(not(feature = "std"))]
use crate::fmath::F64Ext;

/// Static wireless parameters shared by every device.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ChannelConfig {
    /// Bandwidth B in Hz.
    pub bandwidth_hz: f64,
    /// Path-loss exponent α.
    pub pathloss_exp: f64,
    /// Base-station transmit power (downlink), dBm.
    pub p_bs_dbm: f64,
    /// Device transmit power (uplink), dBm.
    pub p_dev_dbm: f64,
    /// Noise power density N₀, dBm per MHz.
    pub noise_dbm_per_mhz: f64,
    /// Cell radius R in meters.
    pub radius_m: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            bandwidth_hz: 2e7,
            pathloss_exp: 3.76,
            p_bs_dbm: 20.0,
            p_dev_dbm: 10.0,
            noise_dbm_per_mhz: -114.0,
            radius_m: 600.0,
        }
    }
}

/// One device's fixed placement, capability, and channel rates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviceProfile {
    pub id: usize,
    pub distance_m: f64,
    /// Compute-capability floor coefficient (seconds per sample-step).
    pub a_k: f64,
    /// Fluctuation rate of the exponential tail.
    pub phi_k: f64,
    /// Local sample count.
    pub n_k: usize,
    pub r_down_bps: f64,
    pub r_up_bps: f64,
}

/// The work one local-training task performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkloadSpec {
    /// Gradient steps: `epochs × ⌈n_k / batch⌉`.
    pub tau: u64,
    /// Batch size.
    pub b: u64,
}

impl WorkloadSpec {
    pub fn new(epochs: u64, n_k: usize, batch: usize) -> Self {
        let batch = batch.max(1) as u64;
        let steps = (n_k as u64).div_ceil(batch).max(1);
        WorkloadSpec { tau: (epochs * steps).max(1), b: batch }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Direction {
    Down,
    Up,
}

/// dBm → linear watts.
fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Total noise power over the whole band, in watts.
pub fn noise_watts(cfg: &ChannelConfig) -> f64 {
    let bw_mhz = cfg.bandwidth_hz / 1e6;
    dbm_to_watts(cfg.noise_dbm_per_mhz + 10.0 * bw_mhz.log10())
}

/// Draws device distances uniform over the disk of radius R: `d = R·√U`.
pub fn place_devices(n: usize, cfg: &ChannelConfig, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut r = rng::stream(seed, "placement", 0);
    (0..n).map(|_| cfg.radius_m * r.gen::<f64>().sqrt()).collect()
}

/// Shannon rate in bits/s for one link. Distances below 1 m clamp to 1 m so
/// the power-law path loss cannot blow up.
pub fn transmission_rate(distance_m: f64, direction: Direction, cfg: &ChannelConfig) -> f64 {
    let d = distance_m.max(1.0);
    let p_watts = dbm_to_watts(match direction {
        Direction::Down => cfg.p_bs_dbm,
        Direction::Up => cfg.p_dev_dbm,
    });
    let gain = d.powf(-cfg.pathloss_exp);
    let snr = p_watts * gain / noise_watts(cfg);
    cfg.bandwidth_hz * (1.0 + snr).log2()
}

/// Samples one shifted-exponential compute latency:
/// `L = a_k·τ·b + Exp(rate = φ_k/(τ·b))`, never below the shift.
pub fn sample_compute_latency(
    profile: &DeviceProfile,
    work: &WorkloadSpec,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let tb = (work.tau * work.b) as f64;
    profile.a_k * tb + rng::exponential(rng, profile.phi_k / tb)
}

/// Analytic mean of [`sample_compute_latency`]: `a_k·τ·b + τ·b/φ_k`.
pub fn mean_compute_latency(profile: &DeviceProfile, work: &WorkloadSpec) -> f64 {
    let tb = (work.tau * work.b) as f64;
    profile.a_k * tb + tb / profile.phi_k
}

/// Transfer time of `bit_size` bits over a `rate_bps` link.
pub fn comm_latency(bit_size: u64, rate_bps: f64) -> f64 {
    bit_size as f64 / rate_bps
}

/// One device task end to end: download + compute + upload.
pub fn round_latency(down: f64, compute: f64, up: f64) -> f64 {
    down + compute + up
}
