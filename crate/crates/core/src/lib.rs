//! Deterministic discrete-event simulation of asynchronous federated learning
//! on wireless edge devices.
//!
//! The crate implements the TEASQ-Fed protocol family and its baselines as a
//! pure, seedable library:
//!
//! * [`model`] — three small trainable architectures with hand-coded exact
//!   gradients, prox-regularized SGD, and test-set evaluation.
//! * [`compress`] — per-tensor Top-K sparsification plus fixed-bit stochastic
//!   quantization, with exact wire-format bit accounting.
//! * [`aggregate`] — the server state machine: admission cap, update cache,
//!   staleness-weighted averaging, and elastic global mixing.
//! * [`latency`] — wireless transmission rates from device placement and
//!   shifted-exponential compute delays.
//! * [`sim`] — the single-threaded event loop that drives devices and server
//!   through the asynchronous protocols and the FedAvg/FedAsync baselines.
//! * [`tune`] — greedy search for compression parameters under an
//!   accuracy-drop budget, and the stepwise decay schedule built from it.
//! * [`data`] — synthetic blob datasets and IID / non-IID device partitions.
//! * [`config`] — the experiment configuration consumed by [`sim::run`].
//!
//! Everything is deterministic given an [`config::ExperimentConfig`] and its
//! seed: runs repeated with identical inputs produce bit-identical metrics.
//!
//! The crate is `no_std`-compatible (with `alloc`) when built without the
//! default `std` feature, so the device-side pieces can be reused in embedded
//! targets; file formats and the CLI live in the companion `teasq-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod aggregate;
pub mod compress;
pub mod config;
pub mod data;
pub mod error;
pub(crate) mod fmath;
pub mod latency;
pub mod model;
pub mod params;
pub mod rng;
pub mod sim;
pub mod tune;

pub use config::ExperimentConfig;
pub use error::Error;
pub use params::ParamVector;
