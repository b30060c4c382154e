//! Error taxonomy shared by every module in the crate.

use alloc::string::String;

/// Errors surfaced by the simulator core.
///
/// The variants separate caller bugs (contract violations), bad experiment
/// descriptions (configuration), and bad data received over the simulated
/// wire (corrupt payloads), so the CLI can map them to distinct exit
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// An operation was called outside its documented preconditions
    /// (mismatched tensor layouts, aggregation on a non-full cache, …).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The experiment configuration is invalid as described.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A compressed update failed validation during decoding.
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),

    /// A device cannot participate (for example, it holds no samples).
    #[error("unusable device: {0}")]
    UnusableDevice(String),

    /// The server was driven through an impossible protocol transition.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// The requested data partition cannot be constructed.
    #[error("partitioning error: {0}")]
    Partition(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
