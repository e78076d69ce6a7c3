//! Finite-key secure key length engine for efficient BB84 with weak coherent
//! pulses and two decoy intensities.
//!
//! ```
//! use ebb84_core::{key_length, ChannelConditions, ProtocolParams, SecurityParams};
//!
//! let channel = ChannelConditions::new(30.0, 1e-6, 0.01, 600.0)?;
//! let params = ProtocolParams::new(0.8, 0.8, [0.5, 0.1, 1e-9], [0.7, 0.2, 0.1])?;
//! let r = key_length(&params, &channel, &SecurityParams::default())?;
//! assert!(r.ell > 0);
//! # Ok::<(), ebb84_core::Error>(())
//! ```

pub mod channel;
mod error;
pub mod finite_key;
pub mod optimize;
pub mod scenario;
pub mod uncertainty;

pub use channel::{
    expected_block_counts, expected_block_counts_slotted, BlockCounts, ChannelConditions, ProtocolParams, PulseRates,
};
pub use error::{Error, Result};
pub use finite_key::{
    binary_entropy, secure_key_length, BetaAllocation, KeyLengthResult, NoKeyReason, Reconciliation, SecurityParams,
};
pub use optimize::{feasible, optimize, OptimizationResult, OptimizationSpec, Regime, SearchBounds};
pub use scenario::{
    max_loss, sifting_equivalence, skr_vs_time, sweep, Evaluation, LossBudget, LossBudgetQuery, SiftingEquivalence,
    SkrPoint, SweepAxes, SweepRow, SweepSpec,
};
pub use uncertainty::{worst_case_key_length, IntensityConfiguration, IntensityUncertaintyModel, WorstCase};

/// Expected counts for `params` over `channel`, then the full estimation chain.
pub fn key_length(params: &ProtocolParams, channel: &ChannelConditions, sec: &SecurityParams) -> Result<KeyLengthResult> {
    optimize::evaluate(params, channel, sec)
}
