//! Energy-minimal scheduling of a packet of `B` nats over `T` slots of an
//! i.i.d. fading channel with causal channel knowledge.
//!
//! Slots are indexed by the number of slots remaining, so `t = T` is the
//! first slot and `t = 1` is the deadline. Transmitting `b` nats on a channel
//! with power gain `g` costs `(e^b - 1) / g` energy units.
//!
//! The crate is organized bottom-up:
//!
//! - [`quadrature`] and [`optimize`]: numerical primitives.
//! - [`fading`]: channel distributions, expectations and fractional moments.
//! - [`policies`]: the closed-form schedulers behind the [`Policy`] trait.
//! - [`dp`]: the discretized backward-induction solver for the optimal policy.
//! - [`sim`]: Monte Carlo evaluation and closed-form cost oracles.
//! - [`analysis`]: scheduling gain and the high/low SNR approximations.

pub mod analysis;
pub mod dp;
mod error;
pub mod fading;
pub mod optimize;
pub mod policies;
pub mod quadrature;
pub mod sim;
mod stats;

pub use analysis::{GainReport, HighSnrOffsets, LowSnrParams, SnrApproximation};
pub use dp::{GridConfig, OptimalPolicy, ValueTable};
pub use error::{Error, Result};
pub use fading::{DistributionSpec, FadingDistribution, MomentTable};
pub use policies::{OneShotThresholds, Policy, PolicySpec, WaterfillSolution};
pub use sim::{DeltaSearch, SimulationReport};

/// Energy needed to push `bits` nats through a channel of power gain `gain`.
#[inline]
pub fn energy(bits: f64, gain: f64) -> f64 {
    bits.exp_m1() / gain
}

/// Converts a power ratio to decibels.
#[inline]
pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}
