//! Shared fixtures for the solver benchmarks.

use fadesched::FadingDistribution;

/// Truncated exponential gain on `[0.001, 1e6]`, the heaviest-tailed
/// reference channel.
pub fn reference_channel() -> FadingDistribution {
    FadingDistribution::truncated_exponential(0.001, 1e6).expect("valid support")
}
