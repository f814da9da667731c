//! Scheduling gain and the high/low SNR approximations.

use crate::dp::{GridConfig, ValueTable};
use crate::error::{invalid, Error, Result};
use crate::fading::{FadingDistribution, MomentTable};
use crate::optimize::bisect;
use crate::policies::OneShotThresholds;
use crate::to_db;

const RATE_TOL: f64 = 1e-12;
const RATE_MAX_ITER: usize = 300;

/// Equal-bit expected energy `T (e^{B/T} - 1) nu_1`.
pub fn equal_bit_cost(nu1: f64, packet: f64, horizon: usize) -> f64 {
    let t = horizon as f64;
    t * (packet / t).exp_m1() * nu1
}

/// `10 log10(J_equal / J_opt)` in dB.
pub fn scheduling_gain(dist: &FadingDistribution, packet: f64, horizon: usize, optimal_cost: f64) -> Result<f64> {
    if packet == 0.0 {
        return Err(Error::UndefinedGain);
    }
    if !(packet > 0.0) || horizon == 0 {
        return Err(invalid("B/T", "need B > 0 and T >= 1"));
    }
    if !(optimal_cost > 0.0) {
        return Err(invalid("optimal_cost", format!("must be > 0, got {optimal_cost}")));
    }
    Ok(to_db(equal_bit_cost(dist.mean_inverse()?, packet, horizon) / optimal_cost))
}

/// Small-packet limit `10 log10(nu_1 / omega_{T+1})`.
pub fn gain_limit_small_b(moments: &MomentTable, thresholds: &OneShotThresholds, horizon: usize) -> f64 {
    to_db(moments.nu(1) / thresholds.omega(horizon + 1))
}

/// Large-packet limit `10 log10(nu_1 / G(nu_T, ..., nu_1))`.
pub fn gain_limit_large_b(moments: &MomentTable, horizon: usize) -> f64 {
    to_db(moments.nu(1) / moments.geometric_mean(horizon))
}

/// DP-based gain over a list of packet sizes with the two limits.
#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub distribution: String,
    pub horizon: usize,
    /// `(B, gain in dB)`.
    pub gains: Vec<(f64, f64)>,
    pub limit_small_b: f64,
    pub limit_large_b: f64,
}

/// Solves one DP per packet size (grid scaled to that packet) and reports
/// the scheduling gain at each.
pub fn gain_report(
    dist: &FadingDistribution,
    horizon: usize,
    packets: &[f64],
    n_beta: usize,
    n_g: usize,
) -> Result<GainReport> {
    let moments = MomentTable::new(dist, horizon)?;
    let om = crate::policies::one_shot_thresholds(dist, horizon)?;
    let mut gains = Vec::with_capacity(packets.len());
    for &b in packets {
        if b == 0.0 {
            return Err(Error::UndefinedGain);
        }
        let grid = GridConfig::for_packet(b)?.with_resolution(n_beta, n_g);
        let table = ValueTable::solve(dist, horizon, grid)?;
        let cost = table.value(horizon, b)?;
        gains.push((b, scheduling_gain(dist, b, horizon, cost)?));
    }
    Ok(GainReport {
        distribution: dist.id().to_string(),
        horizon,
        gains,
        limit_small_b: gain_limit_small_b(&moments, &om, horizon),
        limit_large_b: gain_limit_large_b(&moments, horizon),
    })
}

/// Affine high-SNR offsets in nats, `R ~ S_inf (log P - L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighSnrOffsets {
    pub s_inf: f64,
    pub l_equal: f64,
    pub l_opt: f64,
    pub l_erg: f64,
}

pub fn high_snr_offsets(moments: &MomentTable, horizon: usize) -> HighSnrOffsets {
    HighSnrOffsets {
        s_inf: 1.0,
        l_equal: moments.nu(1).ln(),
        l_opt: moments.geometric_mean(horizon).ln(),
        l_erg: moments.nu_inf().ln(),
    }
}

/// Wideband slope and minimum energy per bit (linear ratios).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowSnrParams {
    pub s0_equal: f64,
    pub ebn0_min_equal: f64,
    /// Shared by the one-shot and optimal schedulers.
    pub s0_opt: f64,
    pub ebn0_min_opt: f64,
    pub s0_erg: f64,
    pub ebn0_min_erg: f64,
}

pub fn low_snr_params(moments: &MomentTable, thresholds: &OneShotThresholds, horizon: usize) -> LowSnrParams {
    let ln2 = std::f64::consts::LN_2;
    LowSnrParams {
        s0_equal: 2.0,
        ebn0_min_equal: ln2 * moments.nu(1),
        s0_opt: 2.0 / horizon as f64,
        ebn0_min_opt: ln2 * thresholds.omega(horizon + 1),
        s0_erg: 0.0,
        ebn0_min_erg: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrApproximation {
    pub horizon: usize,
    pub high: HighSnrOffsets,
    pub low: LowSnrParams,
}

pub fn snr_approximation(dist: &FadingDistribution, horizon: usize) -> Result<SnrApproximation> {
    let moments = MomentTable::new(dist, horizon)?;
    let om = crate::policies::one_shot_thresholds(dist, horizon)?;
    Ok(SnrApproximation {
        horizon,
        high: high_snr_offsets(&moments, horizon),
        low: low_snr_params(&moments, &om, horizon),
    })
}

/// Inverts a strictly increasing per-slot cost `cost(B) / T = P` on
/// `[0, b_max]` for each power and returns `(P, B / T)` pairs.
///
/// Nonpositive powers map to zero rate; powers above `cost(b_max) / T`
/// are out of range.
pub fn spectral_efficiency<F: Fn(f64) -> Result<f64>>(
    cost: F,
    horizon: usize,
    b_max: f64,
    powers: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if horizon == 0 {
        return Err(invalid("T", "horizon must be >= 1"));
    }
    let t = horizon as f64;
    let top = cost(b_max)? / t;
    powers
        .iter()
        .map(|&p| {
            if !(p > 0.0) {
                return Ok((p, 0.0));
            }
            if p > top {
                return Err(Error::OutOfRange { beta: f64::NAN, beta_max: b_max });
            }
            let mut failure = None;
            let b = bisect(
                |b| match cost(b) {
                    Ok(c) => c / t - p,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                0.0,
                b_max,
                RATE_TOL,
                RATE_TOL,
                RATE_MAX_ITER,
            )?;
            match failure {
                Some(e) => Err(e),
                None => Ok((p, b / t)),
            }
        })
        .collect()
}

/// Optimal rate-power curve from a solved value table.
pub fn spectral_efficiency_dp(table: &ValueTable, powers: &[f64]) -> Result<Vec<(f64, f64)>> {
    let t = table.horizon();
    spectral_efficiency(|b| table.value(t, b), t, table.grid().beta_max, powers)
}

/// Equal-bit curve `log(1 + P / nu_1)`.
pub fn spectral_efficiency_equal(nu1: f64, powers: &[f64]) -> Vec<(f64, f64)> {
    powers.iter().map(|&p| (p, if p > 0.0 { (p / nu1).ln_1p() } else { 0.0 })).collect()
}
