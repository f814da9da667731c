//! Closed-form schedulers.
//!
//! Every scheduler implements [`Policy`]: given the number of remaining
//! slots `t`, the unserved queue `beta` and the current gain `g`, it returns
//! the nats to serve now. All of them serve the whole queue at `t = 1`.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::fading::{FadingDistribution, MomentTable};
use crate::optimize::bisect;

/// Relative bisection tolerance on the waterfilling threshold.
pub const WATERFILL_REL_TOL: f64 = 1e-12;
pub const WATERFILL_MAX_ITER: usize = 200;

/// A causal scheduling policy `b_t(beta_t, g_t)`.
pub trait Policy: Send + Sync {
    /// Spec string identifying the policy (`equal`, `relaxed`, ...).
    fn name(&self) -> String;

    /// Nats to serve in slot `slot` (slots remaining, `>= 1`) with `queue`
    /// nats unserved and current gain `gain`. The result lies in `[0, queue]`.
    fn allocate(&self, slot: usize, queue: f64, gain: f64) -> Result<f64>;
}

pub(crate) fn check_state(slot: usize, queue: f64) -> Result<()> {
    if slot == 0 {
        return Err(Error::Domain { what: "slot", value: 0.0, domain: "t >= 1".into() });
    }
    if !(queue >= 0.0 && queue.is_finite()) {
        return Err(Error::Domain { what: "queue", value: queue, domain: "[0, inf)".into() });
    }
    Ok(())
}

/// Serves `B/T` nats per slot regardless of the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualBit {
    per_slot: f64,
}

pub fn equal_bit(packet: f64, horizon: usize) -> Result<EqualBit> {
    if !(packet >= 0.0 && packet.is_finite()) {
        return Err(invalid("B", "packet size must be finite and >= 0"));
    }
    if horizon == 0 {
        return Err(invalid("T", "horizon must be >= 1"));
    }
    Ok(EqualBit { per_slot: packet / horizon as f64 })
}

impl EqualBit {
    pub fn per_slot(&self) -> f64 {
        self.per_slot
    }
}

impl Policy for EqualBit {
    fn name(&self) -> String {
        "equal".into()
    }

    fn allocate(&self, slot: usize, queue: f64, _gain: f64) -> Result<f64> {
        check_state(slot, queue)?;
        Ok(if slot == 1 { queue } else { queue.min(self.per_slot) })
    }
}

/// Channel threshold `1 / G(nu_{t-1}, ..., nu_1)` of the boundary-relaxed
/// scheduler in slot `t >= 2`.
pub fn relaxed_threshold(moments: &MomentTable, slot: usize) -> Result<f64> {
    if slot < 2 {
        return Err(Error::Domain { what: "slot", value: slot as f64, domain: "t >= 2".into() });
    }
    if slot - 1 > moments.max_order() {
        return Err(invalid(
            "moments",
            format!("slot {slot} needs nu_1..nu_{} but only {} are tabulated", slot - 1, moments.max_order()),
        ));
    }
    Ok(1.0 / moments.geometric_mean(slot - 1))
}

/// Relaxed-problem optimum `beta/t + (t-1)/t log(g / eta_t)`, clamped to
/// `[0, beta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRelaxed {
    /// `eta[t - 2]` is the threshold for slot `t`.
    eta: Vec<f64>,
    support: (f64, f64),
}

pub fn boundary_relaxed(moments: &MomentTable) -> BoundaryRelaxed {
    let eta = (2..=moments.max_order() + 1)
        .map(|t| 1.0 / moments.geometric_mean(t - 1))
        .collect();
    BoundaryRelaxed { eta, support: moments.support() }
}

impl BoundaryRelaxed {
    /// Longest horizon the captured moments cover.
    pub fn max_slot(&self) -> usize {
        self.eta.len() + 1
    }

    pub fn threshold(&self, slot: usize) -> Option<f64> {
        slot.checked_sub(2).and_then(|i| self.eta.get(i)).copied()
    }
}

impl Policy for BoundaryRelaxed {
    fn name(&self) -> String {
        "relaxed".into()
    }

    fn allocate(&self, slot: usize, queue: f64, gain: f64) -> Result<f64> {
        check_state(slot, queue)?;
        let (lo, hi) = self.support;
        if !(gain >= lo && gain <= hi) {
            return Err(Error::Domain { what: "gain", value: gain, domain: format!("[{lo}, {hi}]") });
        }
        if slot == 1 {
            return Ok(queue);
        }
        let eta = self.threshold(slot).ok_or_else(|| {
            invalid("slot", format!("slot {slot} exceeds the tabulated horizon {}", self.max_slot()))
        })?;
        let t = slot as f64;
        let raw = queue / t + (t - 1.0) / t * (gain / eta).ln();
        Ok(raw.max(0.0).min(queue))
    }
}

/// Reciprocal one-shot thresholds `omega_1..omega_{T+1}`.
///
/// `omega_1 = inf`, `omega_2 = E[1/g]` and
/// `omega_t = E[min(1/g, omega_{t-1})]`. The channel threshold in slot `t`
/// is `1 / omega_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneShotThresholds {
    omega: Vec<f64>,
}

pub fn one_shot_thresholds(dist: &FadingDistribution, horizon: usize) -> Result<OneShotThresholds> {
    if horizon == 0 {
        return Err(invalid("T", "horizon must be >= 1"));
    }
    let mut omega = Vec::with_capacity(horizon + 1);
    omega.push(f64::INFINITY);
    omega.push(dist.mean_inverse()?);
    for t in 3..=horizon + 1 {
        let prev = omega[t - 2];
        let next = dist.expect_on(&format!("min(1/g, omega_{})", t - 1), f64::NEG_INFINITY, f64::INFINITY, &[1.0 / prev], |g| {
            (1.0 / g).min(prev)
        })?;
        omega.push(next);
    }
    Ok(OneShotThresholds { omega })
}

impl OneShotThresholds {
    /// Largest `t` with a tabulated `omega_t` (that is, `T + 1`).
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// `omega_t`. Panics if `t` is zero or beyond [`Self::len`].
    pub fn omega(&self, t: usize) -> f64 {
        self.omega[t - 1]
    }

    /// Channel threshold `1 / omega_t` (zero at `t = 1`).
    pub fn channel_threshold(&self, t: usize) -> f64 {
        1.0 / self.omega(t)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.omega
    }
}

/// Sends the whole queue in the first slot whose gain beats `1 / omega_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneShot {
    thresholds: OneShotThresholds,
}

pub fn one_shot(thresholds: &OneShotThresholds, packet: f64) -> Result<OneShot> {
    if !(packet >= 0.0 && packet.is_finite()) {
        return Err(invalid("B", "packet size must be finite and >= 0"));
    }
    Ok(OneShot { thresholds: thresholds.clone() })
}

impl OneShot {
    pub fn thresholds(&self) -> &OneShotThresholds {
        &self.thresholds
    }
}

impl Policy for OneShot {
    fn name(&self) -> String {
        "oneshot".into()
    }

    fn allocate(&self, slot: usize, queue: f64, gain: f64) -> Result<f64> {
        check_state(slot, queue)?;
        if slot == 1 {
            return Ok(queue);
        }
        if slot > self.thresholds.len() {
            return Err(invalid(
                "slot",
                format!("slot {slot} exceeds the tabulated horizon {}", self.thresholds.len() - 1),
            ));
        }
        // strict inequality: a gain exactly at the threshold waits
        Ok(if queue > 0.0 && gain > self.thresholds.channel_threshold(slot) { queue } else { 0.0 })
    }
}

/// Ergodic waterfilling threshold `eta` meeting an average rate `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterfillSolution {
    pub eta: f64,
    pub target: f64,
}

impl WaterfillSolution {
    /// Waterfilling allocation `max(0, log(g / eta))`.
    pub fn allocation(&self, gain: f64) -> f64 {
        (gain / self.eta).ln().max(0.0)
    }
}

/// `E[max(0, log(g / eta))]`, strictly decreasing in `eta` below `g_max`.
pub fn ergodic_rate(dist: &FadingDistribution, eta: f64) -> Result<f64> {
    dist.expect_on("max(0, log(g/eta))", eta, f64::INFINITY, &[], |g| (g / eta).ln().max(0.0))
}

pub fn waterfill_threshold(dist: &FadingDistribution, target: f64) -> Result<WaterfillSolution> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::Domain { what: "average rate", value: target, domain: "(0, inf)".into() });
    }
    let g_min = dist.g_min();
    let g_max = dist.g_max();
    // Below g_min every state is active and the constraint is linear in log eta.
    if g_min > 0.0 {
        let mean_log = dist.expect("log g", f64::ln)?;
        let log_eta = mean_log - target;
        if log_eta <= g_min.ln() {
            return Ok(WaterfillSolution { eta: log_eta.exp(), target });
        }
    }
    let residual = |log_eta: f64| ergodic_rate(dist, log_eta.exp()).map(|r| r - target);
    let hi = g_max.ln();
    let mut lo = if g_min > 0.0 { g_min.ln() } else { hi - 1.0 };
    let mut step = 1.0;
    let mut expansions = 0;
    while residual(lo)? <= 0.0 {
        lo -= step;
        step *= 2.0;
        expansions += 1;
        if expansions > 64 {
            return Err(Error::NoConvergence {
                solver: "waterfilling",
                reason: format!("rate {target} not reachable for any threshold"),
            });
        }
    }
    // Quadrature errors are surfaced after the search, which needs an infallible closure.
    let mut failure = None;
    let log_eta = bisect(
        |x| match residual(x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        lo,
        hi,
        WATERFILL_REL_TOL,
        0.0,
        WATERFILL_MAX_ITER,
    )
    .map_err(|e| match e {
        Error::NoConvergence { reason, .. } => Error::NoConvergence { solver: "waterfilling", reason },
        other => other,
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(WaterfillSolution { eta: log_eta.exp(), target })
}

/// Ergodic waterfilling at rate `B/T + delta` in slots `T..2`, capped at the
/// queue, with the remainder flushed at the deadline.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedErgodic {
    solution: WaterfillSolution,
    delta: f64,
}

pub fn constrained_ergodic(
    dist: &FadingDistribution,
    packet: f64,
    horizon: usize,
    delta: f64,
) -> Result<ConstrainedErgodic> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain { what: "delta", value: delta, domain: "(0, inf)".into() });
    }
    if horizon < 2 {
        return Err(invalid("T", "the constrained ergodic scheduler needs T >= 2"));
    }
    if !(packet >= 0.0 && packet.is_finite()) {
        return Err(invalid("B", "packet size must be finite and >= 0"));
    }
    let solution = waterfill_threshold(dist, packet / horizon as f64 + delta)?;
    Ok(ConstrainedErgodic { solution, delta })
}

impl ConstrainedErgodic {
    pub fn solution(&self) -> WaterfillSolution {
        self.solution
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Policy for ConstrainedErgodic {
    fn name(&self) -> String {
        format!("cerg:delta={}", self.delta)
    }

    fn allocate(&self, slot: usize, queue: f64, gain: f64) -> Result<f64> {
        check_state(slot, queue)?;
        if slot == 1 {
            return Ok(queue);
        }
        Ok(self.solution.allocation(gain).min(queue))
    }
}

/// Policy names accepted on the command line and in config files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    Equal,
    Relaxed,
    OneShot,
    /// `cerg:delta=<x>`; `cerg` alone asks for a line search over delta.
    ConstrainedErgodic { delta: Option<f64> },
    Optimal,
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Equal => f.write_str("equal"),
            Self::Relaxed => f.write_str("relaxed"),
            Self::OneShot => f.write_str("oneshot"),
            Self::ConstrainedErgodic { delta: Some(d) } => write!(f, "cerg:delta={d}"),
            Self::ConstrainedErgodic { delta: None } => f.write_str("cerg"),
            Self::Optimal => f.write_str("optimal"),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: String| Error::Parse { what: "policy spec", reason };
        match s.trim() {
            "equal" => Ok(Self::Equal),
            "relaxed" => Ok(Self::Relaxed),
            "oneshot" => Ok(Self::OneShot),
            "optimal" => Ok(Self::Optimal),
            "cerg" => Ok(Self::ConstrainedErgodic { delta: None }),
            other => {
                let rest = other
                    .strip_prefix("cerg:")
                    .ok_or_else(|| bad(format!("unknown policy `{other}`")))?;
                let raw = rest
                    .trim()
                    .strip_prefix("delta=")
                    .ok_or_else(|| bad(format!("`{other}`: expected cerg:delta=<x>")))?;
                let delta: f64 = raw.parse().map_err(|_| bad(format!("`{raw}` is not a number")))?;
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(bad(format!("delta must be positive, got {raw}")));
                }
                Ok(Self::ConstrainedErgodic { delta: Some(delta) })
            }
        }
    }
}
