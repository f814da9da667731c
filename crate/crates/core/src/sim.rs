//! Monte Carlo cost evaluation and closed-form cost oracles.
//!
//! Trials are split into fixed-size shards, each with its own derived seed,
//! and the shard statistics are merged in shard order. The result therefore
//! depends only on `(seed, n_trials)`, not on the number of worker threads.
//! Gains are drawn independently of the policy's decisions, so two policies
//! simulated with the same seed see the same channel realizations.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fading::{FadingDistribution, MomentTable};
use crate::optimize::golden_section;
use crate::policies::{constrained_ergodic, one_shot_thresholds, waterfill_threshold, Policy};
use crate::stats::{shard_seed, Accumulator, CompensatedSum};

/// Trials per shard.
pub const SHARD_SIZE: u64 = 4096;
/// Lower end of the delta search bracket.
pub const DELTA_LO: f64 = 1e-6;
const DELTA_TOL: f64 = 1e-4;
const DELTA_MAX_ITER: usize = 60;

/// Sample mean and standard error of the energy spent by one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub policy: String,
    pub packet: f64,
    pub horizon: usize,
    pub n_trials: u64,
    pub seed: u64,
    pub mean_energy: f64,
    pub std_error: f64,
    pub per_slot_energy: f64,
}

impl SimulationReport {
    pub const CSV_HEADER: &'static str = "policy,B,T,n_trials,seed,mean_energy,std_error,per_slot_energy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.policy, self.packet, self.horizon, self.n_trials, self.seed, self.mean_energy, self.std_error, self.per_slot_energy
        )
    }
}

fn run_shard<P: Policy + ?Sized>(
    dist: &FadingDistribution,
    policy: &P,
    packet: f64,
    horizon: usize,
    trials: u64,
    seed: u64,
) -> Result<Accumulator> {
    let mut gains = dist.sampler(seed);
    let mut acc = Accumulator::default();
    let feas_tol = 1e-12 * packet.max(1.0);
    for _ in 0..trials {
        let mut queue = packet;
        let mut energy = CompensatedSum::default();
        let mut served = CompensatedSum::default();
        for t in (1..=horizon).rev() {
            let g = gains.next_gain();
            let b = policy.allocate(t, queue, g)?;
            if !(b >= 0.0 && b <= queue) {
                return Err(Error::ContractViolation {
                    policy: policy.name(),
                    slot: t,
                    reason: format!("allocated {b} nats with {queue} queued"),
                });
            }
            energy.add(crate::energy(b, g));
            served.add(b);
            queue -= b;
        }
        if (served.value() - packet).abs() > feas_tol {
            return Err(Error::ContractViolation {
                policy: policy.name(),
                slot: 1,
                reason: format!("served {} of {packet} nats by the deadline", served.value()),
            });
        }
        acc.push(energy.value());
    }
    Ok(acc)
}

/// Monte Carlo estimate of the expected energy of `policy` for a packet of
/// `packet` nats and deadline `horizon`.
pub fn simulate<P: Policy + ?Sized>(
    dist: &FadingDistribution,
    policy: &P,
    packet: f64,
    horizon: usize,
    n_trials: u64,
    seed: u64,
) -> Result<SimulationReport> {
    if n_trials == 0 {
        return Err(invalid("n_trials", "must be >= 1"));
    }
    if horizon == 0 {
        return Err(invalid("T", "horizon must be >= 1"));
    }
    if !(packet >= 0.0 && packet.is_finite()) {
        return Err(invalid("B", "packet size must be finite and >= 0"));
    }
    let shards = n_trials.div_ceil(SHARD_SIZE);
    let parts = (0..shards)
        .into_par_iter()
        .map(|k| {
            let trials = SHARD_SIZE.min(n_trials - k * SHARD_SIZE);
            run_shard(dist, policy, packet, horizon, trials, shard_seed(seed, k))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Accumulator::default();
    for p in &parts {
        total.merge(p);
    }
    debug_assert_eq!(total.count(), n_trials);
    let mean = total.mean().max(0.0);
    Ok(SimulationReport {
        policy: policy.name(),
        packet,
        horizon,
        n_trials,
        seed,
        mean_energy: mean,
        std_error: total.std_error(),
        per_slot_energy: mean / horizon as f64,
    })
}

/// Closed form `t e^{B/t} G(nu_t, ..., nu_1) - t nu_1` of the relaxed cost.
pub fn relaxed_cost_closed_form(moments: &MomentTable, packet: f64, t: usize) -> Result<f64> {
    if t == 0 || t > moments.max_order() {
        return Err(invalid("t", format!("need 1 <= t <= {}, got {t}", moments.max_order())));
    }
    let tf = t as f64;
    Ok(tf * (packet / tf).exp() * moments.geometric_mean(t) - tf * moments.nu(1))
}

/// Expected one-shot energy `(e^B - 1) omega_{T+1}`.
pub fn one_shot_cost(dist: &FadingDistribution, packet: f64, horizon: usize) -> Result<f64> {
    let om = one_shot_thresholds(dist, horizon)?;
    Ok(packet.exp_m1() * om.omega(horizon + 1))
}

/// Per-slot energy of ergodic waterfilling at average rate `rate`,
/// `E[(1/eta - 1/g) 1{g > eta}]`.
pub fn ergodic_benchmark(dist: &FadingDistribution, rate: f64) -> Result<f64> {
    let eta = waterfill_threshold(dist, rate)?.eta;
    dist.expect_on("waterfilling energy", eta, f64::INFINITY, &[], |g| (1.0 / eta - 1.0 / g).max(0.0))
}

/// Outcome of the delta line search for the constrained ergodic scheduler.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSearch {
    pub delta: f64,
    pub report: SimulationReport,
    /// Search bracket `[DELTA_LO, hi]`.
    pub bracket: (f64, f64),
    /// Set when the minimizer sits on the bracket edge, i.e. the bracket may
    /// not contain the true minimum.
    pub at_endpoint: bool,
    /// Every `(delta, mean energy)` pair evaluated, in evaluation order.
    pub probes: Vec<(f64, f64)>,
}

/// Golden-section search over delta under common random numbers.
pub fn optimize_delta(
    dist: &FadingDistribution,
    packet: f64,
    horizon: usize,
    n_trials: u64,
    seed: u64,
) -> Result<DeltaSearch> {
    if horizon < 2 {
        return Err(invalid("T", "the delta search needs T >= 2"));
    }
    let rate = packet / horizon as f64;
    let hi = (2.0 * rate).max(2.0);
    let mut probes = Vec::new();
    let mut failure = None;
    let m = golden_section(
        |delta| {
            let cost = constrained_ergodic(dist, packet, horizon, delta)
                .and_then(|p| simulate(dist, &p, packet, horizon, n_trials, seed));
            match cost {
                Ok(r) => {
                    probes.push((delta, r.mean_energy));
                    r.mean_energy
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            }
        },
        DELTA_LO,
        hi,
        DELTA_TOL,
        DELTA_MAX_ITER,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let policy = constrained_ergodic(dist, packet, horizon, m.x)?;
    let report = simulate(dist, &policy, packet, horizon, n_trials, seed)?;
    let at_endpoint = m.x - DELTA_LO <= DELTA_TOL || hi - m.x <= DELTA_TOL;
    Ok(DeltaSearch { delta: m.x, report, bracket: (DELTA_LO, hi), at_endpoint, probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{equal_bit, one_shot};

    #[test]
    fn constant_channel_equal_bit_is_exact() {
        let d = FadingDistribution::deterministic(1.0).unwrap();
        let p = equal_bit(2.0, 2).unwrap();
        let r = simulate(&d, &p, 2.0, 2, 1000, 1).unwrap();
        assert!((r.mean_energy - 2.0 * 1f64.exp_m1()).abs() < 1e-12);
        assert_eq!(r.std_error, 0.0);
        assert_eq!(r.per_slot_energy, r.mean_energy / 2.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let d = FadingDistribution::truncated_exponential(0.01, 1e6).unwrap();
        let p = equal_bit(3.0, 4).unwrap();
        let a = simulate(&d, &p, 3.0, 4, 10_000, 42).unwrap();
        let b = simulate(&d, &p, 3.0, 4, 10_000, 42).unwrap();
        let c = simulate(&d, &p, 3.0, 4, 10_000, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.mean_energy, c.mean_energy);
    }

    struct Greedy;
    impl Policy for Greedy {
        fn name(&self) -> String {
            "greedy".into()
        }
        fn allocate(&self, _slot: usize, queue: f64, _gain: f64) -> Result<f64> {
            Ok(queue + 1.0)
        }
    }

    struct Lazy;
    impl Policy for Lazy {
        fn name(&self) -> String {
            "lazy".into()
        }
        fn allocate(&self, _slot: usize, _queue: f64, _gain: f64) -> Result<f64> {
            Ok(0.0)
        }
    }

    #[test]
    fn contract_violations_name_the_slot() {
        let d = FadingDistribution::deterministic(1.0).unwrap();
        match simulate(&d, &Greedy, 1.0, 3, 1, 0).unwrap_err() {
            Error::ContractViolation { slot, policy, .. } => assert_eq!((slot, policy.as_str()), (3, "greedy")),
            e => panic!("{e:?}"),
        }
        assert!(matches!(simulate(&d, &Lazy, 1.0, 3, 1, 0), Err(Error::ContractViolation { slot: 1, .. })));
        assert!(simulate(&d, &Lazy, 0.0, 3, 1, 0).is_ok());
        assert!(simulate(&d, &Lazy, 1.0, 3, 0, 0).is_err());
    }

    #[test]
    fn closed_forms_on_constant_channel() {
        let d = FadingDistribution::deterministic(1.0).unwrap();
        let m = MomentTable::new(&d, 8).unwrap();
        assert_eq!(relaxed_cost_closed_form(&m, 0.0, 5).unwrap(), 0.0);
        assert!((relaxed_cost_closed_form(&m, 3.0, 1).unwrap() - 3f64.exp_m1()).abs() < 1e-12);
        for t in 1..6 {
            assert!((one_shot_cost(&d, 1.5, t).unwrap() - 1.5f64.exp_m1()).abs() < 1e-12);
        }
        let gamma = 2.5;
        let d = FadingDistribution::deterministic(gamma).unwrap();
        assert!((ergodic_benchmark(&d, 0.8).unwrap() - 0.8f64.exp_m1() / gamma).abs() < 1e-12);
    }

    #[test]
    fn one_shot_simulation_matches_oracle() {
        let d = FadingDistribution::truncated_exponential(0.1, 1e6).unwrap();
        let om = one_shot_thresholds(&d, 5).unwrap();
        let r = simulate(&d, &one_shot(&om, 1.0).unwrap(), 1.0, 5, 200_000, 9).unwrap();
        let exact = one_shot_cost(&d, 1.0, 5).unwrap();
        assert!((r.mean_energy - exact).abs() < 4.0 * r.std_error, "{} vs {exact}", r.mean_energy);
    }

    #[test]
    fn delta_search_on_constant_channel() {
        // T = 2, B = 1: cost e^{1/2 + d} - 1 + e^{1/2 - d} - 1 is minimized at d -> 0.
        let d = FadingDistribution::deterministic(1.0).unwrap();
        let s = optimize_delta(&d, 1.0, 2, 8, 3).unwrap();
        assert!(s.delta < 1e-3, "{}", s.delta);
        assert!(s.at_endpoint);
        let best = s.probes.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert!(s.report.mean_energy <= best + 1e-12);
        assert!((s.report.mean_energy - 2.0 * 0.5f64.exp_m1()).abs() < 1e-3);
    }
}
