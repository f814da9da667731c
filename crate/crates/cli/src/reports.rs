//! Report builders shared by the subcommands and `run`.

use std::collections::BTreeMap;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use fadesched::analysis::{
    equal_bit_cost, gain_limit_large_b, gain_limit_small_b, high_snr_offsets, low_snr_params, scheduling_gain,
    spectral_efficiency_dp, spectral_efficiency_equal,
};
use fadesched::dp::OptimalPolicy;
use fadesched::policies::{
    boundary_relaxed, constrained_ergodic, equal_bit, one_shot, one_shot_thresholds, relaxed_threshold,
};
use fadesched::sim::{ergodic_benchmark, one_shot_cost, optimize_delta, relaxed_cost_closed_form, simulate};
use fadesched::{
    to_db, FadingDistribution, GridConfig, MomentTable, OneShotThresholds, Policy, PolicySpec, SimulationReport,
    ValueTable,
};

use crate::cache;
use crate::config::{Report, Settings};
use crate::output::{num, Table};

/// Supports and horizons of the scheduling-gain limit table.
pub const TABLE1_SUPPORTS: [(f64, f64); 3] = [(0.1, 1e6), (0.01, 1e6), (0.001, 1e6)];
pub const TABLE1_HORIZONS: [usize; 3] = [5, 10, 50];

/// Solver state reused across reports of one invocation.
pub struct Workspace<'a> {
    pub settings: &'a Settings,
    dist: Option<FadingDistribution>,
    tables: BTreeMap<(usize, u64), Arc<ValueTable>>,
}

impl<'a> Workspace<'a> {
    pub fn new(settings: &'a Settings) -> Result<Self> {
        let dist = match &settings.distribution {
            Some(spec) => Some(spec.build().with_context(|| format!("building distribution `{spec}`"))?),
            None => None,
        };
        Ok(Self { settings, dist, tables: BTreeMap::new() })
    }

    pub fn dist(&self) -> Result<&FadingDistribution> {
        self.dist.as_ref().context("no distribution given (use --dist or `distribution` in the config)")
    }

    fn seed(&self) -> u64 {
        self.settings.seed.unwrap_or_default()
    }

    /// Grid for a packet of `packet` nats: the configured `beta_max` if any,
    /// else the default margin over the packet.
    pub fn grid_for(&self, packet: f64) -> Result<GridConfig> {
        let s = self.settings;
        let base = match s.beta_max {
            Some(beta_max) => GridConfig { beta_max, n_beta: s.n_beta, n_g: s.n_g },
            None => GridConfig::for_packet(packet)?.with_resolution(s.n_beta, s.n_g),
        };
        base.validate()?;
        Ok(base)
    }

    pub fn table(&mut self, horizon: usize, packet: f64) -> Result<Arc<ValueTable>> {
        let grid = self.grid_for(packet)?;
        let key = (horizon, grid.beta_max.to_bits());
        if let Some(t) = self.tables.get(&key) {
            return Ok(Arc::clone(t));
        }
        let t = Arc::new(cache::table(self.dist()?, horizon, grid)?);
        self.tables.insert(key, Arc::clone(&t));
        Ok(t)
    }

    fn thresholds(&self, horizon: usize) -> Result<OneShotThresholds> {
        Ok(one_shot_thresholds(self.dist()?, horizon)?)
    }

    fn moments(&self, order: usize) -> Result<MomentTable> {
        Ok(MomentTable::new(self.dist()?, order.max(1))?)
    }

    pub fn build(&mut self, report: Report) -> Result<Table> {
        match report {
            Report::Costs => self.costs(),
            Report::Reference => self.reference(),
            Report::Gain => self.gain(),
            Report::Snr => self.snr(),
            Report::Spectral => self.spectral(),
            Report::PolicySlices => self.policy_slices(),
            Report::OneShotRatio => self.one_shot_ratio(),
            Report::Table1 => table1(),
            Report::Moments => self.moments_report(),
            Report::Thresholds => self.thresholds_report(),
        }
    }

    /// Simulates one policy; `cerg` without delta runs the line search first.
    pub fn simulate_policy(&mut self, spec: PolicySpec, packet: f64, horizon: usize) -> Result<SimulationReport> {
        let (n, seed) = (self.settings.n_trials, self.seed());
        let dist = self.dist()?.clone();
        let report = match spec {
            PolicySpec::Equal => simulate(&dist, &equal_bit(packet, horizon)?, packet, horizon, n, seed)?,
            PolicySpec::Relaxed => {
                let m = MomentTable::for_horizon(&dist, horizon)?;
                simulate(&dist, &boundary_relaxed(&m), packet, horizon, n, seed)?
            }
            PolicySpec::OneShot => {
                let p = one_shot(&one_shot_thresholds(&dist, horizon)?, packet)?;
                simulate(&dist, &p, packet, horizon, n, seed)?
            }
            PolicySpec::ConstrainedErgodic { delta } => match delta.or(self.settings.delta) {
                Some(d) => simulate(&dist, &constrained_ergodic(&dist, packet, horizon, d)?, packet, horizon, n, seed)?,
                None => {
                    let s = optimize_delta(&dist, packet, horizon, n, seed)?;
                    if s.at_endpoint {
                        eprintln!(
                            "warning: delta search for B = {packet}, T = {horizon} ended on the bracket edge ({})",
                            s.delta
                        );
                    }
                    s.report
                }
            },
            PolicySpec::Optimal => {
                let table = self.table(horizon, packet)?;
                simulate(&dist, &OptimalPolicy::new(table), packet, horizon, n, seed)?
            }
        };
        Ok(report)
    }

    fn costs(&mut self) -> Result<Table> {
        let header: Vec<&str> = SimulationReport::CSV_HEADER.split(',').collect();
        let mut t = Table::new(&header);
        let points = self.settings.points.clone();
        let policies = self.settings.policies.clone();
        for (b, horizon) in points {
            for &spec in &policies {
                let r = self
                    .simulate_policy(spec, b, horizon)
                    .with_context(|| format!("simulating `{spec}` at B = {b}, T = {horizon}"))?;
                t.push(r.csv_row().split(',').map(str::to_string).collect());
            }
        }
        Ok(t)
    }

    fn reference(&mut self) -> Result<Table> {
        let mut t = Table::new(&["B", "T", "equal_bit", "relaxed_bound", "one_shot", "optimal_dp", "ergodic_bound"]);
        let nu1 = self.dist()?.mean_inverse()?;
        for (b, horizon) in self.settings.points.clone() {
            let m = self.moments(horizon)?;
            let opt = self.table(horizon, b)?.value(horizon, b)?;
            let erg = if b > 0.0 { horizon as f64 * ergodic_benchmark(self.dist()?, b / horizon as f64)? } else { 0.0 };
            t.push(vec![
                num(b),
                horizon.to_string(),
                num(equal_bit_cost(nu1, b, horizon)),
                num(relaxed_cost_closed_form(&m, b, horizon)?),
                num(one_shot_cost(self.dist()?, b, horizon)?),
                num(opt),
                num(erg),
            ]);
        }
        Ok(t)
    }

    fn gain(&mut self) -> Result<Table> {
        let mut t = Table::new(&["T", "B", "gain_db", "limit_small_b_db", "limit_large_b_db"]);
        for horizon in self.settings.horizons() {
            let m = self.moments(horizon)?;
            let small = gain_limit_small_b(&m, &self.thresholds(horizon)?, horizon);
            let large = gain_limit_large_b(&m, horizon);
            for b in self.settings.packets_for(horizon) {
                let cost = self.table(horizon, b)?.value(horizon, b)?;
                let gain = scheduling_gain(self.dist()?, b, horizon, cost)
                    .with_context(|| format!("gain at B = {b}, T = {horizon}"))?;
                t.push(vec![horizon.to_string(), num(b), num(gain), num(small), num(large)]);
            }
        }
        Ok(t)
    }

    fn snr(&mut self) -> Result<Table> {
        let mut t = Table::new(&[
            "T",
            "S_inf",
            "L_equal",
            "L_opt",
            "L_erg",
            "S0_equal",
            "EbN0_min_equal",
            "EbN0_min_equal_db",
            "S0_opt",
            "EbN0_min_opt",
            "EbN0_min_opt_db",
            "S0_erg",
            "EbN0_min_erg",
        ]);
        for horizon in self.settings.horizons() {
            let m = self.moments(horizon)?;
            let hi = high_snr_offsets(&m, horizon);
            let lo = low_snr_params(&m, &self.thresholds(horizon)?, horizon);
            t.push(vec![
                horizon.to_string(),
                num(hi.s_inf),
                num(hi.l_equal),
                num(hi.l_opt),
                num(hi.l_erg),
                num(lo.s0_equal),
                num(lo.ebn0_min_equal),
                num(to_db(lo.ebn0_min_equal)),
                num(lo.s0_opt),
                num(lo.ebn0_min_opt),
                num(to_db(lo.ebn0_min_opt)),
                num(lo.s0_erg),
                num(lo.ebn0_min_erg),
            ]);
        }
        Ok(t)
    }

    fn spectral(&mut self) -> Result<Table> {
        let mut t = Table::new(&["T", "P", "P_db", "R_equal", "R_opt", "affine_equal", "affine_opt", "affine_erg"]);
        let powers = self.settings.powers.clone();
        let p_max = powers.iter().copied().fold(0.0, f64::max);
        for horizon in self.settings.horizons() {
            let m = self.moments(horizon)?;
            let off = high_snr_offsets(&m, horizon);
            // The relaxed bound never exceeds the optimal cost, so inverting it
            // bounds the packet the optimal curve can need.
            let tf = horizon as f64;
            let b_hi = (tf * ((p_max + m.nu(1)) / m.geometric_mean(horizon)).ln()).max(1e-3);
            let table = self.table(horizon, b_hi)?;
            let opt = spectral_efficiency_dp(&table, &powers)?;
            let eq = spectral_efficiency_equal(m.nu(1), &powers);
            for ((p, r_opt), (_, r_eq)) in opt.into_iter().zip(eq) {
                let p_db = if p > 0.0 { num(to_db(p)) } else { "-inf".into() };
                let affine = |l: f64| if p > 0.0 { num(p.ln() - l) } else { String::new() };
                t.push(vec![
                    horizon.to_string(),
                    num(p),
                    p_db,
                    num(r_eq),
                    num(r_opt),
                    affine(off.l_equal),
                    affine(off.l_opt),
                    affine(off.l_erg),
                ]);
            }
        }
        Ok(t)
    }

    fn policy_slices(&mut self) -> Result<Table> {
        let mut t = Table::new(&["T", "beta", "g", "optimal", "relaxed", "one_shot", "equal_bit"]);
        for horizon in self.settings.horizons().into_iter().filter(|&h| h >= 2) {
            let b_max = self.settings.packets_for(horizon).into_iter().fold(0.0, f64::max);
            let beta = self.settings.slice_queue.unwrap_or(b_max);
            if beta > b_max {
                bail!("slice_queue = {beta} exceeds the largest packet {b_max} for T = {horizon}");
            }
            let table = self.table(horizon, b_max)?;
            let dist = self.dist()?;
            let relaxed = boundary_relaxed(&MomentTable::for_horizon(dist, horizon)?);
            let oneshot = one_shot(&one_shot_thresholds(dist, horizon)?, b_max)?;
            let equal = equal_bit(beta, horizon)?;
            for (g, _) in dist.probability_nodes(self.settings.n_g) {
                t.push(vec![
                    horizon.to_string(),
                    num(beta),
                    num(g),
                    num(table.allocate(horizon, beta, g)?),
                    num(relaxed.allocate(horizon, beta, g)?),
                    num(oneshot.allocate(horizon, beta, g)?),
                    num(equal.allocate(horizon, beta, g)?),
                ]);
            }
        }
        Ok(t)
    }

    fn one_shot_ratio(&mut self) -> Result<Table> {
        let mut t = Table::new(&["B", "T", "one_shot", "optimal_dp", "ratio_db"]);
        for (b, horizon) in self.settings.points.clone() {
            let one = one_shot_cost(self.dist()?, b, horizon)?;
            let opt = self.table(horizon, b)?.value(horizon, b)?;
            let ratio = if opt > 0.0 { num(to_db(one / opt)) } else { String::new() };
            t.push(vec![num(b), horizon.to_string(), num(one), num(opt), ratio]);
        }
        Ok(t)
    }

    fn moments_report(&mut self) -> Result<Table> {
        let order = self.settings.horizons().last().copied().map_or(64, MomentTable::default_order);
        let m = self.moments(order)?;
        let mut t = Table::new(&["m", "nu", "geometric_mean"]);
        for k in 1..=m.max_order() {
            t.push(vec![k.to_string(), num(m.nu(k)), num(m.geometric_mean(k))]);
        }
        t.push(vec!["inf".into(), num(m.nu_inf()), num(m.nu_inf())]);
        Ok(t)
    }

    fn thresholds_report(&mut self) -> Result<Table> {
        let horizon = self.settings.horizons().last().copied().unwrap_or(10);
        let om = self.thresholds(horizon)?;
        let m = self.moments(horizon)?;
        let mut t = Table::new(&["t", "omega", "one_shot_threshold", "relaxed_threshold"]);
        for s in 1..=horizon + 1 {
            let relaxed = if s >= 2 && s - 1 <= m.max_order() {
                num(relaxed_threshold(&m, s)?)
            } else {
                String::new()
            };
            t.push(vec![s.to_string(), num(om.omega(s)), num(om.channel_threshold(s)), relaxed]);
        }
        Ok(t)
    }
}

/// Large- and small-packet gain limits on the reference supports.
pub fn table1() -> Result<Table> {
    let mut t = Table::new(&["g_min", "g_max", "T", "limit_large_b_db", "limit_small_b_db"]);
    let t_max = TABLE1_HORIZONS.into_iter().max().unwrap_or(1);
    for (g_min, g_max) in TABLE1_SUPPORTS {
        let d = FadingDistribution::truncated_exponential(g_min, g_max)?;
        let m = MomentTable::new(&d, t_max)?;
        let om = one_shot_thresholds(&d, t_max)?;
        for h in TABLE1_HORIZONS {
            t.push(vec![
                num(g_min),
                num(g_max),
                h.to_string(),
                num(gain_limit_large_b(&m, h)),
                num(gain_limit_small_b(&m, &om, h)),
            ]);
        }
    }
    Ok(t)
}
