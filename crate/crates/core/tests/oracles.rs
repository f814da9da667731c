//! Cross-checks against independent oracles: brute-force Riemann sums,
//! exhaustive split search, and reference values from an external
//! arbitrary-precision computation.

use fadesched::analysis::{high_snr_offsets, low_snr_params};
use fadesched::policies::{boundary_relaxed, constrained_ergodic, equal_bit, one_shot, one_shot_thresholds, waterfill_threshold};
use fadesched::sim::{ergodic_benchmark, optimize_delta, relaxed_cost_closed_form, simulate};
use fadesched::{FadingDistribution, GridConfig, MomentTable, Policy, ValueTable};

/// Midpoint rule in `u = log g` over the truncated exponential, cut where
/// the density falls below `e^-60`.
struct Riemann {
    g: Vec<f64>,
    w: Vec<f64>,
}

impl Riemann {
    fn truncexp(g_min: f64, n: usize) -> Self {
        let hi = g_min + 60.0;
        let (a, b) = (g_min.ln(), hi.ln());
        let du = (b - a) / n as f64;
        let c = 1.0 / (1.0 - (-(1e6 - g_min)).exp());
        let mut g = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for k in 0..n {
            let x = (a + (k as f64 + 0.5) * du).exp();
            g.push(x);
            w.push(c * (-(x - g_min)).exp() * x * du);
        }
        Self { g, w }
    }

    fn mean<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        self.g.iter().zip(&self.w).map(|(&g, &w)| h(g) * w).sum()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn moments_match_riemann_sums() {
    for g_min in [0.1, 0.01, 0.001] {
        let d = FadingDistribution::truncated_exponential(g_min, 1e6).unwrap();
        let r = Riemann::truncexp(g_min, 10_000_000);
        for m in [1usize, 2, 5, 17] {
            let p = 1.0 / m as f64;
            let oracle = r.mean(|g| g.powf(-p)).powi(m as i32);
            let got = d.fractional_moment(m).unwrap();
            assert!(rel(got, oracle) < 1e-7, "g_min={g_min} m={m}: {got} vs {oracle}");
        }
        let nu_inf = r.mean(|g| -g.ln()).exp();
        assert!(rel(d.nu_infinity().unwrap(), nu_inf) < 1e-7);
    }
}

#[test]
fn moments_match_reference_values() {
    for (g_min, nu1, nu_inf) in [(0.1, 2.01464, 1.33368), (0.01, 4.07851, 1.693265), (0.001, 6.337874, 1.768057)] {
        let d = FadingDistribution::truncated_exponential(g_min, 1e6).unwrap();
        assert!(rel(d.mean_inverse().unwrap(), nu1) < 5e-6);
        assert!(rel(d.nu_infinity().unwrap(), nu_inf) < 5e-6);
    }
}

#[test]
fn one_shot_recursion_matches_riemann_sums() {
    let g_min = 0.001;
    let d = FadingDistribution::truncated_exponential(g_min, 1e6).unwrap();
    let r = Riemann::truncexp(g_min, 10_000_000);
    let om = one_shot_thresholds(&d, 8).unwrap();
    let mut prev = r.mean(|g| 1.0 / g);
    assert!(rel(om.omega(2), prev) < 1e-7);
    for t in 3..=9 {
        prev = r.mean(|g| (1.0 / g).min(prev));
        assert!(rel(om.omega(t), prev) < 1e-6, "t={t}: {} vs {prev}", om.omega(t));
    }
}

#[test]
fn waterfilling_matches_riemann_sums() {
    let g_min = 0.001;
    let d = FadingDistribution::truncated_exponential(g_min, 1e6).unwrap();
    let r = Riemann::truncexp(g_min, 10_000_000);
    let rate = |eta: f64| r.mean(|g| (g / eta).ln().max(0.0));
    let (mut lo, mut hi) = (g_min.ln(), 60f64.ln());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if rate(mid.exp()) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta = (0.5 * (lo + hi)).exp();
    let energy = r.mean(|g| (1.0 / eta - 1.0 / g).max(0.0));

    let s = waterfill_threshold(&d, 1.0).unwrap();
    assert!(rel(s.eta, eta) < 1e-6, "{} vs {eta}", s.eta);
    assert!(rel(s.eta, 0.265082) < 5e-6);
    let e = ergodic_benchmark(&d, 1.0).unwrap();
    assert!(rel(e, energy) < 1e-6);
    assert!(rel(e, 1.896878) < 5e-6);
}

#[test]
fn constant_channel_dp_matches_split_search() {
    let d = FadingDistribution::deterministic(1.0).unwrap();
    let table = ValueTable::solve(&d, 3, GridConfig::for_packet(10.0).unwrap()).unwrap();
    for beta in [1.0f64, 5.0, 10.0] {
        // exhaustive search over (b_3, b_2) with b_1 = beta - b_3 - b_2
        let n = 2000;
        let step = beta / n as f64;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let (b3, b2) = (i as f64 * step, j as f64 * step);
                let b1 = (beta - b3 - b2).max(0.0);
                best = best.min(b3.exp_m1() + b2.exp_m1() + b1.exp_m1());
            }
        }
        let dp = table.value(3, beta).unwrap();
        assert!(rel(dp, best) < 1e-3, "beta={beta}: dp {dp} vs search {best}");
        assert!(rel(dp, 3.0 * (beta / 3.0).exp_m1()) < 1e-3);
    }
    assert!((table.allocate(3, 6.0, 1.0).unwrap() - 2.0).abs() < 1e-3);
}

#[test]
fn first_row_slope_is_analytic() {
    let d = FadingDistribution::truncated_exponential(0.01, 1e6).unwrap();
    let nu1 = d.mean_inverse().unwrap();
    let grid = GridConfig { beta_max: 4.0, n_beta: 512, n_g: 16 };
    let table = ValueTable::solve(&d, 1, grid).unwrap();
    let h = grid.spacing();
    for i in 0..grid.n_beta {
        let b = table.beta(i);
        let got = table.derivative(1, b).unwrap();
        // one-sided second-order truncation error at the ends, h^2 f'''/3
        let bound = nu1 * h * h * (b + 2.0 * h).exp() / 3.0;
        assert!((got - b.exp() * nu1).abs() <= bound, "beta={b}");
    }
}

#[test]
fn slope_at_zero_approaches_one_shot_threshold() {
    let d = FadingDistribution::truncated_exponential(0.01, 1e6).unwrap();
    let om = one_shot_thresholds(&d, 3).unwrap();
    let mut errors = Vec::new();
    for n_beta in [128, 512, 2048] {
        let table = ValueTable::solve(&d, 2, GridConfig { beta_max: 1.0, n_beta, n_g: 512 }).unwrap();
        errors.push(rel(table.derivative(2, 0.0).unwrap(), om.omega(3)));
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[2] < 1e-2, "{errors:?}");
}

#[test]
fn optimal_cost_lower_bounds_every_policy() {
    let d = FadingDistribution::truncated_exponential(0.01, 1e6).unwrap();
    let (b, t) = (3.0, 3usize);
    let table = ValueTable::solve(&d, t, GridConfig::for_packet(b).unwrap()).unwrap();
    let opt = table.value(t, b).unwrap();
    let m = MomentTable::new(&d, t).unwrap();
    let om = one_shot_thresholds(&d, t).unwrap();
    let policies: Vec<Box<dyn Policy>> = vec![
        Box::new(equal_bit(b, t).unwrap()),
        Box::new(boundary_relaxed(&m)),
        Box::new(one_shot(&om, b).unwrap()),
        Box::new(constrained_ergodic(&d, b, t, 0.3).unwrap()),
    ];
    for p in &policies {
        let r = simulate(&d, p.as_ref(), b, t, 200_000, 21).unwrap();
        assert!(opt <= r.mean_energy + 3.0 * r.std_error, "{}: {} < {opt}", p.name(), r.mean_energy);
    }
    assert!(relaxed_cost_closed_form(&m, b, t).unwrap() <= opt);
}

#[test]
fn ergodic_benchmark_lower_bounds_optimal_per_slot_cost() {
    let d = FadingDistribution::truncated_exponential(0.001, 1e6).unwrap();
    let e = ergodic_benchmark(&d, 1.0).unwrap();
    for t in [2usize, 3, 5] {
        let b = t as f64;
        let table = ValueTable::solve(&d, t, GridConfig::for_packet(b).unwrap()).unwrap();
        assert!(e <= table.value(t, b).unwrap() / t as f64);
    }
}

#[test]
fn grid_refinement_changes_cost_little() {
    let d = FadingDistribution::truncated_exponential(0.001, 1e6).unwrap();
    let (b, t) = (10.0, 5usize);
    let fine = GridConfig::for_packet(b).unwrap();
    let coarse = fine.with_resolution(fine.n_beta / 2, fine.n_g / 2);
    let j_fine = ValueTable::solve(&d, t, fine).unwrap().value(t, b).unwrap();
    let j_coarse = ValueTable::solve(&d, t, coarse).unwrap().value(t, b).unwrap();
    assert!(rel(j_coarse, j_fine) < 5e-3, "{j_coarse} vs {j_fine}");
}

#[test]
fn relaxed_policy_converges_to_optimal_with_queue() {
    let d = FadingDistribution::truncated_exponential(0.001, 1e6).unwrap();
    let t = 3usize;
    let table = ValueTable::solve(&d, t, GridConfig::for_packet(40.0).unwrap()).unwrap();
    let relaxed = boundary_relaxed(&MomentTable::new(&d, t).unwrap());
    let nodes = d.probability_nodes(512);
    let gaps: Vec<f64> = [5.0, 10.0, 20.0, 40.0]
        .iter()
        .map(|&beta| {
            nodes
                .iter()
                .map(|&(g, _)| (relaxed.allocate(t, beta, g).unwrap() - table.allocate(t, beta, g).unwrap()).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    // the gap shrinks until it hits the grid's own resolution
    let floor = 1e-4;
    assert!(gaps.windows(2).all(|w| w[1] < w[0] || w[1] < floor), "{gaps:?}");
    assert!(gaps[3] < floor, "{gaps:?}");
}

#[test]
fn scheduler_regions_at_long_deadline() {
    let d = FadingDistribution::truncated_exponential(0.001, 1e6).unwrap();
    let t = 50usize;
    let m = MomentTable::new(&d, t).unwrap();
    let om = one_shot_thresholds(&d, t).unwrap();
    let cost = |b: f64| {
        let n = 20_000;
        let one = simulate(&d, &one_shot(&om, b).unwrap(), b, t, n, 31).unwrap().mean_energy;
        let rel = simulate(&d, &boundary_relaxed(&m), b, t, n, 31).unwrap().mean_energy;
        let erg = optimize_delta(&d, b, t, n, 31).unwrap().report.mean_energy;
        (one, rel, erg)
    };
    let (one, rel, erg) = cost(0.1);
    assert!(one < rel && one < erg, "B=0.1: {one} {rel} {erg}");
    let (one, rel, erg) = cost(5.0);
    assert!(erg < rel && erg < one, "B=5: {one} {rel} {erg}");
    let (one, rel, erg) = cost(50.0);
    assert!(rel < erg && rel < one, "B=50: {one} {rel} {erg}");
}

#[test]
fn snr_offsets_order_and_converge() {
    let d = FadingDistribution::truncated_exponential(0.001, 1e6).unwrap();
    let m = MomentTable::new(&d, 200).unwrap();
    let mut last = f64::INFINITY;
    for t in [1usize, 2, 5, 10, 50, 200] {
        let o = high_snr_offsets(&m, t);
        assert!(o.l_equal >= o.l_opt && o.l_opt >= o.l_erg);
        assert!(o.l_opt <= last);
        last = o.l_opt;
    }
    let o = high_snr_offsets(&m, 200);
    assert!(o.l_opt - o.l_erg < 0.05 * (o.l_equal - o.l_erg));

    let om = one_shot_thresholds(&d, 10).unwrap();
    let lo = low_snr_params(&m, &om, 10);
    assert!(lo.ebn0_min_opt <= lo.ebn0_min_equal);
    assert_eq!(lo.s0_opt, 0.2);
    assert_eq!((lo.s0_erg, lo.ebn0_min_erg), (0.0, 0.0));
}
