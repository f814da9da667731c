//! Acceptance criteria, one test per criterion. Each prints a single
//! `PASS`/`FAIL` line with the measured numbers before asserting.

use std::fs;
use std::path::Path;
use std::process::Command;

use fadesched::analysis::{
    gain_limit_large_b, gain_limit_small_b, high_snr_offsets, scheduling_gain, spectral_efficiency_dp,
};
use fadesched::policies::{boundary_relaxed, equal_bit, ergodic_rate, one_shot, one_shot_thresholds, waterfill_threshold};
use fadesched::sim::{ergodic_benchmark, one_shot_cost, optimize_delta, relaxed_cost_closed_form, simulate};
use fadesched::{to_db, FadingDistribution, GridConfig, MomentTable, Policy, ValueTable};

fn reference() -> FadingDistribution {
    FadingDistribution::truncated_exponential(0.001, 1e6).unwrap()
}

fn verdict(n: u32, name: &str, ok: bool, detail: String) {
    println!("criterion {n:>2} {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

fn optimal_cost(d: &FadingDistribution, packet: f64, horizon: usize) -> f64 {
    let table = ValueTable::solve(d, horizon, GridConfig::for_packet(packet).unwrap()).unwrap();
    table.value(horizon, packet).unwrap()
}

#[test]
fn criterion_01_gain_limit_table() {
    let expected = [
        (0.1, [(5, 0.97, 4.42), (10, 1.26, 5.98), (50, 1.63, 8.59)]),
        (0.01, [(5, 2.19, 6.72), (10, 2.80, 8.63), (50, 3.52, 11.51)]),
        (0.001, [(5, 3.38, 8.38), (10, 4.22, 10.44), (50, 5.17, 13.40)]),
    ];
    let mut worst: f64 = 0.0;
    for (g_min, cells) in expected {
        let d = FadingDistribution::truncated_exponential(g_min, 1e6).unwrap();
        let m = MomentTable::new(&d, 50).unwrap();
        let om = one_shot_thresholds(&d, 50).unwrap();
        for (t, large, small) in cells {
            worst = worst
                .max((gain_limit_large_b(&m, t) - large).abs())
                .max((gain_limit_small_b(&m, &om, t) - small).abs());
        }
    }
    verdict(1, "gain limit table", worst <= 0.05, format!("max deviation {worst:.4} dB, tolerance 0.05 dB"));
}

#[test]
fn criterion_02_two_slot_optimum_is_relaxed() {
    let d = reference();
    let table = ValueTable::solve(&d, 2, GridConfig::for_packet(10.0).unwrap()).unwrap();
    let relaxed = boundary_relaxed(&MomentTable::new(&d, 2).unwrap());
    let mut worst: f64 = 0.0;
    for i in 1..=50 {
        let beta = 10.0 * i as f64 / 50.0;
        for j in 0..50 {
            let g = 10f64.powf(-3.0 + 5.0 * j as f64 / 49.0);
            let a = table.allocate(2, beta, g).unwrap();
            let b = relaxed.allocate(2, beta, g).unwrap();
            worst = worst.max((a - b).abs());
        }
    }
    verdict(2, "T=2 exactness", worst < 1e-3, format!("max |b_opt - b_relax| = {worst:.2e} nats over 50x50"));
}

#[test]
fn criterion_03_small_packet_one_shot_convergence() {
    let d = reference();
    let mut ok = true;
    let mut detail = Vec::new();
    for t in [2, 3] {
        let gaps: Vec<f64> = [0.01, 1.0, 3.0]
            .iter()
            .map(|&b| to_db(one_shot_cost(&d, b, t).unwrap() / optimal_cost(&d, b, t)))
            .collect();
        ok &= gaps[0] < 0.1 && gaps[0] < gaps[1] && gaps[1] < gaps[2];
        detail.push(format!("T={t}: {:.4}/{:.4}/{:.4} dB", gaps[0], gaps[1], gaps[2]));
    }
    verdict(3, "small-B convergence", ok, format!("gap at B=0.01/1/3: {}", detail.join(", ")));
}

#[test]
fn criterion_04_large_packet_relaxed_cost() {
    let d = reference();
    let m = MomentTable::new(&d, 3).unwrap();
    let exact = relaxed_cost_closed_form(&m, 50.0, 3).unwrap();
    let r = simulate(&d, &boundary_relaxed(&m), 50.0, 3, 1_000_000, 4).unwrap();
    let gap = (r.mean_energy - exact) / exact;
    let slack = 3.0 * r.std_error / exact;
    verdict(
        4,
        "large-B convergence",
        gap < 1e-3 + slack,
        format!("relative gap {gap:.3e}, 3-sigma slack {slack:.3e}, threshold 1e-3 + slack"),
    );
}

#[test]
fn criterion_05_constrained_ergodic_convergence() {
    let d = reference();
    let bench = ergodic_benchmark(&d, 1.0).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (t, limit) in [(50usize, 1.10), (200, 1.05)] {
        let s = optimize_delta(&d, t as f64, t, 100_000, 5).unwrap();
        let ratio = s.report.per_slot_energy / bench;
        ok &= ratio <= limit;
        detail.push(format!("T={t}: delta*={:.3} per-slot {:.4} ratio {ratio:.3} (limit {limit})", s.delta, s.report.per_slot_energy));
    }
    verdict(5, "ergodic convergence", ok, format!("E_erg(1) = {bench:.4}; {}", detail.join("; ")));
}

#[test]
fn criterion_06_optimal_policy_monotonicity() {
    let d = reference();
    let tol = 1e-6;
    let mut violations = 0usize;
    let mut checks = 0usize;
    for horizon in [3usize, 5] {
        let table = ValueTable::solve(&d, horizon, GridConfig::for_packet(10.0).unwrap()).unwrap();
        let gains: Vec<f64> = d.probability_nodes(512).into_iter().step_by(8).map(|n| n.0).collect();
        let betas: Vec<f64> = (0..=200).map(|i| 10.0 * i as f64 / 200.0).collect();
        for t in 2..=horizon {
            let grid: Vec<Vec<f64>> = gains
                .iter()
                .map(|&g| betas.iter().map(|&b| table.allocate(t, b, g).unwrap()).collect())
                .collect();
            for (gi, row) in grid.iter().enumerate() {
                for i in 1..betas.len() {
                    checks += 2;
                    violations += usize::from(row[i] < row[i - 1] - tol);
                    violations += usize::from(betas[i] - row[i] < betas[i - 1] - row[i - 1] - tol);
                }
                if gi > 0 {
                    for i in 0..betas.len() {
                        checks += 1;
                        violations += usize::from(row[i] < grid[gi - 1][i] - tol);
                    }
                }
            }
        }
    }
    verdict(6, "policy monotonicity", violations == 0, format!("{violations} violations in {checks} checks"));
}

#[test]
fn criterion_07_closed_form_cross_checks() {
    let d = reference();
    let nu1 = d.mean_inverse().unwrap();
    let (b, t) = (5.0, 5usize);
    let eq = simulate(&d, &equal_bit(b, t).unwrap(), b, t, 1_000_000, 7).unwrap();
    let eq_exact = t as f64 * (b / t as f64).exp_m1() * nu1;
    let eq_z = (eq.mean_energy - eq_exact) / eq.std_error;

    let om = one_shot_thresholds(&d, 5).unwrap();
    let os = simulate(&d, &one_shot(&om, 1.0).unwrap(), 1.0, 5, 1_000_000, 8).unwrap();
    let os_exact = one_shot_cost(&d, 1.0, 5).unwrap();
    let os_z = (os.mean_energy - os_exact) / os.std_error;

    let residual = [0.1, 1.0, 5.0]
        .iter()
        .map(|&r| (ergodic_rate(&d, waterfill_threshold(&d, r).unwrap().eta).unwrap() - r).abs())
        .fold(0.0, f64::max);
    verdict(
        7,
        "closed-form cross-checks",
        eq_z.abs() <= 3.0 && os_z.abs() <= 3.0 && residual < 1e-8,
        format!("equal-bit z = {eq_z:.2}, one-shot z = {os_z:.2}, waterfilling residual {residual:.1e}"),
    );
}

#[test]
fn criterion_08_gain_monotone_between_limits() {
    let d = reference();
    let m = MomentTable::new(&d, 5).unwrap();
    let om = one_shot_thresholds(&d, 5).unwrap();
    let (large, small) = (gain_limit_large_b(&m, 5), gain_limit_small_b(&m, &om, 5));
    let slack = 0.05;
    let gains: Vec<f64> = [0.01, 0.1, 1.0, 10.0, 50.0]
        .iter()
        .map(|&b| scheduling_gain(&d, b, 5, optimal_cost(&d, b, 5)).unwrap())
        .collect();
    let monotone = gains.windows(2).all(|w| w[1] <= w[0] + slack);
    let inside = gains.iter().all(|&g| g >= large - slack && g <= small + slack);
    let shown: Vec<String> = gains.iter().map(|g| format!("{g:.3}")).collect();
    verdict(
        8,
        "gain monotonicity",
        monotone && inside,
        format!("gains [{}] dB, limits [{large:.3}, {small:.3}] dB", shown.join(", ")),
    );
}

#[test]
fn criterion_09_high_snr_affine_rate() {
    let d = reference();
    let t = 5usize;
    let p = 100.0;
    let m = MomentTable::new(&d, t).unwrap();
    let off = high_snr_offsets(&m, t);
    let b_hi = t as f64 * ((p + m.nu(1)) / m.geometric_mean(t)).ln();
    let table = ValueTable::solve(&d, t, GridConfig::for_packet(b_hi).unwrap()).unwrap();
    let rate = spectral_efficiency_dp(&table, &[p]).unwrap()[0].1;
    let affine = p.ln() - off.l_opt;
    let err = (rate - affine).abs();
    verdict(
        9,
        "high-SNR affine accuracy",
        err < 0.05,
        format!("R_opt = {rate:.4}, log P - L_opt = {affine:.4}, |diff| = {err:.4} nats (limit 0.05)"),
    );
}

#[test]
fn criterion_10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        r#"distribution = "truncexp:g_min=0.01,g_max=1e6"
seed = 11
n_trials = 20000
policies = ["equal", "relaxed", "oneshot", "cerg:delta=0.2", "optimal"]
reports = ["costs", "reference", "gain", "snr", "oneshot-ratio", "table1", "moments", "thresholds"]

[grid]
n_beta = 256
n_g = 64

[[sweep]]
T = [3]
B = [1.0, 4.0]
"#,
    )
    .unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_fadesched"))
            .args(["run", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()])
            .env("FADESCHED_CACHE_DIR", dir.path().join("cache"))
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a", "1");
    let b = run("b", "3");
    let mut files: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    let identical = files
        .iter()
        .all(|f| fs::read(a.join(f)).unwrap() == fs::read(Path::new(&b).join(f)).unwrap());
    verdict(
        10,
        "determinism",
        identical && files.len() == 8,
        format!("{} CSV files compared byte-for-byte across 1 and 3 worker threads", files.len()),
    );
}
