//! `fadesched` command-line front end.

mod cache;
mod config;
mod output;
mod reports;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{resolve, Diagnostic, ExperimentConfig, Overrides, Report, Settings};
use output::{config_hash, emit, num, Table};
use reports::Workspace;

#[derive(Parser)]
#[command(name = "fadesched", version, about = "Energy-minimal scheduling of a packet over a fading channel with a hard deadline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML experiment config; flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Fading distribution, e.g. `truncexp:g_min=0.001,g_max=1e6`.
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_trials: Option<u64>,
    #[arg(long)]
    n_beta: Option<usize>,
    #[arg(long)]
    n_g: Option<usize>,
    #[arg(long)]
    beta_max: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct Points {
    /// Packet sizes in nats (comma-separated).
    #[arg(long = "B", value_delimiter = ',')]
    packets: Vec<f64>,
    /// Deadlines in slots (comma-separated).
    #[arg(long = "T", value_delimiter = ',')]
    horizons: Vec<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fractional moments nu_m, their geometric means and nu_inf.
    Moments {
        #[command(flatten)]
        common: Common,
        /// Largest horizon of interest (tabulates at least 64 orders).
        #[arg(long = "T")]
        horizon: Option<usize>,
    },
    /// One-shot and relaxed channel thresholds per slot.
    Thresholds {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T")]
        horizon: Option<usize>,
    },
    /// Solve the DP, store the value table in the cache and print it.
    DpSolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        points: Points,
    },
    /// Monte Carlo cost of one or more policies.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        points: Points,
        /// `equal`, `relaxed`, `oneshot`, `cerg[:delta=x]` or `optimal`.
        #[arg(long, value_delimiter = ',')]
        policy: Vec<String>,
        /// Delta for `cerg` given without one.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// DP-based scheduling gain over equal-bit, with both limits.
    Gain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        points: Points,
    },
    /// High- and low-SNR approximation parameters.
    Snr {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T", value_delimiter = ',')]
        horizons: Vec<usize>,
    },
    /// Scheduling-gain limits on the three reference supports.
    Table1 {
        #[command(flatten)]
        common: Common,
    },
    /// Check a config and list every problem without running anything.
    Validate {
        config: PathBuf,
    },
    /// Run every report listed in a config and write one CSV per report.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_trials: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<(ExperimentConfig, String)> {
    match path {
        None => Ok((ExperimentConfig::default(), String::new())),
        Some(p) => ExperimentConfig::load(p).map_err(|d| anyhow::anyhow!("{}: {d}", p.display())),
    }
}

fn overrides(common: &Common) -> Overrides {
    Overrides {
        distribution: common.dist.clone(),
        seed: common.seed,
        n_trials: common.n_trials,
        n_beta: common.n_beta,
        n_g: common.n_g,
        beta_max: common.beta_max,
        ..Overrides::default()
    }
}

fn settle(common: &Common, o: Overrides, reports: Vec<Report>, require_seed: bool) -> Result<Settings> {
    let (cfg, text) = load_config(common.config.as_deref())?;
    let (mut s, diags) = resolve(&cfg, &text, &o, require_seed);
    fail_on(&diags)?;
    s.reports = reports;
    s.seed.get_or_insert(0);
    Ok(s)
}

fn fail_on(diags: &[Diagnostic]) -> Result<()> {
    if diags.is_empty() {
        return Ok(());
    }
    for d in diags {
        eprintln!("error: {d}");
    }
    bail!("invalid configuration ({} problem{})", diags.len(), if diags.len() == 1 { "" } else { "s" })
}

fn require(s: &Settings, what: Report) -> Result<()> {
    if what != Report::Table1 && s.distribution.is_none() {
        bail!("`{what}` needs a distribution (--dist or `distribution` in the config)");
    }
    if matches!(what, Report::Costs | Report::Gain) && s.points.is_empty() {
        bail!("`{what}` needs --B and --T (or a [[sweep]] in the config)");
    }
    if what == Report::Costs && s.policies.is_empty() {
        bail!("simulate needs --policy (or `policies` in the config)");
    }
    Ok(())
}

fn single_report(common: &Common, o: Overrides, report: Report) -> Result<()> {
    let s = settle(common, o, vec![report], false)?;
    require(&s, report)?;
    let mut ws = Workspace::new(&s)?;
    let table = ws.build(report)?;
    let hash = config_hash(&format!("{report}|{s:?}"));
    emit(common.out.as_deref(), &table.render(&hash, s.seed))?;
    Ok(())
}

fn dp_solve(common: &Common, points: &Points) -> Result<()> {
    let mut o = overrides(common);
    o.packets = points.packets.clone();
    o.horizons = points.horizons.clone();
    let s = settle(common, o, Vec::new(), false)?;
    let dist = s.distribution.as_ref().context("dp-solve needs --dist")?.build()?;
    let &(_, horizon) = s.points.iter().max_by_key(|p| p.1).context("dp-solve needs --T and --B")?;
    let b_max = s.points.iter().map(|p| p.0).fold(0.0, f64::max);
    let ws = Workspace::new(&s)?;
    let grid = ws.grid_for(b_max)?;
    let table = match cache::load(&dist, horizon, &grid) {
        Some(t) => t,
        None => {
            let t = fadesched::ValueTable::solve(&dist, horizon, grid)?;
            let path = cache::store(&t, &dist)?;
            eprintln!("cached {}", path.display());
            t
        }
    };
    let mut header = vec!["beta".to_string()];
    header.extend((1..=horizon).map(|t| format!("J_{t}")));
    let mut csv = Table::new(&header);
    for i in 0..grid.n_beta {
        let mut row = vec![num(table.beta(i))];
        row.extend((1..=horizon).map(|t| num(table.row(t)[i])));
        csv.push(row);
    }
    let hash = config_hash(&format!("dp-solve|{}|{horizon}|{grid:?}", dist.id()));
    emit(common.out.as_deref(), &csv.render(&hash, None))?;
    Ok(())
}

fn validate(path: &Path) -> Result<bool> {
    let (cfg, text) = match ExperimentConfig::load(path) {
        Ok(v) => v,
        Err(d) => {
            println!("{}: {d}", path.display());
            return Ok(false);
        }
    };
    let (_, diags) = resolve(&cfg, &text, &Overrides::default(), true);
    for d in &diags {
        println!("{}: {d}", path.display());
    }
    Ok(diags.is_empty())
}

fn run(path: &Path, o: Overrides) -> Result<()> {
    let (cfg, text) = ExperimentConfig::load(path).map_err(|d| anyhow::anyhow!("{}: {d}", path.display()))?;
    let (s, diags) = resolve(&cfg, &text, &o, true);
    fail_on(&diags)?;
    if s.reports.is_empty() {
        bail!("{}: no reports requested", path.display());
    }
    let hash = config_hash(&format!("{:?}", Settings { output_dir: PathBuf::new(), ..s.clone() }));
    let mut ws = Workspace::new(&s)?;
    for &report in &s.reports {
        let table = ws.build(report).with_context(|| format!("report `{report}`"))?;
        let file = s.output_dir.join(format!("{report}.csv"));
        output::write_atomic(&file, table.render(&hash, s.seed).as_bytes())
            .with_context(|| format!("writing {}", file.display()))?;
        eprintln!("wrote {}", file.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Moments { common, horizon } => {
            let mut o = overrides(&common);
            o.horizons = horizon.into_iter().collect();
            o.packets = if o.horizons.is_empty() { Vec::new() } else { vec![0.0] };
            single_report(&common, o, Report::Moments)?;
        }
        Command::Thresholds { common, horizon } => {
            let mut o = overrides(&common);
            o.horizons = horizon.into_iter().collect();
            o.packets = if o.horizons.is_empty() { Vec::new() } else { vec![0.0] };
            single_report(&common, o, Report::Thresholds)?;
        }
        Command::DpSolve { common, points } => dp_solve(&common, &points)?,
        Command::Simulate { common, points, policy, delta } => {
            let mut o = overrides(&common);
            o.packets = points.packets;
            o.horizons = points.horizons;
            o.policies = policy;
            o.delta = delta;
            single_report(&common, o, Report::Costs)?;
        }
        Command::Gain { common, points } => {
            let mut o = overrides(&common);
            o.packets = points.packets;
            o.horizons = points.horizons;
            single_report(&common, o, Report::Gain)?;
        }
        Command::Snr { common, horizons } => {
            let mut o = overrides(&common);
            o.packets = if horizons.is_empty() { Vec::new() } else { vec![0.0] };
            o.horizons = horizons;
            single_report(&common, o, Report::Snr)?;
        }
        Command::Table1 { common } => single_report(&common, Overrides::default(), Report::Table1)?,
        Command::Validate { config } => return validate(&config),
        Command::Run { config, seed, n_trials, output_dir } => {
            run(&config, Overrides { seed, n_trials, output_dir, ..Overrides::default() })?
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
