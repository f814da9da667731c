//! Experiment config files and their validation.
//!
//! A config is a TOML document. Every key can also be given as a flag; flags
//! win. Validation collects every problem it finds instead of stopping at
//! the first one, and points at the offending line where it can.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fadesched::dp::{DEFAULT_N_BETA, DEFAULT_N_G, MIN_N_BETA};
use fadesched::{DistributionSpec, PolicySpec};
use serde::Deserialize;
use toml::Spanned;

pub const DEFAULT_N_TRIALS: u64 = 100_000;
pub const DEFAULT_OUTPUT_DIR: &str = "results";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distribution: Option<Spanned<String>>,
    pub seed: Option<u64>,
    pub n_trials: Option<Spanned<u64>>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub policies: Vec<Spanned<String>>,
    /// Fixed delta for every `cerg` policy given without one.
    pub delta: Option<Spanned<f64>>,
    /// Average rate for the ergodic lower benchmark.
    pub benchmark_rate: Option<Spanned<f64>>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub sweep: Vec<Spanned<Sweep>>,
    #[serde(default)]
    pub reports: Vec<Spanned<String>>,
    #[serde(default)]
    pub powers: Vec<f64>,
    /// Queue level for the policy-slices report.
    pub slice_queue: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub beta_max: Option<Spanned<f64>>,
    pub n_beta: Option<Spanned<usize>>,
    pub n_g: Option<Spanned<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(rename = "T")]
    pub horizons: Spanned<Vec<i64>>,
    #[serde(rename = "B")]
    pub packets: Spanned<Axis>,
}

/// Either an explicit list or `{ from, to, count, scale = "lin" | "log" }`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<f64>),
    Range {
        from: f64,
        to: f64,
        count: usize,
        #[serde(default)]
        scale: Scale,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Lin,
    Log,
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        match self {
            Self::List(v) if v.is_empty() => Err("B list is empty".into()),
            Self::List(v) => Ok(v.clone()),
            Self::Range { count: 0, .. } => Err("B range needs count >= 1".into()),
            Self::Range { from, to, count, scale } => {
                if *scale == Scale::Log && !(*from > 0.0 && *to > 0.0) {
                    return Err("log-spaced B range needs from > 0 and to > 0".into());
                }
                let n = *count;
                Ok((0..n)
                    .map(|i| {
                        let s = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                        match scale {
                            Scale::Lin => from + s * (to - from),
                            Scale::Log => (from.ln() + s * (to.ln() - from.ln())).exp(),
                        }
                    })
                    .collect())
            }
        }
    }
}

/// Named outputs of the `run` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Report {
    Costs,
    Reference,
    Gain,
    Snr,
    Spectral,
    PolicySlices,
    OneShotRatio,
    Table1,
    Moments,
    Thresholds,
}

impl Report {
    pub const ALL: [Report; 10] = [
        Self::Costs,
        Self::Reference,
        Self::Gain,
        Self::Snr,
        Self::Spectral,
        Self::PolicySlices,
        Self::OneShotRatio,
        Self::Table1,
        Self::Moments,
        Self::Thresholds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Costs => "costs",
            Self::Reference => "reference",
            Self::Gain => "gain",
            Self::Snr => "snr",
            Self::Spectral => "spectral",
            Self::PolicySlices => "policy-slices",
            Self::OneShotRatio => "oneshot-ratio",
            Self::Table1 => "table1",
            Self::Moments => "moments",
            Self::Thresholds => "thresholds",
        }
    }

    fn needs_distribution(self) -> bool {
        self != Self::Table1
    }

    fn needs_points(self) -> bool {
        matches!(
            self,
            Self::Costs | Self::Reference | Self::Gain | Self::Snr | Self::Spectral | Self::PolicySlices | Self::OneShotRatio
        )
    }
}

impl FromStr for Report {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown report `{s}`"))
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A validation finding, optionally tied to a config line.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Values given on the command line; each wins over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub distribution: Option<String>,
    pub seed: Option<u64>,
    pub n_trials: Option<u64>,
    pub n_beta: Option<usize>,
    pub n_g: Option<usize>,
    pub beta_max: Option<f64>,
    pub policies: Vec<String>,
    pub delta: Option<f64>,
    pub packets: Vec<f64>,
    pub horizons: Vec<usize>,
    pub powers: Vec<f64>,
    pub output_dir: Option<PathBuf>,
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub distribution: Option<DistributionSpec>,
    pub seed: Option<u64>,
    pub n_trials: u64,
    pub n_beta: usize,
    pub n_g: usize,
    pub beta_max: Option<f64>,
    pub policies: Vec<PolicySpec>,
    pub delta: Option<f64>,
    pub benchmark_rate: Option<f64>,
    /// `(B, T)` pairs in sweep order, duplicates removed.
    pub points: Vec<(f64, usize)>,
    pub reports: Vec<Report>,
    pub powers: Vec<f64>,
    pub slice_queue: Option<f64>,
    pub output_dir: PathBuf,
}

impl Settings {
    /// Distinct horizons in ascending order.
    pub fn horizons(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.1).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn packets_for(&self, horizon: usize) -> Vec<f64> {
        self.points.iter().filter(|p| p.1 == horizon).map(|p| p.0).collect()
    }
}

fn line_of(text: &str, span: Range<usize>) -> Option<usize> {
    if text.is_empty() || span.start > text.len() {
        return None;
    }
    Some(text[..span.start].matches('\n').count() + 1)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, Diagnostic> {
        toml::from_str(text).map_err(|e| Diagnostic {
            line: e.span().and_then(|s| line_of(text, s)),
            message: e.message().trim().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String), Diagnostic> {
        let text = std::fs::read_to_string(path).map_err(|e| Diagnostic {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let cfg = Self::parse(&text)?;
        Ok((cfg, text))
    }
}

/// Merges `config` with `overrides` and checks the result.
///
/// `text` is the config source used to turn spans into line numbers; pass
/// an empty string when there is no file. `require_seed` enforces an
/// explicit seed, which the `run` command needs.
pub fn resolve(
    config: &ExperimentConfig,
    text: &str,
    overrides: &Overrides,
    require_seed: bool,
) -> (Settings, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut push = |span: Option<Range<usize>>, message: String| {
        diags.push(Diagnostic { line: span.and_then(|s| line_of(text, s)), message });
    };

    let distribution = match (&overrides.distribution, &config.distribution) {
        (Some(s), _) => parse_dist(s).map_err(|m| push(None, m)).ok(),
        (None, Some(s)) => parse_dist(s.get_ref()).map_err(|m| push(Some(s.span()), m)).ok(),
        (None, None) => None,
    };

    let seed = overrides.seed.or(config.seed);
    if require_seed && seed.is_none() {
        push(None, "seed is required".into());
    }

    let n_trials = overrides
        .n_trials
        .or(config.n_trials.as_ref().map(|s| *s.get_ref()))
        .unwrap_or(DEFAULT_N_TRIALS);
    if n_trials == 0 {
        push(config.n_trials.as_ref().map(|s| s.span()), "n_trials must be >= 1".into());
    }

    let n_beta = overrides
        .n_beta
        .or(config.grid.n_beta.as_ref().map(|s| *s.get_ref()))
        .unwrap_or(DEFAULT_N_BETA);
    if n_beta < MIN_N_BETA {
        push(config.grid.n_beta.as_ref().map(|s| s.span()), format!("n_beta must be >= {MIN_N_BETA}"));
    }
    let n_g = overrides.n_g.or(config.grid.n_g.as_ref().map(|s| *s.get_ref())).unwrap_or(DEFAULT_N_G);
    if n_g == 0 {
        push(config.grid.n_g.as_ref().map(|s| s.span()), "n_g must be >= 1".into());
    }
    let beta_max_span = config.grid.beta_max.as_ref().map(|s| s.span());
    let beta_max = overrides.beta_max.or(config.grid.beta_max.as_ref().map(|s| *s.get_ref()));
    if let Some(b) = beta_max {
        if !(b > 0.0 && b.is_finite()) {
            push(beta_max_span.clone(), "beta_max must be > 0".into());
        }
    }

    let mut policies = Vec::new();
    if overrides.policies.is_empty() {
        for p in &config.policies {
            match p.get_ref().parse::<PolicySpec>() {
                Ok(spec) => policies.push(spec),
                Err(e) => push(Some(p.span()), e.to_string()),
            }
        }
    } else {
        for p in &overrides.policies {
            match p.parse::<PolicySpec>() {
                Ok(spec) => policies.push(spec),
                Err(e) => push(None, e.to_string()),
            }
        }
    }

    let delta_span = config.delta.as_ref().map(|s| s.span());
    let delta = overrides.delta.or(config.delta.as_ref().map(|s| *s.get_ref()));
    if let Some(d) = delta {
        if !(d > 0.0 && d.is_finite()) {
            push(delta_span.clone(), "delta must be > 0".into());
        }
        if !policies.iter().any(|p| matches!(p, PolicySpec::ConstrainedErgodic { delta: None })) {
            push(delta_span.clone(), "delta is set but no `cerg` policy uses it".into());
        }
    }

    let benchmark_rate = config.benchmark_rate.as_ref().map(|s| *s.get_ref());
    if let Some(r) = &config.benchmark_rate {
        if !(*r.get_ref() > 0.0 && r.get_ref().is_finite()) {
            push(Some(r.span()), "benchmark_rate (average nats per slot) must be > 0".into());
        }
    }

    let mut points: Vec<(f64, usize)> = Vec::new();
    let mut add_point = |p: (f64, usize)| {
        if !points.iter().any(|q| q.0.to_bits() == p.0.to_bits() && q.1 == p.1) {
            points.push(p);
        }
    };
    if !overrides.packets.is_empty() || !overrides.horizons.is_empty() {
        if overrides.packets.is_empty() || overrides.horizons.is_empty() {
            push(None, "--B and --T must be given together".into());
        }
        for &t in &overrides.horizons {
            if t == 0 {
                push(None, "T must be ≥ 1".into());
            }
        }
        for &t in overrides.horizons.iter().filter(|&&t| t > 0) {
            for &b in &overrides.packets {
                add_point((b, t));
            }
        }
    } else {
        for sweep in &config.sweep {
            let s = sweep.get_ref();
            if s.horizons.get_ref().is_empty() {
                push(Some(s.horizons.span()), "T list is empty".into());
            }
            let packets = match s.packets.get_ref().values() {
                Ok(v) => v,
                Err(m) => {
                    push(Some(s.packets.span()), m);
                    Vec::new()
                }
            };
            for &t in s.horizons.get_ref() {
                if t < 1 {
                    push(Some(s.horizons.span()), "T must be ≥ 1".into());
                    continue;
                }
                for &b in &packets {
                    add_point((b, t as usize));
                }
            }
        }
    }
    for &(b, t) in &points {
        if !(b >= 0.0 && b.is_finite()) {
            push(None, format!("B = {b} must be finite and >= 0"));
        }
        if let Some(bm) = beta_max {
            if b > bm {
                push(beta_max_span.clone(), format!("B = {b} exceeds beta_max = {bm}"));
            }
        }
        if t < 2 && policies.iter().any(|p| matches!(p, PolicySpec::ConstrainedErgodic { .. })) {
            push(None, format!("cerg needs T >= 2 (point B = {b}, T = {t})"));
        }
    }

    let mut reports = Vec::new();
    for r in &config.reports {
        match r.get_ref().parse::<Report>() {
            Ok(rep) if !reports.contains(&rep) => reports.push(rep),
            Ok(_) => {}
            Err(m) => push(Some(r.span()), m),
        }
    }
    for rep in &reports {
        if rep.needs_distribution() && distribution.is_none() {
            push(None, format!("report `{rep}` needs a distribution"));
        }
        if rep.needs_points() && points.is_empty() {
            push(None, format!("report `{rep}` needs at least one (B, T) point"));
        }
    }
    if reports.contains(&Report::Costs) && policies.is_empty() {
        push(None, "report `costs` needs at least one policy".into());
    }
    let powers = if overrides.powers.is_empty() { config.powers.clone() } else { overrides.powers.clone() };
    if reports.contains(&Report::Spectral) && powers.is_empty() {
        push(None, "report `spectral` needs a nonempty `powers` list".into());
    }
    if powers.iter().any(|p| !p.is_finite()) {
        push(None, "powers must be finite".into());
    }

    let settings = Settings {
        distribution,
        seed,
        n_trials,
        n_beta,
        n_g,
        beta_max,
        policies,
        delta,
        benchmark_rate,
        points,
        reports,
        powers,
        slice_queue: config.slice_queue,
        output_dir: overrides
            .output_dir
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
    };
    (settings, diags)
}

fn parse_dist(s: &str) -> Result<DistributionSpec, String> {
    s.parse::<DistributionSpec>().map_err(|e| e.to_string())
}
