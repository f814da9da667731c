//! Channel power-gain distributions.
//!
//! A [`FadingDistribution`] is immutable and cheap to share between threads.
//! Every expectation `E_g[h(g)]` in the crate goes through
//! [`FadingDistribution::expect`], which is deterministic adaptive quadrature
//! (no sampling). Sampling is only used by the Monte Carlo engine.

use std::f64::consts::PI;
use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_with, QuadOptions};

/// Supports wider than this ratio are integrated in `log g`.
const LOG_SUBSTITUTION_RATIO: f64 = 1e3;
/// `e^{-x}` underflows to exactly zero past this point.
const EXP_TAIL_CUTOFF: f64 = 750.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    TruncatedExponential,
    Deterministic,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `c * exp(-(g - g_min))` on `[g_min, g_max]`.
    TruncExp { g_min: f64, g_max: f64, c: f64 },
    /// Point mass at `g`.
    Deterministic { g: f64 },
    /// Piecewise-linear density through `(g[i], pdf[i])`, already normalized.
    Tabulated { g: Vec<f64>, pdf: Vec<f64>, cdf: Vec<f64>, c: f64 },
}

/// Distribution of the per-slot channel power gain `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDistribution {
    shape: Shape,
    id: String,
}

impl FadingDistribution {
    /// Exponential density truncated to `[g_min, g_max]` and renormalized.
    pub fn truncated_exponential(g_min: f64, g_max: f64) -> Result<Self> {
        if !(g_min > 0.0 && g_min.is_finite()) {
            return Err(Error::InvalidSupport { g_min, g_max, reason: "g_min must be positive" });
        }
        if !(g_max > g_min && g_max.is_finite()) {
            return Err(Error::InvalidSupport {
                g_min,
                g_max,
                reason: "g_max must be finite and larger than g_min",
            });
        }
        let c = -1.0 / (-(g_max - g_min)).exp_m1();
        Ok(Self {
            shape: Shape::TruncExp { g_min, g_max, c },
            id: format!("truncexp:g_min={g_min},g_max={g_max}"),
        })
    }

    /// Non-fading channel with constant gain `g`.
    pub fn deterministic(g: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidSupport { g_min: g, g_max: g, reason: "gain must be positive" });
        }
        Ok(Self { shape: Shape::Deterministic { g }, id: format!("deterministic:g={g}") })
    }

    /// Density given by `(g, pdf)` samples, linearly interpolated and
    /// normalized with the trapezoidal rule.
    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("tabulated density", "needs at least two (g, pdf) rows"));
        }
        let g: Vec<f64> = points.iter().map(|p| p.0).collect();
        let raw: Vec<f64> = points.iter().map(|p| p.1).collect();
        if g.iter().any(|x| !x.is_finite()) || raw.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("tabulated density", "values must be finite and pdf >= 0"));
        }
        if g[0] < 0.0 {
            return Err(Error::InvalidSupport {
                g_min: g[0],
                g_max: g[g.len() - 1],
                reason: "gains must be nonnegative",
            });
        }
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("tabulated density", "gain column must be strictly increasing"));
        }
        if g[0] == 0.0 && raw[0] > 0.0 {
            return Err(invalid("tabulated density", "pdf(0) > 0 makes E[1/g] infinite"));
        }
        let area: f64 = g.windows(2).zip(raw.windows(2)).map(|(x, p)| 0.5 * (p[0] + p[1]) * (x[1] - x[0])).sum();
        if !(area > 0.0) {
            return Err(invalid("tabulated density", "density integrates to zero"));
        }
        let c = 1.0 / area;
        let pdf: Vec<f64> = raw.iter().map(|p| p * c).collect();
        let mut cdf = Vec::with_capacity(g.len());
        cdf.push(0.0);
        for i in 1..g.len() {
            let prev = cdf[i - 1];
            cdf.push(prev + 0.5 * (pdf[i - 1] + pdf[i]) * (g[i] - g[i - 1]));
        }
        let n = cdf.len();
        cdf[n - 1] = 1.0;

        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for x in g.iter().chain(raw.iter()) {
            for byte in x.to_bits().to_le_bytes() {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        let id = format!("tabulated:n={},fnv={hash:016x}", g.len());
        Ok(Self { shape: Shape::Tabulated { g, pdf, cdf, c }, id })
    }

    /// Reads a two-column `g,pdf` CSV. A non-numeric first row is treated as
    /// a header; blank lines and lines starting with `#` are skipped.
    pub fn tabulated_from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut cols = trimmed.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Parse {
                        what: "tabulated density",
                        reason: format!("line {}: expected two columns", lineno + 1),
                    })
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(p)) => points.push((x, p)),
                _ if points.is_empty() => continue,
                _ => {
                    return Err(Error::Parse {
                        what: "tabulated density",
                        reason: format!("line {}: `{trimmed}` is not numeric", lineno + 1),
                    })
                }
            }
        }
        Self::tabulated(&points)
    }

    pub fn tabulated_from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::tabulated_from_reader(std::io::BufReader::new(file))
    }

    pub fn kind(&self) -> DistributionKind {
        match self.shape {
            Shape::TruncExp { .. } => DistributionKind::TruncatedExponential,
            Shape::Deterministic { .. } => DistributionKind::Deterministic,
            Shape::Tabulated { .. } => DistributionKind::Tabulated,
        }
    }

    /// Canonical identifier, stable across runs.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn g_min(&self) -> f64 {
        match &self.shape {
            Shape::TruncExp { g_min, .. } => *g_min,
            Shape::Deterministic { g } => *g,
            Shape::Tabulated { g, .. } => g[0],
        }
    }

    pub fn g_max(&self) -> f64 {
        match &self.shape {
            Shape::TruncExp { g_max, .. } => *g_max,
            Shape::Deterministic { g } => *g,
            Shape::Tabulated { g, .. } => g[g.len() - 1],
        }
    }

    /// Normalization factor applied to the raw density (1 for a point mass).
    pub fn normalization(&self) -> f64 {
        match &self.shape {
            Shape::TruncExp { c, .. } | Shape::Tabulated { c, .. } => *c,
            Shape::Deterministic { .. } => 1.0,
        }
    }

    pub fn in_support(&self, g: f64) -> bool {
        g >= self.g_min() && g <= self.g_max()
    }

    /// Density at `g`. A point mass reports `+inf` at its atom.
    pub fn pdf(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::TruncExp { g_min, g_max, c } => {
                if x < *g_min || x > *g_max {
                    0.0
                } else {
                    c * (-(x - g_min)).exp()
                }
            }
            Shape::Deterministic { g } => {
                if x == *g {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Shape::Tabulated { g, pdf, .. } => {
                if x < g[0] || x > g[g.len() - 1] {
                    return 0.0;
                }
                let i = segment(g, x);
                let w = (x - g[i]) / (g[i + 1] - g[i]);
                pdf[i] + w * (pdf[i + 1] - pdf[i])
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::TruncExp { g_min, g_max, c } => {
                if x <= *g_min {
                    0.0
                } else if x >= *g_max {
                    1.0
                } else {
                    (-c * (-(x - g_min)).exp_m1()).min(1.0)
                }
            }
            Shape::Deterministic { g } => {
                if x < *g {
                    0.0
                } else {
                    1.0
                }
            }
            Shape::Tabulated { g, pdf, cdf, .. } => {
                if x <= g[0] {
                    return 0.0;
                }
                if x >= g[g.len() - 1] {
                    return 1.0;
                }
                let i = segment(g, x);
                let d = x - g[i];
                let slope = (pdf[i + 1] - pdf[i]) / (g[i + 1] - g[i]);
                (cdf[i] + pdf[i] * d + 0.5 * slope * d * d).min(1.0)
            }
        }
    }

    /// Inverse CDF; `p` is clamped to `[0, 1]` and the result to the support.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match &self.shape {
            Shape::TruncExp { g_min, g_max, c } => (g_min - (-p / c).ln_1p()).clamp(*g_min, *g_max),
            Shape::Deterministic { g } => *g,
            Shape::Tabulated { g, pdf, cdf, .. } => {
                let n = g.len();
                let i = match cdf.binary_search_by(|v| v.total_cmp(&p)) {
                    Ok(i) => return g[i],
                    Err(i) => i.clamp(1, n - 1) - 1,
                };
                let r = p - cdf[i];
                let slope = (pdf[i + 1] - pdf[i]) / (g[i + 1] - g[i]);
                let disc = (pdf[i] * pdf[i] + 2.0 * slope * r).max(0.0);
                let denom = pdf[i] + disc.sqrt();
                let d = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
                (g[i] + d).clamp(g[i], g[i + 1])
            }
        }
    }

    /// `E_g[h(g)]` by adaptive quadrature over the support.
    pub fn expect<H: Fn(f64) -> f64>(&self, label: &str, h: H) -> Result<f64> {
        self.expect_on(label, f64::NEG_INFINITY, f64::INFINITY, &[], h)
    }

    /// `E_g[h(g) 1{lo <= g <= hi}]`, with optional interior break points
    /// where `h` has kinks.
    pub fn expect_on<H: Fn(f64) -> f64>(
        &self,
        label: &str,
        lo: f64,
        hi: f64,
        breaks: &[f64],
        h: H,
    ) -> Result<f64> {
        let a = lo.max(self.g_min());
        let b = hi.min(self.g_max());
        match &self.shape {
            Shape::Deterministic { g } => Ok(if a <= *g && *g <= b { h(*g) } else { 0.0 }),
            _ if !(a < b) => Ok(0.0),
            Shape::TruncExp { g_min, c, .. } => {
                let b = b.min(g_min + EXP_TAIL_CUTOFF);
                if !(a < b) {
                    return Ok(0.0);
                }
                let mut pts: Vec<f64> = breaks.to_vec();
                pts.extend([g_min + 1.0, g_min + 10.0, g_min + 50.0]);
                let dens = |x: f64| c * (-(x - g_min)).exp();
                integrate_density(label, a, b, &pts, |x| h(x) * dens(x))
            }
            Shape::Tabulated { g, .. } => {
                let mut pts: Vec<f64> = breaks.to_vec();
                pts.extend(g.iter().copied());
                integrate_density(label, a, b, &pts, |x| h(x) * self.pdf(x))
            }
        }
    }

    /// `E[1/g]`.
    pub fn mean_inverse(&self) -> Result<f64> {
        self.expect("1/g", |g| 1.0 / g)
    }

    /// Fractional moment `(E[(1/g)^{1/m}])^m`.
    pub fn fractional_moment(&self, m: usize) -> Result<f64> {
        if m == 0 {
            return Err(invalid("m", "fractional moment order must be >= 1"));
        }
        if m == 1 {
            return self.mean_inverse();
        }
        let p = 1.0 / m as f64;
        let inner = self.expect(&format!("g^(-1/{m})"), |g| g.powf(-p))?;
        Ok(inner.powi(m as i32))
    }

    /// `exp(E[log(1/g)])`, the limit of the fractional moments.
    pub fn nu_infinity(&self) -> Result<f64> {
        Ok(self.expect("-log g", |g| -g.ln())?.exp())
    }

    /// Stream of i.i.d. gains drawn by inverse CDF from a seeded ChaCha8 stream.
    pub fn sampler(&self, seed: u64) -> GainSampler<'_> {
        GainSampler { dist: self, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// `n` i.i.d. draws; identical seeds give bitwise-identical output.
    pub fn sample(&self, seed: u64, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(invalid("n", "sample count must be >= 1"));
        }
        let mut s = self.sampler(seed);
        Ok((0..n).map(|_| s.next_gain()).collect())
    }

    /// Fixed nodes and weights for `E_g[h(g)]` with bounded `h`.
    ///
    /// Midpoint rule in probability space after the graded map
    /// `u = (1 - cos(pi s)) / 2`, which clusters nodes near both ends of the
    /// support. Weights sum to one. A point mass yields a single node.
    pub fn probability_nodes(&self, n: usize) -> Vec<(f64, f64)> {
        if self.kind() == DistributionKind::Deterministic || n <= 1 {
            return vec![(self.quantile(0.5), 1.0)];
        }
        let mut nodes: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let s = (k as f64 + 0.5) / n as f64;
                let u = 0.5 * (1.0 - (PI * s).cos());
                let w = 0.5 * PI * (PI * s).sin();
                (self.quantile(u), w)
            })
            .collect();
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        for node in &mut nodes {
            node.1 /= total;
        }
        nodes
    }
}

impl fmt::Display for FadingDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

fn segment(g: &[f64], x: f64) -> usize {
    match g.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => i.min(g.len() - 2),
        Err(i) => i.clamp(1, g.len() - 1) - 1,
    }
}

fn integrate_density<F: Fn(f64) -> f64>(label: &str, a: f64, b: f64, breaks: &[f64], f: F) -> Result<f64> {
    let opts = QuadOptions::default();
    if a > 0.0 && b / a > LOG_SUBSTITUTION_RATIO {
        let log_breaks: Vec<f64> = breaks.iter().filter(|&&x| x > 0.0).map(|x| x.ln()).collect();
        let r = integrate_with(
            |u: f64| {
                let x = u.exp();
                f(x) * x
            },
            a.ln(),
            b.ln(),
            &log_breaks,
            opts,
            label,
        )?;
        Ok(r.value)
    } else {
        Ok(integrate_with(f, a, b, breaks, opts, label)?.value)
    }
}

/// Seeded gain generator; owns its RNG state.
pub struct GainSampler<'a> {
    dist: &'a FadingDistribution,
    rng: ChaCha8Rng,
}

impl GainSampler<'_> {
    pub fn next_gain(&mut self) -> f64 {
        let u: f64 = self.rng.random();
        self.dist.quantile(u)
    }
}

/// Fractional moments `nu_1..nu_M`, their running geometric means and
/// `nu_inf` for one distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    id: String,
    support: (f64, f64),
    nu: Vec<f64>,
    gm: Vec<f64>,
    nu_inf: f64,
}

impl MomentTable {
    /// Default cache depth for a horizon of `t` slots.
    pub fn default_order(t: usize) -> usize {
        t.max(64)
    }

    /// Tabulates `nu_1..nu_{max_order}`.
    pub fn new(dist: &FadingDistribution, max_order: usize) -> Result<Self> {
        if max_order == 0 {
            return Err(invalid("max_order", "must be >= 1"));
        }
        let nu = (1..=max_order).map(|m| dist.fractional_moment(m)).collect::<Result<Vec<_>>>()?;
        let mut gm = Vec::with_capacity(max_order);
        let mut log_sum = 0.0;
        for (k, v) in nu.iter().enumerate() {
            log_sum += v.ln();
            gm.push((log_sum / (k + 1) as f64).exp());
        }
        Ok(Self {
            id: dist.id().to_string(),
            support: (dist.g_min(), dist.g_max()),
            nu,
            gm,
            nu_inf: dist.nu_infinity()?,
        })
    }

    pub fn for_horizon(dist: &FadingDistribution, t: usize) -> Result<Self> {
        Self::new(dist, Self::default_order(t))
    }

    pub fn distribution_id(&self) -> &str {
        &self.id
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn max_order(&self) -> usize {
        self.nu.len()
    }

    /// `nu_m`. Panics if `m` is zero or beyond [`Self::max_order`].
    pub fn nu(&self, m: usize) -> f64 {
        self.nu[m - 1]
    }

    /// Geometric mean `G(nu_t, ..., nu_1)`. Panics outside `1..=max_order`.
    pub fn geometric_mean(&self, t: usize) -> f64 {
        self.gm[t - 1]
    }

    pub fn nu_inf(&self) -> f64 {
        self.nu_inf
    }
}

/// Textual distribution description used by config files and the CLI.
///
/// Accepted forms: `truncexp:g_min=<x>,g_max=<y>`, `deterministic:g=<x>`
/// and `tabulated:path=<file>`.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    TruncatedExponential { g_min: f64, g_max: f64 },
    Deterministic { g: f64 },
    Tabulated { path: PathBuf },
}

impl DistributionSpec {
    pub fn build(&self) -> Result<FadingDistribution> {
        match self {
            Self::TruncatedExponential { g_min, g_max } => FadingDistribution::truncated_exponential(*g_min, *g_max),
            Self::Deterministic { g } => FadingDistribution::deterministic(*g),
            Self::Tabulated { path } => FadingDistribution::tabulated_from_path(path),
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TruncatedExponential { g_min, g_max } => write!(f, "truncexp:g_min={g_min},g_max={g_max}"),
            Self::Deterministic { g } => write!(f, "deterministic:g={g}"),
            Self::Tabulated { path } => write!(f, "tabulated:path={}", path.display()),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: String| Error::Parse { what: "distribution spec", reason };
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = Vec::new();
        for kv in rest.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("`{kv}` is not key=value")))?;
            params.push((k.trim().replace('-', "_"), v.trim().to_string()));
        }
        let take = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let num = |key: &str| -> Result<f64> {
            let raw = take(key).ok_or_else(|| bad(format!("`{s}` is missing `{key}`")))?;
            raw.parse::<f64>().map_err(|_| bad(format!("`{key}={raw}` is not a number")))
        };
        let allowed: &[&str] = match kind.trim() {
            "truncexp" | "trunc-exp" | "truncated-exponential" => &["g_min", "g_max"],
            "deterministic" => &["g"],
            "tabulated" => &["path"],
            other => return Err(bad(format!("unknown distribution kind `{other}`"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(bad(format!("unknown parameter `{k}` for `{}`", kind.trim())));
        }
        match allowed[0] {
            "g_min" => Ok(Self::TruncatedExponential { g_min: num("g_min")?, g_max: num("g_max")? }),
            "g" => Ok(Self::Deterministic { g: num("g")? }),
            _ => Ok(Self::Tabulated {
                path: PathBuf::from(take("path").ok_or_else(|| bad(format!("`{s}` is missing `path`")))?),
            }),
        }
    }
}
