//! Backward induction for the optimal deadline-constrained scheduler.
//!
//! The cost-to-go `J_t(beta)` (expected energy to serve `beta` nats in the
//! remaining `t` slots) is tabulated on a uniform grid `beta_i = i h`.
//! Row 1 is analytic; later rows come from
//!
//! ```text
//! J_t(beta_i) = sum_k w_k min_{0 <= b <= beta_i} [ (e^b - 1) / g_k + J_{t-1}(beta_i - b) ]
//! ```
//!
//! with `J_{t-1}` interpolated linearly between grid points and `(g_k, w_k)`
//! the fixed channel nodes of [`FadingDistribution::probability_nodes`].

use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fading::FadingDistribution;
use crate::optimize::{bisect, golden_section};
use crate::policies::{check_state, Policy};

pub const DEFAULT_N_BETA: usize = 2048;
pub const DEFAULT_N_G: usize = 512;
pub const MIN_N_BETA: usize = 64;
/// Headroom of the default grid over the largest queried packet.
pub const BETA_MAX_MARGIN: f64 = 1.25;
pub const INNER_TOL: f64 = 1e-10;
pub const INNER_MAX_ITER: usize = 200;
const ALLOC_TOL: f64 = 1e-12;
const ALLOC_MAX_ITER: usize = 200;
const MAGIC: &[u8; 8] = b"FSVTAB01";

/// Discretization of the DP state and channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub beta_max: f64,
    pub n_beta: usize,
    pub n_g: usize,
}

impl GridConfig {
    /// Default grid covering packets up to `packet` nats.
    pub fn for_packet(packet: f64) -> Result<Self> {
        let g = Self { beta_max: BETA_MAX_MARGIN * packet, n_beta: DEFAULT_N_BETA, n_g: DEFAULT_N_G };
        g.validate()?;
        Ok(g)
    }

    pub fn with_resolution(self, n_beta: usize, n_g: usize) -> Self {
        Self { n_beta, n_g, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_max > 0.0 && self.beta_max.is_finite()) {
            return Err(invalid("beta_max", format!("must be finite and > 0, got {}", self.beta_max)));
        }
        if self.n_beta < MIN_N_BETA {
            return Err(invalid("n_beta", format!("must be >= {MIN_N_BETA}, got {}", self.n_beta)));
        }
        if self.n_g == 0 {
            return Err(invalid("n_g", "must be >= 1"));
        }
        Ok(())
    }

    /// Grid spacing `beta_max / (n_beta - 1)`.
    pub fn spacing(&self) -> f64 {
        self.beta_max / (self.n_beta - 1) as f64
    }
}

/// Tabulated cost-to-go rows `J_1..J_T` with their nodal derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    dist_id: String,
    support: (f64, f64),
    grid: GridConfig,
    rows: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
}

fn interp(row: &[f64], h: f64, x: f64) -> f64 {
    let s = (x / h).max(0.0);
    let i = (s as usize).min(row.len() - 2);
    let frac = s - i as f64;
    row[i] + frac * (row[i + 1] - row[i])
}

/// Central differences inside, second-order one-sided differences at the
/// ends. For a convex row the result is nondecreasing.
fn nodal_slopes(row: &[f64], h: f64) -> Vec<f64> {
    let n = row.len();
    let mut d = Vec::with_capacity(n);
    d.push((-3.0 * row[0] + 4.0 * row[1] - row[2]) / (2.0 * h));
    for i in 1..n - 1 {
        d.push((row[i + 1] - row[i - 1]) / (2.0 * h));
    }
    d.push((3.0 * row[n - 1] - 4.0 * row[n - 2] + row[n - 3]) / (2.0 * h));
    d
}

impl ValueTable {
    pub fn solve(dist: &FadingDistribution, horizon: usize, grid: GridConfig) -> Result<Self> {
        grid.validate()?;
        if horizon == 0 {
            return Err(invalid("T", "horizon must be >= 1"));
        }
        let nu1 = dist.mean_inverse()?;
        if !nu1.is_finite() {
            return Err(invalid("distribution", "E[1/g] must be finite"));
        }
        let h = grid.spacing();
        let betas: Vec<f64> = (0..grid.n_beta).map(|i| i as f64 * h).collect();
        let nodes = dist.probability_nodes(grid.n_g);

        let mut rows = Vec::with_capacity(horizon);
        rows.push(betas.iter().map(|b| b.exp_m1() * nu1).collect::<Vec<f64>>());
        for _ in 2..=horizon {
            let prev = rows.last().expect("row 1 exists");
            let row: Vec<f64> = betas
                .par_iter()
                .map(|&beta| {
                    nodes
                        .iter()
                        .map(|&(g, w)| {
                            let m = golden_section(
                                |b| b.exp_m1() / g + interp(prev, h, beta - b),
                                0.0,
                                beta,
                                INNER_TOL,
                                INNER_MAX_ITER,
                            );
                            w * m.value
                        })
                        .sum()
                })
                .collect();
            rows.push(row);
        }
        let slopes = rows.iter().map(|r| nodal_slopes(r, h)).collect();
        Ok(Self {
            dist_id: dist.id().to_string(),
            support: (dist.g_min(), dist.g_max()),
            grid,
            rows,
            slopes,
        })
    }

    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    pub fn grid(&self) -> GridConfig {
        self.grid
    }

    pub fn distribution_id(&self) -> &str {
        &self.dist_id
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Grid values of `J_t`. Panics if `t` is outside `1..=T`.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t - 1]
    }

    pub fn beta(&self, i: usize) -> f64 {
        i as f64 * self.grid.spacing()
    }

    fn check(&self, t: usize, beta: f64) -> Result<()> {
        if t == 0 || t > self.horizon() {
            return Err(Error::Domain {
                what: "slot",
                value: t as f64,
                domain: format!("1..={}", self.horizon()),
            });
        }
        if !(beta >= 0.0) {
            return Err(Error::Domain { what: "queue", value: beta, domain: "[0, beta_max]".into() });
        }
        if beta > self.grid.beta_max * (1.0 + 1e-12) {
            return Err(Error::OutOfRange { beta, beta_max: self.grid.beta_max });
        }
        Ok(())
    }

    /// `J_t(beta)`, linearly interpolated.
    pub fn value(&self, t: usize, beta: f64) -> Result<f64> {
        self.check(t, beta)?;
        Ok(interp(self.row(t), self.grid.spacing(), beta))
    }

    /// Finite-difference slope `J_t'(beta)`, linearly interpolated between nodes.
    pub fn derivative(&self, t: usize, beta: f64) -> Result<f64> {
        self.check(t, beta)?;
        Ok(interp(&self.slopes[t - 1], self.grid.spacing(), beta))
    }

    /// Optimal nats to serve in slot `t` with queue `beta` and gain `g`.
    pub fn allocate(&self, t: usize, beta: f64, g: f64) -> Result<f64> {
        self.check(t, beta)?;
        let (lo, hi) = self.support;
        if !(g >= lo && g <= hi && g > 0.0) {
            return Err(Error::Domain { what: "gain", value: g, domain: format!("[{lo}, {hi}]") });
        }
        if t == 1 || beta == 0.0 {
            return Ok(if t == 1 { beta } else { 0.0 });
        }
        let h = self.grid.spacing();
        let slope = &self.slopes[t - 2];
        let d = |x: f64| interp(slope, h, x);
        if g <= 1.0 / d(beta) {
            return Ok(0.0);
        }
        if g >= beta.exp() / d(0.0) {
            return Ok(beta);
        }
        let b = bisect(|b| b.exp() / g - d(beta - b), 0.0, beta, ALLOC_TOL, 0.0, ALLOC_MAX_ITER)?;
        Ok(b.clamp(0.0, beta))
    }

    /// Serializes the table to a flat little-endian binary blob.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        let id = self.dist_id.as_bytes();
        w.write_all(&(id.len() as u64).to_le_bytes())?;
        w.write_all(id)?;
        for v in [self.horizon() as u64, self.grid.n_beta as u64, self.grid.n_g as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [self.grid.beta_max, self.support.0, self.support.1] {
            w.write_all(&v.to_le_bytes())?;
        }
        for row in &self.rows {
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let corrupt = |reason: &str| Error::Parse { what: "value table", reason: reason.to_string() };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let mut u = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut u)?;
            Ok(u64::from_le_bytes(u))
        };
        let id_len = next_u64(&mut r)? as usize;
        if id_len > 1 << 20 {
            return Err(corrupt("identifier too long"));
        }
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id)?;
        let dist_id = String::from_utf8(id).map_err(|_| corrupt("identifier is not UTF-8"))?;
        let horizon = next_u64(&mut r)? as usize;
        let n_beta = next_u64(&mut r)? as usize;
        let n_g = next_u64(&mut r)? as usize;
        let mut next_f64 = |r: &mut R| -> Result<f64> { Ok(f64::from_bits(next_u64(r)?)) };
        let beta_max = next_f64(&mut r)?;
        let support = (next_f64(&mut r)?, next_f64(&mut r)?);
        let grid = GridConfig { beta_max, n_beta, n_g };
        grid.validate()?;
        if horizon == 0 || horizon.saturating_mul(n_beta) > 1 << 30 {
            return Err(corrupt("implausible table size"));
        }
        let mut rows = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let row = (0..n_beta).map(|_| next_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let h = grid.spacing();
        let slopes = rows.iter().map(|row| nodal_slopes(row, h)).collect();
        Ok(Self { dist_id, support, grid, rows, slopes })
    }
}

pub fn solve_dp(dist: &FadingDistribution, horizon: usize, grid: GridConfig) -> Result<ValueTable> {
    ValueTable::solve(dist, horizon, grid)
}

pub fn cost_to_go_derivative(table: &ValueTable, t: usize, beta: f64) -> Result<f64> {
    table.derivative(t, beta)
}

pub fn optimal_allocate(table: &ValueTable, t: usize, beta: f64, g: f64) -> Result<f64> {
    table.allocate(t, beta, g)
}

/// The DP policy as a [`Policy`]; cheap to clone.
#[derive(Debug, Clone)]
pub struct OptimalPolicy {
    table: Arc<ValueTable>,
}

impl OptimalPolicy {
    pub fn new(table: Arc<ValueTable>) -> Self {
        Self { table }
    }

    pub fn table(&self) -> &ValueTable {
        &self.table
    }
}

impl Policy for OptimalPolicy {
    fn name(&self) -> String {
        "optimal".into()
    }

    fn allocate(&self, slot: usize, queue: f64, gain: f64) -> Result<f64> {
        check_state(slot, queue)?;
        self.table.allocate(slot, queue, gain)
    }
}
