//! On-disk cache of solved value tables.
//!
//! Tables are keyed by distribution id, horizon and grid. Only `dp-solve`
//! writes here; every other command reads.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use fadesched::{FadingDistribution, GridConfig, ValueTable};
use sha2::{Digest, Sha256};

use crate::output::write_atomic;

pub const CACHE_ENV: &str = "FADESCHED_CACHE_DIR";

pub fn cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_ENV) {
        return PathBuf::from(dir);
    }
    if let Some(xdg) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(xdg).join("fadesched");
    }
    match std::env::var_os("HOME") {
        Some(home) => PathBuf::from(home).join(".cache").join("fadesched"),
        None => PathBuf::from(".fadesched-cache"),
    }
}

pub fn key(dist: &FadingDistribution, horizon: usize, grid: &GridConfig) -> String {
    let canonical = format!(
        "{}|T={}|beta_max={:016x}|n_beta={}|n_g={}",
        dist.id(),
        horizon,
        grid.beta_max.to_bits(),
        grid.n_beta,
        grid.n_g
    );
    hex::encode(&Sha256::digest(canonical.as_bytes())[..16])
}

fn path_for(dist: &FadingDistribution, horizon: usize, grid: &GridConfig) -> PathBuf {
    cache_dir().join(format!("{}.vtab", key(dist, horizon, grid)))
}

/// Cached table, if present and consistent with the request.
pub fn load(dist: &FadingDistribution, horizon: usize, grid: &GridConfig) -> Option<ValueTable> {
    let bytes = fs::read(path_for(dist, horizon, grid)).ok()?;
    let table = ValueTable::read_from(bytes.as_slice()).ok()?;
    (table.distribution_id() == dist.id() && table.horizon() == horizon && table.grid() == *grid).then_some(table)
}

pub fn store(table: &ValueTable, dist: &FadingDistribution) -> Result<PathBuf> {
    let path = path_for(dist, table.horizon(), &table.grid());
    let mut buf = Vec::new();
    table.write_to(&mut buf)?;
    write_atomic(&path, &buf).with_context(|| format!("writing cache entry {}", path.display()))?;
    Ok(path)
}

/// Cached table or a fresh in-memory solve; never writes the cache.
pub fn table(dist: &FadingDistribution, horizon: usize, grid: GridConfig) -> Result<ValueTable> {
    if let Some(t) = load(dist, horizon, &grid) {
        return Ok(t);
    }
    ValueTable::solve(dist, horizon, grid)
        .with_context(|| format!("solving the DP for {} with T = {horizon}", dist.id()))
}
