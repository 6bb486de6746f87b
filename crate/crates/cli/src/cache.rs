//! Special-function constants cached under $STEEPFIELD_CACHE.
//!
//! The cache records alpha_nu, the G prefactor and G(1) per dimension. A
//! stored entry that disagrees with a fresh evaluation is reported and
//! replaced, so a stale cache can never feed a computation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use steepfield::specfun::Green;

pub const CACHE_ENV: &str = "STEEPFIELD_CACHE";
const FILE: &str = "green-constants.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenConstants {
    pub alpha: f64,
    pub prefactor: f64,
    pub g_at_one: f64,
}

impl GreenConstants {
    fn of(green: &Green) -> Self {
        GreenConstants { alpha: green.alpha(), prefactor: green.prefactor(), g_at_one: green.anchor() }
    }

    fn agrees(&self, other: &Self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * a.abs().max(b.abs());
        close(self.alpha, other.alpha) && close(self.prefactor, other.prefactor) && close(self.g_at_one, other.g_at_one)
    }
}

fn cache_file() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(|d| PathBuf::from(d).join(FILE))
}

/// Constants for `nu`, checked against and stored in the cache when one is set.
pub fn green_constants(nu: u32) -> Result<GreenConstants> {
    let fresh = GreenConstants::of(Green::get(nu)?);
    let Some(path) = cache_file() else { return Ok(fresh) };
    let mut table: BTreeMap<u32, GreenConstants> = match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_else(|_| {
            eprintln!("warning: ignoring unreadable cache {}", path.display());
            BTreeMap::new()
        }),
        Err(_) => BTreeMap::new(),
    };
    match table.get(&nu) {
        Some(stored) if stored.agrees(&fresh) => return Ok(fresh),
        Some(_) => eprintln!("warning: cached constants for nu = {nu} are stale; refreshing {}", path.display()),
        None => {}
    }
    table.insert(nu, fresh);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating cache directory {}", dir.display()))?;
    }
    std::fs::write(&path, serde_json::to_vec_pretty(&table)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(fresh)
}
