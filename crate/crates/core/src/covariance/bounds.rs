//! Empirical constants for the intrinsic-metric and Psi bounds.
//!
//! The bounds hold with unspecified constants. These helpers take the maximum
//! ratio over a grid; the values frozen in [`crate::constants`] were produced
//! by them with some headroom.

use super::{psi, Kernel};
use crate::error::Result;

/// Geometric grid of `n` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|k| lo * (step * k as f64).exp()).collect()
}

fn max_distance(nu: u32) -> f64 {
    2.0 * (nu as f64).sqrt()
}

/// max of d^2(x,t; y,t) / (t^{2-nu} sqrt(r/t)) over the grid.
pub fn equal_radius_ratio(nu: u32, radii: &[f64], ratios: usize) -> Result<f64> {
    let k = Kernel::new(nu)?;
    let mut worst = 0.0f64;
    for &t in radii {
        for r in log_grid(1e-3 * t, max_distance(nu), ratios) {
            let d2 = k.metric_sq(t, t, r)?;
            worst = worst.max(d2 / (t.powi(2 - nu as i32) * (r / t).sqrt()));
        }
    }
    Ok(worst)
}

/// max of d^2 / (t^{2-nu} sqrt(r/t) + |G(t) - G(s)|), t the smaller radius.
pub fn mixed_radius_ratio(nu: u32, radii: &[f64], ratios: usize) -> Result<f64> {
    let k = Kernel::new(nu)?;
    let g = k.green();
    let mut worst = 0.0f64;
    for (i, &t) in radii.iter().enumerate() {
        for &s in &radii[i..] {
            for r in log_grid(1e-3 * t, max_distance(nu), ratios) {
                let d2 = k.metric_sq(t, s, r)?;
                let bound = t.powi(2 - nu as i32) * (r / t).sqrt() + (g.value(t) - g.value(s)).abs();
                worst = worst.max(d2 / bound);
            }
        }
    }
    Ok(worst)
}

/// max of |Psi(w)| / sqrt(w) over the grid.
pub fn psi_ratio(nu: u32, ws: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &w in ws {
        if w > 0.0 {
            worst = worst.max(psi(nu, w)?.abs() / w.sqrt());
        }
    }
    Ok(worst)
}
