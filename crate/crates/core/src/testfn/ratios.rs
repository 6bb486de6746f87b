use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

use super::{RatioCert, TestFunction};

/// Deepest schedule point must be at or below this radius.
pub const SCHEDULE_DEPTH: f64 = 1e-6;

/// Tolerance for numeric vs certified agreement.
pub const AGREEMENT_TOL: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    /// Tail estimate of limsup Sigma_t / (-ln t).
    pub numeric_upper: f64,
    /// Tail estimate of liminf Sigma_t / (-ln t).
    pub numeric_lower: f64,
    /// Whether the b / L correction was applied to the tail.
    pub extrapolated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certified: Option<RatioCert>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agrees: Option<bool>,
    /// "certified" for builtins, "numeric, not certified" otherwise.
    pub status: String,
}

impl RatioEstimate {
    pub fn upper(&self) -> f64 {
        self.certified.map_or(self.numeric_upper, |c| c.upper)
    }

    pub fn lower(&self) -> f64 {
        self.certified.map_or(self.numeric_lower, |c| c.lower)
    }
}

/// Least-squares fit q = c + b x; returns (c, b, r^2).
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return (my, 0.0, 0.0);
    }
    let b = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (my - b * mx, b, r2)
}

/// Estimates limsup and liminf of Sigma_t / (-ln t) along a decreasing schedule.
pub fn limit_ratios(f: &TestFunction, schedule: &[f64]) -> Result<RatioEstimate> {
    for w in schedule.windows(2) {
        if !(w[1] < w[0]) {
            return Err(domain("schedule must be strictly decreasing"));
        }
    }
    if let Some(&t) = schedule.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        return Err(domain(format!("schedule radius {t} outside (0, 1]")));
    }
    let floor = f.builtin().and_then(|b| b.valid_to_neglog).map_or(0.0, |l| (-l).exp() * (1.0 - 1e-12));
    let points: Vec<(f64, f64)> = schedule
        .iter()
        .filter(|&&t| t < 1.0 && t >= floor)
        .map(|&t| (-t.ln(), f.sigma_value(t)))
        .collect();
    match points.last() {
        Some(&(l, _)) if l >= -SCHEDULE_DEPTH.ln() => {}
        _ => {
            return Err(domain(format!("schedule must reach t <= {SCHEDULE_DEPTH:e} within the function's range")));
        }
    }
    let l_max = points[points.len() - 1].0;
    let tail: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 >= 0.5 * l_max).collect();
    let first = tail[0].1;
    let last = tail[tail.len() - 1].1;
    if !(last > 0.0 && last > first) {
        return Err(Error::Rejected(format!(
            "Sigma does not diverge: {first:e} at -ln t = {:.3}, {last:e} at -ln t = {l_max:.3}",
            tail[0].0
        )));
    }
    let qs: Vec<f64> = tail.iter().map(|p| p.1 / p.0).collect();
    let mut upper = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lower = qs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut extrapolated = false;
    if tail.len() >= 3 {
        let xs: Vec<f64> = tail.iter().map(|p| 1.0 / p.0).collect();
        let (c, _, r2) = linear_fit(&xs, &qs);
        if r2 >= 0.99 {
            upper = c;
            lower = c;
            extrapolated = true;
        }
    }
    let certified = f.ratio_cert();
    let agrees = certified
        .map(|c| (c.upper - upper).abs() <= AGREEMENT_TOL && (c.lower - lower).abs() <= AGREEMENT_TOL);
    let status = if certified.is_some() { "certified" } else { "numeric, not certified" };
    Ok(RatioEstimate {
        numeric_upper: upper,
        numeric_lower: lower,
        extrapolated,
        certified,
        agrees,
        status: status.into(),
    })
}
