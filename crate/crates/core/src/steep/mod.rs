//! X_t = int_1^t f d(theta-bar), its clock, tube events and exceptional-set masks.

mod criterion;
mod mask;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::sampler::ScaleSchedule;
use crate::testfn::TestFunction;

pub use criterion::{detect_mask, Criterion, CriterionKind};
pub use mask::{LevelRuns, SetMask};

/// Default number of sub-steps per scale interval for the sup in tube events.
pub const DEFAULT_SUBSTEPS: usize = 64;

/// sqrt(2 nu), the steepness target.
pub fn steep_target(nu: u32) -> f64 {
    (2.0 * nu as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub x: f64,
    pub sigma: f64,
}

/// (t, X_t, Sigma_t) along a decreasing grid starting at t = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteepPath {
    pub nu: u32,
    pub points: Vec<PathPoint>,
}

impl SteepPath {
    pub fn point_at(&self, t: f64) -> Option<&PathPoint> {
        self.points.iter().find(|p| p.t == t)
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Weights turning increments of theta-bar on a fixed grid into increments of X.
///
/// On each interval (t_k, t_{k-1}] the weight is int f dG / Delta G, the
/// conditional mean of f against the increment. It equals f exactly where f is
/// constant and gives a Stieltjes sum that converges under refinement elsewhere.
#[derive(Debug, Clone)]
pub struct Integrator {
    nu: u32,
    grid: Vec<f64>,
    weights: Vec<f64>,
    sigma: Vec<f64>,
}

impl Integrator {
    pub fn new(f: &TestFunction, grid: &[f64]) -> Result<Self> {
        if grid.first() != Some(&1.0) {
            return Err(domain("X is anchored at t = 1; the grid must start there"));
        }
        for w in grid.windows(2) {
            if !(w[1] < w[0] && w[1] > 0.0) {
                return Err(domain("time grid must be strictly decreasing in (0, 1]"));
            }
        }
        let deepest = grid[grid.len() - 1];
        for &j in f.jumps() {
            if j > deepest && j < 1.0 && !grid.iter().any(|&t| near(t, j)) {
                return Err(Error::MissingJump(j));
            }
        }
        let green = f.green();
        let mut weights = vec![0.0];
        for w in grid.windows(2) {
            let dg = green.value(w[1]) - green.value(w[0]);
            let weight = if dg > 0.0 {
                f.integral_between(w[1], w[0]) / dg
            } else {
                f.value(w[0])
            };
            weights.push(weight);
        }
        let sigma = grid.iter().map(|&t| f.sigma_value(t)).collect();
        Ok(Integrator { nu: f.nu(), grid: grid.to_vec(), weights, sigma })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// X on the grid from theta-bar on (a prefix of) the grid.
    pub fn x_values(&self, theta: &[f64]) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(theta.len());
        out.push(0.0);
        for k in 1..theta.len() {
            acc += self.weights[k] * (theta[k] - theta[k - 1]);
            out.push(acc);
        }
        out
    }

    pub fn path(&self, theta: &[f64]) -> Result<SteepPath> {
        if theta.len() != self.grid.len() {
            return Err(domain(format!("{} field values for a grid of {}", theta.len(), self.grid.len())));
        }
        let x = self.x_values(theta);
        let points = (0..theta.len()).map(|k| PathPoint { t: self.grid[k], x: x[k], sigma: self.sigma[k] }).collect();
        Ok(SteepPath { nu: self.nu, points })
    }
}

/// X along a grid from the field values theta-bar_t on that grid.
pub fn compute_x(theta: &[f64], grid: &[f64], f: &TestFunction) -> Result<SteepPath> {
    Integrator::new(f, grid)?.path(theta)
}

/// X_t / Sigma_t.
pub fn ratio(path: &SteepPath, t: f64) -> Result<f64> {
    let p = path
        .point_at(t)
        .ok_or_else(|| domain(format!("t = {t} is not on the path grid")))?;
    if !(p.sigma > 0.0) {
        return Err(Error::UndefinedRatio(format!("Sigma_t = {} at t = {t}", p.sigma)));
    }
    Ok(p.x / p.sigma)
}

/// Grid refining a schedule: `substeps` points per scale interval, equally
/// spaced in G, plus every jump of f in range.
pub fn fine_grid(f: &TestFunction, schedule: &ScaleSchedule, substeps: usize) -> Result<Vec<f64>> {
    if substeps == 0 {
        return Err(domain("need at least one sub-step"));
    }
    let green = f.green();
    let mut grid = vec![1.0];
    for w in schedule.values().windows(2) {
        let (g0, g1) = (green.value(w[0]), green.value(w[1]));
        for k in 1..substeps {
            let u = g0 + (g1 - g0) * k as f64 / substeps as f64;
            grid.push(green.inverse(u)?.clamp(w[1], w[0]));
        }
        grid.push(w[1]);
    }
    let deepest = schedule.t(schedule.depth());
    grid.extend(f.jumps().iter().copied().filter(|&j| j > deepest && j < 1.0));
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup_by(|a, b| near(*a, *b));
    // keep exact schedule values after dedup
    for &t in schedule.values() {
        if let Some(g) = grid.iter_mut().find(|g| near(**g, t)) {
            *g = t;
        }
    }
    Ok(grid)
}

/// Tube events along a path sampled on a grid containing the schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    /// p[n-1]: the tube event at level n.
    pub p: Vec<bool>,
    /// phi[n-1]: p at every level up to n.
    pub phi: Vec<bool>,
    pub substeps: Vec<usize>,
    pub warnings: Vec<String>,
}

/// P_n: |X_t - X_{t_{n-1}} - sqrt(2 nu)(Sigma_t - Sigma_{t_{n-1}})| <= sqrt(Delta Sigma_n)
/// for every grid point t in [t_n, t_{n-1}].
pub fn detect_events(path: &SteepPath, schedule: &ScaleSchedule) -> Result<EventReport> {
    detect_events_with(path, schedule, DEFAULT_SUBSTEPS)
}

pub fn detect_events_with(path: &SteepPath, schedule: &ScaleSchedule, min_substeps: usize) -> Result<EventReport> {
    let target = steep_target(path.nu);
    let position = |t: f64| {
        path.points
            .iter()
            .position(|p| p.t == t)
            .ok_or_else(|| domain(format!("schedule radius {t} is not on the path grid")))
    };
    let mut report = EventReport { p: vec![], phi: vec![], substeps: vec![], warnings: vec![] };
    let mut start = position(schedule.t(0))?;
    for n in 1..=schedule.depth() {
        let end = position(schedule.t(n))?;
        let base = path.points[start];
        let width = (path.points[end].sigma - base.sigma).max(0.0).sqrt();
        let held = path.points[start..=end]
            .iter()
            .all(|p| (p.x - base.x - target * (p.sigma - base.sigma)).abs() <= width);
        let steps = end - start;
        if steps < min_substeps {
            report.warnings.push(format!("level {n}: {steps} sub-steps < {min_substeps}; sup is coarse"));
        }
        let prev = report.phi.last().copied().unwrap_or(true);
        report.p.push(held);
        report.phi.push(prev && held);
        report.substeps.push(steps);
        start = end;
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
