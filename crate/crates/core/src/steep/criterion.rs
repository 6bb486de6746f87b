use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::sampler::{FieldReplica, ScaleSchedule};
use crate::testfn::TestFunction;

use super::{steep_target, Integrator, SetMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriterionKind {
    /// Every ratio X/Sigma in the window lies in the band around sqrt(2 nu).
    Steep,
    /// Some ratio in the window reaches sqrt(2 nu)(1 - a).
    SuperSteep,
    /// Every ratio in the window reaches sqrt(2 nu)(1 - a).
    SubSteep,
    /// Ratios at the sequence radii inside the window lie in the band.
    Sequential { radii: Vec<f64> },
    /// nu = 2: (theta_t - theta_1) / (2 pi (G(t) - G(1))) in the band around gamma / pi.
    #[serde(rename = "thick2d")]
    Thick2d { gamma: f64 },
    /// nu >= 3: theta_t / sqrt(-G(t) ln t) reaches sqrt(2 nu) gamma (1 - a) in the window.
    ThickPoly { gamma: f64 },
    /// nu >= 3: theta_t / sqrt(-G(t) ln t) in the band around sqrt(2 nu) gamma at the sequence radii.
    SeqThick { gamma: f64, radii: Vec<f64> },
    /// Both one-sided thick levels, +gamma1 and -gamma2, are hit in the window.
    Oscillatory { gamma1: f64, gamma2: f64 },
    /// nu >= 3: the G-measure of window levels with theta_t / sqrt(-G ln t) >=
    /// sqrt(2 nu) gamma (1 - a), divided by G(t), is at least `fraction`.
    Lasting { gamma: f64, fraction: f64 },
}

/// A finite-depth criterion: kind, band a and window of trailing levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    #[serde(flatten)]
    pub kind: CriterionKind,
    pub band: f64,
    /// Number of trailing levels examined; the deeper half when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

impl Criterion {
    pub fn new(kind: CriterionKind, band: f64) -> Self {
        Criterion { kind, band, window: None }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            CriterionKind::Steep => "steep",
            CriterionKind::SuperSteep => "super_steep",
            CriterionKind::SubSteep => "sub_steep",
            CriterionKind::Sequential { .. } => "sequential",
            CriterionKind::Thick2d { .. } => "thick2d",
            CriterionKind::ThickPoly { .. } => "thick_poly",
            CriterionKind::SeqThick { .. } => "seq_thick",
            CriterionKind::Oscillatory { .. } => "oscillatory",
            CriterionKind::Lasting { .. } => "lasting",
        }
    }

    /// Fraction 1 - (gamma'' / gamma')^2 with gamma'' = (gamma + gamma') / 2.
    pub fn lasting_fraction(gamma: f64, gamma_prime: f64) -> f64 {
        let mid = 0.5 * (gamma + gamma_prime);
        1.0 - (mid / gamma_prime).powi(2)
    }

    /// Level the statistic is compared to for this kind in dimension nu.
    pub fn target(&self, nu: u32) -> f64 {
        let root = steep_target(nu);
        match self.kind {
            CriterionKind::Thick2d { gamma } => gamma / PI,
            CriterionKind::ThickPoly { gamma }
            | CriterionKind::SeqThick { gamma, .. }
            | CriterionKind::Lasting { gamma, .. } => root * gamma,
            CriterionKind::Oscillatory { gamma1, .. } => {
                if nu == 2 { gamma1 / PI } else { root * gamma1 }
            }
            _ => root,
        }
    }

    pub fn validate(&self, nu: u32) -> Result<()> {
        if !(self.band > 0.0 && self.band < 1.0) {
            return Err(domain(format!("band a = {} outside (0, 1)", self.band)));
        }
        if self.window == Some(0) {
            return Err(domain("window must hold at least one level"));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() { Ok(()) } else { Err(domain(format!("{name} = {v} must be positive"))) }
        };
        let needs_poly = |what: &str| {
            if nu >= 3 { Ok(()) } else { Err(Error::Incompatible(format!("{what} needs nu >= 3, got nu = {nu}"))) }
        };
        match &self.kind {
            CriterionKind::Thick2d { gamma } => {
                positive("gamma", *gamma)?;
                if nu != 2 {
                    return Err(Error::Incompatible(format!("thick2d needs nu = 2, got nu = {nu}")));
                }
            }
            CriterionKind::ThickPoly { gamma } => {
                positive("gamma", *gamma)?;
                needs_poly("thick_poly")?;
            }
            CriterionKind::SeqThick { gamma, .. } => {
                positive("gamma", *gamma)?;
                needs_poly("seq_thick")?;
            }
            CriterionKind::Oscillatory { gamma1, gamma2 } => {
                positive("gamma1", *gamma1)?;
                positive("gamma2", *gamma2)?;
            }
            CriterionKind::Lasting { gamma, fraction } => {
                positive("gamma", *gamma)?;
                needs_poly("lasting")?;
                if !(*fraction > 0.0 && *fraction <= 1.0) {
                    return Err(domain(format!("lasting fraction {fraction} outside (0, 1]")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Levels examined at depth n, as (first, last).
    fn window_at(&self, n: usize) -> (usize, usize) {
        let w = self.window.unwrap_or(n.div_ceil(2)).max(1);
        ((n + 1).saturating_sub(w).max(1), n)
    }
}

/// Schedule levels hit by a radius sequence; radii deeper than the schedule are ignored.
fn sequence_levels(radii: &[f64], schedule: &ScaleSchedule) -> Result<Vec<bool>> {
    let mut on = vec![false; schedule.depth() + 1];
    let deepest = schedule.t(schedule.depth());
    for &r in radii {
        if r < deepest * (1.0 - 1e-9) || r == 1.0 {
            continue;
        }
        let level = schedule
            .values()
            .iter()
            .position(|&t| (t - r).abs() <= 1e-9 * t)
            .ok_or_else(|| domain(format!("sequence radius {r} is not a schedule radius")))?;
        on[level] = true;
    }
    Ok(on)
}

/// Per-level quantities shared by every cell.
struct Prepared {
    nu: u32,
    integrator: Integrator,
    green_g: Vec<f64>,
    neglog: Vec<f64>,
    sequence: Vec<bool>,
}

impl Prepared {
    fn thick_poly(&self, theta: &[f64], k: usize) -> f64 {
        theta[k] / (self.green_g[k] * self.neglog[k]).sqrt()
    }

    fn thick_log(&self, theta: &[f64], k: usize) -> f64 {
        (theta[k] - theta[0]) / (2.0 * PI * (self.green_g[k] - self.green_g[0]))
    }

    fn thick_stat(&self, theta: &[f64], k: usize) -> f64 {
        if self.nu == 2 { self.thick_log(theta, k) } else { self.thick_poly(theta, k) }
    }
}

fn in_band(v: f64, target: f64, a: f64) -> bool {
    v >= target * (1.0 - a) && v <= target * (1.0 + a)
}

fn flag(c: &Criterion, p: &Prepared, theta: &[f64]) -> bool {
    let n = theta.len() - 1;
    if n == 0 {
        return false;
    }
    let (lo, hi) = c.window_at(n);
    let levels = lo..=hi;
    let a = c.band;
    let target = c.target(p.nu);
    let floor = target * (1.0 - a);
    let ratios = || {
        let x = p.integrator.x_values(theta);
        let sigma = p.integrator.sigma();
        move |k: usize| if sigma[k] > 0.0 { x[k] / sigma[k] } else { f64::NAN }
    };
    match &c.kind {
        CriterionKind::Steep => {
            let r = ratios();
            levels.clone().all(|k| in_band(r(k), target, a))
        }
        CriterionKind::SubSteep => {
            let r = ratios();
            levels.clone().all(|k| r(k) >= floor)
        }
        CriterionKind::SuperSteep => {
            let r = ratios();
            levels.clone().any(|k| r(k) >= floor)
        }
        CriterionKind::Sequential { .. } => {
            let r = ratios();
            let mut seq = levels.clone().filter(|&k| p.sequence[k]).peekable();
            seq.peek().is_some() && seq.all(|k| in_band(r(k), target, a))
        }
        CriterionKind::Thick2d { .. } => levels.clone().all(|k| in_band(p.thick_log(theta, k), target, a)),
        CriterionKind::ThickPoly { .. } => levels.clone().any(|k| p.thick_poly(theta, k) >= floor),
        CriterionKind::SeqThick { .. } => {
            let mut seq = levels.clone().filter(|&k| p.sequence[k]).peekable();
            seq.peek().is_some() && seq.all(|k| in_band(p.thick_poly(theta, k), target, a))
        }
        CriterionKind::Oscillatory { gamma1, gamma2 } => {
            let scale = if p.nu == 2 { 1.0 / PI } else { steep_target(p.nu) };
            let up = gamma1 * scale * (1.0 - a);
            let down = -gamma2 * scale * (1.0 - a);
            levels.clone().any(|k| p.thick_stat(theta, k) >= up) && levels.clone().any(|k| p.thick_stat(theta, k) <= down)
        }
        CriterionKind::Lasting { fraction, .. } => {
            let time: f64 = levels
                .clone()
                .filter(|&k| p.thick_poly(theta, k) >= floor)
                .map(|k| p.green_g[k] - p.green_g[k - 1])
                .sum();
            time > 0.0 && time / p.green_g[n] >= *fraction
        }
    }
}

/// Flags every cell of every level of a replica under a finite-depth criterion.
/// A cell at level n is judged on the field values along its ancestry.
pub fn detect_mask(replica: &FieldReplica, f: &TestFunction, criterion: &Criterion) -> Result<SetMask> {
    if f.nu() != replica.nu {
        return Err(Error::Incompatible(format!("test function has nu = {}, replica nu = {}", f.nu(), replica.nu)));
    }
    criterion.validate(replica.nu)?;
    let schedule = &replica.schedule;
    let integrator = Integrator::new(f, schedule.values())?;
    let green = f.green();
    let radii = match &criterion.kind {
        CriterionKind::Sequential { radii } | CriterionKind::SeqThick { radii, .. } => radii.as_slice(),
        _ => &[],
    };
    let prepared = Prepared {
        nu: replica.nu,
        integrator,
        green_g: schedule.values().iter().map(|&t| green.value(t)).collect(),
        neglog: schedule.values().iter().map(|&t| -t.ln()).collect(),
        sequence: sequence_levels(radii, schedule)?,
    };
    let lats = replica.lattices()?;
    let levels = (0..replica.levels.len())
        .map(|n| {
            (0..lats[n].len())
                .into_par_iter()
                .map(|j| flag(criterion, &prepared, &replica.lineage(&lats, n, j)))
                .collect()
        })
        .collect();
    Ok(SetMask {
        criterion: criterion.clone(),
        nu: replica.nu,
        schedule: schedule.clone(),
        seed: replica.seed,
        levels,
    })
}
