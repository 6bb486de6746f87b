use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

use super::TestFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: char,
    pub description: String,
    pub holds: bool,
    /// Where the condition first failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub t_min: f64,
    pub conditions: Vec<ConditionCheck>,
}

impl ClassReport {
    pub fn valid(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    pub fn get(&self, condition: char) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.condition == condition)
    }
}

fn check(condition: char, description: &str, witness: Option<String>) -> ConditionCheck {
    ConditionCheck { condition, description: description.into(), holds: witness.is_none(), witness }
}

/// Radii 2^-k down to t_min plus every breakpoint in range, decreasing.
fn probe_grid(f: &TestFunction, t_min: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = Vec::new();
    let mut t = 1.0;
    while t >= t_min {
        grid.push(t);
        t *= 0.5;
    }
    grid.push(t_min);
    for s in f.segments() {
        if s.lo >= t_min {
            grid.push(s.lo);
            // just inside the upper piece, where |f| is largest on it
            let inner = s.lo * (1.0 + 1e-9);
            if inner < s.hi {
                grid.push(inner);
            }
        }
    }
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    grid
}

/// Checks the four class conditions on a grid down to `t_min`.
pub fn validate_class_c(f: &TestFunction, t_min: f64) -> Result<ClassReport> {
    if !(t_min > 0.0 && t_min < 1.0) {
        return Err(domain(format!("t_min = {t_min} outside (0, 1)")));
    }
    let green = f.green();
    let cert = f.cert();
    let grid = probe_grid(f, t_min);
    let bound = |t: f64| cert.cf * ((-t.ln()).powf(cert.rho) + 1.0);

    let growth = grid.iter().find_map(|&t| {
        let size = (f.value(t) * green.value(t).sqrt()).abs();
        (!(size <= bound(t))).then(|| format!("|f sqrt(G)| = {size:.6e} > {:.6e} at t = {t:e}", bound(t)))
    });

    let jumps_in = |t: f64| f.jumps().iter().filter(|&&j| j >= t).count() as f64;
    let mut jump_probe: Vec<f64> = f.jumps().iter().copied().filter(|&j| j >= t_min).collect();
    jump_probe.extend(&grid);
    let jumps = jump_probe.iter().find_map(|&t| {
        let count = jumps_in(t);
        (count > bound(t)).then(|| format!("{count} jumps in [{t:e}, 1] > {:.6e}", bound(t)))
    });

    let monotone = f.segments().iter().enumerate().find_map(|(i, s)| {
        if s.hi < t_min {
            return None;
        }
        let lo = s.lo.max(t_min);
        let (l_hi, l_lo) = (-s.hi.ln(), -lo.ln());
        let n = 64;
        let mut prev: Option<(f64, f64)> = None;
        // walk from the outer end inward; |f| may only shrink
        for k in 0..n {
            let l = l_hi + (l_lo - l_hi) * k as f64 / (n - 1) as f64;
            let t = (-l).exp().min(s.hi);
            if t <= s.lo {
                continue;
            }
            let v = s.eval.eval(green, t).abs();
            if let Some((pt, pv)) = prev {
                if v > pv * (1.0 + 1e-12) + 1e-300 {
                    return Some(format!("segment {i}: |f({t:e})| = {v:.6e} exceeds |f({pt:e})| = {pv:.6e}"));
                }
            }
            prev = Some((t, v));
        }
        None
    });

    let sigmas: Vec<(f64, f64)> = grid.iter().map(|&t| (t, f.sigma_value(t))).collect();
    let mut divergence = sigmas
        .windows(2)
        .find(|w| w[1].1 < w[0].1 * (1.0 - 1e-12) - 1e-300)
        .map(|w| format!("Sigma decreases from {:.6e} at t = {:e} to {:.6e} at t = {:e}", w[0].1, w[0].0, w[1].1, w[1].0));
    if divergence.is_none() {
        let deepest = sigmas[sigmas.len() - 1].1;
        let mid = f.sigma_value(t_min.sqrt());
        if !(deepest > 0.0) {
            divergence = Some(format!("Sigma({t_min:e}) = {deepest:e} is not positive"));
        } else if !(deepest > mid) {
            divergence = Some(format!("Sigma stalls: {mid:e} at sqrt(t_min), {deepest:e} at t_min"));
        }
    }

    Ok(ClassReport {
        t_min,
        conditions: vec![
            check('a', "|f(t) sqrt(G(t))| <= C_f[(-ln t)^rho_f + 1]", growth),
            check('b', "#(jumps in [t, 1]) <= C_f[(-ln t)^rho_f + 1]", jumps),
            check('c', "|f| non-decreasing in t on each piece", monotone),
            check('d', "Sigma_t increases without bound as t -> 0", divergence),
        ],
    })
}
