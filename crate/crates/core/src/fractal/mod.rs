//! Box counting, predicted dimension intervals, Frostman measures and their energy.

mod energy;
mod frostman;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::sampler::{csv_err, ScaleSchedule};
use crate::stats::fit_line;
use crate::steep::SetMask;
use crate::testfn::TestFunction;

pub use energy::CellKernel;
pub use frostman::cell_energy;
pub use frostman::{
    frostman_measure, phi_probability_mc, CellPaths, ConcentricSampler, FrostmanMeasure, FrostmanSummary,
    PhiWeight,
};

/// Number of flagged cells at every level.
pub fn box_count(mask: &SetMask) -> Vec<u64> {
    mask.counts().into_iter().map(|c| c as u64).collect()
}

/// Fewest nonzero counts a slope is fitted from.
pub const MIN_SCALES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleCount {
    pub t: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    /// Least-squares slope of ln N against ln(1/t).
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
    /// Normal 95% interval on the slope.
    pub ci95: [f64; 2],
    pub counts: Vec<ScaleCount>,
    /// Levels actually fitted (nonzero counts).
    pub fitted: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<Prediction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
}

impl DimensionEstimate {
    pub fn with_prediction(mut self, predicted: Prediction, band: Option<f64>) -> Self {
        self.predicted = Some(predicted);
        self.band = band;
        self
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        write_counts_csv(&self.counts, out)
    }
}

/// Slope of ln N(t_n) against ln(1/t_n) over the levels with N > 0.
pub fn fit_dimension(counts: &[u64], schedule: &ScaleSchedule) -> Result<DimensionEstimate> {
    if counts.len() > schedule.values().len() {
        return Err(domain(format!("{} counts for a schedule of depth {}", counts.len(), schedule.depth())));
    }
    let scales: Vec<ScaleCount> =
        counts.iter().enumerate().map(|(n, &count)| ScaleCount { t: schedule.t(n), count }).collect();
    fit_counts(&scales)
}

pub fn fit_counts(scales: &[ScaleCount]) -> Result<DimensionEstimate> {
    let used: Vec<&ScaleCount> = scales.iter().filter(|s| s.count > 0).collect();
    if used.len() < MIN_SCALES {
        return Err(Error::InsufficientData(format!(
            "{} nonzero counts; a slope needs at least {MIN_SCALES}",
            used.len()
        )));
    }
    for s in &used {
        if !(s.t > 0.0 && s.t <= 1.0) {
            return Err(domain(format!("scale {} outside (0, 1]", s.t)));
        }
    }
    let xs: Vec<f64> = used.iter().map(|s| -s.t.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|s| (s.count as f64).ln()).collect();
    let fit = fit_line(&xs, &ys);
    Ok(DimensionEstimate {
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        slope_se: fit.slope_se,
        ci95: [fit.slope - 1.96 * fit.slope_se, fit.slope + 1.96 * fit.slope_se],
        counts: scales.to_vec(),
        fitted: used.len(),
        predicted: None,
        band: None,
    })
}

/// Columns scale, count, log_count (empty for zero counts).
pub fn write_counts_csv(scales: &[ScaleCount], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scale", "count", "log_count"]).map_err(csv_err)?;
    for s in scales {
        let log = if s.count > 0 { format!("{}", (s.count as f64).ln()) } else { String::new() };
        w.write_record([format!("{}", s.t), s.count.to_string(), log]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_counts_csv(input: impl Read) -> Result<Vec<ScaleCount>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("count CSV lacks a {name} column")))
    };
    let (ts, cs) = (col("scale")?, col("count")?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let t = rec[ts].trim().parse::<f64>().map_err(|e| Error::Format(format!("scale {:?}: {e}", &rec[ts])))?;
        let count =
            rec[cs].trim().parse::<u64>().map_err(|e| Error::Format(format!("count {:?}: {e}", &rec[cs])))?;
        out.push(ScaleCount { t, count });
    }
    Ok(out)
}

/// Exceptional sets with a predicted dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetKind {
    /// ratio converges to sqrt(2 nu)
    Steep,
    /// liminf of the ratio reaches sqrt(2 nu)
    SubSteep,
    /// limsup of the ratio reaches sqrt(2 nu)
    SuperSteep,
    /// convergence along a radius sequence; `ratio_condition` says whether
    /// the sequence satisfies the Sigma-ratio condition
    Sequential { ratio_condition: bool },
    Thick { gamma: f64 },
    Oscillatory { gamma1: f64, gamma2: f64 },
    Lasting { gamma: f64 },
}

/// A (lower, upper) dimension interval or the empty set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Prediction {
    Empty { formula: String },
    Interval { lower: f64, upper: f64, formula: String },
}

impl Prediction {
    pub fn is_empty(&self) -> bool {
        matches!(self, Prediction::Empty { .. })
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Prediction::Empty { .. } => None,
            Prediction::Interval { lower, upper, .. } => Some((lower, upper)),
        }
    }

    pub fn formula(&self) -> &str {
        match self {
            Prediction::Empty { formula } | Prediction::Interval { formula, .. } => formula,
        }
    }
}

fn interval(lower: f64, upper: f64, formula: impl Into<String>) -> Prediction {
    Prediction::Interval { lower, upper, formula: formula.into() }
}

fn empty(formula: impl Into<String>) -> Prediction {
    Prediction::Empty { formula: formula.into() }
}

/// Dimension interval for an exceptional set of f.
///
/// Lower bounds are reported as the formula gives them and may be negative,
/// in which case they say nothing. Where only an upper bound is known the
/// lower entry is 0.
pub fn predicted_dimension(f: &TestFunction, kind: SetKind) -> Result<Prediction> {
    let nu = f.nu() as f64;
    let cert = || {
        f.ratio_cert().ok_or_else(|| {
            Error::MissingCertificate("the test function has no limsup/liminf certificate for Sigma_t/(-ln t)".into())
        })
    };
    let gamma_ok = |g: f64| {
        if g.is_finite() && g >= 0.0 {
            Ok(())
        } else {
            Err(domain(format!("gamma = {g} must be finite and non-negative")))
        }
    };
    Ok(match kind {
        SetKind::Steep | SetKind::SubSteep => {
            let c = cert()?;
            if c.upper > 1.0 {
                empty("empty when limsup c > 1")
            } else if c.lower > 0.0 {
                interval(nu * (1.0 - c.upper) - nu * (c.upper - c.lower), nu * (1.0 - c.upper), "nu(1 - 2 c_sup + c_inf) to nu(1 - c_sup)")
            } else {
                interval(0.0, nu * (1.0 - c.upper), "upper bound nu(1 - c_sup) only")
            }
        }
        SetKind::SuperSteep => {
            let c = cert()?;
            if c.lower > 1.0 {
                empty("empty when liminf c > 1")
            } else if c.lower > 0.0 {
                interval(nu * (1.0 - c.lower) - 2.0 * nu * (c.upper - c.lower), nu * (1.0 - c.lower), "nu(1 - 2 c_sup + c_inf) to nu(1 - c_inf)")
            } else {
                interval(0.0, nu, "no bound below nu when c_inf = 0")
            }
        }
        SetKind::Sequential { ratio_condition } => {
            let c = cert()?;
            if c.lower > 1.0 {
                empty("empty when liminf c > 1")
            } else if ratio_condition && c.upper <= 1.0 {
                let d = nu * (1.0 - c.upper);
                interval(d, d, "nu(1 - c_sup) under the ratio condition")
            } else if c.lower > 0.0 {
                interval(nu * (1.0 - c.lower) - 2.0 * nu * (c.upper - c.lower), nu * (1.0 - c.lower), "contained in the limsup set")
            } else {
                interval(0.0, nu, "no bound below nu when c_inf = 0")
            }
        }
        SetKind::Thick { gamma } => {
            gamma_ok(gamma)?;
            let g2 = gamma * gamma;
            if f.nu() == 2 {
                if g2 > 2.0 * std::f64::consts::PI {
                    empty("empty when gamma^2 > 2 pi")
                } else {
                    let d = 2.0 - g2 / std::f64::consts::PI;
                    interval(d, d, "2 - gamma^2 / pi")
                }
            } else if g2 > 1.0 {
                empty("empty when gamma > 1")
            } else {
                interval(0.0, nu * (1.0 - g2), "upper bound nu(1 - gamma^2) only")
            }
        }
        SetKind::Oscillatory { gamma1, gamma2 } => {
            gamma_ok(gamma1)?;
            gamma_ok(gamma2)?;
            let m2 = gamma1.max(gamma2).powi(2);
            if f.nu() == 2 {
                if m2 > 2.0 * std::f64::consts::PI {
                    empty("empty when max(gamma1, gamma2)^2 > 2 pi")
                } else if gamma1 == gamma2 {
                    let d = 2.0 - m2 / std::f64::consts::PI;
                    interval(d, d, "2 - gamma^2 / pi")
                } else {
                    interval(0.0, 2.0 - m2 / std::f64::consts::PI, "upper bound 2 - max(gamma1, gamma2)^2 / pi only")
                }
            } else if m2 > 1.0 {
                empty("empty when max(gamma1, gamma2) > 1")
            } else {
                interval(nu * (1.0 - m2) - nu * m2, nu * (1.0 - m2), "nu(1 - 2 m^2) to nu(1 - m^2), m = max(gamma1, gamma2)")
            }
        }
        SetKind::Lasting { gamma } => {
            gamma_ok(gamma)?;
            if f.nu() < 3 {
                return Err(Error::Incompatible("lasting thick points are defined for nu >= 3".into()));
            }
            let g2 = gamma * gamma;
            if g2 > 1.0 {
                empty("empty when gamma > 1")
            } else {
                interval(nu * (1.0 - 2.0 * g2), nu * (1.0 - g2), "nu(1 - 2 gamma^2) to nu(1 - gamma^2)")
            }
        }
    })
}

/// Count-scaling slope for cells whose ratio reaches sqrt(2 nu)(1 - a):
/// N(t) grows like t^-(nu - nu c (1 - a)^2) with c = limsup Sigma_t / (-ln t).
pub fn band_adjusted_slope(f: &TestFunction, band: f64) -> Result<(f64, String)> {
    if !(0.0..1.0).contains(&band) {
        return Err(domain(format!("band a = {band} outside [0, 1)")));
    }
    let c = f
        .ratio_cert()
        .ok_or_else(|| Error::MissingCertificate("band-adjusted slope needs the ratio certificate".into()))?;
    let nu = f.nu() as f64;
    let slope = nu * (1.0 - c.upper * (1.0 - band).powi(2));
    Ok((slope, format!("nu (1 - c (1 - a)^2) with nu = {nu}, c = {}, a = {band}", c.upper)))
}

#[cfg(test)]
mod tests;
