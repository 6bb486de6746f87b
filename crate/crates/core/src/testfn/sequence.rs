use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::specfun::MAX_NEGLOG;

use super::TestFunction;

/// Strictly decreasing radii r_1 > r_2 > ... in (0, 1), stored as -ln r_n.
/// r_0 = 1 is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusSequence {
    neglog: Vec<f64>,
}

impl RadiusSequence {
    pub fn from_neglog(neglog: Vec<f64>) -> Result<Self> {
        if neglog.is_empty() {
            return Err(domain("radius sequence is empty"));
        }
        for (i, &l) in neglog.iter().enumerate() {
            if !(l > 0.0 && l <= MAX_NEGLOG) {
                return Err(domain(format!("-ln r_{} = {l} outside (0, {MAX_NEGLOG}]", i + 1)));
            }
            if i > 0 && !(l > neglog[i - 1]) {
                return Err(Error::Sequence {
                    condition: "strictly decreasing".into(),
                    detail: format!("r_{} >= r_{}", i + 1, i),
                });
            }
        }
        Ok(RadiusSequence { neglog })
    }

    /// Accepts r_1, r_2, ...; a leading 1 is taken as r_0 and dropped.
    pub fn from_radii(radii: &[f64]) -> Result<Self> {
        let body = match radii.first() {
            Some(1.0) => &radii[1..],
            _ => radii,
        };
        for &r in body {
            if !(r > 0.0 && r < 1.0) {
                return Err(domain(format!("radius {r} outside (0, 1)")));
            }
        }
        RadiusSequence::from_neglog(body.iter().map(|r| -r.ln()).collect())
    }

    /// -ln r_n = deepest (n! / len!)^2 for n = 1..=len, so n (-ln r_{n-1}) / (-ln r_n) = 1/n.
    pub fn factorial_squared(len: usize, deepest: f64) -> Result<Self> {
        let mut fact = vec![1.0f64];
        for n in 1..=len {
            fact.push(fact[n - 1] * n as f64);
        }
        let top = fact[len] * fact[len];
        RadiusSequence::from_neglog((1..=len).map(|n| deepest * fact[n] * fact[n] / top).collect())
    }

    pub fn neglog(&self) -> &[f64] {
        &self.neglog
    }

    pub fn radii(&self) -> Vec<f64> {
        self.neglog.iter().map(|l| (-l).exp()).collect()
    }

    pub fn len(&self) -> usize {
        self.neglog.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neglog.is_empty()
    }

    /// -ln r_n with the convention r_0 = 1.
    pub fn neglog_at(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.neglog[n - 1]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceKind {
    /// n (-ln r_{n-1}) / (-ln r_n) -> 0
    FastDecay,
    /// m / Sigma_{r_m} -> 0 and Sigma_{r_{m+1}} / Sigma_{r_m} -> 1
    Ratio,
}

/// One defining ratio evaluated along the prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceCondition {
    pub name: String,
    pub target: f64,
    /// (index, value) pairs
    pub values: Vec<(usize, f64)>,
    /// Slope of ln|value - target| against ln(index) over the prefix.
    pub decay_exponent: f64,
    /// Distance to the target never grows over the second half of the prefix.
    pub monotone: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub kind: SequenceKind,
    pub conditions: Vec<SequenceCondition>,
}

impl SequenceReport {
    pub fn holds(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.conditions.iter().filter(|c| !c.holds).map(|c| c.name.as_str()).collect()
    }
}

/// Decay faster than index^-0.5 counts as convergence on a finite prefix.
const DECAY_THRESHOLD: f64 = -0.5;

fn trend(name: &str, target: f64, values: Vec<(usize, f64)>) -> SequenceCondition {
    let devs: Vec<(f64, f64)> = values
        .iter()
        .map(|&(i, v)| ((i as f64).ln(), (v - target).abs()))
        .collect();
    let exact = devs.iter().all(|&(_, d)| d == 0.0);
    let half = devs.len() / 2;
    let monotone = devs[half..].windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12));
    let fit: Vec<(f64, f64)> = devs.iter().filter(|d| d.1 > 0.0).map(|&(x, d)| (x, d.ln())).collect();
    let decay_exponent = if exact {
        f64::NEG_INFINITY
    } else if fit.len() < 2 {
        f64::NAN
    } else {
        let n = fit.len() as f64;
        let mx = fit.iter().map(|p| p.0).sum::<f64>() / n;
        let my = fit.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = fit.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    };
    let holds = monotone && (exact || decay_exponent <= DECAY_THRESHOLD);
    SequenceCondition { name: name.into(), target, values, decay_exponent, monotone, holds }
}

/// Evaluates the defining ratios of a sequence condition along a finite prefix
/// and reports whether each one trends to its limit.
pub fn check_sequence(kind: SequenceKind, radii: &[f64], f: Option<&TestFunction>) -> Result<SequenceReport> {
    let seq = RadiusSequence::from_radii(radii)?;
    check_sequence_neglog(kind, &seq, f)
}

pub fn check_sequence_neglog(kind: SequenceKind, seq: &RadiusSequence, f: Option<&TestFunction>) -> Result<SequenceReport> {
    let conditions = match kind {
        SequenceKind::FastDecay => {
            if seq.len() < 3 {
                return Err(Error::InsufficientData("fast-decay check needs at least 3 radii".into()));
            }
            // n = 1 is identically 0 because r_0 = 1
            let values = (2..=seq.len())
                .map(|n| (n, n as f64 * seq.neglog_at(n - 1) / seq.neglog_at(n)))
                .collect();
            vec![trend("n(-ln r_{n-1})/(-ln r_n) -> 0", 0.0, values)]
        }
        SequenceKind::Ratio => {
            let f = f.ok_or_else(|| domain("ratio condition needs a test function"))?;
            if seq.len() < 3 {
                return Err(Error::InsufficientData("ratio check needs at least 3 radii".into()));
            }
            let sigma: Vec<f64> = seq.neglog.iter().map(|&l| f.sigma_neglog(l)).collect();
            if let Some(m) = sigma.iter().position(|&s| !(s > 0.0)) {
                return Err(Error::Sequence {
                    condition: "Sigma_{r_m} > 0".into(),
                    detail: format!("Sigma vanishes at m = {}", m + 1),
                });
            }
            let first = (1..=seq.len()).map(|m| (m, m as f64 / sigma[m - 1])).collect();
            let second = (1..seq.len()).map(|m| (m, sigma[m] / sigma[m - 1])).collect();
            vec![
                trend("m / Sigma_{r_m} -> 0", 0.0, first),
                trend("Sigma_{r_{m+1}} / Sigma_{r_m} -> 1", 1.0, second),
            ]
        }
    };
    Ok(SequenceReport { kind, conditions })
}
