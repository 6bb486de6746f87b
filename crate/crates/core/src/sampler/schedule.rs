use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Deepest paper-schedule level whose radius 2^{-n^2} is a normal f64.
pub const PAPER_MAX_DEPTH: usize = 31;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    /// t_n = 2^{-n^2}
    Paper { depth: usize },
    /// t_n = base^{-n}
    Geometric { base: f64, depth: usize },
    /// t_0 = 1 > t_1 > ... > t_N > 0
    Custom { values: Vec<f64> },
}

/// Radii t_0 = 1 > t_1 > ... > t_N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleSpec", into = "ScheduleSpec")]
pub struct ScaleSchedule {
    spec: ScheduleSpec,
    values: Vec<f64>,
}

impl TryFrom<ScheduleSpec> for ScaleSchedule {
    type Error = Error;

    fn try_from(spec: ScheduleSpec) -> Result<Self> {
        let values = match &spec {
            ScheduleSpec::Paper { depth } => {
                if *depth > PAPER_MAX_DEPTH {
                    return Err(domain(format!("paper schedule depth {depth} > {PAPER_MAX_DEPTH}")));
                }
                (0..=*depth as i32).map(|n| 2f64.powi(-n * n)).collect()
            }
            ScheduleSpec::Geometric { base, depth } => {
                if !(*base > 1.0 && base.is_finite()) {
                    return Err(domain(format!("geometric base {base} must exceed 1")));
                }
                let v: Vec<f64> = (0..=*depth as i32).map(|n| base.powi(-n)).collect();
                if !(v[*depth] >= f64::MIN_POSITIVE) {
                    return Err(domain(format!("{base}^-{depth} underflows")));
                }
                v
            }
            ScheduleSpec::Custom { values } => values.clone(),
        };
        if values.first() != Some(&1.0) {
            return Err(domain("schedule must start at t_0 = 1"));
        }
        for (n, w) in values.windows(2).enumerate() {
            if !(w[1] < w[0] && w[1] > 0.0) {
                return Err(domain(format!("schedule not strictly decreasing in (0, 1] at level {}", n + 1)));
            }
        }
        Ok(ScaleSchedule { spec, values })
    }
}

impl From<ScaleSchedule> for ScheduleSpec {
    fn from(s: ScaleSchedule) -> Self {
        s.spec
    }
}

impl ScaleSchedule {
    pub fn paper(depth: usize) -> Result<Self> {
        ScheduleSpec::Paper { depth }.try_into()
    }

    pub fn geometric(base: f64, depth: usize) -> Result<Self> {
        ScheduleSpec::Geometric { base, depth }.try_into()
    }

    pub fn custom(values: Vec<f64>) -> Result<Self> {
        ScheduleSpec::Custom { values }.try_into()
    }

    pub fn spec(&self) -> &ScheduleSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// N, the deepest level.
    pub fn depth(&self) -> usize {
        self.values.len() - 1
    }

    pub fn t(&self, n: usize) -> f64 {
        self.values[n]
    }

    /// The schedule cut to levels 0..=depth.
    pub fn truncated(&self, depth: usize) -> Result<Self> {
        if depth > self.depth() {
            return Err(domain(format!("depth {depth} beyond schedule depth {}", self.depth())));
        }
        let spec = match &self.spec {
            ScheduleSpec::Paper { .. } => ScheduleSpec::Paper { depth },
            ScheduleSpec::Geometric { base, .. } => ScheduleSpec::Geometric { base: *base, depth },
            ScheduleSpec::Custom { values } => ScheduleSpec::Custom { values: values[..=depth].to_vec() },
        };
        spec.try_into()
    }
}
