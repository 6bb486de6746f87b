//! Test functions f, their clock Sigma_t = int_1^t f^2 dG and limit ratios.

pub mod builtins;
mod ratios;
mod sequence;
mod validate;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::adaptive;
use crate::specfun::{check_radius, Green};

pub use builtins::{max_depth, BuiltinInfo, BuiltinKind, RatioCert};
pub use ratios::{limit_ratios, RatioEstimate, AGREEMENT_TOL, SCHEDULE_DEPTH};
pub use sequence::{
    check_sequence, check_sequence_neglog, RadiusSequence, SequenceCondition, SequenceKind, SequenceReport,
};
pub use validate::{validate_class_c, ClassReport, ConditionCheck};

/// Closed-form piece of a test function on one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evaluator {
    /// f = value
    Constant { value: f64 },
    /// f = c / sqrt(G)
    InvSqrtG { c: f64 },
    /// f = value + eps / sqrt(G)
    ConstPlusInvSqrtG { value: f64, eps: f64 },
    /// f = scale (1 - ln t)^power
    LogPower { scale: f64, power: f64 },
    /// f = amplitude sin(frequency (-ln t)); used for counterexamples
    Oscillating { amplitude: f64, frequency: f64 },
}

impl Evaluator {
    pub fn eval(&self, green: &Green, t: f64) -> f64 {
        match *self {
            Evaluator::Constant { value } => value,
            Evaluator::InvSqrtG { c } => c / green.value(t).sqrt(),
            Evaluator::ConstPlusInvSqrtG { value, eps } => value + eps / green.value(t).sqrt(),
            Evaluator::LogPower { scale, power } => scale * (1.0 - t.ln()).powf(power),
            Evaluator::Oscillating { amplitude, frequency } => amplitude * (-frequency * t.ln()).sin(),
        }
    }

    /// int over (a, b] of f^2 dG, with 0 < a < b.
    fn sigma_piece(&self, green: &Green, a: f64, b: f64) -> f64 {
        if a >= b {
            return 0.0;
        }
        let (ga, gb) = (green.value(a), green.value(b));
        match *self {
            Evaluator::Constant { value } => value * value * (ga - gb),
            Evaluator::InvSqrtG { c } => c * c * (ga / gb).ln(),
            Evaluator::ConstPlusInvSqrtG { value, eps } => {
                value * value * (ga - gb) + 4.0 * value * eps * (ga.sqrt() - gb.sqrt()) + eps * eps * (ga / gb).ln()
            }
            _ => stieltjes_neglog(green, -b.ln(), -a.ln(), |t| {
                let f = self.eval(green, t);
                f * f
            }),
        }
    }

    /// int over (a, b] of f dG, with 0 < a < b.
    fn integral_piece(&self, green: &Green, a: f64, b: f64) -> f64 {
        if a >= b {
            return 0.0;
        }
        let (ga, gb) = (green.value(a), green.value(b));
        match *self {
            Evaluator::Constant { value } => value * (ga - gb),
            Evaluator::InvSqrtG { c } => 2.0 * c * (ga.sqrt() - gb.sqrt()),
            Evaluator::ConstPlusInvSqrtG { value, eps } => value * (ga - gb) + 2.0 * eps * (ga.sqrt() - gb.sqrt()),
            _ => stieltjes_neglog(green, -b.ln(), -a.ln(), |t| self.eval(green, t)),
        }
    }
}

/// int g dG over l = -ln t in [l0, l1], using dG/dl from the Wronskian.
fn stieltjes_neglog(green: &Green, l0: f64, l1: f64, f2: impl Fn(f64) -> f64) -> f64 {
    let pieces = ((l1 - l0).ceil() as usize).max(1);
    let h = (l1 - l0) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let a = l0 + k as f64 * h;
            adaptive(a, a + h, 0.0, 1e-11, |l: f64| f2((-l).exp()) * green.slope_neglog(l))
        })
        .sum()
}

/// One segment (lo, hi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    #[serde(flatten)]
    pub eval: Evaluator,
}

/// Growth certificate (C_f, rho_f).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCert {
    #[serde(rename = "Cf")]
    pub cf: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clock {
    pub t: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TestFunctionSpec {
    nu: u32,
    segments: Vec<Segment>,
    #[serde(default)]
    jumps: Vec<f64>,
    cert: GrowthCert,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    builtin: Option<BuiltinInfo>,
}

/// Piecewise description of f on (0, 1]. Construction checks the segment
/// structure; class conditions are checked by [`validate_class_c`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TestFunctionSpec", into = "TestFunctionSpec")]
pub struct TestFunction {
    nu: u32,
    segments: Vec<Segment>,
    jumps: Vec<f64>,
    cert: GrowthCert,
    builtin: Option<BuiltinInfo>,
    green: &'static Green,
    // Sigma at each segment's lower end
    cumulative: OnceLock<Vec<f64>>,
}

impl TryFrom<TestFunctionSpec> for TestFunction {
    type Error = Error;

    fn try_from(spec: TestFunctionSpec) -> Result<Self> {
        TestFunction::new(spec.nu, spec.segments, spec.jumps, spec.cert, spec.builtin)
    }
}

impl From<TestFunction> for TestFunctionSpec {
    fn from(f: TestFunction) -> Self {
        TestFunctionSpec { nu: f.nu, segments: f.segments, jumps: f.jumps, cert: f.cert, builtin: f.builtin }
    }
}

fn structure(msg: impl Into<String>) -> Error {
    Error::Structure(msg.into())
}

impl TestFunction {
    pub fn new(
        nu: u32,
        segments: Vec<Segment>,
        jumps: Vec<f64>,
        cert: GrowthCert,
        builtin: Option<BuiltinInfo>,
    ) -> Result<Self> {
        let green = Green::get(nu)?;
        if segments.is_empty() {
            return Err(structure("no segments"));
        }
        if segments[0].hi != 1.0 {
            return Err(structure(format!("first segment ends at {} instead of 1", segments[0].hi)));
        }
        let last = segments[segments.len() - 1];
        if last.lo != 0.0 {
            return Err(structure(format!("last segment starts at {} instead of 0", last.lo)));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.lo < s.hi) {
                return Err(structure(format!("segment {i} is empty: ({}, {}]", s.lo, s.hi)));
            }
            if i > 0 {
                let prev = segments[i - 1];
                if prev.lo > s.hi {
                    return Err(structure(format!("gap between {} and {}", s.hi, prev.lo)));
                }
                if prev.lo < s.hi {
                    return Err(structure(format!("segments overlap on ({}, {}]", prev.lo, s.hi)));
                }
            }
        }
        if !(cert.cf > 0.0 && cert.rho > 0.0) {
            return Err(structure("growth certificate needs Cf > 0 and rho > 0"));
        }
        for w in jumps.windows(2) {
            if !(w[0] > w[1]) {
                return Err(structure("jumps must be strictly decreasing"));
            }
        }
        let breaks: Vec<f64> = segments[..segments.len() - 1].iter().map(|s| s.lo).collect();
        for &j in &jumps {
            if !breaks.contains(&j) {
                return Err(structure(format!("jump {j} is not a segment breakpoint")));
            }
        }
        for (i, &b) in breaks.iter().enumerate() {
            let left = segments[i + 1].eval.eval(green, b);
            let right = segments[i].eval.eval(green, b);
            let scale = left.abs().max(right.abs()).max(1e-300);
            if (left - right).abs() > 1e-12 * scale && !jumps.contains(&b) {
                return Err(structure(format!("discontinuity at {b} missing from the jump list")));
            }
        }
        Ok(TestFunction { nu, segments, jumps, cert, builtin, green, cumulative: OnceLock::new() })
    }

    /// Single-segment function with no jumps.
    pub fn smooth(nu: u32, eval: Evaluator, cert: GrowthCert) -> Result<Self> {
        TestFunction::new(nu, vec![Segment { lo: 0.0, hi: 1.0, eval }], vec![], cert, None)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn cert(&self) -> GrowthCert {
        self.cert
    }

    pub fn builtin(&self) -> Option<&BuiltinInfo> {
        self.builtin.as_ref()
    }

    pub fn ratio_cert(&self) -> Option<RatioCert> {
        self.builtin.as_ref().map(|b| b.ratio)
    }

    pub fn green(&self) -> &'static Green {
        self.green
    }

    /// Whether every segment is constant, so X reduces to exact sums.
    pub fn is_piecewise_constant(&self) -> bool {
        self.segments.iter().all(|s| matches!(s.eval, Evaluator::Constant { .. }))
    }

    pub(crate) fn segment_index(&self, t: f64) -> usize {
        // segments decrease; find the one with lo < t <= hi
        self.segments.partition_point(|s| s.lo >= t).min(self.segments.len() - 1)
    }

    pub fn segment_at(&self, t: f64) -> &Segment {
        &self.segments[self.segment_index(t)]
    }

    pub fn value(&self, t: f64) -> f64 {
        self.segment_at(t).eval.eval(self.green, t)
    }

    fn cumulative(&self) -> &[f64] {
        self.cumulative.get_or_init(|| {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(self.segments.len());
            for s in &self.segments {
                if s.lo > 0.0 {
                    acc += s.eval.sigma_piece(self.green, s.lo, s.hi);
                    out.push(acc);
                } else {
                    out.push(f64::INFINITY);
                }
            }
            out
        })
    }

    /// Sigma_t without argument checks.
    pub fn sigma_value(&self, t: f64) -> f64 {
        if t >= 1.0 {
            return 0.0;
        }
        let i = self.segment_index(t);
        let base = if i == 0 { 0.0 } else { self.cumulative()[i - 1] };
        let s = &self.segments[i];
        base + s.eval.sigma_piece(self.green, t, s.hi)
    }

    pub fn sigma_neglog(&self, l: f64) -> f64 {
        self.sigma_value((-l).exp())
    }

    pub fn sigma(&self, t: f64) -> Result<Clock> {
        check_radius(t)?;
        Ok(Clock { t, sigma: self.sigma_value(t) })
    }

    /// Sigma_lo - Sigma_hi for lo < hi.
    pub fn sigma_between(&self, lo: f64, hi: f64) -> f64 {
        self.sigma_value(lo) - self.sigma_value(hi)
    }

    /// int_hi^lo f dG for lo < hi, split at breakpoints.
    pub fn integral_between(&self, lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        let mut upper = hi;
        while upper > lo {
            let s = self.segment_at(upper);
            let lower = s.lo.max(lo);
            total += s.eval.integral_piece(self.green, lower, upper);
            upper = lower;
        }
        total
    }

    /// Quadrature of f^2 dG on [lo, hi], ignoring closed forms. Used to cross-check.
    pub fn sigma_quadrature(&self, lo: f64, hi: f64) -> f64 {
        let mut cuts = vec![hi];
        for s in &self.segments {
            if s.lo > lo && s.lo < hi {
                cuts.push(s.lo);
            }
        }
        cuts.push(lo);
        cuts.windows(2)
            .map(|w| {
                let eval = self.segment_at(w[0]).eval;
                stieltjes_neglog(self.green, -w[0].ln(), -w[1].ln(), |t| {
                    let f = eval.eval(self.green, t);
                    f * f
                })
            })
            .sum()
    }
}
