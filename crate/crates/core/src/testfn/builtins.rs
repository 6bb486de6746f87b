use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::specfun::{Green, MAX_NEGLOG};

use super::sequence::{check_sequence_neglog, RadiusSequence, SequenceKind};
use super::{Evaluator, GrowthCert, Segment, TestFunction};

/// Bound on (nu - 2)(-ln t) and on -ln t itself; keeps t and G(t) finite.
pub const MAX_BUILTIN_NEGLOG: f64 = 690.0;

/// Deepest -ln t at which G is comfortably representable in dimension nu.
pub fn max_depth(nu: u32) -> f64 {
    if nu <= 3 {
        MAX_BUILTIN_NEGLOG
    } else {
        MAX_BUILTIN_NEGLOG / (nu as f64 - 2.0)
    }
}

/// Analytic limsup / liminf of Sigma_t / (-ln t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioCert {
    pub upper: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BuiltinKind {
    Constant { gamma: f64 },
    InverseSqrtG { c: f64 },
    OscillatingConstant { gamma: f64 },
    GThick { gamma: f64 },
    GOscil { gamma: f64 },
    GEps { gamma_prime: f64, eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltinInfo {
    pub kind: BuiltinKind,
    pub ratio: RatioCert,
    /// For sequence builtins, -ln r_M of the last radius: the function is
    /// only meaningful down to there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_to_neglog: Option<f64>,
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(domain(msg()))
    }
}

/// Smallest C with both growth bounds on a grid down to `depth`, padded by 5%.
fn fit_cert(nu: u32, segments: &[Segment], jumps: &[f64], rho: f64, depth: f64) -> Result<GrowthCert> {
    let green = Green::get(nu)?;
    let mut ls: Vec<f64> = (0..=512).map(|k| depth * k as f64 / 512.0).collect();
    ls.extend(jumps.iter().map(|j| -j.ln()));
    let mut worst: f64 = 0.0;
    for l in ls {
        let t = (-l).exp();
        let seg = segments.iter().find(|s| s.lo < t && t <= s.hi).unwrap_or(&segments[segments.len() - 1]);
        let size = seg.eval.eval(green, t).abs() * green.value_neglog(l).sqrt();
        let count = jumps.iter().filter(|&&j| j >= t).count() as f64;
        worst = worst.max(size.max(count) / (l.powf(rho) + 1.0));
    }
    Ok(GrowthCert { cf: 1.05 * worst.max(1e-12), rho })
}

fn build(
    nu: u32,
    segments: Vec<Segment>,
    jumps: Vec<f64>,
    rho: f64,
    depth: f64,
    kind: BuiltinKind,
    ratio: RatioCert,
    valid_to_neglog: Option<f64>,
) -> Result<TestFunction> {
    let cert = fit_cert(nu, &segments, &jumps, rho, depth)?;
    let info = BuiltinInfo { kind, ratio, valid_to_neglog };
    TestFunction::new(nu, segments, jumps, cert, Some(info))
}

fn sequence_segments(seq: &RadiusSequence, eval: impl Fn(usize) -> Evaluator) -> (Vec<Segment>, Vec<f64>) {
    let m = seq.len();
    let mut segments = Vec::with_capacity(m);
    let mut jumps = Vec::new();
    let mut hi = 1.0;
    for n in 1..m {
        let lo = (-seq.neglog_at(n)).exp();
        segments.push(Segment { lo, hi, eval: eval(n) });
        jumps.push(lo);
        hi = lo;
    }
    // the last piece carries the final level down to 0
    segments.push(Segment { lo: 0.0, hi, eval: eval(m) });
    (segments, jumps)
}

fn check_decay(nu: u32, seq: &RadiusSequence) -> Result<()> {
    let deepest = seq.neglog_at(seq.len());
    if deepest > max_depth(nu) {
        return Err(domain(format!("-ln r_M = {deepest} beyond the supported depth {}", max_depth(nu))));
    }
    let report = check_sequence_neglog(SequenceKind::FastDecay, seq, None)?;
    if !report.holds() {
        let c = &report.conditions[0];
        return Err(Error::Sequence {
            condition: c.name.clone(),
            detail: format!("values {:?} do not trend to 0 (exponent {:.3})", c.values, c.decay_exponent),
        });
    }
    Ok(())
}

/// f = gamma in two dimensions; c_f = gamma^2 / (2 pi).
pub fn constant(gamma: f64) -> Result<TestFunction> {
    require(gamma > 0.0 && gamma <= (2.0 * PI).sqrt(), || format!("gamma = {gamma} outside (0, sqrt(2 pi)]"))?;
    let c = gamma * gamma / (2.0 * PI);
    build(
        2,
        vec![Segment { lo: 0.0, hi: 1.0, eval: Evaluator::Constant { value: gamma } }],
        vec![],
        0.5,
        MAX_NEGLOG,
        BuiltinKind::Constant { gamma },
        RatioCert { upper: c, lower: c },
        None,
    )
}

/// f = c / sqrt(G) for nu >= 3; c_f = c^2 (nu - 2).
pub fn inverse_sqrt_g(nu: u32, c: f64) -> Result<TestFunction> {
    require(nu >= 3, || format!("c/sqrt(G) builtin needs nu >= 3, got {nu}"))?;
    let cf = c * c * (nu as f64 - 2.0);
    require(c > 0.0 && cf <= 1.0, || format!("c = {c} outside (0, 1/sqrt(nu-2)]"))?;
    build(
        nu,
        vec![Segment { lo: 0.0, hi: 1.0, eval: Evaluator::InvSqrtG { c } }],
        vec![],
        1.0,
        max_depth(nu),
        BuiltinKind::InverseSqrtG { c },
        RatioCert { upper: cf, lower: cf },
        None,
    )
}

/// (-1)^n gamma on (r_n, r_{n-1}] in two dimensions.
pub fn oscillating_constant(gamma: f64, seq: &RadiusSequence) -> Result<TestFunction> {
    require(gamma > 0.0 && gamma <= (2.0 * PI).sqrt(), || format!("gamma = {gamma} outside (0, sqrt(2 pi)]"))?;
    check_decay(2, seq)?;
    let sign = |n: usize| if n % 2 == 0 { 1.0 } else { -1.0 };
    let (segments, jumps) = sequence_segments(seq, |n| Evaluator::Constant { value: sign(n) * gamma });
    let c = gamma * gamma / (2.0 * PI);
    let depth = seq.neglog_at(seq.len());
    build(
        2,
        segments,
        jumps,
        0.5,
        depth,
        BuiltinKind::OscillatingConstant { gamma },
        RatioCert { upper: c, lower: c },
        Some(depth),
    )
}

fn g_level(green: &Green, seq: &RadiusSequence, n: usize) -> f64 {
    let l = seq.neglog_at(n);
    (l / green.value_neglog(l)).sqrt()
}

fn g_family(nu: u32, gamma: f64, seq: &RadiusSequence, oscillating: bool) -> Result<TestFunction> {
    require(nu >= 3, || format!("g builtins need nu >= 3, got {nu}"))?;
    require(gamma > 0.0 && gamma <= 0.5f64.sqrt(), || format!("gamma = {gamma} outside (0, 1/sqrt 2]"))?;
    check_decay(nu, seq)?;
    let green = Green::get(nu)?;
    let (segments, jumps) = sequence_segments(seq, |n| {
        let sign = if oscillating && n % 2 == 1 { -1.0 } else { 1.0 };
        Evaluator::Constant { value: sign * gamma * g_level(green, seq, n) }
    });
    let kind = if oscillating { BuiltinKind::GOscil { gamma } } else { BuiltinKind::GThick { gamma } };
    let depth = seq.neglog_at(seq.len());
    build(nu, segments, jumps, 0.5, depth, kind, RatioCert { upper: gamma * gamma, lower: 0.0 }, Some(depth))
}

/// gamma sqrt(-ln r_n / G(r_n)) on (r_n, r_{n-1}]; limsup ratio gamma^2, liminf 0.
pub fn g_thick(nu: u32, gamma: f64, seq: &RadiusSequence) -> Result<TestFunction> {
    g_family(nu, gamma, seq, false)
}

/// Sign-alternating version of [`g_thick`].
pub fn g_oscil(nu: u32, gamma: f64, seq: &RadiusSequence) -> Result<TestFunction> {
    g_family(nu, gamma, seq, true)
}

/// g_thick with gamma' plus eps / sqrt(G).
pub fn g_eps(nu: u32, gamma_prime: f64, eps: f64, seq: &RadiusSequence) -> Result<TestFunction> {
    require(nu >= 3, || format!("g builtins need nu >= 3, got {nu}"))?;
    let tail = eps * eps * (nu as f64 - 2.0);
    let upper = gamma_prime * gamma_prime + tail;
    require(gamma_prime > 0.0 && eps > 0.0 && upper <= 1.0, || {
        format!("gamma' = {gamma_prime}, eps = {eps} must be positive with gamma'^2 + eps^2 (nu-2) <= 1")
    })?;
    check_decay(nu, seq)?;
    let green = Green::get(nu)?;
    let (segments, jumps) = sequence_segments(seq, |n| Evaluator::ConstPlusInvSqrtG {
        value: gamma_prime * g_level(green, seq, n),
        eps,
    });
    let depth = seq.neglog_at(seq.len());
    build(
        nu,
        segments,
        jumps,
        0.5,
        depth,
        BuiltinKind::GEps { gamma_prime, eps },
        RatioCert { upper, lower: tail },
        Some(depth),
    )
}
