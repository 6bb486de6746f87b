use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rng::{domain as stream, KeyedRng};
use crate::sampler::ScaleSchedule;
use crate::stats::{frequency, Estimate};
use crate::steep::steep_target;
use crate::testfn::TestFunction;

use super::VerifyReport;

/// Continuity correction for a barrier monitored at discrete steps: the
/// barrier is pulled in by this many step standard deviations.
pub const BARRIER_SHIFT: f64 = 0.5826;

/// Sub-steps per tube interval when simulating Brownian paths in Sigma-time.
pub const TUBE_STEPS: usize = 1000;

/// Monte Carlo estimate of p = P(sup over [0, 1] of |B| <= 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfinementEstimate {
    pub p: Estimate,
    pub steps: usize,
    pub replicas: u64,
    pub seed: u64,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random walk with Gaussian steps of variance 1/steps and a corrected barrier.
pub fn estimate_confinement_p(steps: usize, replicas: u64, seed: u64) -> Result<ConfinementEstimate> {
    if steps < 10_000 {
        return Err(domain(format!("{steps} steps per path; the estimate needs at least 10^4")));
    }
    if replicas < 2 {
        return Err(domain("at least two replicas are needed"));
    }
    let dt = 1.0 / steps as f64;
    let sd = dt.sqrt();
    let barrier = 1.0 - BARRIER_SHIFT * sd;
    let rng = KeyedRng::new(seed);
    let hits: u64 = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut s = rng.stream(stream::CONFINEMENT, r);
            let mut x = 0.0f64;
            for _ in 0..steps {
                x += sd * normal(&mut s);
                if x.abs() > barrier {
                    return 0;
                }
            }
            1
        })
        .sum();
    Ok(ConfinementEstimate { p: frequency(hits, replicas), steps, replicas, seed })
}

/// (4/pi) sum_k (-1)^k / (2k+1) exp(-(2k+1)^2 pi^2 / 8)
pub fn confinement_series() -> f64 {
    let pi = std::f64::consts::PI;
    (0..20)
        .map(|k| {
            let m = (2 * k + 1) as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign / m * (-m * m * pi * pi / 8.0).exp()
        })
        .sum::<f64>()
        * 4.0
        / pi
}

pub(super) fn confinement_checks(coarse: &ConfinementEstimate, fine: &ConfinementEstimate) -> Vec<VerifyReport> {
    let mut open = VerifyReport::new("confinement p in (0, 1)", coarse.p, [0.0, 1.0], 0.0, coarse.replicas, coarse.seed);
    open.pass = coarse.p.value > 0.0 && coarse.p.value < 1.0;
    let diff = Estimate {
        value: fine.p.value - coarse.p.value,
        se: (fine.p.se.powi(2) + coarse.p.se.powi(2)).sqrt(),
    };
    let stable = VerifyReport::within_se(
        format!("confinement p stable from {} to {} steps", coarse.steps, fine.steps),
        diff,
        0.0,
        3.0,
        coarse.replicas + fine.replicas,
        coarse.seed,
    );
    let series = confinement_series();
    let exact = VerifyReport::within_se("confinement p against the exit-time series", coarse.p, series, 4.0, coarse.replicas, coarse.seed)
        .note(format!("series value {series:.6}"));
    vec![open, stable, exact]
}

/// p e^{-nu dS -+ sqrt(2 nu dS)}
pub fn sandwich_bounds(nu: u32, delta_sigma: f64, p: f64) -> [f64; 2] {
    let nu = nu as f64;
    let spread = (2.0 * nu * delta_sigma).sqrt();
    [p * (-nu * delta_sigma - spread).exp(), p * (-nu * delta_sigma + spread).exp()]
}

/// Whether a Brownian path in Sigma-time stays within sqrt(dS) of the drift
/// sqrt(2 nu) s over [0, dS]. Rescaled to unit time: |B_u - T sqrt(dS) u| <= 1.
fn stays_in_tube(rng: &mut ChaCha8Rng, drift: f64, steps: usize) -> bool {
    let du = 1.0 / steps as f64;
    let sd = du.sqrt();
    let barrier = 1.0 - BARRIER_SHIFT * sd;
    let mut y = 0.0f64;
    for _ in 0..steps {
        y += sd * normal(rng) - drift * du;
        if y.abs() > barrier {
            return false;
        }
    }
    true
}

fn check_delta_sigma(ds: f64) -> Result<()> {
    if !(ds > 0.0 && ds <= 4.0) {
        return Err(domain(format!("Delta Sigma = {ds} outside (0, 4]; the event would be out of Monte Carlo reach")));
    }
    Ok(())
}

/// Frequency of the tube event over one interval against the sandwich.
pub fn verify_sandwich_at(
    nu: u32,
    delta_sigma: f64,
    p: &ConfinementEstimate,
    replicas: u64,
    seed: u64,
) -> Result<VerifyReport> {
    check_delta_sigma(delta_sigma)?;
    let drift = steep_target(nu) * delta_sigma.sqrt();
    let rng = KeyedRng::new(seed);
    let hits: u64 = (0..replicas)
        .into_par_iter()
        .map(|r| stays_in_tube(&mut rng.stream(stream::BROWNIAN, r), drift, TUBE_STEPS) as u64)
        .sum();
    let freq = frequency(hits, replicas);
    let raw = sandwich_bounds(nu, delta_sigma, p.p.value);
    let lower = sandwich_bounds(nu, delta_sigma, (p.p.value - 3.0 * p.p.se).max(0.0))[0];
    let upper = sandwich_bounds(nu, delta_sigma, p.p.value + 3.0 * p.p.se)[1];
    let mut report = VerifyReport::new(
        format!("tube frequency within sandwich, nu = {nu}, dSigma = {delta_sigma}"),
        freq,
        [lower, upper],
        3.0 * freq.se,
        replicas,
        seed,
    )
    .note(format!("sandwich at p = {:.5}: [{:.6e}, {:.6e}]", p.p.value, raw[0], raw[1]));
    if hits < 10 {
        report = report.inconclusive(format!("only {hits} paths stayed in the tube"));
    }
    Ok(report)
}

/// Sandwich check for the tube at schedule level n of f.
pub fn verify_sandwich(
    f: &TestFunction,
    schedule: &ScaleSchedule,
    n: usize,
    p: &ConfinementEstimate,
    replicas: u64,
    seed: u64,
) -> Result<VerifyReport> {
    if n == 0 || n > schedule.depth() {
        return Err(domain(format!("level {n} outside 1..={}", schedule.depth())));
    }
    let ds = f.sigma_between(schedule.t(n), schedule.t(n - 1));
    verify_sandwich_at(f.nu(), ds, p, replicas, seed)
}

/// Frequency of both tube events against the product of their frequencies.
pub fn verify_independence(nu: u32, delta_sigma: [f64; 2], replicas: u64, seed: u64) -> Result<VerifyReport> {
    for ds in delta_sigma {
        check_delta_sigma(ds)?;
    }
    if replicas < 2 {
        return Err(domain("at least two replicas are needed"));
    }
    let target = steep_target(nu);
    let rng = KeyedRng::new(seed);
    let outcomes: Vec<(bool, bool)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut s = rng.stream(stream::BROWNIAN, r);
            let a = stays_in_tube(&mut s, target * delta_sigma[0].sqrt(), TUBE_STEPS);
            // the second interval uses its own stream so its law does not
            // depend on where the first one stopped drawing
            let mut s2 = rng.stream(stream::BROWNIAN, r | 1 << 63);
            let b = stays_in_tube(&mut s2, target * delta_sigma[1].sqrt(), TUBE_STEPS);
            (a, b)
        })
        .collect();
    let n = replicas as f64;
    let f1 = outcomes.iter().filter(|o| o.0).count() as f64 / n;
    let f2 = outcomes.iter().filter(|o| o.1).count() as f64 / n;
    let f12 = outcomes.iter().filter(|o| o.0 && o.1).count() as f64 / n;
    // influence function of f12 - f1 f2
    let psi: Vec<f64> = outcomes
        .iter()
        .map(|&(a, b)| (a && b) as u8 as f64 - f2 * a as u8 as f64 - f1 * b as u8 as f64)
        .collect();
    let mean_psi = psi.iter().sum::<f64>() / n;
    let var = psi.iter().map(|v| (v - mean_psi).powi(2)).sum::<f64>() / (n - 1.0);
    let est = Estimate { value: f12 - f1 * f2, se: (var / n).sqrt() };
    let mut report = VerifyReport::within_se(
        format!("W(Phi_2) - W(P_1) W(P_2), nu = {nu}, dSigma = {delta_sigma:?}"),
        est,
        0.0,
        3.0,
        replicas,
        seed,
    )
    .note(format!("P_1 {f1:.6}, P_2 {f2:.6}, both {f12:.6}"));
    if ((f12 * n) as u64) < 10 {
        report = report.inconclusive("fewer than 10 paths in both tubes");
    }
    Ok(report)
}
