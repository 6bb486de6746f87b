//! Frozen empirical constants.
//!
//! Each entry is the grid maximum from [`crate::covariance::bounds`] times
//! roughly 1.25, rounded up. Index is the dimension; only 2..=6 were calibrated.

/// d^2(x,t; y,t) <= C t^{2-nu} sqrt(|x-y|/t)
const EQUAL_RADIUS_METRIC: [f64; 5] = [0.30, 0.080, 0.035, 0.020, 0.014];

/// d^2(x,t; y,s) <= C (t^{2-nu} sqrt(|x-y|/t) + |G(t) - G(s)|), t <= s
const MIXED_RADIUS_METRIC: [f64; 5] = [1.25, 0.90, 0.56, 0.36, 0.26];

/// |Psi(w)| <= C sqrt(w)
const PSI_ROOT: [f64; 5] = [0.93, 0.75, 0.65, 0.60, 0.55];

fn lookup(table: &[f64; 5], nu: u32) -> Option<f64> {
    (2..=6).contains(&nu).then(|| table[nu as usize - 2])
}

pub fn equal_radius_metric(nu: u32) -> Option<f64> {
    lookup(&EQUAL_RADIUS_METRIC, nu)
}

pub fn mixed_radius_metric(nu: u32) -> Option<f64> {
    lookup(&MIXED_RADIUS_METRIC, nu)
}

pub fn psi_root(nu: u32) -> Option<f64> {
    lookup(&PSI_ROOT, nu)
}
