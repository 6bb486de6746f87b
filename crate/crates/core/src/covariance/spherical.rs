//! Covariance by averaging the one-sphere kernel over the other sphere.
//!
//! The covariance between a point value and a renormalized sphere average is
//! the Green kernel outside the sphere and a multiple of I(rho)/rho^mu inside,
//! so the general case reduces to a one-dimensional angular integral.

use std::f64::consts::PI;

use crate::quad::adaptive;
use crate::specfun::{gamma_half, Green};

use super::{i_scaled, point_kernel};

pub(crate) fn general(green: &Green, t: f64, s: f64, r: f64) -> f64 {
    let nu = green.nu();
    let inner = green.prefactor_half() * crate::specfun::bessel_k_ord(green.order(), s)
        / crate::specfun::bessel_i_ord(green.order(), s);
    let phi = |rho: f64| {
        if rho >= s {
            point_kernel(green, rho)
        } else {
            inner * i_scaled(green, rho)
        }
    };
    let norm = if nu == 2 { PI } else { PI.sqrt() * gamma_half(nu - 1) / gamma_half(nu) };
    let power = nu as i32 - 2;
    let integrand = |psi: f64| {
        let rho = (t * t + r * r - 2.0 * t * r * psi.cos()).max(0.0).sqrt();
        psi.sin().powi(power) * phi(rho)
    };
    let cos_star = (t * t + r * r - s * s) / (2.0 * t * r);
    let mut cuts = vec![0.0];
    if cos_star > -1.0 && cos_star < 1.0 {
        cuts.push(cos_star.acos());
    }
    cuts.push(PI);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        acc += adaptive(w[0], w[1], 1e-14, 1e-12, integrand);
    }
    green.renorm(t) * acc / norm
}
