//! Triple-Bessel integral for overlapping spheres.
//!
//! F = int_0^inf tau^{1-mu} J(t tau) J(s tau) J(r tau) / (1 + tau^2) d tau
//!
//! The integrand decays like tau^{-5/2-mu} while oscillating, so the range is
//! cut at T where every argument is well inside the Hankel regime. Below T the
//! integral is summed panel by panel; above T each Bessel factor is replaced by
//! its Hankel expansion and the resulting terms tau^{-p} e^{i w tau} are
//! integrated in closed form or by a short numeric leg plus an asymptotic
//! series.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::quad::gl16;
use crate::specfun::{bessel_j_ord, BesselOrder};

const KMAX: usize = 10;
const JMAX: usize = 10;

/// Panels beyond this are not attempted; the caller falls back.
pub(crate) const PANEL_BUDGET: f64 = 5_000.0;

pub(crate) fn cutoff(mu: f64, t: f64, s: f64, r: f64) -> f64 {
    let lo = t.min(s).min(r);
    ((40.0 + mu * mu) / lo).max(40.0)
}

pub(crate) fn panel_count(mu: f64, t: f64, s: f64, r: f64) -> f64 {
    let width = (PI / (t + s + r)).min(1.0);
    cutoff(mu, t, s, r) / width
}

pub(crate) fn triple_integral(order: BesselOrder, t: f64, s: f64, r: f64) -> f64 {
    let mu = order.value();
    let big_t = cutoff(mu, t, s, r);
    let width = (PI / (t + s + r)).min(1.0);
    let panels = (big_t / width).ceil() as usize;
    let h = big_t / panels as f64;
    let rule = gl16();
    let mut head = 0.0;
    for p in 0..panels {
        let a = p as f64 * h;
        head += rule.integrate(a, a + h, |tau| {
            tau.powf(1.0 - mu) * bessel_j_ord(order, t * tau) * bessel_j_ord(order, s * tau) * bessel_j_ord(order, r * tau)
                / (1.0 + tau * tau)
        });
    }
    head + tail(mu, t, s, r, big_t)
}

fn hankel_series(mu: f64, z: f64, conj: bool) -> [Complex64; KMAX + 1] {
    let mu4 = 4.0 * mu * mu;
    let mut out = [Complex64::new(0.0, 0.0); KMAX + 1];
    let mut a = 1.0;
    let mut ik = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            a *= (mu4 - odd * odd) / (8.0 * k as f64);
            ik *= i;
        }
        let c = ik * (a / z.powi(k as i32));
        *slot = if conj { c.conj() } else { c };
    }
    out
}

fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); JMAX + 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if i + j <= JMAX {
                out[i + j] += x * y;
            }
        }
    }
    out
}

fn tail(mu: f64, t: f64, s: f64, r: f64, big_t: f64) -> f64 {
    let phi = 0.5 * mu * PI + 0.25 * PI;
    // (conjugate t, s, r), frequency, phase
    let combos = [
        ([false, false, false], t + s + r, 3.0 * phi),
        ([false, false, true], t + s - r, phi),
        ([false, true, false], t - s + r, phi),
        ([true, false, false], -t + s + r, phi),
    ];
    let mut total = Complex64::new(0.0, 0.0);
    for (conj, omega, psi) in combos {
        let prod = convolve(
            &convolve(&hankel_series(mu, t, conj[0]), &hankel_series(mu, s, conj[1])),
            &hankel_series(mu, r, conj[2]),
        );
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..=JMAX {
            // 1/(1+tau^2) = sum_m (-1)^m tau^{-2-2m}
            let mut d = Complex64::new(0.0, 0.0);
            let mut m = 0;
            while 2 * m <= j {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                d += prod[j - 2 * m] * sign;
                m += 1;
            }
            if d.norm() == 0.0 {
                continue;
            }
            acc += d * power_exp_tail(2.5 + mu + j as f64, omega, big_t);
        }
        total += Complex64::from_polar(1.0, -psi) * acc;
    }
    (2.0 / PI).powf(1.5) / (t * s * r).sqrt() * 0.25 * total.re
}

/// int_T^inf tau^{-p} e^{i w tau} d tau for p > 2.
pub(crate) fn power_exp_tail(p: f64, omega: f64, big_t: f64) -> Complex64 {
    if omega < 0.0 {
        return power_exp_tail(p, -omega, big_t).conj();
    }
    let a = omega * big_t;
    if a < 1e-6 {
        return Complex64::new(big_t.powf(1.0 - p) / (p - 1.0), omega * big_t.powf(2.0 - p) / (p - 2.0));
    }
    omega.powf(p - 1.0) * unit_tail(p, a)
}

/// int_a^inf u^{-p} e^{iu} du
fn unit_tail(p: f64, a: f64) -> Complex64 {
    let far = (2.0 * p + 20.0).max(40.0);
    if a >= far {
        return asymptotic_tail(p, a);
    }
    let rule = gl16();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut u = a;
    while u < far {
        let h = (u / p).min(1.0).min(far - u);
        let re = rule.integrate(u, u + h, |x| x.powf(-p) * x.cos());
        let im = rule.integrate(u, u + h, |x| x.powf(-p) * x.sin());
        acc += Complex64::new(re, im);
        u += h;
    }
    acc + asymptotic_tail(p, far)
}

fn asymptotic_tail(p: f64, a: f64) -> Complex64 {
    // i e^{ia} a^{-p} sum_k (-i)^k (p)_k a^{-k}
    let mi = Complex64::new(0.0, -1.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for k in 0..200 {
        let next = term * mi * ((p + k as f64) / a);
        if next.norm() > last || next.norm() < 1e-17 * sum.norm() {
            break;
        }
        last = next.norm();
        sum += next;
        term = next;
    }
    Complex64::new(0.0, 1.0) * Complex64::from_polar(a.powf(-p), a) * sum
}
