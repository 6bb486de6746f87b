//! Bessel functions of real argument for orders that are multiples of one half.
//!
//! Small arguments use the ascending series, large ones the Hankel expansion,
//! and the band in between Miller's backward recurrence. `K` goes through
//! Temme's series / Steed's continued fraction for integer orders and the
//! terminating closed form for half-integer ones.

use std::f64::consts::PI;

use crate::error::{domain, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const EPS: f64 = 1e-17;

/// Bessel order stored as twice its value, so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct BesselOrder {
    twice: u32,
}

impl BesselOrder {
    pub const MAX_TWICE: u32 = 64;

    pub fn new(order: f64) -> Result<Self> {
        let twice = 2.0 * order;
        if !(order >= 0.0) || twice.fract() != 0.0 || twice > Self::MAX_TWICE as f64 {
            return Err(domain(format!(
                "order {order} must be a non-negative multiple of 1/2 not above {}",
                Self::MAX_TWICE / 2
            )));
        }
        Ok(BesselOrder { twice: twice as u32 })
    }

    /// The order (nu - 2)/2 attached to dimension `nu`.
    pub fn for_dimension(nu: u32) -> Result<Self> {
        if nu < 2 {
            return Err(domain(format!("dimension {nu} must be at least 2")));
        }
        BesselOrder::from_twice(nu - 2)
    }

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice > Self::MAX_TWICE {
            return Err(domain(format!("order {} too large", twice as f64 / 2.0)));
        }
        Ok(BesselOrder { twice })
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn is_half_integer(self) -> bool {
        self.twice % 2 == 1
    }
}

/// Gamma(twice / 2), exact recurrence from Gamma(1/2) and Gamma(1).
pub fn gamma_half(twice: u32) -> f64 {
    assert!(twice > 0, "gamma pole at 0");
    let (mut z, mut g) = if twice % 2 == 1 { (0.5, PI.sqrt()) } else { (1.0, 1.0) };
    let target = twice as f64 / 2.0;
    while z < target {
        g *= z;
        z += 1.0;
    }
    g
}

pub fn ln_gamma_half(twice: u32) -> f64 {
    assert!(twice > 0, "gamma pole at 0");
    let (mut z, mut g) = if twice % 2 == 1 { (0.5, 0.5 * PI.ln()) } else { (1.0, 0.0) };
    let target = twice as f64 / 2.0;
    while z < target {
        g += z.ln();
        z += 1.0;
    }
    g
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(domain(format!("argument {x} must be finite and non-negative")));
    }
    Ok(())
}

pub fn bessel_j(order: f64, x: f64) -> Result<f64> {
    let ord = BesselOrder::new(order)?;
    check_x(x)?;
    Ok(j(ord, x))
}

pub fn bessel_i(order: f64, x: f64) -> Result<f64> {
    let ord = BesselOrder::new(order)?;
    check_x(x)?;
    Ok(i(ord, x))
}

pub fn bessel_k(order: f64, x: f64) -> Result<f64> {
    let ord = BesselOrder::new(order)?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("K needs a positive finite argument, got {x}")));
    }
    Ok(k(ord, x))
}

/// Coefficient sequence a_k(nu) of the Hankel expansions; a_0 = 1.
fn hankel_next(prev: f64, mu4: f64, k: u32) -> f64 {
    let odd = (2 * k - 1) as f64;
    prev * (mu4 - odd * odd) / (8.0 * k as f64)
}

pub(crate) fn j(ord: BesselOrder, x: f64) -> f64 {
    let nu = ord.value();
    if x == 0.0 {
        return if ord.twice == 0 { 1.0 } else { 0.0 };
    }
    if x < 2.0 || x * x < 4.0 * (nu + 1.0) {
        return j_series(nu, ord.twice, x);
    }
    if x >= 25.0 + nu * nu {
        return j_hankel(nu, x);
    }
    if ord.is_half_integer() {
        j_half_miller((ord.twice / 2) as usize, x)
    } else {
        j_int_miller((ord.twice / 2) as usize, x)
    }
}

fn j_series(nu: f64, twice: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = h.powf(nu) / gamma_half(twice + 2);
    let mut sum = term;
    let q = h * h;
    for k in 1..500 {
        let kf = k as f64;
        term *= -q / (kf * (kf + nu));
        sum += term;
        if term.abs() < EPS * sum.abs() {
            break;
        }
    }
    sum
}

fn j_hankel(nu: f64, x: f64) -> f64 {
    let mu4 = 4.0 * nu * nu;
    let (mut p, mut q) = (1.0, 0.0);
    let mut a = 1.0;
    let mut xp = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200u32 {
        a = hankel_next(a, mu4, k);
        xp *= x;
        let term = a / xp;
        if term == 0.0 || term.abs() > last {
            break;
        }
        last = term.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < EPS {
            break;
        }
    }
    let w = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}

fn miller_start(n: usize, x: f64) -> usize {
    let top = (n as f64).max(x);
    let m = (top + 30.0 + (60.0 * top).sqrt()) as usize;
    m + m % 2
}

fn j_int_miller(n: usize, x: f64) -> f64 {
    let m = miller_start(n, x);
    let tox = 2.0 / x;
    let mut above = 0.0;
    let mut cur = 1e-30;
    let mut sum = 0.0;
    let mut result = 0.0;
    for k in (1..=m).rev() {
        let next = k as f64 * tox * cur - above;
        above = cur;
        cur = next;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            above *= 1e-250;
            sum *= 1e-250;
            result *= 1e-250;
        }
        let idx = k - 1;
        if idx == n {
            result = cur;
        }
        if idx % 2 == 0 {
            sum += if idx == 0 { cur } else { 2.0 * cur };
        }
    }
    result / sum
}

fn j_half_miller(n: usize, x: f64) -> f64 {
    // spherical j_l, normalized against j_0 or j_1 closed forms
    let m = miller_start(n, x);
    let mut above = 0.0;
    let mut cur = 1e-30;
    let mut at_n = 0.0;
    let mut at_1 = 0.0;
    for l in (1..=m).rev() {
        let next = (2 * l + 1) as f64 / x * cur - above;
        above = cur;
        cur = next;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            above *= 1e-250;
            at_n *= 1e-250;
            at_1 *= 1e-250;
        }
        let idx = l - 1;
        if idx == n {
            at_n = cur;
        }
        if idx == 1 {
            at_1 = cur;
        }
    }
    let at_0 = cur;
    let (s, c) = x.sin_cos();
    let true0 = s / x;
    let true1 = s / (x * x) - c / x;
    let scale = if true0.abs() >= true1.abs() { true0 / at_0 } else { true1 / at_1 };
    (2.0 * x / PI).sqrt() * at_n * scale
}

pub(crate) fn i(ord: BesselOrder, x: f64) -> f64 {
    let nu = ord.value();
    if x == 0.0 {
        return if ord.twice == 0 { 1.0 } else { 0.0 };
    }
    if x <= 60.0 {
        let h = 0.5 * x;
        let mut term = h.powf(nu) / gamma_half(ord.twice + 2);
        let mut sum = term;
        let q = h * h;
        for k in 1..1000 {
            let kf = k as f64;
            term *= q / (kf * (kf + nu));
            sum += term;
            if term < EPS * sum {
                break;
            }
        }
        return sum;
    }
    let mu4 = 4.0 * nu * nu;
    let mut a = 1.0;
    let mut xp = 1.0;
    let mut sum = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200u32 {
        a = hankel_next(a, mu4, k);
        xp *= x;
        let term = a / xp;
        if term == 0.0 || term.abs() > last {
            break;
        }
        last = term.abs();
        sum += if k % 2 == 0 { term } else { -term };
        if term.abs() < EPS {
            break;
        }
    }
    x.exp() / (2.0 * PI * x).sqrt() * sum
}

pub(crate) fn k(ord: BesselOrder, x: f64) -> f64 {
    if ord.is_half_integer() {
        return k_half((ord.twice / 2) as usize, x);
    }
    let n = (ord.twice / 2) as usize;
    let (mut k0, mut k1) = if x <= 2.0 { k01_temme(x) } else { k01_steed(x) };
    let tox = 2.0 / x;
    for j in 1..=n {
        let next = k0 + j as f64 * tox * k1;
        k0 = k1;
        k1 = next;
    }
    k0
}

fn k_half(n: usize, x: f64) -> f64 {
    // terminating series: (n+k)!/(k!(n-k)!) (2x)^-k
    let mut coef = 1.0;
    let mut sum = 1.0;
    let mut xp = 1.0;
    for kk in 1..=n {
        coef *= ((n + kk) * (n + 1 - kk)) as f64 / kk as f64;
        xp *= 2.0 * x;
        sum += coef / xp;
    }
    (PI / (2.0 * x)).sqrt() * (-x).exp() * sum
}

/// Temme's series at order zero; returns (K_0, K_1).
fn k01_temme(x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let mut ff = -EULER_GAMMA - x2.ln();
    let mut sum = ff;
    let mut p = 0.5;
    let mut q = 0.5;
    let mut c = 1.0;
    let d = x2 * x2;
    let mut sum1 = p;
    for i in 1..500 {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi);
        c *= d / fi;
        p /= fi;
        q /= fi;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

/// Steed's continued fraction at order zero; returns (K_0, K_1).
fn k01_steed(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}
