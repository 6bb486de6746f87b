use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::bessel::{self, gamma_half, ln_gamma_half, BesselOrder, EULER_GAMMA};
use crate::error::{domain, Result};

pub const MAX_NU: u32 = 16;

/// Radii below this use leading-order small-argument forms in log space.
const SMALL_T: f64 = 1e-8;

/// Largest -ln t handled; below e^-745 the radius itself underflows.
pub const MAX_NEGLOG: f64 = 745.0;

pub fn check_nu(nu: u32) -> Result<()> {
    if !(2..=MAX_NU).contains(&nu) {
        return Err(domain(format!("dimension {nu} outside 2..={MAX_NU}")));
    }
    Ok(())
}

pub fn check_radius(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(domain(format!("radius {t} outside (0, 1]")));
    }
    Ok(())
}

/// Surface area of the unit sphere in R^nu: 2 pi^{nu/2} / Gamma(nu/2).
pub fn alpha_nu(nu: u32) -> Result<f64> {
    if nu < 2 {
        return Err(domain(format!("dimension {nu} must be at least 2")));
    }
    Ok(2.0 * PI.powf(nu as f64 / 2.0) / gamma_half(nu))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenScalar {
    pub nu: u32,
    pub t: f64,
    pub value: f64,
}

pub fn green_g(nu: u32, t: f64) -> Result<GreenScalar> {
    check_radius(t)?;
    let value = Green::get(nu)?.value(t);
    Ok(GreenScalar { nu, t, value })
}

pub fn renorm_factor(nu: u32, t: f64) -> Result<f64> {
    check_radius(t)?;
    Ok(Green::get(nu)?.renorm(t))
}

/// Variance function G(t) = alpha (2 pi)^{-nu} K_mu(t) / I_mu(t) with mu = (nu-2)/2.
#[derive(Debug)]
pub struct Green {
    nu: u32,
    order: BesselOrder,
    alpha: f64,
    pref: f64,
    anchor: f64,
}

impl Green {
    pub fn new(nu: u32) -> Result<Self> {
        check_nu(nu)?;
        let order = BesselOrder::for_dimension(nu)?;
        let alpha = alpha_nu(nu)?;
        let pref = alpha * (2.0 * PI).powi(-(nu as i32));
        let mut g = Green { nu, order, alpha, pref, anchor: 0.0 };
        g.anchor = g.value(1.0);
        Ok(g)
    }

    /// Shared instance per dimension; G(1) is computed once.
    pub fn get(nu: u32) -> Result<&'static Green> {
        static CACHE: [OnceLock<Green>; (MAX_NU + 1) as usize] = [const { OnceLock::new() }; (MAX_NU + 1) as usize];
        check_nu(nu)?;
        let slot = &CACHE[nu as usize];
        if let Some(g) = slot.get() {
            return Ok(g);
        }
        let g = Green::new(nu)?;
        Ok(slot.get_or_init(|| g))
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn order(&self) -> BesselOrder {
        self.order
    }

    pub fn mu(&self) -> f64 {
        self.order.value()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// alpha (2 pi)^{-nu}
    pub fn prefactor(&self) -> f64 {
        self.pref
    }

    /// (2 pi)^{-nu/2}, the constant in front of the point kernel.
    pub fn prefactor_half(&self) -> f64 {
        (2.0 * PI).powf(-(self.nu as f64) / 2.0)
    }

    /// G(1)
    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < SMALL_T {
            return self.ln_value(t).exp();
        }
        self.direct(t)
    }

    fn direct(&self, t: f64) -> f64 {
        self.pref * bessel::k(self.order, t) / bessel::i(self.order, t)
    }

    /// G evaluated at t = e^{-l}; usable below the f64 range of t itself.
    pub fn value_neglog(&self, l: f64) -> f64 {
        if l > -SMALL_T.ln() {
            self.ln_value_neglog(l).exp()
        } else {
            self.direct((-l).exp())
        }
    }

    pub fn ln_value(&self, t: f64) -> f64 {
        if t >= SMALL_T {
            return self.direct(t).ln();
        }
        self.ln_value_neglog(-t.ln())
    }

    pub fn ln_value_neglog(&self, l: f64) -> f64 {
        if l <= -SMALL_T.ln() {
            return self.direct((-l).exp()).ln();
        }
        // leading forms: I ~ (t/2)^mu / Gamma(mu+1), K_0 ~ -ln(t/2) - gamma,
        // K_mu ~ Gamma(mu)/2 (2/t)^mu
        let mu = self.mu();
        let ln_half_t = -l - std::f64::consts::LN_2;
        let ln_i = mu * ln_half_t - ln_gamma_half(self.order.twice() + 2);
        let ln_k = if self.order.twice() == 0 {
            (-ln_half_t - EULER_GAMMA).ln()
        } else {
            ln_gamma_half(self.order.twice()) - std::f64::consts::LN_2 - mu * ln_half_t
        };
        self.pref.ln() + ln_k - ln_i
    }

    /// dG/dt = -alpha (2 pi)^{-nu} / (t I_mu(t)^2), from the Wronskian.
    pub fn derivative(&self, t: f64) -> f64 {
        let i = bessel::i(self.order, t);
        -self.pref / (t * i * i)
    }

    /// dG/dl at t = e^{-l}, which equals alpha (2 pi)^{-nu} / I_mu(t)^2.
    pub fn slope_neglog(&self, l: f64) -> f64 {
        if l <= -SMALL_T.ln() {
            let i = bessel::i(self.order, (-l).exp());
            return self.pref / (i * i);
        }
        let ln_i = self.mu() * (-l - std::f64::consts::LN_2) - ln_gamma_half(self.order.twice() + 2);
        (self.pref.ln() - 2.0 * ln_i).exp()
    }

    pub fn renorm(&self, t: f64) -> f64 {
        if t < SMALL_T {
            return 1.0;
        }
        let mu = self.mu();
        (0.5 * t).powf(mu) / (gamma_half(self.order.twice() + 2) * bessel::i(self.order, t))
    }

    /// Radius t with G(t) = u; requires u >= G(1).
    pub fn inverse(&self, u: f64) -> Result<f64> {
        Ok((-self.inverse_neglog(u)?).exp())
    }

    /// -ln t for the radius with G(t) = u.
    pub fn inverse_neglog(&self, u: f64) -> Result<f64> {
        if !(u >= self.anchor * (1.0 - 1e-14)) {
            return Err(domain(format!("G value {u} below G(1) = {}", self.anchor)));
        }
        let ln_u = u.ln();
        let (mut lo, mut hi) = (0.0f64, MAX_NEGLOG);
        if self.ln_value_neglog(hi) < ln_u {
            return Err(domain(format!("G value {u} beyond representable radii")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.ln_value_neglog(mid) < ln_u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1e-3) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
