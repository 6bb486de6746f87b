//! Covariances of renormalized sphere averages and the intrinsic metric.

pub mod bounds;
mod spectral;
mod spherical;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::specfun::{bessel_i_ord, bessel_j_ord, bessel_k_ord, gamma_half, Green};

/// Centre and radius of one sphere average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvgPoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl AvgPoint {
    pub fn new(x: Vec<f64>, t: f64) -> Result<Self> {
        let p = AvgPoint { x, t };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() < 2 {
            return Err(domain(format!("position has {} coordinates; need at least 2", self.x.len())));
        }
        if let Some(c) = self.x.iter().find(|c| !(c.abs() <= 1.0)) {
            return Err(domain(format!("coordinate {c} outside [-1, 1]")));
        }
        crate::specfun::check_radius(self.t)
    }

    pub fn nu(&self) -> u32 {
        self.x.len() as u32
    }

    pub fn distance(&self, other: &AvgPoint) -> f64 {
        self.x.iter().zip(&other.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Concentric,
    Disjoint,
    Inclusion,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    pub regime: Regime,
}

/// How the overlapping case is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneralRoute {
    /// Triple-Bessel Fourier integral.
    #[default]
    Spectral,
    /// One-dimensional angular average of the sphere-point kernel.
    SphericalMean,
}

pub fn classify(t: f64, s: f64, r: f64) -> Regime {
    if r == 0.0 {
        Regime::Concentric
    } else if r >= t + s {
        Regime::Disjoint
    } else if t.max(s) >= r + t.min(s) {
        Regime::Inclusion
    } else {
        Regime::General
    }
}

/// (2 pi)^{-nu/2} K_mu(r) / r^mu
pub(crate) fn point_kernel(green: &Green, r: f64) -> f64 {
    green.prefactor_half() * bessel_k_ord(green.order(), r) / r.powf(green.mu())
}

/// I_mu(r) / r^mu, finite at r = 0.
pub(crate) fn i_scaled(green: &Green, r: f64) -> f64 {
    let mu = green.mu();
    if r > 1.0 {
        return bessel_i_ord(green.order(), r) / r.powf(mu);
    }
    let q = 0.25 * r * r;
    let mut term = 0.5f64.powf(mu) / gamma_half(green.order().twice() + 2);
    let mut sum = term;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * (kf + mu));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone, Copy)]
pub struct Kernel {
    green: &'static Green,
    route: GeneralRoute,
}

impl Kernel {
    pub fn new(nu: u32) -> Result<Self> {
        Ok(Kernel { green: Green::get(nu)?, route: GeneralRoute::default() })
    }

    pub fn with_route(mut self, route: GeneralRoute) -> Self {
        self.route = route;
        self
    }

    pub fn nu(&self) -> u32 {
        self.green.nu()
    }

    pub fn green(&self) -> &'static Green {
        self.green
    }

    pub fn route(&self) -> GeneralRoute {
        self.route
    }

    pub fn cov(&self, a: &AvgPoint, b: &AvgPoint) -> Result<KernelValue> {
        a.validate()?;
        b.validate()?;
        if a.nu() != self.nu() || b.nu() != self.nu() {
            return Err(domain(format!(
                "points of dimension {} and {} given to a dimension {} kernel",
                a.nu(),
                b.nu(),
                self.nu()
            )));
        }
        Ok(self.cov_radii(a.t, b.t, a.distance(b)))
    }

    /// Covariance from the two radii and the centre distance.
    pub fn cov_radii(&self, t: f64, s: f64, r: f64) -> KernelValue {
        let regime = classify(t, s, r);
        let value = match regime {
            Regime::Concentric => self.green.value(t.max(s)),
            Regime::Disjoint => self.disjoint(r),
            Regime::Inclusion => self.inclusion(t.max(s), r),
            Regime::General => self.general(t, s, r),
        };
        KernelValue { value, regime }
    }

    /// Covariance of two averages on disjoint spheres at distance r.
    pub fn disjoint(&self, r: f64) -> f64 {
        point_kernel(self.green, r)
    }

    /// Covariance when the sphere of radius t contains the other, centres r apart.
    pub fn inclusion(&self, t: f64, r: f64) -> f64 {
        let g = self.green;
        g.prefactor_half() * i_scaled(g, r) * bessel_k_ord(g.order(), t) / bessel_i_ord(g.order(), t)
    }

    /// Overlapping-regime value through the configured route. Also usable at
    /// any (t, s, r) with r > 0, which is how the regime formulas are cross-checked.
    pub fn general(&self, t: f64, s: f64, r: f64) -> f64 {
        match self.route {
            GeneralRoute::Spectral => {
                if spectral::panel_count(self.green.mu(), t, s, r) > spectral::PANEL_BUDGET {
                    spherical::general(self.green, t, s, r)
                } else {
                    self.spectral(t, s, r)
                }
            }
            GeneralRoute::SphericalMean => spherical::general(self.green, t, s, r),
        }
    }

    pub fn spectral(&self, t: f64, s: f64, r: f64) -> f64 {
        let g = self.green;
        let mu = g.mu();
        let f = spectral::triple_integral(g.order(), t, s, r);
        let two_pi_half = (2.0 * std::f64::consts::PI).powf(g.nu() as f64 / 2.0);
        g.renorm(t) * g.renorm(s) * two_pi_half / (g.alpha() * g.alpha() * (t * s * r).powf(mu)) * f
    }

    pub fn spherical_mean(&self, t: f64, s: f64, r: f64) -> f64 {
        spherical::general(self.green, t, s, r)
    }

    /// d^2 = G(t) + G(s) - 2 cov.
    pub fn metric_sq(&self, t: f64, s: f64, r: f64) -> Result<f64> {
        let (gt, gs) = (self.green.value(t), self.green.value(s));
        let d2 = gt + gs - 2.0 * self.cov_radii(t, s, r).value;
        let slack = 1e-9 + 1e-13 * (gt + gs);
        if d2 < -slack {
            return Err(Error::Numerical(format!(
                "negative squared distance {d2:e} at t={t}, s={s}, r={r}"
            )));
        }
        Ok(d2.max(0.0))
    }
}

pub fn cov(a: &AvgPoint, b: &AvgPoint) -> Result<KernelValue> {
    Kernel::new(a.nu())?.cov(a, b)
}

pub fn intrinsic_metric(a: &AvgPoint, b: &AvgPoint) -> Result<f64> {
    let k = Kernel::new(a.nu())?;
    a.validate()?;
    b.validate()?;
    if a.nu() != b.nu() {
        return Err(domain("points of different dimension"));
    }
    Ok(k.metric_sq(a.t, b.t, a.distance(b))?.sqrt())
}

/// Psi(w) = 1 - 2^mu Gamma(mu+1) w^{-mu} J_mu(w).
pub fn psi(nu: u32, w: f64) -> Result<f64> {
    let g = Green::get(nu)?;
    if !(w >= 0.0) || !w.is_finite() {
        return Err(domain(format!("psi argument {w} must be finite and non-negative")));
    }
    let mu = g.mu();
    if w < 2.0 {
        let q = 0.25 * w * w;
        let half_nu = nu as f64 / 2.0;
        let mut term = q / half_nu;
        let mut sum = term;
        for m in 1..60 {
            let mf = m as f64;
            term *= -q / ((mf + 1.0) * (half_nu + mf));
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return Ok(sum);
    }
    let scale = 2f64.powf(mu) * gamma_half(g.order().twice() + 2);
    Ok(1.0 - scale * w.powf(-mu) * bessel_j_ord(g.order(), w))
}

#[cfg(test)]
mod tests;
