//! Bessel functions and the variance function G.

mod bessel;
mod green;

pub use bessel::{bessel_i, bessel_j, bessel_k, gamma_half, ln_gamma_half, BesselOrder, EULER_GAMMA};
pub(crate) use bessel::{i as bessel_i_ord, j as bessel_j_ord, k as bessel_k_ord};
pub use green::{
    alpha_nu, check_nu, check_radius, green_g, renorm_factor, Green, GreenScalar, MAX_NEGLOG, MAX_NU,
};
