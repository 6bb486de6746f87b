use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use super::*;
use crate::quad::{adaptive, GaussLegendre};
use crate::specfun::bessel_j;

fn pt(x: &[f64], t: f64) -> AvgPoint {
    AvgPoint::new(x.to_vec(), t).unwrap()
}

/// Double average of e^{-rho}/(4 pi rho) over two spheres in R^3, with the
/// renormalization t / sinh t applied to each.
fn surface_oracle(t: f64, s: f64, r: f64) -> f64 {
    let n = 64;
    let rule = GaussLegendre::new(n);
    let (zs, ws) = rule.rule();
    let sphere = |rad: f64, centre: [f64; 3]| {
        let mut pts = Vec::new();
        for (z, w) in zs.iter().zip(ws) {
            let st = (1.0 - z * z).sqrt();
            for k in 0..n {
                let ph = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                let u = [centre[0] + rad * st * ph.cos(), centre[1] + rad * st * ph.sin(), centre[2] + rad * z];
                pts.push((u, w / (2.0 * n as f64)));
            }
        }
        pts
    };
    let a = sphere(t, [0.0; 3]);
    let b = sphere(s, [0.0, 0.0, r]);
    let mut acc = 0.0;
    for (u, wu) in &a {
        for (v, wv) in &b {
            let rho = ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2) + (u[2] - v[2]).powi(2)).sqrt();
            acc += wu * wv * (-rho).exp() / (4.0 * PI * rho);
        }
    }
    acc * (t / t.sinh()) * (s / s.sinh())
}

#[test]
fn variance_case() {
    for nu in [2usize, 3, 4] {
        let a = pt(&vec![0.1; nu], 0.3);
        let v = cov(&a, &a).unwrap();
        assert_eq!(v.regime, Regime::Concentric);
        assert_eq!(v.value, Green::get(nu as u32).unwrap().value(0.3));
    }
}

#[test]
fn disjoint_two_dimensional_value() {
    let k0 = adaptive(0.0, 40.0, 1e-300, 1e-14, |u: f64| (-0.5 * u.cosh()).exp());
    let v = cov(&pt(&[0.0, 0.0], 0.1), &pt(&[0.5, 0.0], 0.1)).unwrap();
    assert_eq!(v.regime, Regime::Disjoint);
    assert!((v.value - k0 / (2.0 * PI)).abs() < 1e-12);
}

#[test]
fn inclusion_three_dimensional_against_surface_oracle() {
    let v = cov(&pt(&[0.0, 0.0, 0.0], 0.4), &pt(&[0.0, 0.0, 0.2], 0.05)).unwrap();
    assert_eq!(v.regime, Regime::Inclusion);
    let oracle = surface_oracle(0.4, 0.05, 0.2);
    assert!((v.value - oracle).abs() < 1e-9, "{} vs {}", v.value, oracle);
}

/// Same double average, with the inner sphere done by the shell formula
/// avg f(|u - v|) = (1/(2 s d)) int_{|d-s|}^{d+s} f(rho) rho d rho.
fn shell_oracle(t: f64, s: f64, r: f64) -> f64 {
    let inner = |z: f64| {
        let d = (t * t + r * r - 2.0 * t * r * z).max(0.0).sqrt();
        ((-(d - s).abs()).exp() - (-(d + s)).exp()) / (2.0 * s * d * 4.0 * PI)
    };
    let z_star = (t * t + r * r - s * s) / (2.0 * t * r);
    let mut cuts = vec![-1.0];
    if z_star.abs() < 1.0 {
        cuts.push(z_star);
    }
    cuts.push(1.0);
    let avg: f64 = cuts.windows(2).map(|w| adaptive(w[0], w[1], 1e-15, 1e-13, inner)).sum::<f64>() / 2.0;
    avg * (t / t.sinh()) * (s / s.sinh())
}

#[test]
fn general_three_dimensional_against_shell_oracle() {
    let v = cov(&pt(&[0.0, 0.0, 0.0], 0.3), &pt(&[0.0, 0.0, 0.25], 0.2)).unwrap();
    assert_eq!(v.regime, Regime::General);
    let oracle = shell_oracle(0.3, 0.2, 0.25);
    assert!((v.value - oracle).abs() < 1e-9, "{} vs {}", v.value, oracle);
    let inc = shell_oracle(0.4, 0.05, 0.2);
    assert!((inc - surface_oracle(0.4, 0.05, 0.2)).abs() < 1e-9);
}

#[test]
fn spectral_route_reproduces_closed_forms() {
    for nu in [2u32, 3, 4, 5] {
        let k = Kernel::new(nu).unwrap();
        for &(t, s, r) in &[(0.1, 0.2, 0.5), (0.3, 0.3, 0.6), (0.05, 0.1, 1.2)] {
            let want = k.disjoint(r);
            assert!((k.spectral(t, s, r) - want).abs() < 1e-9, "nu={nu} disjoint {t} {s} {r}");
        }
        for &(t, s, r) in &[(0.5f64, 0.1f64, 0.2), (0.9, 0.3, 0.6), (0.2, 0.6, 0.1)] {
            let want = k.inclusion(t.max(s), r);
            assert!((k.spectral(t, s, r) - want).abs() < 1e-9, "nu={nu} inclusion {t} {s} {r}");
        }
    }
}

#[test]
fn routes_agree_in_general_regime() {
    for nu in [2u32, 3, 4, 6] {
        let k = Kernel::new(nu).unwrap();
        for &(t, s, r) in &[(0.3, 0.3, 0.2), (0.5, 0.2, 0.4), (0.1, 0.12, 0.15), (1.0, 0.8, 0.9)] {
            let a = k.spectral(t, s, r);
            let b = k.spherical_mean(t, s, r);
            assert!((a - b).abs() < 1e-8, "nu={nu} ({t},{s},{r}) {a} vs {b}");
        }
    }
}

#[test]
fn general_route_continuous_at_regime_boundaries() {
    for nu in [2u32, 3, 4] {
        let k = Kernel::new(nu).unwrap();
        for &(t, s) in &[(0.2f64, 0.3f64), (0.1, 0.1), (0.5, 0.05)] {
            let r = t + s;
            assert!((k.spectral(t, s, r * (1.0 - 1e-9)) - k.disjoint(r)).abs() < 1e-6);
            let r = (t - s).abs();
            if r > 0.0 {
                let v = k.spectral(t, s, r * (1.0 + 1e-9));
                assert!((v - k.inclusion(t.max(s), r)).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn metric_examples() {
    let a = pt(&[0.2, 0.2], 0.5);
    assert_eq!(intrinsic_metric(&a, &a).unwrap(), 0.0);
    let b = pt(&[0.2, 0.2], 0.25);
    let g = Green::get(2).unwrap();
    let d = intrinsic_metric(&a, &b).unwrap();
    assert!((d * d - (g.value(0.25) - g.value(0.5))).abs() < 1e-13);
}

#[test]
fn psi_examples() {
    for nu in 2..=6 {
        assert_eq!(psi(nu, 0.0).unwrap(), 0.0);
    }
    assert!((psi(2, 1.0).unwrap() - (1.0 - bessel_j(0.0, 1.0).unwrap())).abs() < 1e-14);
    // three dimensions: 1 - sin w / w, and the alternating series directly
    let w: f64 = 2.0;
    let mut series = 0.0;
    let mut fact = 1.0;
    for m in 1..30 {
        fact *= (2 * m) as f64 * (2 * m + 1) as f64;
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        series += sign * w.powi(2 * m) / fact;
    }
    assert!((psi(3, w).unwrap() - series).abs() < 1e-14);
    assert!((psi(3, w).unwrap() - (1.0 - w.sin() / w)).abs() < 1e-14);
    // both branches meet at w = 2
    for nu in 2..=6 {
        let lo = psi(nu, 2.0 - 1e-12).unwrap();
        let hi = psi(nu, 2.0).unwrap();
        assert!((lo - hi).abs() < 1e-11);
    }
}

#[test]
fn rejects_bad_points() {
    assert!(AvgPoint::new(vec![1.5, 0.0], 0.5).is_err());
    assert!(AvgPoint::new(vec![0.0, 0.0], 0.0).is_err());
    assert!(AvgPoint::new(vec![0.0], 0.5).is_err());
    assert!(psi(2, -1.0).is_err());
}

fn points_strategy(nu: usize, max: usize) -> impl Strategy<Value = Vec<AvgPoint>> {
    prop::collection::vec(
        (prop::collection::vec(-1.0f64..1.0, nu), 0.05f64..1.0),
        2..max,
    )
    .prop_map(|v| v.into_iter().map(|(x, t)| AvgPoint { x, t }).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn gram_matrix_is_positive(points in points_strategy(2, 64)) {
        let k = Kernel::new(2).unwrap();
        let n = points.len();
        let m = DMatrix::from_fn(n, n, |i, j| k.cov(&points[i], &points[j]).unwrap().value);
        let diag = (0..n).map(|i| m[(i, i)]).fold(0.0, f64::max);
        let eig = SymmetricEigen::new(m);
        let low = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(low >= -1e-7 * diag, "min eigenvalue {low}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn disjoint_value_ignores_radii(r in 0.3f64..2.5, ft in 0.05f64..0.95, split in 0.05f64..0.95) {
        let k = Kernel::new(3).unwrap();
        let budget = (r * ft).min(1.0);
        let t = budget * split;
        let s = budget - t;
        let v = k.cov_radii(t.max(1e-6), s.max(1e-6), r);
        prop_assert_eq!(v.regime, Regime::Disjoint);
        prop_assert!((v.value - k.disjoint(r)).abs() <= 1e-8);
    }

    #[test]
    fn metric_triangle_inequality(points in points_strategy(3, 4)) {
        prop_assume!(points.len() >= 3);
        let (a, b, c) = (&points[0], &points[1], &points[2]);
        let ab = intrinsic_metric(a, b).unwrap();
        let bc = intrinsic_metric(b, c).unwrap();
        let ac = intrinsic_metric(a, c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!((ab - intrinsic_metric(b, a).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn frozen_bound_constants_hold_on_denser_grid() {
    use super::bounds::*;
    use crate::constants;
    for nu in 2..=6u32 {
        let radii = log_grid(7e-4, 1.0, 19);
        let eq = equal_radius_ratio(nu, &radii, 37).unwrap();
        assert!(eq <= constants::equal_radius_metric(nu).unwrap(), "nu={nu} equal {eq}");
        let mixed = mixed_radius_ratio(nu, &log_grid(7e-4, 1.0, 10), 19).unwrap();
        assert!(mixed <= constants::mixed_radius_metric(nu).unwrap(), "nu={nu} mixed {mixed}");
        let p = psi_ratio(nu, &log_grid(1e-5, 1e4, 3000)).unwrap();
        assert!(p <= constants::psi_root(nu).unwrap(), "nu={nu} psi {p}");
    }
    assert!(constants::psi_root(7).is_none());
}
