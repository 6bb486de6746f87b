use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::sampler::{sample_lattice_hierarchical, Lattice, ScaleSchedule};
use crate::steep::{Criterion, CriterionKind};
use crate::testfn::builtins::{constant, g_eps, inverse_sqrt_g};
use crate::testfn::RadiusSequence;

fn mask_from(nu: u32, schedule: &ScaleSchedule, flag: impl Fn(&Lattice, usize) -> bool) -> SetMask {
    let levels = crate::sampler::lattices(nu, schedule)
        .unwrap()
        .iter()
        .map(|lat| (0..lat.len()).map(|j| flag(lat, j)).collect())
        .collect();
    SetMask {
        criterion: Criterion::new(CriterionKind::Steep, 0.1),
        nu,
        schedule: schedule.clone(),
        seed: 0,
        levels,
    }
}

#[test]
fn full_and_empty_masks() {
    let s = ScaleSchedule::geometric(2.0, 4).unwrap();
    let full = mask_from(2, &s, |_, _| true);
    assert_eq!(box_count(&full), vec![1, 4, 16, 64, 256]);
    let none = mask_from(2, &s, |_, _| false);
    assert_eq!(box_count(&none), vec![0; 5]);
    let est = fit_dimension(&box_count(&full), &s).unwrap();
    assert!((est.slope - 2.0).abs() < 1e-12);
    assert!((est.r2 - 1.0).abs() < 1e-12);
    assert!(matches!(fit_dimension(&box_count(&none), &s), Err(Error::InsufficientData(_))));
}

#[test]
fn full_cube_slope_is_nu() {
    for nu in 1..=4u32 {
        let s = ScaleSchedule::geometric(3.0, 5).unwrap();
        let counts: Vec<u64> = (0..=5).map(|n| 3u64.pow(nu * n)).collect();
        let est = fit_dimension(&counts, &s).unwrap();
        assert!((est.slope - nu as f64).abs() < 1e-12, "nu {nu}: {}", est.slope);
    }
}

#[test]
fn cantor_mask() {
    // cells whose base-3 coordinate digits avoid 1: 2^(nu n) of them
    let s = ScaleSchedule::geometric(3.0, 4).unwrap();
    let mask = mask_from(2, &s, |lat, j| {
        lat.coords(j).iter().all(|&c| {
            let mut c = c;
            while c > 0 {
                if c % 3 == 1 {
                    return false;
                }
                c /= 3;
            }
            true
        })
    });
    // direct enumeration of digit strings
    let expected: Vec<u64> = (0..=4u32)
        .map(|n| {
            let m = 3u64.pow(n);
            let ok = (0..m).filter(|&c| (0..n).all(|k| (c / 3u64.pow(k)) % 3 != 1)).count() as u64;
            ok * ok
        })
        .collect();
    assert_eq!(box_count(&mask), expected);
    let est = fit_dimension(&box_count(&mask), &s).unwrap();
    assert!((est.slope - 4f64.ln() / 3f64.ln()).abs() < 1e-12);
}

#[test]
fn too_few_scales() {
    let s = ScaleSchedule::geometric(2.0, 5).unwrap();
    let err = fit_dimension(&[1, 4, 16, 0, 0, 0], &s).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)));
    assert!(fit_dimension(&[1; 7], &s).is_err());
}

#[test]
fn counts_csv_round_trip() {
    let s = ScaleSchedule::geometric(2.0, 4).unwrap();
    let est = fit_dimension(&[1, 3, 0, 40, 150], &s).unwrap();
    assert_eq!(est.fitted, 4);
    let mut buf = Vec::new();
    est.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("scale,count,log_count\n"));
    let back = read_counts_csv(buf.as_slice()).unwrap();
    assert_eq!(back, est.counts);
    assert_eq!(fit_counts(&back).unwrap(), est);
}

fn bounds(p: Prediction) -> (f64, f64) {
    p.bounds().expect("interval expected")
}

#[test]
fn predicted_examples() {
    // f = gamma in the plane: c = gamma^2 / (2 pi)
    // the builtin stops at sqrt(2 pi), so raise gamma in the serialized form
    let mut v: serde_json::Value = serde_json::from_str(&constant(2.0).unwrap().to_json().unwrap()).unwrap();
    let c = 2.6 * 2.6 / (2.0 * PI);
    v["segments"][0]["value"] = 2.6.into();
    v["builtin"]["ratio"] = serde_json::json!({ "upper": c, "lower": c });
    let big = TestFunction::from_json(&v.to_string()).unwrap();
    assert!(c > 1.0);
    assert!(predicted_dimension(&big, SetKind::Steep).unwrap().is_empty());
    assert!(predicted_dimension(&big, SetKind::Thick { gamma: 2.6 }).unwrap().is_empty());

    let unit = constant(PI.sqrt()).unwrap();
    let (lo, hi) = bounds(predicted_dimension(&unit, SetKind::Steep).unwrap());
    assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);

    // nu = 3, c / sqrt(G) with c^2 (nu - 2) = 1
    let thin = inverse_sqrt_g(3, 1.0).unwrap();
    let (lo, hi) = bounds(predicted_dimension(&thin, SetKind::Steep).unwrap());
    assert!(lo.abs() < 1e-12 && hi.abs() < 1e-12);

    let g = 1.3;
    let f = constant(1.0).unwrap();
    let (lo, hi) = bounds(predicted_dimension(&f, SetKind::Oscillatory { gamma1: g, gamma2: g }).unwrap());
    assert!((lo - (2.0 - g * g / PI)).abs() < 1e-12 && lo == hi);

    let f3 = inverse_sqrt_g(3, 0.5).unwrap();
    let (lo, hi) = bounds(predicted_dimension(&f3, SetKind::Lasting { gamma: 0.5 }).unwrap());
    assert!((lo - 1.5).abs() < 1e-12 && (hi - 2.25).abs() < 1e-12);
    let (lo, hi) = bounds(predicted_dimension(&f3, SetKind::Oscillatory { gamma1: 0.3, gamma2: 0.6 }).unwrap());
    assert!((lo - 3.0 * (1.0 - 0.72)).abs() < 1e-12 && (hi - 3.0 * (1.0 - 0.36)).abs() < 1e-12);
    assert!(predicted_dimension(&f, SetKind::Lasting { gamma: 0.5 }).is_err());
}

#[test]
fn missing_certificate() {
    let f = constant(1.0).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&f.to_json().unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("builtin");
    let bare = TestFunction::from_json(&v.to_string()).unwrap();
    for kind in [SetKind::Steep, SetKind::SubSteep, SetKind::SuperSteep, SetKind::Sequential { ratio_condition: true }] {
        assert!(matches!(predicted_dimension(&bare, kind), Err(Error::MissingCertificate(_))));
    }
    assert!(band_adjusted_slope(&bare, 0.1).is_err());
}

#[test]
fn band_adjustment() {
    let gamma2 = PI / 2.0;
    let f = constant(gamma2.sqrt()).unwrap();
    let (slope, formula) = band_adjusted_slope(&f, 0.15).unwrap();
    assert!((slope - (2.0 - gamma2 * 0.85 * 0.85 / PI)).abs() < 1e-12);
    assert!(formula.contains("(1 - a)^2"));
    let (full, _) = band_adjusted_slope(&f, 0.0).unwrap();
    assert!((full - 1.5).abs() < 1e-12);
}

proptest! {
    #[test]
    fn prediction_ordering(gamma in 0.05f64..2.5, gp in 0.1f64..0.9, eps in 0.01f64..0.3) {
        let seq = RadiusSequence::factorial_squared(6, 200.0).unwrap();
        let fs = [constant(gamma).unwrap(), g_eps(3, gp, eps, &seq).unwrap()];
        for f in &fs {
            let c = f.ratio_cert().unwrap();
            for kind in [SetKind::Steep, SetKind::SubSteep, SetKind::SuperSteep] {
                if let Some((lo, hi)) = predicted_dimension(f, kind).unwrap().bounds() {
                    prop_assert!(lo <= hi, "{kind:?} {c:?} {lo} {hi}");
                    if c.lower > 0.0 {
                        prop_assert_eq!(lo == hi, c.upper == c.lower);
                    }
                }
            }
        }
    }
}

/// Plain Monte Carlo of E|o + U - V|^-alpha.
fn kernel_oracle(o: &[f64], alpha: f64, draws: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let r2: f64 = o.iter().map(|&oi| {
            let d = oi + rng.random::<f64>() - rng.random::<f64>();
            d * d
        }).sum();
        let v = r2.powf(-alpha / 2.0);
        s += v;
        s2 += v * v;
    }
    let n = draws as f64;
    let m = s / n;
    (m, ((s2 / n - m * m) / n).sqrt())
}

#[test]
fn cell_kernel_matches_oracles() {
    // closed forms: int |d|^-1/2 (1 - |d|) over [-1, 1] = 8/3, and the mean
    // inverse distance in the unit square 4 ln(1 + sqrt 2) - 4 (sqrt 2 - 1) / 3
    let mut k1 = CellKernel::new(1, 0.5).unwrap();
    assert!((k1.unit(&[0]) - 8.0 / 3.0).abs() < 1e-4, "{}", k1.unit(&[0]));
    let mut k2 = CellKernel::new(2, 1.0).unwrap();
    let square = 4.0 * (1.0 + 2f64.sqrt()).ln() - 4.0 * (2f64.sqrt() - 1.0) / 3.0;
    assert!((k2.unit(&[0, 0]) - square).abs() < 1e-4 * square, "{} vs {square}", k2.unit(&[0, 0]));
    for o in [[1i64, 0], [1, 1], [0, -1], [3, 2], [5, 0]] {
        let of: Vec<f64> = o.iter().map(|&v| v as f64).collect();
        let (m, se) = kernel_oracle(&of, 1.0, 400_000);
        let got = k2.unit(&o);
        assert!((got - m).abs() < 5.0 * se + 1e-4 * m, "{o:?}: {got} vs {m} +- {se}");
    }
    let mut k3 = CellKernel::new(3, 2.0).unwrap();
    for o in [[0i64, 0, 0], [1, 0, 0], [1, 1, 1]] {
        let of: Vec<f64> = o.iter().map(|&v| v as f64).collect();
        let (m, se) = kernel_oracle(&of, 2.0, 400_000);
        let got = k3.unit(&o);
        assert!((got - m).abs() < 5.0 * se + 1e-3 * m, "{o:?}: {got} vs {m} +- {se}");
    }
    assert!(CellKernel::new(2, 2.0).is_err());
}

fn drift_paths(f: &TestFunction, sampler: &ConcentricSampler) -> CellPaths {
    // theta-bar rising exactly along the target drift keeps every cell in the tube
    let mut paths = sampler.sample(1);
    let green = f.green();
    let gamma = f.value(1.0);
    let target = crate::steep::steep_target(f.nu());
    for p in &mut paths.paths {
        for (i, &t) in sampler.grid().iter().enumerate() {
            p[i] = target * gamma * (green.value(t) - green.value(1.0));
        }
    }
    paths
}

#[test]
fn uniform_measure_when_everything_survives() {
    let f = constant(0.8).unwrap();
    let s = ScaleSchedule::geometric(2.0, 3).unwrap();
    let sampler = ConcentricSampler::new(2, &s, 3, 2).unwrap();
    let paths = drift_paths(&f, &sampler);
    let mu = frostman_measure(&paths, &f, 1.0, PhiWeight::Value { w: 1.0 }).unwrap();
    assert_eq!(mu.survivors.len(), 64);
    assert!((mu.total_mass - 1.0).abs() < 1e-12);
    assert!(mu.weights().iter().all(|&w| (w - 1.0 / 64.0).abs() < 1e-15));
    assert!(mu.energy.is_finite() && mu.energy > 0.0);

    // mean inverse distance between uniform points of [-1, 1]^2 is half that of the unit square
    let square = 4.0 * (1.0 + 2f64.sqrt()).ln() - 4.0 * (2f64.sqrt() - 1.0) / 3.0;
    assert!((mu.energy - square / 2.0).abs() < 1e-3, "{} vs {}", mu.energy, square / 2.0);
}

#[test]
fn zero_survivors_flagged() {
    let f = constant(0.8).unwrap();
    let s = ScaleSchedule::geometric(2.0, 2).unwrap();
    let sampler = ConcentricSampler::new(2, &s, 2, 1).unwrap();
    let mut paths = sampler.sample(3);
    for p in &mut paths.paths {
        for (i, v) in p.iter_mut().enumerate() {
            *v = -10.0 * i as f64;
        }
    }
    let mu = frostman_measure(&paths, &f, 1.0, PhiWeight::Endpoint).unwrap();
    assert!(mu.empty && mu.total_mass == 0.0 && mu.energy == 0.0);
}

#[test]
fn energy_monotone_in_alpha() {
    // support of diameter <= 1, where |y - w|^-alpha grows with alpha
    let lat = Lattice::new(2, 1.0 / 8.0).unwrap();
    let cells: Vec<usize> = (0..lat.len()).filter(|&j| lat.coords(j).iter().all(|&c| c < 2)).collect();
    let mut last = 0.0;
    for alpha in [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 1.9] {
        let e = cell_energy(&lat, &cells, 0.25, alpha).unwrap();
        assert!(e >= last, "alpha {alpha}: {e} < {last}");
        last = e;
    }
}

#[test]
fn mass_has_unit_mean() {
    let f = constant(1.0).unwrap();
    let s = ScaleSchedule::geometric(2.0, 2).unwrap();
    let sampler = ConcentricSampler::new(2, &s, 2, 1).unwrap();
    let measures: Vec<FrostmanMeasure> = (0..1500u64)
        .map(|r| frostman_measure(&sampler.sample(r), &f, 0.5, PhiWeight::Endpoint).unwrap())
        .collect();
    let summary = FrostmanSummary::new(&measures).unwrap();
    assert!(summary.mass.z(1.0) < 4.0, "{:?}", summary.mass);
    assert!(summary.second_moment.value >= summary.mass.value.powi(2));
}

#[test]
fn mc_phi_probability_matches_endpoint_formula() {
    let f = constant(1.0).unwrap();
    let s = ScaleSchedule::geometric(2.0, 3).unwrap();
    let sampler = ConcentricSampler::new(2, &s, 3, 1).unwrap();
    let est = phi_probability_mc(&f, sampler.grid(), sampler.marks(), 200_000, 5).unwrap();
    let integ = crate::steep::Integrator::new(&f, sampler.grid()).unwrap();
    let exact: f64 = integ
        .sigma()
        .windows(2)
        .map(|w| {
            let shift = 2.0 * (w[1] - w[0]).sqrt();
            crate::stats::normal_cdf(1.0 - shift) - crate::stats::normal_cdf(-1.0 - shift)
        })
        .product();
    assert!(est.z(exact) < 4.0, "{est:?} vs {exact}");
}

#[test]
fn lineage_paths_from_replica() {
    let f = constant(0.5).unwrap();
    let s = ScaleSchedule::geometric(2.0, 4).unwrap();
    let rep = sample_lattice_hierarchical(2, &s, 9).unwrap();
    let paths = CellPaths::from_replica(&rep, 4).unwrap();
    assert!(!paths.concentric);
    assert_eq!(paths.paths.len(), 256);
    let mu = frostman_measure(&paths, &f, 1.0, PhiWeight::Sandwich { p: 0.5 }).unwrap();
    assert!(mu.total_mass >= 0.0);
    assert!(CellPaths::from_replica(&rep, 5).is_err());
}
