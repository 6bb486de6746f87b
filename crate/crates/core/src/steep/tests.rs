use proptest::prelude::*;

use super::*;
use crate::rng::KeyedRng;
use crate::sampler::{sample_lattice_hierarchical, FieldReplica, PointPathSampler};
use crate::stats::{ks_critical_1pct, ks_normal, variance};
use crate::testfn::builtins::{constant, inverse_sqrt_g, oscillating_constant};
use crate::testfn::{Evaluator, GrowthCert, RadiusSequence};

fn path_on(nu: u32, grid: &[f64], seed: u64) -> Vec<f64> {
    PointPathSampler::new(nu, grid).unwrap().sample(&KeyedRng::new(seed), 0)
}

#[test]
fn constant_weight_gives_scaled_increment() {
    let f = constant(1.3).unwrap();
    let schedule = ScaleSchedule::geometric(2.0, 8).unwrap();
    let grid = fine_grid(&f, &schedule, 16).unwrap();
    let theta = path_on(2, &grid, 3);
    let path = compute_x(&theta, &grid, &f).unwrap();
    assert_eq!(path.points[0].x, 0.0);
    for (p, th) in path.points.iter().zip(&theta) {
        let want = 1.3 * (th - theta[0]);
        assert!((p.x - want).abs() <= 1e-12 * want.abs().max(1.0));
    }
}

#[test]
fn oscillating_constant_telescopes() {
    let seq = RadiusSequence::factorial_squared(4, 40.0).unwrap();
    let gamma = 0.8;
    let f = oscillating_constant(gamma, &seq).unwrap();
    // jumps at r_1..r_{M-1}; the last level's sign runs on to 0
    let radii: Vec<f64> = std::iter::once(1.0).chain(f.jumps().iter().copied()).collect();
    let schedule = ScaleSchedule::geometric(2.0, 40).unwrap();
    let grid = fine_grid(&f, &schedule, 4).unwrap();
    for r in &radii[1..] {
        assert!(grid.contains(r));
    }
    let theta = path_on(2, &grid, 11);
    let path = compute_x(&theta, &grid, &f).unwrap();
    let at = |t: f64| theta[grid.iter().position(|&g| g == t).unwrap()];
    for (k, &t) in grid.iter().enumerate() {
        // gamma sum_n (-1)^n (theta_{t v r_n} - theta_{t v r_{n-1}})
        let mut want = 0.0;
        for n in 1..radii.len() {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            want += sign * gamma * (at(t.max(radii[n])) - at(t.max(radii[n - 1])));
        }
        if t < radii[radii.len() - 1] {
            let sign = if radii.len() % 2 == 0 { 1.0 } else { -1.0 };
            want += sign * gamma * (theta[k] - at(radii[radii.len() - 1]));
        }
        assert!((path.points[k].x - want).abs() < 1e-10, "t={t}: {} vs {want}", path.points[k].x);
    }
}

#[test]
fn zero_field_gives_zero_path() {
    let f = inverse_sqrt_g(3, 0.5).unwrap();
    let grid = [1.0, 0.5, 0.1, 0.01];
    let path = compute_x(&[0.0; 4], &grid, &f).unwrap();
    assert!(path.points.iter().all(|p| p.x == 0.0));
    assert!(path.points.windows(2).all(|w| w[1].sigma > w[0].sigma));
}

#[test]
fn grid_errors() {
    let seq = RadiusSequence::factorial_squared(4, 40.0).unwrap();
    let f = oscillating_constant(1.0, &seq).unwrap();
    let r1 = seq.radii()[0];
    match Integrator::new(&f, &[1.0, 0.5, 0.1]) {
        Err(Error::MissingJump(j)) => assert_eq!(j, r1),
        other => panic!("{other:?}"),
    }
    let g = constant(1.0).unwrap();
    assert!(Integrator::new(&g, &[0.9, 0.5]).is_err());
    assert!(Integrator::new(&g, &[1.0, 0.5, 0.7]).is_err());
    assert!(compute_x(&[0.0, 1.0], &[1.0, 0.5, 0.2], &g).is_err());
}

#[test]
fn smooth_weights_converge_under_refinement() {
    let eval = Evaluator::LogPower { scale: 1.0, power: -0.5 };
    let f = TestFunction::smooth(2, eval, GrowthCert { cf: 10.0, rho: 1.0 }).unwrap();
    let schedule = ScaleSchedule::geometric(2.0, 12).unwrap();
    let fine = fine_grid(&f, &schedule, 256).unwrap();
    let theta = path_on(2, &fine, 5);
    let end = |stride: usize| {
        let idx: Vec<usize> = (0..fine.len()).step_by(stride).chain([fine.len() - 1]).collect();
        let mut idx = idx;
        idx.dedup();
        let grid: Vec<f64> = idx.iter().map(|&i| fine[i]).collect();
        let th: Vec<f64> = idx.iter().map(|&i| theta[i]).collect();
        compute_x(&th, &grid, &f).unwrap().points.last().unwrap().x
    };
    let best = end(1);
    let coarse = (end(256) - best).abs();
    let mid = (end(16) - best).abs();
    assert!(mid < coarse, "{mid} vs {coarse}");
}

#[test]
fn ratio_of_deterministic_drift() {
    let f = inverse_sqrt_g(4, 0.5).unwrap();
    let grid = [1.0, 0.3, 0.01];
    let mut path = compute_x(&[0.0; 3], &grid, &f).unwrap();
    for p in &mut path.points {
        p.x = steep_target(4) * p.sigma;
    }
    for &t in &grid[1..] {
        assert!((ratio(&path, t).unwrap() - 8f64.sqrt()).abs() < 1e-14);
    }
    assert!(matches!(ratio(&path, 1.0), Err(Error::UndefinedRatio(_))));
    assert!(ratio(&path, 0.2).is_err());
    assert_eq!(steep_target(2), 2.0);
}

#[test]
fn standardized_ratio_is_normal_and_variance_matches_clock() {
    let cases = [(constant(1.0).unwrap(), 2), (inverse_sqrt_g(3, 0.7).unwrap(), 3)];
    for (f, nu) in cases {
        let schedule = ScaleSchedule::geometric(2.0, 10).unwrap();
        let grid = fine_grid(&f, &schedule, 8).unwrap();
        let integ = Integrator::new(&f, &grid).unwrap();
        let sampler = PointPathSampler::new(nu, &grid).unwrap();
        let rng = KeyedRng::new(21);
        let xs: Vec<Vec<f64>> = (0..20_000).map(|r| integ.x_values(&sampler.sample(&rng, r))).collect();
        let last = grid.len() - 1;
        let sigma = integ.sigma()[last];
        let z: Vec<f64> = xs.iter().map(|x| x[last] / sigma * sigma.sqrt()).collect();
        assert!(ks_normal(&z) < ks_critical_1pct(z.len()));
        for &t in &schedule.values()[1..] {
            let k = grid.iter().position(|&g| g == t).unwrap();
            let v = variance(&xs.iter().map(|x| x[k]).collect::<Vec<_>>());
            assert!(v.z(integ.sigma()[k]) < 4.0, "nu={nu} t={t} {v:?} vs {}", integ.sigma()[k]);
        }
    }
}

#[test]
fn tube_events() {
    let f = constant(1.0).unwrap();
    let schedule = ScaleSchedule::geometric(4.0, 4).unwrap();
    let grid = fine_grid(&f, &schedule, 64).unwrap();
    let flat = compute_x(&vec![0.0; grid.len()], &grid, &f).unwrap();

    let mut drift = flat.clone();
    for p in &mut drift.points {
        p.x = 2.0 * p.sigma;
    }
    let report = detect_events(&drift, &schedule).unwrap();
    assert_eq!(report.p, vec![true; 4]);
    assert_eq!(report.phi, vec![true; 4]);
    assert!(report.warnings.is_empty());
    assert!(report.substeps.iter().all(|&s| s >= 64));

    // flat path: 2 Delta Sigma exceeds sqrt(Delta Sigma) once Delta Sigma > 1/4
    let g = f.green();
    let report = detect_events(&flat, &schedule).unwrap();
    for n in 1..=4 {
        let ds = g.value(schedule.t(n)) - g.value(schedule.t(n - 1));
        assert_eq!(report.p[n - 1], 2.0 * ds <= ds.sqrt(), "level {n}, dSigma={ds}");
    }
    for n in 1..4 {
        assert_eq!(report.phi[n], report.phi[n - 1] && report.p[n]);
    }

    let coarse_grid = fine_grid(&f, &schedule, 8).unwrap();
    let coarse = compute_x(&vec![0.0; coarse_grid.len()], &coarse_grid, &f).unwrap();
    assert_eq!(detect_events(&coarse, &schedule).unwrap().warnings.len(), 4);
    assert!(detect_events(&coarse, &ScaleSchedule::geometric(3.0, 2).unwrap()).is_err());
}

fn zero_replica(nu: u32, schedule: &ScaleSchedule) -> FieldReplica {
    let mut r = sample_lattice_hierarchical(nu, schedule, 0).unwrap();
    for l in &mut r.levels {
        l.iter_mut().for_each(|v| *v = 0.0);
    }
    r
}

fn all_kinds(nu: u32, schedule: &ScaleSchedule) -> Vec<CriterionKind> {
    let odd: Vec<f64> = schedule.values().iter().copied().skip(1).step_by(2).collect();
    let mut kinds = vec![
        CriterionKind::Steep,
        CriterionKind::SuperSteep,
        CriterionKind::SubSteep,
        CriterionKind::Sequential { radii: odd.clone() },
        CriterionKind::Oscillatory { gamma1: 0.3, gamma2: 0.3 },
    ];
    if nu == 2 {
        kinds.push(CriterionKind::Thick2d { gamma: 1.0 });
    } else {
        kinds.push(CriterionKind::ThickPoly { gamma: 0.3 });
        kinds.push(CriterionKind::SeqThick { gamma: 0.3, radii: odd });
        kinds.push(CriterionKind::Lasting { gamma: 0.3, fraction: 0.05 });
    }
    kinds
}

#[test]
fn zero_replica_has_empty_masks() {
    for (nu, f) in [(2, constant(1.0).unwrap()), (3, inverse_sqrt_g(3, 0.5).unwrap())] {
        let schedule = ScaleSchedule::geometric(2.0, 4).unwrap();
        let replica = zero_replica(nu, &schedule);
        for kind in all_kinds(nu, &schedule) {
            let mask = detect_mask(&replica, &f, &Criterion::new(kind.clone(), 0.5)).unwrap();
            assert!(mask.counts().iter().all(|&c| c == 0), "{kind:?}");
        }
    }
}

#[test]
fn injected_drift_is_flagged() {
    let gamma = 1.5;
    let f = constant(gamma).unwrap();
    let schedule = ScaleSchedule::geometric(2.0, 5).unwrap();
    let mut replica = zero_replica(2, &schedule);
    let lats = replica.lattices().unwrap();
    let target = 700;
    // theta_k = T Sigma_k / gamma along the target's ancestry gives X = T Sigma
    let mut idx = target;
    for n in (1..=5).rev() {
        replica.levels[n][idx] = 2.0 * f.sigma_value(schedule.t(n)) / gamma;
        idx = lats[n].parent_index(idx, &lats[n - 1]);
    }
    let mask = detect_mask(&replica, &f, &Criterion::new(CriterionKind::Steep, 0.05)).unwrap();
    assert!(mask.levels[5][target]);
    assert_eq!(mask.count(5), 1);
}

#[test]
fn constant_steep_equals_thick() {
    let gamma = 1.2;
    let f = constant(gamma).unwrap();
    let schedule = ScaleSchedule::geometric(2.0, 7).unwrap();
    let mut seen = 0;
    for seed in 0..4 {
        let replica = sample_lattice_hierarchical(2, &schedule, seed).unwrap();
        for a in [0.2, 0.5, 0.9] {
            let steep = detect_mask(&replica, &f, &Criterion::new(CriterionKind::Steep, a)).unwrap();
            let thick = detect_mask(&replica, &f, &Criterion::new(CriterionKind::Thick2d { gamma }, a)).unwrap();
            assert_eq!(steep.levels, thick.levels);
            seen += steep.counts().iter().sum::<usize>();
        }
    }
    assert!(seen > 0);
}

#[test]
fn incompatible_criteria() {
    let schedule = ScaleSchedule::geometric(2.0, 3).unwrap();
    let r2 = zero_replica(2, &schedule);
    let r3 = zero_replica(3, &schedule);
    let f2 = constant(1.0).unwrap();
    let f3 = inverse_sqrt_g(3, 0.5).unwrap();
    let c = |k| Criterion::new(k, 0.2);
    assert!(matches!(detect_mask(&r2, &f2, &c(CriterionKind::ThickPoly { gamma: 0.5 })), Err(Error::Incompatible(_))));
    assert!(matches!(detect_mask(&r3, &f3, &c(CriterionKind::Thick2d { gamma: 0.5 })), Err(Error::Incompatible(_))));
    assert!(matches!(detect_mask(&r2, &f2, &c(CriterionKind::Lasting { gamma: 0.5, fraction: 0.2 })), Err(Error::Incompatible(_))));
    assert!(matches!(detect_mask(&r2, &f3, &c(CriterionKind::Steep)), Err(Error::Incompatible(_))));
    assert!(detect_mask(&r2, &f2, &Criterion::new(CriterionKind::Steep, 0.0)).is_err());
    assert!(detect_mask(&r2, &f2, &Criterion::new(CriterionKind::Steep, 1.0)).is_err());
    assert!(detect_mask(&r2, &f2, &c(CriterionKind::Sequential { radii: vec![0.3] })).is_err());
    assert!(detect_mask(&r2, &f2, &Criterion::new(CriterionKind::Steep, 0.2).with_window(0)).is_err());
}

#[test]
fn lasting_default_fraction() {
    let frac = Criterion::lasting_fraction(0.4, 0.6);
    assert!((frac - (1.0 - (0.5f64 / 0.6).powi(2))).abs() < 1e-15);
    assert!(frac > 0.0);
}

#[test]
fn mask_exports_round_trip() {
    let schedule = ScaleSchedule::geometric(2.0, 5).unwrap();
    let replica = sample_lattice_hierarchical(2, &schedule, 8).unwrap();
    let crit = Criterion::new(CriterionKind::SuperSteep, 0.6).with_window(3);
    let mask = detect_mask(&replica, &constant(1.0).unwrap(), &crit).unwrap();
    assert!(mask.count(5) > 0);
    let json = mask.to_rle_json().unwrap();
    assert!(json.contains(r#""kind":"super_steep""#));
    let back = SetMask::from_rle_json(&json).unwrap();
    assert_eq!(back, mask);
    let mut csv = Vec::new();
    mask.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let total: usize = mask.levels.iter().map(|l| l.len()).sum();
    assert_eq!(text.lines().count(), total + 1);
    let flagged = text.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    assert_eq!(flagged, mask.counts().iter().sum::<usize>());
    assert!(SetMask::from_rle_json(&json.replace(r#""cells":1024"#, r#""cells":1000"#)).is_err());
}

fn masks(replica: &FieldReplica, f: &TestFunction, a: f64, window: usize) -> Vec<SetMask> {
    all_kinds(replica.nu, &replica.schedule)
        .into_iter()
        .map(|k| detect_mask(replica, f, &Criterion::new(k, a).with_window(window)).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn masks_nest(seed in any::<u64>(), a in 0.05f64..0.95, window in 2usize..5) {
        let schedule = ScaleSchedule::geometric(2.0, 5).unwrap();
        for (nu, f) in [(2, constant(1.6).unwrap()), (3, inverse_sqrt_g(3, 0.9).unwrap())] {
            let replica = sample_lattice_hierarchical(nu, &schedule, seed).unwrap();
            let m = masks(&replica, &f, a, window);
            let (steep, sup, sub, seq) = (&m[0], &m[1], &m[2], &m[3]);
            prop_assert!(steep.is_subset_of(sub));
            prop_assert!(sub.is_subset_of(sup));
            prop_assert!(steep.is_subset_of(seq));
            prop_assert!(seq.is_subset_of(sup));
            if nu == 3 {
                let (thick, lasting) = (&m[5], &m[7]);
                prop_assert!(lasting.is_subset_of(thick));
            }
        }
    }

    #[test]
    fn wider_band_never_shrinks(seed in any::<u64>(), a in 0.05f64..0.5, extra in 0.01f64..0.45) {
        let schedule = ScaleSchedule::geometric(2.0, 4).unwrap();
        for (nu, f) in [(2, constant(2.0).unwrap()), (3, inverse_sqrt_g(3, 0.8).unwrap())] {
            let replica = sample_lattice_hierarchical(nu, &schedule, seed).unwrap();
            let narrow = masks(&replica, &f, a, 2);
            let wide = masks(&replica, &f, a + extra, 2);
            for (n, w) in narrow.iter().zip(&wide) {
                prop_assert!(n.is_subset_of(w), "{}", n.criterion.name());
            }
        }
    }
}
