use fracfield::analyze::{
    bound_exponent, caputo_mode_residual, calibrated_spacetime_bound, calibrated_temporal_bound, fit_loglog_slope,
    fit_window, modulus_stat, spatial_bound, spatial_bound_sup_form, truncated_constants, verify_bound, BoundKind,
};
use fracfield::domains::{build_eigensystem, DomainSpec};
use fracfield::kernels::KernelEngine;
use fracfield::mlf::TimeGrid;
use fracfield::simulate::{sample_ensemble, Method, SimulationPlan};
use fracfield::spectrum::{build_truncation, FracParams};
use fracfield::Error;
use proptest::prelude::*;

fn engine(spec: DomainSpec, beta: f64, alpha: f64, k: usize) -> KernelEngine {
    let sys = build_eigensystem(spec, k).unwrap();
    let p = FracParams::new(beta, alpha, 0.0).unwrap();
    KernelEngine::new(build_truncation(&sys, &p, k).unwrap())
}

fn log_lags(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn center(spec: &DomainSpec) -> Vec<f64> {
    match spec {
        DomainSpec::Interval { length } => vec![0.5 * length],
        DomainSpec::Rectangle { lengths } => lengths.iter().map(|l| 0.5 * l).collect(),
        _ => vec![0.0, 0.0],
    }
}

#[test]
fn temporal_slopes_within_exponent_band() {
    let sets = [
        (0.3, 2.0, DomainSpec::Interval { length: 80.0 }),
        (0.4, 3.0, DomainSpec::Interval { length: 80.0 }),
        (0.45, 2.5, DomainSpec::Rectangle { lengths: vec![1.0, 1.0] }),
    ];
    for (beta, alpha, spec) in sets {
        let eng = engine(spec.clone(), beta, alpha, 128);
        let (lo, hi) = fit_window(&eng, 1.0);
        // below 1e-6 the lag t − s itself loses digits
        let lo = lo.max(1e-6);
        let lags = log_lags(lo, hi, 11);
        let s: Vec<f64> = lags.iter().map(|h| 1.0 - h).collect();
        let curve = eng.temporal_variogram(&center(&spec), 1.0, &s).unwrap();
        let fit = fit_loglog_slope(&curve, (0.99 * lo, 1.01 * hi)).unwrap();
        let theta = bound_exponent(eng.truncation().params(), spec.dim(), BoundKind::Temporal).unwrap().theta;
        assert_eq!(fit.points, 11);
        assert!(fit.slope <= 1.0 + 2.0 * fit.stderr, "{spec:?}: {fit:?}");
        assert!(fit.slope >= theta - 0.1, "{spec:?}: {fit:?} vs theta {theta}");
    }
}

#[test]
fn calibrated_temporal_bound_contains_curve() {
    let eng = engine(DomainSpec::Interval { length: 1.0 }, 0.4, 3.0, 32);
    let lags = log_lags(1e-3, 1e-1, 9);
    let s: Vec<f64> = lags.iter().map(|h| 1.0 - h).collect();
    let curve = eng.temporal_variogram(&[0.5], 1.0, &s).unwrap();
    let bound = calibrated_temporal_bound(&curve, eng.truncation().params(), 1, (1e-3, 0.1), 2.0).unwrap();
    let r = verify_bound(&curve, &bound).unwrap();
    assert!(r.holds);
    assert!((r.max_ratio - 0.5).abs() < 1e-12);
    let mut bad = curve.clone();
    bad.values.iter_mut().for_each(|v| *v *= 10.0);
    assert!(!verify_bound(&bad, &bound).unwrap().holds);
}

#[test]
fn spatial_bound_holds_with_truncated_constants() {
    let eng = engine(DomainSpec::Interval { length: 1.0 }, 0.4, 3.0, 8);
    let x = [0.37];
    let ys: Vec<Vec<f64>> = log_lags(1e-3, 0.6, 20).iter().map(|h| vec![x[0] + h]).collect();
    let curve = eng.spatial_variogram(1.0, &x, &ys).unwrap();
    let bound = spatial_bound(&eng, 1.0).unwrap();
    assert_eq!(bound.theta, 2.0);
    let r = verify_bound(&curve, &bound).unwrap();
    assert!(r.holds && r.max_ratio <= 1.0, "{r:?}");
    let mut bad = curve.clone();
    bad.values.iter_mut().for_each(|v| *v *= 10.0);
    let r = verify_bound(&bad, &bound).unwrap();
    assert!(!r.holds, "{r:?}");
    let loose = spatial_bound_sup_form(&eng, 1.0).unwrap();
    assert!(loose.prefactor >= bound.prefactor);
    assert!(verify_bound(&curve, &loose).unwrap().holds);

    let c = truncated_constants(&eng, 1.0).unwrap();
    assert!((c.sup_norm - 2f64.sqrt()).abs() < 1e-12);
    // sine modes: Lipschitz constant √2 kπ up to the 5% margin
    let exact = 2f64.sqrt() * 8.0 * std::f64::consts::PI;
    assert!(c.lipschitz >= exact && c.lipschitz <= 1.06 * exact);
}

#[test]
fn spatial_bound_holds_on_square_and_disk() {
    for spec in [DomainSpec::Rectangle { lengths: vec![1.0, 1.0] }, DomainSpec::Disk { radius: 1.0 }] {
        let eng = engine(spec.clone(), 0.3, 2.5, 10);
        let x = match spec {
            DomainSpec::Disk { .. } => vec![0.1, -0.2],
            _ => vec![0.4, 0.45],
        };
        let ys: Vec<Vec<f64>> = log_lags(1e-3, 0.5, 12).iter().map(|h| vec![x[0] + 0.6 * h, x[1] + 0.8 * h]).collect();
        let curve = eng.spatial_variogram(0.7, &x, &ys).unwrap();
        let r = verify_bound(&curve, &spatial_bound(&eng, 0.7).unwrap()).unwrap();
        assert!(r.holds, "{spec:?}: {r:?}");
    }
}

#[test]
fn spacetime_bound_and_consistency() {
    let eng = engine(DomainSpec::Interval { length: 1.0 }, 0.4, 3.0, 16);
    let (t, x) = (1.0, vec![0.4]);
    let points: Vec<(f64, Vec<f64>)> = log_lags(1e-3, 0.3, 12)
        .iter()
        .map(|r| (t - 0.6 * r, vec![x[0] + 0.8 * r]))
        .collect();
    let curve = eng.spatiotemporal_variogram(t, &x, &points).unwrap();
    let bound = calibrated_spacetime_bound(&eng, t, &x, &points, 2.0).unwrap();
    assert_eq!(bound.theta, 0.6);
    let r = verify_bound(&curve, &bound).unwrap();
    assert!(r.holds, "{r:?}");
    let mut bad = curve.clone();
    bad.values.iter_mut().for_each(|v| *v *= 100.0);
    assert!(!verify_bound(&bad, &bound).unwrap().holds);

    let along: Vec<(f64, Vec<f64>)> = points.iter().map(|(s, _)| (*s, x.clone())).collect();
    let st = eng.spatiotemporal_variogram(t, &x, &along).unwrap();
    let s: Vec<f64> = along.iter().map(|p| p.0).collect();
    let tv = eng.temporal_variogram(&x, t, &s).unwrap();
    for (a, b) in st.values.iter().zip(&tv.values) {
        assert!((a - b).abs() <= 1e-12 * b);
    }
    assert!(matches!(verify_bound(&st, &spatial_bound(&eng, t).unwrap()), Err(Error::KindMismatch { .. })));
}

#[test]
fn caputo_residual_examples() {
    let g = |n| TimeGrid::uniform(1.0, n).unwrap();
    let r1 = caputo_mode_residual(1.0, 1.0, &g(129)).unwrap();
    let r2 = caputo_mode_residual(1.0, 1.0, &g(257)).unwrap();
    // backward difference of e^{-t}: residual ≈ Δt/2 · e^{-t}
    assert!(r1 < 0.5 / 128.0 && r1 > 0.25 / 128.0);
    assert!((r1 / r2 - 2.0).abs() < 0.05);

    let a = caputo_mode_residual(1.0, 0.5, &g(256)).unwrap();
    let b = caputo_mode_residual(1.0, 0.5, &g(512)).unwrap();
    assert!(a / b >= 1.2, "ratio {}", a / b);
    assert!(caputo_mode_residual(0.0, 0.5, &g(64)).unwrap() < 1e-14);
    assert!(matches!(caputo_mode_residual(1.0, 0.5, &g(32)), Err(Error::GridTooSmall { .. })));
}

fn ensemble(k: usize, reps: usize, xs: Vec<f64>) -> fracfield::simulate::FieldEnsemble {
    let eng = engine(DomainSpec::Interval { length: 80.0 }, 0.4, 3.0, k);
    let pts = xs.into_iter().map(|x| vec![x]).collect();
    let plan = SimulationPlan::new(TimeGrid::uniform(1.0, 33).unwrap(), pts, reps, 31, Method::Cholesky).unwrap();
    sample_ensemble(&eng, &plan).unwrap()
}

#[test]
fn modulus_statistic_examples() {
    // small lags must sit below the slowest relaxation time, hence the long interval
    let xs: Vec<f64> = (0..=16).map(|i| 40.0 + i as f64 / 16.0).collect();
    let ens = ensemble(4, 200, xs);
    let report = modulus_stat(&ens, 0.6, &[0.4, 0.2, 0.1, 0.05]).unwrap();
    assert!(report.consistent, "{:?}", report.rows.iter().map(|r| r.p95).collect::<Vec<_>>());
    assert_eq!(report.verdict(), "consistent");

    // beyond the space-time diameter every pair counts
    let big = modulus_stat(&ens, 0.6, &[10.0]).unwrap();
    let mut global: f64 = 0.0;
    for r in 0..ens.replicates() {
        let f = ens.replicate(r);
        for a in f {
            for b in f {
                global = global.max((a - b).powi(2));
            }
        }
    }
    assert_eq!(big.rows[0].max_raw, global);

    let src = ensemble(4, 100, vec![20.0, 60.0]);
    let mut bytes = Vec::new();
    src.write_binary(&mut bytes).unwrap();
    let n_values = src.values().len() * 8;
    let len = bytes.len();
    bytes[len - n_values..].iter_mut().for_each(|b| *b = 0);
    let zero = fracfield::simulate::FieldEnsemble::read_binary(bytes.as_slice()).unwrap();
    let rep = modulus_stat(&zero, 0.6, &[0.5, 0.25, 0.125]).unwrap();
    assert!(rep.rows.iter().all(|r| r.max_raw == 0.0 && r.p95 == 0.0));

    assert!(matches!(
        modulus_stat(&zero, 0.6, &[0.01]),
        Err(Error::GridTooCoarse { .. })
    ));
    let few = ensemble(2, 20, vec![0.5]);
    assert!(matches!(modulus_stat(&few, 0.6, &[0.5]), Err(Error::InsufficientReplicates { .. })));
}

proptest! {
    #[test]
    fn exponent_depends_only_on_order_and_beta(
        beta in 0.05f64..0.49,
        order in 0.6f64..6.0,
        split in 0.05f64..0.95,
        n in 1usize..=2,
    ) {
        let a = FracParams::new(beta, order, 0.0).unwrap();
        let b = FracParams::new(beta, order * split, order * (1.0 - split)).unwrap();
        let c = FracParams::with_poly(beta, 0.5 * order, 0.0, vec![1.0, 0.5, 2.0]).unwrap();
        for kind in [BoundKind::Temporal, BoundKind::Spatial, BoundKind::Spacetime] {
            let ra = bound_exponent(&a, n, kind).map(|s| s.theta).ok();
            let rb = bound_exponent(&b, n, kind).map(|s| s.theta).ok();
            let rc = bound_exponent(&c, n, kind).map(|s| s.theta).ok();
            match (ra, rb, rc) {
                (Some(x), Some(y), Some(z)) => {
                    prop_assert!((x - y).abs() < 1e-12 && (x - z).abs() < 1e-12);
                }
                (None, None, None) => {}
                other => prop_assert!(false, "admissibility differs: {:?}", other),
            }
        }
    }
}
