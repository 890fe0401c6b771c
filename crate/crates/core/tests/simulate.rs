use fracfield::domains::{build_eigensystem, DomainSpec};
use fracfield::kernels::KernelEngine;
use fracfield::mlf::TimeGrid;
use fracfield::simulate::{
    ensemble_estimate, riemann_sample, sample_ensemble, CholeskySampler, FieldEnsemble, Method, RiemannSampler,
    SimulationPlan, Target,
};
use fracfield::spectrum::{build_truncation, FracParams};
use fracfield::Error;

fn engine(beta: f64, alpha: f64, k: usize) -> KernelEngine {
    let sys = build_eigensystem(DomainSpec::Interval { length: 1.0 }, k).unwrap();
    let p = FracParams::new(beta, alpha, 0.0).unwrap();
    KernelEngine::new(build_truncation(&sys, &p, k).unwrap())
}

fn plan(m: usize, horizon: f64, xs: &[f64], reps: usize, seed: u64, method: Method) -> SimulationPlan {
    let pts = xs.iter().map(|x| vec![*x]).collect();
    SimulationPlan::new(TimeGrid::uniform(horizon, m).unwrap(), pts, reps, seed, method).unwrap()
}

#[test]
fn same_seed_same_arrays() {
    let eng = engine(0.4, 3.0, 6);
    for method in [Method::Cholesky, Method::Riemann] {
        let p = plan(12, 1.0, &[0.2, 0.5], 1, 99, method);
        let a = sample_ensemble(&eng, &p).unwrap();
        let b = sample_ensemble(&eng, &p).unwrap();
        assert_eq!(a.values(), b.values());
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let eng = engine(0.4, 3.0, 6);
    let p = plan(10, 1.0, &[0.2, 0.5, 0.9], 64, 7, Method::Cholesky);
    let many = sample_ensemble(&eng, &p).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let one = pool.install(|| sample_ensemble(&eng, &p).unwrap());
    let bits = |e: &FieldEnsemble| e.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&many), bits(&one));
}

#[test]
fn replicate_stream_independent_of_count() {
    let eng = engine(0.4, 3.0, 4);
    let small = sample_ensemble(&eng, &plan(8, 1.0, &[0.3], 3, 5, Method::Cholesky)).unwrap();
    let big = sample_ensemble(&eng, &plan(8, 1.0, &[0.3], 10, 5, Method::Cholesky)).unwrap();
    assert_eq!(small.replicate(2), big.replicate(2));
    let other = sample_ensemble(&eng, &plan(8, 1.0, &[0.3], 3, 6, Method::Cholesky)).unwrap();
    assert_ne!(small.replicate(0), other.replicate(0));
}

#[test]
fn initial_values_are_zero() {
    let eng = engine(0.3, 2.0, 5);
    for method in [Method::Cholesky, Method::Riemann] {
        let e = sample_ensemble(&eng, &plan(9, 2.0, &[0.1, 0.6], 20, 1, method)).unwrap();
        for r in 0..20 {
            for p in 0..2 {
                assert_eq!(e.value(r, 0, p), 0.0);
            }
        }
    }
}

#[test]
fn exponential_single_mode_variance() {
    let eng = engine(1.0, 2.0, 1);
    let lam = eng.truncation().lambdas()[0];
    let x = 0.3;
    let e = sample_ensemble(&eng, &plan(6, 1.0, &[x], 5000, 2024, Method::Cholesky)).unwrap();
    let phi2 = 2.0 * (std::f64::consts::PI * x).sin().powi(2);
    for i in 1..6 {
        let t = e.plan.times.points()[i];
        let exact = phi2 * (1.0 - (-2.0 * lam * t).exp()) / (2.0 * lam);
        let est = ensemble_estimate(&e, &[Target::Covariance((i, 0), (i, 0))]).unwrap()[0];
        assert!((est.value - exact).abs() <= 4.0 * est.stderr, "t={t}: {est:?} vs {exact}");
    }
}

#[test]
fn riemann_covariance_approaches_kernel_monotonically() {
    let eng = engine(0.4, 3.0, 2);
    let exact = eng.mode_covariance_matrix(0, &[0.0, 0.5, 1.0]).unwrap();
    let mut prev_gap = f64::INFINITY;
    for m in [17usize, 33, 65, 129] {
        let grid = TimeGrid::uniform(1.0, m).unwrap();
        let s = RiemannSampler::new(&eng, &grid, 0).unwrap();
        let c = s.mode_covariance(0);
        let (half, last) = ((m - 1) / 2, m - 1);
        let gap = (exact[2][1] - c[last][half]).abs() + (exact[2][2] - c[last][last]).abs();
        assert!(c[last][half] < exact[2][1]);
        assert!(gap < prev_gap, "m={m}: {gap} !< {prev_gap}");
        prev_gap = gap;
    }
}

#[test]
fn riemann_exponential_matches_euler_maruyama() {
    let eng = engine(1.0, 2.0, 1);
    let lam = eng.truncation().lambdas()[0];
    let m = 4096;
    let x = 0.5;
    let e = riemann_sample(&eng, &plan(m, 1.0, &[x], 400, 11, Method::Riemann)).unwrap();
    let dt = 1.0 / (m - 1) as f64;
    // Euler–Maruyama: v ← (1 − λΔ)² v + Δ, cross moment decays by (1 − λΔ) per step
    let mut v = 0.0;
    let mut v_half = 0.0;
    let half = (m - 1) / 2;
    for i in 1..m {
        v = (1.0 - lam * dt).powi(2) * v + dt;
        if i == half {
            v_half = v;
        }
    }
    let cross_half = v_half * (1.0 - lam * dt).powi((m - 1 - half) as i32);
    let phi2 = 2.0 * (std::f64::consts::PI * x).sin().powi(2);
    let est = ensemble_estimate(
        &e,
        &[Target::Covariance((m - 1, 0), (m - 1, 0)), Target::Covariance((m - 1, 0), (half, 0))],
    )
    .unwrap();
    assert!((est[0].value - phi2 * v).abs() <= 4.0 * est[0].stderr, "{:?} vs {}", est[0], phi2 * v);
    assert!((est[1].value - phi2 * cross_half).abs() <= 4.0 * est[1].stderr);
}

#[test]
fn mean_zero_and_moments_match_kernels() {
    let eng = engine(0.4, 3.0, 8);
    let xs = [0.15, 0.4, 0.7];
    let e = sample_ensemble(&eng, &plan(9, 1.0, &xs, 4000, 77, Method::Cholesky)).unwrap();
    let times = e.plan.times.points().to_vec();
    let mut targets = Vec::new();
    for i in 1..9 {
        for p in 0..3 {
            targets.push(Target::Mean((i, p)));
        }
    }
    for est in ensemble_estimate(&e, &targets).unwrap() {
        assert!(est.value.abs() <= 4.0 * est.stderr, "{est:?}");
    }

    let mut pairs = Vec::new();
    for (i, j, p, q) in [(8, 8, 0, 0), (8, 4, 1, 2), (3, 6, 0, 1), (5, 5, 2, 1), (2, 8, 1, 1), (7, 1, 2, 0)] {
        pairs.push(((i, p), (j, q)));
    }
    let ests = ensemble_estimate(&e, &pairs.iter().map(|&(a, b)| Target::Covariance(a, b)).collect::<Vec<_>>()).unwrap();
    let mut hits = 0;
    for (est, &((i, p), (j, q))) in ests.iter().zip(&pairs) {
        let exact = eng.covariance(times[i], times[j], &[xs[p]], &[xs[q]]).unwrap().value;
        if (est.value - exact).abs() <= 4.0 * est.stderr {
            hits += 1;
        }
    }
    assert!(hits * 100 >= 95 * pairs.len(), "{hits}/{}", pairs.len());

    for (i, j, p) in [(8, 7, 0), (8, 4, 1), (6, 2, 2)] {
        let est = ensemble_estimate(&e, &[Target::IncrementMoment((i, p), (j, p))]).unwrap()[0];
        let exact = eng.temporal_variogram(&[xs[p]], times[i], &[times[j]]).unwrap().values[0];
        assert!((est.value - exact).abs() <= 4.0 * est.stderr, "{est:?} vs {exact}");
    }
}

#[test]
fn modes_uncorrelated() {
    let eng = engine(0.4, 3.0, 4);
    let grid = TimeGrid::uniform(1.0, 5).unwrap();
    let s = CholeskySampler::new(&eng, &grid, 3).unwrap();
    let reps = 3000;
    let paths: Vec<Vec<Vec<f64>>> = (0..reps).map(|r| s.mode_paths(r)).collect();
    for j in 0..4 {
        for k in (j + 1)..4 {
            let a: Vec<f64> = paths.iter().map(|p| p[j][4]).collect();
            let b: Vec<f64> = paths.iter().map(|p| p[k][4]).collect();
            let sa = (a.iter().map(|v| v * v).sum::<f64>() / reps as f64).sqrt();
            let sb = (b.iter().map(|v| v * v).sum::<f64>() / reps as f64).sqrt();
            let rho = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (reps as f64 * sa * sb);
            // standard error of a null correlation is about 1/√n
            assert!(rho.abs() < 4.0 / (reps as f64).sqrt(), "modes {j},{k}: {rho}");
        }
    }
}

#[test]
fn field_values_look_gaussian() {
    let eng = engine(0.4, 3.0, 4);
    let e = sample_ensemble(&eng, &plan(5, 1.0, &[0.3, 0.8], 10_000, 12345, Method::Cholesky)).unwrap();
    for (i, p) in [(4, 0), (2, 1), (4, 1)] {
        let v = e.node(i, p);
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let m3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
        let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        let skew = m3 / m2.powf(1.5);
        let kurt = m4 / (m2 * m2) - 3.0;
        assert!(skew.abs() < 0.1, "skew {skew}");
        assert!(kurt.abs() < 0.2, "excess kurtosis {kurt}");
    }
}

#[test]
fn csv_and_binary_round_trip() {
    let eng = engine(0.4, 3.0, 3);
    let e = sample_ensemble(&eng, &plan(4, 1.0, &[0.25, 0.5], 2, 9, Method::Cholesky)).unwrap();
    let csv = e.to_csv();
    assert!(csv.starts_with("replicate,t,x0,value\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 4 * 2);
    let mut buf = Vec::new();
    e.write_binary(&mut buf).unwrap();
    assert_eq!(&buf[..8], b"FFENSEMB");
    let back = FieldEnsemble::read_binary(buf.as_slice()).unwrap();
    assert_eq!(back, e);
    assert!(FieldEnsemble::read_binary(&buf[..20]).is_err());
}

#[test]
fn plan_envelope_errors() {
    let pts = vec![vec![0.5]];
    let big = TimeGrid::uniform(1.0, 2049).unwrap();
    assert!(matches!(
        SimulationPlan::new(big, pts.clone(), 1, 0, Method::Cholesky),
        Err(Error::GridEnvelope(_))
    ));
    let uneven = TimeGrid::from_points(vec![0.0, 0.1, 0.5, 1.0]).unwrap();
    assert!(matches!(
        SimulationPlan::new(uneven, pts.clone(), 1, 0, Method::Riemann),
        Err(Error::NonUniformGrid { .. })
    ));
    let g = TimeGrid::uniform(1.0, 4).unwrap();
    assert!(SimulationPlan::new(g.clone(), pts.clone(), 0, 0, Method::Cholesky).is_err());
    let eng = engine(0.4, 3.0, 2);
    let e = sample_ensemble(&eng, &SimulationPlan::new(g, pts, 1, 0, Method::Cholesky).unwrap()).unwrap();
    assert!(matches!(
        ensemble_estimate(&e, &[Target::Mean((1, 0))]),
        Err(Error::InsufficientReplicates { .. })
    ));
}
