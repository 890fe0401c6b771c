use std::f64::consts::PI;

use fracfield::domains::{build_eigensystem, DomainSpec};
use fracfield::mlf::{eval_mlf, MlfQuery};
use fracfield::spectrum::{
    build_truncation, diagnostics_csv, sandwich, summability_check, transform_eigenvalue, weyl_diagnostic,
    FracParams,
};
use fracfield::Error;
use proptest::prelude::*;

fn interval() -> DomainSpec {
    DomainSpec::Interval { length: 1.0 }
}

fn square() -> DomainSpec {
    DomainSpec::Rectangle { lengths: vec![1.0, 1.0] }
}

#[test]
fn transform_examples() {
    let id = FracParams::new(0.5, 2.0, 0.0).unwrap();
    assert_eq!(transform_eigenvalue(3.0, &id).unwrap(), 3.0);
    let mixed = FracParams::new(0.5, 1.0, 1.0).unwrap();
    assert!((transform_eigenvalue(1.0, &mixed).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    let sq = FracParams::with_poly(0.5, 2.0, 0.0, vec![0.0, 0.0, 1.0]).unwrap();
    assert!((transform_eigenvalue(2.0, &sq).unwrap() - 4.0).abs() < 1e-14);
    assert!(transform_eigenvalue(0.0, &id).is_err());
}

#[test]
fn transform_overflow_is_reported() {
    let p = FracParams::with_poly(0.5, 200.0, 200.0, vec![0.0, 1.0]).unwrap();
    assert!(transform_eigenvalue(1e10, &p).is_err());
}

#[test]
fn params_validation() {
    assert!(FracParams::new(0.0, 2.0, 0.0).is_err());
    assert!(FracParams::new(1.2, 2.0, 0.0).is_err());
    assert!(FracParams::new(1.0, 2.0, 0.0).is_ok());
    assert!(FracParams::new(0.5, 0.0, 0.0).is_err());
    assert!(FracParams::new(0.5, -1.0, 2.0).is_err());
    assert!(FracParams::with_poly(0.5, 2.0, 0.0, vec![1.0]).is_err());
    assert!(FracParams::with_poly(0.5, 2.0, 0.0, vec![1.0, 0.0]).is_err());
    assert!(FracParams::with_poly(0.5, 2.0, 0.0, vec![-1.0, 1.0]).is_err());
}

#[test]
fn truncation_examples() {
    let sys = build_eigensystem(interval(), 3).unwrap();
    let t = build_truncation(&sys, &FracParams::new(0.5, 2.0, 0.0).unwrap(), 3).unwrap();
    let pi2 = PI * PI;
    for (l, want) in t.lambdas().iter().zip([pi2, 4.0 * pi2, 9.0 * pi2]) {
        assert!((l - want).abs() < 1e-12 * want);
    }
    let gammas = sys.eigenvalues();
    for (l, g) in t.lambdas().iter().zip(&gammas) {
        assert_eq!(l, g);
    }

    let sys = build_eigensystem(square(), 10).unwrap();
    let t = build_truncation(&sys, &FracParams::new(0.5, 1.0, 1.0).unwrap(), 2).unwrap();
    let want = |g: f64| g.sqrt() * (1.0 + g).sqrt();
    assert!((t.lambdas()[0] - want(2.0 * pi2)).abs() < 1e-12 * want(2.0 * pi2));
    assert!((t.lambdas()[1] - want(5.0 * pi2)).abs() < 1e-12 * want(5.0 * pi2));
}

#[test]
fn truncation_requests_beyond_system_fail() {
    let sys = build_eigensystem(interval(), 5).unwrap();
    let p = FracParams::new(0.5, 2.0, 0.0).unwrap();
    assert!(matches!(
        build_truncation(&sys, &p, 6),
        Err(Error::InsufficientModes { .. })
    ));
}

#[test]
fn truncation_is_ascending_and_deterministic() {
    let sys = build_eigensystem(square(), 300).unwrap();
    let p = FracParams::with_poly(0.3, 1.5, 0.5, vec![1.0, 0.5, 2.0]).unwrap();
    let a = build_truncation(&sys, &p, 300).unwrap();
    let b = build_truncation(&sys, &p, 300).unwrap();
    assert_eq!(a.lambdas(), b.lambdas());
    assert!(a.lambdas().windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(diagnostics_csv(&a), diagnostics_csv(&b));
    assert!(diagnostics_csv(&a).starts_with("k,gamma_k,lambda_k,weyl_ratio\n"));
}

#[test]
fn weyl_interval_exact() {
    let sys = build_eigensystem(interval(), 200).unwrap();
    let t = build_truncation(&sys, &FracParams::new(0.5, 2.0, 0.0).unwrap(), 200).unwrap();
    let w = weyl_diagnostic(&t).unwrap();
    assert_eq!(w.exponent, 2.0);
    for r in &w.ratios {
        assert!((r / (PI * PI) - 1.0).abs() < 0.01);
    }
    assert!((w.limit / (PI * PI) - 1.0).abs() < 1e-12);
}

#[test]
fn weyl_unit_square_top_decile() {
    let sys = build_eigensystem(square(), 2000).unwrap();
    let t = build_truncation(&sys, &FracParams::new(0.5, 2.0, 0.0).unwrap(), 2000).unwrap();
    let w = weyl_diagnostic(&t).unwrap();
    assert!((w.limit - 4.0 * PI).abs() < 1e-12);
    for r in &w.ratios[1800..] {
        assert!((r / (4.0 * PI) - 1.0).abs() < 0.1, "{r}");
    }
}

#[test]
fn weyl_polynomial_degree_doubles_exponent() {
    let sys = build_eigensystem(interval(), 150).unwrap();
    let t = build_truncation(&sys, &FracParams::with_poly(0.5, 1.0, 0.0, vec![0.0, 0.0, 1.0]).unwrap(), 150).unwrap();
    let w = weyl_diagnostic(&t).unwrap();
    assert_eq!(w.exponent, 2.0);
    assert!((w.ratios[149] / w.limit - 1.0).abs() < 1e-10);
    assert!(weyl_diagnostic(&t.truncated(50).unwrap()).is_err());
}

#[test]
fn sandwich_covers_retained_modes() {
    for (spec, p) in [
        (interval(), FracParams::new(0.4, 2.0, 1.0).unwrap()),
        (square(), FracParams::new(0.5, 1.5, 1.0).unwrap()),
        (DomainSpec::Disk { radius: 1.0 }, FracParams::new(0.5, 2.0, 0.5).unwrap()),
    ] {
        let sys = build_eigensystem(spec, 200).unwrap();
        let t = build_truncation(&sys, &p, 200).unwrap();
        let s = sandwich(&t);
        assert!(s.l1 > 0.0 && s.l1 < s.l2);
        for (i, l) in t.lambdas().iter().enumerate().skip(s.k0 - 1) {
            assert!(s.holds(i + 1, *l), "k={}", i + 1);
        }
        assert!(s.k0 < 100);
    }
}

#[test]
fn summability_partial_sums() {
    let sys = build_eigensystem(interval(), 800).unwrap();
    let p = FracParams::new(0.5, 2.0, 0.0).unwrap();
    let t = build_truncation(&sys, &p, 800).unwrap();
    let at1 = summability_check(&t, 0.5, 1.0).unwrap();
    let at2 = summability_check(&t, 0.5, 2.0).unwrap();
    assert!(at1.partial_sums.windows(2).all(|w| w[1] > w[0]));
    assert!(at2.total() < at1.total());
    let first = eval_mlf(MlfQuery::new(0.5, PI * PI).unwrap());
    assert!((at1.partial_sums[0] - first).abs() < 1e-15);
    for k in [100, 200, 400] {
        let r = summability_check(&t.truncated(k).unwrap(), 0.5, 1.0).unwrap();
        let gap = at1.partial_sums[2 * k - 1] - at1.partial_sums[k - 1];
        assert!(gap > 0.0 && gap <= r.tail_bound, "K={k}: {gap} vs {}", r.tail_bound);
    }
}

#[test]
fn summability_needs_admissible_order() {
    let sys = build_eigensystem(square(), 50).unwrap();
    let t = build_truncation(&sys, &FracParams::new(0.5, 1.0, 0.0).unwrap(), 50).unwrap();
    assert!(matches!(summability_check(&t, 0.5, 1.0), Err(Error::Inadmissible(_))));
    let ok = build_truncation(&sys, &FracParams::new(0.5, 2.0, 0.5).unwrap(), 50).unwrap();
    assert!(summability_check(&ok, 0.5, 0.0).is_err());
}

proptest! {
    #[test]
    fn transform_strictly_increasing(
        alpha in 0.0f64..4.0,
        gam in 0.0f64..4.0,
        c0 in 0.0f64..3.0,
        c1 in 0.0f64..3.0,
        c2 in 0.01f64..3.0,
        ga in 1e-3f64..1e4,
        ratio in 1.0001f64..10.0,
    ) {
        prop_assume!(alpha + gam > 0.05);
        let p = FracParams::with_poly(0.5, alpha, gam, vec![c0, c1, c2]).unwrap();
        let a = transform_eigenvalue(ga, &p).unwrap();
        let b = transform_eigenvalue(ga * ratio, &p).unwrap();
        prop_assert!(a < b, "{} !< {}", a, b);
    }
}
