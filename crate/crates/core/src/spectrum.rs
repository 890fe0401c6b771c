//! The fractional spectral transform `λ = P(γ^{α/2}(1+γ)^{γ/2})`, spectral
//! truncations, and eigenvalue growth / summability diagnostics.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domains::EigenSystem;
use crate::error::{Error, Result};
use crate::mlf::{evaluator, MittagLeffler};
use crate::special::gamma;

/// Relative threshold on the tail bound for declaring summability converged.
pub const SUMMABILITY_REL_TOL: f64 = 1e-4;

/// Fractional exponents and polynomial coefficients `c_0..c_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default = "identity_poly")]
    pub poly: Vec<f64>,
}

fn identity_poly() -> Vec<f64> {
    vec![0.0, 1.0]
}

impl FracParams {
    /// Plain operator `(−Δ)^{α/2}(I−Δ)^{γ/2}`.
    pub fn new(beta: f64, alpha: f64, gamma: f64) -> Result<Self> {
        Self::with_poly(beta, alpha, gamma, identity_poly())
    }

    pub fn with_poly(beta: f64, alpha: f64, gamma: f64, poly: Vec<f64>) -> Result<Self> {
        let p = Self {
            beta,
            alpha,
            gamma,
            poly,
        };
        p.validate()?;
        Ok(p)
    }

    /// `β = 1` is accepted: it gives the classical (exponential) mode dynamics.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParams(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.alpha + self.gamma <= 0.0 {
            return Err(Error::InvalidParams("alpha + gamma must be positive".into()));
        }
        if self.poly.len() < 2 {
            return Err(Error::InvalidParams("poly needs coefficients c_0..c_p with p >= 1".into()));
        }
        if self.poly.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidParams("poly coefficients must be finite and >= 0".into()));
        }
        if self.poly[self.poly.len() - 1] <= 0.0 {
            return Err(Error::InvalidParams("leading poly coefficient c_p must be > 0".into()));
        }
        Ok(())
    }

    /// Polynomial degree `p`.
    pub fn degree(&self) -> usize {
        self.poly.len() - 1
    }

    /// `p(α+γ)`.
    pub fn order(&self) -> f64 {
        self.degree() as f64 * (self.alpha + self.gamma)
    }

    /// Growth exponent `ρ = p(α+γ)/n` of `λ_k` in `k`.
    pub fn growth_exponent(&self, n: usize) -> f64 {
        self.order() / n as f64
    }

    /// `p(α+γ) > n`: the solution, covariance and spatial results need it.
    pub fn check_solution_admissible(&self, n: usize) -> Result<()> {
        if self.order() > n as f64 {
            Ok(())
        } else {
            Err(Error::Inadmissible(format!(
                "admissibility requires p(alpha+gamma) > n, got {} <= {n}",
                self.order()
            )))
        }
    }

    /// `p(α+γ) > n/2`: enough for the temporal increments.
    pub fn check_temporal_admissible(&self, n: usize) -> Result<()> {
        if self.order() > 0.5 * n as f64 {
            Ok(())
        } else {
            Err(Error::Inadmissible(format!(
                "temporal regularity requires p(alpha+gamma) > n/2, got {} <= {}",
                self.order(),
                0.5 * n as f64
            )))
        }
    }
}

/// `Σ_l c_l f^l` with `f = γ^{α/2}(1+γ)^{γ/2}`.
pub fn transform_eigenvalue(gamma_k: f64, params: &FracParams) -> Result<f64> {
    if !(gamma_k > 0.0 && gamma_k.is_finite()) {
        return Err(Error::Domain(format!("eigenvalue must be positive, got {gamma_k}")));
    }
    let ln_f = 0.5 * params.alpha * gamma_k.ln() + 0.5 * params.gamma * gamma_k.ln_1p();
    let direct = gamma_k.powf(0.5 * params.alpha) * (1.0 + gamma_k).powf(0.5 * params.gamma);
    let f = if direct.is_finite() && direct > 0.0 { direct } else { ln_f.exp() };
    let value = if f.is_finite() {
        params.poly.iter().rev().fold(0.0, |acc, c| acc * f + c)
    } else {
        f64::INFINITY
    };
    if !value.is_finite() {
        return Err(Error::Domain(format!(
            "transformed eigenvalue overflows (log f = {ln_f:.3})"
        )));
    }
    Ok(value)
}

/// The `K` lowest modes with their transformed eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectralTruncation {
    system: Arc<EigenSystem>,
    params: FracParams,
    lambdas: Vec<f64>,
    evaluator: Arc<MittagLeffler>,
}

/// Builds the truncation to the `k` lowest modes of `sys`.
pub fn build_truncation(sys: &EigenSystem, params: &FracParams, k: usize) -> Result<SpectralTruncation> {
    build_truncation_shared(Arc::new(sys.clone()), params, k)
}

/// As [`build_truncation`], sharing the eigen-system.
pub fn build_truncation_shared(
    sys: Arc<EigenSystem>,
    params: &FracParams,
    k: usize,
) -> Result<SpectralTruncation> {
    params.validate()?;
    if k == 0 || k > sys.len() {
        return Err(Error::InsufficientModes {
            requested: k,
            available: sys.len(),
        });
    }
    let lambdas = sys.modes[..k]
        .iter()
        .map(|m| transform_eigenvalue(m.gamma, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralTruncation {
        evaluator: evaluator(params.beta),
        system: sys,
        params: params.clone(),
        lambdas,
    })
}

impl SpectralTruncation {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    pub fn system(&self) -> &EigenSystem {
        &self.system
    }

    pub fn shared_system(&self) -> Arc<EigenSystem> {
        Arc::clone(&self.system)
    }

    pub fn dim(&self) -> usize {
        self.system.spec.dim()
    }

    pub fn mlf(&self) -> &MittagLeffler {
        &self.evaluator
    }

    /// Source eigenvalue `γ_k` of retained mode `k`.
    pub fn source_gamma(&self, k: usize) -> f64 {
        self.system.modes[k].gamma
    }

    /// The same truncation with fewer modes.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::InsufficientModes {
                requested: k,
                available: self.len(),
            });
        }
        let mut out = self.clone();
        out.lambdas.truncate(k);
        Ok(out)
    }

    /// `φ_k(x)` for all retained modes.
    pub fn eigenfunctions_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.len()).map(|k| self.system.eval(k, x)).collect()
    }

    /// `ρ = p(α+γ)/n`.
    pub fn growth_exponent(&self) -> f64 {
        self.params.growth_exponent(self.dim())
    }
}

/// Normalized eigenvalue growth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylDiagnostic {
    /// `λ_k / k^ρ`.
    pub ratios: Vec<f64>,
    pub exponent: f64,
    /// `c_p W^{p(α+γ)/2}`: the Weyl constant pushed through the transform.
    pub limit: f64,
}

pub fn weyl_diagnostic(trunc: &SpectralTruncation) -> Result<WeylDiagnostic> {
    if trunc.len() < 100 {
        return Err(Error::TooFewModes {
            needed: 100,
            got: trunc.len(),
        });
    }
    let rho = trunc.growth_exponent();
    let ratios = trunc
        .lambdas
        .iter()
        .enumerate()
        .map(|(i, l)| l / ((i + 1) as f64).powf(rho))
        .collect();
    let p = &trunc.params;
    let cp = p.poly[p.degree()];
    let limit = cp * trunc.system.spec.weyl_constant().powf(0.5 * p.order());
    Ok(WeylDiagnostic {
        ratios,
        exponent: rho,
        limit,
    })
}

/// Two-sided bound `L₁k^ρ ≤ λ_k ≤ L₂k^ρ` for `k ≥ k₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sandwich {
    pub l1: f64,
    pub l2: f64,
    /// One-based index from which the bound holds on all retained modes.
    pub k0: usize,
    pub exponent: f64,
}

impl Sandwich {
    pub fn holds(&self, k: usize, lambda: f64) -> bool {
        let s = (k as f64).powf(self.exponent);
        self.l1 * s <= lambda && lambda <= self.l2 * s
    }
}

/// Fits `log λ_k − ρ log k` over the top half of the modes, deflates /
/// inflates the fitted constant by 10%, and locates `k₀`.
pub fn sandwich(trunc: &SpectralTruncation) -> Sandwich {
    let rho = trunc.growth_exponent();
    let k = trunc.len();
    let lo = k / 2;
    let c = trunc.lambdas[lo..]
        .iter()
        .enumerate()
        .map(|(i, l)| l.ln() - rho * ((lo + i + 1) as f64).ln())
        .sum::<f64>()
        / (k - lo) as f64;
    let mut s = Sandwich {
        l1: 0.9 * c.exp(),
        l2: 1.1 * c.exp(),
        k0: 1,
        exponent: rho,
    };
    let mut k0 = 1;
    for (i, &l) in trunc.lambdas.iter().enumerate() {
        if !s.holds(i + 1, l) {
            k0 = i + 2;
        }
    }
    s.k0 = k0;
    s
}

/// Partial sums of `Σ_k E_β(−λ_k t^β)` and a bound on the remainder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummabilityReport {
    /// `S_1, …, S_K`.
    pub partial_sums: Vec<f64>,
    /// Bound on `Σ_{k>K}` from the upper rational envelope and `λ_k ≥ L₁k^ρ`.
    pub tail_bound: f64,
    pub converged: bool,
    pub sandwich: Sandwich,
}

impl SummabilityReport {
    pub fn total(&self) -> f64 {
        *self.partial_sums.last().expect("at least one mode")
    }
}

pub fn summability_check(trunc: &SpectralTruncation, beta: f64, t: f64) -> Result<SummabilityReport> {
    trunc.params.check_solution_admissible(trunc.dim())?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!("time must be positive, got {t}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParams(format!("beta must lie in (0, 1], got {beta}")));
    }
    let mlf = evaluator(beta);
    let tb = t.powf(beta);
    let mut acc = 0.0;
    let partial_sums = trunc
        .lambdas
        .iter()
        .map(|l| {
            acc += mlf.eval(l * tb);
            acc
        })
        .collect();
    let sw = sandwich(trunc);
    let k = trunc.len() as f64;
    let c = sw.l1 * tb / gamma(1.0 + beta);
    let rho = sw.exponent;
    let tail_bound = k.powf(1.0 - rho) / (c * (rho - 1.0));
    let mut report = SummabilityReport {
        partial_sums,
        tail_bound,
        converged: false,
        sandwich: sw,
    };
    report.converged = tail_bound < SUMMABILITY_REL_TOL * report.total();
    Ok(report)
}

/// CSV with columns `k, gamma_k, lambda_k, weyl_ratio`.
pub fn diagnostics_csv(trunc: &SpectralTruncation) -> String {
    let rho = trunc.growth_exponent();
    let mut out = String::from("k,gamma_k,lambda_k,weyl_ratio\n");
    for (i, l) in trunc.lambdas.iter().enumerate() {
        let k = i + 1;
        let _ = writeln!(
            out,
            "{k},{:e},{:e},{:e}",
            trunc.source_gamma(i),
            l,
            l / (k as f64).powf(rho)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{build_eigensystem, DomainSpec};
    use std::f64::consts::PI;

    #[test]
    fn transform_examples() {
        let id = FracParams::new(0.5, 2.0, 0.0).unwrap();
        assert!((transform_eigenvalue(3.0, &id).unwrap() - 3.0).abs() < 1e-14);
        let p = FracParams::new(0.5, 1.0, 1.0).unwrap();
        assert!((transform_eigenvalue(1.0, &p).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let sq = FracParams::with_poly(0.5, 2.0, 0.0, vec![0.0, 0.0, 1.0]).unwrap();
        assert!((transform_eigenvalue(2.0, &sq).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn transform_overflow_is_reported() {
        let p = FracParams::with_poly(0.5, 200.0, 0.0, vec![0.0, 0.0, 1.0]).unwrap();
        assert!(transform_eigenvalue(1e6, &p).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(FracParams::new(0.0, 2.0, 0.0).is_err());
        assert!(FracParams::new(0.5, -1.0, 0.0).is_err());
        assert!(FracParams::with_poly(0.5, 2.0, 0.0, vec![1.0, 0.0]).is_err());
        assert!(FracParams::with_poly(0.5, 2.0, 0.0, vec![-1.0, 1.0]).is_err());
        assert!(FracParams::new(0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn interval_truncation() {
        let sys = build_eigensystem(DomainSpec::Interval { length: 1.0 }, 5).unwrap();
        let p = FracParams::new(0.5, 2.0, 0.0).unwrap();
        let t = build_truncation(&sys, &p, 3).unwrap();
        for (k, l) in t.lambdas().iter().enumerate() {
            let e = ((k + 1) as f64 * PI).powi(2);
            assert!((l - e).abs() < 1e-12 * e);
        }
        assert!(matches!(
            build_truncation(&sys, &p, 6),
            Err(Error::InsufficientModes { .. })
        ));
    }

    #[test]
    fn summability_rejects_inadmissible() {
        let sys = build_eigensystem(DomainSpec::Interval { length: 1.0 }, 10).unwrap();
        let p = FracParams::new(0.5, 0.9, 0.0).unwrap();
        let t = build_truncation(&sys, &p, 10).unwrap();
        assert!(matches!(summability_check(&t, 0.5, 1.0), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn weyl_needs_enough_modes() {
        let sys = build_eigensystem(DomainSpec::Interval { length: 1.0 }, 50).unwrap();
        let p = FracParams::new(0.5, 2.0, 0.0).unwrap();
        let t = build_truncation(&sys, &p, 50).unwrap();
        assert!(matches!(weyl_diagnostic(&t), Err(Error::TooFewModes { .. })));
    }
}
