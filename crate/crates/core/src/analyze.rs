//! Log-log slope fits of variogram curves and regularity-bound checks on the
//! truncated system.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelEngine, VariogramCurve, VariogramKind};
use crate::mlf::{caputo_l1, evaluator, TimeGrid};
use crate::simulate::FieldEnsemble;
use crate::spectrum::FracParams;
use crate::special::gamma;

/// Hölder exponent of the eigenfunctions; they are Lipschitz on every
/// supported domain.
pub const UPSILON: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Temporal,
    Spatial,
    Spacetime,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::Temporal => "temporal",
            BoundKind::Spatial => "spatial",
            BoundKind::Spacetime => "spacetime",
        }
    }

    fn matches(&self, kind: VariogramKind) -> bool {
        matches!(
            (self, kind),
            (BoundKind::Temporal, VariogramKind::Temporal)
                | (BoundKind::Spatial, VariogramKind::Spatial)
                | (BoundKind::Spacetime, VariogramKind::Spatiotemporal)
        )
    }
}

/// `value(lag) ≤ prefactor · lag^theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub kind: BoundKind,
    pub theta: f64,
    /// Infinite until a prefactor has been assembled or calibrated.
    pub prefactor: f64,
    pub notes: Vec<String>,
}

impl BoundSpec {
    pub fn with_prefactor(mut self, prefactor: f64, note: impl Into<String>) -> Self {
        self.prefactor = prefactor;
        self.notes.push(note.into());
        self
    }
}

fn temporal_theta(params: &FracParams, n: usize) -> Result<f64> {
    if params.beta >= 0.5 {
        return Err(Error::Inadmissible(format!(
            "temporal bound requires beta < 1/2, got beta = {}",
            params.beta
        )));
    }
    params.check_temporal_admissible(n)?;
    let b = params.beta;
    Ok((1.0 - b * n as f64 / params.order()).min(1.0 - b))
}

/// Exponent of the bound of the given kind, prefactor left unassembled.
pub fn bound_exponent(params: &FracParams, n: usize, kind: BoundKind) -> Result<BoundSpec> {
    params.validate()?;
    let (theta, note) = match kind {
        BoundKind::Temporal => (
            temporal_theta(params, n)?,
            "theta = (1 - beta n/(p(alpha+gamma))) min (1 - beta)".to_string(),
        ),
        BoundKind::Spatial => {
            params.check_solution_admissible(n)?;
            (2.0 * UPSILON, "theta = 2 upsilon with Lipschitz eigenfunctions".to_string())
        }
        BoundKind::Spacetime => {
            params.check_solution_admissible(n)?;
            let t = temporal_theta(params, n)?;
            (t.min(2.0 * UPSILON), "theta = temporal theta min 2 upsilon".to_string())
        }
    };
    Ok(BoundSpec {
        kind,
        theta,
        prefactor: f64::INFINITY,
        notes: vec![note],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Smallest and largest lag actually used.
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least squares of `log value` against `log lag` over lags in `window`.
pub fn fit_loglog_slope(curve: &VariogramCurve, window: (f64, f64)) -> Result<SlopeFit> {
    let (lo, hi) = window;
    let pts: Vec<(f64, f64)> = curve
        .lags
        .iter()
        .zip(&curve.values)
        .filter(|(l, _)| **l >= lo && **l <= hi && **l > 0.0)
        .map(|(l, v)| (*l, *v))
        .collect();
    if let Some(&(lag, value)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositiveValue { lag, value });
    }
    if pts.len() < 5 {
        return Err(Error::WindowTooSmall { needed: 5, got: pts.len() });
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (sse.max(0.0) / (n - 2.0) / sxx).sqrt();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let used = pts.iter().map(|p| p.0);
    Ok(SlopeFit {
        window: (used.clone().fold(f64::INFINITY, f64::min), used.fold(0.0, f64::max)),
        slope,
        intercept,
        stderr,
        r2,
        points: pts.len(),
    })
}

/// Default fit window `[10 τ_K, 0.1 min(τ_1, t)]`, where `τ_k = (Γ(1+β)/λ_k)^{1/β}`
/// is the relaxation time of mode `k`.
pub fn fit_window(engine: &KernelEngine, anchor_t: f64) -> (f64, f64) {
    let beta = engine.beta();
    let g = gamma(1.0 + beta);
    let lambdas = engine.truncation().lambdas();
    let tau = |l: f64| (g / l).powf(1.0 / beta);
    let fine = tau(lambdas[lambdas.len() - 1]);
    let coarse = tau(lambdas[0]).min(anchor_t);
    (10.0 * fine, 0.1 * coarse)
}

/// `inflation · max value/lag^θ` over lags in `window`.
pub fn calibrate_prefactor(curve: &VariogramCurve, theta: f64, window: (f64, f64), inflation: f64) -> Result<f64> {
    let ratios: Vec<f64> = curve
        .lags
        .iter()
        .zip(&curve.values)
        .filter(|(l, _)| **l >= window.0 && **l <= window.1 && **l > 0.0)
        .map(|(l, v)| v / l.powf(theta))
        .collect();
    if ratios.is_empty() {
        return Err(Error::WindowTooSmall { needed: 1, got: 0 });
    }
    Ok(inflation * ratios.iter().cloned().fold(0.0, f64::max))
}

/// Temporal bound with a prefactor calibrated on `curve`.
pub fn calibrated_temporal_bound(
    curve: &VariogramCurve,
    params: &FracParams,
    n: usize,
    window: (f64, f64),
    inflation: f64,
) -> Result<BoundSpec> {
    let spec = bound_exponent(params, n, BoundKind::Temporal)?;
    let pre = calibrate_prefactor(curve, spec.theta, window, inflation)?;
    Ok(spec.with_prefactor(
        pre,
        format!(
            "prefactor calibrated: {inflation} x max ratio over lags [{:e}, {:e}]",
            window.0, window.1
        ),
    ))
}

/// Truncated counterparts of the constants in the regularity bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedConstants {
    /// `sup_{k≤K, x} |φ_k(x)|`.
    pub sup_norm: f64,
    /// `max_{k≤K} C_k` with `|φ_k(x) − φ_k(y)| ≤ C_k ‖x − y‖`.
    pub lipschitz: f64,
    /// `g_K(t) = t^{1−β} Σ_k Γ(1+β)/((1−β) λ_k)`, bounding `Σ_k ∫₀^t E_β(−λ_k w^β)² dw`.
    pub g: f64,
    pub t: f64,
}

pub fn truncated_constants(engine: &KernelEngine, t: f64) -> Result<TruncatedConstants> {
    let beta = engine.beta();
    if beta >= 1.0 {
        return Err(Error::InvalidParams("truncated spatial constants need beta < 1".into()));
    }
    let sys = engine.truncation().system();
    let mut sup_norm: f64 = 0.0;
    let mut lipschitz: f64 = 0.0;
    for k in 0..engine.len() {
        sup_norm = sup_norm.max(sys.mode_sup(k)?);
        lipschitz = lipschitz.max(sys.mode_holder_constant(k)?.lipschitz_constant);
    }
    let gb = gamma(1.0 + beta);
    let g = t.powf(1.0 - beta)
        * engine
            .truncation()
            .lambdas()
            .iter()
            .map(|l| gb / ((1.0 - beta) * l))
            .sum::<f64>();
    Ok(TruncatedConstants {
        sup_norm,
        lipschitz,
        g,
        t,
    })
}

/// `E|c(t,x) − c(t,y)|² ≤ ‖x − y‖² Σ_k C_k² F_k(t)`, with `C_k` the
/// Lipschitz constant of mode `k` and `F_k(t) = ∫₀^t E_β(−λ_k w^β)² dw`.
///
/// This is the sup-free form of the chain: replacing `C_k` by `max_k C_k`
/// and `F_k` by its closed-form bound gives [`spatial_bound_sup_form`].
pub fn spatial_bound(engine: &KernelEngine, t: f64) -> Result<BoundSpec> {
    let params = engine.truncation().params();
    let spec = bound_exponent(params, engine.truncation().dim(), BoundKind::Spatial)?;
    let sys = engine.truncation().system();
    let terms = (0..engine.len())
        .into_par_iter()
        .map(|k| {
            let c = sys.mode_holder_constant(k)?.lipschitz_constant;
            Ok(c * c * engine.mode(k).energy(t)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let pre: f64 = terms.iter().sum();
    Ok(spec.with_prefactor(pre, format!("prefactor sum_k C_k^2 F_k(t) at t = {t}")))
}

/// `E|c(t,x) − c(t,y)|² ≤ C_K² g_K(t) ‖x − y‖²` with `C_K = max_k C_k`.
pub fn spatial_bound_sup_form(engine: &KernelEngine, t: f64) -> Result<BoundSpec> {
    let params = engine.truncation().params();
    let spec = bound_exponent(params, engine.truncation().dim(), BoundKind::Spatial)?;
    let c = truncated_constants(engine, t)?;
    Ok(spec.with_prefactor(
        c.lipschitz.powi(2) * c.g,
        format!("prefactor C_K^2 g_K(t) with C_K = {:e}, g_K({t}) = {:e}", c.lipschitz, c.g),
    ))
}

/// `E|c(t,x) − c(s,y)|² ≤ C̃ ‖(t−s, x−y)‖^θ` for lags at most 1 and
/// `s, t ≤ T`, with `C̃ = 8 max(A_T, S(T)) 2^{−θ/2}`, `A_T` the temporal
/// prefactor and `S` the spatial one from [`spatial_bound`].
pub fn spacetime_bound(engine: &KernelEngine, horizon: f64, temporal_prefactor: f64) -> Result<BoundSpec> {
    let params = engine.truncation().params();
    let spec = bound_exponent(params, engine.truncation().dim(), BoundKind::Spacetime)?;
    let spatial = spatial_bound(engine, horizon)?.prefactor;
    let pre = 8.0 * temporal_prefactor.max(spatial) * 0.5f64.powf(spec.theta / 2.0);
    Ok(spec.with_prefactor(
        pre,
        format!("prefactor 8 max(A_T = {temporal_prefactor:e}, S(T) = {spatial:e}) 2^(-theta/2), valid for lags <= 1"),
    ))
}

/// Space-time bound for points `(s, y)` with `s ≤ t`, its temporal part
/// calibrated at the anchor `x` on the time lags the points use.
pub fn calibrated_spacetime_bound(
    engine: &KernelEngine,
    t: f64,
    x: &[f64],
    points: &[(f64, Vec<f64>)],
    inflation: f64,
) -> Result<BoundSpec> {
    if let Some((s, _)) = points.iter().find(|(s, _)| *s > t) {
        return Err(Error::InvalidParams(format!("space-time points need s <= t, got s = {s} > {t}")));
    }
    let params = engine.truncation().params();
    let theta_t = temporal_theta(params, engine.truncation().dim())?;
    let times: Vec<f64> = points.iter().map(|(s, _)| *s).filter(|s| *s < t).collect();
    let temporal_pre = if times.is_empty() {
        0.0
    } else {
        let curve = engine.temporal_variogram(x, t, &times)?;
        calibrate_prefactor(&curve, theta_t, (f64::MIN_POSITIVE, f64::INFINITY), inflation)?
    };
    spacetime_bound(engine, t, temporal_pre)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub holds: bool,
    pub max_ratio: f64,
    pub worst_lag: f64,
}

/// Checks `value ≤ prefactor · lag^θ` at every lag of the curve.
pub fn verify_bound(curve: &VariogramCurve, bound: &BoundSpec) -> Result<BoundReport> {
    if !bound.kind.matches(curve.kind) {
        return Err(Error::KindMismatch {
            curve: curve.kind.as_str().into(),
            bound: bound.kind.as_str().into(),
        });
    }
    if !(bound.prefactor > 0.0) {
        return Err(Error::InvalidParams(format!("bound prefactor must be positive, got {}", bound.prefactor)));
    }
    let mut max_ratio: f64 = 0.0;
    let mut worst_lag = f64::NAN;
    for (&lag, &v) in curve.lags.iter().zip(&curve.values) {
        let ratio = if v <= 0.0 {
            0.0
        } else if lag == 0.0 {
            f64::INFINITY
        } else {
            v / (bound.prefactor * lag.powf(bound.theta))
        };
        if ratio > max_ratio || worst_lag.is_nan() {
            max_ratio = max_ratio.max(ratio);
            worst_lag = lag;
        }
    }
    Ok(BoundReport {
        holds: max_ratio <= 1.0,
        max_ratio,
        worst_lag,
    })
}

impl fmt::Display for BoundSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kind: {}", self.kind.as_str())?;
        writeln!(f, "theta: {}", self.theta)?;
        writeln!(f, "prefactor: {:e}", self.prefactor)?;
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub delta: f64,
    /// Normalized statistic per replicate.
    pub normalized: Vec<f64>,
    pub p95: f64,
    pub median: f64,
    /// Largest raw squared increment over all replicates.
    pub max_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub theta: f64,
    pub rows: Vec<ModulusRow>,
    /// 95th percentile nonincreasing as δ decreases.
    pub consistent: bool,
}

impl ModulusReport {
    pub fn verdict(&self) -> &'static str {
        if self.consistent {
            "consistent"
        } else {
            "inconsistent"
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,p95,median,max_raw\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.delta, r.p95, r.median, r.max_raw));
        }
        out
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Per replicate, `sup` of squared increments over node pairs at distance at
/// most δ in `(t, x)`, divided by `δ^θ (1 + log(1/δ)^{1/2})`.
pub fn modulus_stat(ens: &FieldEnsemble, theta: f64, deltas: &[f64]) -> Result<ModulusReport> {
    if ens.replicates() < 100 {
        return Err(Error::InsufficientReplicates {
            needed: 100,
            got: ens.replicates(),
        });
    }
    let times = ens.plan.times.points();
    let pts = &ens.plan.points;
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
    let space: Vec<Vec<f64>> = pts.iter().map(|a| pts.iter().map(|b| dist(a, b)).collect()).collect();
    let mut spacing = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    for (p, row) in space.iter().enumerate() {
        for d in &row[p + 1..] {
            if *d > 0.0 {
                spacing = spacing.min(d.sqrt());
            }
        }
    }
    let min_delta = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(spacing < min_delta) {
        return Err(Error::GridTooCoarse {
            spacing,
            delta: min_delta,
        });
    }
    let (nt, np) = (ens.n_times(), ens.n_points());
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let d2 = delta * delta;
        let norm = delta.powf(theta) * (1.0 + (1.0 / delta).ln().max(0.0).sqrt());
        let raw: Vec<f64> = (0..ens.replicates())
            .into_par_iter()
            .map(|r| {
                let field = ens.replicate(r);
                let mut sup: f64 = 0.0;
                for i in 0..nt {
                    for j in i..nt {
                        let dt2 = (times[j] - times[i]).powi(2);
                        if dt2 > d2 {
                            break;
                        }
                        for p in 0..np {
                            let a = field[i * np + p];
                            let q0 = if j == i { p + 1 } else { 0 };
                            for q in q0..np {
                                if dt2 + space[p][q] <= d2 {
                                    sup = sup.max((a - field[j * np + q]).powi(2));
                                }
                            }
                        }
                    }
                }
                sup
            })
            .collect();
        let normalized: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let mut sorted = normalized.clone();
        sorted.sort_by(f64::total_cmp);
        rows.push(ModulusRow {
            delta,
            p95: quantile(&sorted, 0.95),
            median: quantile(&sorted, 0.5),
            max_raw: raw.iter().cloned().fold(0.0, f64::max),
            normalized,
        });
    }
    let mut order: Vec<&ModulusRow> = rows.iter().collect();
    order.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let consistent = order.windows(2).all(|w| w[1].p95 <= w[0].p95);
    Ok(ModulusReport { theta, rows, consistent })
}

/// `max |D^β u + λ u|` for `u(t) = E_β(−λ t^β)` under the L1 scheme, over
/// grid points in `[T/2, T]`, away from the weak singularity at `t = 0`.
pub fn caputo_mode_residual(lambda: f64, beta: f64, grid: &TimeGrid) -> Result<f64> {
    if grid.len() < 64 {
        return Err(Error::GridTooSmall {
            needed: 64,
            got: grid.len(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let e = evaluator(beta);
    let u: Vec<f64> = grid.points().iter().map(|t| e.eval(lambda * t.powf(beta))).collect();
    let d = caputo_l1(&u, grid, beta)?;
    let half = 0.5 * grid.horizon();
    Ok(grid.points()[1..]
        .iter()
        .zip(&d)
        .zip(&u[1..])
        .filter(|((t, _), _)| **t >= half)
        .map(|((_, d), u)| (d + lambda * u).abs())
        .fold(0.0, f64::max))
}
