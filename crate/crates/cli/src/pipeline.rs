//! Stage orchestration: eigen-system, diagnostics, kernels, ensemble, analysis.

use std::fmt::Write as _;

use fracfield::analyze::{
    bound_exponent, calibrated_spacetime_bound, calibrated_temporal_bound, fit_loglog_slope, modulus_stat,
    spatial_bound, verify_bound, BoundKind, BoundReport, BoundSpec, ModulusReport, SlopeFit,
};
use fracfield::domains::{build_eigensystem, EigenSystem};
use fracfield::kernels::{KernelEngine, VariogramCurve};
use fracfield::simulate::{sample_ensemble, FieldEnsemble};
use fracfield::spectrum::{build_truncation, diagnostics_csv, summability_check, weyl_diagnostic};

use crate::artifacts::Artifacts;
use crate::config::{RunConfig, Stages};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eig,
    Diag,
    Kernel,
    Simulate,
    Analyze,
    Run,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Eig => "eig",
            Command::Diag => "diag",
            Command::Kernel => "kernel",
            Command::Simulate => "simulate",
            Command::Analyze => "analyze",
            Command::Run => "run",
        }
    }

    pub fn stages(&self, cfg: &RunConfig) -> Stages {
        let only = |f: fn(&mut Stages)| {
            let mut s = Stages::default();
            f(&mut s);
            s
        };
        match self {
            Command::Eig => only(|s| s.eig = true),
            Command::Diag => only(|s| s.diagnostics = true),
            Command::Kernel => only(|s| s.kernels = true),
            Command::Simulate => only(|s| s.ensemble = true),
            Command::Analyze => only(|s| s.analysis = true),
            Command::Run => Stages::from_outputs(&cfg.outputs),
        }
    }
}

/// A bound together with its check against the matching exact curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub bound: BoundSpec,
    pub report: BoundReport,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalysisSummary {
    pub temporal: Option<BoundCheck>,
    pub slope: Option<SlopeFit>,
    pub spatial: Option<BoundCheck>,
    pub spacetime: Option<BoundCheck>,
    /// Largest relative gap between the space-time curve at zero spatial lag
    /// and the temporal curve.
    pub consistency: Option<f64>,
    pub modulus: Option<ModulusReport>,
}

impl AnalysisSummary {
    /// Every verified bound holds.
    pub fn all_hold(&self) -> bool {
        [&self.temporal, &self.spatial, &self.spacetime]
            .iter()
            .all(|c| c.as_ref().is_none_or(|c| c.report.holds))
    }

    pub fn to_text(&self, cfg: &RunConfig, k: usize) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "config: {}", cfg.name);
        let _ = writeln!(out, "seed: {}", cfg.seed);
        let _ = writeln!(out, "K: {k}");
        let section = |out: &mut String, name: &str, c: &BoundCheck| {
            let _ = writeln!(out, "\n[{name}]");
            let _ = write!(out, "{}", c.bound);
            let _ = writeln!(out, "holds: {}", c.report.holds);
            let _ = writeln!(out, "max_ratio: {:e}", c.report.max_ratio);
            let _ = writeln!(out, "worst_lag: {:e}", c.report.worst_lag);
        };
        if let Some(c) = &self.temporal {
            section(&mut out, "temporal", c);
        }
        if let Some(f) = &self.slope {
            let _ = writeln!(
                out,
                "slope: {:.6} (stderr {:.2e}, r2 {:.6}, {} lags in [{:e}, {:e}])",
                f.slope, f.stderr, f.r2, f.points, f.window.0, f.window.1
            );
        }
        if let Some(c) = &self.spatial {
            section(&mut out, "spatial", c);
        }
        if let Some(c) = &self.spacetime {
            section(&mut out, "spacetime", c);
        }
        if let Some(g) = self.consistency {
            let _ = writeln!(out, "zero_spatial_lag_max_rel_diff: {g:e}");
        }
        if let Some(m) = &self.modulus {
            let _ = writeln!(out, "\n[modulus]");
            let _ = writeln!(out, "theta: {}", m.theta);
            let _ = writeln!(out, "verdict: {}", m.verdict());
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Curves {
    pub temporal: VariogramCurve,
    pub spatial: VariogramCurve,
    pub spacetime: VariogramCurve,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Artifacts,
    pub analysis: Option<AnalysisSummary>,
}

fn stage<T>(name: &'static str, r: fracfield::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::from_stage(name, e))
}

pub fn build_system(cfg: &RunConfig) -> Result<EigenSystem, CliError> {
    stage("eig", build_eigensystem(cfg.domain.clone(), cfg.raw_modes()))
}

pub fn build_engine(cfg: &RunConfig, sys: &EigenSystem) -> Result<KernelEngine, CliError> {
    Ok(KernelEngine::new(stage("spectrum", build_truncation(sys, &cfg.params, cfg.modes))?))
}

pub fn curves(cfg: &RunConfig, engine: &KernelEngine) -> Result<Curves, CliError> {
    let a = cfg.analysis()?;
    Ok(Curves {
        temporal: stage("kernel", engine.temporal_variogram(&a.anchor_x, a.anchor_t, &a.temporal_s()))?,
        spatial: stage("kernel", engine.spatial_variogram(a.anchor_t, &a.anchor_x, &a.spatial_points()))?,
        spacetime: stage(
            "kernel",
            engine.spatiotemporal_variogram(a.anchor_t, &a.anchor_x, &a.spacetime_points()),
        )?,
    })
}

pub fn variograms_csv(c: &Curves) -> String {
    let mut out = VariogramCurve::csv_header(c.temporal.anchor_x.len());
    for curve in [&c.temporal, &c.spatial, &c.spacetime] {
        out.push_str(&curve.csv_rows());
    }
    out
}

pub fn analyze(
    cfg: &RunConfig,
    engine: &KernelEngine,
    curves: &Curves,
    ensemble: Option<&FieldEnsemble>,
) -> Result<AnalysisSummary, CliError> {
    let a = cfg.analysis()?;
    let n = cfg.domain.dim();
    let mut s = AnalysisSummary::default();
    if a.temporal {
        let window = (a.temporal_lags.lo, a.temporal_lags.hi);
        let bound = stage(
            "analyze",
            calibrated_temporal_bound(&curves.temporal, &cfg.params, n, window, a.inflation),
        )?;
        let report = stage("analyze", verify_bound(&curves.temporal, &bound))?;
        s.temporal = Some(BoundCheck { bound, report });
        let widened = (0.99 * window.0, 1.01 * window.1);
        s.slope = Some(stage("analyze", fit_loglog_slope(&curves.temporal, widened))?);
    }
    if a.spatial {
        let bound = stage("analyze", spatial_bound(engine, a.anchor_t))?;
        let report = stage("analyze", verify_bound(&curves.spatial, &bound))?;
        s.spatial = Some(BoundCheck { bound, report });
    }
    if a.spacetime {
        let pts = a.spacetime_points();
        let bound = stage(
            "analyze",
            calibrated_spacetime_bound(engine, a.anchor_t, &a.anchor_x, &pts, a.inflation),
        )?;
        let report = stage("analyze", verify_bound(&curves.spacetime, &bound))?;
        s.spacetime = Some(BoundCheck { bound, report });
        let diag = stage(
            "kernel",
            engine.spatiotemporal_variogram(a.anchor_t, &a.anchor_x, &a.spacetime_diagonal()),
        )?;
        let gap = diag
            .values
            .iter()
            .zip(&curves.temporal.values)
            .map(|(d, t)| (d - t).abs() / t.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        s.consistency = Some(gap);
    }
    if let Some(ens) = ensemble.filter(|_| !a.modulus_deltas.is_empty()) {
        let theta = stage("analyze", bound_exponent(&cfg.params, n, BoundKind::Spacetime))?.theta;
        s.modulus = Some(stage("analyze", modulus_stat(ens, theta, &a.modulus_deltas))?);
    }
    Ok(s)
}

/// Runs `cmd` and collects its artifacts in memory; nothing touches disk.
pub fn run_command(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let stages = cmd.stages(cfg);
    cfg.validate(stages)?;
    let mut out = Outcome::default();
    let sys = build_system(cfg)?;
    if stages.eig {
        out.artifacts.insert("eigensystem.json", stage("eig", sys.to_json())?);
        let mut csv = String::from("k,gamma_k\n");
        for (i, g) in sys.eigenvalues().iter().enumerate() {
            let _ = writeln!(csv, "{},{g:e}", i + 1);
        }
        out.artifacts.insert("eigenvalues.csv", csv);
    }
    if !(stages.diagnostics || stages.kernels || stages.ensemble || stages.analysis) {
        return Ok(out);
    }
    let engine = build_engine(cfg, &sys)?;
    let k = engine.len();
    if stages.diagnostics {
        out.artifacts.insert("diagnostics.csv", diagnostics_csv(engine.truncation()));
        out.artifacts.insert("summability.txt", summability_text(cfg, &engine)?);
    }
    let needs_ensemble = stages.ensemble
        || (stages.analysis && cfg.analysis.as_ref().is_some_and(|a| !a.modulus_deltas.is_empty()));
    let ensemble = if needs_ensemble {
        let plan = cfg.plan()?;
        Some(stage("simulate", sample_ensemble(&engine, &plan))?)
    } else {
        None
    };
    if stages.ensemble {
        let ens = ensemble.as_ref().expect("sampled above");
        let mut bin = Vec::new();
        stage("simulate", ens.write_binary(&mut bin))?;
        out.artifacts.insert("ensemble.bin", bin);
        out.artifacts.insert("ensemble.csv", ens.to_csv());
    }
    if stages.kernels || stages.analysis {
        let c = curves(cfg, &engine)?;
        if stages.kernels {
            out.artifacts.insert("variograms.csv", variograms_csv(&c));
        }
        if stages.analysis {
            let summary = analyze(cfg, &engine, &c, ensemble.as_ref())?;
            out.artifacts.insert("bounds.txt", summary.to_text(cfg, k));
            if let Some(m) = &summary.modulus {
                out.artifacts.insert("modulus.csv", m.to_csv());
            }
            out.analysis = Some(summary);
        }
    }
    Ok(out)
}

fn summability_text(cfg: &RunConfig, engine: &KernelEngine) -> Result<String, CliError> {
    let t = cfg.time.horizon;
    let r = stage("diag", summability_check(engine.truncation(), cfg.params.beta, t))?;
    let mut out = String::new();
    let _ = writeln!(out, "t: {t}");
    let _ = writeln!(out, "K: {}", r.partial_sums.len());
    let _ = writeln!(out, "partial_sum: {:e}", r.total());
    let _ = writeln!(out, "tail_bound: {:e}", r.tail_bound);
    let _ = writeln!(out, "converged: {}", r.converged);
    let sw = r.sandwich;
    let _ = writeln!(out, "sandwich: L1 {:e} L2 {:e} k0 {} exponent {}", sw.l1, sw.l2, sw.k0, sw.exponent);
    if let Ok(w) = weyl_diagnostic(engine.truncation()) {
        let last = w.ratios.last().copied().unwrap_or(f64::NAN);
        let _ = writeln!(out, "weyl_limit: {:e}", w.limit);
        let _ = writeln!(out, "weyl_ratio_last: {last:e}");
    }
    Ok(out)
}
