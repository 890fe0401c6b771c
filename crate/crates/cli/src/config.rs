//! Run configuration: a single JSON document, see `configs/run-config.schema.json`.

use std::path::Path;

use fracfield::domains::DomainSpec;
use fracfield::mlf::TimeGrid;
use fracfield::simulate::{Method, SimulationPlan};
use fracfield::spectrum::FracParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub domain: DomainSpec,
    pub params: FracParams,
    /// Retained modes `K`.
    pub modes: usize,
    /// Modes computed before truncation; defaults to `modes`.
    #[serde(default)]
    pub raw_modes: Option<usize>,
    pub time: TimeConfig,
    /// Spatial sample points of the simulated field.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    #[serde(default)]
    pub replicates: usize,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub analysis: Option<AnalysisConfig>,
}

fn default_method() -> Method {
    Method::Cholesky
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    /// Grid points including `t = 0`.
    pub points: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub diagnostics: bool,
    pub kernels: bool,
    pub ensemble: bool,
    pub analysis: bool,
}

/// Log-spaced lags `lo .. hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagRange {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl LagRange {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let r = self.hi / self.lo;
        (0..self.count)
            .map(|i| self.lo * r.powf(i as f64 / (self.count - 1) as f64))
            .collect()
    }

    fn check(&self, field: &str, min_count: usize) -> Result<(), CliError> {
        if !(self.lo > 0.0 && self.hi > self.lo && self.hi.is_finite()) {
            return Err(CliError::config(field, format!("need 0 < lo < hi, got lo={} hi={}", self.lo, self.hi)));
        }
        if self.count < min_count {
            return Err(CliError::config(field, format!("count must be >= {min_count}, got {}", self.count)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub anchor_t: f64,
    pub anchor_x: Vec<f64>,
    pub temporal_lags: LagRange,
    pub spatial_lags: LagRange,
    /// Direction of the spatial lags; defaults to the first axis.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub temporal: bool,
    #[serde(default = "yes")]
    pub spatial: bool,
    #[serde(default = "yes")]
    pub spacetime: bool,
    #[serde(default = "default_inflation")]
    pub inflation: f64,
    #[serde(default)]
    pub modulus_deltas: Vec<f64>,
}

fn yes() -> bool {
    true
}

fn default_inflation() -> f64 {
    2.0
}

impl AnalysisConfig {
    pub fn unit_direction(&self) -> Vec<f64> {
        let mut d = self.direction.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; self.anchor_x.len()];
            e[0] = 1.0;
            e
        });
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.iter_mut().for_each(|v| *v /= norm);
        d
    }

    pub fn temporal_s(&self) -> Vec<f64> {
        self.temporal_lags.values().iter().map(|h| self.anchor_t - h).collect()
    }

    pub fn spatial_points(&self) -> Vec<Vec<f64>> {
        let d = self.unit_direction();
        self.spatial_lags
            .values()
            .iter()
            .map(|h| self.anchor_x.iter().zip(&d).map(|(x, e)| x + h * e).collect())
            .collect()
    }

    /// The i-th temporal lag paired with the i-th spatial lag.
    pub fn spacetime_points(&self) -> Vec<(f64, Vec<f64>)> {
        self.temporal_s().into_iter().zip(self.spatial_points()).collect()
    }

    /// The space-time points with the spatial lag removed.
    pub fn spacetime_diagonal(&self) -> Vec<(f64, Vec<f64>)> {
        self.temporal_s().into_iter().map(|s| (s, self.anchor_x.clone())).collect()
    }
}

/// Which pipeline stages a command needs; drives validation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stages {
    pub eig: bool,
    pub diagnostics: bool,
    pub kernels: bool,
    pub ensemble: bool,
    pub analysis: bool,
}

impl Stages {
    pub fn from_outputs(o: &Outputs) -> Self {
        Self {
            eig: false,
            diagnostics: o.diagnostics,
            kernels: o.kernels,
            ensemble: o.ensemble,
            analysis: o.analysis,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(json_field(&e), e.to_string()))
    }

    pub fn raw_modes(&self) -> usize {
        self.raw_modes.unwrap_or(self.modes)
    }

    pub fn time_grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::uniform(self.time.horizon, self.time.points).map_err(|e| CliError::config("time", e.to_string()))
    }

    pub fn plan(&self) -> Result<SimulationPlan, CliError> {
        SimulationPlan::new(self.time_grid()?, self.points.clone(), self.replicates, self.seed, self.method)
            .map_err(|e| CliError::config("points", e.to_string()))
    }

    pub fn analysis(&self) -> Result<&AnalysisConfig, CliError> {
        self.analysis
            .as_ref()
            .ok_or_else(|| CliError::config("analysis", "analysis output requested but no analysis section given"))
    }

    /// Every check that can fail before any computation starts.
    pub fn validate(&self, stages: Stages) -> Result<(), CliError> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(CliError::config("name", format!("must be non-empty [A-Za-z0-9_-], got {:?}", self.name)));
        }
        self.domain.validate().map_err(|e| CliError::config("domain", e.to_string()))?;
        self.params.validate().map_err(|e| CliError::config("params", e.to_string()))?;
        if self.modes == 0 {
            return Err(CliError::config("modes", "must be >= 1"));
        }
        if self.raw_modes() < self.modes {
            return Err(CliError::config(
                "raw_modes",
                format!("must be >= modes ({}), got {}", self.modes, self.raw_modes()),
            ));
        }
        self.time_grid()?;
        let n = self.domain.dim();
        if stages.diagnostics || stages.kernels || stages.ensemble || stages.analysis {
            self.params
                .check_solution_admissible(n)
                .map_err(|e| CliError::config("params", e.to_string()))?;
        }
        if stages.ensemble || (stages.analysis && self.analysis.as_ref().is_some_and(|a| !a.modulus_deltas.is_empty())) {
            self.check_points("points", &self.points)?;
            if self.points.is_empty() {
                return Err(CliError::config("points", "ensemble needs at least one spatial point"));
            }
            if self.replicates == 0 {
                return Err(CliError::config("replicates", "must be >= 1"));
            }
            self.plan()?;
        }
        if stages.kernels || stages.analysis {
            self.validate_analysis(stages)?;
        }
        Ok(())
    }

    fn validate_analysis(&self, stages: Stages) -> Result<(), CliError> {
        let a = self.analysis()?;
        let n = self.domain.dim();
        if !(a.anchor_t > 0.0 && a.anchor_t.is_finite()) {
            return Err(CliError::config("analysis.anchor_t", format!("must be positive, got {}", a.anchor_t)));
        }
        if a.anchor_x.len() != n || !self.domain.contains(&a.anchor_x) {
            return Err(CliError::config("analysis.anchor_x", format!("{:?} is not a point of the domain", a.anchor_x)));
        }
        a.temporal_lags.check("analysis.temporal_lags", 5)?;
        if a.temporal_lags.hi >= a.anchor_t {
            return Err(CliError::config(
                "analysis.temporal_lags",
                format!("hi must be below anchor_t = {}", a.anchor_t),
            ));
        }
        a.spatial_lags.check("analysis.spatial_lags", 2)?;
        if let Some(d) = &a.direction {
            if d.len() != n || d.iter().all(|v| *v == 0.0) || d.iter().any(|v| !v.is_finite()) {
                return Err(CliError::config("analysis.direction", format!("need a nonzero vector of length {n}")));
            }
        }
        self.check_points("analysis.spatial_lags", &a.spatial_points())?;
        if !(a.inflation >= 1.0 && a.inflation.is_finite()) {
            return Err(CliError::config("analysis.inflation", format!("must be >= 1, got {}", a.inflation)));
        }
        if !stages.analysis {
            return Ok(());
        }
        let beta = self.params.beta;
        if a.temporal || a.spacetime {
            let field = if a.temporal { "analysis.temporal" } else { "analysis.spacetime" };
            if beta >= 0.5 {
                return Err(CliError::config(
                    field,
                    format!("the temporal regularity bound holds only for beta < 1/2, got beta = {beta}"),
                ));
            }
            self.params
                .check_temporal_admissible(n)
                .map_err(|e| CliError::config("params", e.to_string()))?;
        }
        if a.spatial && beta >= 1.0 {
            return Err(CliError::config("analysis.spatial", "the spatial bound needs beta < 1"));
        }
        if !a.modulus_deltas.is_empty() {
            if a.modulus_deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                return Err(CliError::config("analysis.modulus_deltas", "all deltas must be positive"));
            }
            if self.replicates < 100 {
                return Err(CliError::config(
                    "replicates",
                    format!("the modulus statistic needs >= 100 replicates, got {}", self.replicates),
                ));
            }
        }
        Ok(())
    }

    fn check_points(&self, field: &str, pts: &[Vec<f64>]) -> Result<(), CliError> {
        let n = self.domain.dim();
        for p in pts {
            if p.len() != n || !self.domain.contains(p) {
                return Err(CliError::config(field, format!("{p:?} is not a point of the domain")));
            }
        }
        Ok(())
    }
}

/// Best-effort field name out of a serde error message.
fn json_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for key in ["missing field `", "unknown field `"] {
        if let Some(i) = msg.find(key) {
            let rest = &msg[i + key.len()..];
            if let Some(j) = rest.find('`') {
                return rest[..j].to_string();
            }
        }
    }
    "config".into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_range_endpoints() {
        let r = LagRange { lo: 1e-3, hi: 1e-1, count: 3 };
        let v = r.values();
        assert_eq!(v[0], 1e-3);
        assert!((v[1] - 1e-2).abs() < 1e-15);
        assert!((v[2] - 1e-1).abs() < 1e-15);
    }

    #[test]
    fn field_names_from_serde() {
        let e = RunConfig::parse("{\"name\": \"a\"}").unwrap_err();
        assert!(e.to_string().contains("domain"), "{e}");
    }
}
