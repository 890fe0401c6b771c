//! Monte Carlo replicates of the truncated field `c(t, x) = Σ_k φ_k(x) X_k(t)`.
//!
//! Each replicate `r` draws mode `k` from a ChaCha8 stream keyed by
//! `(master seed, r)` with stream number `k`, so replicates can be generated
//! in any order or in parallel and still reproduce bit for bit.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelEngine;
use crate::mlf::{Spacing, TimeGrid};

/// Largest time grid accepted by the dense per-mode factorization.
pub const MAX_CHOLESKY_POINTS: usize = 2048;
const JITTERS: [f64; 6] = [0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10];
const MAGIC: [u8; 8] = *b"FFENSEMB";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cholesky,
    Riemann,
}

impl Method {
    fn code(self) -> u32 {
        match self {
            Method::Cholesky => 0,
            Method::Riemann => 1,
        }
    }

    fn from_code(c: u32) -> Result<Self> {
        match c {
            0 => Ok(Method::Cholesky),
            1 => Ok(Method::Riemann),
            _ => Err(Error::Format(format!("unknown method code {c}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub times: TimeGrid,
    pub points: Vec<Vec<f64>>,
    pub replicates: usize,
    pub seed: u64,
    pub method: Method,
}

impl SimulationPlan {
    pub fn new(times: TimeGrid, points: Vec<Vec<f64>>, replicates: usize, seed: u64, method: Method) -> Result<Self> {
        let plan = Self {
            times,
            points,
            replicates,
            seed,
            method,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.points().first() != Some(&0.0) {
            return Err(Error::InvalidGrid("time grid must start at 0".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InsufficientReplicates { needed: 1, got: 0 });
        }
        if self.points.is_empty() {
            return Err(Error::InvalidParams("at least one spatial point is required".into()));
        }
        let dim = self.points[0].len();
        if self.points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidParams("spatial points differ in dimension".into()));
        }
        match self.method {
            Method::Cholesky if self.times.len() > MAX_CHOLESKY_POINTS => Err(Error::GridEnvelope(format!(
                "cholesky sampling supports at most {MAX_CHOLESKY_POINTS} time points, got {}",
                self.times.len()
            ))),
            Method::Riemann if matches!(self.times.spacing(), Spacing::NonUniform) => Err(Error::NonUniformGrid {
                deviation: self.times.step_deviation(),
            }),
            _ => Ok(()),
        }
    }
}

/// RNG key of replicate `r`: master seed then replicate counter, little endian.
pub fn replicate_key(master: u64, r: usize) -> [u8; 32] {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&(r as u64).to_le_bytes());
    key
}

fn mode_rng(master: u64, r: usize, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(replicate_key(master, r));
    rng.set_stream(k as u64);
    rng
}

/// Replicates of the field on a `time × space` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnsemble {
    pub plan: SimulationPlan,
    /// Number of modes used.
    pub k: usize,
    /// Flat `[replicate][time][space]`.
    values: Vec<f64>,
}

impl FieldEnsemble {
    pub fn replicates(&self) -> usize {
        self.plan.replicates
    }

    pub fn n_times(&self) -> usize {
        self.plan.times.len()
    }

    pub fn n_points(&self) -> usize {
        self.plan.points.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, r: usize, i: usize, p: usize) -> f64 {
        self.values[(r * self.n_times() + i) * self.n_points() + p]
    }

    /// Field of one replicate, `[time][space]`.
    pub fn replicate(&self, r: usize) -> &[f64] {
        let n = self.n_times() * self.n_points();
        &self.values[r * n..(r + 1) * n]
    }

    /// Values at one grid node across replicates.
    pub fn node(&self, i: usize, p: usize) -> Vec<f64> {
        (0..self.replicates()).map(|r| self.value(r, i, p)).collect()
    }

    /// Long-format CSV: `replicate,t,x0,…,value`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let dim = self.plan.points[0].len();
        let mut out = String::from("replicate,t");
        for d in 0..dim {
            let _ = write!(out, ",x{d}");
        }
        out.push_str(",value\n");
        for r in 0..self.replicates() {
            for (i, t) in self.plan.times.points().iter().enumerate() {
                for (p, x) in self.plan.points.iter().enumerate() {
                    let _ = write!(out, "{r},{t}");
                    for c in x {
                        let _ = write!(out, ",{c}");
                    }
                    let _ = writeln!(out, ",{}", self.value(r, i, p));
                }
            }
        }
        out
    }

    /// Binary layout, all little endian:
    /// magic `FFENSEMB`, version u32, method u32, then u64 replicates,
    /// times, points, dim, modes and seed, then the time grid, the points
    /// and the values as f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.plan.points[0].len();
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.plan.method.code().to_le_bytes())?;
        for v in [self.replicates(), self.n_times(), self.n_points(), dim, self.k] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        w.write_all(&self.plan.seed.to_le_bytes())?;
        let floats = self
            .plan
            .times
            .points()
            .iter()
            .chain(self.plan.points.iter().flatten())
            .chain(self.values.iter());
        for v in floats {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(Error::Format("bad ensemble magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported ensemble version {version}")));
        }
        r.read_exact(&mut b4)?;
        let method = Method::from_code(u32::from_le_bytes(b4))?;
        let mut b8 = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let reps = next_u64(&mut r)? as usize;
        let nt = next_u64(&mut r)? as usize;
        let np = next_u64(&mut r)? as usize;
        let dim = next_u64(&mut r)? as usize;
        let k = next_u64(&mut r)? as usize;
        let seed = next_u64(&mut r)?;
        let mut floats = |n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect())
        };
        let times = TimeGrid::from_points(floats(nt)?)?;
        let points = floats(np * dim)?.chunks(dim.max(1)).map(|c| c.to_vec()).collect();
        let values = floats(reps * nt * np)?;
        Ok(Self {
            plan: SimulationPlan {
                times,
                points,
                replicates: reps,
                seed,
                method,
            },
            k,
            values,
        })
    }
}

/// Lower Cholesky factor of the mode covariance restricted to `t > 0`,
/// with relative diagonal jitter escalated until factorization succeeds.
fn factor(cov: &[Vec<f64>], mode: usize) -> Result<DMatrix<f64>> {
    let n = cov.len() - 1;
    let base = DMatrix::from_fn(n, n, |i, j| cov[i + 1][j + 1]);
    let scale = (0..n).map(|i| base[(i, i)]).fold(0.0, f64::max);
    for jitter in JITTERS {
        let mut m = base.clone();
        for i in 0..n {
            m[(i, i)] += jitter * scale;
        }
        if let Some(c) = m.cholesky() {
            return Ok(c.unpack());
        }
    }
    Err(Error::Factorization { mode })
}

fn mode_values(engine: &KernelEngine, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    points.iter().map(|x| engine.truncation().eigenfunctions_at(x)).collect()
}

/// `c = Σ_k φ_k(x) X_k(t)` in ascending mode order, `[time][space]`.
fn synthesize(paths: &[Vec<f64>], phis: &[Vec<f64>], n_times: usize) -> Vec<f64> {
    let np = phis.len();
    let mut out = vec![0.0; n_times * np];
    for (k, path) in paths.iter().enumerate() {
        for (i, xk) in path.iter().enumerate() {
            for (p, phi) in phis.iter().enumerate() {
                out[i * np + p] += phi[k] * xk;
            }
        }
    }
    out
}

/// Mode paths `X_k(t_i)` of replicate `r` drawn with the exact per-mode law.
pub struct CholeskySampler {
    factors: Vec<DMatrix<f64>>,
    n_times: usize,
    seed: u64,
}

impl CholeskySampler {
    pub fn new(engine: &KernelEngine, times: &TimeGrid, seed: u64) -> Result<Self> {
        engine.truncation().params().check_solution_admissible(engine.truncation().dim())?;
        if times.len() > MAX_CHOLESKY_POINTS {
            return Err(Error::GridEnvelope(format!(
                "cholesky sampling supports at most {MAX_CHOLESKY_POINTS} time points, got {}",
                times.len()
            )));
        }
        let factors = (0..engine.len())
            .map(|k| {
                let cov = engine.mode_covariance_matrix(k, times.points())?;
                factor(&cov, k)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            factors,
            n_times: times.len(),
            seed,
        })
    }

    pub fn mode_paths(&self, r: usize) -> Vec<Vec<f64>> {
        self.factors
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let mut rng = mode_rng(self.seed, r, k);
                let n = self.n_times - 1;
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let mut path = vec![0.0; self.n_times];
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += l[(i, j)] * z[j];
                    }
                    path[i + 1] = acc;
                }
                path
            })
            .collect()
    }
}

/// Left-point Riemann discretization `X_k(t_i) = Σ_{j<i} E_β(−λ_k(t_i−t_j)^β) ΔB_j`.
pub struct RiemannSampler {
    /// `E_β(−λ_k (mΔ)^β)` for `m = 0..M`.
    relax: Vec<Vec<f64>>,
    step: f64,
    n_times: usize,
    seed: u64,
}

impl RiemannSampler {
    pub fn new(engine: &KernelEngine, times: &TimeGrid, seed: u64) -> Result<Self> {
        engine.truncation().params().check_solution_admissible(engine.truncation().dim())?;
        let step = match times.spacing() {
            Spacing::Uniform { step } => step,
            Spacing::NonUniform => {
                return Err(Error::NonUniformGrid {
                    deviation: times.step_deviation(),
                })
            }
        };
        let relax = (0..engine.len())
            .map(|k| {
                let m = engine.mode(k);
                (0..times.len()).map(|i| m.relax(i as f64 * step)).collect()
            })
            .collect();
        Ok(Self {
            relax,
            step,
            n_times: times.len(),
            seed,
        })
    }

    pub fn mode_paths(&self, r: usize) -> Vec<Vec<f64>> {
        let sd = self.step.sqrt();
        self.relax
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let mut rng = mode_rng(self.seed, r, k);
                let n = self.n_times - 1;
                let db: Vec<f64> = (0..n)
                    .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                    .collect();
                let mut path = vec![0.0; self.n_times];
                for i in 1..self.n_times {
                    let mut acc = 0.0;
                    for j in 0..i {
                        acc += e[i - j] * db[j];
                    }
                    path[i] = acc;
                }
                path
            })
            .collect()
    }

    /// Exact covariance of the discretized mode process.
    pub fn mode_covariance(&self, k: usize) -> Vec<Vec<f64>> {
        let e = &self.relax[k];
        let n = self.n_times;
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for l in 0..=i {
                let v: f64 = (0..l).map(|j| e[i - j] * e[l - j]).sum::<f64>() * self.step;
                out[i][l] = v;
                out[l][i] = v;
            }
        }
        out
    }
}

fn assemble<F>(engine: &KernelEngine, plan: &SimulationPlan, paths: F) -> Result<FieldEnsemble>
where
    F: Fn(usize) -> Vec<Vec<f64>> + Sync,
{
    let phis = mode_values(engine, &plan.points)?;
    let nt = plan.times.len();
    let per_rep: Vec<Vec<f64>> = (0..plan.replicates)
        .into_par_iter()
        .map(|r| synthesize(&paths(r), &phis, nt))
        .collect();
    Ok(FieldEnsemble {
        plan: plan.clone(),
        k: engine.len(),
        values: per_rep.concat(),
    })
}

/// Replicates drawn with the method named in the plan.
pub fn sample_ensemble(engine: &KernelEngine, plan: &SimulationPlan) -> Result<FieldEnsemble> {
    plan.validate()?;
    match plan.method {
        Method::Cholesky => {
            let s = CholeskySampler::new(engine, &plan.times, plan.seed)?;
            assemble(engine, plan, |r| s.mode_paths(r))
        }
        Method::Riemann => riemann_sample(engine, plan),
    }
}

/// Replicates from the left-point Riemann sum, whatever the plan's method.
pub fn riemann_sample(engine: &KernelEngine, plan: &SimulationPlan) -> Result<FieldEnsemble> {
    let mut plan = plan.clone();
    plan.method = Method::Riemann;
    plan.validate()?;
    let s = RiemannSampler::new(engine, &plan.times, plan.seed)?;
    assemble(engine, &plan, |r| s.mode_paths(r))
}

/// Grid node `(time index, point index)`.
pub type Node = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Mean(Node),
    Covariance(Node, Node),
    /// `E[(c(a) − c(b))²]`.
    IncrementMoment(Node, Node),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub target: Target,
    pub value: f64,
    pub stderr: f64,
}

fn mean_with_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
    // jackknife SE of a mean is the classical s/√n
    (m, (ss / (n - 1.0) / n).sqrt())
}

/// Unbiased covariance with its jackknife standard error.
fn covariance_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let q: f64 = prods.iter().sum();
    let full = q / (n - 1.0);
    let loo: Vec<f64> = prods.iter().map(|p| (q - n / (n - 1.0) * p) / (n - 2.0)).collect();
    let mean_loo = loo.iter().sum::<f64>() / n;
    let var = (n - 1.0) / n * loo.iter().map(|v| (v - mean_loo).powi(2)).sum::<f64>();
    (full, var.sqrt())
}

pub fn ensemble_estimate(ens: &FieldEnsemble, targets: &[Target]) -> Result<Vec<Estimate>> {
    let reps = ens.replicates();
    let check = |(i, p): Node| -> Result<()> {
        if i >= ens.n_times() || p >= ens.n_points() {
            return Err(Error::InvalidParams(format!("node ({i}, {p}) is outside the ensemble grid")));
        }
        Ok(())
    };
    targets
        .iter()
        .map(|&target| {
            let (value, stderr) = match target {
                Target::Mean(a) => {
                    check(a)?;
                    if reps < 2 {
                        return Err(Error::InsufficientReplicates { needed: 2, got: reps });
                    }
                    mean_with_se(&ens.node(a.0, a.1))
                }
                Target::Covariance(a, b) => {
                    check(a)?;
                    check(b)?;
                    if reps < 3 {
                        return Err(Error::InsufficientReplicates { needed: 3, got: reps });
                    }
                    covariance_with_se(&ens.node(a.0, a.1), &ens.node(b.0, b.1))
                }
                Target::IncrementMoment(a, b) => {
                    check(a)?;
                    check(b)?;
                    if reps < 2 {
                        return Err(Error::InsufficientReplicates { needed: 2, got: reps });
                    }
                    let d: Vec<f64> = (0..reps)
                        .map(|r| (ens.value(r, a.0, a.1) - ens.value(r, b.0, b.1)).powi(2))
                        .collect();
                    mean_with_se(&d)
                }
            };
            Ok(Estimate { target, value, stderr })
        })
        .collect()
}
