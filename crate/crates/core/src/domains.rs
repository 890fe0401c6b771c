//! Dirichlet eigenpairs of the negative Laplacian on intervals, boxes
//! (`n ≤ 3`), the disk and the circular annulus, L²-normalized.
//!
//! Disk and annulus are centred at the origin; points are Cartesian. Modes of
//! angular order `m ≥ 1` come in `cos(mθ)` / `sin(mθ)` pairs. Multi-indices are
//! `[k_1, …, k_n]` for boxes and `[m, r, c]` (order, radial index, 0 = cos /
//! 1 = sin) for round domains; equal eigenvalues are ordered lexicographically
//! by multi-index.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bessel::{self, RootKind, MAX_ORDER};
use crate::error::{Error, Result};
use crate::quadrature::GaussRule;
use crate::special::gamma;

/// A bounded domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DomainSpec {
    Interval { length: f64 },
    Rectangle { lengths: Vec<f64> },
    Disk { radius: f64 },
    Annulus { inner: f64, outer: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidDomain(format!("{name} must be positive and finite, got {v}")))
    }
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Interval { length } => positive("length", *length),
            DomainSpec::Rectangle { lengths } => {
                if lengths.is_empty() || lengths.len() > 3 {
                    return Err(Error::UnsupportedDomain(format!(
                        "boxes of dimension {} (supported: 1 to 3)",
                        lengths.len()
                    )));
                }
                lengths.iter().try_for_each(|&l| positive("side length", l))
            }
            DomainSpec::Disk { radius } => positive("radius", *radius),
            DomainSpec::Annulus { inner, outer } => {
                positive("inner radius", *inner)?;
                positive("outer radius", *outer)?;
                if inner >= outer {
                    return Err(Error::InvalidDomain(format!(
                        "annulus needs inner < outer, got {inner} >= {outer}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Spatial dimension `n`.
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Rectangle { lengths } => lengths.len(),
            DomainSpec::Disk { .. } | DomainSpec::Annulus { .. } => 2,
        }
    }

    /// Lebesgue measure `|D|`.
    pub fn volume(&self) -> f64 {
        match self {
            DomainSpec::Interval { length } => *length,
            DomainSpec::Rectangle { lengths } => lengths.iter().product(),
            DomainSpec::Disk { radius } => PI * radius * radius,
            DomainSpec::Annulus { inner, outer } => PI * (outer * outer - inner * inner),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            DomainSpec::Interval { length } => *length,
            DomainSpec::Rectangle { lengths } => lengths.iter().map(|l| l * l).sum::<f64>().sqrt(),
            DomainSpec::Disk { radius } => 2.0 * radius,
            DomainSpec::Annulus { outer, .. } => 2.0 * outer,
        }
    }

    /// Leading constant `W` of the Weyl law `γ_k ~ W k^{2/n}`.
    pub fn weyl_constant(&self) -> f64 {
        let n = self.dim() as f64;
        4.0 * PI * gamma(1.0 + 0.5 * n).powf(2.0 / n) / self.volume().powf(2.0 / n)
    }

    /// Membership in the closure, with a relative tolerance of 1e-12.
    pub fn contains(&self, p: &[f64]) -> bool {
        if p.len() != self.dim() || p.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let tol = 1e-12;
        match self {
            DomainSpec::Interval { length } => p[0] >= -tol * length && p[0] <= length * (1.0 + tol),
            DomainSpec::Rectangle { lengths } => p
                .iter()
                .zip(lengths)
                .all(|(&x, &l)| x >= -tol * l && x <= l * (1.0 + tol)),
            DomainSpec::Disk { radius } => p[0].hypot(p[1]) <= radius * (1.0 + tol),
            DomainSpec::Annulus { inner, outer } => {
                let r = p[0].hypot(p[1]);
                r >= inner * (1.0 - tol) && r <= outer * (1.0 + tol)
            }
        }
    }

    fn side_lengths(&self) -> Vec<f64> {
        match self {
            DomainSpec::Interval { length } => vec![*length],
            DomainSpec::Rectangle { lengths } => lengths.clone(),
            _ => Vec::new(),
        }
    }
}

/// One eigenpair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub index: Vec<usize>,
    /// Eigenvalue `γ_k`.
    pub gamma: f64,
    /// Factor turning the raw separable product into a unit-norm function.
    pub norm: f64,
    /// Bessel zero: `j_{m,r}` for the disk, wavenumber `k_{m,r}` for the annulus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<f64>,
    /// Annulus radial coefficients `(Y_m(kR₀), J_m(kR₀))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial: Option<[f64; 2]>,
}

/// Per-mode Lipschitz data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeHolderData {
    pub mode: usize,
    pub lipschitz_constant: f64,
    pub upsilon: f64,
}

/// A domain with its lowest Dirichlet eigenpairs, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub spec: DomainSpec,
    pub modes: Vec<Mode>,
}

/// Computes the `k_raw` smallest Dirichlet eigenpairs.
pub fn build_eigensystem(spec: DomainSpec, k_raw: usize) -> Result<EigenSystem> {
    spec.validate()?;
    if k_raw == 0 {
        return Err(Error::InvalidParams("mode count must be at least 1".into()));
    }
    // Weyl estimate of γ_K, inflated for the Dirichlet boundary deficit.
    let mut cap = spec.weyl_constant() * (k_raw as f64).powf(2.0 / spec.dim() as f64) * 1.5
        + 4.0 * spec.weyl_constant();
    loop {
        let mut modes = match &spec {
            DomainSpec::Interval { .. } | DomainSpec::Rectangle { .. } => box_modes(&spec.side_lengths(), cap),
            DomainSpec::Disk { radius } => round_modes(*radius, None, cap)?,
            DomainSpec::Annulus { inner, outer } => round_modes(*outer, Some(*inner), cap)?,
        };
        if modes.len() >= k_raw {
            modes.sort_by(|a, b| a.gamma.total_cmp(&b.gamma).then_with(|| a.index.cmp(&b.index)));
            modes.truncate(k_raw);
            if let DomainSpec::Disk { radius: outer } | DomainSpec::Annulus { outer, .. } = spec {
                // Orders above the root-finding envelope have γ > ((MAX_ORDER+1)/R)².
                let limit = ((MAX_ORDER + 1) as f64 / outer).powi(2);
                if modes.last().is_some_and(|m| m.gamma >= limit) {
                    return Err(Error::Envelope(format!(
                        "{k_raw} modes need angular orders above {MAX_ORDER}"
                    )));
                }
            }
            return Ok(EigenSystem { spec, modes });
        }
        cap *= 2.0;
    }
}

fn box_modes(lengths: &[f64], cap: f64) -> Vec<Mode> {
    let norm: f64 = lengths.iter().map(|l| (2.0 / l).sqrt()).product();
    let mut out = Vec::new();
    let mut idx = vec![1usize; lengths.len()];
    fn rec(d: usize, lengths: &[f64], idx: &mut Vec<usize>, partial: f64, cap: f64, norm: f64, out: &mut Vec<Mode>) {
        if d == lengths.len() {
            out.push(Mode {
                index: idx.clone(),
                gamma: partial,
                norm,
                root: None,
                radial: None,
            });
            return;
        }
        let mut k = 1usize;
        loop {
            let g = partial + (k as f64 * PI / lengths[d]).powi(2);
            // remaining axes contribute at least their fundamental
            let rest: f64 = lengths[d + 1..].iter().map(|l| (PI / l).powi(2)).sum();
            if g + rest > cap {
                break;
            }
            idx[d] = k;
            rec(d + 1, lengths, idx, g, cap, norm, out);
            k += 1;
        }
        idx[d] = 1;
    }
    rec(0, lengths, &mut idx, 0.0, cap, norm, &mut out);
    out
}

fn round_modes(outer: f64, inner: Option<f64>, cap: f64) -> Result<Vec<Mode>> {
    let kmax = cap.sqrt();
    let mut out = Vec::new();
    for m in 0..=MAX_ORDER {
        if m as f64 >= kmax * outer {
            break;
        }
        let pair: &[usize] = if m == 0 { &[0] } else { &[0, 1] };
        match inner {
            None => {
                let roots = bessel::roots_below(m, kmax * outer, RootKind::FirstKind)?;
                for (r, &j) in roots.iter().enumerate() {
                    let jp1 = bessel::bessel_j(m + 1, j);
                    let ang = if m == 0 { 2.0 * PI } else { PI };
                    let norm = 1.0 / (0.5 * outer * outer * jp1 * jp1 * ang).sqrt();
                    for &c in pair {
                        out.push(Mode {
                            index: vec![m, r + 1, c],
                            gamma: (j / outer).powi(2),
                            norm,
                            root: Some(j),
                            radial: None,
                        });
                    }
                }
            }
            Some(r0) => {
                let kind = RootKind::AnnulusCrossProduct { inner: r0, outer };
                let roots = bessel::roots_below(m, kmax, kind)?;
                for (r, &k) in roots.iter().enumerate() {
                    let ya = bessel::bessel_y(m, k * r0);
                    let ja = bessel::bessel_j(m, k * r0);
                    let du = |x: f64| {
                        let (_, jd) = bessel::bessel_j_deriv(m, x);
                        let (_, yd) = bessel::bessel_y_deriv(m, x);
                        jd * ya - yd * ja
                    };
                    let d_out = du(k * outer);
                    let d_in = du(k * r0);
                    let radial_norm2 = 0.5 * outer * outer * d_out * d_out - 0.5 * r0 * r0 * d_in * d_in;
                    let ang = if m == 0 { 2.0 * PI } else { PI };
                    let norm = 1.0 / (radial_norm2 * ang).sqrt();
                    for &c in pair {
                        out.push(Mode {
                            index: vec![m, r + 1, c],
                            gamma: k * k,
                            norm,
                            root: Some(k),
                            radial: Some([ya, ja]),
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.gamma).collect()
    }

    fn mode(&self, k: usize) -> Result<&Mode> {
        self.modes.get(k).ok_or(Error::ModeIndex {
            index: k,
            len: self.modes.len(),
        })
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if self.spec.contains(p) {
            Ok(())
        } else {
            Err(Error::PointOutside { point: p.to_vec() })
        }
    }

    /// `φ_k(p)` for the zero-based mode index `k`.
    pub fn eval(&self, k: usize, p: &[f64]) -> Result<f64> {
        let mode = self.mode(k)?;
        self.check_point(p)?;
        Ok(self.value(mode, p))
    }

    /// `φ_k` at every point of `points`.
    pub fn eval_many(&self, k: usize, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mode = self.mode(k)?;
        points
            .iter()
            .map(|p| {
                self.check_point(p)?;
                Ok(self.value(mode, p))
            })
            .collect()
    }

    /// Cartesian gradient `∇φ_k(p)`.
    pub fn gradient(&self, k: usize, p: &[f64]) -> Result<Vec<f64>> {
        let mode = self.mode(k)?;
        self.check_point(p)?;
        Ok(self.grad(mode, p))
    }

    fn value(&self, mode: &Mode, p: &[f64]) -> f64 {
        match &self.spec {
            DomainSpec::Interval { .. } | DomainSpec::Rectangle { .. } => {
                let lengths = self.spec.side_lengths();
                mode.norm
                    * p.iter()
                        .zip(&lengths)
                        .zip(&mode.index)
                        .map(|((&x, &l), &k)| (k as f64 * PI * x / l).sin())
                        .product::<f64>()
            }
            DomainSpec::Disk { .. } | DomainSpec::Annulus { .. } => {
                let (r, theta) = (p[0].hypot(p[1]), p[1].atan2(p[0]));
                let m = mode.index[0];
                mode.norm * self.radial(mode, r).0 * angular(m, mode.index[2], theta)
            }
        }
    }

    /// Radial profile and its `r`-derivative.
    fn radial(&self, mode: &Mode, r: f64) -> (f64, f64) {
        let m = mode.index[0];
        let root = mode.root.expect("round-domain modes carry a root");
        match &self.spec {
            DomainSpec::Disk { radius } => {
                let s = root / radius;
                let (j, jd) = bessel::bessel_j_deriv(m, s * r);
                (j, s * jd)
            }
            DomainSpec::Annulus { .. } => {
                let [ya, ja] = mode.radial.expect("annulus modes carry radial coefficients");
                let (j, jd) = bessel::bessel_j_deriv(m, root * r);
                let (y, yd) = bessel::bessel_y_deriv(m, root * r);
                (j * ya - y * ja, root * (jd * ya - yd * ja))
            }
            _ => unreachable!("radial profile of a box mode"),
        }
    }

    /// `(∂_r φ, r⁻¹ ∂_θ φ)` without the angular factor: `(A, B)` with
    /// `∂_r φ = A·ang(mθ)` and `r⁻¹∂_θ φ = B·ang'(mθ)/m`.
    fn polar_gradient_amplitudes(&self, mode: &Mode, r: f64) -> (f64, f64) {
        let m = mode.index[0];
        let (u, du) = self.radial(mode, r);
        let a = mode.norm * du;
        let b = if m == 0 {
            0.0
        } else if r > 0.0 {
            mode.norm * m as f64 * u / r
        } else if m == 1 {
            // J_1(s r)/r → s/2
            let root = mode.root.expect("round-domain modes carry a root");
            match &self.spec {
                DomainSpec::Disk { radius } => mode.norm * 0.5 * root / radius,
                _ => 0.0,
            }
        } else {
            0.0
        };
        (a, b)
    }

    fn grad(&self, mode: &Mode, p: &[f64]) -> Vec<f64> {
        match &self.spec {
            DomainSpec::Interval { .. } | DomainSpec::Rectangle { .. } => {
                let lengths = self.spec.side_lengths();
                let n = p.len();
                let args: Vec<f64> = (0..n)
                    .map(|i| mode.index[i] as f64 * PI * p[i] / lengths[i])
                    .collect();
                (0..n)
                    .map(|i| {
                        let mut g = mode.norm * mode.index[i] as f64 * PI / lengths[i] * args[i].cos();
                        for (j, a) in args.iter().enumerate() {
                            if j != i {
                                g *= a.sin();
                            }
                        }
                        g
                    })
                    .collect()
            }
            DomainSpec::Disk { .. } | DomainSpec::Annulus { .. } => {
                let (r, theta) = (p[0].hypot(p[1]), p[1].atan2(p[0]));
                let (m, c) = (mode.index[0], mode.index[2]);
                let (a, b) = self.polar_gradient_amplitudes(mode, r);
                let mt = m as f64 * theta;
                // ang = cos(mθ) or sin(mθ); (1/m) d/dθ ang = -sin(mθ) or cos(mθ)
                let (ang, dang) = if c == 0 { (mt.cos(), -mt.sin()) } else { (mt.sin(), mt.cos()) };
                let gr = a * ang;
                let gt = b * dang;
                let (st, ct) = theta.sin_cos();
                vec![gr * ct - gt * st, gr * st + gt * ct]
            }
        }
    }

    /// Per-mode Lipschitz constant: supremum of `|∇φ_k|` over a dense grid,
    /// padded by 5%.
    pub fn mode_holder_constant(&self, k: usize) -> Result<ModeHolderData> {
        let mode = self.mode(k)?;
        let sup = match &self.spec {
            DomainSpec::Interval { .. } | DomainSpec::Rectangle { .. } => {
                // |∇φ|² = norm² Σ_i a_i² C_i Π_{j≠i} (1 - C_j) with C_i = cos²(arg_i),
                // multilinear in the C_i, so its grid maximum sits at the extreme
                // grid values of each C_i.
                let lengths = self.spec.side_lengths();
                let n = lengths.len();
                let ranges: Vec<(f64, f64)> = (0..n)
                    .map(|i| {
                        let kk = mode.index[i];
                        let pts = 32 * kk + 1;
                        let mut lo = f64::INFINITY;
                        let mut hi = f64::NEG_INFINITY;
                        for s in 0..pts {
                            let x = lengths[i] * s as f64 / (pts - 1) as f64;
                            let c = (kk as f64 * PI * x / lengths[i]).cos().powi(2);
                            lo = lo.min(c);
                            hi = hi.max(c);
                        }
                        (lo, hi)
                    })
                    .collect();
                let a2: Vec<f64> = (0..n)
                    .map(|i| (mode.index[i] as f64 * PI / lengths[i]).powi(2))
                    .collect();
                let mut best: f64 = 0.0;
                for mask in 0..(1usize << n) {
                    let c: Vec<f64> = (0..n)
                        .map(|i| if mask >> i & 1 == 1 { ranges[i].1 } else { ranges[i].0 })
                        .collect();
                    let v: f64 = (0..n)
                        .map(|i| {
                            a2[i] * c[i]
                                * (0..n).filter(|&j| j != i).map(|j| 1.0 - c[j]).product::<f64>()
                        })
                        .sum();
                    best = best.max(v);
                }
                mode.norm * best.sqrt()
            }
            DomainSpec::Disk { .. } | DomainSpec::Annulus { .. } => {
                // sup over θ of |∇φ|² at fixed r is max(A², B²)
                let (r0, r1) = self.radial_range();
                let pts = 64 * (mode.index[0] + mode.index[1]) + 2000;
                (0..=pts)
                    .map(|s| {
                        let r = r0 + (r1 - r0) * s as f64 / pts as f64;
                        let (a, b) = self.polar_gradient_amplitudes(mode, r);
                        a.abs().max(b.abs())
                    })
                    .fold(0.0, f64::max)
            }
        };
        Ok(ModeHolderData {
            mode: k,
            lipschitz_constant: 1.05 * sup,
            upsilon: 1.0,
        })
    }

    /// `sup_x |φ_k(x)|`, from the same dense grids.
    pub fn mode_sup(&self, k: usize) -> Result<f64> {
        let mode = self.mode(k)?;
        Ok(match &self.spec {
            DomainSpec::Interval { .. } | DomainSpec::Rectangle { .. } => mode.norm,
            DomainSpec::Disk { .. } | DomainSpec::Annulus { .. } => {
                let (r0, r1) = self.radial_range();
                let pts = 64 * (mode.index[0] + mode.index[1]) + 2000;
                (0..=pts)
                    .map(|s| {
                        let r = r0 + (r1 - r0) * s as f64 / pts as f64;
                        (mode.norm * self.radial(mode, r).0).abs()
                    })
                    .fold(0.0, f64::max)
            }
        })
    }

    fn radial_range(&self) -> (f64, f64) {
        match self.spec {
            DomainSpec::Disk { radius } => (0.0, radius),
            DomainSpec::Annulus { inner, outer } => (inner, outer),
            _ => unreachable!("radial range of a box"),
        }
    }

    /// L² Gram matrix of the first `count` modes by tensor Gauss–Legendre
    /// quadrature (≥ 8 nodes per wavelength), separated across coordinates.
    pub fn gram_matrix(&self, count: usize) -> Result<DMatrix<f64>> {
        if count > self.modes.len() {
            return Err(Error::InsufficientModes {
                requested: count,
                available: self.modes.len(),
            });
        }
        let modes = &self.modes[..count];
        let mut g = DMatrix::zeros(count, count);
        match &self.spec {
            DomainSpec::Interval { .. } | DomainSpec::Rectangle { .. } => {
                let lengths = self.spec.side_lengths();
                let axes: Vec<Vec<(f64, f64)>> = lengths
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| {
                        let kmax = modes.iter().map(|m| m.index[i]).max().unwrap_or(1);
                        GaussRule::new(4 * kmax + 16).mapped(0.0, l).collect()
                    })
                    .collect();
                for a in 0..count {
                    for b in 0..=a {
                        let mut v = modes[a].norm * modes[b].norm;
                        for (i, axis) in axes.iter().enumerate() {
                            let (ka, kb) = (modes[a].index[i] as f64, modes[b].index[i] as f64);
                            let l = lengths[i];
                            v *= axis
                                .iter()
                                .map(|&(x, w)| w * (ka * PI * x / l).sin() * (kb * PI * x / l).sin())
                                .sum::<f64>();
                        }
                        g[(a, b)] = v;
                        g[(b, a)] = v;
                    }
                }
            }
            DomainSpec::Disk { .. } | DomainSpec::Annulus { .. } => {
                let (r0, r1) = self.radial_range();
                let mmax = modes.iter().map(|m| m.index[0]).max().unwrap_or(0);
                let kmax = modes.iter().map(|m| m.gamma.sqrt()).fold(0.0, f64::max);
                let wavelengths = kmax * (r1 - r0) / (2.0 * PI);
                let rule = GaussRule::new((8.0 * wavelengths) as usize + 8 * mmax + 48);
                let radial_nodes: Vec<(f64, f64)> = rule.mapped(r0, r1).collect();
                let profiles: Vec<Vec<f64>> = modes
                    .iter()
                    .map(|m| radial_nodes.iter().map(|&(r, _)| self.radial(m, r).0).collect())
                    .collect();
                let nt = 4 * mmax + 16;
                let thetas: Vec<f64> = (0..nt).map(|i| 2.0 * PI * i as f64 / nt as f64).collect();
                let ang = |m: &Mode| -> Vec<f64> {
                    thetas.iter().map(|&t| angular(m.index[0], m.index[2], t)).collect()
                };
                let angs: Vec<Vec<f64>> = modes.iter().map(ang).collect();
                for a in 0..count {
                    for b in 0..=a {
                        let radial: f64 = radial_nodes
                            .iter()
                            .enumerate()
                            .map(|(i, &(r, w))| w * r * profiles[a][i] * profiles[b][i])
                            .sum();
                        let angular_part: f64 =
                            angs[a].iter().zip(&angs[b]).map(|(x, y)| x * y).sum::<f64>() * 2.0 * PI / nt as f64;
                        let v = modes[a].norm * modes[b].norm * radial * angular_part;
                        g[(a, b)] = v;
                        g[(b, a)] = v;
                    }
                }
            }
        }
        Ok(g)
    }

    /// Sample points on the boundary, `per_side` per face or circle.
    pub fn boundary_points(&self, per_side: usize) -> Vec<Vec<f64>> {
        match &self.spec {
            DomainSpec::Interval { length } => vec![vec![0.0], vec![*length]],
            DomainSpec::Rectangle { lengths } => {
                let n = lengths.len();
                let mut out = Vec::new();
                let mut state = 0x9e37_79b9_7f4a_7c15u64;
                for face in 0..2 * n {
                    let (axis, at_end) = (face / 2, face % 2 == 1);
                    for _ in 0..per_side {
                        let p: Vec<f64> = (0..n)
                            .map(|i| {
                                if i == axis {
                                    if at_end {
                                        lengths[i]
                                    } else {
                                        0.0
                                    }
                                } else {
                                    state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
                                    lengths[i] * ((state >> 11) as f64 / (1u64 << 53) as f64)
                                }
                            })
                            .collect();
                        out.push(p);
                    }
                }
                out
            }
            DomainSpec::Disk { radius } => circle(*radius, per_side),
            DomainSpec::Annulus { inner, outer } => {
                let mut pts = circle(*inner, per_side);
                pts.extend(circle(*outer, per_side));
                pts
            }
        }
    }

    /// Serializes to JSON with round-trip float precision.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sys: Self = serde_json::from_str(s)?;
        sys.spec.validate()?;
        Ok(sys)
    }
}

fn circle(r: f64, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = 2.0 * PI * (i as f64 + 0.5) / n as f64;
            vec![r * t.cos(), r * t.sin()]
        })
        .collect()
}

fn angular(m: usize, c: usize, theta: f64) -> f64 {
    let mt = m as f64 * theta;
    if c == 0 {
        mt.cos()
    } else {
        mt.sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_ground_mode() {
        let sys = build_eigensystem(DomainSpec::Interval { length: 1.0 }, 1).unwrap();
        assert!((sys.modes[0].gamma - PI * PI).abs() < 1e-12);
        assert!((sys.eval(0, &[0.5]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((sys.eval(0, &[0.3]).unwrap() - 2f64.sqrt() * (0.3 * PI).sin()).abs() < 1e-15);
    }

    #[test]
    fn second_interval_mode_vanishes_at_midpoint() {
        let sys = build_eigensystem(DomainSpec::Interval { length: 1.0 }, 2).unwrap();
        assert!(sys.eval(1, &[0.5]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn square_ground_and_degenerate_pair() {
        let sys = build_eigensystem(DomainSpec::Rectangle { lengths: vec![1.0, 1.0] }, 3).unwrap();
        assert!((sys.modes[0].gamma - 2.0 * PI * PI).abs() < 1e-12);
        assert_eq!(sys.modes[1].index, vec![1, 2]);
        assert_eq!(sys.modes[2].index, vec![2, 1]);
        assert_eq!(sys.modes[1].gamma, sys.modes[2].gamma);
    }

    #[test]
    fn disk_ground_mode() {
        let sys = build_eigensystem(DomainSpec::Disk { radius: 1.0 }, 3).unwrap();
        assert!((sys.modes[0].gamma - 5.783_185_962_946_784).abs() < 1e-10);
        assert!(sys.eval(0, &[1.0, 0.0]).unwrap().abs() < 1e-12);
        assert_eq!(sys.modes[1].index, vec![1, 1, 0]);
        assert_eq!(sys.modes[2].index, vec![1, 1, 1]);
    }

    #[test]
    fn points_outside_are_rejected() {
        let sys = build_eigensystem(DomainSpec::Disk { radius: 1.0 }, 1).unwrap();
        assert!(matches!(sys.eval(0, &[0.9, 0.9]), Err(Error::PointOutside { .. })));
        let sys = build_eigensystem(DomainSpec::Interval { length: 2.0 }, 1).unwrap();
        assert!(sys.eval(0, &[2.1]).is_err());
        assert!(sys.eval(0, &[0.1, 0.1]).is_err());
        assert!(matches!(sys.eval(4, &[0.1]), Err(Error::ModeIndex { .. })));
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(
            build_eigensystem(DomainSpec::Rectangle { lengths: vec![1.0; 4] }, 1),
            Err(Error::UnsupportedDomain(_))
        ));
        assert!(build_eigensystem(DomainSpec::Annulus { inner: 2.0, outer: 1.0 }, 1).is_err());
        assert!(build_eigensystem(DomainSpec::Interval { length: -1.0 }, 1).is_err());
        assert!(build_eigensystem(DomainSpec::Interval { length: 1.0 }, 0).is_err());
    }

    #[test]
    fn interval_lipschitz_constants() {
        let sys = build_eigensystem(DomainSpec::Interval { length: 1.0 }, 3).unwrap();
        for k in [0usize, 2] {
            let c = sys.mode_holder_constant(k).unwrap();
            let exact = 2f64.sqrt() * (k + 1) as f64 * PI;
            assert!((c.lipschitz_constant - 1.05 * exact).abs() < 1e-12);
            assert_eq!(c.upsilon, 1.0);
        }
    }

    #[test]
    fn weyl_constant_of_interval_and_square() {
        assert!((DomainSpec::Interval { length: 1.0 }.weyl_constant() - PI * PI).abs() < 1e-12);
        let sq = DomainSpec::Rectangle { lengths: vec![1.0, 1.0] };
        assert!((sq.weyl_constant() - 4.0 * PI).abs() < 1e-12);
    }
}
