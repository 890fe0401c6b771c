//! Integer-order Bessel functions of the first and second kind for real
//! positive arguments, and their positive zeros.
//!
//! `J_n` comes from Miller's backward recurrence normalized by
//! `J_0 + 2 Σ J_{2k} = 1`, or from the Hankel expansion of `J_0, J_1` followed
//! by forward recurrence when `x ≥ 40 > n`. `Y_0, Y_1` use Neumann series in
//! the `J_k` for small `x` and the Hankel expansion otherwise; higher orders
//! follow by (stable) forward recurrence.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HANKEL_MIN: f64 = 40.0;
/// Largest supported order for root finding.
pub const MAX_ORDER: usize = 50;
/// Largest supported root index.
pub const MAX_ROOT_INDEX: usize = 10_000;

/// `J_0(x), …, J_nmax(x)` for `x ≥ 0`.
pub fn bessel_j_all(nmax: usize, x: f64) -> Vec<f64> {
    let x = x.abs();
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if x >= HANKEL_MIN && (nmax as f64) < x {
        let (j0, _) = hankel(0, x);
        let (j1, _) = hankel(1, x);
        out[0] = j0;
        if nmax >= 1 {
            out[1] = j1;
        }
        for k in 1..nmax {
            out[k + 1] = 2.0 * k as f64 / x * out[k] - out[k - 1];
        }
        return out;
    }
    miller(nmax, x, &mut out);
    out
}

fn miller(nmax: usize, x: f64, out: &mut [f64]) {
    let top = (nmax as f64).max(x);
    let mut m = (top + 25.0 + 12.0 * top.sqrt()) as usize;
    if m % 2 == 1 {
        m += 1;
    }
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        let idx = k - 1;
        if idx <= nmax {
            out[idx] = cur;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
}

/// Hankel asymptotic expansion of `(J_ν(x), Y_ν(x))` for large `x`.
fn hankel(nu: usize, x: f64) -> (f64, f64) {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * nu as f64 + 0.25) * PI;
    let amp = (2.0 / (PI * x)).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

pub fn bessel_j(n: usize, x: f64) -> f64 {
    bessel_j_all(n, x)[n]
}

/// `Y_0(x), …, Y_nmax(x)` for `x > 0`.
pub fn bessel_y_all(nmax: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0, "Y_n needs a positive argument");
    let (y0, y1) = if x >= HANKEL_MIN {
        (hankel(0, x).1, hankel(1, x).1)
    } else {
        let top = (2.0 * x + 60.0) as usize;
        let j = bessel_j_all(top, x);
        let half_log = (0.5 * x).ln();
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for k in 1..=(top - 1) / 2 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let kf = k as f64;
            s0 += sign * j[2 * k] / kf;
            s1 += sign * (2.0 * kf + 1.0) * j[2 * k + 1] / (kf * (kf + 1.0));
        }
        let y0 = 2.0 / PI * ((half_log + EULER_GAMMA) * j[0] - 2.0 * s0);
        let y1 = 2.0 / PI * (-j[0] / x + (half_log + EULER_GAMMA - 1.0) * j[1] - s1);
        (y0, y1)
    };
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(y0);
    if nmax >= 1 {
        out.push(y1);
    }
    for k in 1..nmax {
        let v = 2.0 * k as f64 / x * out[k] - out[k - 1];
        out.push(v);
    }
    out
}

pub fn bessel_y(n: usize, x: f64) -> f64 {
    bessel_y_all(n, x)[n]
}

/// `(J_n(x), J_n'(x))`.
pub fn bessel_j_deriv(n: usize, x: f64) -> (f64, f64) {
    let j = bessel_j_all(n + 1, x);
    let d = if n == 0 { -j[1] } else { 0.5 * (j[n - 1] - j[n + 1]) };
    (j[n], d)
}

/// `(Y_n(x), Y_n'(x))`.
pub fn bessel_y_deriv(n: usize, x: f64) -> (f64, f64) {
    let y = bessel_y_all(n + 1, x);
    let d = if n == 0 { -y[1] } else { 0.5 * (y[n - 1] - y[n + 1]) };
    (y[n], d)
}

/// Which zeros [`bessel_root`] looks for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootKind {
    /// Zeros of `J_m(x)`.
    FirstKind,
    /// Zeros in `k` of `J_m(kR₀)Y_m(kR) − J_m(kR)Y_m(kR₀)`.
    AnnulusCrossProduct { inner: f64, outer: f64 },
}

/// The annulus cross-product function.
pub fn annulus_cross(order: usize, k: f64, inner: f64, outer: f64) -> f64 {
    let ja = bessel_j(order, k * inner);
    let jb = bessel_j(order, k * outer);
    let ya = bessel_y(order, k * inner);
    let yb = bessel_y(order, k * outer);
    ja * yb - jb * ya
}

fn check_envelope(order: usize, count: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::Envelope(format!(
            "order {order} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    if count == 0 || count > MAX_ROOT_INDEX {
        return Err(Error::Envelope(format!(
            "root index {count} outside 1..={MAX_ROOT_INDEX}"
        )));
    }
    Ok(())
}

/// The `root_index`-th positive zero (1-based).
pub fn bessel_root(order: usize, root_index: usize, kind: RootKind) -> Result<f64> {
    Ok(bessel_roots(order, root_index, kind)?[root_index - 1])
}

/// The first `count` positive zeros, ascending.
pub fn bessel_roots(order: usize, count: usize, kind: RootKind) -> Result<Vec<f64>> {
    check_envelope(order, count)?;
    scan(order, kind, Stop::Count(count))
}

/// All positive zeros below `limit`, ascending.
pub fn roots_below(order: usize, limit: f64, kind: RootKind) -> Result<Vec<f64>> {
    check_envelope(order, 1)?;
    scan(order, kind, Stop::Below(limit))
}

enum Stop {
    Count(usize),
    Below(f64),
}

fn scan(order: usize, kind: RootKind, stop: Stop) -> Result<Vec<f64>> {
    let (start, step) = match kind {
        RootKind::FirstKind => (if order == 0 { 0.5 } else { order as f64 }, PI / 16.0),
        RootKind::AnnulusCrossProduct { inner, outer } => {
            if !(inner > 0.0 && outer > inner && outer.is_finite()) {
                return Err(Error::InvalidDomain(format!(
                    "annulus radii must satisfy 0 < R0 < R, got ({inner}, {outer})"
                )));
            }
            // Eigenvalues exceed those of the disk of radius R, whose first
            // zero exceeds the order.
            let step = PI / (outer - inner) / 16.0;
            ((order as f64 / outer).max(step), step)
        }
    };
    let f = |x: f64| match kind {
        RootKind::FirstKind => bessel_j(order, x),
        RootKind::AnnulusCrossProduct { inner, outer } => annulus_cross(order, x, inner, outer),
    };
    // Zeros are at least π/(R-R₀) (resp. π) apart, so one sign change per step.
    let max_steps = match stop {
        Stop::Count(c) => 16 * (c + order + 8) * 2,
        Stop::Below(limit) => ((limit - start) / step).max(0.0) as usize + 1,
    };
    let mut roots = Vec::new();
    let mut a = start;
    let mut fa = f(a);
    for _ in 0..max_steps {
        let b = a + step;
        let fb = f(b);
        if fa.is_finite() && fb.is_finite() && (fa == 0.0 || fa * fb < 0.0) {
            let r = if fa == 0.0 {
                a
            } else {
                bisect(&f, a, b, fa, order, roots.len() + 1)?
            };
            match stop {
                Stop::Count(c) => {
                    roots.push(r);
                    if roots.len() == c {
                        return Ok(roots);
                    }
                }
                Stop::Below(limit) => {
                    if r < limit {
                        roots.push(r);
                    }
                    if roots.len() > MAX_ROOT_INDEX {
                        return Err(Error::Envelope(format!(
                            "more than {MAX_ROOT_INDEX} roots below {limit}"
                        )));
                    }
                }
            }
        }
        a = b;
        fa = fb;
    }
    match stop {
        Stop::Below(_) => Ok(roots),
        Stop::Count(_) => Err(Error::RootBracket {
            order,
            index: roots.len() + 1,
            lo: start,
            hi: a,
        }),
    }
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, mut fa: f64, order: usize, index: usize) -> Result<f64> {
    let (lo0, hi0) = (a, b);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= 1e-13f64.max(4.0 * f64::EPSILON * b) || m <= a || m >= b {
            return Ok(m);
        }
        let fm = f(m);
        if !fm.is_finite() {
            return Err(Error::RootBracket {
                order,
                index,
                lo: lo0,
                hi: hi0,
            });
        }
        if fm == 0.0 {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}
