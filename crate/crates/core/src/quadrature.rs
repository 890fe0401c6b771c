//! Gauss-type quadrature rules and the graded adaptive integrator used by
//! the kernel engine.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Mapped `(node, weight)` pairs on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + r * x, r * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

// 7-point Gauss / 15-point Kronrod pair (QUADPACK qk15 abscissae and weights).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel: `(kronrod estimate, |kronrod - gauss|)`.
pub fn gauss_kronrod_15<F: FnMut(f64) -> f64>(a: f64, b: f64, f: &mut F) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = r * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * r, ((kron - gauss) * r).abs())
}

/// Adaptive Gauss–Kronrod on `[a, b]` by recursive bisection.
///
/// Returns `(estimate, error estimate)`; the error estimate is the sum of
/// panel-level Kronrod/Gauss discrepancies.
pub fn adaptive<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    f: &mut F,
    abs_tol: f64,
    max_depth: u32,
) -> (f64, f64) {
    let (v, e) = gauss_kronrod_15(a, b, f);
    if e <= abs_tol || max_depth == 0 || (b - a) <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
        return (v, e);
    }
    let m = 0.5 * (a + b);
    let (v1, e1) = adaptive(a, m, f, 0.5 * abs_tol, max_depth - 1);
    let (v2, e2) = adaptive(m, b, f, 0.5 * abs_tol, max_depth - 1);
    (v1 + v2, e1 + e2)
}

/// Result of a graded integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Graded {
    pub value: f64,
    pub error: f64,
}

/// Integrates a nonnegative, nonincreasing `f` over `[0, upper]` with panels
/// graded geometrically toward the origin.
///
/// Panels are `[upper/2^(j+1), upper/2^j]`. Descent stops once `width * f(0)`
/// (a bound on the unresolved remainder) drops below `rel_tol * 1e-2` of the
/// running total; the remainder is integrated with one extra panel. A first
/// Gauss–Kronrod pass estimates the total, then every panel whose error
/// estimate exceeds its share of `rel_tol / 2` of that total is refined
/// adaptively.
pub fn graded_decreasing<F: FnMut(f64) -> f64>(upper: f64, f: F, rel_tol: f64) -> Graded {
    graded_decreasing_abs(upper, f, rel_tol, 0.0)
}

/// As [`graded_decreasing`], accepting a total error of
/// `max(rel_tol · value, abs_tol)`.
pub fn graded_decreasing_abs<F: FnMut(f64) -> f64>(
    upper: f64,
    mut f: F,
    rel_tol: f64,
    abs_tol: f64,
) -> Graded {
    if upper <= 0.0 {
        return Graded {
            value: 0.0,
            error: 0.0,
        };
    }
    let f0 = f(0.0);
    if f0 == 0.0 {
        return Graded {
            value: 0.0,
            error: 0.0,
        };
    }
    let mut panels = Vec::new();
    let mut rough = 0.0;
    let mut hi = upper;
    for _ in 0..2000 {
        let lo = 0.5 * hi;
        let (v, e) = gauss_kronrod_15(lo, hi, &mut f);
        rough += v;
        panels.push((lo, hi, v, e));
        hi = lo;
        if hi * f0 <= 1e-2 * (rel_tol * rough).max(abs_tol) || hi < f64::MIN_POSITIVE * 1e10 {
            break;
        }
    }
    let (rv, re) = gauss_kronrod_15(0.0, hi, &mut f);
    rough += rv;
    let panel_tol = ((0.5 * rel_tol * rough).max(0.5 * abs_tol) / panels.len() as f64).max(f64::MIN_POSITIVE);
    let mut total = rv;
    let mut err = re + (hi * f0 - rv).abs().min(hi * f0);
    for (lo, hi, v, e) in panels {
        let (v, e) = if e <= panel_tol {
            (v, e)
        } else {
            adaptive(lo, hi, &mut f, panel_tol, 12)
        };
        total += v;
        err += e;
    }
    Graded {
        value: total,
        error: err,
    }
}
