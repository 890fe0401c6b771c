//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

const BITS: u64 = 512;

fn scale() -> BigInt {
    BigInt::one() << BITS
}

/// `atan(1/n)` in fixed point with `BITS` fractional bits.
fn atan_inv(n: u64) -> BigInt {
    let s = scale();
    let n2 = BigInt::from(n * n);
    let mut power = &s / BigInt::from(n);
    let mut sum = BigInt::zero();
    let mut k = 0u64;
    while !power.is_zero() {
        let term = &power / BigInt::from(2 * k + 1);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        power /= &n2;
        k += 1;
    }
    sum
}

/// `√π` in fixed point.
fn sqrt_pi() -> BigInt {
    let pi: BigInt = atan_inv(5) * 16 - atan_inv(239) * 4;
    let shifted: BigInt = pi << BITS;
    let wide: BigUint = shifted.to_biguint().expect("positive");
    BigInt::from(wide.sqrt())
}

/// `E_{1/2}(−a/b) = Σ_j (−a/b)^j / Γ(j/2 + 1)` summed exactly in 512-bit
/// fixed point, with `Γ(m+1) = m!` and `Γ(m+3/2) = (2m+2)! √π / (4^{m+1} (m+1)!)`.
pub fn mlf_half(a: u64, b: u64) -> f64 {
    let s = scale();
    let sp = sqrt_pi();
    let (a, b) = (BigInt::from(a), BigInt::from(b));
    let mut sum = BigInt::zero();
    let mut j = 0u64;
    let mut small_run = 0;
    loop {
        let m = j / 2;
        let num_x = a.pow(j as u32);
        let den_x = b.pow(j as u32);
        let term = if j % 2 == 0 {
            let fact: BigInt = (1..=m).map(BigInt::from).product();
            (&s * num_x) / (den_x * fact)
        } else {
            let fact_m1: BigInt = (1..=m + 1).map(BigInt::from).product();
            let fact_2m2: BigInt = (1..=2 * m + 2).map(BigInt::from).product();
            let four = BigInt::from(4u32).pow((m + 1) as u32);
            let num = &s * &s * num_x * four * fact_m1;
            num / (den_x * fact_2m2 * &sp)
        };
        if j % 2 == 0 {
            sum += &term;
        } else {
            sum -= &term;
        }
        if term.abs() < (BigInt::one() << (BITS - 200)) && j > 4 {
            small_run += 1;
            if small_run > 4 {
                break;
            }
        } else {
            small_run = 0;
        }
        j += 1;
    }
    // 512 bits do not fit f64; shift down first
    let shifted: BigInt = sum >> (BITS - 100);
    shifted.to_f64().expect("finite") / 2f64.powi(100)
}

/// Plain double-precision power series of `E_β(−x)`, adequate where the
/// largest term stays modest.
pub fn mlf_series(beta: f64, x: f64) -> f64 {
    let mut sum = 0.0;
    let mut j = 0;
    loop {
        let term = (-x).powi(j) / statrs::function::gamma::gamma(j as f64 * beta + 1.0);
        sum += term;
        if j > 10 && term.abs() < 1e-20 {
            return sum;
        }
        j += 1;
    }
}

/// `(β, x, E_β(−x))` reference rows.
pub fn reference_table() -> Vec<(f64, f64, f64)> {
    include_str!("../data/mlf_reference.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|s| s.parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .collect()
}
