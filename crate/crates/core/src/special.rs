//! Thin wrappers over the gamma function.

pub use statrs::function::gamma::{gamma, ln_gamma};

/// `1/Γ(x)`, exactly zero at the poles `x = 0, -1, -2, …`.
pub fn recip_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_gamma_vanishes_at_poles() {
        assert_eq!(recip_gamma(0.0), 0.0);
        assert_eq!(recip_gamma(-3.0), 0.0);
        assert!((recip_gamma(0.5) - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
        // Γ(-0.5) = -2√π
        assert!((recip_gamma(-0.5) + 0.5 / std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }
}
