//! Gaussian special functions on top of `libm`.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Density of a centred Gaussian with variance `var` at `x`.
#[inline]
pub fn normal_pdf(x: f64, var: f64) -> f64 {
    libm::exp(-0.5 * x * x / var) / libm::sqrt(2.0 * PI * var)
}

/// Natural log of [`normal_pdf`].
#[inline]
pub fn ln_normal_pdf(x: f64, var: f64) -> f64 {
    -0.5 * x * x / var - 0.5 * libm::log(2.0 * PI * var)
}

/// Upper tail `P(Z > z)` of a standard normal.
#[inline]
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Mills ratio `R(z) = P(Z > z) / φ(z)` for `z ≥ 0`.
///
/// Below `z = 5` this is `√(2π)·exp(z²/2)·P(Z > z)` evaluated directly; above
/// it, Laplace's continued fraction, which has converged to machine precision
/// well before 60 terms there.
pub fn mills_ratio(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 5.0 {
        SQRT_2PI * libm::exp(0.5 * z * z) * normal_sf(z)
    } else {
        // R(z) = 1/(z + 1/(z + 2/(z + 3/(z + ...)))), evaluated bottom-up.
        let mut tail = z;
        for k in (1..=60).rev() {
            tail = z + k as f64 / tail;
        }
        1.0 / tail
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mills_ratio_is_continuous_across_the_branch_switch() {
        let below = SQRT_2PI * libm::exp(12.5) * normal_sf(5.0);
        let above = mills_ratio(5.0);
        assert!((below - above).abs() / above < 1e-12, "{below} vs {above}");
    }

    #[test]
    fn mills_ratio_known_values() {
        // R(0) = √(π/2)
        assert!((mills_ratio(0.0) - libm::sqrt(PI / 2.0)).abs() < 1e-15);
        // large-z asymptotics: R(z) ≈ 1/z - 1/z³ + 3/z⁵
        let z = 40.0;
        let asym = 1.0 / z - 1.0 / (z * z * z) + 3.0 / libm::pow(z, 5.0) - 15.0 / libm::pow(z, 7.0)
            + 105.0 / libm::pow(z, 9.0);
        assert!((mills_ratio(z) - asym).abs() / asym < 1e-12);
    }

    #[test]
    fn tail_and_cdf_are_complementary() {
        for &z in &[-3.0, -0.5, 0.0, 0.7, 2.5] {
            assert!((normal_sf(z) + normal_cdf(z) - 1.0).abs() < 1e-15);
        }
    }
}
