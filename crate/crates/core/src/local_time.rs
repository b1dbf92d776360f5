//! Local time at the origin of a Brownian bridge on the unit circle.
//!
//! A pair of particles with diffusivities `a_i`, `a_j` has a difference
//! process with variance rate `a_i + a_j`. Over a step of length `dt` that
//! process runs from `d0` to `d1`; its expected (semimartingale) local time
//! at zero given both endpoints is
//!
//! ```text
//! E[ΔL | d0 → d1] = ∫₀^dt a·p_s(d0 → 0)·p_{dt-s}(0 → d1) ds / p_dt(d0 → d1)
//! ```
//!
//! which depends on `(a, dt)` only through `σ² = a·dt`. Two evaluations are
//! provided: [`local_time_increment`] integrates this by Gauss–Legendre
//! quadrature, and [`bridge_local_time`] uses the closed form obtained from
//! `P(L > l) = exp(-((|d0| + |d1| + l)² - (d1 - d0)²)/(2σ²))`, written with
//! the Mills ratio so it is stable for distant pairs.

use crate::error::domain;
use crate::quadrature::GaussLegendre;
use crate::special::{ln_normal_pdf, mills_ratio};
use crate::Result;

/// Which periodic images of the line heat kernel enter the bridge formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailMode {
    /// Nearest image only.
    #[default]
    Truncate,
    /// Nearest image plus one wrap-around image on each side.
    GaussianTail,
}

impl TailMode {
    fn shifts(self) -> &'static [f64] {
        match self {
            TailMode::Truncate => &[0.0],
            TailMode::GaussianTail => &[-1.0, 0.0, 1.0],
        }
    }
}

/// Number of Gauss–Legendre nodes used by [`local_time_increment`].
pub const QUADRATURE_NODES: usize = 32;

/// Quadrature evaluator for the bridge integral, holding its node table.
#[derive(Debug, Clone)]
pub struct BridgeQuadrature {
    rule: GaussLegendre,
}

impl Default for BridgeQuadrature {
    fn default() -> Self {
        Self::new(QUADRATURE_NODES)
    }
}

impl BridgeQuadrature {
    pub fn new(nodes: usize) -> Self {
        Self { rule: GaussLegendre::new(nodes) }
    }

    /// Expected local time at zero of the bridge `d0 → d1` with total
    /// variance `sigma2`.
    ///
    /// In the normalised time `v = s/dt ∈ (0, 1)` the integrand is
    /// `σ²·φ_{σ²v}(d0)·φ_{σ²(1-v)}(d1) / φ_{σ²}(d1 - d0)`, which has
    /// inverse-square-root endpoint singularities when `d0` or `d1` vanish;
    /// the substitution `v = u²(3 - 2u)` removes them.
    pub fn expected(&self, d0: f64, d1: f64, sigma2: f64, tail: TailMode) -> Result<f64> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(domain!("bridge variance must be positive, got {sigma2}"));
        }
        let shifts = tail.shifts();
        let ln_den = log_sum_exp(shifts.iter().map(|k| ln_normal_pdf(d1 - d0 + k, sigma2)));
        let total = self.rule.integrate(|u| {
            let v = u * u * (3.0 - 2.0 * u);
            let jac = 6.0 * u * (1.0 - u);
            let mut acc = 0.0;
            for k in shifts {
                let left = ln_normal_pdf(d0 + k, sigma2 * v);
                for l in shifts {
                    let right = ln_normal_pdf(d1 + l, sigma2 * (1.0 - v));
                    acc += libm::exp(left + right - ln_den);
                }
            }
            jac * acc
        });
        Ok(sigma2 * total)
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + libm::log(terms.map(|t| libm::exp(t - max)).sum::<f64>())
}

/// Expected bridge local time by 32-point Gauss–Legendre quadrature.
///
/// `d0`, `d1` are signed nearest-image gaps (`d1` may be the unwrapped
/// continuation of `d0`); `sigma2 = (a_i + a_j)·dt`.
pub fn local_time_increment(d0: f64, d1: f64, sigma2: f64, tail: TailMode) -> Result<f64> {
    BridgeQuadrature::default().expected(d0, d1, sigma2, tail)
}

/// Expected bridge local time in closed form.
///
/// For one image pair the integral equals
/// `σ·R(A/σ)·exp(((d1 - d0)² - A²)/(2σ²))` with `A = |d0| + |d1|` and `R`
/// the Mills ratio; image pairs add numerators and the denominator gains the
/// matching wrap-around terms.
pub fn bridge_local_time(d0: f64, d1: f64, sigma2: f64, tail: TailMode) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(domain!("bridge variance must be positive, got {sigma2}"));
    }
    Ok(bridge_local_time_unchecked(d0, d1, sigma2, tail))
}

#[inline]
pub(crate) fn bridge_local_time_unchecked(d0: f64, d1: f64, sigma2: f64, tail: TailMode) -> f64 {
    let sigma = libm::sqrt(sigma2);
    match tail {
        TailMode::Truncate => nearest_image(d0, d1, sigma, sigma2),
        TailMode::GaussianTail => {
            let gap = d1 - d0;
            let base = gap * gap;
            let mut num = 0.0;
            for k in [-1.0, 0.0, 1.0] {
                for l in [-1.0, 0.0, 1.0] {
                    let a = libm::fabs(d0 + k) + libm::fabs(d1 + l);
                    num += mills_ratio(a / sigma) * libm::exp((base - a * a) / (2.0 * sigma2));
                }
            }
            let mut den = 1.0;
            for j in [-1.0, 1.0] {
                let g = gap + j;
                den += libm::exp((base - g * g) / (2.0 * sigma2));
            }
            sigma * num / den
        }
    }
}

#[inline]
fn nearest_image(d0: f64, d1: f64, sigma: f64, sigma2: f64) -> f64 {
    let a = libm::fabs(d0) + libm::fabs(d1);
    // (d1 - d0)² - (|d0| + |d1|)² is -4|d0 d1| on the same side, 0 across
    let product = d0 * d1;
    let damp = if product > 0.0 { libm::exp(-2.0 * product / sigma2) } else { 1.0 };
    sigma * damp * mills_ratio(a / sigma)
}

/// Draws the bridge local time itself (not its mean) from
/// `P(L > l) = exp(-((|d0| + |d1| + l)² - (d1 - d0)²)/(2σ²))`, nearest
/// image only. `uniform` must lie in `(0, 1]`.
pub fn sample_bridge_local_time(d0: f64, d1: f64, sigma2: f64, uniform: f64) -> f64 {
    let a = libm::fabs(d0) + libm::fabs(d1);
    let gap = d1 - d0;
    let r2 = gap * gap - 2.0 * sigma2 * libm::log(uniform);
    let l = libm::sqrt(r2) - a;
    if l > 0.0 {
        l
    } else {
        0.0
    }
}
