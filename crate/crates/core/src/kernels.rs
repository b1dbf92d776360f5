//! Coagulation rate `Φ`, diffusivity `a` and the rates derived from them.
//!
//! The hydrodynamic equation only sees the effective rate
//! `κ(m, m') = Φ(m, m')·[a(m) + a(m')]`. Uniqueness of its solution is
//! organised around two dominating functions,
//!
//! ```text
//! ω(m) = [1 + c + a(1)]·[m^p + a(m) + 1],     ϖ(m) = a(m) + 1,
//! ```
//!
//! where `c` and `p` are the constants of the growth bound
//! `Φ(m, m') ≤ c·(m^p + m'^p)`. [`validate_assumptions`] spot-checks the
//! standing conditions on a finite mass grid; it is a numerical check, not a
//! proof.

use alloc::vec::Vec;

use crate::error::{domain, usage};
use crate::Result;

/// Relative slack allowed when comparing two sides of an inequality that are
/// evaluated through different arithmetic.
const INEQ_RTOL: f64 = 1e-12;

/// A positive function of mass tabulated on a grid, interpolated linearly in
/// `log m` and held constant beyond the grid ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    log_masses: Vec<f64>,
    values: Vec<f64>,
}

impl Tabulated {
    pub fn new(masses: &[f64], values: &[f64]) -> Result<Self> {
        if masses.len() < 2 || masses.len() != values.len() {
            return Err(usage!(
                "tabulated function needs >= 2 points and matching lengths (got {} masses, {} values)",
                masses.len(),
                values.len()
            ));
        }
        check_strictly_increasing_positive(masses)?;
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(domain!("tabulated values must be finite and nonnegative"));
        }
        Ok(Self {
            log_masses: masses.iter().map(|m| libm::log(*m)).collect(),
            values: values.to_vec(),
        })
    }

    pub fn eval(&self, m: f64) -> f64 {
        let (i, t) = locate(&self.log_masses, libm::log(m));
        match t {
            None => self.values[i],
            Some(t) => self.values[i] * (1.0 - t) + self.values[i + 1] * t,
        }
    }

    fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }
}

/// A symmetric function of two masses tabulated on a square grid, bilinear in
/// `(log m, log m')`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTable {
    log_masses: Vec<f64>,
    /// Row-major `n × n`.
    values: Vec<f64>,
}

impl SymmetricTable {
    pub fn new(masses: &[f64], values: &[f64]) -> Result<Self> {
        let n = masses.len();
        if n < 2 || values.len() != n * n {
            return Err(usage!(
                "symmetric table needs >= 2 grid points and n*n values (got n = {n}, {} values)",
                values.len()
            ));
        }
        check_strictly_increasing_positive(masses)?;
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(domain!("table entry ({i}, {j}) = {v} is not a nonnegative rate"));
                }
                if v != values[j * n + i] {
                    return Err(domain!("table is not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(Self {
            log_masses: masses.iter().map(|m| libm::log(*m)).collect(),
            values: values.to_vec(),
        })
    }

    fn eval(&self, m: f64, m2: f64) -> f64 {
        let n = self.log_masses.len();
        let (i, ti) = locate(&self.log_masses, libm::log(m));
        let (j, tj) = locate(&self.log_masses, libm::log(m2));
        let at = |a: usize, b: usize| self.values[a * n + b];
        let (ti, i1) = match ti {
            Some(t) => (t, i + 1),
            None => (0.0, i),
        };
        let (tj, j1) = match tj {
            Some(t) => (t, j + 1),
            None => (0.0, j),
        };
        (1.0 - ti) * ((1.0 - tj) * at(i, j) + tj * at(i, j1))
            + ti * ((1.0 - tj) * at(i1, j) + tj * at(i1, j1))
    }
}

/// Finds the cell of `x` in the increasing `grid`. `(i, Some(t))` means
/// `grid[i] + t·(grid[i+1] - grid[i])`; `(i, None)` means clamped to `grid[i]`.
fn locate(grid: &[f64], x: f64) -> (usize, Option<f64>) {
    let last = grid.len() - 1;
    if x <= grid[0] {
        return (0, None);
    }
    if x >= grid[last] {
        return (last, None);
    }
    let i = grid.partition_point(|g| *g <= x) - 1;
    let t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    (i, Some(t))
}

fn check_strictly_increasing_positive(masses: &[f64]) -> Result<()> {
    if masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(domain!("mass grid entries must be finite and positive"));
    }
    if masses.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage!("mass grid must be strictly increasing"));
    }
    Ok(())
}

fn check_mass(m: f64) -> Result<()> {
    if m.is_nan() || m < 0.0 {
        Err(domain!("mass must be nonnegative, got {m}"))
    } else {
        Ok(())
    }
}

/// Family of coagulation rates `Φ`. Every family vanishes when either mass
/// is zero.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiFamily {
    /// `Φ(m, m') = C·(m^α + m'^α)` on positive masses.
    PowerSum { scale: f64, alpha: f64 },
    /// `Φ(m, m') = c` on positive masses.
    Constant { rate: f64 },
    /// Tabulated symmetric rate.
    Custom(SymmetricTable),
}

/// Coagulation rate together with the constants `(p, c)` of its growth bound.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: PhiFamily,
    p_exponent: f64,
    c_bound: f64,
}

impl KernelSpec {
    pub fn new(family: PhiFamily, p_exponent: f64, c_bound: f64) -> Result<Self> {
        match &family {
            PhiFamily::PowerSum { scale, alpha } => {
                if !(scale.is_finite() && *scale >= 0.0 && alpha.is_finite()) {
                    return Err(domain!("power-sum kernel needs finite C >= 0 and finite alpha"));
                }
            }
            PhiFamily::Constant { rate } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return Err(domain!("constant kernel rate must be finite and >= 0"));
                }
            }
            PhiFamily::Custom(_) => {}
        }
        if !(0.0..=0.5).contains(&p_exponent) {
            return Err(domain!("growth exponent p must lie in [0, 1/2], got {p_exponent}"));
        }
        if !(c_bound.is_finite() && c_bound > 0.0) {
            return Err(domain!("growth constant c must be positive, got {c_bound}"));
        }
        Ok(Self { family, p_exponent, c_bound })
    }

    /// `C·(m^α + m'^α)` with the growth bound `(p, c) = (α, C)`, `p` clamped to `[0, 1/2]`.
    pub fn power_sum(scale: f64, alpha: f64) -> Result<Self> {
        let p = if alpha.is_nan() { 0.5 } else { alpha.clamp(0.0, 0.5) };
        Self::new(PhiFamily::PowerSum { scale, alpha }, p, scale.max(f64::MIN_POSITIVE))
    }

    /// Constant rate with growth bound `(p, c) = (0, rate/2)`.
    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(PhiFamily::Constant { rate }, 0.0, (0.5 * rate).max(f64::MIN_POSITIVE))
    }

    pub fn family(&self) -> &PhiFamily {
        &self.family
    }

    pub fn p_exponent(&self) -> f64 {
        self.p_exponent
    }

    pub fn c_bound(&self) -> f64 {
        self.c_bound
    }

    /// `Φ(m, m2)`, rejecting negative masses.
    pub fn phi(&self, m: f64, m2: f64) -> Result<f64> {
        check_mass(m)?;
        check_mass(m2)?;
        Ok(self.eval(m, m2))
    }

    /// `Φ(m, m2)` for masses already known to be nonnegative.
    #[inline]
    pub fn eval(&self, m: f64, m2: f64) -> f64 {
        if m <= 0.0 || m2 <= 0.0 {
            return 0.0;
        }
        match &self.family {
            PhiFamily::PowerSum { scale, alpha } => {
                scale * (libm::pow(m, *alpha) + libm::pow(m2, *alpha))
            }
            PhiFamily::Constant { rate } => *rate,
            PhiFamily::Custom(table) => table.eval(m, m2),
        }
    }

    /// `c·(m^p + m2^p)` on positive masses.
    pub fn growth_bound(&self, m: f64, m2: f64) -> f64 {
        if m <= 0.0 || m2 <= 0.0 {
            return 0.0;
        }
        self.c_bound * (libm::pow(m, self.p_exponent) + libm::pow(m2, self.p_exponent))
    }

    /// Largest value of `Φ` over `[0, m_max]²`, sampled on a geometric grid for
    /// tabulated kernels. Used to size thinning bounds.
    pub fn sup_on(&self, m_max: f64) -> f64 {
        match &self.family {
            PhiFamily::Constant { rate } => *rate,
            PhiFamily::PowerSum { scale, alpha } => {
                if *alpha >= 0.0 {
                    2.0 * scale * libm::pow(m_max, *alpha)
                } else {
                    f64::INFINITY
                }
            }
            PhiFamily::Custom(table) => table.values.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Diffusion coefficient as a function of (rescaled) mass. `a(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum DiffusivitySpec {
    /// `a(m) = m^{-β}` for `m > 0`.
    PowerLaw { beta: f64 },
    /// `a(m) = a₀` for `m > 0`.
    Constant { a0: f64 },
    /// Tabulated, nonincreasing.
    CustomMonotone(Tabulated),
}

impl DiffusivitySpec {
    pub fn power_law(beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(domain!("diffusivity exponent must be finite"));
        }
        Ok(Self::PowerLaw { beta })
    }

    pub fn constant(a0: f64) -> Result<Self> {
        if !(a0.is_finite() && a0 > 0.0) {
            return Err(domain!("constant diffusivity must be positive, got {a0}"));
        }
        Ok(Self::Constant { a0 })
    }

    pub fn custom(table: Tabulated) -> Result<Self> {
        if !table.is_nonincreasing() {
            return Err(domain!("tabulated diffusivity must be nonincreasing"));
        }
        if table.values.iter().any(|v| *v <= 0.0) {
            return Err(domain!("tabulated diffusivity must be positive"));
        }
        Ok(Self::CustomMonotone(table))
    }

    /// `a(m)`, rejecting negative masses.
    pub fn diffusivity(&self, m: f64) -> Result<f64> {
        check_mass(m)?;
        Ok(self.eval(m))
    }

    #[inline]
    pub fn eval(&self, m: f64) -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        match self {
            Self::PowerLaw { beta } => libm::pow(m, -*beta),
            Self::Constant { a0 } => *a0,
            Self::CustomMonotone(table) => table.eval(m),
        }
    }
}

/// `κ`, `ω` and `ϖ` for a kernel/diffusivity pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedCoefficients {
    kernel: KernelSpec,
    diffusivity: DiffusivitySpec,
    omega_prefactor: f64,
}

impl DerivedCoefficients {
    pub fn new(kernel: KernelSpec, diffusivity: DiffusivitySpec) -> Self {
        let omega_prefactor = 1.0 + kernel.c_bound + diffusivity.eval(1.0);
        Self { kernel, diffusivity, omega_prefactor }
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn diffusivity(&self) -> &DiffusivitySpec {
        &self.diffusivity
    }

    /// `κ(m, m2) = Φ(m, m2)·[a(m) + a(m2)]`.
    pub fn kappa(&self, m: f64, m2: f64) -> Result<f64> {
        check_mass(m)?;
        check_mass(m2)?;
        Ok(self.kappa_eval(m, m2))
    }

    #[inline]
    pub fn kappa_eval(&self, m: f64, m2: f64) -> f64 {
        self.kernel.eval(m, m2) * (self.diffusivity.eval(m) + self.diffusivity.eval(m2))
    }

    /// `ω(m) = [1 + c + a(1)]·[m^p + a(m) + 1]`.
    pub fn omega(&self, m: f64) -> f64 {
        self.omega_prefactor
            * (libm::pow(m, self.kernel.p_exponent) + self.diffusivity.eval(m) + 1.0)
    }

    /// `ϖ(m) = a(m) + 1`.
    pub fn varpi(&self, m: f64) -> f64 {
        self.diffusivity.eval(m) + 1.0
    }
}

/// The standing assumptions checked by [`validate_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    /// `Φ(m, m') = Φ(m', m)` exactly.
    Symmetry,
    /// `Φ(0, m) = Φ(m, 0) = 0`.
    VanishingAtZero,
    /// `Φ(m, m') ≤ c·(m^p + m'^p)` with `0 ≤ p ≤ 1/2`.
    GrowthBound,
    /// Finite-difference Lipschitz constants `Γ(L)` away from the origin.
    Lipschitz,
    /// `a(m)^{-1/2}·ω(m)` subadditive.
    SubadditiveOmega,
    /// `a(m)^{-1/2}·ω(m)·ϖ(m)` subadditive.
    SubadditiveOmegaVarpi,
    /// `a` positive and nonincreasing on `(0, ∞)`.
    MonotoneDiffusivity,
    /// `κ(m, m') ≤ ω(m)·ω(m')`.
    OmegaDomination,
    /// `κ(m, m') ≤ ω(m)·ϖ(m') + ϖ(m)·ω(m')`.
    OmegaVarpiDomination,
}

/// Grid point where a check came closest to (or furthest past) failing.
/// `excess` is `(lhs - rhs) / |rhs|`; positive means violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstPoint {
    pub m: f64,
    pub m2: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub passed: bool,
    pub worst: Option<WorstPoint>,
}

/// `Γ(L)`: the largest finite-difference slope `|ΔΦ|/Δm` seen for `m > L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub threshold: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
    pub lipschitz: Vec<LipschitzEstimate>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = Condition> + '_ {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.condition)
    }

    pub fn check(&self, condition: Condition) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

/// `n` log-spaced masses from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (libm::log(lo), libm::log(hi));
    (0..n)
        .map(|i| libm::exp(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// The default validation grid: 256 log-spaced points in `[10⁻³, 10³]`.
pub fn default_validation_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 256)
}

/// Tracks the worst relative excess of `lhs ≤ rhs` over a sweep.
struct Tally {
    condition: Condition,
    worst: Option<WorstPoint>,
    passed: bool,
}

impl Tally {
    fn new(condition: Condition) -> Self {
        Self { condition, worst: None, passed: true }
    }

    fn record(&mut self, m: f64, m2: f64, lhs: f64, rhs: f64) {
        let ok = lhs <= rhs * (1.0 + INEQ_RTOL) + f64::MIN_POSITIVE;
        let excess = if rhs.abs() > 0.0 {
            (lhs - rhs) / rhs.abs()
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            -1.0
        };
        let excess = if excess.is_nan() { f64::INFINITY } else { excess };
        if !ok {
            self.passed = false;
        }
        if self.worst.map_or(true, |w| excess > w.excess) {
            self.worst = Some(WorstPoint { m, m2, excess });
        }
    }

    fn finish(self) -> ConditionCheck {
        ConditionCheck { condition: self.condition, passed: self.passed, worst: self.worst }
    }
}

/// Spot-checks symmetry, vanishing at zero, the growth bound, Lipschitz
/// regularity away from the origin, the two subadditivity conditions and the
/// monotonicity of `a` on `mass_grid`.
///
/// Subadditivity is tested at every grid pair `(m, m')` with `m + m'`
/// evaluated off-grid. `Γ(L)` is reported for every threshold `L` in the
/// grid except the last two, using adjacent grid spacing as the increment.
pub fn validate_assumptions(
    kernel: &KernelSpec,
    diffusivity: &DiffusivitySpec,
    mass_grid: &[f64],
) -> Result<ValidationReport> {
    if mass_grid.is_empty() {
        return Err(usage!("validation grid is empty"));
    }
    check_strictly_increasing_positive(mass_grid)?;
    let coeffs = DerivedCoefficients::new(kernel.clone(), diffusivity.clone());

    let mut symmetry = Tally::new(Condition::Symmetry);
    let mut vanishing = Tally::new(Condition::VanishingAtZero);
    let mut growth = Tally::new(Condition::GrowthBound);
    let mut sub_omega = Tally::new(Condition::SubadditiveOmega);
    let mut sub_omega_varpi = Tally::new(Condition::SubadditiveOmegaVarpi);
    let mut monotone = Tally::new(Condition::MonotoneDiffusivity);

    let g = |m: f64| coeffs.omega(m) / libm::sqrt(diffusivity.eval(m));
    let h = |m: f64| g(m) * coeffs.varpi(m);

    for (i, &m) in mass_grid.iter().enumerate() {
        vanishing.record(0.0, m, kernel.eval(0.0, m).abs() + kernel.eval(m, 0.0).abs(), 0.0);
        let a = diffusivity.eval(m);
        // a > 0 on (0, ∞): encode as -a ≤ 0 with a strict failure at a = 0
        monotone.record(m, m, if a > 0.0 { -a } else { 1.0 }, 0.0);
        if let Some(&next) = mass_grid.get(i + 1) {
            monotone.record(m, next, diffusivity.eval(next), a);
        }
        for &m2 in &mass_grid[i..] {
            let (ab, ba) = (kernel.eval(m, m2), kernel.eval(m2, m));
            symmetry.record(m, m2, if ab == ba { 0.0 } else { 1.0 }, 0.0);
            growth.record(m, m2, ab, kernel.growth_bound(m, m2));
            sub_omega.record(m, m2, g(m + m2), g(m) + g(m2));
            sub_omega_varpi.record(m, m2, h(m + m2), h(m) + h(m2));
        }
    }

    let (lipschitz_check, lipschitz) = lipschitz_constants(kernel, mass_grid);

    Ok(ValidationReport {
        checks: alloc::vec![
            symmetry.finish(),
            vanishing.finish(),
            growth.finish(),
            lipschitz_check,
            sub_omega.finish(),
            sub_omega_varpi.finish(),
            monotone.finish(),
        ],
        lipschitz,
    })
}

fn lipschitz_constants(
    kernel: &KernelSpec,
    grid: &[f64],
) -> (ConditionCheck, Vec<LipschitzEstimate>) {
    // slope[i] = max over m' of |Φ(grid[i+1], m') - Φ(grid[i], m')| / Δm
    let slopes: Vec<(f64, f64, f64)> = grid
        .windows(2)
        .map(|w| {
            let dm = w[1] - w[0];
            let mut best = (0.0, grid[0]);
            for &m2 in grid {
                let s = (kernel.eval(w[1], m2) - kernel.eval(w[0], m2)).abs() / dm;
                if s > best.0 || s.is_nan() {
                    best = (s, m2);
                }
            }
            (w[0], best.1, best.0)
        })
        .collect();

    // Γ(grid[k]) = max over i > k of slope[i], a suffix maximum.
    let mut estimates = Vec::with_capacity(slopes.len().saturating_sub(1));
    let mut running = 0.0f64;
    let mut worst: Option<WorstPoint> = None;
    for k in (1..slopes.len()).rev() {
        let (m, m2, s) = slopes[k];
        if s > running || s.is_nan() {
            running = s;
            worst = Some(WorstPoint { m, m2, excess: s });
        }
        estimates.push(LipschitzEstimate { threshold: grid[k - 1], gamma: running });
    }
    estimates.reverse();
    let passed = estimates.iter().all(|e| e.gamma.is_finite());
    (
        ConditionCheck { condition: Condition::Lipschitz, passed, worst },
        estimates,
    )
}

/// Checks the domination inequalities `κ ≤ ω ⊗ ω` and
/// `κ ≤ ω ⊗ ϖ + ϖ ⊗ ω` at all grid pairs.
pub fn check_domination(coeffs: &DerivedCoefficients, mass_grid: &[f64]) -> Result<[ConditionCheck; 2]> {
    if mass_grid.is_empty() {
        return Err(usage!("validation grid is empty"));
    }
    check_strictly_increasing_positive(mass_grid)?;
    let mut omega = Tally::new(Condition::OmegaDomination);
    let mut mixed = Tally::new(Condition::OmegaVarpiDomination);
    for &m in mass_grid {
        for &m2 in mass_grid {
            let k = coeffs.kappa_eval(m, m2);
            omega.record(m, m2, k, coeffs.omega(m) * coeffs.omega(m2));
            mixed.record(
                m,
                m2,
                k,
                coeffs.omega(m) * coeffs.varpi(m2) + coeffs.varpi(m) * coeffs.omega(m2),
            );
        }
    }
    Ok([omega.finish(), mixed.finish()])
}

impl core::fmt::Display for Condition {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            Condition::Symmetry => "symmetry",
            Condition::VanishingAtZero => "vanishing-at-zero",
            Condition::GrowthBound => "growth-bound",
            Condition::Lipschitz => "lipschitz",
            Condition::SubadditiveOmega => "subadditive-omega",
            Condition::SubadditiveOmegaVarpi => "subadditive-omega-varpi",
            Condition::MonotoneDiffusivity => "monotone-diffusivity",
            Condition::OmegaDomination => "omega-domination",
            Condition::OmegaVarpiDomination => "omega-varpi-domination",
        };
        f.write_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_pair() -> (KernelSpec, DiffusivitySpec) {
        (KernelSpec::power_sum(1.0, 0.5).unwrap(), DiffusivitySpec::power_law(1.0).unwrap())
    }

    #[test]
    fn phi_examples() {
        let k = KernelSpec::power_sum(1.0, 0.5).unwrap();
        assert_eq!(k.phi(1.0, 1.0).unwrap(), 2.0);
        assert_eq!(k.phi(0.0, 5.0).unwrap(), 0.0);
        let k2 = KernelSpec::power_sum(2.0, 0.5).unwrap();
        assert_eq!(k2.phi(4.0, 9.0).unwrap(), 10.0);
        let c = KernelSpec::constant(3.0).unwrap();
        assert_eq!(c.phi(0.0, 5.0).unwrap(), 0.0);
        assert_eq!(c.phi(5.0, 0.0).unwrap(), 0.0);
        assert!(matches!(k.phi(-1.0, 1.0), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn diffusivity_examples() {
        let a = DiffusivitySpec::power_law(1.0).unwrap();
        assert_eq!(a.diffusivity(2.0).unwrap(), 0.5);
        assert_eq!(a.diffusivity(0.0).unwrap(), 0.0);
        let half = DiffusivitySpec::power_law(0.5).unwrap();
        assert_eq!(half.diffusivity(4.0).unwrap(), 0.5);
        assert_eq!(DiffusivitySpec::constant(2.0).unwrap().diffusivity(0.0).unwrap(), 0.0);
        assert!(a.diffusivity(-0.1).is_err());
    }

    #[test]
    fn kappa_examples() {
        let c = DerivedCoefficients::new(
            KernelSpec::constant(1.0).unwrap(),
            DiffusivitySpec::constant(1.0).unwrap(),
        );
        assert_eq!(c.kappa(1.0, 2.0).unwrap(), 2.0);
        assert_eq!(c.kappa(0.0, 3.0).unwrap(), 0.0);
        let (k, a) = example_pair();
        let e = DerivedCoefficients::new(k, a);
        assert_eq!(e.kappa(1.0, 1.0).unwrap(), 4.0);
        assert_eq!(e.kappa(0.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn omega_follows_closed_form() {
        let (k, a) = example_pair();
        let e = DerivedCoefficients::new(k, a);
        // [1 + 1 + a(1)]·[√4 + 1/4 + 1] = 3·3.25
        assert!((e.omega(4.0) - 9.75).abs() < 1e-14);
        assert_eq!(e.varpi(4.0), 1.25);
    }

    #[test]
    fn example_family_passes_everything() {
        let (k, a) = example_pair();
        let grid = log_grid(0.1, 10.0, 64);
        let report = validate_assumptions(&k, &a, &grid).unwrap();
        assert!(report.all_passed(), "{:?}", report.failed().collect::<Vec<_>>());
    }

    #[test]
    fn alpha_one_fails_growth_bound_only() {
        let k = KernelSpec::power_sum(1.0, 1.0).unwrap();
        let a = DiffusivitySpec::power_law(1.0).unwrap();
        let report = validate_assumptions(&k, &a, &default_validation_grid()).unwrap();
        let failed: Vec<_> = report.failed().collect();
        assert_eq!(failed, [Condition::GrowthBound]);
        let worst = report.check(Condition::GrowthBound).unwrap().worst.unwrap();
        assert!(worst.excess > 0.0 && worst.m > 1.0);
    }

    #[test]
    fn small_alpha_uses_its_own_growth_exponent() {
        let k = KernelSpec::power_sum(1.0, 0.25).unwrap();
        assert_eq!(k.p_exponent(), 0.25);
        let a = DiffusivitySpec::power_law(0.5).unwrap();
        assert!(validate_assumptions(&k, &a, &default_validation_grid()).unwrap().all_passed());
    }

    #[test]
    fn constants_pass_everything() {
        let k = KernelSpec::constant(1.0).unwrap();
        let a = DiffusivitySpec::constant(1.0).unwrap();
        let report = validate_assumptions(&k, &a, &default_validation_grid()).unwrap();
        assert!(report.all_passed());
        assert!(report.lipschitz.iter().all(|e| e.gamma == 0.0));
    }

    #[test]
    fn empty_grid_is_a_usage_error() {
        let (k, a) = example_pair();
        assert!(matches!(validate_assumptions(&k, &a, &[]), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn increasing_diffusivity_is_flagged() {
        let k = KernelSpec::constant(1.0).unwrap();
        let a = DiffusivitySpec::power_law(-0.5).unwrap();
        let report = validate_assumptions(&k, &a, &log_grid(0.1, 10.0, 16)).unwrap();
        assert!(!report.check(Condition::MonotoneDiffusivity).unwrap().passed);
    }

    #[test]
    fn lipschitz_constants_are_nonincreasing_in_threshold() {
        let (k, a) = example_pair();
        let report = validate_assumptions(&k, &a, &default_validation_grid()).unwrap();
        for w in report.lipschitz.windows(2) {
            assert!(w[1].gamma <= w[0].gamma);
        }
    }

    #[test]
    fn tabulated_kernels_interpolate_in_log_mass() {
        let grid = [1.0, 4.0];
        let table = SymmetricTable::new(&grid, &[1.0, 2.0, 2.0, 3.0]).unwrap();
        let k = KernelSpec::new(PhiFamily::Custom(table), 0.5, 3.0).unwrap();
        // log 2 is halfway between log 1 and log 4
        assert!((k.eval(2.0, 1.0) - 1.5).abs() < 1e-14);
        assert!((k.eval(2.0, 2.0) - 2.0).abs() < 1e-14);
        assert_eq!(k.eval(100.0, 100.0), 3.0);
        assert_eq!(k.eval(0.0, 2.0), 0.0);
        assert!(SymmetricTable::new(&grid, &[1.0, 2.0, 2.5, 3.0]).is_err());

        let a = Tabulated::new(&grid, &[2.0, 1.0]).unwrap();
        let d = DiffusivitySpec::custom(a).unwrap();
        assert!((d.eval(2.0) - 1.5).abs() < 1e-14);
        assert!(DiffusivitySpec::custom(Tabulated::new(&grid, &[1.0, 2.0]).unwrap()).is_err());
    }
}
