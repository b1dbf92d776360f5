//! Deterministic solver for the mass-flow equation on the circle × mass bins,
//! and the truncated Picard scheme in the spatially homogeneous setting.
//!
//! The unknown `υ_t(x, m)` is the mass-flow density: `υ = m·υ̂` with `υ̂` the
//! number concentration. It evolves by
//!
//! ```text
//! ∂ₜυ(x, m) = ½·a(m)·∂²ₓυ(x, m) + K⁺(υ)(x, m) - K⁻(υ)(x, m)
//! K⁺(υ)(m) = Σ_{m'+m''=m} κ(m', m'')/m''·υ(m')·υ(m'')
//! K⁻(υ)(m) = υ(m)·Σ_{m'} κ(m, m')/m'·υ(m')
//! ```
//!
//! so each ordered pair of bins `(a, b)` moves `κ(m_a, m_b)/m_b·υ_a·υ_b` of
//! mass-flow from bin `a` to the bin of `m_a + m_b`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain, usage, Error};
use crate::fft::Fft;
use crate::kernels::{DerivedCoefficients, DiffusivitySpec};
use crate::measures::{GridMeasure, MassGrid, MassGridKind, PairTarget};
use crate::particle::compensated_sum;
use crate::Result;

/// Stability factor: explicit substeps keep `h·(loss coefficient) ≤ 1/2`.
const STABILITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Splitting {
    /// heat(dt) then coagulation(dt).
    Lie,
    /// heat(dt/2), coagulation(dt), heat(dt/2).
    #[default]
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoagIntegrator {
    Euler,
    /// Heun's method.
    #[default]
    Rk2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub dt: f64,
    pub splitting: Splitting,
    pub coag_integrator: CoagIntegrator,
    pub positivity_clip: bool,
    /// Clipped mass allowed before aborting, relative to the initial total.
    pub clip_budget: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
}

impl SolverOptions {
    /// Strang splitting, RK2, clipping on with budget `1e-6`, Picard
    /// tolerance `1e-8` within 50 iterations.
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            splitting: Splitting::Strang,
            coag_integrator: CoagIntegrator::Rk2,
            positivity_clip: true,
            clip_budget: 1e-6,
            picard_tol: 1e-8,
            picard_max_iter: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(usage!("solver time step must be positive, got {}", self.dt));
        }
        if !(self.picard_tol > 0.0) {
            return Err(usage!("Picard tolerance must be positive"));
        }
        if self.picard_max_iter == 0 {
            return Err(usage!("Picard iteration budget must be positive"));
        }
        if !(self.clip_budget >= 0.0) {
            return Err(usage!("clip budget must be nonnegative"));
        }
        Ok(())
    }
}

/// A mass-flow field at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub measure: GridMeasure,
    pub time: f64,
}

impl FieldState {
    pub fn new(measure: GridMeasure) -> Self {
        Self { measure, time: 0.0 }
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.measure.values().iter().copied())
    }
}

/// Spatially constant mass-flow `υ(m_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousState {
    pub grid: MassGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl HomogeneousState {
    pub fn new(grid: MassGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(usage!("homogeneous state needs one value per bin"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(domain!("homogeneous values must be finite and nonnegative"));
        }
        Ok(Self { grid, values, time: 0.0 })
    }

    /// The same data as a one-cell field.
    pub fn to_field(&self) -> FieldState {
        let measure = GridMeasure::from_values(1, self.grid.clone(), self.values.clone())
            .expect("validated on construction");
        FieldState { measure, time: self.time }
    }
}

/// Pair tables for the coagulation operator on one mass grid.
#[derive(Debug, Clone)]
pub struct CoagOperator {
    bins: usize,
    /// `κ(m_a, m_b)/m_b`, row-major; zero for pairs excluded by truncation.
    coef: Vec<f64>,
    targets: Vec<PairTarget>,
}

impl CoagOperator {
    pub fn new(grid: &MassGrid, coeffs: &DerivedCoefficients) -> Self {
        Self::build(grid, coeffs, None)
    }

    /// Keeps only pairs whose merged mass stays within the first `n` integer
    /// bins, i.e. `m + m' ≤ n`. Mass-flow is still conserved.
    pub fn truncated(grid: &MassGrid, coeffs: &DerivedCoefficients, n: usize) -> Self {
        Self::build(grid, coeffs, Some(n))
    }

    fn build(grid: &MassGrid, coeffs: &DerivedCoefficients, limit: Option<usize>) -> Self {
        let bins = grid.len();
        let reps = grid.reps();
        let mut coef = vec![0.0; bins * bins];
        let mut targets = Vec::with_capacity(bins * bins);
        for a in 0..bins {
            for b in 0..bins {
                let target = grid.pair_target(a, b);
                let keep = match limit {
                    Some(n) => a < n && b < n && reps[a] + reps[b] <= n as f64,
                    None => true,
                };
                if keep {
                    coef[a * bins + b] = coeffs.kappa_eval(reps[a], reps[b]) / reps[b];
                }
                targets.push(target);
            }
        }
        Self { bins, coef, targets }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// `K⁺(u) - K⁻(u)` into `out`.
    pub fn rate(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let bins = self.bins;
        for a in 0..bins {
            let ua = u[a];
            if ua == 0.0 {
                continue;
            }
            let row = &self.coef[a * bins..(a + 1) * bins];
            let mut lost = 0.0;
            for b in 0..bins {
                let ub = u[b];
                if ub == 0.0 || row[b] == 0.0 {
                    continue;
                }
                let flux = row[b] * ua * ub;
                lost += flux;
                let t = self.targets[a * bins + b];
                out[t.lo] += t.theta * flux;
                if t.hi != t.lo {
                    out[t.hi] += (1.0 - t.theta) * flux;
                }
            }
            out[a] -= lost;
        }
    }

    /// `K⁺(u)` alone.
    pub fn gain(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let bins = self.bins;
        for a in 0..bins {
            if u[a] == 0.0 {
                continue;
            }
            for b in 0..bins {
                let flux = self.coef[a * bins + b] * u[a] * u[b];
                if flux == 0.0 {
                    continue;
                }
                let t = self.targets[a * bins + b];
                out[t.lo] += t.theta * flux;
                if t.hi != t.lo {
                    out[t.hi] += (1.0 - t.theta) * flux;
                }
            }
        }
    }

    /// Largest loss coefficient `Σ_b κ(m_a, m_b)/m_b·u_b` over bins `a`.
    pub fn max_loss_coefficient(&self, u: &[f64]) -> f64 {
        let bins = self.bins;
        (0..bins)
            .map(|a| {
                let row = &self.coef[a * bins..(a + 1) * bins];
                row.iter().zip(u).map(|(c, v)| c * v.max(0.0)).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Advances one cell by `dt` with explicit substeps.
    pub fn advance(&self, u: &mut [f64], dt: f64, integrator: CoagIntegrator, work: &mut CoagWork) {
        let bins = self.bins;
        work.resize(bins);
        let loss = self.max_loss_coefficient(u);
        let substeps = if loss > 0.0 { libm::ceil(dt * loss / STABILITY).max(1.0) as usize } else { 1 };
        if loss == 0.0 {
            return;
        }
        let h = dt / substeps as f64;
        for _ in 0..substeps {
            self.rate(u, &mut work.k1);
            match integrator {
                CoagIntegrator::Euler => {
                    for (v, r) in u.iter_mut().zip(&work.k1) {
                        *v += h * r;
                    }
                }
                CoagIntegrator::Rk2 => {
                    for b in 0..bins {
                        work.stage[b] = u[b] + h * work.k1[b];
                    }
                    self.rate(&work.stage, &mut work.k2);
                    for b in 0..bins {
                        u[b] += 0.5 * h * (work.k1[b] + work.k2[b]);
                    }
                }
            }
        }
    }
}

/// Scratch buffers for [`CoagOperator::advance`].
#[derive(Debug, Clone, Default)]
pub struct CoagWork {
    k1: Vec<f64>,
    k2: Vec<f64>,
    stage: Vec<f64>,
}

impl CoagWork {
    fn resize(&mut self, bins: usize) {
        self.k1.resize(bins, 0.0);
        self.k2.resize(bins, 0.0);
        self.stage.resize(bins, 0.0);
    }
}

/// `K⁺(υ) - K⁻(υ)` for one cell's per-bin mass-flow.
pub fn coag_rate(values: &[f64], grid: &MassGrid, coeffs: &DerivedCoefficients) -> Result<Vec<f64>> {
    if values.len() != grid.len() {
        return Err(usage!("rate input needs one value per bin"));
    }
    let mut out = vec![0.0; values.len()];
    CoagOperator::new(grid, coeffs).rate(values, &mut out);
    Ok(out)
}

/// Spectral heat propagator for a fixed spatial resolution.
#[derive(Debug, Clone)]
struct HeatPropagator {
    fft: Fft,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl HeatPropagator {
    fn new(cells: usize) -> Result<Self> {
        if !cells.is_power_of_two() {
            return Err(usage!("spectral heat step needs a power-of-two cell count, got {cells}"));
        }
        Ok(Self { fft: Fft::new(cells), re: vec![0.0; cells], im: vec![0.0; cells] })
    }

    /// `exp(-½·a·(2πk)²·dt)` for each signed frequency `k`.
    fn multipliers(&self, a: f64, dt: f64) -> Vec<f64> {
        let n = self.fft.len();
        (0..n)
            .map(|k| {
                let f = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                let w = 2.0 * core::f64::consts::PI * f;
                libm::exp(-0.5 * a * w * w * dt)
            })
            .collect()
    }

    fn apply(&mut self, g: &mut GridMeasure, multipliers: &[Vec<f64>]) {
        let cells = g.cells();
        let bins = g.bins();
        if cells == 1 {
            return;
        }
        let values = g.values_mut();
        for b in 0..bins {
            let mult = &multipliers[b];
            if mult.iter().all(|m| *m == 1.0) {
                continue;
            }
            for j in 0..cells {
                self.re[j] = values[j * bins + b];
                self.im[j] = 0.0;
            }
            self.fft.forward(&mut self.re, &mut self.im);
            for k in 0..cells {
                self.re[k] *= mult[k];
                self.im[k] *= mult[k];
            }
            self.fft.inverse(&mut self.re, &mut self.im);
            for j in 0..cells {
                values[j * bins + b] = self.re[j];
            }
        }
    }
}

fn heat_multipliers(
    prop: &HeatPropagator,
    grid: &MassGrid,
    diffusivity: &DiffusivitySpec,
    dt: f64,
) -> Vec<Vec<f64>> {
    grid.reps().iter().map(|m| prop.multipliers(diffusivity.eval(*m), dt)).collect()
}

/// Exact heat flow over `dt` in each bin, `∂ₜυ = ½·a(m_b)·∂²ₓυ`.
pub fn heat_step(field: &FieldState, diffusivity: &DiffusivitySpec, dt: f64) -> Result<FieldState> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(usage!("heat step needs a nonnegative time step"));
    }
    let mut prop = HeatPropagator::new(field.measure.cells())?;
    let mult = heat_multipliers(&prop, field.measure.grid(), diffusivity, dt);
    let mut out = field.clone();
    prop.apply(&mut out.measure, &mult);
    out.time += dt;
    Ok(out)
}

/// Result of [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub snapshots: Vec<FieldState>,
    /// Largest `|⟨1, υ_t⟩ - ⟨1, υ_0⟩|` over step boundaries.
    pub mass_drift: f64,
    /// Total mass-flow removed by the positivity clip.
    pub clipped_mass: f64,
    /// `sup_x Σ_b ω(m_b)/m_b·υ(x, b)` per snapshot, as a density in `x`.
    pub omega_proxy: Vec<f64>,
    pub steps: usize,
    /// Step actually used: `T/⌈T/dt⌉`.
    pub dt: f64,
}

/// `sup_x Σ_b ω(m_b)/m_b·υ(x, b)`, reading cell values as densities in `x`.
pub fn omega_proxy(measure: &GridMeasure, coeffs: &DerivedCoefficients) -> f64 {
    let omega_over_m: Vec<f64> = measure.grid().reps().iter().map(|m| coeffs.omega(*m) / m).collect();
    let sup = measure
        .values()
        .chunks_exact(measure.bins())
        .map(|row| row.iter().zip(&omega_over_m).map(|(v, w)| v * w).sum::<f64>())
        .fold(0.0, f64::max);
    sup * measure.cells() as f64
}

/// Integrates from `initial` to `t_final`, snapshotting at the first step
/// boundary at or after each requested time.
pub fn solve(
    initial: &FieldState,
    t_final: f64,
    coeffs: &DerivedCoefficients,
    opts: &SolverOptions,
    snapshot_times: &[f64],
) -> Result<SolveOutput> {
    opts.validate()?;
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(usage!("final time must be finite and nonnegative"));
    }
    if snapshot_times.windows(2).any(|w| w[1] < w[0])
        || snapshot_times.iter().any(|t| *t < 0.0 || *t > t_final)
    {
        return Err(usage!("snapshot times must be sorted and lie in [0, {t_final}]"));
    }
    let mut field = initial.clone();
    let grid = field.measure.grid().clone();
    let cells = field.measure.cells();
    let bins = grid.len();
    let mut prop = HeatPropagator::new(cells)?;
    let steps = if t_final > 0.0 { libm::ceil(t_final / opts.dt - 1e-9).max(1.0) as usize } else { 0 };
    let h = if steps > 0 { t_final / steps as f64 } else { opts.dt };
    let heat_dt = match opts.splitting {
        Splitting::Strang => 0.5 * h,
        Splitting::Lie => h,
    };
    let mult = heat_multipliers(&prop, &grid, coeffs.diffusivity(), heat_dt);
    let op = CoagOperator::new(&grid, coeffs);
    let mut work = CoagWork::default();
    let total0 = field.total();

    let mut out = SolveOutput {
        snapshots: Vec::new(),
        mass_drift: 0.0,
        clipped_mass: 0.0,
        omega_proxy: Vec::new(),
        steps,
        dt: h,
    };
    let slack = 1e-9 * h;
    let mut next = 0;
    let snap = |field: &FieldState, elapsed: f64, out: &mut SolveOutput, next: &mut usize| {
        while *next < snapshot_times.len() && snapshot_times[*next] <= elapsed + slack {
            out.snapshots.push(field.clone());
            out.omega_proxy.push(omega_proxy(&field.measure, coeffs));
            *next += 1;
        }
    };
    snap(&field, 0.0, &mut out, &mut next);
    for step in 1..=steps {
        prop.apply(&mut field.measure, &mult);
        // cells hold υ·Δx and the rate is quadratic, so a cell value evolves
        // like a density over time h/Δx
        for row in field.measure.values_mut().chunks_exact_mut(bins) {
            op.advance(row, h * cells as f64, opts.coag_integrator, &mut work);
        }
        if opts.splitting == Splitting::Strang {
            prop.apply(&mut field.measure, &mult);
        }
        field.time = initial.time + step as f64 * h;
        if opts.positivity_clip {
            for v in field.measure.values_mut() {
                if *v < 0.0 {
                    out.clipped_mass += -*v;
                    *v = 0.0;
                }
            }
            if out.clipped_mass > opts.clip_budget * total0 {
                return Err(Error::PositivityBudget {
                    time: field.time,
                    clipped: out.clipped_mass,
                    total: total0,
                });
            }
        }
        out.mass_drift = out.mass_drift.max((field.total() - total0).abs());
        snap(&field, step as f64 * h, &mut out, &mut next);
    }
    Ok(out)
}

/// Classical constant-kernel Smoluchowski solution from a monodisperse
/// start: `n_k(t) = n₀·τ^{k-1}/(1 + τ)^{k+1}`, `τ = K₀·n₀·t/2`, for
/// `k = 1…k_max`.
pub fn constant_kernel_oracle(t: f64, k0: f64, n0: f64, k_max: usize) -> Result<Vec<f64>> {
    if !(k0 > 0.0 && n0 > 0.0 && k0.is_finite() && n0.is_finite()) {
        return Err(domain!("constant-kernel oracle needs K0 > 0 and n0 > 0"));
    }
    if !(t >= 0.0) {
        return Err(domain!("time must be nonnegative"));
    }
    let tau = 0.5 * k0 * n0 * t;
    let base = n0 / ((1.0 + tau) * (1.0 + tau));
    let ratio = tau / (1.0 + tau);
    let mut out = Vec::with_capacity(k_max);
    let mut term = base;
    for _ in 0..k_max {
        out.push(term);
        term *= ratio;
    }
    Ok(out)
}

/// Output of [`picard_truncated`]. Trajectories are stored row-major over
/// the time grid `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutput {
    pub n: usize,
    pub times: Vec<f64>,
    /// Fixed point `μ̃ⁿ` on bins `1…n`, `(times.len()) × n`.
    pub fixed_point: Vec<f64>,
    /// Every iterate, starting with `μ·1_{E_n}`.
    pub iterates: Vec<Vec<f64>>,
    /// `cⁿ` along the fixed point, `(times.len()) × n`.
    pub c: Vec<f64>,
    /// Reference solution on the full grid, `(times.len()) × B`.
    pub reference: Vec<f64>,
    /// `sup_t Σ_m |μ̃_{k+1} - μ̃_k|` for each iteration.
    pub increments: Vec<f64>,
    /// Successive increment ratios.
    pub contraction: Vec<f64>,
    /// Largest bin-wise rise `μ̃_{k+1} - μ̃_k` over all iterations and times.
    pub max_rise: f64,
    /// Largest bin-wise fall `μ̃_k - μ̃_{k+1}`.
    pub max_fall: f64,
}

impl PicardOutput {
    pub fn at(&self, i: usize) -> &[f64] {
        &self.fixed_point[i * self.n..(i + 1) * self.n]
    }

    pub fn reference_at(&self, i: usize) -> &[f64] {
        let bins = self.reference.len() / self.times.len();
        &self.reference[i * bins..(i + 1) * bins]
    }
}

/// Truncated Picard scheme on the integer grid, homogeneous data.
///
/// With `E_n` the first `n` integer bins and `ν` the initial datum, iterate
///
/// ```text
/// μ̃_{k+1}(t) = e^{-∫₀ᵗ c_k}·ν1_{E_n} + ∫₀ᵗ e^{-∫ₛᵗ c_k}·[K_n⁺(μ̃_k) + δ_k·μ̃_k](s) ds
/// c_k(t, m)  = ω(m)·[⟨ω/m', ν⟩ + ∫₀ᵗ ⟨ω/m', K_n(μ̃_k(s))⟩ ds]
/// δ_k(t, m)  = ⟨(ω(m)ω(m') - κ(m, m'))/m', μ̃_k(t)⟩
/// ```
///
/// from `μ̃_0 = μ·1_{E_n}`, where `μ` is a fine reference solve of the full
/// equation. Time integrals use the trapezoid rule on a grid of step
/// `opts.dt`, with the exponential factor carried exactly between nodes.
pub fn picard_truncated(
    n: usize,
    nu_star: &HomogeneousState,
    t_final: f64,
    coeffs: &DerivedCoefficients,
    opts: &SolverOptions,
) -> Result<PicardOutput> {
    opts.validate()?;
    let grid = &nu_star.grid;
    if grid.kind() != MassGridKind::Integer {
        return Err(usage!("the truncated scheme runs on the integer mass grid"));
    }
    let bins = grid.len();
    if n == 0 || n > bins {
        return Err(usage!("truncation index must lie in 1..={bins}, got {n}"));
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(usage!("final time must be positive"));
    }
    let steps = libm::ceil(t_final / opts.dt - 1e-9).max(1.0) as usize;
    let h = t_final / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    let reps = grid.reps();

    let reference = homogeneous_reference(nu_star, coeffs, h, steps);

    let op_n = CoagOperator::truncated(grid, coeffs, n);
    let omega: Vec<f64> = reps.iter().map(|m| coeffs.omega(*m)).collect();
    let nu_pairing: f64 = (0..bins).map(|b| omega[b] / reps[b] * nu_star.values[b]).sum();
    // (ω(m)ω(m') - κ(m, m'))/m' on E_n × E_n
    let mut delta_coef = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            delta_coef[a * n + b] = (omega[a] * omega[b] - coeffs.kappa_eval(reps[a], reps[b])) / reps[b];
        }
    }

    let mut current: Vec<f64> =
        (0..=steps).flat_map(|i| reference[i * bins..i * bins + n].to_vec()).collect();
    let mut c = c_trajectory(&current, &op_n, &omega, reps, nu_pairing, n, steps, h);
    let mut out = PicardOutput {
        n,
        times,
        fixed_point: Vec::new(),
        iterates: vec![current.clone()],
        c: Vec::new(),
        reference,
        increments: Vec::new(),
        contraction: Vec::new(),
        max_rise: 0.0,
        max_fall: 0.0,
    };

    let mut full = vec![0.0; bins];
    let mut gain_full = vec![0.0; bins];
    let mut source = vec![0.0; (steps + 1) * n];
    let mut next = vec![0.0; (steps + 1) * n];
    for _ in 0..opts.picard_max_iter {
        for i in 0..=steps {
            let mu = &current[i * n..(i + 1) * n];
            full[..n].copy_from_slice(mu);
            full[n..].iter_mut().for_each(|v| *v = 0.0);
            op_n.gain(&full, &mut gain_full);
            for a in 0..n {
                let delta: f64 = (0..n).map(|b| delta_coef[a * n + b] * mu[b]).sum();
                source[i * n + a] = gain_full[a] + delta * mu[a];
            }
        }
        for a in 0..n {
            next[a] = nu_star.values[a];
        }
        for i in 1..=steps {
            for a in 0..n {
                let decay = libm::exp(-0.5 * h * (c[(i - 1) * n + a] + c[i * n + a]));
                next[i * n + a] = decay * (next[(i - 1) * n + a] + 0.5 * h * source[(i - 1) * n + a])
                    + 0.5 * h * source[i * n + a];
            }
        }
        let mut increment = 0.0f64;
        for i in 0..=steps {
            let mut tv = 0.0;
            for a in 0..n {
                let d = next[i * n + a] - current[i * n + a];
                tv += d.abs();
                out.max_rise = out.max_rise.max(d);
                out.max_fall = out.max_fall.max(-d);
            }
            increment = increment.max(tv);
        }
        if !increment.is_finite() {
            out.increments.push(increment);
            break;
        }
        if let Some(prev) = out.increments.last() {
            out.contraction.push(if *prev > 0.0 { increment / prev } else { 0.0 });
        }
        out.increments.push(increment);
        core::mem::swap(&mut current, &mut next);
        c = c_trajectory(&current, &op_n, &omega, reps, nu_pairing, n, steps, h);
        out.iterates.push(current.clone());
        if increment < opts.picard_tol {
            out.fixed_point = current;
            out.c = c;
            return Ok(out);
        }
    }
    Err(Error::NoConvergence { iterations: out.increments.len(), increments: out.increments })
}

/// `c(t_i, m) = ω(m)·[⟨ω/m', ν⟩ + ∫₀^{t_i} ⟨ω/m', K_n(μ̃_s)⟩ ds]` by the
/// cumulative trapezoid rule.
#[allow(clippy::too_many_arguments)]
fn c_trajectory(
    mu: &[f64],
    op_n: &CoagOperator,
    omega: &[f64],
    reps: &[f64],
    nu_pairing: f64,
    n: usize,
    steps: usize,
    h: f64,
) -> Vec<f64> {
    let bins = op_n.bins();
    let mut full = vec![0.0; bins];
    let mut rate = vec![0.0; bins];
    let mut pairing = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        full[..n].copy_from_slice(&mu[i * n..(i + 1) * n]);
        full[n..].iter_mut().for_each(|v| *v = 0.0);
        op_n.rate(&full, &mut rate);
        pairing.push((0..n).map(|b| omega[b] / reps[b] * rate[b]).sum::<f64>());
    }
    let mut c = vec![0.0; (steps + 1) * n];
    let mut integral = 0.0;
    for i in 0..=steps {
        if i > 0 {
            integral += 0.5 * h * (pairing[i - 1] + pairing[i]);
        }
        for a in 0..n {
            c[i * n + a] = omega[a] * (nu_pairing + integral);
        }
    }
    c
}

/// Homogeneous solve of the full equation, recorded every `h`, with RK2
/// substeps of at most `h/8`.
fn homogeneous_reference(nu: &HomogeneousState, coeffs: &DerivedCoefficients, h: f64, steps: usize) -> Vec<f64> {
    let bins = nu.grid.len();
    let op = CoagOperator::new(&nu.grid, coeffs);
    let mut work = CoagWork::default();
    let mut u = nu.values.clone();
    let mut out = Vec::with_capacity((steps + 1) * bins);
    out.extend_from_slice(&u);
    for _ in 0..steps {
        for _ in 0..8 {
            op.advance(&mut u, h / 8.0, CoagIntegrator::Rk2, &mut work);
        }
        out.extend_from_slice(&u);
    }
    out
}
