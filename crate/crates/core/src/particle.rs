//! The `N`-particle coagulating system on the unit circle.
//!
//! Particle `i` carries a position `Xⁱ ∈ [0, 1)` and a mass `Mⁱ` (total mass
//! one). Between coagulations it performs Brownian motion with generator
//! `½·a(N·Mⁱ)·∂²ₓ`. A pair `(i, j)` coagulates once `Φ(N·Mⁱ, N·Mʲ)/N` times
//! their intersection local time exceeds an independent unit exponential;
//! the lower index keeps `Mⁱ + Mʲ` and the higher index is emptied.
//!
//! Time is advanced in steps of `dt`. Within a step the exponential clocks
//! are replaced by Bernoulli thinning with probability
//! `1 - exp(-Φ·E[ΔL]/N)`, where `E[ΔL]` is the expected local time of the
//! Brownian bridge joining the pair's gaps at the two ends of the step. Pairs
//! are found by sweeping the sorted positions within an interaction window.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{domain, usage};
use crate::kernels::{DerivedCoefficients, PhiFamily};
use crate::local_time::{bridge_local_time_unchecked, TailMode};
use crate::measures::{Atom, EmpiricalMeasure};
use crate::streams::{standard_normal, stream_rng, PairStream, INIT_STREAM};
use crate::Result;

/// Resolution of the inverse-CDF table used to sample positions.
pub const DENSITY_TABLE_SIZE: usize = 4096;

const SQRT_HALF_PI: f64 = 1.253_314_137_315_500_3;

/// Spatial density `h(x)` on the circle; need not be normalised.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialDensity {
    Uniform,
    /// `1[lo ≤ x < hi]`.
    Indicator { lo: f64, hi: f64 },
    /// `1 + amplitude·cos(2π·mode·x)`.
    Cosine { amplitude: f64, mode: u32 },
    /// Piecewise-constant values on equal cells of `[0, 1)`.
    Tabulated(Vec<f64>),
}

impl SpatialDensity {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SpatialDensity::Uniform => 1.0,
            SpatialDensity::Indicator { lo, hi } => {
                if x >= *lo && x < *hi {
                    1.0
                } else {
                    0.0
                }
            }
            SpatialDensity::Cosine { amplitude, mode } => {
                1.0 + amplitude * libm::cos(2.0 * core::f64::consts::PI * *mode as f64 * x)
            }
            SpatialDensity::Tabulated(values) => {
                let k = ((x * values.len() as f64) as usize).min(values.len() - 1);
                values[k]
            }
        }
    }
}

/// Law of the rescaled masses `N·mⁱ` in a product-measure start.
#[derive(Debug, Clone, PartialEq)]
pub enum RescaledMassLaw {
    Exponential { mean: f64 },
    /// Discrete law on `values` with (unnormalised) `weights`.
    Discrete { values: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    /// All masses `1/N`, positions i.i.d. from the density.
    Monodisperse(SpatialDensity),
    /// Positions i.i.d. from the density, rescaled masses i.i.d. from the law,
    /// then normalised to total mass one.
    ProductMeasure { density: SpatialDensity, masses: RescaledMassLaw },
}

impl InitialProfile {
    pub fn density(&self) -> &SpatialDensity {
        match self {
            InitialProfile::Monodisperse(d) => d,
            InitialProfile::ProductMeasure { density, .. } => density,
        }
    }
}

/// Inverse-CDF sampler for a [`SpatialDensity`], tabulated at cell midpoints.
#[derive(Debug, Clone)]
pub struct PositionSampler {
    cumulative: Vec<f64>,
}

impl PositionSampler {
    pub fn new(density: &SpatialDensity) -> Result<Self> {
        let n = DENSITY_TABLE_SIZE;
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for k in 0..n {
            let h = density.eval((k as f64 + 0.5) / n as f64);
            if !h.is_finite() || h < 0.0 {
                return Err(domain!("spatial density must be finite and nonnegative (h = {h})"));
            }
            acc += h;
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return Err(domain!("spatial density is not normalisable"));
        }
        Ok(Self { cumulative })
    }

    /// Maps `u ∈ [0, 1)` to a position in `[0, 1)`.
    pub fn position(&self, u: f64) -> f64 {
        let n = self.cumulative.len() - 1;
        let target = u * self.cumulative[n];
        let k = self.cumulative.partition_point(|c| *c <= target).clamp(1, n) - 1;
        let width = self.cumulative[k + 1] - self.cumulative[k];
        let frac = if width > 0.0 { (target - self.cumulative[k]) / width } else { 0.5 };
        wrap_unit((k as f64 + frac) / n as f64)
    }
}

/// Reduces `x` to `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let y = x - libm::floor(x);
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Signed nearest-image difference `b - a`, in `(-1/2, 1/2]`.
#[inline]
pub fn circle_gap(a: f64, b: f64) -> f64 {
    let d = wrap_unit(b - a);
    if d > 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// One logged coagulation. `i < j`; `i` keeps the merged mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoagulationEvent {
    pub time: f64,
    pub i: usize,
    pub j: usize,
    pub mass_i_before: f64,
    pub mass_j_before: f64,
}

/// Step size, interaction window and image treatment for [`ParticleSystem::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub dt: f64,
    /// Circle distance beyond which a pair is not considered, in `(0, 1/2)`.
    pub interaction_window: f64,
    pub tail_mode: TailMode,
}

impl StepParams {
    /// Window of six standard deviations of the fastest pair's relative
    /// displacement, capped just below one half.
    pub fn with_default_window(dt: f64, max_diffusivity: f64) -> Self {
        let std = libm::sqrt(2.0 * max_diffusivity * dt);
        Self { dt, interaction_window: (6.0 * std).min(0.499), tail_mode: TailMode::Truncate }
    }
}

/// Per-snapshot diagnostics of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotStats {
    pub time: f64,
    /// `Σ Mⁱ`, compensated summation.
    pub total_mass: f64,
    /// `N·Σ (Mⁱ)²`.
    pub second_moment: f64,
    pub alive: usize,
    /// Events logged up to this snapshot.
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub snapshots: Vec<SnapshotStats>,
    pub steps: u64,
    /// Largest `|Σ Mⁱ - Σ Mⁱ₀|` seen at any step boundary.
    pub max_mass_error: f64,
    /// Step boundaries at which `N·Σ (Mⁱ)²` went down.
    pub second_moment_decreases: usize,
    /// Candidates dropped because a member had already merged in the step.
    pub discarded_candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub snapshots: Vec<EmpiricalMeasure>,
    pub events: Vec<CoagulationEvent>,
    pub stats: RunStats,
}

/// Positions, masses and random streams of the `N` particles.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    positions: Vec<f64>,
    masses: Vec<f64>,
    alive: Vec<bool>,
    stream_ids: Vec<u32>,
    rngs: Vec<ChaCha8Rng>,
    seed: u64,
    time: f64,
    steps: u64,
    last_discarded: usize,
    scratch: Scratch,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    increments: Vec<f64>,
    order: Vec<usize>,
    xs: Vec<f64>,
    incs: Vec<f64>,
    diffusivities: Vec<f64>,
    rescaled: Vec<f64>,
    powers: Vec<f64>,
    streams: Vec<u32>,
    candidates: Vec<(u64, usize, usize)>,
    merged: Vec<bool>,
}

impl ParticleSystem {
    /// Draws the initial configuration. Positions come from a dedicated
    /// stream of `seed`; particle `i` gets Brownian stream `i`.
    pub fn sample_initial(n: usize, profile: &InitialProfile, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(usage!("need at least two particles, got {n}"));
        }
        if n > u32::MAX as usize {
            return Err(usage!("too many particles"));
        }
        let sampler = PositionSampler::new(profile.density())?;
        let mut rng = stream_rng(seed, INIT_STREAM);
        let positions: Vec<f64> = (0..n).map(|_| sampler.position(rng.random::<f64>())).collect();
        let masses = match profile {
            InitialProfile::Monodisperse(_) => vec![1.0 / n as f64; n],
            InitialProfile::ProductMeasure { masses, .. } => sample_masses(n, masses, &mut rng)?,
        };
        Self::from_parts(positions, masses, (0..n as u32).collect(), seed)
    }

    /// Builds a system from explicit state. `stream_ids` must be distinct;
    /// relabelling particles together with their stream ids leaves the
    /// dynamics unchanged up to the merge convention.
    pub fn from_parts(
        positions: Vec<f64>,
        masses: Vec<f64>,
        stream_ids: Vec<u32>,
        seed: u64,
    ) -> Result<Self> {
        let n = positions.len();
        if n < 2 || masses.len() != n || stream_ids.len() != n {
            return Err(usage!("positions, masses and stream ids must have equal length >= 2"));
        }
        if positions.iter().any(|x| !(0.0..1.0).contains(x)) {
            return Err(domain!("positions must lie in [0, 1)"));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(domain!("masses must be finite and nonnegative"));
        }
        let mut sorted_ids = stream_ids.clone();
        sorted_ids.sort_unstable();
        if sorted_ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(usage!("stream ids must be distinct"));
        }
        let alive = masses.iter().map(|m| *m > 0.0).collect();
        let rngs = stream_ids.iter().map(|s| stream_rng(seed, *s as u64)).collect();
        Ok(Self {
            positions,
            masses,
            alive,
            stream_ids,
            rngs,
            seed,
            time: 0.0,
            steps: 0,
            last_discarded: 0,
            scratch: Scratch::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn alive(&self) -> &[bool] {
        &self.alive
    }

    pub fn stream_ids(&self) -> &[u32] {
        &self.stream_ids
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    /// `Σ Mⁱ` by Neumaier summation.
    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.masses.iter().copied())
    }

    /// `N·Σ (Mⁱ)²`.
    pub fn second_moment(&self) -> f64 {
        let n = self.len() as f64;
        n * self.masses.iter().map(|m| m * m).sum::<f64>()
    }

    /// `Π_N = Σ Mⁱ δ_(Xⁱ, N·Mⁱ)` over the living particles.
    pub fn empirical_measure(&self) -> EmpiricalMeasure {
        let n = self.len() as f64;
        let atoms = (0..self.len())
            .filter(|&i| self.alive[i])
            .map(|i| Atom { x: self.positions[i], m: n * self.masses[i], w: self.masses[i] })
            .collect();
        EmpiricalMeasure::from_atoms_unchecked(atoms)
    }

    fn check_params(&self, coeffs: &DerivedCoefficients, params: &StepParams) -> Result<()> {
        let dt = params.dt;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(usage!("time step must be positive, got {dt}"));
        }
        let w = params.interaction_window;
        if !(w > 0.0 && w < 0.5) {
            return Err(usage!("interaction window must lie in (0, 1/2), got {w}"));
        }
        if params.tail_mode == TailMode::Truncate {
            // the two largest diffusivities bound every pair sum
            let n = self.len() as f64;
            let (mut top, mut second) = (0.0f64, 0.0f64);
            for i in (0..self.len()).filter(|&i| self.alive[i]) {
                let a = coeffs.diffusivity().eval(n * self.masses[i]);
                if a > top {
                    second = top;
                    top = a;
                } else if a > second {
                    second = a;
                }
            }
            let std = libm::sqrt((top + second) * dt);
            if w <= 3.0 * std {
                return Err(usage!(
                    "interaction window {w} must exceed three pair standard deviations ({})",
                    3.0 * std
                ));
            }
        }
        Ok(())
    }

    /// Advances the system by one step and returns the coagulations it
    /// produced, in resolution order.
    pub fn step(
        &mut self,
        coeffs: &DerivedCoefficients,
        params: &StepParams,
    ) -> Result<Vec<CoagulationEvent>> {
        self.check_params(coeffs, params)?;
        let mass_before = self.total_mass();
        let n = self.len();
        let nf = n as f64;
        let dt = params.dt;
        let w = params.interaction_window;
        let diffusivity = coeffs.diffusivity();
        let kernel = coeffs.kernel();
        let mut s = core::mem::take(&mut self.scratch);

        // Brownian increments; dead particles stay put.
        s.increments.clear();
        s.increments.resize(n, 0.0);
        s.rescaled.clear();
        s.rescaled.extend(self.masses.iter().map(|m| nf * m));
        s.order.clear();
        for i in 0..n {
            if !self.alive[i] {
                continue;
            }
            let a = diffusivity.eval(s.rescaled[i]);
            s.increments[i] = libm::sqrt(a * dt) * standard_normal(&mut self.rngs[i]);
            s.order.push(i);
        }
        let positions = &self.positions;
        s.order.sort_unstable_by(|&a, &b| positions[a].total_cmp(&positions[b]).then(a.cmp(&b)));

        let m = s.order.len();
        s.xs.clear();
        s.incs.clear();
        s.diffusivities.clear();
        s.powers.clear();
        s.streams.clear();
        let power_law = match kernel.family() {
            PhiFamily::PowerSum { scale, alpha } => Some((*scale, *alpha)),
            _ => None,
        };
        let mut max_rescaled = 0.0f64;
        let mut max_a = 0.0f64;
        for &i in &s.order {
            s.xs.push(self.positions[i]);
            s.incs.push(s.increments[i]);
            s.streams.push(self.stream_ids[i]);
            let a = diffusivity.eval(s.rescaled[i]);
            max_a = max_a.max(a);
            s.diffusivities.push(a);
            max_rescaled = max_rescaled.max(s.rescaled[i]);
            if let Some((_, alpha)) = power_law {
                s.powers.push(libm::pow(s.rescaled[i], alpha));
            }
        }

        // Every pair hazard is at most φ_max/N·σ_max·√(π/2) (times nine
        // image terms with wrap-around images), so a coin above the matching
        // probability rejects the pair without evaluating its local time.
        let phi_max = kernel.sup_on(max_rescaled);
        let sigma_max = libm::sqrt(2.0 * max_a * dt);
        let images = match params.tail_mode {
            TailMode::Truncate => 1.0,
            TailMode::GaussianTail => 9.0,
        };
        let coin_bound = if phi_max.is_finite() {
            -libm::expm1(-phi_max / nf * sigma_max * SQRT_HALF_PI * images)
        } else {
            1.0
        };
        let coins = PairStream::new(self.seed, self.steps);

        s.candidates.clear();
        for p in 0..m {
            let (xp, ip, ap, sp) = (s.xs[p], s.incs[p], s.diffusivities[p], s.streams[p]);
            for off in 1..m {
                let (q, wrap) = if p + off < m { (p + off, 0.0) } else { (p + off - m, 1.0) };
                let d0 = s.xs[q] + wrap - xp;
                if d0 >= w {
                    break;
                }
                let d1 = d0 + s.incs[q] - ip;
                if libm::fabs(d1) >= w {
                    continue;
                }
                let u = coins.uniform(sp, s.streams[q]);
                if u >= coin_bound {
                    continue;
                }
                let (i, j) = (s.order[p], s.order[q]);
                let phi = match power_law {
                    Some((scale, _)) => {
                        if s.rescaled[i] > 0.0 && s.rescaled[j] > 0.0 {
                            scale * (s.powers[p] + s.powers[q])
                        } else {
                            0.0
                        }
                    }
                    None => kernel.eval(s.rescaled[i], s.rescaled[j]),
                };
                if phi <= 0.0 {
                    continue;
                }
                let sigma2 = (ap + s.diffusivities[q]) * dt;
                let hazard = phi / nf * bridge_local_time_unchecked(d0, d1, sigma2, params.tail_mode);
                if u < -libm::expm1(-hazard) {
                    s.candidates.push((coins.priority(sp, s.streams[q]), i.min(j), i.max(j)));
                }
            }
        }

        // positions advance for every living particle
        for i in 0..n {
            if self.alive[i] {
                self.positions[i] = wrap_unit(self.positions[i] + s.increments[i]);
            }
        }

        // random resolution order; stale candidates are dropped
        s.candidates.sort_unstable();
        s.merged.clear();
        s.merged.resize(n, false);
        let event_time = self.time + dt;
        let mut events = Vec::new();
        let mut discarded = 0;
        for &(_, i, j) in &s.candidates {
            if s.merged[i] || s.merged[j] {
                discarded += 1;
                continue;
            }
            s.merged[i] = true;
            s.merged[j] = true;
            events.push(CoagulationEvent {
                time: event_time,
                i,
                j,
                mass_i_before: self.masses[i],
                mass_j_before: self.masses[j],
            });
            self.masses[i] += self.masses[j];
            self.masses[j] = 0.0;
            self.alive[j] = false;
        }
        self.last_discarded = discarded;

        self.scratch = s;
        self.steps += 1;
        self.time = event_time;
        self.assert_invariants(mass_before, &events);
        Ok(events)
    }

    fn assert_invariants(&self, mass_before: f64, events: &[CoagulationEvent]) {
        let mass_after = self.total_mass();
        let bad_position = self.positions.iter().position(|x| !(0.0..1.0).contains(x));
        let bad_alive = (0..self.len()).find(|&i| self.alive[i] != (self.masses[i] > 0.0));
        if (mass_after - mass_before).abs() > 1e-12 || bad_position.is_some() || bad_alive.is_some()
        {
            let mut dump = alloc::string::String::new();
            let _ = write!(
                dump,
                "particle system invariant violated at step {} (t = {}): mass {} -> {}, \
                 bad position slot {:?}, alive/mass mismatch slot {:?}, events {:?}",
                self.steps, self.time, mass_before, mass_after, bad_position, bad_alive, events
            );
            panic!("{dump}");
        }
    }

    /// Runs until `t_final`, taking snapshots at the first step boundary at
    /// or after each requested time.
    pub fn run(
        &mut self,
        coeffs: &DerivedCoefficients,
        params: &StepParams,
        t_final: f64,
        snapshot_times: &[f64],
    ) -> Result<RunOutput> {
        self.run_observed(coeffs, params, t_final, snapshot_times, |_, _| {})
    }

    /// [`run`](Self::run) with a callback after every step.
    pub fn run_observed<F>(
        &mut self,
        coeffs: &DerivedCoefficients,
        params: &StepParams,
        t_final: f64,
        snapshot_times: &[f64],
        mut observe: F,
    ) -> Result<RunOutput>
    where
        F: FnMut(&ParticleSystem, &[CoagulationEvent]),
    {
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(usage!("final time must be finite and nonnegative"));
        }
        if snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(usage!("snapshot times must be sorted"));
        }
        if snapshot_times.iter().any(|t| *t < 0.0 || *t > t_final) {
            return Err(usage!("snapshot times must lie in [0, {t_final}]"));
        }
        if !(params.dt > 0.0) {
            return Err(usage!("time step must be positive"));
        }
        let n_steps = if t_final > 0.0 { libm::ceil(t_final / params.dt - 1e-9) as u64 } else { 0 };
        let mass0 = self.total_mass();
        let mut stats = RunStats {
            snapshots: Vec::new(),
            steps: 0,
            max_mass_error: 0.0,
            second_moment_decreases: 0,
            discarded_candidates: 0,
        };
        let mut snapshots = Vec::with_capacity(snapshot_times.len());
        let mut events: Vec<CoagulationEvent> = Vec::new();
        let mut next = 0;
        let slack = 1e-9 * params.dt;
        let take = |sys: &Self, elapsed: f64, n_events: usize, snaps: &mut Vec<EmpiricalMeasure>, stats: &mut RunStats, next: &mut usize| {
            while *next < snapshot_times.len() && snapshot_times[*next] <= elapsed + slack {
                snaps.push(sys.empirical_measure());
                stats.snapshots.push(SnapshotStats {
                    time: sys.time,
                    total_mass: sys.total_mass(),
                    second_moment: sys.second_moment(),
                    alive: sys.alive_count(),
                    events: n_events,
                });
                *next += 1;
            }
        };
        take(self, 0.0, 0, &mut snapshots, &mut stats, &mut next);
        let mut prev_second = self.second_moment();
        for k in 1..=n_steps {
            let new_events = self.step(coeffs, params)?;
            stats.discarded_candidates += self.last_discarded;
            let second = self.second_moment();
            if second < prev_second {
                stats.second_moment_decreases += 1;
            }
            prev_second = second;
            stats.max_mass_error = stats.max_mass_error.max((self.total_mass() - mass0).abs());
            observe(self, &new_events);
            events.extend_from_slice(&new_events);
            let elapsed = k as f64 * params.dt;
            take(self, elapsed, events.len(), &mut snapshots, &mut stats, &mut next);
        }
        stats.steps = n_steps;
        Ok(RunOutput { snapshots, events, stats })
    }
}

fn sample_masses(n: usize, law: &RescaledMassLaw, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let draws: Vec<f64> = match law {
        RescaledMassLaw::Exponential { mean } => {
            if !(mean.is_finite() && *mean > 0.0) {
                return Err(domain!("exponential mass law needs a positive mean"));
            }
            (0..n).map(|_| mean * rng.sample::<f64, _>(Exp1)).collect()
        }
        RescaledMassLaw::Discrete { values, weights } => {
            if values.is_empty() || values.len() != weights.len() {
                return Err(usage!("discrete mass law needs matching nonempty values and weights"));
            }
            if values.iter().any(|v| !(v.is_finite() && *v > 0.0))
                || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            {
                return Err(domain!("discrete mass law needs positive values and nonnegative weights"));
            }
            let mut cumulative = Vec::with_capacity(weights.len());
            let mut acc = 0.0;
            for w in weights {
                acc += w;
                cumulative.push(acc);
            }
            if !(acc > 0.0) {
                return Err(domain!("discrete mass law has zero total weight"));
            }
            (0..n)
                .map(|_| {
                    let u = rng.random::<f64>() * acc;
                    let k = cumulative.partition_point(|c| *c <= u).min(values.len() - 1);
                    values[k]
                })
                .collect()
        }
    };
    let total = compensated_sum(draws.iter().copied());
    if !(total > 0.0) {
        return Err(domain!("sampled masses have zero total"));
    }
    let mut masses: Vec<f64> = draws.iter().map(|y| y / total).collect();
    let head: f64 = masses[..n - 1].iter().sum();
    let last = 1.0 - head;
    if last < 0.0 {
        return Err(domain!("mass normalisation left a negative remainder"));
    }
    masses[n - 1] = last;
    Ok(masses)
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
