//! Experiment building blocks: initial fields, the PDE reference, replica
//! pools, weak distances and the convergence sweep.

use rayon::prelude::*;
use serde::Serialize;
use smolcircle_core::kernels::DerivedCoefficients;
use smolcircle_core::massflow::{omega_proxy, picard_truncated, solve, FieldState, HomogeneousState, PicardOutput, SolveOutput};
use smolcircle_core::measures::{project, rho_from_pairings, GridMeasure, MassGrid, TestFamily};
use smolcircle_core::particle::{InitialProfile, ParticleSystem, RescaledMassLaw, RunOutput, SpatialDensity};

use crate::config::{BinCount, RunConfig};
use crate::HarnessError;

/// Subsamples per cell when averaging the spatial density.
const DENSITY_SUBSAMPLES: usize = 64;
/// Fraction of the final mass the automatically sized grid must hold below
/// its overflow bin.
pub const PILOT_COVERAGE: f64 = 0.999;

/// Share of the spatial density in each of `cells` equal cells.
pub fn spatial_weights(density: &SpatialDensity, cells: usize) -> Vec<f64> {
    let sub = DENSITY_SUBSAMPLES;
    let raw: Vec<f64> = (0..cells)
        .map(|c| {
            (0..sub)
                .map(|s| density.eval((c as f64 + (s as f64 + 0.5) / sub as f64) / cells as f64))
                .sum::<f64>()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Share of the limiting mass-flow measure `ν(dm)` in each bin. Rescaled
/// masses are draws divided by their mean, and each particle carries weight
/// proportional to its mass.
pub fn mass_weights(profile: &InitialProfile, grid: &MassGrid) -> Vec<f64> {
    let mut w = vec![0.0; grid.len()];
    match profile {
        InitialProfile::Monodisperse(_) => w[grid.bin_of(1.0)] = 1.0,
        InitialProfile::ProductMeasure { masses: RescaledMassLaw::Exponential { .. }, .. } => {
            // rescaled mass is Exp(1); the mass-weighted law has tail
            // (m + 1)·e^{-m}
            let tail = |m: f64| (m + 1.0) * (-m).exp();
            let edges = bin_edges(grid);
            let mut lo = 0.0;
            for (b, slot) in w.iter_mut().enumerate() {
                let hi = edges.get(b).copied().unwrap_or(f64::INFINITY);
                *slot = tail(lo) - if hi.is_finite() { tail(hi) } else { 0.0 };
                lo = hi;
            }
        }
        InitialProfile::ProductMeasure { masses: RescaledMassLaw::Discrete { values, weights }, .. } => {
            let total: f64 = weights.iter().sum();
            let mean: f64 = values.iter().zip(weights).map(|(v, p)| v * p).sum::<f64>() / total;
            for (v, p) in values.iter().zip(weights) {
                w[grid.bin_of(v / mean)] += p * v;
            }
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Upper edge of every bin but the last, located by bisection on
/// [`MassGrid::bin_of`].
fn bin_edges(grid: &MassGrid) -> Vec<f64> {
    let reps = grid.reps();
    (0..reps.len() - 1)
        .map(|b| {
            let (mut lo, mut hi) = (reps[b], reps[b + 1]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if grid.bin_of(mid) <= b {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        })
        .collect()
}

/// Limit of the projected initial empirical measure, total mass one.
pub fn initial_field(profile: &InitialProfile, cells: usize, grid: &MassGrid) -> Result<GridMeasure, HarnessError> {
    let space = spatial_weights(profile.density(), cells);
    let mass = mass_weights(profile, grid);
    let values = space.iter().flat_map(|s| mass.iter().map(move |m| s * m)).collect();
    GridMeasure::from_values(cells, grid.clone(), values).map_err(HarnessError::from_core)
}

/// The PDE solution used as reference for weak distances.
#[derive(Debug, Clone)]
pub struct Reference {
    pub grid: MassGrid,
    /// Bin count chosen by the pilot, when sized automatically.
    pub pilot_bins: Option<usize>,
    pub output: SolveOutput,
}

/// Smallest bin count holding [`PILOT_COVERAGE`] of the final mass of a
/// coarse pilot solve.
pub fn pilot_bin_count(cfg: &RunConfig, coeffs: &DerivedCoefficients) -> Result<usize, HarnessError> {
    let grid = cfg.pde.grid_with(cfg.pde.pilot_bins)?;
    let init = initial_field(&cfg.initial, cfg.pde.pilot_cells, &grid)?;
    let out = solve(&FieldState::new(init), cfg.t_final, coeffs, &cfg.pde.options, &[cfg.t_final])
        .map_err(HarnessError::from_core)?;
    let marginal = out.snapshots[0].measure.mass_marginal();
    let total: f64 = marginal.iter().sum();
    let last = marginal[marginal.len() - 1];
    if last > (1.0 - PILOT_COVERAGE) * total {
        return Err(HarnessError::Config(format!(
            "pilot grid of {} bins overflows ({:.3e} of the mass in its last bin); raise pde.pilot_bins",
            cfg.pde.pilot_bins,
            last / total
        )));
    }
    let mut acc = 0.0;
    for (b, v) in marginal.iter().enumerate() {
        acc += v;
        if acc >= PILOT_COVERAGE * total {
            return Ok((b + 1).max(2));
        }
    }
    Ok(marginal.len())
}

pub fn reference_solution(cfg: &RunConfig, coeffs: &DerivedCoefficients) -> Result<Reference, HarnessError> {
    let (bins, pilot_bins) = match cfg.pde.bins {
        BinCount::Fixed(b) => (b, None),
        BinCount::Auto => {
            let b = pilot_bin_count(cfg, coeffs)?;
            (b, Some(b))
        }
    };
    let grid = cfg.pde.grid_with(bins)?;
    let init = initial_field(&cfg.initial, cfg.pde.cells, &grid)?;
    let output = solve(&FieldState::new(init), cfg.t_final, coeffs, &cfg.pde.options, &cfg.snapshot_times)
        .map_err(HarnessError::from_core)?;
    Ok(Reference { grid, pilot_bins, output })
}

/// Runs one particle replica of size `n`.
pub fn run_replica(
    cfg: &RunConfig,
    coeffs: &DerivedCoefficients,
    n: usize,
    seed: u64,
) -> Result<RunOutput, HarnessError> {
    let mut sys = ParticleSystem::sample_initial(n, &cfg.initial, seed).map_err(HarnessError::from_core)?;
    sys.run(coeffs, &cfg.step_params(n), cfg.t_final, &cfg.snapshot_times)
        .map_err(HarnessError::from_core)
}

/// Runs `f` on every replica of size index `k` on the pool and returns the
/// results in replica order, whatever order they finish in.
pub fn map_replicas<T, F>(
    pool: &rayon::ThreadPool,
    cfg: &RunConfig,
    k: usize,
    f: F,
) -> Result<Vec<T>, HarnessError>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T, HarnessError> + Sync,
{
    pool.install(|| (0..cfg.replicas).into_par_iter().map(|r| f(r, cfg.replica_seed(k, r))).collect())
}

/// Weak distance of a particle run to the reference at each snapshot.
pub fn rho_to_reference(
    run: &RunOutput,
    reference: &Reference,
    reference_pairings: &[Vec<f64>],
    family: &TestFamily,
) -> Result<Vec<f64>, HarnessError> {
    let cells = reference.output.snapshots[0].measure.cells();
    run.snapshots
        .iter()
        .zip(reference_pairings)
        .map(|(snap, ref_pair)| {
            let g = project(snap, cells, &reference.grid).map_err(HarnessError::from_core)?;
            Ok(rho_from_pairings(&family.pairings(&g), ref_pair))
        })
        .collect()
}

pub fn reference_pairings(reference: &Reference, family: &TestFamily) -> Vec<Vec<f64>> {
    reference.output.snapshots.iter().map(|s| family.pairings(&s.measure)).collect()
}

/// Sample mean and standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for t in &idx[i..=j] {
            r[*t] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation, with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean_stderr(&rx).0, mean_stderr(&ry).0);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    /// Mean `ρ` at the final snapshot over replicas.
    pub mean_rho: f64,
    pub stderr: f64,
    pub per_replica: Vec<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    /// Rank correlation between `N` and the mean distance.
    pub spearman: f64,
    pub strictly_decreasing: bool,
    /// Mean distance at the largest `N` over the one at the smallest.
    pub last_over_first: f64,
    pub pde_bins: usize,
}

/// Mean distance to one PDE reference at the final time for each `N` of the
/// list.
pub fn convergence_sweep(
    cfg: &RunConfig,
    coeffs: &DerivedCoefficients,
    reference: &Reference,
    pool: &rayon::ThreadPool,
) -> Result<SweepSummary, HarnessError> {
    if cfg.n_list.len() < 3 {
        return Err(HarnessError::Config("a sweep needs at least three particle counts".into()));
    }
    let family = TestFamily::default();
    let ref_pairings = reference_pairings(reference, &family);
    let last = ref_pairings.len() - 1;
    let mut rows = Vec::new();
    for (k, &n) in cfg.n_list.iter().enumerate() {
        let rhos = map_replicas(pool, cfg, k, |_, seed| {
            let run = run_replica(cfg, coeffs, n, seed)?;
            Ok(rho_to_reference(&run, reference, &ref_pairings, &family)?[last])
        })?;
        let (mean_rho, stderr) = mean_stderr(&rhos);
        let seeds = (0..cfg.replicas).map(|r| cfg.replica_seed(k, r)).collect();
        rows.push(SweepRow { n, mean_rho, stderr, per_replica: rhos, seeds });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean_rho).collect();
    Ok(SweepSummary {
        spearman: spearman(&ns, &means),
        strictly_decreasing: means.windows(2).all(|w| w[1] < w[0]),
        last_over_first: means[means.len() - 1] / means[0],
        pde_bins: reference.grid.len(),
        rows,
    })
}

/// Homogeneous initial datum of the truncated scheme on `bins` integer bins.
pub fn picard_datum(cfg: &RunConfig) -> Result<HomogeneousState, HarnessError> {
    let grid = MassGrid::integer(cfg.picard.bins).map_err(HarnessError::from_core)?;
    let values = mass_weights(&cfg.initial, &grid).into_iter().map(|w| w * cfg.picard.total_mass).collect();
    HomogeneousState::new(grid, values).map_err(HarnessError::from_core)
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardSummary {
    pub n: usize,
    pub iterations: usize,
    pub increments: Vec<f64>,
    pub contraction: Vec<f64>,
    pub max_contraction: f64,
    /// Largest bin-wise increase and decrease between consecutive iterates.
    pub max_rise: f64,
    pub max_fall: f64,
    /// `max (μ̃ⁿ - reference)` over times and bins of `E_n`.
    pub above_reference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardLadder {
    pub runs: Vec<PicardSummary>,
    /// `max (μ̃ⁿ - μ̃ⁿ⁺)` over consecutive truncations, times and bins.
    pub ladder_violation: f64,
    pub reference_violation: f64,
}

fn summarize(out: &PicardOutput) -> PicardSummary {
    let mut above = f64::NEG_INFINITY;
    for i in 0..out.times.len() {
        for (a, r) in out.at(i).iter().zip(out.reference_at(i)) {
            above = above.max(a - r);
        }
    }
    PicardSummary {
        n: out.n,
        iterations: out.increments.len(),
        increments: out.increments.clone(),
        contraction: out.contraction.clone(),
        max_contraction: out.contraction.iter().copied().fold(0.0, f64::max),
        max_rise: out.max_rise,
        max_fall: out.max_fall,
        above_reference: above,
    }
}

/// Runs the truncated scheme for every truncation, in increasing order, and
/// measures the ordering `μ̃ⁿ ≤ μ̃ⁿ⁺ ≤ reference`.
pub fn picard_ladder(
    cfg: &RunConfig,
    coeffs: &DerivedCoefficients,
) -> Result<(PicardLadder, Vec<PicardOutput>), HarnessError> {
    let datum = picard_datum(cfg)?;
    let mut ns = cfg.picard.truncations.clone();
    ns.sort_unstable();
    ns.dedup();
    let outs: Vec<PicardOutput> = ns
        .iter()
        .map(|&n| picard_truncated(n, &datum, cfg.t_final, coeffs, &cfg.picard.options).map_err(HarnessError::from_core))
        .collect::<Result<_, _>>()?;
    let mut ladder = f64::NEG_INFINITY;
    for pair in outs.windows(2) {
        for i in 0..pair[0].times.len() {
            for (lo, hi) in pair[0].at(i).iter().zip(pair[1].at(i)) {
                ladder = ladder.max(lo - hi);
            }
        }
    }
    let runs: Vec<PicardSummary> = outs.iter().map(summarize).collect();
    let reference_violation = runs.iter().map(|r| r.above_reference).fold(f64::NEG_INFINITY, f64::max);
    Ok((PicardLadder { runs, ladder_violation: ladder, reference_violation }, outs))
}

/// `sup_x Σ_b ω/m·υ` of a particle snapshot projected onto `grid`.
pub fn particle_omega_proxy(
    snap: &smolcircle_core::measures::EmpiricalMeasure,
    cells: usize,
    grid: &MassGrid,
    coeffs: &DerivedCoefficients,
) -> Result<f64, HarnessError> {
    let g = project(snap, cells, grid).map_err(HarnessError::from_core)?;
    Ok(omega_proxy(&g, coeffs))
}
