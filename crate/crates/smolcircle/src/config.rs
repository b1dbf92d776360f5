//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, keys are unique and must be
//! known. List values are comma separated. The file must declare
//! `schema_version = 1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use smolcircle_core::kernels::{
    DerivedCoefficients, DiffusivitySpec, KernelSpec, PhiFamily, SymmetricTable, Tabulated,
};
use smolcircle_core::local_time::TailMode;
use smolcircle_core::massflow::{CoagIntegrator, SolverOptions, Splitting};
use smolcircle_core::measures::{MassGrid, MassGridKind};
use smolcircle_core::particle::{InitialProfile, RescaledMassLaw, SpatialDensity, StepParams};

use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Mc,
    Pde,
    Picard,
    Compare,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Mc => "mc",
            Mode::Pde => "pde",
            Mode::Picard => "picard",
            Mode::Compare => "compare",
            Mode::Sweep => "sweep",
        }
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Ok(match s {
            "mc" => Mode::Mc,
            "pde" => Mode::Pde,
            "picard" => Mode::Picard,
            "compare" => Mode::Compare,
            "sweep" => Mode::Sweep,
            other => return Err(config_err(format!("unknown mode {other:?}"))),
        })
    }
}

/// Number of mass bins of the PDE grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinCount {
    /// Sized by a pilot solve to hold 99.9% of the final mass.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeConfig {
    pub cells: usize,
    pub bins: BinCount,
    pub grid: MassGridKind,
    pub options: SolverOptions,
    pub pilot_cells: usize,
    pub pilot_bins: usize,
    /// Smallest representative of the geometric grid.
    pub m_min: f64,
}

impl PdeConfig {
    pub fn grid_with(&self, bins: usize) -> Result<MassGrid, HarnessError> {
        let grid = match self.grid {
            MassGridKind::Integer => MassGrid::integer(bins),
            MassGridKind::Geometric { ratio } => MassGrid::geometric(self.m_min, ratio, bins),
        };
        grid.map_err(|e| config_err(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardConfig {
    pub truncations: Vec<usize>,
    pub bins: usize,
    pub total_mass: f64,
    pub options: SolverOptions,
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub kernel: KernelSpec,
    pub diffusivity: DiffusivitySpec,
    pub initial: InitialProfile,
    pub n: usize,
    pub n_list: Vec<usize>,
    pub t_final: f64,
    pub dt: f64,
    pub replicas: usize,
    pub seed: u64,
    pub replica_seed_stride: u64,
    pub n_seed_stride: u64,
    pub tail_mode: TailMode,
    pub window: Option<f64>,
    pub snapshot_times: Vec<f64>,
    pub pde: PdeConfig,
    pub picard: PicardConfig,
    pub threads: Option<usize>,
    canonical: String,
}

const KEYS: &[&str] = &[
    "schema_version",
    "kernel",
    "kernel.rate",
    "kernel.scale",
    "kernel.alpha",
    "kernel.masses",
    "kernel.values",
    "kernel.p",
    "kernel.c",
    "diffusivity",
    "diffusivity.a0",
    "diffusivity.beta",
    "diffusivity.masses",
    "diffusivity.values",
    "initial",
    "density",
    "density.lo",
    "density.hi",
    "density.amplitude",
    "density.mode",
    "density.values",
    "masses",
    "masses.mean",
    "masses.values",
    "masses.weights",
    "n",
    "n_list",
    "t_final",
    "dt",
    "replicas",
    "seed",
    "seed.replica_stride",
    "seed.n_stride",
    "tail_mode",
    "window",
    "snapshot_times",
    "threads",
    "pde.cells",
    "pde.bins",
    "pde.grid",
    "pde.ratio",
    "pde.dt",
    "pde.splitting",
    "pde.integrator",
    "pde.clip",
    "pde.clip_budget",
    "pde.pilot_cells",
    "pde.pilot_bins",
    "pde.m_min",
    "picard.n",
    "picard.bins",
    "picard.total_mass",
    "picard.dt",
    "picard.tol",
    "picard.max_iter",
];

pub(crate) fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

/// Parses `key = value` lines into a map, rejecting duplicates and unknown keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_err(format!("line {}: expected `key = value`", lineno + 1)));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(config_err(format!("line {}: unknown key {key:?}", lineno + 1)));
        }
        if value.is_empty() {
            return Err(config_err(format!("line {}: empty value for {key}", lineno + 1)));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(config_err(format!("line {}: duplicate key {key}", lineno + 1)));
        }
    }
    Ok(map)
}

struct Fields {
    map: BTreeMap<String, String>,
}

impl Fields {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, HarnessError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| config_err(format!("cannot parse {key} = {v:?}"))),
        }
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, HarnessError> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T, HarnessError> {
        self.parse(key)?.ok_or_else(|| config_err(format!("missing key {key}")))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, HarnessError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| config_err(format!("cannot parse {key} entry {s:?}")))
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }

    fn require_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, HarnessError> {
        self.list(key)?.ok_or_else(|| config_err(format!("missing key {key}")))
    }
}

fn core_err(context: &str) -> impl Fn(smolcircle_core::Error) -> HarnessError + '_ {
    move |e| config_err(format!("{context}: {e}"))
}

impl RunConfig {
    /// Parses and validates `text` for `mode`. `seed` overrides the file's seed.
    pub fn parse(mode: Mode, text: &str, seed: Option<u64>) -> Result<Self, HarnessError> {
        let mut map = parse_pairs(text)?;
        if let Some(s) = seed {
            map.insert("seed".into(), s.to_string());
        }
        let f = Fields { map };
        let version: u32 = f.require("schema_version")?;
        if version != SCHEMA_VERSION {
            return Err(config_err(format!("unsupported schema_version {version}")));
        }

        let kernel = parse_kernel(&f)?;
        let diffusivity = parse_diffusivity(&f)?;
        let initial = parse_initial(&f)?;

        let t_final: f64 = f.require("t_final")?;
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(config_err("t_final must be positive"));
        }
        let snapshot_times = f.list("snapshot_times")?.unwrap_or_else(|| vec![t_final]);
        if snapshot_times.windows(2).any(|w| w[1] <= w[0])
            || snapshot_times.iter().any(|t| !(*t >= 0.0 && *t <= t_final))
        {
            return Err(config_err("snapshot_times must be increasing and lie in [0, t_final]"));
        }

        let particle_mode = matches!(mode, Mode::Mc | Mode::Compare | Mode::Sweep);
        let dt: f64 = if particle_mode { f.require("dt")? } else { f.get("dt", 1e-3)? };
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(config_err("dt must be positive"));
        }
        let n: usize = if matches!(mode, Mode::Mc | Mode::Compare) { f.require("n")? } else { f.get("n", 2)? };
        if n < 2 {
            return Err(config_err("n must be at least 2"));
        }
        let n_list: Vec<usize> = if mode == Mode::Sweep { f.require_list("n_list")? } else { Vec::new() };
        if mode == Mode::Sweep {
            if n_list.len() < 3 {
                return Err(config_err("n_list needs at least three values"));
            }
            if n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] < 2 {
                return Err(config_err("n_list must be strictly increasing and start at 2 or more"));
            }
        }
        let replicas: usize = f.get("replicas", 1)?;
        if replicas == 0 {
            return Err(config_err("replicas must be positive"));
        }
        let seed_value: u64 = f.get("seed", 0)?;
        let replica_seed_stride: u64 = f.get("seed.replica_stride", 1)?;
        let n_seed_stride: u64 = f.get("seed.n_stride", 1_000_003)?;

        let tail_mode = match f.raw("tail_mode").unwrap_or("truncate") {
            "truncate" => TailMode::Truncate,
            "gaussian_tail" => TailMode::GaussianTail,
            other => return Err(config_err(format!("unknown tail_mode {other:?}"))),
        };
        let window: Option<f64> = f.parse("window")?;

        let pde = parse_pde(&f)?;
        let picard = parse_picard(&f, &pde)?;
        let threads: Option<usize> = f.parse("threads")?;
        if threads == Some(0) {
            return Err(config_err("threads must be positive"));
        }

        let mut canonical = String::new();
        for (k, v) in &f.map {
            let _ = writeln!(canonical, "{k}={v}");
        }
        let cfg = Self {
            mode,
            kernel,
            diffusivity,
            initial,
            n,
            n_list,
            t_final,
            dt,
            replicas,
            seed: seed_value,
            replica_seed_stride,
            n_seed_stride,
            tail_mode,
            window,
            snapshot_times,
            pde,
            picard,
            threads,
            canonical,
        };
        cfg.check_mode_requirements()?;
        Ok(cfg)
    }

    fn check_mode_requirements(&self) -> Result<(), HarnessError> {
        let seeds = self.all_seeds();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err("replica seeds collide; adjust seed.replica_stride or seed.n_stride"));
        }
        if matches!(self.mode, Mode::Mc | Mode::Compare | Mode::Sweep) {
            let sizes = if self.mode == Mode::Sweep { self.n_list.clone() } else { vec![self.n] };
            for n in sizes {
                let params = self.step_params(n);
                if !(params.interaction_window > 0.0 && params.interaction_window < 0.5) {
                    return Err(config_err("window must lie in (0, 1/2)"));
                }
                if params.tail_mode == TailMode::Truncate {
                    let spread = 3.0 * (2.0 * self.max_diffusivity(n) * self.dt).sqrt();
                    if params.interaction_window <= spread {
                        return Err(config_err(format!(
                            "window {} must exceed three pair standard deviations ({spread}); lower dt",
                            params.interaction_window
                        )));
                    }
                }
            }
        }
        if self.mode == Mode::Picard {
            if self.initial.density() != &SpatialDensity::Uniform {
                return Err(config_err("picard mode needs a spatially uniform density"));
            }
            if self.pde.grid != MassGridKind::Integer {
                return Err(config_err("picard mode runs on the integer mass grid"));
            }
            if self.picard.truncations.iter().any(|n| *n == 0 || *n > self.picard.bins) {
                return Err(config_err("picard.n entries must lie in 1..=picard.bins"));
            }
        }
        if matches!(self.mode, Mode::Pde | Mode::Compare | Mode::Sweep) && !self.pde.cells.is_power_of_two() {
            return Err(config_err("pde.cells must be a power of two"));
        }
        Ok(())
    }

    pub fn coefficients(&self) -> DerivedCoefficients {
        DerivedCoefficients::new(self.kernel.clone(), self.diffusivity.clone())
    }

    /// Seed of replica `r` at particle-count index `k`.
    pub fn replica_seed(&self, k: usize, r: usize) -> u64 {
        self.seed
            .wrapping_add((k as u64).wrapping_mul(self.n_seed_stride))
            .wrapping_add((r as u64).wrapping_mul(self.replica_seed_stride))
    }

    fn all_seeds(&self) -> Vec<u64> {
        let sizes = if self.mode == Mode::Sweep { self.n_list.len() } else { 1 };
        (0..sizes).flat_map(|k| (0..self.replicas).map(move |r| (k, r))).map(|(k, r)| self.replica_seed(k, r)).collect()
    }

    /// Largest diffusivity any particle can have: masses only grow, so the
    /// smallest initial rescaled mass bounds it.
    pub fn max_diffusivity(&self, _n: usize) -> f64 {
        let smallest = match &self.initial {
            InitialProfile::Monodisperse(_) => 1.0,
            // exponential masses reach any small value; below 1e-3 a particle
            // is rare enough that the per-step window check catches it
            InitialProfile::ProductMeasure { masses: RescaledMassLaw::Exponential { .. }, .. } => 1e-3,
            InitialProfile::ProductMeasure { masses: RescaledMassLaw::Discrete { values, weights }, .. } => {
                let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>()
                    / weights.iter().sum::<f64>();
                // the sample mean replaces the true one; halve for slack
                values.iter().zip(weights).filter(|(_, w)| **w > 0.0).map(|(v, _)| v / mean).fold(f64::INFINITY, f64::min)
                    * 0.5
            }
        };
        self.diffusivity.eval(smallest)
    }

    pub fn step_params(&self, n: usize) -> StepParams {
        let mut p = StepParams::with_default_window(self.dt, self.max_diffusivity(n));
        p.tail_mode = self.tail_mode;
        if let Some(w) = self.window {
            p.interaction_window = w;
        }
        p
    }

    /// SHA-256 of the sorted effective key/value pairs.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical.as_bytes()))
    }
}

fn parse_kernel(f: &Fields) -> Result<KernelSpec, HarnessError> {
    let family: String = f.require("kernel")?;
    let spec = match family.as_str() {
        "constant" => KernelSpec::constant(f.require("kernel.rate")?),
        "power_sum" => KernelSpec::power_sum(f.require("kernel.scale")?, f.require("kernel.alpha")?),
        "table" => {
            let masses: Vec<f64> = f.require_list("kernel.masses")?;
            let values: Vec<f64> = f.require_list("kernel.values")?;
            let table = SymmetricTable::new(&masses, &values).map_err(core_err("kernel table"))?;
            KernelSpec::new(PhiFamily::Custom(table), f.require("kernel.p")?, f.require("kernel.c")?)
        }
        other => return Err(config_err(format!("unknown kernel family {other:?}"))),
    };
    spec.map_err(core_err("kernel"))
}

fn parse_diffusivity(f: &Fields) -> Result<DiffusivitySpec, HarnessError> {
    let family: String = f.require("diffusivity")?;
    let spec = match family.as_str() {
        "constant" => DiffusivitySpec::constant(f.require("diffusivity.a0")?),
        "power_law" => DiffusivitySpec::power_law(f.require("diffusivity.beta")?),
        "table" => {
            let masses: Vec<f64> = f.require_list("diffusivity.masses")?;
            let values: Vec<f64> = f.require_list("diffusivity.values")?;
            let table = Tabulated::new(&masses, &values).map_err(core_err("diffusivity table"))?;
            DiffusivitySpec::custom(table)
        }
        other => return Err(config_err(format!("unknown diffusivity family {other:?}"))),
    };
    spec.map_err(core_err("diffusivity"))
}

fn parse_initial(f: &Fields) -> Result<InitialProfile, HarnessError> {
    let density = match f.raw("density").unwrap_or("uniform") {
        "uniform" => SpatialDensity::Uniform,
        "indicator" => {
            let (lo, hi): (f64, f64) = (f.require("density.lo")?, f.require("density.hi")?);
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(config_err("indicator density needs 0 <= lo < hi <= 1"));
            }
            SpatialDensity::Indicator { lo, hi }
        }
        "cosine" => {
            let amplitude: f64 = f.require("density.amplitude")?;
            if !(amplitude.abs() <= 1.0) {
                return Err(config_err("cosine density needs |amplitude| <= 1"));
            }
            SpatialDensity::Cosine { amplitude, mode: f.get("density.mode", 1)? }
        }
        "table" => SpatialDensity::Tabulated(f.require_list("density.values")?),
        other => return Err(config_err(format!("unknown density {other:?}"))),
    };
    smolcircle_core::particle::PositionSampler::new(&density).map_err(core_err("density"))?;
    match f.raw("initial").unwrap_or("monodisperse") {
        "monodisperse" => Ok(InitialProfile::Monodisperse(density)),
        "product" => {
            let masses = match f.raw("masses").unwrap_or("exponential") {
                "exponential" => {
                    let mean: f64 = f.get("masses.mean", 1.0)?;
                    if !(mean > 0.0 && mean.is_finite()) {
                        return Err(config_err("masses.mean must be positive"));
                    }
                    RescaledMassLaw::Exponential { mean }
                }
                "discrete" => {
                    let values: Vec<f64> = f.require_list("masses.values")?;
                    let weights: Vec<f64> = f.require_list("masses.weights")?;
                    if values.len() != weights.len()
                        || values.iter().any(|v| !(*v > 0.0 && v.is_finite()))
                        || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite()))
                        || !(weights.iter().sum::<f64>() > 0.0)
                    {
                        return Err(config_err("discrete masses need positive values and nonnegative weights of equal length"));
                    }
                    RescaledMassLaw::Discrete { values, weights }
                }
                other => return Err(config_err(format!("unknown mass law {other:?}"))),
            };
            Ok(InitialProfile::ProductMeasure { density, masses })
        }
        other => Err(config_err(format!("unknown initial profile {other:?}"))),
    }
}

fn parse_options(f: &Fields, dt_key: &str, default_dt: f64) -> Result<SolverOptions, HarnessError> {
    let mut o = SolverOptions::new(f.get(dt_key, default_dt)?);
    o.splitting = match f.raw("pde.splitting").unwrap_or("strang") {
        "strang" => Splitting::Strang,
        "lie" => Splitting::Lie,
        other => return Err(config_err(format!("unknown splitting {other:?}"))),
    };
    o.coag_integrator = match f.raw("pde.integrator").unwrap_or("rk2") {
        "rk2" => CoagIntegrator::Rk2,
        "euler" => CoagIntegrator::Euler,
        other => return Err(config_err(format!("unknown integrator {other:?}"))),
    };
    o.positivity_clip = f.get("pde.clip", true)?;
    o.clip_budget = f.get("pde.clip_budget", o.clip_budget)?;
    o.picard_tol = f.get("picard.tol", o.picard_tol)?;
    o.picard_max_iter = f.get("picard.max_iter", o.picard_max_iter)?;
    o.validate().map_err(core_err("solver options"))?;
    Ok(o)
}

fn parse_pde(f: &Fields) -> Result<PdeConfig, HarnessError> {
    let cells: usize = f.get("pde.cells", 256)?;
    let bins = match f.raw("pde.bins").unwrap_or("auto") {
        "auto" => BinCount::Auto,
        v => BinCount::Fixed(v.parse().map_err(|_| config_err(format!("cannot parse pde.bins = {v:?}")))?),
    };
    if bins == BinCount::Fixed(0) || cells == 0 {
        return Err(config_err("pde.cells and pde.bins must be positive"));
    }
    let grid = match f.raw("pde.grid").unwrap_or("integer") {
        "integer" => MassGridKind::Integer,
        "geometric" => {
            let ratio: f64 = f.get("pde.ratio", 2f64.powf(0.25))?;
            if !(ratio > 1.0 && ratio.is_finite()) {
                return Err(config_err("pde.ratio must exceed one"));
            }
            MassGridKind::Geometric { ratio }
        }
        other => return Err(config_err(format!("unknown mass grid {other:?}"))),
    };
    let pilot_cells: usize = f.get("pde.pilot_cells", 16)?;
    if !pilot_cells.is_power_of_two() {
        return Err(config_err("pde.pilot_cells must be a power of two"));
    }
    let pilot_bins: usize = f.get("pde.pilot_bins", 256)?;
    if pilot_bins < 2 {
        return Err(config_err("pde.pilot_bins must be at least 2"));
    }
    let m_min: f64 = f.get("pde.m_min", 0.05)?;
    if !(m_min > 0.0 && m_min.is_finite()) {
        return Err(config_err("pde.m_min must be positive"));
    }
    Ok(PdeConfig { cells, bins, grid, options: parse_options(f, "pde.dt", 1e-3)?, pilot_cells, pilot_bins, m_min })
}

fn parse_picard(f: &Fields, pde: &PdeConfig) -> Result<PicardConfig, HarnessError> {
    let truncations: Vec<usize> = f.list("picard.n")?.unwrap_or_else(|| vec![2, 4, 8]);
    let default_bins = match pde.bins {
        BinCount::Fixed(b) => b,
        BinCount::Auto => 32,
    };
    let bins: usize = f.get("picard.bins", default_bins)?;
    let total_mass: f64 = f.get("picard.total_mass", 1.0)?;
    if !(total_mass > 0.0 && total_mass.is_finite()) {
        return Err(config_err("picard.total_mass must be positive"));
    }
    let pde_dt = pde.options.dt;
    Ok(PicardConfig { truncations, bins, total_mass, options: parse_options(f, "picard.dt", pde_dt)? })
}
