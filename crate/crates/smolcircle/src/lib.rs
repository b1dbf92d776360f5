//! Experiment harness for the Brownian coagulation simulator: configuration,
//! replica scheduling, PDE references, weak distances and report writing.

pub mod config;
pub mod harness;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use smolcircle_core::local_time::TailMode;
use smolcircle_core::measures::TestFamily;

use config::{Mode, RunConfig};
use harness::{PicardLadder, Reference, SweepSummary};
use output::FieldSidecar;

/// Exit code for invalid configurations or arguments.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for numerical aborts (positivity budget, Picard divergence).
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit code for I/O failures.
pub const EXIT_IO: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Positivity and convergence failures are numerical aborts; everything
    /// else the core rejects traces back to the configuration.
    pub fn from_core(e: smolcircle_core::Error) -> Self {
        match e {
            smolcircle_core::Error::PositivityBudget { .. } | smolcircle_core::Error::NoConvergence { .. } => {
                HarnessError::Numerical(e.to_string())
            }
            other => HarnessError::Config(other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => EXIT_CONFIG,
            HarnessError::Numerical(_) => EXIT_NUMERICAL,
            HarnessError::Io(_) | HarnessError::Json(_) => EXIT_IO,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Mc,
    Pde,
    Picard,
    Compare,
    Sweep,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Mc => Mode::Mc,
            ModeArg::Pde => Mode::Pde,
            ModeArg::Picard => Mode::Picard,
            ModeArg::Compare => Mode::Compare,
            ModeArg::Sweep => Mode::Sweep,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "smolcircle", version, about = "Brownian coagulation on the circle: particles, mass-flow PDE and their distance")]
struct Cli {
    #[arg(value_enum)]
    mode: ModeArg,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the base seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replicas; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

/// Parses `argv`, runs the requested mode and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.mode.into(), &cli.config, &cli.out, cli.seed, cli.threads) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("smolcircle: {e}");
            e.exit_code()
        }
    }
}

/// Loads and validates the configuration, runs `mode` and writes its outputs
/// into `out`. Nothing is written unless the whole run succeeds.
pub fn run(mode: Mode, config: &Path, out: &Path, seed: Option<u64>, threads: Option<usize>) -> Result<(), HarnessError> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", config.display())))?;
    let cfg = RunConfig::parse(mode, &text, seed)?;
    let threads = threads.or(cfg.threads);
    if threads == Some(0) {
        return Err(HarnessError::Config("threads must be positive".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let artifacts = match mode {
        Mode::Mc => run_mc(&cfg, &pool)?,
        Mode::Pde => run_pde(&cfg)?,
        Mode::Picard => run_picard(&cfg)?,
        Mode::Compare => run_compare(&cfg, &pool)?,
        Mode::Sweep => run_sweep(&cfg, &pool)?,
    };
    let elapsed = start.elapsed().as_secs_f64();
    std::fs::create_dir_all(out)?;
    artifacts.write(out)?;
    // wall-clock time varies between runs, so it stays out of report.json
    output::write_json(&out.join("timing.json"), &Timing { mode: mode.name(), wall_seconds: elapsed })?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Timing {
    mode: &'static str,
    wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotReport {
    pub time: f64,
    pub total_mass: f64,
    pub second_moment: f64,
    pub alive: usize,
    pub events: usize,
    pub omega_proxy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicaReport {
    pub replica: usize,
    pub seed: u64,
    pub steps: u64,
    pub events: usize,
    pub max_mass_error: f64,
    pub second_moment_decreases: usize,
    pub discarded_candidates: usize,
    pub snapshots: Vec<SnapshotReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParticleReport {
    pub n: usize,
    pub dt: f64,
    pub interaction_window: f64,
    pub tail_mode: &'static str,
    pub replicas: Vec<ReplicaReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PdeSnapshotReport {
    pub time: f64,
    pub total: f64,
    pub omega_proxy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PdeReport {
    pub cells: usize,
    pub bins: usize,
    pub pilot_bins: Option<usize>,
    pub dt: f64,
    pub steps: usize,
    pub mass_drift: f64,
    pub clipped_mass: f64,
    pub snapshots: Vec<PdeSnapshotReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub n: usize,
    pub times: Vec<f64>,
    pub mean_rho: Vec<f64>,
    pub stderr_rho: Vec<f64>,
    /// `per_replica[r][t]`.
    pub per_replica: Vec<Vec<f64>>,
}

/// Everything written to `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub mode: &'static str,
    pub config_hash: String,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<ParticleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardLadder>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSummary>,
}

impl RunReport {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            schema_version: config::SCHEMA_VERSION,
            mode: cfg.mode.name(),
            config_hash: cfg.hash(),
            t_final: cfg.t_final,
            snapshot_times: cfg.snapshot_times.clone(),
            particles: None,
            pde: None,
            picard: None,
            compare: None,
            sweep: None,
        }
    }
}

/// Outputs held in memory until the run has finished.
struct Artifacts {
    report: RunReport,
    writers: Vec<Box<dyn FnOnce(&Path) -> Result<(), HarnessError>>>,
}

impl Artifacts {
    fn new(report: RunReport) -> Self {
        Self { report, writers: Vec::new() }
    }

    fn add(&mut self, f: impl FnOnce(&Path) -> Result<(), HarnessError> + 'static) {
        self.writers.push(Box::new(f));
    }

    fn write(self, out: &Path) -> Result<(), HarnessError> {
        for w in self.writers {
            w(out)?;
        }
        output::write_json(&out.join("report.json"), &self.report)
    }
}

fn tail_name(t: TailMode) -> &'static str {
    match t {
        TailMode::Truncate => "truncate",
        TailMode::GaussianTail => "gaussian_tail",
    }
}

fn run_mc(cfg: &RunConfig, pool: &rayon::ThreadPool) -> Result<Artifacts, HarnessError> {
    let coeffs = cfg.coefficients();
    let proxy_bins = match cfg.pde.bins {
        config::BinCount::Fixed(b) => b,
        config::BinCount::Auto => cfg.pde.pilot_bins,
    };
    let proxy_grid = cfg.pde.grid_with(proxy_bins)?;
    let runs = harness::map_replicas(pool, cfg, 0, |r, seed| {
        let run = harness::run_replica(cfg, &coeffs, cfg.n, seed)?;
        let snapshots = run
            .stats
            .snapshots
            .iter()
            .zip(&run.snapshots)
            .map(|(s, emp)| {
                Ok(SnapshotReport {
                    time: s.time,
                    total_mass: s.total_mass,
                    second_moment: s.second_moment,
                    alive: s.alive,
                    events: s.events,
                    omega_proxy: harness::particle_omega_proxy(emp, cfg.pde.cells, &proxy_grid, &coeffs)?,
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let report = ReplicaReport {
            replica: r,
            seed,
            steps: run.stats.steps,
            events: run.events.len(),
            max_mass_error: run.stats.max_mass_error,
            second_moment_decreases: run.stats.second_moment_decreases,
            discarded_candidates: run.stats.discarded_candidates,
            snapshots,
        };
        Ok((report, run))
    })?;
    let params = cfg.step_params(cfg.n);
    let mut report = RunReport::new(cfg);
    let mut artifacts_runs = Vec::new();
    let mut replicas = Vec::new();
    for (rep, run) in runs {
        replicas.push(rep);
        artifacts_runs.push(run);
    }
    report.particles = Some(ParticleReport {
        n: cfg.n,
        dt: cfg.dt,
        interaction_window: params.interaction_window,
        tail_mode: tail_name(params.tail_mode),
        replicas,
    });
    let mut art = Artifacts::new(report);
    let times: Vec<f64> = cfg.snapshot_times.clone();
    art.add(move |out| {
        for (r, run) in artifacts_runs.iter().enumerate() {
            let dir = out.join(format!("replica_{r:03}"));
            std::fs::create_dir_all(&dir)?;
            output::write_events(&dir.join("events.csv"), &run.events)?;
            let snap_times: Vec<f64> = run.stats.snapshots.iter().map(|s| s.time).collect();
            debug_assert_eq!(snap_times.len(), times.len());
            output::write_snapshots(&dir.join("snapshots.csv"), &snap_times, &run.snapshots)?;
        }
        Ok(())
    });
    Ok(art)
}

fn pde_report(cfg: &RunConfig, reference: &Reference) -> PdeReport {
    let out = &reference.output;
    PdeReport {
        cells: cfg.pde.cells,
        bins: reference.grid.len(),
        pilot_bins: reference.pilot_bins,
        dt: out.dt,
        steps: out.steps,
        mass_drift: out.mass_drift,
        clipped_mass: out.clipped_mass,
        snapshots: out
            .snapshots
            .iter()
            .zip(&out.omega_proxy)
            .map(|(s, p)| PdeSnapshotReport { time: s.time, total: s.total(), omega_proxy: *p })
            .collect(),
    }
}

fn add_fields(art: &mut Artifacts, cfg: &RunConfig, reference: Reference) {
    let opts = cfg.pde.options;
    art.add(move |out| {
        let o = &reference.output;
        for (k, snap) in o.snapshots.iter().enumerate() {
            let sidecar = FieldSidecar {
                time: snap.time,
                cells: 0,
                bins: 0,
                mass_grid: "",
                ratio: None,
                reps: Vec::new(),
                total: snap.total(),
                dt: o.dt,
                splitting: format!("{:?}", opts.splitting).to_lowercase(),
                integrator: format!("{:?}", opts.coag_integrator).to_lowercase(),
                clip_budget: if opts.positivity_clip { opts.clip_budget } else { 0.0 },
                clipped_mass: o.clipped_mass,
            };
            output::write_field(
                &out.join(format!("field_{k:03}.csv")),
                &out.join(format!("field_{k:03}.json")),
                &snap.measure,
                sidecar,
            )?;
        }
        Ok(())
    });
}

fn run_pde(cfg: &RunConfig) -> Result<Artifacts, HarnessError> {
    let coeffs = cfg.coefficients();
    let reference = harness::reference_solution(cfg, &coeffs)?;
    let mut report = RunReport::new(cfg);
    report.pde = Some(pde_report(cfg, &reference));
    let mut art = Artifacts::new(report);
    add_fields(&mut art, cfg, reference);
    Ok(art)
}

fn run_picard(cfg: &RunConfig) -> Result<Artifacts, HarnessError> {
    let coeffs = cfg.coefficients();
    let (ladder, outs) = harness::picard_ladder(cfg, &coeffs)?;
    let mut report = RunReport::new(cfg);
    report.picard = Some(ladder);
    let mut art = Artifacts::new(report);
    art.add(move |out| {
        for o in &outs {
            let mut rows = Vec::new();
            for i in 0..o.times.len() {
                for (b, (v, r)) in o.at(i).iter().zip(o.reference_at(i)).enumerate() {
                    rows.push(vec![o.times[i].to_string(), b.to_string(), (b + 1).to_string(), v.to_string(), r.to_string()]);
                }
            }
            output::write_rows(
                &out.join(format!("picard_n{}.csv", o.n)),
                "time,bin_index,m_rep,fixed_point,reference",
                &rows,
            )?;
        }
        Ok(())
    });
    Ok(art)
}

fn run_compare(cfg: &RunConfig, pool: &rayon::ThreadPool) -> Result<Artifacts, HarnessError> {
    let coeffs = cfg.coefficients();
    let reference = harness::reference_solution(cfg, &coeffs)?;
    let family = TestFamily::default();
    let ref_pairings = harness::reference_pairings(&reference, &family);
    let per_replica = harness::map_replicas(pool, cfg, 0, |_, seed| {
        let run = harness::run_replica(cfg, &coeffs, cfg.n, seed)?;
        harness::rho_to_reference(&run, &reference, &ref_pairings, &family)
    })?;
    let times = cfg.snapshot_times.clone();
    let (mut mean_rho, mut stderr_rho) = (Vec::new(), Vec::new());
    for t in 0..times.len() {
        let col: Vec<f64> = per_replica.iter().map(|r| r[t]).collect();
        let (m, s) = harness::mean_stderr(&col);
        mean_rho.push(m);
        stderr_rho.push(s);
    }
    let mut report = RunReport::new(cfg);
    report.pde = Some(pde_report(cfg, &reference));
    report.compare = Some(CompareReport { n: cfg.n, times, mean_rho, stderr_rho, per_replica });
    let mut art = Artifacts::new(report);
    add_fields(&mut art, cfg, reference);
    Ok(art)
}

fn run_sweep(cfg: &RunConfig, pool: &rayon::ThreadPool) -> Result<Artifacts, HarnessError> {
    let coeffs = cfg.coefficients();
    let reference = harness::reference_solution(cfg, &coeffs)?;
    let summary = harness::convergence_sweep(cfg, &coeffs, &reference, pool)?;
    let rows: Vec<Vec<String>> = summary
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), r.mean_rho.to_string(), r.stderr.to_string()])
        .collect();
    let mut report = RunReport::new(cfg);
    report.pde = Some(pde_report(cfg, &reference));
    report.sweep = Some(summary);
    let mut art = Artifacts::new(report);
    art.add(move |out| output::write_rows(&out.join("sweep.csv"), "n,mean_rho,stderr", &rows));
    add_fields(&mut art, cfg, reference);
    Ok(art)
}
