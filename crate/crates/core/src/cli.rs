//! Command-line front end.
//!
//! Exit status: 0 success, 1 domain rejection (zone, graph, root,
//! certificate, non-convergence), 2 usage, 3 I/O, 4 divergence.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{self, build_certificate, epsilon_margin, gain_zone_check, lyapunov_series, sync_metrics};
use crate::dynamics::DynamicsError;
use crate::graph::GraphError;
use crate::io::{self, ConfigFile, FormatError, MetricsRecord, MetricsSummary, RunManifest};
use crate::sim::{self, build_case, Case, Coupling, SimConfig, SimError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

/// Grid resolution for `zone --grid`.
pub const GRID_POINTS: usize = 200;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Divergence(_) => EXIT_DIVERGENCE,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Divergence { .. } => CliError::Divergence(e.to_string()),
            SimError::Config(_) => CliError::Usage(e.to_string()),
            SimError::Graph(_) | SimError::Dynamics(_) => CliError::Domain(e.to_string()),
        }
    }
}

impl From<analysis::AnalysisError> for CliError {
    fn from(e: analysis::AnalysisError) -> Self {
        match e {
            analysis::AnalysisError::Graph(g) => g.into(),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::Domain(e.to_string())
    }
}

fn format_err(e: FormatError) -> CliError {
    match e {
        FormatError::Graph(g) => g.into(),
        FormatError::Io(io) => CliError::Io(io.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "satsync", version, about = "Synchronization of saturated double-integrator networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check whether (k1, k2) lies in the solvable gain zone.
    Zone(ZoneArgs),
    /// Build and export the Lyapunov certificate for a configuration.
    Certify(CertifyArgs),
    /// Simulate one run and write trajectory, metrics and manifest.
    Simulate(SimulateArgs),
    /// Run a reference case over seeds 1..=10 and write disagreement curves.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct ZoneArgs {
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    /// Accept the boundary pair (1, 2).
    #[arg(long)]
    pub allow_boundary: bool,
    /// Emit a CSV sampling of the zone over (0,1)x(0,3).
    #[arg(long)]
    pub grid: bool,
    /// Write the grid here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Source {
    /// JSON configuration file.
    #[arg(long, conflicts_with = "case")]
    pub config: Option<PathBuf>,
    /// Reference case I, II or III.
    #[arg(long)]
    pub case: Option<Case>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// JSON configuration file (alternative to --config).
    #[arg(conflicts_with_all = ["config", "case"])]
    pub path: Option<PathBuf>,
    #[command(flatten)]
    pub source: Source,
    /// Certificate JSON destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: Source,
    /// Override the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also evaluate and write the Lyapunov series (full-state runs).
    #[arg(long)]
    pub record_lyapunov: bool,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    pub case: Case,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Number of seeds, run as 1..=seeds.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Zone(a) => cmd_zone(&a, stdout),
        Command::Certify(a) => cmd_certify(&a, stdout),
        Command::Simulate(a) => cmd_simulate(&a, stdout),
        Command::Reproduce(a) => cmd_reproduce(&a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_source(source: &Source, path: Option<&PathBuf>) -> Result<SimConfig, CliError> {
    if let Some(p) = path.or(source.config.as_ref()) {
        let bytes = fs::read(p).map_err(|e| io_err(p, e))?;
        let file = ConfigFile::parse(&bytes).map_err(format_err)?;
        return file.resolve().map_err(format_err);
    }
    match source.case {
        Some(c) => Ok(build_case(c)),
        None => Err(CliError::Usage("provide a configuration file or --case".into())),
    }
}

pub fn cmd_zone(a: &ZoneArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let w = |e: std::io::Error| CliError::Io(e.to_string());
    if a.grid {
        let mut sink: Box<dyn Write> = match &a.out {
            Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(|e| io_err(p, e))?)),
            None => Box::new(&mut *stdout),
        };
        write_zone_grid(&mut sink, a.allow_boundary).map_err(w)?;
        sink.flush().map_err(w)?;
        drop(sink);
        if a.k1.is_none() {
            return Ok(EXIT_OK);
        }
    }
    let (k1, k2) = match (a.k1, a.k2) {
        (Some(k1), Some(k2)) => (k1, k2),
        _ => return Err(CliError::Usage("zone needs K1 and K2 (or --grid)".into())),
    };
    if gain_zone_check(k1, k2, false) {
        let eps = epsilon_margin(k1, k2)?;
        writeln!(stdout, "inside, epsilon={eps}").map_err(w)?;
        Ok(EXIT_OK)
    } else if gain_zone_check(k1, k2, a.allow_boundary) {
        writeln!(stdout, "boundary pair accepted").map_err(w)?;
        Ok(EXIT_OK)
    } else {
        writeln!(stdout, "outside").map_err(w)?;
        Ok(EXIT_DOMAIN)
    }
}

/// `k1,k2,inside` over cell centres of a 200×200 grid on (0,1)×(0,3).
pub fn write_zone_grid(w: &mut dyn Write, allow_boundary: bool) -> std::io::Result<()> {
    writeln!(w, "k1,k2,inside")?;
    for i in 0..GRID_POINTS {
        let k1 = (i as f64 + 0.5) / GRID_POINTS as f64;
        for j in 0..GRID_POINTS {
            let k2 = 3.0 * (j as f64 + 0.5) / GRID_POINTS as f64;
            let inside = gain_zone_check(k1, k2, allow_boundary) as u8;
            writeln!(w, "{k1},{k2},{inside}")?;
        }
    }
    Ok(())
}

pub fn cmd_certify(a: &CertifyArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = load_source(&a.source, a.path.as_ref())?;
    let analysis = cfg.graph.analyze();
    analysis.require_root(cfg.theta)?;
    let cert = build_certificate(&cfg.graph, cfg.theta, Some(&cfg.din_bounds), cfg.gains.k1, cfg.gains.k2, cfg.n)?;
    let report = cert.report(&cfg.graph);
    let json = serde_json::to_string_pretty(&report).expect("report serialisation cannot fail");
    match &a.out {
        Some(p) => fs::write(p, json + "\n").map_err(|e| io_err(p, e))?,
        None => writeln!(stdout, "{json}").map_err(|e| CliError::Io(e.to_string()))?,
    }
    Ok(if report.sound { EXIT_OK } else { EXIT_DOMAIN })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let started = Instant::now();
    let mut cfg = load_source(&a.source, None)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.record.states = true;
    cfg.record.inputs = true;
    if a.record_lyapunov {
        cfg.record.lyapunov = true;
    }
    if cfg.record.lyapunov {
        cfg.record.errors = true;
        if cfg.coupling != Coupling::Full {
            return Err(CliError::Domain("the Lyapunov series needs full-state coupling".into()));
        }
    }
    cfg.validate()?;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;

    let traj = sim::run(&cfg, &sim::sample_initials(&cfg))?;
    let metrics = sync_metrics(&traj, analysis::DEFAULT_THRESHOLD, analysis::DEFAULT_DWELL);
    let mut outputs = Vec::new();

    let traj_path = a.out.join("trajectory.csv");
    let f = fs::File::create(&traj_path).map_err(|e| io_err(&traj_path, e))?;
    io::write_trajectory_csv(&traj, BufWriter::new(f)).map_err(|e| io_err(&traj_path, e))?;
    outputs.push("trajectory.csv".to_string());

    let metrics_path = a.out.join("metrics.json");
    write_json(
        &metrics_path,
        &MetricsRecord {
            threshold: analysis::DEFAULT_THRESHOLD,
            dwell: analysis::DEFAULT_DWELL,
            metrics: metrics.clone(),
        },
    )?;
    outputs.push("metrics.json".to_string());

    let mut certificate = None;
    if cfg.record.lyapunov {
        let cert = build_certificate(&cfg.graph, cfg.theta, Some(&cfg.din_bounds), cfg.gains.k1, cfg.gains.k2, cfg.n)?;
        let series = lyapunov_series(&traj, &cert)?;
        let path = a.out.join("lyapunov.csv");
        let f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        io::write_lyapunov_csv(&series, BufWriter::new(f)).map_err(|e| io_err(&path, e))?;
        outputs.push("lyapunov.csv".to_string());
        certificate = Some(cert.report(&cfg.graph));
    }

    let manifest = RunManifest {
        tool_version: io::TOOL_VERSION.to_string(),
        config: ConfigFile::from_config(&cfg),
        certificate,
        metrics: MetricsSummary::from(&metrics),
        outputs,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&a.out.join("manifest.json"), &manifest)?;
    writeln!(
        stdout,
        "converged={} settling_step={} steps={}",
        metrics.converged,
        metrics.settling_step.map_or("none".to_string(), |s| s.to_string()),
        cfg.horizon
    )
    .map_err(|e| CliError::Io(e.to_string()))?;
    Ok(EXIT_OK)
}

/// Per-seed disagreement curve file name.
pub fn curve_name(seed: u64) -> String {
    format!("disagreement_seed{seed:02}.csv")
}

fn write_curve(path: &Path, seed: u64, curve: &[f64]) -> Result<(), CliError> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    let werr = |e: std::io::Error| io_err(path, e);
    writeln!(w, "seed,k,disagreement").map_err(werr)?;
    for (k, d) in curve.iter().enumerate() {
        writeln!(w, "{seed},{k},{}", io::fmt_f64(*d)).map_err(werr)?;
    }
    w.flush().map_err(werr)
}

/// Outcome of one reproduction seed.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub converged: bool,
    pub settling_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReproduceManifest {
    pub tool_version: String,
    pub case: String,
    pub config: ConfigFile,
    pub seeds: Vec<SeedSummary>,
    pub converged: usize,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub fn cmd_reproduce(a: &ReproduceArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let started = Instant::now();
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let mut base = build_case(a.case);
    base.record.states = false;
    base.record.inputs = false;
    base.record.errors = false;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;

    let seeds: Vec<u64> = (1..=a.seeds).collect();
    let out_dir = a.out.as_path();
    let runs: Vec<Result<(u64, analysis::SyncMetrics), CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let mut cfg = base.clone();
                cfg.seed = seed;
                scope.spawn(move || {
                    let traj = sim::run(&cfg, &sim::sample_initials(&cfg))?;
                    let m = sync_metrics(&traj, analysis::DEFAULT_THRESHOLD, analysis::DEFAULT_DWELL);
                    write_curve(&out_dir.join(curve_name(seed)), seed, &m.disagreement)?;
                    Ok((seed, m))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("seed worker panicked")).collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let summary: Vec<SeedSummary> = runs
        .iter()
        .map(|(seed, m)| SeedSummary {
            seed: *seed,
            converged: m.converged,
            settling_step: m.settling_step,
        })
        .collect();
    let table = a.out.join("summary.csv");
    let mut text = String::from("seed,converged,settling_step\n");
    for s in &summary {
        text += &format!(
            "{},{},{}\n",
            s.seed,
            s.converged,
            s.settling_step.map_or(String::new(), |v| v.to_string())
        );
    }
    fs::write(&table, &text).map_err(|e| io_err(&table, e))?;

    let converged = summary.iter().filter(|s| s.converged).count();
    let manifest = ReproduceManifest {
        tool_version: io::TOOL_VERSION.to_string(),
        case: a.case.to_string(),
        config: ConfigFile::from_config(&base),
        seeds: summary,
        converged,
        outputs: seeds
            .iter()
            .map(|&s| curve_name(s))
            .chain(["summary.csv".to_string()])
            .collect(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&a.out.join("manifest.json"), &manifest)?;

    let out = |e: std::io::Error| CliError::Io(e.to_string());
    write!(stdout, "{text}").map_err(out)?;
    writeln!(stdout, "case {}: {converged}/{} converged", a.case, a.seeds).map_err(out)?;
    Ok(if converged as u64 == a.seeds { EXIT_OK } else { EXIT_DOMAIN })
}
