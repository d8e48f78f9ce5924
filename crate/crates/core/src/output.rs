//! Run artifacts on disk and the `run` command behind the CLI.
//!
//! Hole numbers in every file are 1-based. Columns with no value for a row
//! are left empty. Reals are written with 17 significant digits.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use crate::config::{apply_overrides, emit_config, RawConfig};
use crate::error::{Error, ValidationError};
use crate::export::{fmt_g17, write_field_csv, write_pgm16};
use crate::sim::{run, SimConfig, SimTrace};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INVALID_CONFIG: i32 = 1;
    pub const RUNTIME: i32 = 2;
    pub const IO: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("{0}")]
    Config(#[from] ValidationError),
    #[error("simulation failed: {0}")]
    Runtime(Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => exit::INVALID_CONFIG,
            CommandError::Runtime(Error::Validation(_)) => exit::INVALID_CONFIG,
            CommandError::Runtime(_) => exit::RUNTIME,
            CommandError::Io { .. } => exit::IO,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub max_steps: Option<u64>,
    pub grid: Option<(usize, usize)>,
    /// `key=value` overrides, applied after `max_steps` and `grid`.
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config: SimConfig,
    pub artifacts: Vec<PathBuf>,
    pub final_v: Option<f64>,
    pub initial_v: Option<f64>,
    pub cycles: u64,
    pub seconds: f64,
}

/// Loads the config with every override applied.
pub fn load_config(opts: &RunOptions) -> Result<SimConfig, ValidationError> {
    let mut raw = RawConfig::from_file(&opts.config)?;
    let mut all = Vec::new();
    if let Some(n) = opts.max_steps {
        all.push(format!("sim.max_steps={n}"));
    }
    if let Some((nx, ny)) = opts.grid {
        all.push(format!("grid.nx={nx}"));
        all.push(format!("grid.ny={ny}"));
    }
    all.extend(opts.overrides.iter().cloned());
    apply_overrides(&mut raw, &all)?;
    raw.resolve()
}

pub fn run_command(opts: &RunOptions) -> Result<RunSummary, CommandError> {
    let config = load_config(opts)?;
    let started = Instant::now();
    let trace = run(config.clone()).map_err(CommandError::Runtime)?;
    let seconds = started.elapsed().as_secs_f64();
    for w in &trace.warnings {
        log::warn!("{w}");
    }
    let artifacts = write_artifacts(&opts.out, &config, &trace, Some(&opts.config), seconds)?;
    Ok(RunSummary {
        config,
        artifacts,
        final_v: trace.final_v(),
        initial_v: trace.initial_v(),
        cycles: trace.cycles(),
        seconds,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CommandError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CommandError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_at(path: &Path) -> impl Fn(io::Error) -> CommandError + '_ {
    move |source| CommandError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_f(v: Option<f64>) -> String {
    v.map(fmt_g17).unwrap_or_default()
}

pub fn write_metrics<W: Write>(trace: &SimTrace, mut w: W) -> io::Result<()> {
    writeln!(w, "k,V,target_hole,phase,cycle")?;
    for m in &trace.metrics {
        writeln!(w, "{},{},{},{},{}", m.k, fmt_g17(m.v), m.target + 1, m.phase, m.cycle)?;
    }
    w.flush()
}

pub fn write_trajectory<W: Write>(trace: &SimTrace, mut w: W) -> io::Result<()> {
    writeln!(w, "k,x,y")?;
    for t in &trace.trajectory {
        writeln!(w, "{},{},{}", t.k, fmt_g17(t.x), fmt_g17(t.y))?;
    }
    w.flush()
}

pub fn write_events<W: Write>(trace: &SimTrace, mut w: W) -> io::Result<()> {
    writeln!(w, "k,event,hole,h,h_bar_prime,h_bar_dprime,frozen_a,residual,cycle")?;
    for e in &trace.events {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            e.k,
            e.kind,
            e.hole + 1,
            opt(e.h),
            opt(e.h_bar_prime),
            opt(e.h_bar_dprime),
            opt_f(e.frozen_a),
            opt_f(e.residual),
            e.cycle
        )?;
    }
    w.flush()
}

/// Writes every artifact of a finished run into `dir` (created if needed)
/// and returns their paths, manifest last.
pub fn write_artifacts(
    dir: &Path,
    config: &SimConfig,
    trace: &SimTrace,
    config_path: Option<&Path>,
    seconds: f64,
) -> Result<Vec<PathBuf>, CommandError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let mut paths = Vec::new();

    type Table = fn(&SimTrace, BufWriter<File>) -> io::Result<()>;
    let tables: [(&str, Table); 3] = [
        ("metrics.csv", write_metrics),
        ("trajectory.csv", write_trajectory),
        ("events.csv", write_events),
    ];
    for (name, write) in tables {
        let path = dir.join(name);
        write(trace, create(&path)?).map_err(io_at(&path))?;
        paths.push(path);
    }

    let mut snapshot_names = Vec::new();
    for (k, phi) in &trace.snapshots {
        for ext in ["pgm", "csv"] {
            let path = dir.join(format!("phi_k{k}.{ext}"));
            let mut w = create(&path)?;
            if ext == "pgm" {
                write_pgm16(phi, &mut w)
            } else {
                write_field_csv(phi, &mut w)
            }
            .and_then(|_| w.flush())
            .map_err(io_at(&path))?;
            snapshot_names.push(file_name(&path));
            paths.push(path);
        }
    }

    let manifest = json!({
        "software": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "config_path": config_path.map(|p| p.display().to_string()),
        "config": emit_config(config),
        "tour": trace.tour.iter().map(|h| h + 1).collect::<Vec<_>>(),
        "steps": trace.trajectory.last().map(|t| t.k),
        "initial_v": trace.initial_v(),
        "final_v": trace.final_v(),
        "cycles": trace.cycles(),
        "wall_clock_seconds": seconds,
        "warnings": trace.warnings,
        "artifacts": {
            "metrics": "metrics.csv",
            "trajectory": "trajectory.csv",
            "events": "events.csv",
            "snapshots": snapshot_names,
        },
    });
    let path = dir.join("manifest.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &manifest)
        .map_err(io::Error::from)
        .and_then(|_| writeln!(w))
        .and_then(|_| w.flush())
        .map_err(io_at(&path))?;
    paths.push(path);
    Ok(paths)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
