//! Command-line front end. Exit codes: 0 pass, 1 run failure,
//! 2 verification failure, 3 configuration error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::config::{load_config_with, RunConfig};
use super::runs::{self, output_root, write_json};
use super::snapshot::{load_snapshot, save_snapshot, Snapshot};
use super::study::convergence_study;
use super::trajectory::{read_csv, Trajectory};
use super::verify::verify_suite;
use crate::limit;
use crate::modes::BasisFault;
use crate::plasma::PlasmaParams;
use crate::spectral::Grid;
use crate::{Error, Result};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_RUN_FAILURE: i32 = 1;
pub const EXIT_VERIFICATION_FAILURE: i32 = 2;
pub const EXIT_CONFIG_ERROR: i32 = 3;

/// Relative tolerance for the ESLM/XMHD comparison of a paired run.
pub const PAIRED_TOL: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(name = "twofluid", about = "Two-fluid Euler-Maxwell slow-limit toolkit", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Direction {
    Slm2xmhd,
    Xmhd2slm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Fault {
    FlipW3,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one configuration; outputs go to $TWOFLUID_OUTPUT/<hash>.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// key=value, dotted keys for nested tables (e.g. plasma.m_e=0.5)
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Convergence study along the configured ε ladder.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Mode-algebra verification suite.
    Verify {
        #[arg(long, default_value_t = 8)]
        kmax: i32,
        /// Plasma parameters are taken from this configuration when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        fault: Option<Fault>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a raw velocity snapshot into prepared data.
    Prepare {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        density_offset: f64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Map between slow-limit and XMHD snapshots.
    Bridge {
        #[arg(long, value_enum)]
        dir: Direction,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        density_offset: f64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Summarize the diagnostic CSVs of a run directory.
    Diag {
        #[arg(long)]
        traj: PathBuf,
    },
}

/// Outcome of a command: exit code plus a human-readable summary.
pub struct Outcome {
    pub code: i32,
    pub message: String,
}

impl Outcome {
    fn pass(message: String) -> Self {
        Outcome { code: EXIT_PASS, message }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG_ERROR,
        _ => EXIT_RUN_FAILURE,
    }
}

fn params_from(config: Option<&Path>) -> Result<PlasmaParams> {
    match config {
        Some(path) => Ok(load_config_with(path, &[])?.plasma),
        None => Ok(PlasmaParams::default()),
    }
}

fn run_command(cfg: &RunConfig) -> Result<Outcome> {
    let dir = runs::run_dir(cfg);
    let summary = runs::execute(cfg, &dir)?;
    let mut msg = format!("run {} written to {}", &summary.config_hash[..12], dir.display());
    if let Some(p) = &summary.paired {
        msg += &format!("\npaired ESLM/XMHD max relative difference {:.3e} (tolerance {PAIRED_TOL:e})", p.max_relative_difference);
        if !(p.max_relative_difference <= PAIRED_TOL) {
            return Ok(Outcome { code: EXIT_VERIFICATION_FAILURE, message: msg });
        }
    }
    Ok(Outcome::pass(msg))
}

fn converge_command(cfg: &RunConfig) -> Result<Outcome> {
    let dir = runs::run_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    let report = convergence_study(cfg, Some(&dir))?;
    let mut msg = format!("{:>10} {:>14} {:>14} {:>8} {:>10}\n", "epsilon", "err_Hsigma", "err_L2", "ratio", "gauss");
    for e in &report.entries {
        let ratio = e.ratio.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into());
        msg += &format!(
            "{:>10} {:>14.6e} {:>14.6e} {:>8} {:>10.3}\n",
            e.epsilon, e.error_hsigma, e.error_l2, ratio, e.gauss_growth
        );
    }
    if let Some(s) = report.fitted_slope {
        msg += &format!("fitted slope {s:.3}\n");
    }
    for w in &report.warnings {
        msg += &format!("warning: {w}\n");
    }
    msg += &format!("report: {}", dir.join("convergence.json").display());
    if let Some(f) = &report.failure {
        return Ok(Outcome { code: EXIT_RUN_FAILURE, message: format!("{msg}\nfailure: {f}") });
    }
    let code = if report.passed() { EXIT_PASS } else { EXIT_VERIFICATION_FAILURE };
    Ok(Outcome { code, message: msg })
}

fn verify_command(kmax: i32, config: Option<&Path>, fault: Option<Fault>, out: Option<&Path>) -> Result<Outcome> {
    if kmax < 2 {
        return Err(Error::Config(vec![format!("kmax must be at least 2, got {kmax}")]));
    }
    let params = params_from(config)?;
    let fault = fault.map(|Fault::FlipW3| BasisFault::FlipW3Magnetic);
    let report = verify_suite(&params, kmax, fault)?;
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let root = output_root();
            std::fs::create_dir_all(&root)?;
            root.join("verify.json")
        }
    };
    write_json(&path, &report)?;
    let mut msg = String::new();
    for c in &report.checks {
        msg += &format!("{:<20} {:<4} worst {:.3e} (tol {:e})\n", c.name, if c.passed { "ok" } else { "FAIL" }, c.worst, c.tolerance);
    }
    msg += &format!("report: {}", path.display());
    let code = if report.passed { EXIT_PASS } else { EXIT_VERIFICATION_FAILURE };
    Ok(Outcome { code, message: msg })
}

fn prepare_command(input: &Path, out: &Path, n0: f64, config: Option<&Path>) -> Result<Outcome> {
    let params = params_from(config)?;
    let raw = load_snapshot(input, None)?;
    let grid = Grid::new(raw.grid)?;
    let (ve, vi) = raw.to_velocities(&grid, &params)?;
    let u = limit::prepare_data(&grid, &params, &ve, &vi, n0)?;
    let residual = limit::prepared_residual(&grid, &params, &u)?;
    save_snapshot(out, &Snapshot::from_state(&grid, &u, &raw.params_hash, raw.time)?)?;
    Ok(Outcome::pass(format!("prepared data written to {} (‖(Id − P_e)U‖ = {residual:.3e})", out.display())))
}

fn bridge_command(dir: Direction, input: &Path, out: &Path, n0: f64, config: Option<&Path>) -> Result<Outcome> {
    let params = params_from(config)?;
    let snap = load_snapshot(input, None)?;
    let grid = Grid::new(snap.grid)?;
    let result = match dir {
        Direction::Slm2xmhd => {
            let x = limit::slm_to_xmhd(&grid, &params, &snap.to_state(&grid)?)?;
            Snapshot::from_xmhd(&grid, &x, &snap.params_hash, snap.time)?
        }
        Direction::Xmhd2slm => {
            let u = limit::xmhd_to_slm(&grid, &params, &snap.to_xmhd(&grid)?, n0)?;
            Snapshot::from_state(&grid, &u, &snap.params_hash, snap.time)?
        }
    };
    save_snapshot(out, &result)?;
    Ok(Outcome::pass(format!("{} written to {}", result.basis, out.display())))
}

fn diag_command(dir: &Path) -> Result<Outcome> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no diagnostic CSV files in {}", dir.display()),
        )));
    }
    let mut msg = String::new();
    let mut code = EXIT_PASS;
    for f in files {
        let label = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let traj = Trajectory { label: label.clone(), rows: read_csv(&f)?, ..Default::default() };
        if let Err(e) = traj.check_monotone() {
            code = EXIT_VERIFICATION_FAILURE;
            msg += &format!("{label}: {e}\n");
            continue;
        }
        let (first, last) = (traj.rows[0], traj.rows[traj.rows.len() - 1]);
        let drift = (last.energy - first.energy) / first.energy.abs().max(1e-300);
        msg += &format!(
            "{label}: {} samples, t in [{}, {}], max div_B {:.3e}, max gauss_charge {:.3e}, energy drift {:.3e}, max GOL {:.3e}\n",
            traj.rows.len(),
            first.t,
            last.t,
            traj.max_of(|r| r.div_b),
            traj.max_of(|r| r.gauss_charge),
            drift,
            traj.max_of(|r| r.gol_residual),
        );
    }
    Ok(Outcome { code, message: msg.trim_end().to_string() })
}

/// Executes a parsed command line.
pub fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Run { config, overrides } => run_command(&load_config_with(&config, &overrides)?),
        Command::Converge { config, overrides } => converge_command(&load_config_with(&config, &overrides)?),
        Command::Verify { kmax, config, fault, out } => verify_command(kmax, config.as_deref(), fault, out.as_deref()),
        Command::Prepare { input, out, density_offset, config } => {
            prepare_command(&input, &out, density_offset, config.as_deref())
        }
        Command::Bridge { dir, input, out, density_offset, config } => {
            bridge_command(dir, &input, &out, density_offset, config.as_deref())
        }
        Command::Diag { traj } => diag_command(&traj),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG_ERROR } else { EXIT_PASS };
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            println!("{}", out.message);
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
