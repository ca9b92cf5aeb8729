//! Single runs of the three models, with diagnostics and snapshots.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Model, Recipe, RunConfig};
use super::snapshot::{load_snapshot, save_snapshot, Snapshot};
use super::trajectory::{write_csv, DiagnosticRow, Trajectory};
use crate::emtf::{self, EmtfSolver};
use crate::limit::{self, OhmCoefficients, XmhdState};
use crate::modes::ModeCache;
use crate::plasma::{Basis, PlasmaParams, State, RHO_E, RHO_I};
use crate::rk4;
use crate::spectral::{Field, Grid};
use crate::{Error, Result};

/// Environment variable naming the directory under which runs are written.
pub const OUTPUT_ENV: &str = "TWOFLUID_OUTPUT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// Output directory of a configuration: `<root>/<first 12 hex digits of its hash>`.
pub fn run_dir(cfg: &RunConfig) -> PathBuf {
    output_root().join(&cfg.hash()[..12])
}

/// A trajectory together with the states at its sample times.
#[derive(Clone, Debug)]
pub struct Run<S> {
    pub trajectory: Trajectory,
    pub states: Vec<(f64, S)>,
}

pub fn grid_of(cfg: &RunConfig) -> Result<Grid> {
    Grid::with_dealias(cfg.grid, cfg.dealias)
}

/// Prepared (P_e-polarized) slow-limit initial state for the configured recipe.
pub fn initial_state(cfg: &RunConfig) -> Result<State> {
    let grid = grid_of(cfg)?;
    let p = &cfg.plasma;
    let init = &cfg.initial;
    match init.recipe {
        Recipe::PreparedRandom => limit::random_prepared(&grid, p, cfg.seed, init.amplitude, init.density_offset),
        Recipe::Irrotational => {
            let (ve, vi) = limit::irrotational_velocities(&grid, p, cfg.seed, init.amplitude)?;
            limit::prepare_data(&grid, p, &ve, &vi, init.density_offset)
        }
        Recipe::SingleMode => {
            let a = init.amplitude;
            let n = grid.n();
            let ve = [Field::zeros(n), grid.forward(&grid.sample(|x| a * x[0].cos()))?, Field::zeros(n)];
            let zero = [Field::zeros(n), Field::zeros(n), Field::zeros(n)];
            limit::prepare_data(&grid, p, &ve, &zero, init.density_offset)
        }
        Recipe::FromFile => {
            let path = init.path.as_ref().ok_or_else(|| Error::Config(vec!["initial.path missing".into()]))?;
            let snap = load_snapshot(path, Some(grid.n()))?;
            match snap.basis.as_str() {
                "velocities" => {
                    let (ve, vi) = snap.to_velocities(&grid, p)?;
                    limit::prepare_data(&grid, p, &ve, &vi, init.density_offset)
                }
                "xmhd" => limit::xmhd_to_slm(&grid, p, &snap.to_xmhd(&grid)?, init.density_offset),
                _ => {
                    let mut u = snap.to_state(&grid)?;
                    if u.basis == Basis::Original {
                        u = u.symmetrize(p)?;
                    }
                    Ok(u)
                }
            }
        }
    }
}

/// Fast-scale initial state at ε for a slow-limit state: each linearized
/// density perturbation n_s becomes q_s = g_s(n̄ + εn_s)/ε, so the physical
/// densities, and with them the charge Gauss law, are reproduced exactly.
pub fn emtf_initial(grid: &Grid, params: &PlasmaParams, u: &State, eps: f64) -> Result<State> {
    u.expect(Basis::Symmetrized)?;
    let d = params.derived();
    let [we, wi] = params.sym_weights();
    let mut out = u.clone();
    let species = [(RHO_E, we, d.dp_e, params.electron()), (RHO_I, wi, d.dp_i, params.ion())];
    for (c, w, dp, cl) in species {
        let lin = (dp / params.n_bar).sqrt();
        let s = grid.inverse(&u.comps[c])?;
        let q: Vec<f64> = s.iter().map(|r| Ok(w * cl.g(params.n_bar + eps * r / lin)? / eps)).collect::<Result<_>>()?;
        out.comps[c] = grid.project(&q)?;
    }
    Ok(out)
}

fn snapshot_path(dir: &Path, label: &str, j: usize) -> PathBuf {
    dir.join(format!("{label}_{j:04}.snap"))
}

/// Checks the time stamps and writes the trajectory CSV.
fn finish(dir: Option<&Path>, traj: &mut Trajectory) -> Result<()> {
    traj.check_monotone()?;
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        write_csv(&dir.join(format!("{}.csv", traj.label)), &traj.rows)?;
    }
    Ok(())
}

fn nan_row(t: f64) -> DiagnosticRow {
    DiagnosticRow {
        t,
        l2_norm: f64::NAN,
        hsigma_norm: f64::NAN,
        div_b: f64::NAN,
        gauss_charge: f64::NAN,
        energy: f64::NAN,
        gol_residual: f64::NAN,
    }
}

/// Quadratic energy ½∫|𝒰|² of a state on the torus.
fn quadratic_energy(u: &State) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI).powi(3) * u.norm().powi(2)
}

/// ε label used in file names, e.g. 0.025 → "emtf_eps0.025".
pub fn emtf_label(eps: f64) -> String {
    format!("emtf_eps{eps}")
}

/// EMTF run at one ε from the slow-limit state `u0`. The GOL column is the
/// generalized Ohm's law residual at each sample (from a centered difference
/// of width 10⁻⁴ε around it), divided by ε².
pub fn run_emtf(cfg: &RunConfig, cache: Arc<ModeCache>, u0: &State, eps: f64, dir: Option<&Path>) -> Result<Run<State>> {
    let grid = cache.grid().clone();
    let p = *cache.params();
    let mut solver = EmtfSolver::new(cache, eps)?;
    solver.spectral_filter = cfg.spectral_filter;
    let ue = emtf_initial(&grid, &p, u0, eps)?;
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => solver.default_dt(&ue, cfg.cfl)?,
    };
    let label = emtf_label(eps);
    let hash = cfg.hash();
    let coef = OhmCoefficients::from_params(&p);
    let mut traj = Trajectory { label: label.clone(), config_hash: hash.clone(), epsilon: Some(eps), ..Default::default() };
    let mut states = Vec::new();
    solver.integrate(&ue, cfg.t_end, cfg.intervals(), dt, |t, v, u| {
        let g = emtf::gauss_residual(&grid, &p, eps, u)?;
        let h = 1e-4 * eps;
        let dv = solver.filtered_rhs(t, v)?;
        let mut plus = v.clone();
        plus.axpy(h, &dv)?;
        let mut minus = v.clone();
        minus.axpy(-h, &dv)?;
        let before = solver.physical(t - h, &minus)?;
        let after = solver.physical(t + h, &plus)?;
        let gol = limit::gol_residual(&grid, &p, eps, (t - h, &before), (t + h, &after), &coef)?;
        traj.rows.push(DiagnosticRow {
            t,
            l2_norm: u.norm(),
            hsigma_norm: u.hsigma_norm(&grid, cfg.sobolev_sigma),
            div_b: g.div_b,
            gauss_charge: g.charge,
            energy: quadratic_energy(u),
            gol_residual: gol / (eps * eps),
        });
        if let (Some(dir), true) = (dir, cfg.write_snapshots) {
            let path = snapshot_path(dir, &label, states.len());
            save_snapshot(&path, &Snapshot::from_state(&grid, u, &hash, t)?)?;
            traj.snapshots.push(path);
        }
        states.push((t, v.clone()));
        Ok(())
    })?;
    finish(dir, &mut traj)?;
    Ok(Run { trajectory: traj, states })
}

/// Largest advective plus Alfvén speed of a slow-limit velocity/field pair.
fn slow_speed(grid: &Grid, params: &PlasmaParams, v: &[&[Field]], b: &[Field]) -> Result<f64> {
    let rho = params.derived().rho_bar;
    let pointwise_max = |f: &[Field]| -> Result<f64> {
        let refs: Vec<&Field> = f.iter().collect();
        let s = grid.inverse_many(&refs)?;
        Ok((0..grid.len()).map(|p| (s[0][p].powi(2) + s[1][p].powi(2) + s[2][p].powi(2)).sqrt()).fold(0.0, f64::max))
    };
    let mut speed = pointwise_max(b)? / rho.sqrt();
    for f in v {
        speed += pointwise_max(f)?;
    }
    Ok(speed)
}

pub fn slow_dt(cfg: &RunConfig, grid: &Grid, x: &XmhdState) -> Result<f64> {
    if let Some(dt) = cfg.dt {
        return Ok(dt);
    }
    let b = x.b(grid, &cfg.plasma)?;
    let speed = slow_speed(grid, &cfg.plasma, &[&x.u], &b)?;
    Ok(if speed > 0.0 { cfg.cfl * grid.spacing() / speed } else { cfg.t_end.max(1.0) })
}

fn slow_row(grid: &Grid, params: &PlasmaParams, sigma: f64, t: f64, u: &State) -> Result<DiagnosticRow> {
    let g = emtf::gauss_residual(grid, params, 0.0, u)?;
    let x = limit::bridge_linear(grid, params, u)?;
    Ok(DiagnosticRow {
        l2_norm: u.norm(),
        hsigma_norm: u.hsigma_norm(grid, sigma),
        div_b: g.div_b,
        gauss_charge: g.charge,
        energy: limit::energy(grid, params, &x)?,
        ..nan_row(t)
    })
}

/// ESLM run; `dt` overrides the configured step choice.
pub fn run_eslm(cfg: &RunConfig, u0: &State, dt: Option<f64>, dir: Option<&Path>) -> Result<Run<State>> {
    let grid = grid_of(cfg)?;
    let p = cfg.plasma;
    limit::check_prepared(&grid, &p, u0, 1e-9)?;
    let dt = match dt {
        Some(dt) => dt,
        None => slow_dt(cfg, &grid, &limit::bridge_linear(&grid, &p, u0)?)?,
    };
    let hash = cfg.hash();
    let mut traj = Trajectory { label: "eslm".into(), config_hash: hash.clone(), ..Default::default() };
    let mut states = Vec::new();
    rk4::integrate_sampled(
        u0,
        cfg.t_end,
        cfg.intervals(),
        dt,
        |_, u| limit::eslm_rhs_unchecked(&grid, &p, u),
        |u| *u = u.dealias(&grid),
        |t, u| {
            traj.rows.push(slow_row(&grid, &p, cfg.sobolev_sigma, t, u)?);
            if let (Some(dir), true) = (dir, cfg.write_snapshots) {
                let path = snapshot_path(dir, "eslm", states.len());
                save_snapshot(&path, &Snapshot::from_state(&grid, u, &hash, t)?)?;
                traj.snapshots.push(path);
            }
            states.push((t, u.clone()));
            Ok(())
        },
    )?;
    finish(dir, &mut traj)?;
    Ok(Run { trajectory: traj, states })
}

pub fn run_xmhd(cfg: &RunConfig, x0: &XmhdState, dt: Option<f64>, dir: Option<&Path>) -> Result<Run<XmhdState>> {
    let grid = grid_of(cfg)?;
    let p = cfg.plasma;
    let dt = match dt {
        Some(dt) => dt,
        None => slow_dt(cfg, &grid, x0)?,
    };
    let hash = cfg.hash();
    let mut traj = Trajectory { label: "xmhd".into(), config_hash: hash.clone(), ..Default::default() };
    let mut states = Vec::new();
    rk4::integrate_sampled(
        x0,
        cfg.t_end,
        cfg.intervals(),
        dt,
        |_, x| limit::xmhd_rhs(&grid, &p, x),
        |x| *x = x.dealias(&grid),
        |t, x| {
            let fields: Vec<Field> = x.fields().cloned().collect();
            traj.rows.push(DiagnosticRow {
                l2_norm: x.norm(),
                hsigma_norm: grid.hsigma_norm(&fields, cfg.sobolev_sigma),
                div_b: grid.div(&x.b_star)?.norm(),
                energy: limit::energy(&grid, &p, x)?,
                ..nan_row(t)
            });
            if let (Some(dir), true) = (dir, cfg.write_snapshots) {
                let path = snapshot_path(dir, "xmhd", states.len());
                save_snapshot(&path, &Snapshot::from_xmhd(&grid, x, &hash, t)?)?;
                traj.snapshots.push(path);
            }
            states.push((t, x.clone()));
            Ok(())
        },
    )?;
    finish(dir, &mut traj)?;
    Ok(Run { trajectory: traj, states })
}

/// Outcome of an ESLM/XMHD pair run from the same data.
#[derive(Clone, Debug, Serialize)]
pub struct PairedReport {
    pub dt: f64,
    /// max over samples of ‖bridge(𝒰(t)) − X(t)‖ / ‖X(t)‖
    pub max_relative_difference: f64,
    pub final_relative_difference: f64,
}

pub fn run_paired(cfg: &RunConfig, u0: &State, dir: Option<&Path>) -> Result<(Run<State>, Run<XmhdState>, PairedReport)> {
    let grid = grid_of(cfg)?;
    let p = cfg.plasma;
    let x0 = limit::slm_to_xmhd(&grid, &p, u0)?;
    let dt = slow_dt(cfg, &grid, &x0)?;
    let (eslm, xmhd) = rayon::join(|| run_eslm(cfg, u0, Some(dt), dir), || run_xmhd(cfg, &x0, Some(dt), dir));
    let (eslm, xmhd) = (eslm?, xmhd?);
    let mut max_rel = 0.0f64;
    let mut last = 0.0;
    for ((_, u), (_, x)) in eslm.states.iter().zip(&xmhd.states) {
        let bridged = limit::bridge_linear(&grid, &p, u)?;
        last = bridged.sub(x).norm() / x.norm().max(1e-300);
        max_rel = max_rel.max(last);
    }
    let report = PairedReport { dt, max_relative_difference: max_rel, final_relative_difference: last };
    Ok((eslm, xmhd, report))
}

/// Summary written to `run.json`.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub config: RunConfig,
    pub trajectories: Vec<Trajectory>,
    pub paired: Option<PairedReport>,
}

/// Runs a configuration end to end, writing under `dir`.
pub fn execute(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let grid = grid_of(cfg)?;
    let u0 = initial_state(cfg)?;
    let mut trajectories = Vec::new();
    let mut paired = None;
    match cfg.model {
        Model::Emtf => {
            let cache = Arc::new(ModeCache::new(&grid, &cfg.plasma));
            let runs: Vec<Run<State>> = cfg
                .epsilons()
                .par_iter()
                .map(|&eps| run_emtf(cfg, cache.clone(), &u0, eps, Some(dir)))
                .collect::<Result<_>>()?;
            trajectories.extend(runs.into_iter().map(|r| r.trajectory));
        }
        Model::Eslm => trajectories.push(run_eslm(cfg, &u0, None, Some(dir))?.trajectory),
        Model::Xmhd => {
            let x0 = limit::slm_to_xmhd(&grid, &cfg.plasma, &u0)?;
            trajectories.push(run_xmhd(cfg, &x0, None, Some(dir))?.trajectory);
        }
        Model::Paired => {
            let (a, b, r) = run_paired(cfg, &u0, Some(dir))?;
            trajectories.push(a.trajectory);
            trajectories.push(b.trajectory);
            paired = Some(r);
        }
    }
    let summary = RunSummary { config_hash: cfg.hash(), config: cfg.clone(), trajectories, paired };
    write_json(&dir.join("run.json"), &summary)?;
    Ok(summary)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
