//! Convergence of filtered EMTF trajectories to the slow-limit trajectory
//! along a ladder of ε values.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::runs::{self, Run};
use crate::limit::loglog_slope;
use crate::modes::ModeCache;
use crate::plasma::State;
use crate::{Error, Result};

/// Minimal error reduction per halving of ε accepted as convergence.
pub const REDUCTION_FACTOR: f64 = 1.5;
/// Allowed growth of the Gauss residuals over their initial level.
pub const GAUSS_GROWTH: f64 = 10.0;
/// Relative floor (times ‖𝒰(0)‖) under which a Gauss residual counts as zero.
pub const GAUSS_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, Serialize)]
pub struct LadderEntry {
    pub epsilon: f64,
    /// sup over samples of ‖V_ε(t) − 𝒰₀(t)‖ in H^σ.
    pub error_hsigma: f64,
    /// Same in L².
    pub error_l2: f64,
    /// error(previous ε) / error(this ε).
    pub ratio: Option<f64>,
    pub div_b_initial: f64,
    pub div_b_max: f64,
    pub charge_initial: f64,
    pub charge_max: f64,
    /// max residual / max(initial, floor), worst of the two laws.
    pub gauss_growth: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub config_hash: String,
    pub sigma: f64,
    pub reduction_factor: f64,
    pub gauss_growth_limit: f64,
    pub gauss_floor: f64,
    pub entries: Vec<LadderEntry>,
    /// Slope of log error against log ε (H^σ errors).
    pub fitted_slope: Option<f64>,
    pub strictly_decreasing: bool,
    pub converged: bool,
    pub gauss_ok: bool,
    pub warnings: Vec<String>,
    /// Set when a sub-run failed; the entries hold whatever finished.
    pub failure: Option<String>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.converged && self.gauss_ok
    }
}

/// sup over common samples of ‖a(t) − b(t)‖ in H^σ and L².
fn sup_distance(grid: &crate::spectral::Grid, sigma: f64, a: &[(f64, State)], b: &[(f64, State)]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!("sample counts differ: {} vs {}", a.len(), b.len())));
    }
    let mut hs = 0.0f64;
    let mut l2 = 0.0f64;
    for ((ta, ua), (tb, ub)) in a.iter().zip(b) {
        if (ta - tb).abs() > 1e-12 * ta.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!("sample times differ: {ta} vs {tb}")));
        }
        let d = ua.sub(ub)?;
        hs = hs.max(d.hsigma_norm(grid, sigma));
        l2 = l2.max(d.norm());
    }
    Ok((hs, l2))
}

fn entry(grid: &crate::spectral::Grid, cfg: &RunConfig, reference: &Run<State>, run: &Run<State>, scale: f64) -> Result<LadderEntry> {
    let (error_hsigma, error_l2) = sup_distance(grid, cfg.sobolev_sigma, &run.states, &reference.states)?;
    let rows = &run.trajectory.rows;
    let first = rows.first().ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let floor = GAUSS_FLOOR * scale;
    let div_b_max = run.trajectory.max_of(|r| r.div_b);
    let charge_max = run.trajectory.max_of(|r| r.gauss_charge);
    let growth = (div_b_max / first.div_b.max(floor)).max(charge_max / first.gauss_charge.max(floor));
    Ok(LadderEntry {
        epsilon: run.trajectory.epsilon.unwrap_or(f64::NAN),
        error_hsigma,
        error_l2,
        ratio: None,
        div_b_initial: first.div_b,
        div_b_max,
        charge_initial: first.gauss_charge,
        charge_max,
        gauss_growth: growth,
    })
}

/// Runs ESLM once and EMTF for every ε of the ladder from the same prepared
/// data, and tabulates sup_t ‖V_ε − 𝒰₀‖. Results are written under `dir`
/// when given.
pub fn convergence_study(cfg: &RunConfig, dir: Option<&Path>) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let grid = runs::grid_of(cfg)?;
    let mut eps = cfg.epsilons();
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eps.dedup();
    let mut report = ConvergenceReport {
        config_hash: cfg.hash(),
        sigma: cfg.sobolev_sigma,
        reduction_factor: REDUCTION_FACTOR,
        gauss_growth_limit: GAUSS_GROWTH,
        gauss_floor: GAUSS_FLOOR,
        entries: Vec::new(),
        fitted_slope: None,
        strictly_decreasing: false,
        converged: false,
        gauss_ok: false,
        warnings: Vec::new(),
        failure: None,
    };
    if eps.len() < 3 {
        report.warnings.push(format!("ladder has {} value(s); at least 3 are needed for a convergence verdict", eps.len()));
    }
    let u0 = runs::initial_state(cfg)?;
    let cache = Arc::new(ModeCache::new(&grid, &cfg.plasma));
    let (reference, ladder) = rayon::join(
        || runs::run_eslm(cfg, &u0, None, dir),
        || {
            eps.par_iter()
                .map(|&e| runs::run_emtf(cfg, cache.clone(), &u0, e, dir))
                .collect::<Vec<Result<Run<State>>>>()
        },
    );
    let reference = match reference {
        Ok(r) => r,
        Err(e) => {
            report.failure = Some(format!("slow-limit reference run failed: {e}"));
            return Ok(report);
        }
    };
    let scale = u0.norm();
    for (e, run) in eps.iter().zip(ladder) {
        match run.and_then(|r| entry(&grid, cfg, &reference, &r, scale)) {
            Ok(en) => report.entries.push(en),
            Err(err) => {
                report.failure = Some(format!("run at epsilon {e} failed: {err}"));
                break;
            }
        }
    }
    for j in 1..report.entries.len() {
        let prev = report.entries[j - 1].error_hsigma;
        report.entries[j].ratio = Some(prev / report.entries[j].error_hsigma);
    }
    let ratios: Vec<f64> = report.entries.iter().filter_map(|e| e.ratio).collect();
    let complete = report.failure.is_none() && eps.len() >= 2;
    report.strictly_decreasing = complete && ratios.iter().all(|r| *r > 1.0);
    report.converged = complete && eps.len() >= 3 && ratios.iter().all(|r| *r >= REDUCTION_FACTOR);
    report.gauss_ok = report.failure.is_none() && report.entries.iter().all(|e| e.gauss_growth <= GAUSS_GROWTH);
    if report.entries.len() >= 2 {
        let pts: Vec<(f64, f64)> = report.entries.iter().map(|e| (e.epsilon, e.error_hsigma)).collect();
        report.fitted_slope = Some(loglog_slope(&pts));
    }
    if let Some(dir) = dir {
        runs::write_json(&dir.join("convergence.json"), &report)?;
    }
    Ok(report)
}
