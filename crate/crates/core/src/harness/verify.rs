//! Verification suite for the mode algebra: per-mode checks against the SVD
//! oracle plus grid-level identities, collected into one JSON report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::limit::{average_decay, decay_envelope, loglog_slope};
use crate::modes::{self, BasisFault, ModeCache};
use crate::plasma::{Basis, PlasmaParams, State, BF, EF, RHO_E, RHO_I};
use crate::spectral::{Grid, C64};
use crate::Result;

/// Tolerance on per-mode residuals and oracle distances.
pub const MODE_TOL: f64 = 1e-10;
/// Relative tolerance on grid-level projector identities.
pub const GRID_TOL: f64 = 1e-11;
/// Accepted deviation of the mean-value decay slope from −1.
pub const SLOPE_TOL: f64 = 0.1;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    fn bound(name: &str, worst: f64, tolerance: f64) -> Self {
        CheckResult { name: name.into(), passed: worst <= tolerance, worst, tolerance, detail: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeEntry {
    pub k: [i32; 3],
    pub dim_kernel: usize,
    pub dim_h: usize,
    pub oracle_pe: f64,
    pub oracle_p: f64,
    pub orthonormality: f64,
    pub annihilation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub kmax: i32,
    pub params: PlasmaParams,
    pub fault: Option<String>,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub modes: Vec<ModeEntry>,
}

/// Random real state with all 14 components in |k|∞ ≤ band.
pub fn random_state(grid: &Grid, rng: &mut ChaCha8Rng, band: i32) -> Result<State> {
    let mut s = State::zeros(grid.n(), Basis::Symmetrized);
    for f in s.comps.iter_mut() {
        for idx in 0..grid.len() {
            let k = grid.k_of(idx);
            if k.iter().all(|kj| kj.abs() <= band) && !grid.is_nyquist(idx) {
                f.coef[idx] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        *f = grid.real_part(f)?;
    }
    Ok(s)
}

/// Grid-level identities on `states` random states at `n`³: the multiplier
/// and mode-by-mode forms of P_e agree; P and P_e agree on
/// 𝒦 = {(0, 0, u_e, u_i, E, 0) : ∇·E = 0}.
fn grid_checks(params: &PlasmaParams, n: usize, states: usize, seed: u64) -> Result<(f64, f64)> {
    let grid = Grid::new(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = grid.cutoff();
    let mut dual = 0.0f64;
    let mut kset = 0.0f64;
    for _ in 0..states {
        let u = random_state(&grid, &mut rng, band)?;
        let a = modes::apply_pe(&grid, params, &u)?;
        let b = modes::apply_pe_global(&grid, params, &u)?;
        dual = dual.max(a.sub(&b)?.norm() / u.norm());

        let mut w = random_state(&grid, &mut rng, band)?;
        for c in [RHO_E, RHO_I, BF, BF + 1, BF + 2] {
            w.comps[c] = crate::spectral::Field::zeros(n);
        }
        let e = grid.leray(&w.vector(EF))?;
        w.set_vector(EF, e);
        let p = modes::apply_p(&grid, params, &w)?;
        let pe = modes::apply_pe(&grid, params, &w)?;
        kset = kset.max(p.sub(&pe)?.norm() / w.norm());
    }
    Ok((dual, kset))
}

/// Decay of (1/T)∫₀ᵀ S(τ)𝒰 dτ towards P𝒰 on an 8³ grid; returns the
/// log-log slope of the upper envelope over T ∈ [t_max/10, t_max].
pub fn mean_value_slope(params: &PlasmaParams, seed: u64) -> Result<f64> {
    let grid = Grid::new(8)?;
    let cache = ModeCache::new(&grid, params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_state(&grid, &mut rng, grid.cutoff())?;
    let t_max = 200.0;
    let nodes = ((t_max * cache.omega_max() * 4.0) as usize).max(2000);
    let env = decay_envelope(&average_decay(&cache, &u, t_max, nodes)?);
    let tail: Vec<(f64, f64)> = env.into_iter().filter(|(t, _)| *t >= t_max / 10.0).collect();
    Ok(loglog_slope(&tail))
}

/// Runs every check for modes with |k|∞ ≤ kmax. Failures are report entries.
pub fn verify_suite(params: &PlasmaParams, kmax: i32, fault: Option<BasisFault>) -> Result<VerifyReport> {
    params.validate()?;
    let ks = modes::lattice(kmax);
    let results: Vec<(ModeEntry, modes::ModeResiduals, bool)> = ks
        .par_iter()
        .map(|k| {
            let r = modes::check_mode(*k, params, fault);
            let basis = modes::kernel_bases_with(&modes::build_mode_matrices(*k, params), params, fault);
            let zero = k.iter().all(|x| *x == 0.0);
            let (dk, dh) = if zero { (8, 7) } else { (6, 4) };
            let dims_ok = r.dim_kernel == dk && r.dim_h == dh && basis.kernel_basis.len() == dk && basis.h_basis.len() == dh;
            let entry = ModeEntry {
                k: [k[0] as i32, k[1] as i32, k[2] as i32],
                dim_kernel: r.dim_kernel,
                dim_h: r.dim_h,
                oracle_pe: r.oracle_pe,
                oracle_p: r.oracle_p,
                orthonormality: r.orthonormality,
                annihilation: r.annihilation,
            };
            (entry, r, dims_ok)
        })
        .collect();

    let worst = |f: &dyn Fn(&modes::ModeResiduals) -> f64| results.iter().map(|(_, r, _)| f(r)).fold(0.0, f64::max);
    let bad_dims = results.iter().filter(|(_, _, ok)| !ok).count();
    let mut checks = vec![CheckResult {
        name: "dimensions".into(),
        passed: bad_dims == 0,
        worst: bad_dims as f64,
        tolerance: 0.0,
        detail: Some("Ker[L_k;G_k] and Ker L_k have dimensions (7, 8) at k = 0 and (4, 6) otherwise".into()),
    }];
    checks.push(CheckResult::bound("orthonormality", worst(&|r| r.orthonormality), MODE_TOL));
    checks.push(CheckResult::bound("annihilation", worst(&|r| r.annihilation), MODE_TOL));
    checks.push(CheckResult::bound("projector_axioms", worst(&|r| r.projector_axioms), MODE_TOL));
    checks.push(CheckResult::bound("svd_oracle", worst(&|r| r.oracle_pe.max(r.oracle_p)), MODE_TOL));
    checks.push(CheckResult::bound("skew_adjoint", worst(&|r| r.skew), MODE_TOL));
    checks.push(CheckResult::bound("group", worst(&|r| r.group), MODE_TOL));

    let (dual, kset) = grid_checks(params, 16, 5, 11)?;
    checks.push(CheckResult::bound("dual_path_pe", dual, GRID_TOL));
    checks.push(CheckResult::bound("k_set_coincidence", kset, GRID_TOL));

    let slope = mean_value_slope(params, 5)?;
    checks.push(CheckResult {
        name: "mean_value_decay".into(),
        passed: (slope + 1.0).abs() <= SLOPE_TOL,
        worst: (slope + 1.0).abs(),
        tolerance: SLOPE_TOL,
        detail: Some(format!("log-log slope {slope:.4} of sup_(T'>=T) |M_T' S(.)U - PU|")),
    });

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        kmax,
        params: *params,
        fault: fault.map(|f| format!("{f:?}")),
        passed,
        checks,
        modes: results.into_iter().map(|(e, _, _)| e).collect(),
    })
}
