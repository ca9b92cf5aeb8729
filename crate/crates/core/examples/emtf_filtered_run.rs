//! Fast-scale two-fluid run in the filtered variable V = S(-t/ε)U at 8³.

use std::sync::Arc;

use twofluid::emtf::{gauss_residual, EmtfSolver};
use twofluid::harness::runs::emtf_initial;
use twofluid::limit::random_prepared;
use twofluid::modes::ModeCache;
use twofluid::{Grid, PlasmaParams};

fn main() -> twofluid::Result<()> {
    let grid = Grid::new(8)?;
    let p = PlasmaParams::default();
    let eps = 0.05;
    let u0 = random_prepared(&grid, &p, 1, 1.0, 0.1)?;
    let ue = emtf_initial(&grid, &p, &u0, eps)?;
    let solver = EmtfSolver::new(Arc::new(ModeCache::new(&grid, &p)), eps)?;
    let dt = solver.default_dt(&ue, 0.5)?;
    println!("eps = {eps}, dt = {dt:.3e}");
    solver.integrate(&ue, 0.2, 4, dt, |t, v, u| {
        let g = gauss_residual(&grid, &p, eps, u)?;
        println!("t = {t:.3}  |V - U0| = {:.3e}  |U| = {:.4}  gauss (div B {:.1e}, charge {:.1e})", v.sub(&u0)?.norm(), u.norm(), g.div_b, g.charge);
        Ok(())
    })?;
    Ok(())
}
