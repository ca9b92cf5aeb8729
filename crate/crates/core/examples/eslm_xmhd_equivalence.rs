//! The slow-limit model and extended MHD agree after bridging, both at the
//! level of right-hand sides and along paired runs.

use twofluid::harness::config::{Model, RunConfig};
use twofluid::harness::runs::{initial_state, run_paired};
use twofluid::limit;

fn main() -> twofluid::Result<()> {
    let mut cfg = RunConfig::new(16, Model::Paired, 0.3);
    cfg.seed = 2;
    cfg.write_snapshots = false;
    let grid = twofluid::Grid::new(cfg.grid)?;
    let p = cfg.plasma;
    let u = initial_state(&cfg)?;

    let lhs = limit::bridge_linear(&grid, &p, &limit::eslm_rhs(&grid, &p, &u)?)?;
    let rhs = limit::xmhd_rhs(&grid, &p, &limit::slm_to_xmhd(&grid, &p, &u)?)?;
    println!("|dJ eslm_rhs - xmhd_rhs| = {:.2e}", lhs.sub(&rhs).norm());

    let (_, xmhd, report) = run_paired(&cfg, &u, None)?;
    println!("paired runs: dt = {:.3e}, max relative difference {:.2e}", report.dt, report.max_relative_difference);
    for r in &xmhd.trajectory.rows {
        println!("t = {:.3}  energy = {:.12}", r.t, r.energy);
    }
    Ok(())
}
