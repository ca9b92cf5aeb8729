//! Writing and reading snapshots and diagnostic CSVs of an ESLM run.

use twofluid::harness::config::{Model, RunConfig};
use twofluid::harness::runs::{initial_state, run_eslm};
use twofluid::harness::snapshot::load_snapshot;
use twofluid::harness::trajectory::read_csv;

fn main() -> twofluid::Result<()> {
    let dir = std::env::temp_dir().join("twofluid_snapshot_io");
    std::fs::create_dir_all(&dir)?;
    let mut cfg = RunConfig::new(8, Model::Eslm, 0.2);
    cfg.snapshot_interval = Some(0.05);
    let u0 = initial_state(&cfg)?;
    let run = run_eslm(&cfg, &u0, None, Some(&dir))?;
    println!("wrote {} snapshots to {}", run.trajectory.snapshots.len(), dir.display());
    let last = run.trajectory.snapshots.last().expect("snapshots written");
    let snap = load_snapshot(last, Some(8))?;
    let u = snap.to_state(&twofluid::Grid::new(8)?)?;
    println!("{}: t = {}, basis {}, |U| = {:.6}", last.display(), snap.time, snap.basis, u.norm());
    for r in read_csv(&dir.join("eslm.csv"))? {
        println!("t = {:.2}  l2 = {:.6}  energy = {:.10}", r.t, r.l2_norm, r.energy);
    }
    Ok(())
}
