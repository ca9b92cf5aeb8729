//! Small convergence study: EMTF runs for a ladder of ε against the slow limit.
//! Pass a grid size as the first argument (default 8).

use twofluid::harness::config::{Model, RunConfig};
use twofluid::harness::study::convergence_study;

fn main() -> twofluid::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let mut cfg = RunConfig::new(n, Model::Emtf, 0.1);
    cfg.epsilon_ladder = Some(vec![0.1, 0.05, 0.025]);
    cfg.seed = 7;
    cfg.write_snapshots = false;
    let report = convergence_study(&cfg, None)?;
    for e in &report.entries {
        println!("eps {:<6} H1 error {:.3e}  L2 error {:.3e}  ratio {:?}  gauss growth {:.2}", e.epsilon, e.error_hsigma, e.error_l2, e.ratio, e.gauss_growth);
    }
    println!("fitted slope {:?}, passed {}", report.fitted_slope, report.passed());
    Ok(())
}
