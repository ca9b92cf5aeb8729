//! Per-mode kernel bases and projectors checked against an SVD nullspace oracle.

use twofluid::modes::{check_mode, lattice};
use twofluid::PlasmaParams;

fn main() {
    let p = PlasmaParams { m_e: 0.1, ..Default::default() };
    for k in [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, -3.0, 1.0], [8.0, 8.0, -8.0]] {
        let r = check_mode(k, &p, None);
        println!(
            "k = {k:?}: dim Ker L_k = {}, dim H_k = {}, |P_e - oracle| = {:.1e}, |P - oracle| = {:.1e}, group {:.1e}",
            r.dim_kernel, r.dim_h, r.oracle_pe, r.oracle_p, r.group
        );
    }
    let worst = lattice(4).iter().map(|k| check_mode(*k, &p, None).oracle_pe).fold(0.0, f64::max);
    println!("worst oracle distance over |k| <= 4: {worst:.2e}");
}
