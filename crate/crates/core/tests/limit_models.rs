use twofluid::limit::{self, XmhdState};
use twofluid::modes::{self, ModeCache};
use twofluid::plasma::{BF, U_E, U_I};
use twofluid::{emtf, Grid, PlasmaParams};

fn rel(a: f64, b: f64) -> f64 {
    a / b.max(1e-300)
}

#[test]
fn bridge_round_trips() {
    let grid = Grid::new(16).unwrap();
    let p = PlasmaParams::default();
    let u = limit::random_prepared(&grid, &p, 3, 1.0, 0.2).unwrap();
    let x = limit::slm_to_xmhd(&grid, &p, &u).unwrap();
    let back = limit::xmhd_to_slm(&grid, &p, &x, limit::density_offset(&p, &u)).unwrap();
    let err = back.sub(&u).unwrap().norm();
    assert!(rel(err, u.norm()) < 1e-12, "slm round trip {err:e}");
    let again = limit::slm_to_xmhd(&grid, &p, &back).unwrap();
    assert!(rel(again.sub(&x).norm(), x.norm()) < 1e-12);
}

#[test]
fn eslm_rhs_matches_projected_fast_rhs() {
    let grid = Grid::new(16).unwrap();
    let p = PlasmaParams::default();
    for seed in 0..3 {
        let u = limit::random_prepared(&grid, &p, seed, 1.0, 0.1).unwrap();
        let r = limit::eslm_rhs(&grid, &p, &u).unwrap();
        let n = emtf::rhs_nonstiff(&grid, &p, 0.0, &u).unwrap();
        let pn = modes::apply_pe(&grid, &p, &n).unwrap();
        let err = pn.sub(&r).unwrap().norm();
        println!("seed {seed}: |eslm - Pe N| = {err:e}, |eslm| = {:e}", r.norm());
        assert!(rel(err, r.norm()) < 1e-10);
        let pr = modes::apply_pe_global(&grid, &p, &r).unwrap();
        assert!(rel(pr.sub(&r).unwrap().norm(), r.norm()) < 1e-10);
        let red = limit::redundancy_residual(&grid, &p, &r).unwrap();
        println!("redundancy {red:e}");
        assert!(red < 1e-9);
    }
}

#[test]
fn bridged_rhs_matches_xmhd() {
    let grid = Grid::new(16).unwrap();
    let p = PlasmaParams::default();
    for seed in 0..3 {
        let u = limit::random_prepared(&grid, &p, 100 + seed, 1.0, 0.0).unwrap();
        let r = limit::eslm_rhs(&grid, &p, &u).unwrap();
        let dx = limit::bridge_linear(&grid, &p, &r).unwrap();
        let x = limit::slm_to_xmhd(&grid, &p, &u).unwrap();
        let xr = limit::xmhd_rhs(&grid, &p, &x).unwrap();
        let err = dx.sub(&xr).norm();
        println!("seed {seed}: |dJ eslm - xmhd| = {err:e}, |xmhd| = {:e}", xr.norm());
        assert!(err < 1e-8);
    }
}

#[test]
fn dual_path_pe() {
    let grid = Grid::new(16).unwrap();
    let p = PlasmaParams::default();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let mut s = twofluid::State::zeros(16, twofluid::Basis::Symmetrized);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        for c in s.comps.iter_mut() {
            for v in c.coef.iter_mut() {
                *v = twofluid::spectral::C64::new(rand::Rng::gen_range(&mut rng, -1.0..1.0), rand::Rng::gen_range(&mut rng, -1.0..1.0));
            }
        }
        let a = modes::apply_pe(&grid, &p, &s).unwrap();
        let b = modes::apply_pe_global(&grid, &p, &s).unwrap();
        worst = worst.max(rel(a.sub(&b).unwrap().norm(), s.norm()));
    }
    println!("dual path {worst:e}");
    assert!(worst < 1e-11);
    let _ = (U_E, U_I, BF, XmhdState::zeros(8), ModeCache::new(&Grid::new(8).unwrap(), &p).omega_max());
}
