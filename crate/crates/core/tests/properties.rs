use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twofluid::harness::verify::random_state;
use twofluid::limit;
use twofluid::modes;
use twofluid::{Grid, PlasmaParams, PressureLaw};

fn params() -> impl Strategy<Value = PlasmaParams> {
    (0.02..0.6f64, 0.8..2.0f64, 0.5..2.0f64, 0.1..1.0f64, 1.0..3.0f64, 0.1..1.0f64, 1.0..3.0f64).prop_map(
        |(m_e, m_i, n_bar, ke, ge, ki, gi)| PlasmaParams {
            m_e,
            m_i,
            n_bar,
            pressure_e: PressureLaw::new(ke, ge).unwrap(),
            pressure_i: PressureLaw::new(ki, gi).unwrap(),
        },
    )
}

fn wavenumber() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-8i32..=8).prop_map(|k| k.map(f64::from))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mode_projectors_are_orthogonal_and_nested(k in wavenumber(), p in params()) {
        let r = modes::check_mode(k, &p, None);
        prop_assert!(r.projector_axioms < 1e-11, "axioms {}", r.projector_axioms);
        prop_assert!(r.oracle_pe < 1e-10 && r.oracle_p < 1e-10);
        prop_assert!(r.group < 1e-11 && r.skew < 1e-12);
    }

    #[test]
    fn closure_inverts(p in params(), q in -0.3..0.3f64) {
        for c in [p.electron(), p.ion()] {
            let n = c.g_inv(q).unwrap();
            prop_assert!((c.g(n).unwrap() - q).abs() < 1e-12 * (1.0 + q.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pe_is_idempotent_on_the_grid(seed in any::<u64>(), p in params()) {
        let grid = Grid::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_state(&grid, &mut rng, grid.cutoff()).unwrap();
        let once = modes::apply_pe(&grid, &p, &u).unwrap();
        let twice = modes::apply_pe(&grid, &p, &once).unwrap();
        prop_assert!(twice.sub(&once).unwrap().norm() <= 1e-12 * u.norm());
        // contraction: an orthogonal projector never increases the norm
        prop_assert!(once.norm() <= u.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn bridge_round_trip(seed in any::<u64>(), amp in 0.05..2.0f64, n0 in -0.2..0.2f64, p in params()) {
        let grid = Grid::new(8).unwrap();
        let u = limit::random_prepared(&grid, &p, seed, amp, n0).unwrap();
        let x = limit::slm_to_xmhd(&grid, &p, &u).unwrap();
        let back = limit::xmhd_to_slm(&grid, &p, &x, limit::density_offset(&p, &u)).unwrap();
        prop_assert!(back.sub(&u).unwrap().norm() <= 1e-12 * u.norm().max(1e-300));
    }

    #[test]
    fn fft_round_trip(seed in any::<u64>()) {
        let grid = Grid::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_state(&grid, &mut rng, 3).unwrap();
        let f = &u.comps[0];
        let back = grid.forward(&grid.inverse(f).unwrap()).unwrap();
        prop_assert!(back.sub(f).norm() <= 1e-14 * f.norm());
    }
}
