//! Fast-time average of the nonlinearity compared with the slow-limit RHS,
//! and the 1/T decay of the mean value of S(τ)U.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twofluid::harness::verify::random_state;
use twofluid::limit;
use twofluid::modes::{self, ModeCache};
use twofluid::{Grid, PlasmaParams};

fn main() -> twofluid::Result<()> {
    let grid = Grid::new(8)?;
    let p = PlasmaParams::default();
    let cache = ModeCache::new(&grid, &p);
    let u = limit::random_prepared(&grid, &p, 4, 1.0, 0.1)?;
    let eslm = limit::eslm_rhs(&grid, &p, &u)?;
    for t_avg in [5.0, 10.0, 20.0] {
        let nodes = (t_avg * 40.0) as usize;
        let quad = limit::flm_rhs_quadrature(&cache, &u, t_avg, nodes)?;
        let bound = limit::flm_error_bound(&cache, &u, t_avg, nodes)?;
        println!("T = {t_avg:<4} |average - eslm| = {:.3e}  bound {bound:.3e}", quad.sub(&eslm)?.norm());
    }
    // the oscillating part of a random state averages out like 1/T
    let w = random_state(&grid, &mut ChaCha8Rng::seed_from_u64(1), grid.cutoff())?;
    let q = w.sub(&modes::apply_p(&grid, &p, &w)?)?;
    let decay = limit::average_decay(&cache, &q, 40.0, 4000)?;
    let env = limit::decay_envelope(&decay);
    let tail: Vec<_> = env.into_iter().filter(|(t, _)| *t >= 4.0).collect();
    println!("mean-value decay slope {:.3}", limit::loglog_slope(&tail));
    Ok(())
}
