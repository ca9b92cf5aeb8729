//! Velocities with δ curl v_e = -curl v_i force B = 0 and leave nothing to evolve.

use twofluid::limit::{irrotational_check, irrotational_velocities};
use twofluid::{Grid, PlasmaParams};

fn main() -> twofluid::Result<()> {
    let grid = Grid::new(16)?;
    for m_e in [0.25, 0.05] {
        let p = PlasmaParams { m_e, ..Default::default() };
        let (ve, vi) = irrotational_velocities(&grid, &p, 3, 1.0)?;
        let r = irrotational_check(&grid, &p, &ve, &vi)?;
        println!("m_e = {m_e}: {r:?}");
    }
    Ok(())
}
