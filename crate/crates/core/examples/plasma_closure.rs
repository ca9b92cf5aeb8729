//! Density closure q = g(n) of each species and the derived coefficients.

use twofluid::PlasmaParams;

fn main() -> twofluid::Result<()> {
    let p = PlasmaParams::default();
    p.validate()?;
    println!("{:#?}", p.derived());
    for (name, c) in [("electron", p.electron()), ("ion", p.ion())] {
        println!("{name}: sound speed {:.4}", c.a_bar());
        for n in [0.5, 0.9, 1.0, 1.1, 2.0] {
            let q = c.g(n)?;
            println!("  n = {n:<4} q = g(n) = {q:+.6}  g_inv(q) = {:.12}", c.g_inv(q)?);
        }
    }
    // a breach of the vacuum floor is an error
    match p.electron().g_inv(-10.0) {
        Err(e) => println!("g_inv(-10): {e}"),
        Ok(n) => println!("g_inv(-10) = {n}"),
    }
    Ok(())
}
