//! Growth rates of the linearizations about `(0, 0, n0)`.

use stripe_lab::stability::{kinetic_eigenvalues, macro_eigenvalues};
use stripe_lab::ModelParams;

fn main() -> stripe_lab::Result<()> {
    let params = ModelParams::default();
    let n0 = 1.0;
    println!("macro, n0 = {n0}");
    for m in 0..=6 {
        let p = macro_eigenvalues(&[m], n0, &params)?;
        println!("  m = {m}: {:>10.5} {:>10.5} {:>10.5}", p.lambda1, p.lambda2, p.lambda3.re);
    }
    println!("kinetic at z = Z_w, n0 = {n0}");
    for m in 0..=3 {
        for m_z in [0, 1, 4] {
            let p = kinetic_eigenvalues(&[m], m_z, params.z_w, n0, &params)?;
            println!(
                "  m = {m}, m_z = {m_z}: lambda3 = {:.5} {:+.5}i",
                p.lambda3.re, p.lambda3.im
            );
        }
    }
    Ok(())
}
