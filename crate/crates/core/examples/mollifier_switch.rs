//! The smoothed AHL switch `L_l(h)` and the composed motility `D~(h)`
//! across the threshold.

use stripe_lab::model::{composed_motility, kappa0, smoothed_switch};
use stripe_lab::ModelParams;

fn main() -> stripe_lab::Result<()> {
    let params = ModelParams::default();
    println!("kappa0 = {:.15}", kappa0());
    println!("h_bar = {}, ell = {}, Z_w = {}", params.h_bar, params.ell, params.z_w);
    println!("{:>10} {:>12} {:>12}", "h", "L_l(h)", "D~(h)");
    let (lo, hi) = (params.h_bar - 2.0 * params.ell, params.h_bar + 2.0 * params.ell);
    for i in 0..=16 {
        let h = lo + (hi - lo) * i as f64 / 16.0;
        println!("{h:>10.4} {:>12.6} {:>12.6}", smoothed_switch(h, &params), composed_motility(h, &params)?);
    }
    Ok(())
}
