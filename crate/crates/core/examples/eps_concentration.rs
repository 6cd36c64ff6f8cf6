//! Relaxation of a frozen `z` column towards `L_l(h)`: the second moment
//! about the switch level decays like `exp(-2 k_V t / eps)`.

use stripe_lab::diagnostics::fit_exponential;
use stripe_lab::kinetic::run_frozen_column;
use stripe_lab::ModelParams;

fn main() -> stripe_lab::Result<()> {
    let n_z = 512;
    for eps in [1.0, 0.1, 0.01] {
        let params = ModelParams {
            eps,
            ..ModelParams::default()
        };
        let column: Vec<f64> = vec![1.0; n_z];
        let t_end = 2.0 * eps;
        let trace = run_frozen_column(&column, 0.0, &params, t_end, 0.9)?;
        let window: Vec<(f64, f64)> = trace.into_iter().filter(|&(t, _)| t >= 0.1 * t_end).collect();
        let fit = fit_exponential(&window)?;
        println!(
            "eps = {eps:<5} fitted rate = {:>10.3}  expected = {:>10.3}",
            fit.rate,
            -2.0 * params.k_v / eps
        );
    }
    Ok(())
}
