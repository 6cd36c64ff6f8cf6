//! Threshold `Lambda_b` for the steady states `(rho_a, alpha rho_a/beta, 0)`,
//! the certificate on either side of it, and a simulated decay below it.

use stripe_lab::macroscopic::perturbation_decay_run;
use stripe_lab::stability::{certificate_threshold, dissipativity_certificate};
use stripe_lab::{HypothesisConstants, ModelParams, MotilityProfile, PeriodicGrid, StepControl};

fn main() -> stripe_lab::Result<()> {
    // the default motility varies strongly in z, which makes b large and
    // Lambda_b tiny; a flatter profile and weak AHL production widen the window
    let params = ModelParams {
        alpha: 0.1,
        beta: 2.0,
        d_h: 2.0,
        motility: MotilityProfile::Cosine {
            lambda_c: 2.0,
            lambda_a: 0.05,
            mu_c: 1.0,
            mu_a: 0.0,
        },
        ..ModelParams::default()
    };
    let grid = PeriodicGrid::torus(1, 64, 8, params.z_w)?;
    let c = HypothesisConstants::compute(&params, grid.length_x(), 4096)?;
    println!("b = {:.6}, d = {:.6}, C_p = {:.6}", c.b, c.d, c.c_p);
    println!("Lambda_b = {:.6e}", c.lambda_b);
    let found = certificate_threshold(&params, &c, 10.0 * c.lambda_b, 1e-10)?;
    println!("bisection threshold = {found:.6e}");
    for frac in [0.25, 0.5, 0.99, 1.01, 2.0] {
        let rho_a = frac * c.lambda_b;
        let cert = dissipativity_certificate(rho_a, &params, &c)?;
        println!("rho_a = {rho_a:.4e}: certified = {}", cert.is_certified());
    }

    let rho_a = 0.5 * c.lambda_b;
    let control = StepControl {
        t_end: 2.0,
        snapshot_every: 20,
        ..StepControl::default()
    };
    let run = perturbation_decay_run(rho_a, 1e-3 * rho_a, 1, &params, grid, &control)?;
    if let Some(fit) = run.energy_fit {
        println!("perturbation energy rate at rho_a = {rho_a:.4e}: {:.5} (monotone: {})", fit.rate, run.monotone);
    }
    Ok(())
}
