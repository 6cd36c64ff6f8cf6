//! A colony inoculated at the origin spreading under the kinetic model.
//! Prints the conserved combination and the smallest values per record.

use stripe_lab::kinetic::inoculum;
use stripe_lab::{DiagnosticsSpec, KineticSolver, ModelParams, PeriodicGrid, StepControl};

fn main() -> stripe_lab::Result<()> {
    let params = ModelParams::default();
    let grid = PeriodicGrid::new(1, 64, 20.0, 32, params.z_w)?;
    let init = inoculum(grid, 1.0, 0.5, 0.1, 1.0)?;
    let control = StepControl {
        t_end: 2.0,
        snapshot_every: 200,
        ..StepControl::default()
    };
    let traj = KineticSolver::new(&params, grid)?.run(&init, &control, &DiagnosticsSpec::default(), &mut [])?;
    println!("{:>8} {:>14} {:>12} {:>12} {:>12}", "t", "invariant", "mass_n", "min_rho", "min_h");
    for r in &traj.records {
        println!(
            "{:>8.3} {:>14.10} {:>12.6} {:>12.3e} {:>12.3e}",
            r.t, r.combined_invariant, r.mass_n, r.min_rho, r.min_h
        );
    }
    println!("{} steps", traj.steps);
    Ok(())
}
