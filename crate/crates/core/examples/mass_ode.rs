//! Closed-form total masses against a simulated homogeneous macro state.

use stripe_lab::stability::{mass_ode_solution, Masses};
use stripe_lab::{DiagnosticsSpec, MacroModel, MacroSolver, MacroState, ModelParams, PeriodicGrid, StepControl};

fn main() -> stripe_lab::Result<()> {
    let params = ModelParams::default();
    let grid = PeriodicGrid::torus(1, 16, 8, params.z_w)?;
    let vol = grid.volume_x();
    // tiny density keeps the nutrient close to n0 over the run
    let (rho0, h0, n0) = (1e-6, 0.0, 1.0);
    let init = MacroState::constant(grid, rho0, h0, n0);
    let control = StepControl {
        t_end: 2.0,
        dt: 1e-3,
        adaptive: false,
        snapshot_every: 250,
        ..StepControl::default()
    };
    let traj = MacroSolver::new(&params, grid, MacroModel::AdEecp)?.run(&init, &control, &DiagnosticsSpec::default(), &mut [])?;
    let start = Masses {
        rho: rho0 * vol,
        h: h0 * vol,
        n: n0 * vol,
    };
    println!("{:>6} {:>14} {:>14} {:>10}", "t", "simulated", "closed form", "rel err");
    for r in &traj.records {
        let exact = mass_ode_solution(start, n0, &params, r.t)?;
        println!(
            "{:>6.2} {:>14.8e} {:>14.8e} {:>10.2e}",
            r.t,
            r.mass_rho,
            exact.rho,
            (r.mass_rho / exact.rho - 1.0).abs()
        );
    }
    Ok(())
}
