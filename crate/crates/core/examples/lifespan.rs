//! Gronwall constant measured on a kinetic run, then the existence-time
//! lower bound it implies for a range of initial energies.

use stripe_lab::diagnostics::gronwall_audit;
use stripe_lab::kinetic::random_state;
use stripe_lab::stability::lifespan_lower_bound;
use stripe_lab::{DiagnosticsSpec, KineticSolver, ModelParams, PeriodicGrid, StepControl};

fn main() -> stripe_lab::Result<()> {
    let params = ModelParams::default();
    let s = params.sobolev_s;
    let grid = PeriodicGrid::torus(1, 32, 16, params.z_w)?;
    let init = random_state(grid, 5, [1.0, 1.0, 1.0]);
    let control = StepControl {
        t_end: 0.5,
        snapshot_every: 20,
        ..StepControl::default()
    };
    let spec = DiagnosticsSpec {
        energies: true,
        ..DiagnosticsSpec::default()
    };
    let traj = KineticSolver::new(&params, grid)?.run(&init, &control, &spec, &mut [])?;
    let audit = gronwall_audit(&traj.records, params.eps, s)?;
    println!("C = {:.4e} over {} samples, {} violations", audit.c, audit.samples, audit.violations);
    let c = audit.c.max(1e-3);
    for e in [0.01, 0.1, 1.0, 10.0] {
        println!("E(0) = {e:<6} T0 >= {:.4}", lifespan_lower_bound(e, params.eps, s, c)?);
    }
    Ok(())
}
