//! AD-EECP and the Science-2011 comparison model from the same perturbed
//! homogeneous state. Prints mode amplitudes of `rho` as they evolve.

use stripe_lab::{
    DiagnosticsSpec, FieldSel, MacroModel, MacroSolver, MacroState, ModelParams, PeriodicGrid, ScalarField, StepControl,
};

fn main() -> stripe_lab::Result<()> {
    let params = ModelParams::default();
    let grid = PeriodicGrid::torus(1, 128, 8, params.z_w)?;
    let rho = ScalarField::from_fn(grid, |x| 1e-3 * (1.0 + 0.1 * (x[0].cos() + (3.0 * x[0]).cos())));
    let init = MacroState::new(0.0, rho, ScalarField::zeros(grid), ScalarField::constant(grid, 1.0))?;
    let control = StepControl {
        t_end: 5.0,
        snapshot_every: 500,
        ..StepControl::default()
    };
    let spec = DiagnosticsSpec {
        modes: vec![1, 3],
        mode_fields: vec![FieldSel::Rho],
        ..DiagnosticsSpec::default()
    };
    for model in [MacroModel::AdEecp, MacroModel::Science2011] {
        let traj = MacroSolver::new(&params, grid, model)?.run(&init, &control, &spec, &mut [])?;
        println!("{model:?}");
        for r in &traj.records {
            println!(
                "  t = {:>6.3}  |rho_1| = {:.4e}  |rho_3| = {:.4e}  mass = {:.6e}",
                r.t,
                r.mode(FieldSel::Rho, 1).unwrap_or(0.0),
                r.mode(FieldSel::Rho, 3).unwrap_or(0.0),
                r.mass_rho
            );
        }
    }
    Ok(())
}
