use proptest::prelude::*;
use stripe_lab::diagnostics::{energy_kinetic, energy_macro, gronwall_audit};
use stripe_lab::kinetic;
use stripe_lab::macroscopic::random_macro_state;
use stripe_lab::{
    DiagnosticsRecord, DiagnosticsSpec, HypothesisConstants, KineticSolver, MacroModel, MacroState, ModelParams,
    MotilityProfile, PeriodicGrid, StepControl,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn macro_energies_nonnegative_and_monotone_in_s(seed in 0u64..10_000, scale in 0.1f64..3.0) {
        let params = ModelParams::default();
        let grid = PeriodicGrid::torus(1, 32, 8, params.z_w).unwrap();
        let state = random_macro_state(grid, seed, [scale, scale, scale]);
        let lo = energy_macro(&state, &params, MacroModel::AdEecp, 4).unwrap();
        let hi = energy_macro(&state, &params, MacroModel::AdEecp, 5).unwrap();
        for (a, b) in [(lo.0, hi.0), (lo.1, hi.1), (lo.2, hi.2), (lo.3, hi.3)] {
            prop_assert!(a >= 0.0);
            prop_assert!(b >= a * (1.0 - 1e-12));
        }
    }

    #[test]
    fn kinetic_energies_nonnegative_and_monotone_in_s(seed in 0u64..10_000) {
        let params = ModelParams::default();
        let grid = PeriodicGrid::torus(1, 16, 16, params.z_w).unwrap();
        let c = HypothesisConstants::compute(&params, grid.length_x(), 512).unwrap();
        let state = kinetic::random_state(grid, seed, [1.0, 1.0, 1.0]);
        let (e3, d3) = energy_kinetic(&state, &params, &c, 3).unwrap();
        let (e4, d4) = energy_kinetic(&state, &params, &c, 4).unwrap();
        prop_assert!(e3 >= 0.0 && d3 >= 0.0);
        prop_assert!(e4 >= e3 && d4 >= d3);
    }

    #[test]
    fn mobility_energy_controlled_by_energy_power(seed in 0u64..10_000, scale in 0.1f64..2.0) {
        // ||D~(h)||_{H^s}^2 <= C (1 + E_l^s) with C = b^2 |Omega| 4^s
        let params = ModelParams::default();
        let s = 4u32;
        let grid = PeriodicGrid::torus(1, 32, 8, params.z_w).unwrap();
        let c = HypothesisConstants::compute(&params, grid.length_x(), 1024).unwrap();
        let state = random_macro_state(grid, seed, [scale, scale, scale]);
        let (e_l, _, ee_l, _) = energy_macro(&state, &params, MacroModel::AdEecp, s).unwrap();
        let bound = c.b * c.b * grid.volume_x() * 4f64.powi(s as i32) * (1.0 + e_l.powi(s as i32));
        prop_assert!(ee_l <= bound, "{ee_l} > {bound}");
    }
}

#[test]
fn zero_states_have_zero_energy() {
    let params = ModelParams::default();
    let grid = PeriodicGrid::torus(1, 16, 16, params.z_w).unwrap();
    let c = HypothesisConstants::compute(&params, grid.length_x(), 512).unwrap();
    let k = kinetic::homogeneous(grid, &[0.0; 16], 0.0, 0.0).unwrap();
    assert_eq!(energy_kinetic(&k, &params, &c, 3).unwrap(), (0.0, 0.0));
    let m = MacroState::constant(grid, 0.0, 0.0, 0.0);
    let (e, d, _, dd) = energy_macro(&m, &params, MacroModel::AdEecp, 4).unwrap();
    assert_eq!((e, d, dd), (0.0, 0.0, 0.0));
}

#[test]
fn constant_mobility_has_no_mobility_dissipation() {
    let params = ModelParams {
        motility: MotilityProfile::Constant { lambda: 1.0, mu: 2.0 },
        ..ModelParams::default()
    };
    let grid = PeriodicGrid::torus(1, 32, 8, params.z_w).unwrap();
    let state = random_macro_state(grid, 3, [1.0, 2.0, 1.0]);
    let (_, _, ee, dd) = energy_macro(&state, &params, MacroModel::AdEecp, 4).unwrap();
    assert!(dd.abs() < 1e-20 * ee.max(1.0), "{dd}");
}

fn kinetic_records(eps: f64, every: usize, dt: f64) -> Vec<DiagnosticsRecord> {
    let params = ModelParams {
        eps,
        ..ModelParams::default()
    };
    let grid = PeriodicGrid::torus(1, 32, 16, params.z_w).unwrap();
    let init = kinetic::random_state(grid, 21, [1.0, 1.0, 1.0]);
    let ctl = StepControl {
        dt,
        adaptive: false,
        t_end: 0.4,
        snapshot_every: every,
        ..StepControl::default()
    };
    let spec = DiagnosticsSpec {
        energies: true,
        ..DiagnosticsSpec::default()
    };
    KineticSolver::new(&params, grid)
        .unwrap()
        .run(&init, &ctl, &spec, &mut [])
        .unwrap()
        .records
}

#[test]
fn gronwall_constant_stable_under_record_refinement() {
    let coarse = gronwall_audit(&kinetic_records(1.0, 40, 5e-4), 1.0, 4).unwrap();
    let fine = gronwall_audit(&kinetic_records(1.0, 20, 5e-4), 1.0, 4).unwrap();
    assert!(coarse.c.is_finite() && fine.c.is_finite());
    assert_eq!(coarse.violations + fine.violations, 0);
    assert!((fine.c / coarse.c - 1.0).abs() <= 0.2, "{} vs {}", coarse.c, fine.c);
}

#[test]
fn gronwall_constant_under_halved_eps() {
    let a = gronwall_audit(&kinetic_records(1.0, 20, 5e-4), 1.0, 4).unwrap();
    let b = gronwall_audit(&kinetic_records(0.5, 20, 5e-4), 0.5, 4).unwrap();
    assert!(b.c <= 2.0 * a.c * 1.1, "{} vs {}", a.c, b.c);
}
