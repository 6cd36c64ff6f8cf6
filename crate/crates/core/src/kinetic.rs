//! Method-of-lines integration of the kinetic system for `(rho, h, n)`.
//!
//! Spatial diffusion uses the centred periodic Laplacian, the CheZ transport
//! in `z` the conservative upwind scheme of [`crate::grid`], and time
//! stepping is SSP-RK2 (Heun). The reaction terms `gamma n rho` and
//! `-xi rho_bar n` are built from the same products so that
//! `mass(rho) + (gamma/xi) mass(n)` is conserved up to rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{DiagnosticsRecord, DiagnosticsSpec, Recorder};
use crate::error::{Error, Result};
use crate::grid::{z_flux_column, KineticField, PeriodicGrid, ScalarField};
use crate::model::{motility_unchecked, smoothed_switch, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub t: f64,
    pub rho: KineticField,
    pub h: ScalarField,
    pub n: ScalarField,
}

impl KineticState {
    pub fn new(t: f64, rho: KineticField, h: ScalarField, n: ScalarField) -> Result<Self> {
        if rho.grid() != h.grid() || h.grid() != n.grid() {
            return Err(Error::GridMismatch("rho, h and n must share one grid".into()));
        }
        Ok(Self { t, rho, h, n })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            t: 0.0,
            rho: KineticField::zeros(grid),
            h: ScalarField::zeros(grid),
            n: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.rho.grid()
    }

    /// Cell density `rho_bar = int rho dz`.
    pub fn density(&self) -> ScalarField {
        self.rho.integrate_z()
    }

    pub fn mass_rho(&self) -> f64 {
        self.rho.integral()
    }

    pub fn mass_n(&self) -> f64 {
        self.n.integral()
    }

    /// `mass(rho) + (gamma/xi) mass(n)`.
    pub fn invariant(&self, params: &ModelParams) -> f64 {
        self.mass_rho() + params.nutrient_weight() * self.mass_n()
    }

    fn is_finite(&self) -> bool {
        self.rho.values().iter().chain(self.h.values()).chain(self.n.values()).all(|v| v.is_finite())
    }
}

/// Time derivatives of `(rho, h, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticRates {
    pub rho: KineticField,
    pub h: ScalarField,
    pub n: ScalarField,
}

/// Time-step configuration shared by both solvers.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct StepControl {
    /// Requested step (upper bound when `adaptive`).
    pub dt: f64,
    /// Shrink `dt` to the admissible bound instead of refusing to step.
    pub adaptive: bool,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub positivity_tol: f64,
    /// Steps between diagnostics records and snapshots.
    pub snapshot_every: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            adaptive: true,
            t_end: 1.0,
            cfl_safety: 0.9,
            positivity_tol: 1e-12,
            snapshot_every: 100,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::ParameterDomain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::ParameterDomain(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::ParameterDomain(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if !(self.positivity_tol >= 0.0) {
            return Err(Error::ParameterDomain("positivity_tol must be nonnegative".into()));
        }
        if self.snapshot_every == 0 {
            return Err(Error::ParameterDomain("snapshot_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Receives every diagnostics record together with the state it describes.
pub trait Sink<S> {
    fn record(&mut self, state: &S, record: &DiagnosticsRecord) -> Result<()>;
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub final_state: S,
    pub records: Vec<DiagnosticsRecord>,
    pub steps: usize,
}

/// Kinetic solver with the `z`-dependent motility precomputed.
#[derive(Debug, Clone)]
pub struct KineticSolver {
    params: ModelParams,
    grid: PeriodicGrid,
    motility_z: Vec<f64>,
    motility_max: f64,
}

impl KineticSolver {
    pub fn new(params: &ModelParams, grid: PeriodicGrid) -> Result<Self> {
        params.validate()?;
        if (grid.z_w() - params.z_w).abs() > 1e-12 * params.z_w {
            return Err(Error::GridMismatch(format!(
                "grid z period {} differs from Z_w = {}",
                grid.z_w(),
                params.z_w
            )));
        }
        let motility_z: Vec<f64> = grid.z_nodes().iter().map(|&z| motility_unchecked(z, params)).collect();
        let motility_max = motility_z.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            params: *params,
            grid,
            motility_z,
            motility_max,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// `D(z_j)` at the `z` cell centres.
    pub fn motility_profile(&self) -> &[f64] {
        &self.motility_z
    }

    fn rhs_into(&self, rho: &[f64], h: &[f64], n: &[f64], out_rho: &mut [f64], out_h: &mut [f64], out_n: &mut [f64]) {
        let p = &self.params;
        let grid = &self.grid;
        let n_z = grid.n_z();
        let dz = grid.dz();

        grid.laplacian_kinetic(rho, out_rho);
        grid.laplacian_scalar(h, out_h);
        grid.laplacian_scalar(n, out_n);

        let mut flux = vec![0.0; n_z];
        for node in 0..grid.n_nodes() {
            let range = node * n_z..(node + 1) * n_z;
            let column = &rho[range.clone()];
            let level = smoothed_switch(h[node], p);
            z_flux_column(column, level, p.k_v, p.eps, dz, &mut flux);
            let growth = p.gamma * n[node];
            let density = column.iter().sum::<f64>() * dz;
            for (j, out) in out_rho[range].iter_mut().enumerate() {
                *out = self.motility_z[j] * *out - flux[j] + growth * column[j];
            }
            out_h[node] = p.d_h * out_h[node] + p.alpha * density - p.beta * h[node];
            out_n[node] = p.d_n * out_n[node] - p.xi * density * n[node];
        }
    }

    pub fn rhs(&self, state: &KineticState) -> Result<KineticRates> {
        if *state.grid() != self.grid {
            return Err(Error::GridMismatch("state grid differs from solver grid".into()));
        }
        let mut r = vec![0.0; state.rho.values().len()];
        let mut h = vec![0.0; self.grid.n_nodes()];
        let mut n = vec![0.0; self.grid.n_nodes()];
        self.rhs_into(state.rho.values(), state.h.values(), state.n.values(), &mut r, &mut h, &mut n);
        Ok(KineticRates {
            rho: KineticField::new(self.grid, r)?,
            h: ScalarField::new(self.grid, h)?,
            n: ScalarField::new(self.grid, n)?,
        })
    }

    /// Largest step keeping both forward-Euler stages of SSP-RK2 stable and
    /// sign-preserving for the current state.
    pub fn admissible_dt(&self, state: &KineticState, control: &StepControl) -> f64 {
        let p = &self.params;
        let g = &self.grid;
        let dim = g.dim_x() as f64;
        let inv_dx2 = 1.0 / (g.dx() * g.dx());
        let diffusion = 2.0 * dim * self.motility_max.max(p.d_h).max(p.d_n) * inv_dx2;
        let transport = p.k_v * 2.0 * p.z_w / (p.eps * g.dz());
        let cfl = (1.0 / diffusion).min(1.0 / transport);

        let density_max = state.density().max().max(0.0);
        let rate_rho = 2.0 * dim * self.motility_max * inv_dx2 + p.k_v * p.z_w / (p.eps * g.dz());
        let rate_h = 2.0 * dim * p.d_h * inv_dx2 + p.beta;
        let rate_n = 2.0 * dim * p.d_n * inv_dx2 + p.xi * density_max;
        let positivity = 1.0 / rate_rho.max(rate_h).max(rate_n);
        control.cfl_safety * cfl.min(positivity)
    }

    /// One SSP-RK2 step of size `dt` (no admissibility check).
    pub fn advance(&self, state: &KineticState, dt: f64) -> Result<KineticState> {
        let len_r = state.rho.values().len();
        let len_x = self.grid.n_nodes();
        let (r0, h0, n0) = (state.rho.values(), state.h.values(), state.n.values());
        let mut kr = vec![0.0; len_r];
        let mut kh = vec![0.0; len_x];
        let mut kn = vec![0.0; len_x];

        self.rhs_into(r0, h0, n0, &mut kr, &mut kh, &mut kn);
        let r1: Vec<f64> = r0.iter().zip(&kr).map(|(u, k)| u + dt * k).collect();
        let h1: Vec<f64> = h0.iter().zip(&kh).map(|(u, k)| u + dt * k).collect();
        let n1: Vec<f64> = n0.iter().zip(&kn).map(|(u, k)| u + dt * k).collect();

        self.rhs_into(&r1, &h1, &n1, &mut kr, &mut kh, &mut kn);
        let heun = |u0: &[f64], u1: &[f64], k: &[f64]| -> Vec<f64> {
            u0.iter().zip(u1).zip(k).map(|((a, b), k)| 0.5 * a + 0.5 * (b + dt * k)).collect()
        };
        let next = KineticState {
            t: state.t + dt,
            rho: KineticField::new_unchecked(self.grid, heun(r0, &r1, &kr)),
            h: ScalarField::new_unchecked(self.grid, heun(h0, &h1, &kh)),
            n: ScalarField::new_unchecked(self.grid, heun(n0, &n1, &kn)),
        };
        if !next.is_finite() {
            return Err(Error::Divergence {
                t: next.t,
                what: "non-finite value in kinetic state".into(),
            });
        }
        Ok(next)
    }

    /// Step size for the next step, or a CFL error when a fixed step is
    /// too large.
    pub fn choose_dt(&self, state: &KineticState, control: &StepControl) -> Result<f64> {
        let max = self.admissible_dt(state, control);
        let remaining = control.t_end - state.t;
        let requested = control.dt.min(remaining.max(0.0));
        if control.adaptive {
            Ok(requested.min(max))
        } else if control.dt > max {
            Err(Error::Cfl { dt: control.dt, max })
        } else {
            Ok(requested)
        }
    }

    pub fn run(
        &self,
        initial: &KineticState,
        control: &StepControl,
        diagnostics: &DiagnosticsSpec,
        sinks: &mut [&mut dyn Sink<KineticState>],
    ) -> Result<Trajectory<KineticState>> {
        control.validate()?;
        let mut recorder = Recorder::new(&self.params, &self.grid, diagnostics)?;
        let mut records = Vec::new();
        let mut emit = |state: &KineticState, sinks: &mut [&mut dyn Sink<KineticState>]| -> Result<()> {
            let record = recorder.kinetic(state)?;
            for sink in sinks.iter_mut() {
                sink.record(state, &record)?;
            }
            records.push(record);
            Ok(())
        };

        let mut state = initial.clone();
        emit(&state, sinks)?;
        let mut steps = 0usize;
        // stop when the remaining interval is below rounding of t_end
        let t_tol = 1e-12 * control.t_end.max(1.0);
        while control.t_end - state.t > t_tol {
            let dt = self.choose_dt(&state, control)?;
            let mut next = self.advance(&state, dt)?;
            if control.t_end - next.t <= t_tol {
                next.t = control.t_end;
            }
            state = next;
            steps += 1;
            let done = control.t_end - state.t <= t_tol;
            if steps % control.snapshot_every == 0 || done {
                emit(&state, sinks)?;
            }
        }
        Ok(Trajectory {
            final_state: state,
            records,
            steps,
        })
    }
}

/// Kinetic right-hand side.
pub fn kinetic_rhs(state: &KineticState, params: &ModelParams) -> Result<KineticRates> {
    KineticSolver::new(params, *state.grid())?.rhs(state)
}

/// One step of size `control.dt`; refuses to step when `dt` exceeds the
/// admissible bound.
pub fn kinetic_step(state: &KineticState, params: &ModelParams, control: &StepControl) -> Result<KineticState> {
    let solver = KineticSolver::new(params, *state.grid())?;
    let max = solver.admissible_dt(state, control);
    if control.dt > max {
        return Err(Error::Cfl { dt: control.dt, max });
    }
    solver.advance(state, control.dt)
}

pub fn run_kinetic(
    initial: &KineticState,
    params: &ModelParams,
    control: &StepControl,
    diagnostics: &DiagnosticsSpec,
    sinks: &mut [&mut dyn Sink<KineticState>],
) -> Result<Trajectory<KineticState>> {
    KineticSolver::new(params, *initial.grid())?.run(initial, control, diagnostics, sinks)
}

/// Second `z`-moment of a column about `level`, normalized by its mass.
pub fn column_second_moment(column: &[f64], level: f64, dz: f64) -> f64 {
    let mut mass = 0.0;
    let mut moment = 0.0;
    for (j, &v) in column.iter().enumerate() {
        let z = (j as f64 + 0.5) * dz;
        mass += v;
        moment += (z - level) * (z - level) * v;
    }
    if mass == 0.0 {
        0.0
    } else {
        moment / mass
    }
}

/// Relaxes one `z` column under pure CheZ transport with `h` frozen.
/// Returns `(t, second moment about L_l(h))` after every step.
pub fn run_frozen_column(
    column: &[f64],
    h: f64,
    params: &ModelParams,
    t_end: f64,
    cfl_safety: f64,
) -> Result<Vec<(f64, f64)>> {
    params.validate()?;
    let n_z = column.len();
    if n_z < 8 || n_z % 2 != 0 {
        return Err(Error::ParameterDomain(format!("column length must be even and at least 8, got {n_z}")));
    }
    let dz = params.z_w / n_z as f64;
    let level = smoothed_switch(h, params);
    let max = cfl_safety * params.eps * dz / (2.0 * params.k_v * params.z_w);
    let steps = (t_end / max).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;

    let mut u = column.to_vec();
    let mut k = vec![0.0; n_z];
    let mut u1 = vec![0.0; n_z];
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, column_second_moment(&u, level, dz)));
    for step in 1..=steps {
        z_flux_column(&u, level, params.k_v, params.eps, dz, &mut k);
        for j in 0..n_z {
            u1[j] = u[j] - dt * k[j];
        }
        z_flux_column(&u1, level, params.k_v, params.eps, dz, &mut k);
        for j in 0..n_z {
            u[j] = 0.5 * u[j] + 0.5 * (u1[j] - dt * k[j]);
        }
        out.push((step as f64 * dt, column_second_moment(&u, level, dz)));
    }
    Ok(out)
}

/// Initial data: a Gaussian colony at the origin in the motile state
/// (Gaussian in `z` centred at `Z_w`), uniform nutrient, no AHL.
pub fn inoculum(
    grid: PeriodicGrid,
    mass: f64,
    width_x: f64,
    width_z: f64,
    nutrient: f64,
) -> Result<KineticState> {
    if !(mass >= 0.0 && width_x > 0.0 && width_z > 0.0 && nutrient >= 0.0) {
        return Err(Error::ParameterDomain("inoculum needs mass, nutrient >= 0 and positive widths".into()));
    }
    let z_w = grid.z_w();
    let mut rho = KineticField::from_fn(grid, |x, z| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        (-r2 / (2.0 * width_x * width_x)).exp() * (-(z - z_w).powi(2) / (2.0 * width_z * width_z)).exp()
    });
    let total = rho.integral();
    if total > 0.0 {
        for v in rho.values_mut() {
            *v *= mass / total;
        }
    }
    KineticState::new(0.0, rho, ScalarField::zeros(grid), ScalarField::constant(grid, nutrient))
}

/// Independent uniform values in `[0, scale)` for every unknown.
pub fn random_state(grid: PeriodicGrid, seed: u64, scale: [f64; 3]) -> KineticState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize, s: f64| -> Vec<f64> { (0..len).map(|_| s * rng.gen::<f64>()).collect() };
    let rho = draw(grid.n_nodes() * grid.n_z(), scale[0]);
    let h = draw(grid.n_nodes(), scale[1]);
    let n = draw(grid.n_nodes(), scale[2]);
    KineticState {
        t: 0.0,
        rho: KineticField::new_unchecked(grid, rho),
        h: ScalarField::new_unchecked(grid, h),
        n: ScalarField::new_unchecked(grid, n),
    }
}

/// Spatially homogeneous state with the given `z` profile.
pub fn homogeneous(grid: PeriodicGrid, profile: &[f64], h: f64, n: f64) -> Result<KineticState> {
    if profile.len() != grid.n_z() {
        return Err(Error::GridMismatch(format!(
            "z profile has {} entries, grid has n_z = {}",
            profile.len(),
            grid.n_z()
        )));
    }
    let values = profile.iter().copied().cycle().take(grid.n_nodes() * grid.n_z()).collect();
    KineticState::new(
        0.0,
        KineticField::new(grid, values)?,
        ScalarField::constant(grid, h),
        ScalarField::constant(grid, n),
    )
}

/// Places the density `rho_bar(x)` entirely in the `z` cell containing
/// `L_l(h(x))`.
pub fn concentrated(
    density: &ScalarField,
    h: &ScalarField,
    n: &ScalarField,
    params: &ModelParams,
    n_z: usize,
) -> Result<KineticState> {
    let g = density.grid();
    let grid = PeriodicGrid::new(g.dim_x(), g.n_x(), g.length_x(), n_z, params.z_w)?;
    let dz = grid.dz();
    let mut rho = vec![0.0; grid.n_nodes() * n_z];
    for node in 0..grid.n_nodes() {
        let level = smoothed_switch(h.values()[node], params);
        let j = ((level / dz).floor() as usize).min(n_z - 1);
        rho[node * n_z + j] = density.values()[node] / dz;
    }
    KineticState::new(
        0.0,
        KineticField::new(grid, rho)?,
        ScalarField::new(grid, h.values().to_vec())?,
        ScalarField::new(grid, n.values().to_vec())?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MotilityProfile;

    fn setup() -> (ModelParams, PeriodicGrid) {
        let p = ModelParams::default();
        let g = PeriodicGrid::torus(1, 16, 16, p.z_w).unwrap();
        (p, g)
    }

    #[test]
    fn nutrient_only_state_is_steady() {
        let (p, g) = setup();
        let mut s = KineticState::zeros(g);
        s.n = ScalarField::constant(g, 2.5);
        let r = kinetic_rhs(&s, &p).unwrap();
        assert!(r.rho.values().iter().chain(r.h.values()).chain(r.n.values()).all(|&v| v == 0.0));
    }

    #[test]
    fn homogeneous_mass_growth_is_exact() {
        let (p, g) = setup();
        let profile: Vec<f64> = (0..g.n_z()).map(|j| 1.0 + 0.3 * (j as f64).sin()).collect();
        let s = homogeneous(g, &profile, 0.2, 0.7).unwrap();
        let r = kinetic_rhs(&s, &p).unwrap();
        // brute-force sum of the rate against gamma n0 times the mass
        let mut rate = 0.0;
        for v in r.rho.values() {
            rate += v;
        }
        rate *= g.cell_x() * g.dz();
        let expected = p.gamma * 0.7 * s.mass_rho();
        assert!((rate - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn concentration_point_has_no_transport() {
        let p = ModelParams {
            motility: MotilityProfile::Constant { lambda: 1.0, mu: 1.0 },
            ..ModelParams::default()
        };
        let g = PeriodicGrid::torus(1, 8, 16, p.z_w).unwrap();
        // L = Z_w below threshold: all mass in the top cell stays there
        let density = ScalarField::constant(g, 1.0);
        let s = concentrated(&density, &ScalarField::zeros(g), &ScalarField::zeros(g), &p, 16).unwrap();
        let r = kinetic_rhs(&s, &p).unwrap();
        assert!(r.rho.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cfl_violation_refuses_to_step() {
        let (p, g) = setup();
        let s = random_state(g, 1, [1.0, 1.0, 1.0]);
        let control = StepControl {
            dt: 1.0,
            ..StepControl::default()
        };
        assert!(matches!(kinetic_step(&s, &p, &control), Err(Error::Cfl { .. })));
    }

    #[test]
    fn zero_state_stays_zero_and_t_end_zero_is_identity() {
        let (p, g) = setup();
        let s = KineticState::zeros(g);
        let control = StepControl {
            dt: 1e-3,
            t_end: 0.05,
            ..StepControl::default()
        };
        let out = run_kinetic(&s, &p, &control, &DiagnosticsSpec::default(), &mut []).unwrap();
        assert!(out.final_state.rho.values().iter().all(|&v| v == 0.0));
        assert!((out.final_state.t - 0.05).abs() < 1e-15);
        let r = random_state(g, 2, [1.0, 1.0, 1.0]);
        let zero = StepControl {
            t_end: 0.0,
            ..control
        };
        let out = run_kinetic(&r, &p, &zero, &DiagnosticsSpec::default(), &mut []).unwrap();
        assert_eq!(out.final_state, r);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn frozen_column_moment_decays() {
        let p = ModelParams::default();
        let n_z = 256;
        let dz = p.z_w / n_z as f64;
        // h at the threshold: L = Z_w / 2
        let col: Vec<f64> = (0..n_z)
            .map(|j| {
                let z = (j as f64 + 0.5) * dz;
                (-(z - 0.5).powi(2) / (2.0 * 0.1f64.powi(2))).exp()
            })
            .collect();
        let series = run_frozen_column(&col, p.h_bar, &p, 0.1, 0.9).unwrap();
        let (t, m) = *series.last().unwrap();
        let predicted = series[0].1 * (-2.0 * p.k_v * t / p.eps).exp();
        assert!((m / predicted - 1.0).abs() < 0.05);
    }
}
