//! Time integration of the macroscopic density-dependent-motility system
//! and of the Hill-type reference model.
//!
//! The motility term `Lap(M(h) rho)` is discretized as the centred
//! Laplacian of the pointwise product, which keeps the scheme in
//! divergence form and sign-preserving under the explicit step bound.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{fit_exponential, DiagnosticsSpec, Energies, RateFit, Recorder};
use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField};
use crate::kinetic::{Sink, StepControl, Trajectory};
use crate::model::{composed_motility_unchecked, motility_unchecked, switch_between, HypothesisConstants, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MacroModel {
    /// `d_t rho = Lap(D~(h) rho) + gamma n rho`.
    #[default]
    AdEecp,
    /// Hill-type growth `gamma n^2 rho / (n^2 + K_n^2)` and the two-level
    /// mobility switching at `K_h`.
    Science2011,
}

impl MacroModel {
    /// Cell mobility at AHL level `h`.
    pub fn mobility(self, h: f64, params: &ModelParams) -> f64 {
        match self {
            MacroModel::AdEecp => composed_motility_unchecked(h, params),
            MacroModel::Science2011 => {
                switch_between(h, params.hill_threshold, params.ell, params.d_rho, params.d_rho0)
            }
        }
    }

    /// Upper bound of the mobility over all `h`.
    pub fn mobility_bound(self, params: &ModelParams) -> f64 {
        match self {
            MacroModel::AdEecp => {
                let samples = 4096;
                (0..=samples)
                    .map(|i| motility_unchecked(params.z_w * i as f64 / samples as f64, params))
                    .fold(0.0, f64::max)
            }
            MacroModel::Science2011 => params.d_rho.max(params.d_rho0),
        }
    }

    /// Weight `w` making `int rho + w int n` invariant.
    pub fn nutrient_weight(self, params: &ModelParams) -> f64 {
        match self {
            MacroModel::AdEecp => params.nutrient_weight(),
            MacroModel::Science2011 => 1.0 / params.hill_yield,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub t: f64,
    pub rho: ScalarField,
    pub h: ScalarField,
    pub n: ScalarField,
}

impl MacroState {
    pub fn new(t: f64, rho: ScalarField, h: ScalarField, n: ScalarField) -> Result<Self> {
        if rho.grid() != h.grid() || h.grid() != n.grid() {
            return Err(Error::GridMismatch("rho, h and n must share one grid".into()));
        }
        Ok(Self { t, rho, h, n })
    }

    /// Homogeneous state `(rho, h, n)`.
    pub fn constant(grid: PeriodicGrid, rho: f64, h: f64, n: f64) -> Self {
        Self {
            t: 0.0,
            rho: ScalarField::constant(grid, rho),
            h: ScalarField::constant(grid, h),
            n: ScalarField::constant(grid, n),
        }
    }

    /// The steady state `(rho_a, alpha rho_a / beta, 0)`.
    pub fn steady(grid: PeriodicGrid, rho_a: f64, params: &ModelParams) -> Self {
        Self::constant(grid, rho_a, params.alpha * rho_a / params.beta, 0.0)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.rho.grid()
    }

    pub fn invariant(&self, params: &ModelParams, model: MacroModel) -> f64 {
        self.rho.integral() + model.nutrient_weight(params) * self.n.integral()
    }

    fn is_finite(&self) -> bool {
        self.rho.values().iter().chain(self.h.values()).chain(self.n.values()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroRates {
    pub rho: ScalarField,
    pub h: ScalarField,
    pub n: ScalarField,
}

#[derive(Debug, Clone)]
pub struct MacroSolver {
    params: ModelParams,
    grid: PeriodicGrid,
    model: MacroModel,
    mobility_bound: f64,
}

impl MacroSolver {
    pub fn new(params: &ModelParams, grid: PeriodicGrid, model: MacroModel) -> Result<Self> {
        params.validate()?;
        if params.sobolev_s < 4 {
            return Err(Error::ParameterDomain(format!(
                "macroscopic runs need sobolev_s >= 4, got {}",
                params.sobolev_s
            )));
        }
        Ok(Self {
            params: *params,
            grid,
            model,
            mobility_bound: model.mobility_bound(params),
        })
    }

    pub fn model(&self) -> MacroModel {
        self.model
    }

    fn rhs_into(&self, rho: &[f64], h: &[f64], n: &[f64], out_rho: &mut [f64], out_h: &mut [f64], out_n: &mut [f64]) {
        let p = &self.params;
        let flux: Vec<f64> = rho.iter().zip(h).map(|(r, &h)| self.model.mobility(h, p) * r).collect();
        self.grid.laplacian_scalar(&flux, out_rho);
        self.grid.laplacian_scalar(h, out_h);
        self.grid.laplacian_scalar(n, out_n);
        for i in 0..rho.len() {
            let growth = match self.model {
                MacroModel::AdEecp => p.gamma * n[i] * rho[i],
                MacroModel::Science2011 => {
                    let n2 = n[i] * n[i];
                    let k2 = p.hill_half_saturation * p.hill_half_saturation;
                    p.gamma * n2 * rho[i] / (n2 + k2)
                }
            };
            let consumption = match self.model {
                MacroModel::AdEecp => p.xi * rho[i] * n[i],
                MacroModel::Science2011 => p.hill_yield * growth,
            };
            out_rho[i] += growth;
            out_h[i] = p.d_h * out_h[i] + p.alpha * rho[i] - p.beta * h[i];
            out_n[i] = p.d_n * out_n[i] - consumption;
        }
    }

    pub fn rhs(&self, state: &MacroState) -> Result<MacroRates> {
        if *state.grid() != self.grid {
            return Err(Error::GridMismatch("state grid differs from solver grid".into()));
        }
        let len = self.grid.n_nodes();
        let (mut r, mut h, mut n) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        self.rhs_into(state.rho.values(), state.h.values(), state.n.values(), &mut r, &mut h, &mut n);
        Ok(MacroRates {
            rho: ScalarField::new(self.grid, r)?,
            h: ScalarField::new(self.grid, h)?,
            n: ScalarField::new(self.grid, n)?,
        })
    }

    /// Largest stable, sign-preserving step for the current state.
    pub fn admissible_dt(&self, state: &MacroState, control: &StepControl) -> f64 {
        let p = &self.params;
        let dim = self.grid.dim_x() as f64;
        let inv_dx2 = 1.0 / (self.grid.dx() * self.grid.dx());
        let diffusion = 2.0 * dim * self.mobility_bound.max(p.d_h).max(p.d_n) * inv_dx2;
        let rho_max = state.rho.max().max(0.0);
        let uptake = match self.model {
            MacroModel::AdEecp => p.xi * rho_max,
            // n / (n^2 + K^2) <= 1 / (2K)
            MacroModel::Science2011 => p.hill_yield * p.gamma * rho_max / (2.0 * p.hill_half_saturation),
        };
        let rate_h = 2.0 * dim * p.d_h * inv_dx2 + p.beta;
        let rate_n = 2.0 * dim * p.d_n * inv_dx2 + uptake;
        control.cfl_safety * (1.0 / diffusion).min(1.0 / rate_h.max(rate_n))
    }

    pub fn advance(&self, state: &MacroState, dt: f64) -> Result<MacroState> {
        let len = self.grid.n_nodes();
        let (r0, h0, n0) = (state.rho.values(), state.h.values(), state.n.values());
        let (mut kr, mut kh, mut kn) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        self.rhs_into(r0, h0, n0, &mut kr, &mut kh, &mut kn);
        let euler = |u: &[f64], k: &[f64]| -> Vec<f64> { u.iter().zip(k).map(|(u, k)| u + dt * k).collect() };
        let (r1, h1, n1) = (euler(r0, &kr), euler(h0, &kh), euler(n0, &kn));
        self.rhs_into(&r1, &h1, &n1, &mut kr, &mut kh, &mut kn);
        let heun = |u0: &[f64], u1: &[f64], k: &[f64]| -> Vec<f64> {
            u0.iter().zip(u1).zip(k).map(|((a, b), k)| 0.5 * a + 0.5 * (b + dt * k)).collect()
        };
        let next = MacroState {
            t: state.t + dt,
            rho: ScalarField::new_unchecked(self.grid, heun(r0, &r1, &kr)),
            h: ScalarField::new_unchecked(self.grid, heun(h0, &h1, &kh)),
            n: ScalarField::new_unchecked(self.grid, heun(n0, &n1, &kn)),
        };
        if !next.is_finite() {
            return Err(Error::Divergence {
                t: next.t,
                what: "non-finite value in macroscopic state".into(),
            });
        }
        Ok(next)
    }

    pub fn choose_dt(&self, state: &MacroState, control: &StepControl) -> Result<f64> {
        let max = self.admissible_dt(state, control);
        let requested = control.dt.min((control.t_end - state.t).max(0.0));
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
        initial: &MacroState,
        control: &StepControl,
        diagnostics: &DiagnosticsSpec,
        sinks: &mut [&mut dyn Sink<MacroState>],
    ) -> Result<Trajectory<MacroState>> {
        control.validate()?;
        let mut recorder = Recorder::new(&self.params, &self.grid, diagnostics)?;
        let model = self.model;
        let mut records = Vec::new();
        let mut emit = |state: &MacroState, sinks: &mut [&mut dyn Sink<MacroState>]| -> Result<()> {
            let record = recorder.macroscopic(state, model)?;
            for sink in sinks.iter_mut() {
                sink.record(state, &record)?;
            }
            records.push(record);
            Ok(())
        };
        let mut state = initial.clone();
        emit(&state, sinks)?;
        let mut steps = 0usize;
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

pub fn macro_rhs(state: &MacroState, params: &ModelParams, model: MacroModel) -> Result<MacroRates> {
    MacroSolver::new(params, *state.grid(), model)?.rhs(state)
}

/// One step of size `control.dt`; refuses to step above the admissible
/// bound.
pub fn macro_step(state: &MacroState, params: &ModelParams, model: MacroModel, control: &StepControl) -> Result<MacroState> {
    let solver = MacroSolver::new(params, *state.grid(), model)?;
    let max = solver.admissible_dt(state, control);
    if control.dt > max {
        return Err(Error::Cfl { dt: control.dt, max });
    }
    solver.advance(state, control.dt)
}

pub fn run_macro(
    initial: &MacroState,
    params: &ModelParams,
    model: MacroModel,
    control: &StepControl,
    diagnostics: &DiagnosticsSpec,
    sinks: &mut [&mut dyn Sink<MacroState>],
) -> Result<Trajectory<MacroState>> {
    MacroSolver::new(params, *initial.grid(), model)?.run(initial, control, diagnostics, sinks)
}

/// Fitted decay of a single-mode perturbation of `(rho_a, alpha rho_a/beta, 0)`.
#[derive(Debug, Clone)]
pub struct PerturbationDecay {
    pub rho_a: f64,
    pub h_a: f64,
    pub lambda_b: f64,
    pub within_threshold: bool,
    /// Fit of the fluctuation energy `E_g` over the window.
    pub energy_fit: Option<RateFit>,
    /// Fit of `||h - h_a||^2_{L^2}` over the window.
    pub psi_fit: Option<RateFit>,
    /// `E_g` never increases inside the fit window.
    pub monotone: bool,
    /// Amplitude zero: the state stayed exactly at the steady state.
    pub steady: bool,
    pub fit_start: f64,
    pub trajectory: Trajectory<MacroState>,
}

/// Perturbs the steady state `(rho_a, h_a, 0)` by `amplitude cos(m x_0)`
/// and fits the decay of the fluctuation energy after the first 10% of the
/// run. With `rho_a = 0` a zero-mean density perturbation would be negative
/// somewhere, so the perturbation goes into `h` instead.
pub fn perturbation_decay_run(
    rho_a: f64,
    amplitude: f64,
    m: u32,
    params: &ModelParams,
    grid: PeriodicGrid,
    control: &StepControl,
) -> Result<PerturbationDecay> {
    if !(rho_a >= 0.0) {
        return Err(Error::ParameterDomain(format!("rho_a must be nonnegative, got {rho_a}")));
    }
    if !(amplitude >= 0.0 && amplitude <= 1e-3 * rho_a.max(1.0)) {
        return Err(Error::ParameterDomain(format!(
            "amplitude must lie in [0, 1e-3 max(rho_a, 1)], got {amplitude}"
        )));
    }
    if m == 0 {
        return Err(Error::ParameterDomain("perturbation mode must be nonzero (zero mean)".into()));
    }
    let constants = HypothesisConstants::compute(params, grid.length_x(), 1024)?;
    let within_threshold = rho_a < constants.lambda_b;
    if !within_threshold {
        log::warn!(
            "rho_a = {rho_a} is outside dissipativity threshold Lambda_b = {}",
            constants.lambda_b
        );
    }
    let h_a = params.alpha * rho_a / params.beta;
    let mut initial = MacroState::steady(grid, rho_a, params);
    let wave = ScalarField::from_fn(grid, |x| amplitude * (m as f64 * x[0]).cos());
    let target = if rho_a == 0.0 {
        &mut initial.h
    } else {
        &mut initial.rho
    };
    for (v, w) in target.values_mut().iter_mut().zip(wave.values()) {
        *v += w;
    }

    let spec = DiagnosticsSpec {
        energies: true,
        reference: Some((rho_a, h_a)),
        modes: vec![m],
        mode_fields: vec![crate::diagnostics::FieldSel::Rho, crate::diagnostics::FieldSel::H],
        ..DiagnosticsSpec::default()
    };
    let trajectory = run_macro(&initial, params, MacroModel::AdEecp, control, &spec, &mut [])?;
    let fit_start = 0.1 * control.t_end;

    if amplitude == 0.0 {
        let steady = trajectory.final_state == MacroState { t: trajectory.final_state.t, ..initial };
        return Ok(PerturbationDecay {
            rho_a,
            h_a,
            lambda_b: constants.lambda_b,
            within_threshold,
            energy_fit: None,
            psi_fit: None,
            monotone: true,
            steady,
            fit_start,
            trajectory,
        });
    }

    let window: Vec<_> = trajectory.records.iter().filter(|r| r.t >= fit_start).collect();
    let energy: Vec<(f64, f64)> = window
        .iter()
        .filter_map(|r| match r.energies {
            Energies::Perturbation { e_g, .. } => Some((r.t, e_g)),
            _ => None,
        })
        .collect();
    let monotone = energy.windows(2).all(|w| w[1].1 <= w[0].1);
    let energy_fit = Some(fit_exponential(&energy)?);
    // psi amplitude a gives ||psi||^2 = a^2 |Omega| / 2 for a single cosine
    let volume = grid.volume_x();
    let psi: Vec<(f64, f64)> = window
        .iter()
        .filter_map(|r| r.mode(crate::diagnostics::FieldSel::H, m).map(|a| (r.t, 0.5 * a * a * volume)))
        .collect();
    let psi_fit = fit_exponential(&psi).ok();
    Ok(PerturbationDecay {
        rho_a,
        h_a,
        lambda_b: constants.lambda_b,
        within_threshold,
        energy_fit,
        psi_fit,
        monotone,
        steady: false,
        fit_start,
        trajectory,
    })
}

/// Random nonnegative state with entries uniform in `[0, scale)`.
pub fn random_macro_state(grid: PeriodicGrid, seed: u64, scale: [f64; 3]) -> MacroState {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |s: f64| -> Vec<f64> { (0..grid.n_nodes()).map(|_| s * rng.gen::<f64>()).collect() };
    let rho = draw(scale[0]);
    let h = draw(scale[1]);
    let n = draw(scale[2]);
    MacroState {
        t: 0.0,
        rho: ScalarField::new_unchecked(grid, rho),
        h: ScalarField::new_unchecked(grid, h),
        n: ScalarField::new_unchecked(grid, n),
    }
}
