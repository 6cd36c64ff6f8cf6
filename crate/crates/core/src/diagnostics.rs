//! Conservation invariants, positivity minima, Sobolev energy functionals,
//! `z`-moments and Fourier-mode tracking along trajectories.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField};
use crate::kinetic::{KineticState, Sink};
use crate::macroscopic::{MacroModel, MacroState};
use crate::model::{motility_unchecked, smoothed_switch, HypothesisConstants, ModelParams};

/// Field whose Fourier modes are tracked. `Rho` means the cell density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldSel {
    Rho,
    H,
    N,
}

impl FieldSel {
    pub fn name(self) -> &'static str {
        match self {
            FieldSel::Rho => "rho",
            FieldSel::H => "h",
            FieldSel::N => "n",
        }
    }
}

/// What each record contains besides masses and minima.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSpec {
    /// Compute the energy functional and dissipation rate.
    pub energies: bool,
    /// Use the fluctuation energies about `(rho_a, h_a)` (macroscopic runs).
    pub reference: Option<(f64, f64)>,
    /// Sobolev index; `None` takes `params.sobolev_s`.
    pub sobolev_s: Option<u32>,
    pub modes: Vec<u32>,
    pub mode_fields: Vec<FieldSel>,
    /// Samples for the hypothesis constants used by the kinetic energy.
    pub hypothesis_samples: usize,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            energies: false,
            reference: None,
            sobolev_s: None,
            modes: Vec::new(),
            mode_fields: vec![FieldSel::H],
            hypothesis_samples: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Energies {
    None,
    Kinetic { e_l: f64, d_l: f64 },
    Macro { e_l: f64, d_l: f64, ee_l: f64, dd_l: f64 },
    Perturbation { e_g: f64, d_g: f64 },
}

impl Energies {
    /// The leading `(energy, dissipation)` pair.
    pub fn primary(&self) -> Option<(f64, f64)> {
        match *self {
            Energies::None => None,
            Energies::Kinetic { e_l, d_l } => Some((e_l, d_l)),
            Energies::Macro { e_l, d_l, .. } => Some((e_l, d_l)),
            Energies::Perturbation { e_g, d_g } => Some((e_g, d_g)),
        }
    }

    fn columns(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Energies::None => vec![],
            Energies::Kinetic { e_l, d_l } => vec![("e_l", e_l), ("d_l", d_l)],
            Energies::Macro { e_l, d_l, ee_l, dd_l } => {
                vec![("e_l", e_l), ("d_l", d_l), ("ee_l", ee_l), ("dd_l", dd_l)]
            }
            Energies::Perturbation { e_g, d_g } => vec![("e_g", e_g), ("d_g", d_g)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeAmplitude {
    pub field: FieldSel,
    pub m: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Total cells, `int int rho` or `int rho_bar`.
    pub mass_rho: f64,
    pub mass_n: f64,
    /// `mass_rho + w mass_n` with the model's nutrient weight `w`.
    pub combined_invariant: f64,
    pub min_rho: f64,
    pub min_h: f64,
    pub min_n: f64,
    pub energies: Energies,
    /// Mass-weighted second `z`-moment about `L_l(h)` (kinetic runs).
    pub m2_z: Option<f64>,
    pub mode_amps: Vec<ModeAmplitude>,
}

impl DiagnosticsRecord {
    pub fn mode(&self, field: FieldSel, m: u32) -> Option<f64> {
        self.mode_amps.iter().find(|a| a.field == field && a.m == m).map(|a| a.value)
    }

    fn columns(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = [
            ("t", self.t),
            ("mass_rho", self.mass_rho),
            ("mass_n", self.mass_n),
            ("combined_invariant", self.combined_invariant),
            ("min_rho", self.min_rho),
            ("min_h", self.min_h),
            ("min_n", self.min_n),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
        out.extend(self.energies.columns().into_iter().map(|(k, v)| (k.to_string(), v)));
        if let Some(m2) = self.m2_z {
            out.push(("m2_z".into(), m2));
        }
        for a in &self.mode_amps {
            out.push((format!("amp_{}_{}", a.field.name(), a.m), a.value));
        }
        out
    }

    pub fn csv_header(&self) -> String {
        self.columns().into_iter().map(|(k, _)| k).collect::<Vec<_>>().join(",")
    }

    pub fn csv_row(&self) -> String {
        self.columns().into_iter().map(|(_, v)| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
    }
}

fn check_s(s: u32, min: u32) -> Result<()> {
    if s < min {
        return Err(Error::ParameterDomain(format!("Sobolev index must be at least {min}, got {s}")));
    }
    Ok(())
}

/// `(E_L, D_L)` of a kinetic state. Needs `eta` and `d` from the
/// hypothesis constants.
pub fn energy_kinetic(state: &KineticState, params: &ModelParams, constants: &HypothesisConstants, s: u32) -> Result<(f64, f64)> {
    check_s(s, 3)?;
    let grid = state.grid();
    let weight: Vec<f64> = grid.z_nodes().iter().map(|&z| motility_unchecked(z, params)).collect();
    let density = state.density();
    let eta1 = constants.eta + 1.0;
    let e = state.rho.sobolev_norm_sq(s, None)
        + density.sobolev_norm_sq(s, None) / eta1
        + state.h.sobolev_norm_sq(s, None)
        + state.n.sobolev_norm_sq(s, None);
    let d = state.rho.grad_sobolev_norm_sq(s, Some(&weight))
        + constants.d / (2.0 * eta1) * density.grad_sobolev_norm_sq(s, None)
        + params.d_h * state.h.grad_sobolev_norm_sq(s, None)
        + 0.5 * params.beta * state.h.sobolev_norm_sq(s, None)
        + params.d_n * state.n.grad_sobolev_norm_sq(s, None);
    Ok((e, d))
}

/// `(E_l, D_l, EE_l, DD_l)` of a macroscopic state, with the model's
/// mobility in place of `D~`.
pub fn energy_macro(state: &MacroState, params: &ModelParams, model: MacroModel, s: u32) -> Result<(f64, f64, f64, f64)> {
    check_s(s, 4)?;
    let mobility = state.h.map(|h| model.mobility(h, params));
    let e = state.rho.sobolev_norm_sq(s, None) + state.h.sobolev_norm_sq(s, None) + state.n.sobolev_norm_sq(s, None);
    let d = 0.5 * state.rho.grad_sobolev_norm_sq(s, Some(mobility.values()))
        + params.d_h * state.h.grad_sobolev_norm_sq(s, None)
        + 0.5 * params.beta * state.h.sobolev_norm_sq(s, None)
        + params.d_n * state.n.grad_sobolev_norm_sq(s, None);
    let ee = mobility.sobolev_norm_sq(s, None);
    let dd = params.d_h * mobility.grad_sobolev_norm_sq(s, None);
    Ok((e, d, ee, dd))
}

/// `(E_g, D_g)` of the fluctuation `(rho - rho_a, h - h_a)` with unit
/// coefficients.
pub fn energy_perturbation(
    state: &MacroState,
    params: &ModelParams,
    model: MacroModel,
    rho_a: f64,
    h_a: f64,
    s: u32,
) -> Result<(f64, f64)> {
    check_s(s, 4)?;
    let phi = state.rho.map(|v| v - rho_a);
    let psi = state.h.map(|v| v - h_a);
    let mobility = state.h.map(|h| model.mobility(h, params));
    let reference = model.mobility(h_a, params);
    let shifted = mobility.map(|v| v - reference);
    let e = phi.sobolev_norm_sq(s, None) + psi.sobolev_norm_sq(s, None) + shifted.sobolev_norm_sq(s, None);
    let d = phi.grad_sobolev_norm_sq(s, Some(mobility.values()))
        + params.d_h * psi.grad_sobolev_norm_sq(s, None)
        + 0.5 * params.beta * psi.sobolev_norm_sq(s, None)
        + mobility.grad_sobolev_norm_sq(s, None);
    Ok((e, d))
}

/// Mass-weighted mean of `(z - L_l(h(x)))^2`.
pub fn second_z_moment(state: &KineticState, params: &ModelParams) -> f64 {
    let grid = state.grid();
    let mut mass = 0.0;
    let mut moment = 0.0;
    for node in 0..grid.n_nodes() {
        let level = smoothed_switch(state.h.values()[node], params);
        for (j, &v) in state.rho.column(node).iter().enumerate() {
            let dz = grid.z(j) - level;
            mass += v;
            moment += dz * dz * v;
        }
    }
    if mass == 0.0 {
        0.0
    } else {
        moment / mass
    }
}

/// Builds records for one run.
#[derive(Debug, Clone)]
pub struct Recorder {
    params: ModelParams,
    spec: DiagnosticsSpec,
    constants: Option<HypothesisConstants>,
    s: u32,
}

impl Recorder {
    pub fn new(params: &ModelParams, grid: &PeriodicGrid, spec: &DiagnosticsSpec) -> Result<Self> {
        let s = spec.sobolev_s.unwrap_or(params.sobolev_s);
        let constants = if spec.energies && spec.reference.is_none() {
            Some(HypothesisConstants::compute(params, grid.length_x(), spec.hypothesis_samples)?)
        } else {
            None
        };
        Ok(Self {
            params: *params,
            spec: spec.clone(),
            constants,
            s,
        })
    }

    fn modes(&self, field: impl Fn(FieldSel) -> ScalarField) -> Vec<ModeAmplitude> {
        let mut out = Vec::new();
        for &f in &self.spec.mode_fields {
            if self.spec.modes.is_empty() {
                continue;
            }
            let values = field(f);
            for &m in &self.spec.modes {
                out.push(ModeAmplitude {
                    field: f,
                    m,
                    value: values.mode_amplitude(m),
                });
            }
        }
        out
    }

    pub fn kinetic(&mut self, state: &KineticState) -> Result<DiagnosticsRecord> {
        let p = &self.params;
        let energies = match (&self.constants, self.spec.energies) {
            (Some(c), true) => {
                let (e_l, d_l) = energy_kinetic(state, p, c, self.s)?;
                Energies::Kinetic { e_l, d_l }
            }
            _ => Energies::None,
        };
        let density = state.density();
        let mode_amps = self.modes(|f| match f {
            FieldSel::Rho => density.clone(),
            FieldSel::H => state.h.clone(),
            FieldSel::N => state.n.clone(),
        });
        let mass_rho = state.mass_rho();
        let mass_n = state.mass_n();
        Ok(DiagnosticsRecord {
            t: state.t,
            mass_rho,
            mass_n,
            combined_invariant: mass_rho + p.nutrient_weight() * mass_n,
            min_rho: state.rho.min(),
            min_h: state.h.min(),
            min_n: state.n.min(),
            energies,
            m2_z: Some(second_z_moment(state, p)),
            mode_amps,
        })
    }

    pub fn macroscopic(&mut self, state: &MacroState, model: MacroModel) -> Result<DiagnosticsRecord> {
        let p = &self.params;
        let energies = if !self.spec.energies {
            Energies::None
        } else if let Some((rho_a, h_a)) = self.spec.reference {
            let (e_g, d_g) = energy_perturbation(state, p, model, rho_a, h_a, self.s)?;
            Energies::Perturbation { e_g, d_g }
        } else {
            let (e_l, d_l, ee_l, dd_l) = energy_macro(state, p, model, self.s)?;
            Energies::Macro { e_l, d_l, ee_l, dd_l }
        };
        let mode_amps = self.modes(|f| match f {
            FieldSel::Rho => state.rho.clone(),
            FieldSel::H => state.h.clone(),
            FieldSel::N => state.n.clone(),
        });
        let mass_rho = state.rho.integral();
        let mass_n = state.n.integral();
        Ok(DiagnosticsRecord {
            t: state.t,
            mass_rho,
            mass_n,
            combined_invariant: mass_rho + model.nutrient_weight(p) * mass_n,
            min_rho: state.rho.min(),
            min_h: state.h.min(),
            min_n: state.n.min(),
            energies,
            m2_z: None,
            mode_amps,
        })
    }
}

/// Outcome of [`gronwall_audit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallAudit {
    /// Smallest `C >= 0` satisfying the inequality at every interior record.
    pub c: f64,
    /// Interior records where no finite `C` works (zero energy with a
    /// positive left-hand side).
    pub violations: usize,
    pub samples: usize,
}

/// Fits the constant in `dE/dt + D <= C (1 + 1/eps)(1 + E^{s/2}) E` with
/// `dE/dt` from centred differences of the records.
pub fn gronwall_audit(records: &[DiagnosticsRecord], eps: f64, s: u32) -> Result<GronwallAudit> {
    if records.len() < 10 {
        return Err(Error::Resolution(format!(
            "Gronwall audit needs at least 10 records, got {}",
            records.len()
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::ParameterDomain(format!("eps must be positive, got {eps}")));
    }
    let pairs: Vec<(f64, f64, f64)> = records
        .iter()
        .map(|r| {
            r.energies
                .primary()
                .map(|(e, d)| (r.t, e, d))
                .ok_or_else(|| Error::Fit("records carry no energies".into()))
        })
        .collect::<Result<_>>()?;
    let mut c = 0.0f64;
    let mut violations = 0;
    let half_s = s as f64 / 2.0;
    for w in pairs.windows(3) {
        let (t0, e0, _) = w[0];
        let (t1, e1, d1) = w[1];
        let (t2, e2, _) = w[2];
        let (h0, h1) = (t1 - t0, t2 - t1);
        if !(h0 > 0.0 && h1 > 0.0) {
            return Err(Error::Fit("record times must increase strictly".into()));
        }
        // three-point derivative on a possibly uneven stencil
        let dedt = (-h1 / (h0 * (h0 + h1))) * e0 + ((h1 - h0) / (h0 * h1)) * e1 + (h0 / (h1 * (h0 + h1))) * e2;
        let lhs = dedt + d1;
        let bound = (1.0 + 1.0 / eps) * (1.0 + e1.powf(half_s)) * e1;
        if bound > 0.0 {
            c = c.max(lhs / bound);
        } else if lhs > 0.0 {
            violations += 1;
        }
    }
    Ok(GronwallAudit {
        c: c.max(0.0),
        violations,
        samples: pairs.len() - 2,
    })
}

/// Least-squares exponential fit `y ~ A e^{rate t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    /// Root-mean-square residual of `log y`.
    pub residual: f64,
    pub points: usize,
}

pub fn fit_exponential(samples: &[(f64, f64)]) -> Result<RateFit> {
    if samples.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 samples, got {}", samples.len())));
    }
    if let Some((t, y)) = samples.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(Error::Fit(format!("non-positive amplitude {y} at t = {t}")));
    }
    let n = samples.len() as f64;
    let mt = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for &(t, y) in samples {
        stt += (t - mt) * (t - mt);
        sty += (t - mt) * (y.ln() - my);
    }
    if stt == 0.0 {
        return Err(Error::Fit("all samples share one time".into()));
    }
    let rate = sty / stt;
    let residual = (samples
        .iter()
        .map(|&(t, y)| {
            let r = y.ln() - (my + rate * (t - mt));
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        rate,
        residual,
        points: samples.len(),
    })
}

/// Exponential growth rate of mode `m` of `field` over `t_min <= t <= t_max`.
pub fn mode_growth_rate(records: &[DiagnosticsRecord], field: FieldSel, m: u32, t_min: f64, t_max: f64) -> Result<RateFit> {
    let mut samples = Vec::new();
    for r in records.iter().filter(|r| r.t >= t_min && r.t <= t_max) {
        let amp = r
            .mode(field, m)
            .ok_or_else(|| Error::Fit(format!("mode {m} of {} is not tracked", field.name())))?;
        samples.push((r.t, amp));
    }
    fit_exponential(&samples)
}

/// Streams records as CSV; the header is written with the first record.
pub struct CsvSink<W: Write> {
    out: W,
    header: Option<String>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W) -> Self {
        Self { out, header: None }
    }

    pub fn push(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        let header = record.csv_header();
        match &self.header {
            None => {
                writeln!(self.out, "{header}")?;
                self.header = Some(header);
            }
            Some(h) if *h != header => {
                return Err(Error::Fit("record layout changed within one CSV stream".into()));
            }
            Some(_) => {}
        }
        writeln!(self.out, "{}", record.csv_row())?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write, S> Sink<S> for CsvSink<W> {
    fn record(&mut self, _state: &S, record: &DiagnosticsRecord) -> Result<()> {
        self.push(record)
    }
}

pub fn write_csv<W: Write>(out: W, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut sink = CsvSink::new(out);
    for r in records {
        sink.push(r)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{KineticField, PeriodicGrid};
    use std::f64::consts::PI;

    fn record(t: f64, e: f64, d: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            mass_rho: 0.0,
            mass_n: 0.0,
            combined_invariant: 0.0,
            min_rho: 0.0,
            min_h: 0.0,
            min_n: 0.0,
            energies: Energies::Kinetic { e_l: e, d_l: d },
            m2_z: None,
            mode_amps: vec![ModeAmplitude {
                field: FieldSel::H,
                m: 1,
                value: e,
            }],
        }
    }

    #[test]
    fn kinetic_energy_of_sine_agent() {
        let p = ModelParams {
            d_h: 0.7,
            beta: 1.3,
            ..ModelParams::default()
        };
        let g = PeriodicGrid::torus(1, 32, 8, p.z_w).unwrap();
        let mut s = KineticState::zeros(g);
        s.h = ScalarField::from_fn(g, |x| x[0].sin());
        let mut c = HypothesisConstants::compute(&p, 2.0 * PI, 512).unwrap();
        c.eta = 0.0;
        let (e, d) = energy_kinetic(&s, &p, &c, 3).unwrap();
        assert!((e - 4.0 * PI).abs() < 1e-10);
        assert!((d - (4.0 * PI * p.d_h + 2.0 * PI * p.beta)).abs() < 1e-10);
        let (e0, d0) = energy_kinetic(&KineticState::zeros(g), &p, &c, 3).unwrap();
        assert_eq!((e0, d0), (0.0, 0.0));
        assert!(energy_kinetic(&s, &p, &c, 2).is_err());
    }

    #[test]
    fn second_moment_of_point_mass() {
        let p = ModelParams::default();
        let g = PeriodicGrid::torus(1, 8, 16, p.z_w).unwrap();
        let level = smoothed_switch(0.0, &p);
        let rho = KineticField::from_fn(g, |_, z| if (z - 0.5 / 16.0).abs() < 1e-9 { 1.0 } else { 0.0 });
        let s = KineticState::new(0.0, rho, ScalarField::zeros(g), ScalarField::zeros(g)).unwrap();
        let expected = (0.5 / 16.0 - level).powi(2);
        assert!((second_z_moment(&s, &p) - expected).abs() < 1e-14);
    }

    #[test]
    fn exponential_fit_is_exact_on_synthetic_series() {
        let samples: Vec<(f64, f64)> = (0..20).map(|i| (0.1 * i as f64, 3.0 * (-0.75 * 0.1 * i as f64).exp())).collect();
        let fit = fit_exponential(&samples).unwrap();
        assert!((fit.rate + 0.75).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0)).collect();
        assert_eq!(fit_exponential(&flat).unwrap().rate, 0.0);
        assert!(fit_exponential(&[(0.0, 1.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn mode_growth_rate_over_window() {
        let recs: Vec<_> = (0..20).map(|i| record(i as f64 * 0.05, (0.4 * i as f64 * 0.05).exp(), 0.0)).collect();
        let fit = mode_growth_rate(&recs, FieldSel::H, 1, 0.1, 1.0).unwrap();
        assert!((fit.rate - 0.4).abs() < 1e-12);
        assert!(mode_growth_rate(&recs, FieldSel::N, 1, 0.0, 1.0).is_err());
    }

    #[test]
    fn gronwall_audit_on_pure_decay_is_zero() {
        let recs: Vec<_> = (0..12)
            .map(|i| {
                let t = 0.1 * i as f64;
                let e = (-2.0 * t).exp();
                record(t, e, 0.5 * e)
            })
            .collect();
        let audit = gronwall_audit(&recs, 1.0, 3).unwrap();
        assert_eq!(audit.c, 0.0);
        assert_eq!(audit.violations, 0);
        assert!(gronwall_audit(&recs[..5], 1.0, 3).is_err());
    }

    #[test]
    fn gronwall_audit_recovers_growth_constant() {
        // dE/dt = k E with D = 0 gives C = k / ((1 + 1/eps)(1 + E^{s/2}))
        let recs: Vec<_> = (0..40)
            .map(|i| {
                let t = 0.01 * i as f64;
                record(t, 1e-3 * (t).exp(), 0.0)
            })
            .collect();
        let audit = gronwall_audit(&recs, 1.0, 4).unwrap();
        assert!((audit.c - 0.5).abs() < 1e-3);
    }

    #[test]
    fn csv_layout() {
        let recs = vec![record(0.0, 1.0, 2.0), record(0.5, 0.5, 1.0)];
        let mut buf = Vec::new();
        write_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,mass_rho,mass_n,combined_invariant,min_rho,min_h,min_n,e_l,d_l,amp_h_1");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2].split(',').next().unwrap(), "5.0000000000000000e-1");
    }
}
