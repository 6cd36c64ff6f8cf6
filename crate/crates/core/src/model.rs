//! Closed-form model ingredients: the bump mollifier, the smoothed CheZ
//! switch `L_l(h)`, the CheZ flux `g`, the run-and-tumble motility `D(z)`,
//! the composed motility `D(L_l(h))`, and the hypothesis constants derived
//! from them.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;

/// Panels of the tabulated bump CDF on `[-1, 1]`.
pub const BUMP_PANELS: usize = 4096;

/// Switching-rate family `(lambda0(z), mu0(z))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MotilityProfile {
    /// `lambda0 = lambda`, `mu0 = mu`.
    Constant { lambda: f64, mu: f64 },
    /// `lambda0(z) = lambda_c + lambda_a cos(2 pi z / Z_w)`, likewise for `mu0`.
    Cosine {
        lambda_c: f64,
        lambda_a: f64,
        mu_c: f64,
        mu_a: f64,
    },
}

impl Default for MotilityProfile {
    fn default() -> Self {
        MotilityProfile::Cosine {
            lambda_c: 2.0,
            lambda_a: 1.0,
            mu_c: 1.0,
            mu_a: 0.0,
        }
    }
}

impl MotilityProfile {
    /// Run-to-tumble and tumble-to-run rates at `z`.
    pub fn rates(&self, z: f64, z_w: f64) -> (f64, f64) {
        match *self {
            MotilityProfile::Constant { lambda, mu } => (lambda, mu),
            MotilityProfile::Cosine {
                lambda_c,
                lambda_a,
                mu_c,
                mu_a,
            } => {
                let c = (2.0 * PI * z / z_w).cos();
                (lambda_c + lambda_a * c, mu_c + mu_a * c)
            }
        }
    }

    fn rates_jet(&self, z: &Jet, z_w: f64) -> (Jet, Jet) {
        let order = z.order();
        match *self {
            MotilityProfile::Constant { lambda, mu } => {
                (Jet::constant(lambda, order), Jet::constant(mu, order))
            }
            MotilityProfile::Cosine {
                lambda_c,
                lambda_a,
                mu_c,
                mu_a,
            } => {
                let (_, c) = z.scale(2.0 * PI / z_w).sin_cos();
                (c.scale(lambda_a).add_scalar(lambda_c), c.scale(mu_a).add_scalar(mu_c))
            }
        }
    }

    /// Guaranteed lower bound of both rates over a full period.
    fn min_rates(&self) -> (f64, f64) {
        match *self {
            MotilityProfile::Constant { lambda, mu } => (lambda, mu),
            MotilityProfile::Cosine {
                lambda_c,
                lambda_a,
                mu_c,
                mu_a,
            } => (lambda_c - lambda_a.abs(), mu_c - mu_a.abs()),
        }
    }
}

/// Coefficients of the kinetic, macroscopic and reference reaction-diffusion
/// systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// Cell growth rate.
    pub gamma: f64,
    /// AHL diffusion coefficient.
    pub d_h: f64,
    /// Nutrient diffusion coefficient.
    pub d_n: f64,
    /// AHL production rate.
    pub alpha: f64,
    /// AHL degradation rate.
    pub beta: f64,
    /// Nutrient consumption rate.
    pub xi: f64,
    /// Cell-volume growth rate (CheZ relaxation speed).
    pub k_v: f64,
    /// Wild-type CheZ level; period of the internal variable.
    pub z_w: f64,
    /// AHL threshold for CheZ suppression.
    pub h_bar: f64,
    /// Half-width of the mollified switch.
    pub ell: f64,
    /// Cell swimming speed.
    pub s0: f64,
    /// CheZ response-speed parameter.
    pub eps: f64,
    /// Sobolev index used by the energy functionals and hypothesis constants.
    pub sobolev_s: u32,
    /// Reference model: AHL threshold `K_h` of the motility switch.
    pub hill_threshold: f64,
    /// Reference model: nutrient half-saturation `K_n`.
    pub hill_half_saturation: f64,
    /// Reference model: nutrient yield `k_n`.
    pub hill_yield: f64,
    /// Reference model: motility below threshold.
    pub d_rho: f64,
    /// Reference model: motility above threshold.
    pub d_rho0: f64,
    pub motility: MotilityProfile,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            d_h: 1.0,
            d_n: 1.0,
            alpha: 1.0,
            beta: 1.0,
            xi: 1.0,
            k_v: 1.0,
            z_w: 1.0,
            h_bar: 1.0,
            ell: 0.5,
            s0: 1.0,
            eps: 1.0,
            sobolev_s: 4,
            hill_threshold: 1.0,
            hill_half_saturation: 1.0,
            hill_yield: 1.0,
            d_rho: 0.2,
            d_rho0: 0.02,
            motility: MotilityProfile::default(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("d_h", self.d_h),
            ("d_n", self.d_n),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("xi", self.xi),
            ("k_v", self.k_v),
            ("z_w", self.z_w),
            ("h_bar", self.h_bar),
            ("ell", self.ell),
            ("s0", self.s0),
            ("eps", self.eps),
            ("hill_threshold", self.hill_threshold),
            ("hill_half_saturation", self.hill_half_saturation),
            ("hill_yield", self.hill_yield),
            ("d_rho", self.d_rho),
            ("d_rho0", self.d_rho0),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::ParameterDomain(format!("{name} must be positive, got {value}")));
            }
        }
        if self.ell >= self.h_bar {
            return Err(Error::ParameterDomain(format!(
                "ell ({}) must be smaller than h_bar ({})",
                self.ell, self.h_bar
            )));
        }
        if self.ell >= self.hill_threshold {
            return Err(Error::ParameterDomain(format!(
                "ell ({}) must be smaller than hill_threshold ({})",
                self.ell, self.hill_threshold
            )));
        }
        if self.sobolev_s < 3 {
            return Err(Error::ParameterDomain(format!(
                "sobolev_s must be at least 3, got {}",
                self.sobolev_s
            )));
        }
        let (lambda_min, mu_min) = self.motility.min_rates();
        if !(lambda_min > 0.0 && mu_min > 0.0) {
            return Err(Error::ModelConfig(format!(
                "switching rates must stay positive on [0, Z_w] (min lambda0 = {lambda_min}, min mu0 = {mu_min})"
            )));
        }
        Ok(())
    }

    /// Weight `w` such that `mass + w * nutrient` is conserved by the
    /// AD-EECP and K-EECP systems.
    pub fn nutrient_weight(&self) -> f64 {
        self.gamma / self.xi
    }
}

/// Raw bump `exp(1/(s^2 - 1))` on `(-1, 1)`, zero outside.
pub fn bump_raw(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let q = s * s - 1.0;
    if q >= 0.0 {
        0.0
    } else {
        (1.0 / q).exp()
    }
}

/// Eight-point Gauss-Legendre rule on `[a, b]`.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const NODES: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
    const WEIGHTS: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut sum = 0.0;
    for (x, w) in NODES.iter().zip(WEIGHTS) {
        sum += w * (f(mid - half * x) + f(mid + half * x));
    }
    half * sum
}

/// Tabulated bump: normalizer and cumulative distribution on `[-1, 0]`.
/// Between nodes the CDF adds the exact panel integral, so its derivative
/// is the bump density itself. The upper half follows from even symmetry.
struct BumpTable {
    kappa0: f64,
    step: f64,
    /// Unnormalized cumulative integral at the nodes.
    cumulative: Vec<f64>,
}

impl BumpTable {
    fn build() -> Self {
        let n = BUMP_PANELS / 2;
        let h = 1.0 / n as f64;
        let mut cumulative = vec![0.0; n + 1];
        for i in 0..n {
            let a = -1.0 + i as f64 * h;
            cumulative[i + 1] = cumulative[i] + gauss_legendre(bump_raw, a, a + h);
        }
        Self {
            kappa0: 2.0 * cumulative[n],
            step: h,
            cumulative,
        }
    }

    /// CDF of the unit bump density on `u <= 0`.
    fn lower(&self, u: f64) -> f64 {
        if u <= -1.0 {
            return 0.0;
        }
        let pos = (u + 1.0) / self.step;
        let i = (pos.floor() as usize).min(self.cumulative.len() - 1);
        let node = -1.0 + i as f64 * self.step;
        let partial = if u > node { gauss_legendre(bump_raw, node, u) } else { 0.0 };
        ((self.cumulative[i] + partial) / self.kappa0).min(0.5)
    }

    fn cdf(&self, u: f64) -> f64 {
        if u >= 1.0 {
            1.0
        } else if u > 0.0 {
            1.0 - self.lower(-u)
        } else {
            self.lower(u)
        }
    }
}

fn bump_table() -> &'static BumpTable {
    static TABLE: OnceLock<BumpTable> = OnceLock::new();
    TABLE.get_or_init(BumpTable::build)
}

/// Normalizer `kappa0 = int exp(1/(s^2-1)) ds` over `(-1, 1)`, by
/// composite Gauss-Legendre quadrature.
pub fn kappa0() -> f64 {
    bump_table().kappa0
}

/// Cumulative distribution of the unit bump density.
pub fn bump_cdf(u: f64) -> f64 {
    bump_table().cdf(u)
}

/// Scaled mollifier `(1/ell) phi(varsigma / ell)`.
pub fn mollifier_phi(varsigma: f64, ell: f64) -> Result<f64> {
    if !(ell > 0.0) {
        return Err(Error::ParameterDomain(format!("ell must be positive, got {ell}")));
    }
    Ok(bump_raw(varsigma / ell) / (kappa0() * ell))
}

/// Jet of the normalized unit bump `phi(u)` at `u0`.
fn bump_jet(u0: f64, order: usize) -> Jet {
    if u0.abs() >= 1.0 || bump_raw(u0) == 0.0 {
        return Jet::constant(0.0, order);
    }
    let u = Jet::variable(u0, order);
    let q = (&u * &u).add_scalar(-1.0);
    q.recip().exp().scale(1.0 / kappa0())
}

/// Smooth switch between two levels: `high` below `threshold - ell`, `low`
/// above `threshold + ell`.
pub fn switch_between(h: f64, threshold: f64, ell: f64, high: f64, low: f64) -> f64 {
    low + (high - low) * (1.0 - bump_cdf((h - threshold) / ell))
}

/// Mollified steady CheZ level `L_l(h)`.
pub fn smoothed_switch(h: f64, params: &ModelParams) -> f64 {
    params.z_w * (1.0 - bump_cdf((h - params.h_bar) / params.ell))
}

/// `L_l'(h) = -Z_w phi_l(h - h_bar)`.
pub fn smoothed_switch_prime(h: f64, params: &ModelParams) -> f64 {
    let u = (h - params.h_bar) / params.ell;
    -params.z_w * bump_raw(u) / (kappa0() * params.ell)
}

/// Jet of `L_l` at `h0` up to `order`.
pub fn smoothed_switch_jet(h0: f64, order: usize, params: &ModelParams) -> Jet {
    let mut coeffs = vec![0.0; order + 1];
    coeffs[0] = smoothed_switch(h0, params);
    if order >= 1 {
        let u0 = (h0 - params.h_bar) / params.ell;
        let phi = bump_jet(u0, order - 1);
        // L^(k)/k! = -Z_w ell^{-k} phi^(k-1)(u)/k!
        let mut scale = 1.0 / params.ell;
        for k in 1..=order {
            coeffs[k] = -params.z_w * scale * phi.coeffs()[k - 1] / k as f64;
            scale /= params.ell;
        }
    }
    Jet::from_coeffs(coeffs)
}

/// CheZ flux `g(z, h) = k_V (L_l(h) - z)` for `z` in `[0, Z_w]`.
pub fn chez_flux(z: f64, h: f64, params: &ModelParams) -> Result<f64> {
    if !(0.0..=params.z_w).contains(&z) {
        return Err(Error::Domain(format!("z = {z} outside [0, {}]", params.z_w)));
    }
    Ok(params.k_v * (smoothed_switch(h, params) - z))
}

fn motility_from_rates(s0: f64, lambda: f64, mu: f64) -> f64 {
    s0 * s0 * mu / (3.0 * lambda * (mu + lambda))
}

/// Motility `D(z) = s0^2 mu0 / (3 lambda0 (mu0 + lambda0))`.
pub fn motility(z: f64, params: &ModelParams) -> Result<f64> {
    let (lambda, mu) = params.motility.rates(z, params.z_w);
    if !(lambda > 0.0 && mu > 0.0) {
        return Err(Error::ModelConfig(format!(
            "non-positive switching rate at z = {z}: lambda0 = {lambda}, mu0 = {mu}"
        )));
    }
    Ok(motility_from_rates(params.s0, lambda, mu))
}

/// Unchecked motility for inner loops of already-validated parameters.
pub(crate) fn motility_unchecked(z: f64, params: &ModelParams) -> f64 {
    let (lambda, mu) = params.motility.rates(z, params.z_w);
    motility_from_rates(params.s0, lambda, mu)
}

/// Jet of `D` composed with an arbitrary inner jet.
pub fn motility_jet(z: &Jet, params: &ModelParams) -> Jet {
    let (lambda, mu) = params.motility.rates_jet(z, params.z_w);
    let denom = (&lambda * &(&mu + &lambda)).scale(3.0);
    mu.scale(params.s0 * params.s0).div(&denom)
}

/// Composed motility `D~(h) = D(L_l(h))`.
pub fn composed_motility(h: f64, params: &ModelParams) -> Result<f64> {
    motility(smoothed_switch(h, params), params)
}

pub(crate) fn composed_motility_unchecked(h: f64, params: &ModelParams) -> f64 {
    motility_unchecked(smoothed_switch(h, params), params)
}

/// Jet of `D~` at `h0`.
pub fn composed_motility_jet(h0: f64, order: usize, params: &ModelParams) -> Jet {
    motility_jet(&smoothed_switch_jet(h0, order, params), params)
}

/// Constants of the smoothness hypotheses and the dissipativity threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisConstants {
    /// `sum_{i<=s} sup |D^(i)(z)|`.
    pub a: f64,
    /// `sup_w sum_{i<=s} |D~^(i)(w)|`.
    pub b: f64,
    /// `sum_{1<=i<=s} sup |d_w^i g(z, w)|`.
    pub c1: f64,
    /// `inf D(z)`.
    pub d: f64,
    /// `||D - d||^2_{L^2_z} / d^2`.
    pub eta: f64,
    pub kappa0: f64,
    /// Poincare constant of the periodic spatial domain.
    pub c_p: f64,
    /// Dissipativity threshold for steady states `(rho_a, alpha rho_a/beta, 0)`.
    pub lambda_b: f64,
    pub n_samples: usize,
    pub sobolev_s: u32,
}

/// Optimal Poincare constant for zero-mean fields on a periodic box of the
/// given side length (inverse of the lowest nonzero wavenumber).
pub fn poincare_constant(period: f64) -> f64 {
    period / (2.0 * PI)
}

/// `Lambda_b = 4 beta d^{3/2} D_h / (alpha^2 C_p^2 b)`.
pub fn dissipativity_threshold(params: &ModelParams, b: f64, d: f64, c_p: f64) -> f64 {
    4.0 * params.beta * d.powf(1.5) * params.d_h / (params.alpha * params.alpha * c_p * c_p * b)
}

impl HypothesisConstants {
    /// Estimates the sup/inf constants by dense sampling with exact jet
    /// derivatives; `period` is the spatial period of the domain.
    pub fn compute(params: &ModelParams, period: f64, n_samples: usize) -> Result<Self> {
        if n_samples < 256 {
            return Err(Error::Resolution(format!("n_samples must be at least 256, got {n_samples}")));
        }
        params.validate()?;
        if !(period > 0.0) {
            return Err(Error::ParameterDomain(format!("period must be positive, got {period}")));
        }
        let s = params.sobolev_s as usize;

        let dz = params.z_w / n_samples as f64;
        let mut sup_derivs = vec![0.0f64; s + 1];
        let mut d = f64::INFINITY;
        let mut values = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            let z = i as f64 * dz;
            let jet = motility_jet(&Jet::variable(z, s), params);
            for (k, sup) in sup_derivs.iter_mut().enumerate() {
                *sup = sup.max(jet.derivative(k).abs());
            }
            let v = jet.value();
            if !(v > 0.0) {
                return Err(Error::ModelConfig(format!("D({z}) = {v} is not positive")));
            }
            d = d.min(v);
            values.push(v);
        }
        let a: f64 = sup_derivs.iter().sum();
        let eta = values.iter().map(|v| (v - d) * (v - d)).sum::<f64>() * dz / (d * d);

        // D~ and L_l are constant outside [h_bar - ell, h_bar + ell]
        let lo = params.h_bar - params.ell;
        let width = 2.0 * params.ell;
        let mut b = 0.0f64;
        let mut sup_l = vec![0.0f64; s + 1];
        for i in 0..=n_samples {
            let w = lo + width * i as f64 / n_samples as f64;
            let l = smoothed_switch_jet(w, s, params);
            for (k, sup) in sup_l.iter_mut().enumerate().skip(1) {
                *sup = sup.max(l.derivative(k).abs());
            }
            let dt = motility_jet(&l, params);
            let sum: f64 = dt.derivatives().iter().map(|v| v.abs()).sum();
            b = b.max(sum);
        }
        let c1 = params.k_v * sup_l.iter().skip(1).sum::<f64>();
        let c_p = poincare_constant(period);
        let lambda_b = dissipativity_threshold(params, b, d, c_p);
        Ok(Self {
            a,
            b,
            c1,
            d,
            eta,
            kappa0: kappa0(),
            c_p,
            lambda_b,
            n_samples,
            sobolev_s: params.sobolev_s,
        })
    }
}
