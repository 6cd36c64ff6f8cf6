//! Linearization around `(0, 0, n0)`, the total-mass ODE, the
//! positive-definiteness certificate behind the dissipativity threshold,
//! and the local-lifespan lower bound.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{chez_flux, composed_motility, motility, HypothesisConstants, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionPoint {
    pub m: Vec<i64>,
    /// `z` frequency (kinetic linearization only).
    pub m_z: i64,
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(serialize_with = "ser_complex")]
    pub lambda3: Complex64,
}

fn ser_complex<S: serde::Serializer>(c: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&c.re)?;
    t.serialize_element(&c.im)?;
    t.end()
}

fn norm_sq(m: &[i64]) -> f64 {
    m.iter().map(|&k| (k * k) as f64).sum()
}

fn check_n0(n0: f64) -> Result<()> {
    if !(n0 >= 0.0 && n0.is_finite()) {
        return Err(Error::ParameterDomain(format!("n0 must be nonnegative, got {n0}")));
    }
    Ok(())
}

/// Eigenvalues of the kinetic linearization at spatial frequency `m`,
/// `z` frequency `m_z`, evaluated at internal state `z`.
pub fn kinetic_eigenvalues(m: &[i64], m_z: i64, z: f64, n0: f64, params: &ModelParams) -> Result<DispersionPoint> {
    check_n0(n0)?;
    let k2 = norm_sq(m);
    let g = chez_flux(z, 0.0, params)?;
    let d = motility(z, params)?;
    let re = -d * k2 + params.k_v / params.eps + params.gamma * n0;
    let im = -g * m_z as f64 / params.eps;
    Ok(DispersionPoint {
        m: m.to_vec(),
        m_z,
        lambda1: -params.d_n * k2,
        lambda2: -params.d_h * k2 - params.beta,
        lambda3: Complex64::new(re, im),
    })
}

/// Eigenvalues of the macroscopic linearization at spatial frequency `m`.
pub fn macro_eigenvalues(m: &[i64], n0: f64, params: &ModelParams) -> Result<DispersionPoint> {
    check_n0(n0)?;
    let k2 = norm_sq(m);
    let d0 = composed_motility(0.0, params)?;
    Ok(DispersionPoint {
        m: m.to_vec(),
        m_z: 0,
        lambda1: -params.d_n * k2,
        lambda2: -params.d_h * k2 - params.beta,
        lambda3: Complex64::new(-d0 * k2 + params.gamma * n0, 0.0),
    })
}

/// Total masses `(A_rho, A_h, A_n)` of a perturbation of `(0, 0, n0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Masses {
    pub rho: f64,
    pub h: f64,
    pub n: f64,
}

/// `(e^{x} - 1) / x`, accurate near zero.
fn exprel(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x / 2.0 + x * x / 6.0
    } else {
        x.exp_m1() / x
    }
}

/// Exact solution of
/// `A_rho' = gamma n0 A_rho`, `A_h' = alpha A_rho - beta A_h`,
/// `A_n' = -xi n0 A_rho`.
pub fn mass_ode_solution(initial: Masses, n0: f64, params: &ModelParams, t: f64) -> Result<Masses> {
    check_n0(n0)?;
    if !(t >= 0.0) {
        return Err(Error::ParameterDomain(format!("t must be nonnegative, got {t}")));
    }
    let g = params.gamma * n0;
    let beta = params.beta;
    let rho = initial.rho * (g * t).exp();
    // A_h = e^{-beta t} [A_h0 + alpha A_rho0 t (e^{(g+beta)t} - 1)/((g+beta)t)]
    let h = (-beta * t).exp() * (initial.h + params.alpha * initial.rho * t * exprel((g + beta) * t));
    // A_n = A_n0 - xi n0 A_rho0 t (e^{g t} - 1)/(g t)
    let n = initial.n - params.xi * n0 * initial.rho * t * exprel(g * t);
    Ok(Masses { rho, h, n })
}

/// Result of [`dissipativity_certificate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Certificate {
    Certified {
        lambda: f64,
        mu: f64,
        /// Admissible interval of `r = mu / lambda`.
        r_min: f64,
        r_max: f64,
        /// Smallest eigenvalue of the coefficient matrix `A` (diagonal
        /// `lambda, D_h mu, beta mu`, off-diagonal `X`-`Y` and `X`-`Z`
        /// couplings) at `(lambda, mu)`, reported for all three constants.
        /// The decision above does not depend on its sign.
        alpha1: f64,
        alpha2: f64,
        alpha3: f64,
        /// Smallest eigenvalue of the quadratic form
        /// `lambda (X^2 - c_xy XY) + mu (D_h Y^2 + beta Z^2 - c_yz YZ)`.
        coercivity_min_eigenvalue: f64,
    },
    NotCertifiable {
        discriminant: f64,
    },
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certificate::Certified { .. })
    }
}

/// Searches `r = mu / lambda` satisfying
/// `r > b rho_a / (4 D_h sqrt d)` and `r^2 - K r + c < 0` with
/// `K = 4 beta d / (alpha^2 C_p^2)`, `c = beta b sqrt(d) rho_a / (alpha^2 C_p^2 D_h)`.
/// The quadratic has real roots exactly when `rho_a < Lambda_b`; the
/// certificate takes `lambda = 1` and `r` at the midpoint of the admissible
/// interval.
pub fn dissipativity_certificate(rho_a: f64, params: &ModelParams, constants: &HypothesisConstants) -> Result<Certificate> {
    if !(rho_a >= 0.0 && rho_a.is_finite()) {
        return Err(Error::ParameterDomain(format!("rho_a must be nonnegative, got {rho_a}")));
    }
    let (b, d, c_p) = (constants.b, constants.d, constants.c_p);
    let (alpha, beta, d_h) = (params.alpha, params.beta, params.d_h);
    let sd = d.sqrt();
    let a2c2 = alpha * alpha * c_p * c_p;
    let k = 4.0 * beta * d / a2c2;
    let c = beta * b * sd * rho_a / (a2c2 * d_h);
    let disc = k * k - 4.0 * c;
    if !(disc > 0.0) {
        return Ok(Certificate::NotCertifiable { discriminant: disc });
    }
    let root = disc.sqrt();
    // the smaller root written without cancellation
    let r_lo = if c == 0.0 { 0.0 } else { 2.0 * c / (k + root) };
    let r_hi = 0.5 * (k + root);
    let r_first = b * rho_a / (4.0 * d_h * sd);
    let r_min = r_lo.max(r_first);
    if !(r_min < r_hi) {
        return Ok(Certificate::NotCertifiable { discriminant: disc });
    }
    let lambda = 1.0;
    let mu = 0.5 * (r_min + r_hi) * lambda;

    let c_xy = lambda * b * rho_a / sd;
    let c_yz = mu * c_p * alpha / sd;
    let reduced = Matrix3::new(
        lambda,
        -0.5 * c_xy,
        0.0,
        -0.5 * c_xy,
        mu * d_h,
        -0.5 * c_yz,
        0.0,
        -0.5 * c_yz,
        mu * beta,
    );
    let coercivity_min_eigenvalue = reduced.symmetric_eigen().eigenvalues.min();
    let literal = Matrix3::new(
        lambda,
        -lambda * b * rho_a / (2.0 * sd),
        -b * c_p * alpha * mu / (2.0 * d),
        -lambda * b * rho_a / (2.0 * sd),
        d_h * mu,
        0.0,
        -b * c_p * alpha * mu / (2.0 * d),
        0.0,
        beta * mu,
    );
    let min_eig = literal.symmetric_eigen().eigenvalues.min();
    Ok(Certificate::Certified {
        lambda,
        mu,
        r_min,
        r_max: r_hi,
        alpha1: min_eig,
        alpha2: min_eig,
        alpha3: min_eig,
        coercivity_min_eigenvalue,
    })
}

/// Locates the largest certifiable `rho_a` by bisection on `[0, upper]`.
pub fn certificate_threshold(params: &ModelParams, constants: &HypothesisConstants, upper: f64, rel_tol: f64) -> Result<f64> {
    if !dissipativity_certificate(0.0, params, constants)?.is_certified() {
        return Err(Error::Fit("rho_a = 0 is not certifiable".into()));
    }
    let mut lo = 0.0;
    let mut hi = upper;
    if dissipativity_certificate(hi, params, constants)?.is_certified() {
        return Err(Error::Fit(format!("upper bound {upper} is still certifiable")));
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if dissipativity_certificate(mid, params, constants)?.is_certified() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `H(y) = y / (1 + y^{s/2})^{2/s}`, increasing from 0 towards 1.
pub fn lifespan_h(y: f64, s: u32) -> f64 {
    let half = s as f64 / 2.0;
    if y <= 0.0 {
        return 0.0;
    }
    // y / (1 + y^{s/2})^{2/s} = (1 + y^{-s/2})^{-2/s}, stable for large y
    if y > 1.0 {
        (1.0 + y.powf(-half)).powf(-1.0 / half)
    } else {
        y / (1.0 + y.powf(half)).powf(1.0 / half)
    }
}

/// Inverse of [`lifespan_h`] by bisection; `target` must lie in `[0, 1)`.
pub fn lifespan_h_inverse(target: f64, s: u32) -> Result<f64> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::Domain(format!("H saturates at 1; no finite preimage of {target}")));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while lifespan_h(hi, s) <= target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Domain(format!("preimage of {target} overflows")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lifespan_h(mid, s) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `T0 = ln([1 + E^{s/2}]^{2/s} / E) / (C (1 + 1/eps))`.
pub fn lifespan_lower_bound(e_in: f64, eps: f64, s: u32, c: f64) -> Result<f64> {
    if !(e_in > 0.0) {
        return Err(Error::ParameterDomain(format!("initial energy must be positive, got {e_in}")));
    }
    if !(eps > 0.0 && c > 0.0) {
        return Err(Error::ParameterDomain("eps and C must be positive".into()));
    }
    let half = s as f64 / 2.0;
    let log_ratio = (1.0 + e_in.powf(half)).ln() / half - e_in.ln();
    Ok(log_ratio / (c * (1.0 + 1.0 / eps)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MotilityProfile;
    use approx::assert_relative_eq;

    fn constant_params() -> ModelParams {
        ModelParams {
            motility: MotilityProfile::Constant { lambda: 1.0, mu: 1.0 },
            ..ModelParams::default()
        }
    }

    #[test]
    fn kinetic_examples() {
        let mut p = constant_params();
        let e = kinetic_eigenvalues(&[0], 0, 0.3, 0.2, &p).unwrap();
        assert_eq!(e.lambda1, 0.0);
        assert_eq!(e.lambda2, -p.beta);
        assert!(e.lambda3.re > 0.0);
        p.k_v = 0.5;
        p.eps = 1.0;
        p.gamma = 1.0;
        // D = 1/6, |m|^2 = 6
        let e = kinetic_eigenvalues(&[2, 1, 1], 1, 0.5, 0.4, &p).unwrap();
        assert_relative_eq!(e.lambda3.re, -0.1, epsilon = 1e-14);
        assert_relative_eq!(e.lambda3.im, -0.5 * (1.0 - 0.5), epsilon = 1e-14);
        assert!(kinetic_eigenvalues(&[1], 0, 0.5, -1.0, &p).is_err());
    }

    #[test]
    fn macro_examples() {
        let p = constant_params();
        let d0 = 1.0 / 6.0;
        let e = macro_eigenvalues(&[1], 1.0, &p).unwrap();
        assert_relative_eq!(e.lambda3.re, 1.0 - d0, epsilon = 1e-15);
        for k in 0..5 {
            assert!(macro_eigenvalues(&[k], 0.0, &p).unwrap().lambda3.re <= 0.0);
        }
    }

    #[test]
    fn mass_ode_examples() {
        let p = ModelParams {
            gamma: 1.0,
            ..ModelParams::default()
        };
        let m = mass_ode_solution(Masses { rho: 1.0, h: 0.5, n: 2.0 }, 1.0, &p, 2f64.ln()).unwrap();
        assert_relative_eq!(m.rho, 2.0, epsilon = 1e-14);
        let z = mass_ode_solution(Masses { rho: 0.0, h: 0.5, n: 2.0 }, 0.7, &p, 1.3).unwrap();
        assert_eq!(z.rho, 0.0);
        assert_eq!(z.n, 2.0);
        assert_relative_eq!(z.h, 0.5 * (-1.3f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn mass_ode_matches_rk4_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let p = ModelParams {
                gamma: rng.gen_range(0.1..2.0),
                alpha: rng.gen_range(0.1..2.0),
                beta: rng.gen_range(0.1..2.0),
                xi: rng.gen_range(0.1..2.0),
                ..ModelParams::default()
            };
            let n0 = rng.gen_range(0.0..2.0);
            let init = Masses {
                rho: rng.gen_range(0.0..1.0),
                h: rng.gen_range(0.0..1.0),
                n: rng.gen_range(0.0..1.0),
            };
            let f = |y: [f64; 3]| [p.gamma * n0 * y[0], p.alpha * y[0] - p.beta * y[1], -p.xi * n0 * y[0]];
            let mut y = [init.rho, init.h, init.n];
            let dt = 1e-5;
            for _ in 0..100_000 {
                let k1 = f(y);
                let k2 = f([0, 1, 2].map(|i| y[i] + 0.5 * dt * k1[i]));
                let k3 = f([0, 1, 2].map(|i| y[i] + 0.5 * dt * k2[i]));
                let k4 = f([0, 1, 2].map(|i| y[i] + dt * k3[i]));
                y = [0, 1, 2].map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
            }
            let exact = mass_ode_solution(init, n0, &p, 1.0).unwrap();
            for (a, b) in [exact.rho, exact.h, exact.n].iter().zip(y) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
            }
            let w = p.gamma / p.xi;
            assert!((exact.rho + w * exact.n - (init.rho + w * init.n)).abs() < 1e-12);
        }
    }

    #[test]
    fn certificate_at_zero_and_unit_coefficients() {
        let p = ModelParams::default();
        let mut c = HypothesisConstants::compute(&p, 2.0 * std::f64::consts::PI, 512).unwrap();
        c.b = 1.0;
        c.d = 1.0;
        c.c_p = 1.0;
        match dissipativity_certificate(0.0, &p, &c).unwrap() {
            Certificate::Certified { r_min, r_max, .. } => {
                assert_eq!(r_min, 0.0);
                assert_relative_eq!(r_max, 4.0, epsilon = 1e-15);
            }
            other => panic!("{other:?}"),
        }
        assert!(dissipativity_certificate(2.0, &p, &c).unwrap().is_certified());
        assert!(!dissipativity_certificate(5.0, &p, &c).unwrap().is_certified());
        assert!(dissipativity_certificate(-1.0, &p, &c).is_err());
    }

    #[test]
    fn dense_search_oracle_agrees() {
        // scan r over (0, 100] and test the reduced conditions directly
        let p = ModelParams::default();
        let mut c = HypothesisConstants::compute(&p, 2.0 * std::f64::consts::PI, 512).unwrap();
        c.b = 1.0;
        c.d = 1.0;
        c.c_p = 1.0;
        for rho_a in [0.5, 2.0, 3.9, 4.1, 5.0] {
            let found = (1..=100_000).map(|i| i as f64 * 1e-3).any(|r| {
                let first = r - rho_a / 4.0;
                let quad = r * r - 4.0 * r + rho_a;
                first > 0.0 && quad < 0.0
            });
            assert_eq!(found, dissipativity_certificate(rho_a, &p, &c).unwrap().is_certified(), "rho_a = {rho_a}");
        }
    }

    #[test]
    fn lifespan_examples() {
        assert_eq!(lifespan_h(0.0, 3), 0.0);
        for y in [1e-3, 0.1, 1.0, 10.0, 1e6] {
            assert!(lifespan_h(y, 3) < 1.0);
        }
        for y in [0.1, 1.0, 10.0] {
            let back = lifespan_h_inverse(lifespan_h(y, 3), 3).unwrap();
            assert!((back - y).abs() <= 1e-10 * y.max(1.0));
        }
        assert!(lifespan_h_inverse(1.0, 3).is_err());
        let t1 = lifespan_lower_bound(0.5, 0.2, 3, 1.0).unwrap();
        let t2 = lifespan_lower_bound(0.5, 0.1, 3, 1.0).unwrap();
        assert_relative_eq!(t2 / t1, (1.0 + 1.0 / 0.2) / (1.0 + 2.0 / 0.2), epsilon = 1e-14);
        assert!(lifespan_lower_bound(0.0, 1.0, 3, 1.0).is_err());
    }
}
