use proptest::prelude::*;
use stripe_lab::model::{
    chez_flux, composed_motility, dissipativity_threshold, kappa0, mollifier_phi, motility, smoothed_switch,
    smoothed_switch_jet, smoothed_switch_prime,
};
use stripe_lab::{HypothesisConstants, ModelParams, MotilityProfile};

/// Trapezoid rule on a closed interval. The bump and all its derivatives
/// vanish at the ends, so the error decays faster than any power of `n`.
fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (inner + 0.5 * (f(a) + f(b)))
}

fn raw_bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 / (s * s - 1.0)).exp()
    } else {
        0.0
    }
}

fn with_ell(ell: f64) -> ModelParams {
    ModelParams {
        ell,
        ..ModelParams::default()
    }
}

#[test]
fn kappa0_matches_independent_quadrature() {
    let oracle = trapezoid(raw_bump, -1.0, 1.0, 4000);
    assert!((kappa0() - oracle).abs() < 1e-12, "{} vs {oracle}", kappa0());
    let peak = mollifier_phi(0.0, 1.0).unwrap();
    assert!((peak - (-1.0f64).exp() / oracle).abs() < 1e-11);
}

#[test]
fn mollifier_integrates_to_one() {
    for ell in [0.1, 0.5, 1.0, 3.0] {
        let total = trapezoid(|v| mollifier_phi(v, ell).unwrap(), -ell, ell, 4000);
        assert!((total - 1.0).abs() < 1e-10, "ell = {ell}: {total}");
    }
    assert_eq!(mollifier_phi(0.3, 0.3).unwrap(), 0.0);
    assert!(mollifier_phi(0.0, 0.0).is_err());
}

#[test]
fn switch_tends_to_step_as_ell_shrinks() {
    let p = ModelParams::default();
    let step = |h: f64| if h < p.h_bar { p.z_w } else { 0.0 };
    for ell in [0.1, 0.01, 0.001] {
        let q = with_ell(ell);
        for h in [0.0, 0.5, 0.8, 0.95, 1.05, 1.2, 2.0] {
            if (h - p.h_bar).abs() >= ell {
                assert_eq!(smoothed_switch(h, &q), step(h), "ell = {ell}, h = {h}");
            }
        }
    }
    // inside the transition band the error shrinks with ell
    let errs: Vec<f64> = [0.1, 0.01, 0.001]
        .iter()
        .map(|&ell| (smoothed_switch(p.h_bar + 0.005, &with_ell(ell)) - 0.0).abs())
        .collect();
    assert!(errs[0] > errs[1] && errs[1] >= errs[2]);
}

#[test]
fn switch_prime_matches_finite_differences() {
    let p = ModelParams::default();
    let step = 1e-6 * p.ell;
    for i in 0..21 {
        let h = p.h_bar - 0.95 * p.ell + 1.9 * p.ell * i as f64 / 20.0;
        let fd = (smoothed_switch(h + step, &p) - smoothed_switch(h - step, &p)) / (2.0 * step);
        let exact = smoothed_switch_prime(h, &p);
        assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-8), "h = {h}: {fd} vs {exact}");
    }
    let at_threshold = smoothed_switch_prime(p.h_bar, &p);
    let oracle = -p.z_w * (-1.0f64).exp() / (trapezoid(raw_bump, -1.0, 1.0, 4000) * p.ell);
    assert!((at_threshold - oracle).abs() < 1e-10);
}

#[test]
fn switch_derivatives_scale_like_inverse_powers_of_ell() {
    // sup |L^(k)| ell^k is the same number for every ell
    let ells = [0.4, 0.1, 0.025, 0.00625];
    for k in 1..=2usize {
        let scaled: Vec<f64> = ells
            .iter()
            .map(|&ell| {
                let p = with_ell(ell);
                (0..=2000)
                    .map(|i| {
                        let h = p.h_bar - ell + 2.0 * ell * i as f64 / 2000.0;
                        smoothed_switch_jet(h, k, &p).derivative(k).abs()
                    })
                    .fold(0.0, f64::max)
                    * ell.powi(k as i32)
            })
            .collect();
        let c = scaled[0];
        for s in &scaled {
            assert!((s / c - 1.0).abs() < 1e-9, "k = {k}: {scaled:?}");
        }
    }
}

#[test]
fn chez_flux_has_slope_minus_k_v() {
    let p = ModelParams {
        k_v: 2.5,
        ..ModelParams::default()
    };
    let n = 64;
    for h in [0.0, 0.9, 1.0, 1.3, 4.0] {
        for j in 0..n {
            let z0 = j as f64 / n as f64;
            let z1 = (j + 1) as f64 / n as f64;
            let slope = (chez_flux(z1, h, &p).unwrap() - chez_flux(z0, h, &p).unwrap()) * n as f64;
            assert!((slope + p.k_v).abs() < 1e-12);
        }
    }
    assert!(chez_flux(1.5, 0.0, &p).is_err());
}

#[test]
fn motility_bounded_below_by_sampled_infimum() {
    let p = ModelParams::default();
    let d = (0..=10_000)
        .map(|i| motility(p.z_w * i as f64 / 10_000.0, &p).unwrap())
        .fold(f64::INFINITY, f64::min);
    let c = HypothesisConstants::compute(&p, 2.0 * std::f64::consts::PI, 1024).unwrap();
    assert!((c.d - d).abs() < 1e-6 * d, "{} vs {d}", c.d);
    for i in 0..10_000 {
        let h = -1.0 + 4.0 * i as f64 / 10_000.0;
        assert!(composed_motility(h, &p).unwrap() >= d - 1e-12);
    }
}

#[test]
fn constant_rates_give_constant_mobility() {
    let p = ModelParams {
        motility: MotilityProfile::Constant { lambda: 1.0, mu: 1.0 },
        ..ModelParams::default()
    };
    for h in [-1.0, 0.7, 1.0, 1.3, 3.0] {
        assert!((composed_motility(h, &p).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn switch_is_monotone_with_range_zero_to_z_w(
        ell in 0.01f64..2.0,
        z_w in 0.1f64..5.0,
        h_bar in 0.1f64..3.0,
        a in -5.0f64..8.0,
        b in -5.0f64..8.0,
    ) {
        let p = ModelParams { ell, z_w, h_bar, ..ModelParams::default() };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (l_lo, l_hi) = (smoothed_switch(lo, &p), smoothed_switch(hi, &p));
        prop_assert!(l_hi <= l_lo);
        prop_assert!((0.0..=z_w).contains(&l_lo) && (0.0..=z_w).contains(&l_hi));
        prop_assert!(smoothed_switch_prime(lo, &p) <= 0.0);
    }

    #[test]
    fn threshold_monotone_in_constants(
        b in 0.1f64..10.0,
        d in 0.01f64..2.0,
        d_h in 0.1f64..5.0,
        beta in 0.1f64..5.0,
        bump in 1.01f64..2.0,
    ) {
        let p = ModelParams { d_h, beta, ..ModelParams::default() };
        let base = dissipativity_threshold(&p, b, d, 1.0);
        prop_assert!(dissipativity_threshold(&p, b * bump, d, 1.0) < base);
        prop_assert!(dissipativity_threshold(&p, b, d * bump, 1.0) > base);
        let q = ModelParams { d_h: d_h * bump, ..p };
        prop_assert!(dissipativity_threshold(&q, b, d, 1.0) > base);
        let q = ModelParams { beta: beta * bump, ..p };
        prop_assert!(dissipativity_threshold(&q, b, d, 1.0) > base);
    }
}
