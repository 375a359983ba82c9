//! Analytic cross-checks of the Cauchy test bed against independent
//! numerical routes: quadrature of the defining integral, finite
//! differences, the discriminant of the stationary cubic, and brute-force
//! grid searches.

use chainstack_core::cauchy::{
    elpd_mixture, h_limit, h_prime, limiting_modes, optimal_mixture_weights, true_density, xi,
};
use chainstack_core::quad::integrate_real_line;
use chainstack_core::stacking::mode_height_weights;
use chainstack_core::stacking::ChainWeights;

/// h(μ) by adaptive quadrature of the defining integral
/// −∫ log(1+(y−μ)²)·[(1−p₀)/((a+y)²+1) + p₀/((y−a)²+1)] dy.
fn h_quad(mu: f64, a: f64, p0: f64) -> f64 {
    integrate_real_line(
        move |y| {
            let d = y - mu;
            let mix = (1.0 - p0) / ((a + y) * (a + y) + 1.0) + p0 / ((y - a) * (y - a) + 1.0);
            -(d * d).ln_1p() * mix
        },
        1e-10,
    )
    .unwrap()
}

/// Discriminant of the stationary cubic as printed in the bimodality
/// proof; for p₀ ∈ [0.5, 1] the limit posterior is bimodal iff Δ > 0.
fn discriminant(a: f64, p0: f64) -> f64 {
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    (64.0 * a6 + 256.0 * a4) * p0.powi(4)
        + (-128.0 * a6 - 512.0 * a4) * p0.powi(3)
        + (64.0 * a6 - 512.0 * a4 - 2816.0 * a2) * p0.powi(2)
        + (768.0 * a4 + 2816.0 * a2) * p0
        - 256.0 * a4
        - 512.0 * a2
        - 256.0
}

#[test]
fn h_prime_matches_finite_difference_of_quadrature() {
    let delta = 1e-3;
    for &a in &[1.0, 3.0, 10.0] {
        for &p0 in &[0.5, 0.7, 0.9] {
            for j in 0..9 {
                let mu = -2.0 * a + j as f64 * (4.0 * a / 8.0);
                let fd = (h_quad(mu + delta, a, p0) - h_quad(mu - delta, a, p0)) / (2.0 * delta);
                let closed = h_prime(mu, a, p0);
                assert!(
                    (fd - closed).abs() < 1e-6,
                    "a={a} p0={p0} mu={mu}: fd {fd} vs closed {closed}"
                );
            }
        }
    }
}

#[test]
fn limiting_modes_are_the_descending_zero_crossings_of_h_prime() {
    for &(a, p0) in &[
        (3.0, 0.5),
        (5.0, 0.55),
        (10.0, 0.6),
        (10.0, 0.9),
        (1.5, 0.7),
    ] {
        let report = limiting_modes(a, p0).unwrap();
        // every reported mode is a + to − crossing of h'
        for &m in &report.modes {
            let eps = 1e-5 * a.max(1.0);
            assert!(h_prime(m - eps, a, p0) > 0.0, "a={a} p0={p0} m={m}");
            assert!(h_prime(m + eps, a, p0) < 0.0, "a={a} p0={p0} m={m}");
        }
        // and no crossing is missed: scan a fine grid
        let mut crossings = 0;
        let mut prev = h_prime(-2.5 * a, a, p0);
        let steps = 100_000;
        for j in 1..=steps {
            let mu = -2.5 * a + j as f64 * (5.0 * a / steps as f64);
            let cur = h_prime(mu, a, p0);
            if prev > 0.0 && cur <= 0.0 {
                crossings += 1;
            }
            prev = cur;
        }
        assert_eq!(crossings, report.modes.len(), "a={a} p0={p0}");
    }
}

#[test]
fn bimodal_flag_equals_xi_comparison_over_grid() {
    for &a in &[2.5, 3.0, 4.0, 6.0, 10.0, 20.0] {
        let boundary = xi(a).unwrap();
        for &p0 in &[0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.999] {
            let report = limiting_modes(a, p0).unwrap();
            assert_eq!(report.bimodal, p0 < boundary, "a={a} p0={p0} xi={boundary}");
        }
    }
    // below the separation threshold the posterior is always unimodal
    for &a in &[0.5, 1.0, 1.9] {
        for &p0 in &[0.5, 0.8, 1.0] {
            assert!(!limiting_modes(a, p0).unwrap().bimodal, "a={a} p0={p0}");
        }
    }
}

#[test]
fn discriminant_sign_flips_exactly_at_xi() {
    for &a in &[3.0, 5.0, 10.0] {
        let b = xi(a).unwrap();
        assert!(discriminant(a, b - 1e-8) > 0.0, "a={a}");
        assert!(discriminant(a, b + 1e-8) < 0.0, "a={a}");
        // flag agrees with the discriminant route on both sides
        assert!(limiting_modes(a, b - 1e-6).unwrap().bimodal);
        assert!(!limiting_modes(a, b + 1e-6).unwrap().bimodal);
    }
}

#[test]
fn modes_symmetric_at_even_mixture() {
    for &a in &[2.5, 3.0, 7.0, 15.0] {
        let report = limiting_modes(a, 0.5).unwrap();
        assert!(report.bimodal);
        assert!(
            (report.modes[0] + report.modes[1]).abs() < 1e-9,
            "a={a}: {:?}",
            report.modes
        );
    }
}

#[test]
fn mixture_optimizer_matches_grid_search() {
    // elpd_mixture is concave in w for fixed locations, so the simplex
    // maximizer must agree with a 1e-3 grid search
    for &(a, p0) in &[(10.0, 0.5), (10.0, 0.6), (5.0, 0.55)] {
        let modes = limiting_modes(a, p0).unwrap().modes;
        assert_eq!(modes.len(), 2);
        let (w, _) = optimal_mixture_weights(a, p0, &modes).unwrap();

        let mut best = (f64::NEG_INFINITY, 0.0);
        for j in 0..=1000 {
            let w0 = j as f64 / 1000.0;
            let cand = ChainWeights::new(vec![w0, 1.0 - w0]).unwrap();
            let v = elpd_mixture(a, p0, &cand, &modes).unwrap();
            if v > best.0 {
                best = (v, w0);
            }
        }
        assert!(
            (w.as_slice()[0] - best.1).abs() <= 2e-3,
            "a={a} p0={p0}: optimizer {} vs grid {}",
            w.as_slice()[0],
            best.1
        );
    }
}

#[test]
fn mode_height_weights_even_at_symmetric_modes() {
    // the limiting posterior heights at the two modes are equal for
    // p0 = 1/2, so mode-height weighting splits evenly
    let modes = limiting_modes(10.0, 0.5).unwrap().modes;
    let heights: Vec<f64> = modes.iter().map(|&m| h_limit(m, 10.0, 0.5)).collect();
    let w = mode_height_weights(&heights).unwrap();
    assert!((w.as_slice()[0] - 0.5).abs() < 1e-12, "{:?}", w.as_slice());
}

#[test]
fn true_density_integrates_to_one() {
    for &(a, p0) in &[(10.0, 0.5), (3.0, 0.9), (20.0, 0.55)] {
        let mass = integrate_real_line(move |y| true_density(y, a, p0), 1e-9).unwrap();
        assert!((mass - 1.0).abs() < 1e-8, "a={a} p0={p0}: {mass}");
    }
}
