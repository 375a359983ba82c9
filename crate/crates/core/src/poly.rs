//! Real roots of low-degree polynomials by simultaneous (Durand–Kerner)
//! iteration with Newton polishing.
//!
//! All roots are located at once in the complex plane; a root counts as
//! real when its imaginary part is below the tolerance of 1e-9 relative to
//! its magnitude, which keeps the classification robust near double-root
//! boundaries.

use alloc::vec::Vec;

use num_complex::Complex64;
// f64 transcendentals come from this trait in no_std builds; with std
// feature unification (tests) the inherent methods win and it sits idle
#[allow(unused_imports)]
use num_traits::Float;

use crate::{CoreError, Result};

/// Relative imaginary-part tolerance for treating a complex root as real.
pub const REALNESS_TOL: f64 = 1e-9;

fn horner_c(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        acc = acc * z + c;
    }
    acc
}

fn horner_r(coeffs: &[f64], x: f64) -> (f64, f64) {
    // value and derivative
    let mut v = 0.0;
    let mut d = 0.0;
    for &c in coeffs {
        d = d * x + v;
        v = v * x + c;
    }
    (v, d)
}

/// All complex roots of the polynomial with the given coefficients in
/// descending degree order (leading coefficient first).
pub fn complex_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    if coeffs.len() < 2 || coeffs[0] == 0.0 {
        return Err(CoreError::Domain(alloc::string::String::from(
            "polynomial must have a nonzero leading coefficient and degree >= 1",
        )));
    }
    let n = coeffs.len() - 1;
    let monic: Vec<f64> = coeffs.iter().map(|c| c / coeffs[0]).collect();
    // Cauchy bound on root magnitudes
    let bound = 1.0 + monic[1..].iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    // distinct non-real starting points spread on a circle
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n)
        .map(|j| seed.powu(j as u32 + 1) / seed.norm_sqr().sqrt().powi(j as i32 + 1) * bound * 0.9)
        .collect();
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for j in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for k in 0..n {
                if k != j {
                    denom *= z[j] - z[k];
                }
            }
            if denom.norm_sqr() == 0.0 {
                // coincident iterates: nudge apart
                z[j] += Complex64::new(1e-8 * bound, 1e-8 * bound);
                continue;
            }
            let step = horner_c(&monic, z[j]) / denom;
            z[j] -= step;
            max_step = max_step.max(step.norm_sqr().sqrt());
        }
        if max_step < 1e-14 * bound.max(1.0) {
            break;
        }
    }
    Ok(z)
}

/// Real roots (ascending) of the polynomial, using the 1e-9 relative
/// imaginary-part tolerance and Newton polishing on the real axis.
pub fn real_roots(coeffs: &[f64]) -> Result<Vec<f64>> {
    real_roots_with_tol(coeffs, REALNESS_TOL)
}

/// Real roots (ascending) with an explicit realness tolerance.
pub fn real_roots_with_tol(coeffs: &[f64], tol: f64) -> Result<Vec<f64>> {
    let roots = complex_roots(coeffs)?;
    let mut out: Vec<f64> = roots
        .iter()
        .filter(|z| z.im.abs() <= tol * z.norm_sqr().sqrt().max(1.0))
        .map(|z| polish(coeffs, z.re))
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    Ok(out)
}

fn polish(coeffs: &[f64], mut x: f64) -> f64 {
    for _ in 0..8 {
        let (v, d) = horner_r(coeffs, x);
        if d == 0.0 || !v.is_finite() {
            break;
        }
        let step = v / d;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cubic_known_roots() {
        // (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
        let r = real_roots(&[1.0, -6.0, 11.0, -6.0]).unwrap();
        assert_eq!(r.len(), 3);
        assert_abs_diff_eq!(r[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn quartic_with_complex_pair() {
        // (x^2 + 1)(x - 2)(x + 5) = x^4 + 3x^3 - 9x^2 + 3x - 10
        let r = real_roots(&[1.0, 3.0, -9.0, 3.0, -10.0]).unwrap();
        assert_eq!(r.len(), 2);
        assert_abs_diff_eq!(r[0], -5.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn near_double_root_still_found() {
        // (x - (1 + e))(x - (1 - e))(x + 1) = x^3 - x^2 - (1 + e^2)x + (1 - e^2)
        let eps = 1e-4;
        let r = real_roots(&[1.0, -1.0, -(1.0 + eps * eps), 1.0 - eps * eps]).unwrap();
        assert!(r.iter().any(|x| (x + 1.0).abs() < 1e-9));
        // the close pair polishes onto true roots near 1
        assert!(r.iter().any(|x| (x - 1.0).abs() < 1e-3));
    }

    #[test]
    fn rejects_zero_leading_coefficient() {
        assert!(real_roots(&[0.0, 1.0, 2.0]).is_err());
    }
}
