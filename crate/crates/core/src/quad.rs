//! Adaptive Gauss–Kronrod quadrature (7–15 pair) with a tangent transform
//! for integrals over the whole real line.
//!
//! Heavy-tailed integrands (Cauchy mixtures) decay too slowly for naive
//! truncation, so real-line integrals substitute y = tan θ and integrate
//! θ over (−π/2, π/2); the Kronrod abscissae are interior, so the endpoint
//! singularities of sec²θ are never evaluated.

use alloc::format;
use alloc::vec::Vec;

// f64 transcendentals come from this trait in no_std builds; with std
// feature unification (tests) the inherent methods win and it sits idle
#[allow(unused_imports)]
use num_traits::Float;

use crate::{CoreError, Result};

// 15-point Kronrod abscissae on [-1, 1] (positive half) and weights,
// with the embedded 7-point Gauss weights (QUADPACK values).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One Gauss–Kronrod 7–15 evaluation on [a, b]: returns the Kronrod
/// estimate and the |K15 − G7| error estimate.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptively integrates `f` over [a, b] to absolute tolerance `atol` by
/// bisecting the interval with the worst error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, atol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 2_000;
    let (v, e) = gk15(&f, a, b);
    // (error, a, b, value); worst interval is popped by linear scan
    let mut segments: Vec<(f64, f64, f64, f64)> = alloc::vec![(e, a, b, v)];
    loop {
        let total_err: f64 = segments.iter().map(|s| s.0).sum();
        let total: f64 = segments.iter().map(|s| s.3).sum();
        if !total.is_finite() {
            return Err(CoreError::Numerical(format!(
                "quadrature produced non-finite value on [{a}, {b}]"
            )));
        }
        if total_err <= atol {
            return Ok(total);
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(CoreError::Numerical(format!(
                "quadrature failed to reach tolerance {atol} (error {total_err}) on [{a}, {b}]"
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| {
                x.1 .0
                    .partial_cmp(&y.1 .0)
                    .unwrap_or(core::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i)
            .unwrap();
        let (_, lo, hi, _) = segments.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        segments.push((e1, lo, mid, v1));
        segments.push((e2, mid, hi, v2));
    }
}

/// Integrates `f` over the whole real line via y = tan θ to absolute
/// tolerance `atol`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, atol: f64) -> Result<f64> {
    let half_pi = core::f64::consts::FRAC_PI_2;
    integrate(
        |theta: f64| {
            let c = theta.cos();
            f(theta.tan()) / (c * c)
        },
        -half_pi,
        half_pi,
        atol,
    )
}
