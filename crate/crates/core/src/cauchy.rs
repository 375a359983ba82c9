//! Analytic Cauchy-mixture test bed.
//!
//! Data come from y ~ p₀·Cauchy(a, 1) + (1−p₀)·Cauchy(−a, 1) and are fit
//! with the misspecified single-component model y ~ Cauchy(μ, 1) under a
//! flat prior. As n → ∞ the normalized log posterior of μ approaches
//!
//!   h(μ) = −π·[ p₀·log((μ−a)² + 4) + (1−p₀)·log((μ+a)² + 4) ],
//!
//! whose stationary points are the roots of a cubic with closed-form
//! coefficients. For a > 2 the posterior is bimodal exactly when
//! p₀ < ξ(a), where ξ(a) is a root of a quartic in p₀; at p₀ = 1/2 the two
//! modes sit at ±√(a²−4). The exact posterior concentrates on a single
//! mode, while stacking the two mode-chains recovers a strictly better
//! predictive score — all of which is computable here in closed form or by
//! quadrature, giving the rest of the crate an end-to-end oracle.
//!
//! A deliberately mode-trapped random-walk Metropolis sampler and a dense
//! grid posterior complete the test bed.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use ndarray::Array2;
// f64 transcendentals come from this trait in no_std builds; with std
// feature unification (tests) the inherent methods win and it sits idle
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::draws::ChainDraws;
use crate::poly::{real_roots, real_roots_with_tol};
use crate::quad::integrate_real_line;
use crate::stacking::{maximize_on_simplex, ChainWeights};
use crate::{CoreError, Result};

const PI: f64 = core::f64::consts::PI;

/// Absolute tolerance used for all predictive-score quadratures.
pub const QUAD_ATOL: f64 = 1e-6;

/// Parameters of the two-component Cauchy data process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyScenario {
    a: f64,
    p0: f64,
    n: usize,
    seed: u64,
}

impl CauchyScenario {
    /// Mode separation half-distance a > 0, right-component probability
    /// p₀ ∈ [0.5, 1] (the p₀ < 0.5 case is the mirror image), sample size
    /// and seed.
    pub fn new(a: f64, p0: f64, n: usize, seed: u64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(CoreError::Domain(format!("a must be positive, got {a}")));
        }
        if !(0.5..=1.0).contains(&p0) {
            return Err(CoreError::Domain(format!(
                "p0 must lie in [0.5, 1], got {p0}"
            )));
        }
        Ok(CauchyScenario { a, p0, n, seed })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Local maxima of the limiting posterior density.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeReport {
    /// Mode locations, ascending (one or two entries).
    pub modes: Vec<f64>,
    pub bimodal: bool,
}

/// ChaCha8 stream derived from a scenario seed; stream 0 is data
/// generation, stream 1 + j is chain j.
fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn cauchy_draw(rng: &mut ChaCha8Rng, loc: f64) -> f64 {
    let u: f64 = rng.random();
    loc + (PI * (u - 0.5)).tan()
}

/// n iid draws y_i ~ Cauchy((2z_i − 1)a, 1), z_i ~ Bernoulli(p₀).
pub fn generate_data(sc: &CauchyScenario) -> Vec<f64> {
    let mut rng = rng_for(sc.seed, 0);
    (0..sc.n)
        .map(|_| {
            let z: f64 = rng.random();
            let loc = if z < sc.p0 { sc.a } else { -sc.a };
            cauchy_draw(&mut rng, loc)
        })
        .collect()
}

/// log Cauchy(y | loc, 1).
pub fn log_cauchy(y: f64, loc: f64) -> f64 {
    let d = y - loc;
    -PI.ln() - (d * d).ln_1p()
}

/// Density of the data process p₀·Cauchy(a,1) + (1−p₀)·Cauchy(−a,1).
pub fn true_density(y: f64, a: f64, p0: f64) -> f64 {
    let right = 1.0 / (PI * (1.0 + (y - a) * (y - a)));
    let left = 1.0 / (PI * (1.0 + (y + a) * (y + a)));
    p0 * right + (1.0 - p0) * left
}

/// The limiting scaled log posterior density
/// h(μ) = −π·[p₀·log((μ−a)²+4) + (1−p₀)·log((μ+a)²+4)],
/// the closed form of −∫ log(1+(y−μ)²)·π·p_true(y) dy.
pub fn h_limit(mu: f64, a: f64, p0: f64) -> f64 {
    -PI * (p0 * ((mu - a) * (mu - a) + 4.0).ln() + (1.0 - p0) * ((mu + a) * (mu + a) + 4.0).ln())
}

/// Closed-form derivative of [`h_limit`]:
/// dh/dμ = −2π·p₀·(μ−a)/((a−μ)²+4) − 2π·(1−p₀)·(a+μ)/((a+μ)²+4).
pub fn h_prime(mu: f64, a: f64, p0: f64) -> f64 {
    let right = (mu - a) / ((a - mu) * (a - mu) + 4.0);
    let left = (a + mu) / ((a + mu) * (a + mu) + 4.0);
    -2.0 * PI * (p0 * right + (1.0 - p0) * left)
}

/// Coefficients (descending) of the cubic g(μ) whose roots are the
/// stationary points of h: dh/dμ = 2π·g(μ) / D(μ) with D > 0.
fn stationary_cubic(a: f64, p0: f64) -> [f64; 4] {
    [
        -1.0,
        a - 2.0 * a * p0,
        a * a - 4.0,
        -4.0 * a - a * a * a + 8.0 * a * p0 + 2.0 * a * a * a * p0,
    ]
}

/// The bimodality boundary ξ(a) for a > 2: the posterior is bimodal in the
/// large-n limit exactly when p₀ < ξ(a). ξ is increasing from ξ(2) = 0.5
/// toward 1, and is the third-smallest real root of the quartic
/// u_a(x) = x⁴(a⁶+4a⁴) + x³(−2a⁶−8a⁴) + x²(a⁶−8a⁴−44a²) + x(12a⁴+44a²)
///          − 4a⁴ − 8a² − 4.
pub fn xi(a: f64) -> Result<f64> {
    if !(a > 2.0) {
        return Err(CoreError::Domain(format!(
            "xi(a) is defined for a > 2, got {a}"
        )));
    }
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let coeffs = [
        a6 + 4.0 * a4,
        -2.0 * a6 - 8.0 * a4,
        a6 - 8.0 * a4 - 44.0 * a2,
        12.0 * a4 + 44.0 * a2,
        -4.0 * a4 - 8.0 * a2 - 4.0,
    ];
    let roots = real_roots(&coeffs)?;
    if roots.len() >= 4 {
        return Ok(roots[2]);
    }
    // Near a = 2 the inner root pair coalesces at 0.5 below f64 resolution.
    if a - 2.0 <= 1e-6 {
        return Ok(0.5);
    }
    let wide = real_roots_with_tol(&coeffs, 1e-6)?;
    if wide.len() >= 4 {
        // the coalesced pair may polish a hair below 0.5; xi maps onto [0.5, 1)
        return Ok(wide[2].max(0.5));
    }
    Err(CoreError::Numerical(format!(
        "quartic for xi({a}) yielded {} real roots",
        roots.len()
    )))
}

/// Locations of the local maxima of the limiting posterior: the roots of
/// the stationary cubic at which h″ < 0, ascending.
pub fn limiting_modes(a: f64, p0: f64) -> Result<ModeReport> {
    if !(a > 0.0) || !(0.5..=1.0).contains(&p0) {
        return Err(CoreError::Domain(format!(
            "limiting_modes needs a > 0 and p0 in [0.5, 1], got a = {a}, p0 = {p0}"
        )));
    }
    let c = stationary_cubic(a, p0);
    let roots = real_roots(&c)?;
    // at a root of g the sign of h'' is the sign of g'
    let g_prime = |mu: f64| -3.0 * mu * mu + 2.0 * (a - 2.0 * a * p0) * mu + a * a - 4.0;
    let mut modes: Vec<f64> = roots.into_iter().filter(|&m| g_prime(m) < 0.0).collect();
    modes.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    modes.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    let bimodal = modes.len() == 2;
    if modes.is_empty() {
        return Err(CoreError::Numerical(format!(
            "no local maximum found for a = {a}, p0 = {p0}"
        )));
    }
    Ok(ModeReport { modes, bimodal })
}

/// KL divergence between Cauchy(μ₁, σ) and Cauchy(μ₂, σ):
/// log(1 + (μ₁−μ₂)²/(4σ²)).
pub fn kl_cauchy(mu1: f64, mu2: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(CoreError::Domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let d = mu1 - mu2;
    Ok((d * d / (4.0 * sigma * sigma)).ln_1p())
}

/// Large-n expected log predictive density of the exact posterior, which
/// concentrates at the dominant mode γ (the right mode at p₀ = 1/2 by the
/// tie convention; both give the same value by symmetry):
/// −(p₀·log(π(4+(γ−a)²)) + (1−p₀)·log(π(4+(γ+a)²))).
pub fn elpd_bayes_limit(a: f64, p0: f64) -> Result<f64> {
    let report = limiting_modes(a, p0)?;
    let gamma = *report
        .modes
        .last()
        .expect("limiting_modes returns at least one mode");
    let dm = gamma - a;
    let dp = gamma + a;
    Ok(-(p0 * (PI * (4.0 + dm * dm)).ln() + (1.0 - p0) * (PI * (4.0 + dp * dp)).ln()))
}

/// Expected log predictive density of a w-weighted Cauchy mixture at the
/// given locations, ∫ p_true(ỹ)·log Σ_k w_k·Cauchy(ỹ|loc_k, 1) dỹ, by
/// adaptive quadrature (absolute tolerance [`QUAD_ATOL`], tangent
/// substitution for the tails).
pub fn elpd_mixture(a: f64, p0: f64, w: &ChainWeights, locs: &[f64]) -> Result<f64> {
    if w.len() != locs.len() {
        return Err(CoreError::dim("weights vs locations", locs.len(), w.len()));
    }
    if locs.iter().any(|l| !l.is_finite()) {
        return Err(CoreError::Domain(String::from(
            "mixture locations must be finite",
        )));
    }
    let weights = w.as_slice().to_vec();
    let locs = locs.to_vec();
    integrate_real_line(
        move |y| {
            let mix: f64 = weights
                .iter()
                .zip(&locs)
                .map(|(&wk, &lk)| wk / (PI * (1.0 + (y - lk) * (y - lk))))
                .sum();
            if mix <= 0.0 {
                return f64::NEG_INFINITY;
            }
            true_density(y, a, p0) * mix.ln()
        },
        QUAD_ATOL,
    )
}

/// Expected log predictive density of the data process itself,
/// ∫ p_true·log p_true.
pub fn elpd_true(a: f64, p0: f64) -> Result<f64> {
    integrate_real_line(
        move |y| {
            let p = true_density(y, a, p0);
            p * p.ln()
        },
        QUAD_ATOL,
    )
}

/// Simplex weights maximizing [`elpd_mixture`] over mixtures at the given
/// locations, found by mirror ascent on a dense tangent-grid discretization
/// of the integral; returns the weights and the adaptively integrated elpd
/// at the optimum.
pub fn optimal_mixture_weights(a: f64, p0: f64, locs: &[f64]) -> Result<(ChainWeights, f64)> {
    if locs.is_empty() {
        return Err(CoreError::Domain(String::from(
            "need at least one mixture location",
        )));
    }
    let grid = 4001usize;
    let k = locs.len();
    let mut log_dens = Array2::zeros((grid, k));
    let mut row_w = Vec::with_capacity(grid);
    let step = PI / grid as f64;
    for j in 0..grid {
        let theta = -PI / 2.0 + (j as f64 + 0.5) * step;
        let y = theta.tan();
        let sec2 = 1.0 / (theta.cos() * theta.cos());
        row_w.push(true_density(y, a, p0) * sec2 * step);
        for (c, &loc) in locs.iter().enumerate() {
            log_dens[[j, c]] = log_cauchy(y, loc);
        }
    }
    let alphas = alloc::vec![1.0 + 1e-9; k];
    let sol = maximize_on_simplex(&log_dens, &row_w, &alphas, 1e-12, 200_000)?;
    let elpd = elpd_mixture(a, p0, &sol.weights, locs)?;
    Ok((sol.weights, elpd))
}

/// A Metropolis run: the draws as a chain plus the realized acceptance
/// rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisRun {
    pub chain: ChainDraws,
    pub acceptance_rate: f64,
}

/// Generic scalar random-walk Metropolis kernel with normal proposals.
fn metropolis_walk(
    log_target: impl Fn(f64) -> f64,
    init: f64,
    iters: usize,
    step: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64) {
    let mut mu = init;
    let mut lp = log_target(mu);
    let mut accepted = 0usize;
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let proposal = mu + step * standard_normal(rng);
        let lp_new = log_target(proposal);
        let log_u: f64 = rng.random::<f64>().ln();
        if log_u < lp_new - lp {
            mu = proposal;
            lp = lp_new;
            accepted += 1;
        }
        out.push(mu);
    }
    (out, accepted as f64 / iters.max(1) as f64)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u clamped away from zero
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
}

/// Unnormalized flat-prior log posterior log p(μ|y) = −Σ_i log(1+(y_i−μ)²).
pub fn log_posterior(data: &[f64], mu: f64) -> f64 {
    -data
        .iter()
        .map(|&y| {
            let d = y - mu;
            (d * d).ln_1p()
        })
        .sum::<f64>()
}

/// Random-walk Metropolis targeting the flat-prior posterior of μ, emitting
/// `s` draws of μ with the full pointwise log-likelihood matrix.
///
/// With the default step of 0.5 the walker stays trapped in the mode it
/// reaches first for separations a ≥ 5, reproducing the non-mixing regime
/// the stacking pipeline is built for. Warmup is the caller's concern:
/// [`simulate_chains`] discards it before building the matrix.
pub fn rw_metropolis(
    data: &[f64],
    init: f64,
    s: usize,
    step: f64,
    seed: u64,
    chain_id: impl Into<String>,
) -> Result<MetropolisRun> {
    rw_metropolis_with_warmup(data, init, s, 0, step, seed, chain_id)
}

/// Same as [`rw_metropolis`], running `warmup + s` iterations and keeping
/// the last `s`.
pub fn rw_metropolis_with_warmup(
    data: &[f64],
    init: f64,
    s: usize,
    warmup: usize,
    step: f64,
    seed: u64,
    chain_id: impl Into<String>,
) -> Result<MetropolisRun> {
    if s < 2 {
        return Err(CoreError::TooFewDraws { needed: 2, got: s });
    }
    if !(step > 0.0) {
        return Err(CoreError::Domain(format!(
            "step must be positive, got {step}"
        )));
    }
    let mut rng = rng_for(seed, 1);
    let (mus, acc) = metropolis_walk(
        |mu| log_posterior(data, mu),
        init,
        warmup + s,
        step,
        &mut rng,
    );
    let kept = &mus[warmup..];
    let n = data.len();
    let mut log_lik = Array2::zeros((s, n));
    for (row, &mu) in kept.iter().enumerate() {
        for (col, &y) in data.iter().enumerate() {
            log_lik[[row, col]] = log_cauchy(y, mu);
        }
    }
    let params =
        Array2::from_shape_vec((s, 1), kept.to_vec()).expect("kept draws fill an s x 1 matrix");
    Ok(MetropolisRun {
        chain: ChainDraws::new(chain_id, log_lik, Some(params))?,
        acceptance_rate: acc,
    })
}

/// Runs `m` parallel Metropolis chains from starting points spread evenly
/// over [−2a, 2a], each with its own derived ChaCha stream, discarding
/// `warmup` iterations per chain.
pub fn simulate_chains(
    sc: &CauchyScenario,
    data: &[f64],
    m: usize,
    iters: usize,
    warmup: usize,
    step: f64,
) -> Result<Vec<MetropolisRun>> {
    if m == 0 {
        return Err(CoreError::Domain(String::from("need at least one chain")));
    }
    let span = 4.0 * sc.a;
    (0..m)
        .map(|j| {
            let init = -2.0 * sc.a + (j as f64 + 0.5) * span / m as f64;
            let mut rng = rng_for(sc.seed, 1 + j as u64);
            let (mus, acc) = metropolis_walk(
                |mu| log_posterior(data, mu),
                init,
                warmup + iters,
                step,
                &mut rng,
            );
            let kept = &mus[warmup..];
            let n = data.len();
            let mut log_lik = Array2::zeros((iters, n));
            for (row, &mu) in kept.iter().enumerate() {
                for (col, &y) in data.iter().enumerate() {
                    log_lik[[row, col]] = log_cauchy(y, mu);
                }
            }
            let params = Array2::from_shape_vec((iters, 1), kept.to_vec())
                .expect("kept draws fill an iters x 1 matrix");
            Ok(MetropolisRun {
                chain: ChainDraws::new(format!("chain_{j:02}"), log_lik, Some(params))?,
                acceptance_rate: acc,
            })
        })
        .collect()
}

/// Normalized posterior masses over a sorted grid under the flat prior;
/// log-domain normalization with trapezoid cell weights.
pub fn grid_posterior(data: &[f64], mu_grid: &[f64]) -> Result<Vec<f64>> {
    if mu_grid.len() < 2 {
        return Err(CoreError::Domain(String::from(
            "grid needs at least two points",
        )));
    }
    if mu_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::Domain(String::from(
            "grid must be strictly ascending",
        )));
    }
    let g = mu_grid.len();
    let cell = |j: usize| -> f64 {
        // trapezoid weights: half-spacing to each neighbor
        let left = if j == 0 {
            0.0
        } else {
            mu_grid[j] - mu_grid[j - 1]
        };
        let right = if j == g - 1 {
            0.0
        } else {
            mu_grid[j + 1] - mu_grid[j]
        };
        0.5 * (left + right)
    };
    let log_mass: Vec<f64> = mu_grid
        .iter()
        .enumerate()
        .map(|(j, &mu)| log_posterior(data, mu) + cell(j).ln())
        .collect();
    let m = log_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(CoreError::Numerical(String::from(
            "posterior underflowed across the whole grid",
        )));
    }
    let sum: f64 = log_mass.iter().map(|l| (l - m).exp()).sum();
    if !sum.is_finite() || sum <= 0.0 {
        return Err(CoreError::Numerical(String::from(
            "grid posterior failed to normalize",
        )));
    }
    Ok(log_mass.iter().map(|l| (l - m).exp() / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scenario_validation() {
        assert!(CauchyScenario::new(0.0, 0.5, 10, 1).is_err());
        assert!(CauchyScenario::new(1.0, 0.4, 10, 1).is_err());
        assert!(CauchyScenario::new(1.0, 1.0, 10, 1).is_ok());
    }

    #[test]
    fn generate_data_empty_and_median() {
        let sc = CauchyScenario::new(10.0, 1.0, 0, 1).unwrap();
        assert!(generate_data(&sc).is_empty());

        // p0 = 1: all draws from Cauchy(a, 1); sample median near a
        let n = 4000usize;
        let sc = CauchyScenario::new(10.0, 1.0, n, 42).unwrap();
        let mut y = generate_data(&sc);
        y.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let median = y[n / 2];
        let se = (PI / 2.0) / (n as f64).sqrt();
        assert!(
            (median - 10.0).abs() < 3.0 * se,
            "median {median}, tol {}",
            3.0 * se
        );
    }

    #[test]
    fn generate_data_balanced_positive_fraction() {
        let sc = CauchyScenario::new(10.0, 0.5, 10_000, 7).unwrap();
        let y = generate_data(&sc);
        let frac = y.iter().filter(|&&v| v > 0.0).count() as f64 / y.len() as f64;
        assert!((0.47..=0.53).contains(&frac), "frac {frac}");
    }

    #[test]
    fn h_prime_zero_at_symmetric_points() {
        assert_abs_diff_eq!(h_prime(0.0, 3.0, 0.5), 0.0, epsilon = 1e-14);
        for a in [3.0, 5.0, 10.0] {
            let m = (a * a - 4.0).sqrt();
            assert_abs_diff_eq!(h_prime(m, a, 0.5), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(h_prime(-m, a, 0.5), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn h_limit_matches_defining_integral() {
        // adaptive quadrature of -∫ log(1+(y-μ)²)·[(1-p0)/((a+y)²+1) + p0/((y-a)²+1)] dy
        for (mu, a, p0) in [(0.7, 3.0, 0.6), (2.5, 10.0, 0.5), (-4.0, 5.0, 0.9)] {
            let quad = integrate_real_line(
                move |y| {
                    let dm = y - mu;
                    let mix =
                        (1.0 - p0) / ((a + y) * (a + y) + 1.0) + p0 / ((y - a) * (y - a) + 1.0);
                    -(dm * dm).ln_1p() * mix
                },
                1e-10,
            )
            .unwrap();
            assert_abs_diff_eq!(quad, h_limit(mu, a, p0), epsilon = 1e-8);
        }
    }

    #[test]
    fn xi_boundary_and_large_a() {
        let near = xi(2.0 + 1e-6).unwrap();
        assert!((0.499..=0.501).contains(&near), "xi(2+1e-6) = {near}");
        assert!(xi(1e6).unwrap() > 0.999);
        assert!(xi(2.0).is_err());
        assert!(xi(1.0).is_err());
    }

    #[test]
    fn xi_known_interior_values() {
        // independently computed from the quartic
        assert_abs_diff_eq!(xi(3.0).unwrap(), 0.564_290_551_094_872_7, epsilon = 1e-9);
        assert_abs_diff_eq!(xi(5.0).unwrap(), 0.684_265_421_370_820_6, epsilon = 1e-9);
        assert_abs_diff_eq!(xi(10.0).unwrap(), 0.820_777_351_964_473_6, epsilon = 1e-9);
    }

    #[test]
    fn limiting_modes_symmetric_case() {
        let report = limiting_modes(10.0, 0.5).unwrap();
        assert!(report.bimodal);
        let m = 96.0f64.sqrt();
        assert_abs_diff_eq!(report.modes[0], -m, epsilon = 1e-9);
        assert_abs_diff_eq!(report.modes[1], m, epsilon = 1e-9);
    }

    #[test]
    fn limiting_modes_small_a_unimodal_at_zero() {
        let report = limiting_modes(1.5, 0.5).unwrap();
        assert!(!report.bimodal);
        assert_eq!(report.modes.len(), 1);
        assert_abs_diff_eq!(report.modes[0], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn limiting_modes_dominant_p0_unimodal_near_a() {
        let report = limiting_modes(10.0, 0.99).unwrap();
        assert!(!report.bimodal);
        assert_eq!(report.modes.len(), 1);
        assert!(
            (report.modes[0] - 10.0).abs() < 0.2,
            "mode {}",
            report.modes[0]
        );
        // grid maximization of h agrees
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut mu = -20.0;
        while mu <= 20.0 {
            let v = h_limit(mu, 10.0, 0.99);
            if v > best.0 {
                best = (v, mu);
            }
            mu += 1e-3;
        }
        assert!((best.1 - report.modes[0]).abs() < 2e-3);
    }

    #[test]
    fn exactly_one_mode_at_p0_one() {
        // with p0 = 1 the stationary cubic has an exact root at μ = a
        let report = limiting_modes(7.0, 1.0).unwrap();
        assert_eq!(report.modes.len(), 1);
        assert_abs_diff_eq!(report.modes[0], 7.0, epsilon = 1e-10);
    }

    #[test]
    fn kl_cauchy_cases() {
        assert_abs_diff_eq!(kl_cauchy(3.0, 3.0, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            kl_cauchy(1.0, 4.0, 2.0).unwrap(),
            kl_cauchy(4.0, 1.0, 2.0).unwrap(),
            epsilon = 1e-15
        );
        let v = kl_cauchy(10.0, -10.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, 101.0f64.ln(), epsilon = 1e-12);
        assert!(kl_cauchy(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn kl_cauchy_matches_quadrature() {
        let closed = kl_cauchy(10.0, -10.0, 1.0).unwrap();
        let quad = integrate_real_line(
            |y| {
                let p = 1.0 / (PI * (1.0 + (y - 10.0) * (y - 10.0)));
                let q = 1.0 / (PI * (1.0 + (y + 10.0) * (y + 10.0)));
                p * (p / q).ln()
            },
            1e-8,
        )
        .unwrap();
        assert_abs_diff_eq!(closed, quad, epsilon = 1e-4);
    }

    #[test]
    fn elpd_bayes_limit_values() {
        // p0 = 1: the mode is exactly a, giving -log 4π for every a
        let v = elpd_bayes_limit(50.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, -(4.0 * PI).ln(), epsilon = 1e-10);

        // large-a approximation -0.5 log(1+a²) - log 4π at a = 20, p0 = 0.5
        let v = elpd_bayes_limit(20.0, 0.5).unwrap();
        let approx_v = -0.5 * (1.0 + 400.0f64).ln() - (4.0 * PI).ln();
        assert!(
            (v - approx_v).abs() < 0.02,
            "exact {v} vs approx {approx_v}"
        );
    }

    #[test]
    fn elpd_bayes_limit_matches_quadrature() {
        let a = 10.0;
        let p0 = 0.5;
        let gamma = 96.0f64.sqrt();
        let closed = elpd_bayes_limit(a, p0).unwrap();
        let w = ChainWeights::new(alloc::vec![1.0]).unwrap();
        let quad = elpd_mixture(a, p0, &w, &[gamma]).unwrap();
        assert_abs_diff_eq!(closed, quad, epsilon = 1e-4);
    }

    #[test]
    fn elpd_mixture_beats_single_mode() {
        let a = 10.0;
        let p0 = 0.5;
        let m = 96.0f64.sqrt();
        let w = ChainWeights::new(alloc::vec![0.5, 0.5]).unwrap();
        let stacked = elpd_mixture(a, p0, &w, &[-m, m]).unwrap();
        let bayes = elpd_bayes_limit(a, p0).unwrap();
        assert!(stacked > bayes);
        // and the optimum is close to the true process score
        let truth = elpd_true(a, p0).unwrap();
        assert!(truth - stacked < 0.05, "gap {}", truth - stacked);
    }

    #[test]
    fn optimal_mixture_weights_symmetric() {
        let m = 96.0f64.sqrt();
        let (w, elpd) = optimal_mixture_weights(10.0, 0.5, &[-m, m]).unwrap();
        assert_abs_diff_eq!(w.as_slice()[0], 0.5, epsilon = 1e-3);
        assert!(elpd > elpd_bayes_limit(10.0, 0.5).unwrap());
    }

    #[test]
    fn metropolis_flat_target_accepts_everything() {
        let run = rw_metropolis(&[], 0.0, 100, 0.5, 3, "flat").unwrap();
        assert_abs_diff_eq!(run.acceptance_rate, 1.0, epsilon = 1e-15);
        assert_eq!(run.chain.n_obs(), 0);
        assert_eq!(run.chain.n_draws(), 100);
    }

    #[test]
    fn metropolis_is_mode_trapped_at_default_step() {
        let sc = CauchyScenario::new(10.0, 0.5, 100, 11).unwrap();
        let data = generate_data(&sc);
        let run = rw_metropolis(&data, 10.0, 4000, 0.5, 11, "right").unwrap();
        let mus = run.chain.param_series(0).unwrap();
        assert!(mus.iter().all(|&m| m > 0.0), "sign flip observed");
        // grid-posterior oracle for the right-mode mean
        let grid: Vec<f64> = (0..4000)
            .map(|j| 0.5 + j as f64 * (19.5 / 3999.0))
            .collect();
        let mass = grid_posterior(&data, &grid).unwrap();
        let grid_mean: f64 = grid.iter().zip(&mass).map(|(m, q)| m * q).sum();
        let chain_mean: f64 = mus.iter().sum::<f64>() / mus.len() as f64;
        assert!(
            (chain_mean - grid_mean).abs() < 1.0,
            "chain {chain_mean} vs grid {grid_mean}"
        );
    }

    #[test]
    fn metropolis_three_plateau_target_frequencies() {
        // detailed-balance smoke test on a 3-level staircase density over
        // [0, 3): occupancy must match the target within 1% absolute
        let probs = [0.2, 0.5, 0.3];
        let log_target = |mu: f64| -> f64 {
            if !(0.0..3.0).contains(&mu) {
                return f64::NEG_INFINITY;
            }
            probs[mu as usize].ln()
        };
        let mut rng = rng_for(5, 0);
        let (mus, _) = metropolis_walk(log_target, 1.5, 1_000_000, 0.8, &mut rng);
        let mut counts = [0usize; 3];
        for m in &mus {
            counts[*m as usize] += 1;
        }
        for (j, &p) in probs.iter().enumerate() {
            let freq = counts[j] as f64 / mus.len() as f64;
            assert!((freq - p).abs() < 0.01, "bin {j}: {freq} vs {p}");
        }
    }

    #[test]
    fn grid_posterior_single_observation_symmetric() {
        // half-step offset keeps the grid symmetric with no node at zero
        let grid: Vec<f64> = (0..2000).map(|j| -9.995 + j as f64 * 0.01).collect();
        let mass = grid_posterior(&[0.0], &grid).unwrap();
        let total: f64 = mass.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let positive: f64 = grid
            .iter()
            .zip(&mass)
            .filter(|(&m, _)| m > 0.0)
            .map(|(_, &q)| q)
            .sum();
        assert_abs_diff_eq!(positive, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn grid_posterior_concentrates_on_one_side() {
        let sc = CauchyScenario::new(10.0, 0.5, 100, 31).unwrap();
        let data = generate_data(&sc);
        let grid: Vec<f64> = (0..8000)
            .map(|j| -20.0 + j as f64 * (40.0 / 7999.0))
            .collect();
        let mass = grid_posterior(&data, &grid).unwrap();
        let right: f64 = grid
            .iter()
            .zip(&mass)
            .filter(|(&m, _)| m > 0.0)
            .map(|(_, &q)| q)
            .sum();
        let lop = right.max(1.0 - right);
        assert!(lop > 0.99, "one-side mass {lop}");
    }
}
