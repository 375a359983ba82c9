//! Stacking weights over chains: maximize the leave-one-out log score of
//! the weighted mixture on the simplex, regularized by a Dirichlet prior.
//!
//! The objective is
//!
//!   F(w) = Σ_i log Σ_k w_k · p_k(y_i|y_−i) + Σ_k (α_k − 1) · log w_k,
//!
//! with α_k = λ · S_eff,k / mean(S_eff). Equal effective sample sizes give
//! α_k = λ, so λ = 1 recovers unregularized stacking, any λ > 1 makes the
//! objective strictly concave with a unique interior maximizer, and
//! λ → ∞ pulls the weights to S_eff,k / Σ S_eff (the plain Monte Carlo
//! weighting). λ ≤ 1 is rejected at configuration time; the λ = 1 behavior
//! is recovered in the λ → 1⁺ limit.
//!
//! With strongly unequal S_eff some α_k can drop below 1, which makes the
//! prior attract those coordinates to the boundary rather than pool them;
//! this follows from the prior's definition and is reported, not corrected.
//! The maximizer stays interior whenever every α_k ≥ 1.
//!
//! The optimizer is deterministic mirror ascent (exponentiated gradient)
//! with backtracking line search from the uniform weight vector; iterates
//! stay strictly inside the simplex, where the λ > 1 objective is finite.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use ndarray::Array2;
// f64 transcendentals come from this trait in no_std builds; with std
// feature unification (tests) the inherent methods win and it sits idle
#[allow(unused_imports)]
use num_traits::Float;

use crate::psis::LooMatrix;
use crate::{CoreError, Result};

/// A weight vector on the K-simplex: entries in [0, 1] summing to 1 within
/// 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainWeights {
    w: Vec<f64>,
}

impl ChainWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(CoreError::Domain(String::from(
                "weight vector must be nonempty",
            )));
        }
        let sum: f64 = w.iter().sum();
        if w.iter().any(|&v| !(0.0..=1.0 + 1e-12).contains(&v)) || (sum - 1.0).abs() > 1e-12 {
            return Err(CoreError::Domain(format!(
                "weights must lie in [0,1] and sum to 1 within 1e-12 (sum = {sum})"
            )));
        }
        Ok(ChainWeights { w })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Tuning for the stacking optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct StackingConfig {
    lambda: f64,
    tol: f64,
    max_iter: u64,
    ess: Option<Vec<f64>>,
}

impl Default for StackingConfig {
    fn default() -> Self {
        StackingConfig {
            lambda: 1.001,
            tol: 1e-9,
            max_iter: 100_000,
            ess: None,
        }
    }
}

impl StackingConfig {
    /// λ > 1 required: the flat λ = 1 prior leaves duplicated-chain
    /// directions nonidentified.
    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda > 1.0) {
            return Err(CoreError::Domain(format!(
                "lambda must be > 1 (got {lambda}); the lambda -> 1 limit recovers flat-prior stacking"
            )));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(CoreError::Domain(format!(
                "tol must be positive, got {tol}"
            )));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn with_max_iter(mut self, max_iter: u64) -> Self {
        self.max_iter = max_iter;
        self
    }

    /// Effective sample sizes per chain from the diagnostics stage;
    /// defaults to all-equal when absent.
    pub fn with_ess(mut self, ess: Vec<f64>) -> Result<Self> {
        if ess.iter().any(|&e| !(e > 0.0)) {
            return Err(CoreError::Domain(String::from(
                "effective sample sizes must be positive",
            )));
        }
        self.ess = Some(ess);
        Ok(self)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_iter(&self) -> u64 {
        self.max_iter
    }

    pub fn ess(&self) -> Option<&[f64]> {
        self.ess.as_deref()
    }

    /// Dirichlet parameters α_k = λ · ess_k / mean(ess).
    pub fn alphas(&self, k: usize) -> Result<Vec<f64>> {
        match &self.ess {
            None => Ok(vec![self.lambda; k]),
            Some(e) => {
                if e.len() != k {
                    return Err(CoreError::dim("ess length vs chains", k, e.len()));
                }
                let mean = e.iter().sum::<f64>() / k as f64;
                Ok(e.iter().map(|&v| self.lambda * v / mean).collect())
            }
        }
    }
}

/// Stacked leave-one-out log predictive density by number of chains used.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorCurve {
    pub lpd_loo: Vec<f64>,
}

/// Result of the weight optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct StackingSolution {
    pub weights: ChainWeights,
    pub objective: f64,
    pub iterations: u64,
}

/// The stacking objective at `w`.
///
/// Returns −∞ when some w_k = 0 while α_k > 1 (the prior term diverges);
/// the optimizer never visits such points because its iterates stay
/// interior.
pub fn objective(w: &ChainWeights, loo: &LooMatrix, cfg: &StackingConfig) -> Result<f64> {
    if w.len() != loo.n_chains() {
        return Err(CoreError::dim(
            "weights vs loo columns",
            loo.n_chains(),
            w.len(),
        ));
    }
    let alphas = cfg.alphas(w.len())?;
    let log_w: Vec<f64> = w.as_slice().iter().map(|&v| v.ln()).collect();
    let row_weights = vec![1.0; loo.n_obs()];
    Ok(objective_parts(
        loo.log_loo(),
        &row_weights,
        &log_w,
        &alphas,
    ))
}

/// Likelihood part Σ_i ρ_i · logΣ_k exp(log_w_k + log_dens_ik) plus the
/// prior part Σ_k (α_k − 1)·log w_k, with the 0·log 0 convention at α = 1.
fn objective_parts(
    log_dens: &Array2<f64>,
    row_weights: &[f64],
    log_w: &[f64],
    alphas: &[f64],
) -> f64 {
    let mut total = 0.0;
    for (i, row) in log_dens.rows().into_iter().enumerate() {
        let mut m = f64::NEG_INFINITY;
        for (k, &ld) in row.iter().enumerate() {
            m = m.max(ld + log_w[k]);
        }
        if m == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let s: f64 = row
            .iter()
            .enumerate()
            .map(|(k, &ld)| (ld + log_w[k] - m).exp())
            .sum();
        total += row_weights[i] * (m + s.ln());
    }
    for (k, &a) in alphas.iter().enumerate() {
        if a != 1.0 {
            total += (a - 1.0) * log_w[k];
        }
    }
    total
}

/// Deterministic mirror-ascent maximizer of the weighted-row stacking
/// objective; shared by the LOO path and the analytic test bed.
pub(crate) fn maximize_on_simplex(
    log_dens: &Array2<f64>,
    row_weights: &[f64],
    alphas: &[f64],
    tol: f64,
    max_iter: u64,
) -> Result<StackingSolution> {
    let (n, k) = log_dens.dim();
    if row_weights.len() != n {
        return Err(CoreError::dim("row weights vs rows", n, row_weights.len()));
    }
    if k == 1 {
        return Ok(StackingSolution {
            weights: ChainWeights::new(vec![1.0])?,
            objective: objective_parts(log_dens, row_weights, &[0.0], alphas),
            iterations: 0,
        });
    }
    let mut w = vec![1.0 / k as f64; k];
    let eval = |w: &[f64]| -> (f64, Vec<f64>) {
        let log_w: Vec<f64> = w.iter().map(|&v| v.ln()).collect();
        let f = objective_parts(log_dens, row_weights, &log_w, alphas);
        // gradient: Σ_i ρ_i exp(log_dens_ik − lse_i) + (α_k − 1)/w_k
        let mut grad: Vec<f64> = alphas
            .iter()
            .zip(w)
            .map(|(&a, &wk)| (a - 1.0) / wk)
            .collect();
        for (i, row) in log_dens.rows().into_iter().enumerate() {
            let mut m = f64::NEG_INFINITY;
            for (kk, &ld) in row.iter().enumerate() {
                m = m.max(ld + log_w[kk]);
            }
            let s: f64 = row
                .iter()
                .enumerate()
                .map(|(kk, &ld)| (ld + log_w[kk] - m).exp())
                .sum();
            let lse = m + s.ln();
            for (kk, &ld) in row.iter().enumerate() {
                grad[kk] += row_weights[i] * (ld - lse).exp();
            }
        }
        (f, grad)
    };
    let (mut f, mut g) = eval(&w);
    let gmax = g.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
    let mut step = 1.0 / gmax;
    let mut iterations = 0u64;
    // With every α_k ≥ 1 the objective is concave, so the linearized gap
    // max_k g_k − w·g certifies how far the optimum can still be; otherwise
    // fall back to the per-iteration gain.
    let concave = alphas.iter().all(|&a| a >= 1.0);
    let duality_gap = |w: &[f64], g: &[f64]| -> f64 {
        let best = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let current: f64 = w.iter().zip(g).map(|(&wk, &gk)| wk * gk).sum();
        best - current
    };
    let mut stalls = 0u32;
    while iterations < max_iter {
        if concave && duality_gap(&w, &g) < tol {
            break;
        }
        iterations += 1;
        let gshift = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut improved = None;
        for _ in 0..60 {
            let mut cand: Vec<f64> = w
                .iter()
                .zip(&g)
                .map(|(&wk, &gk)| wk * (step * (gk - gshift)).max(-700.0).exp())
                .collect();
            let sum: f64 = cand.iter().sum();
            for v in &mut cand {
                *v = (*v / sum).max(1e-300);
            }
            let (fc, gc) = eval(&cand);
            if fc.is_finite() && fc >= f {
                improved = Some(fc - f);
                w = cand;
                f = fc;
                g = gc;
                step *= 1.3;
                break;
            }
            step *= 0.5;
        }
        // progress below the objective's float resolution counts as a stall
        let eps_obj = f.abs().max(1.0) * 1e-14;
        match improved {
            None => break, // stationary: no ascent direction at line-search resolution
            Some(gain) if !concave && gain < tol => break,
            Some(gain) if concave && gain <= eps_obj => {
                stalls += 1;
                if stalls >= 5 {
                    break;
                }
            }
            Some(_) => stalls = 0,
        }
    }
    if iterations >= max_iter {
        return Err(CoreError::Convergence {
            iterations,
            objective: f,
            best: w,
        });
    }
    // clean renormalization so the simplex invariant holds exactly
    let sum: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / sum).collect();
    Ok(StackingSolution {
        weights: ChainWeights::new(w)?,
        objective: f,
        iterations,
    })
}

/// Maximizes the stacking objective over the simplex.
///
/// Deterministic given inputs; returns the achieved objective and
/// iteration count along with the weights.
pub fn optimize_weights(loo: &LooMatrix, cfg: &StackingConfig) -> Result<StackingSolution> {
    let alphas = cfg.alphas(loo.n_chains())?;
    let row_weights = vec![1.0; loo.n_obs()];
    maximize_on_simplex(
        loo.log_loo(),
        &row_weights,
        &alphas,
        cfg.tol(),
        cfg.max_iter(),
    )
}

/// Uniform weights w_k = 1/K.
pub fn uniform_weights(k: usize) -> Result<ChainWeights> {
    if k == 0 {
        return Err(CoreError::Domain(String::from("K must be at least 1")));
    }
    ChainWeights::new(vec![1.0 / k as f64; k])
}

/// Pseudo-BMA weights w_k ∝ exp(Σ_i log p_k(y_i|y_−i)), computed with a
/// max shift.
pub fn pseudo_bma_weights(loo: &LooMatrix) -> Result<ChainWeights> {
    let sums: Vec<f64> = (0..loo.n_chains())
        .map(|k| loo.log_loo().column(k).sum())
        .collect();
    softmax(&sums)
}

/// Mode-height weights: softmax of user-supplied log posterior heights.
pub fn mode_height_weights(log_heights: &[f64]) -> Result<ChainWeights> {
    if log_heights.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Domain(String::from(
            "log heights must be finite",
        )));
    }
    softmax(log_heights)
}

fn softmax(v: &[f64]) -> Result<ChainWeights> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| (x - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let mut w: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    // nail the simplex invariant against rounding
    let resid: f64 = 1.0 - w.iter().sum::<f64>();
    w[0] += resid;
    ChainWeights::new(w)
}

/// The convergence-monitoring curve: for each prefix length K′ of `order`,
/// re-optimizes the weights on the first K′ chains and records the stacked
/// leave-one-out log predictive density
/// lpd_loo(K′) = Σ_i log Σ_k w_k^{K′} p_k(y_i|y_−i).
pub fn monitor_curve(
    loo: &LooMatrix,
    cfg: &StackingConfig,
    order: &[usize],
) -> Result<MonitorCurve> {
    let k = loo.n_chains();
    let mut seen = vec![false; k];
    if order.len() != k {
        return Err(CoreError::dim("order length vs chains", k, order.len()));
    }
    for &j in order {
        if j >= k || seen[j] {
            return Err(CoreError::Domain(String::from(
                "order must be a permutation of the chain indices",
            )));
        }
        seen[j] = true;
    }
    let n = loo.n_obs();
    let mut lpd = Vec::with_capacity(k);
    for kp in 1..=k {
        let mut log_sub = Array2::zeros((n, kp));
        let mut khat_sub = Array2::zeros((n, kp));
        for (col, &j) in order[..kp].iter().enumerate() {
            for i in 0..n {
                log_sub[[i, col]] = loo.log_loo()[[i, j]];
                khat_sub[[i, col]] = loo.khat()[[i, j]];
            }
        }
        let sub = LooMatrix::from_log(log_sub, khat_sub)?;
        let ess_sub = cfg
            .ess()
            .map(|e| order[..kp].iter().map(|&j| e[j]).collect::<Vec<f64>>());
        let mut sub_cfg = cfg.clone();
        if let Some(e) = ess_sub {
            sub_cfg = sub_cfg.with_ess(e)?;
        }
        let sol = optimize_weights(&sub, &sub_cfg)?;
        let log_w: Vec<f64> = sol.weights.as_slice().iter().map(|&v| v.ln()).collect();
        let ones = vec![1.0; n];
        let alphas_flat = vec![1.0; kp];
        lpd.push(objective_parts(sub.log_loo(), &ones, &log_w, &alphas_flat));
    }
    Ok(MonitorCurve { lpd_loo: lpd })
}

/// Effective sample size of the w-weighted draws:
/// Ŝ_eff = (Σ_k w_k² / S_eff,k)⁻¹.
pub fn stacked_ess(w: &ChainWeights, ess: &[f64]) -> Result<f64> {
    if w.len() != ess.len() {
        return Err(CoreError::dim("weights vs ess", ess.len(), w.len()));
    }
    if ess.iter().any(|&e| !(e > 0.0)) {
        return Err(CoreError::Domain(String::from(
            "effective sample sizes must be positive",
        )));
    }
    let denom: f64 = w
        .as_slice()
        .iter()
        .zip(ess)
        .map(|(&wk, &ek)| wk * wk / ek)
        .sum();
    Ok(1.0 / denom)
}
