//! Pareto-smoothed importance sampling for leave-one-out predictive
//! densities.
//!
//! For chain k and observation i the raw leave-one-out importance ratio is
//! 1/p(y_i | θ_ks). The largest ratios of each column are replaced by the
//! expected order statistics of a generalized Pareto distribution fitted to
//! the tail, then right-truncated at the raw maximum. The smoothed ratios
//! r_iks give the approximation
//!
//!   p_k(y_i | y_−i) ≈ Σ_s p_k(y_i|θ_ks) · r_iks / Σ_s r_iks,
//!
//! and the fitted shape k̂ diagnoses its finite-sample reliability
//! (good ≤ 0.5, ok ≤ 0.7, bad ≤ 1, very bad > 1).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use ndarray::Array2;
// f64 transcendentals come from this trait in no_std builds; with std
// feature unification (tests) the inherent methods win and it sits idle
#[allow(unused_imports)]
use num_traits::Float;

use crate::draws::{ChainDraws, DrawSet};
use crate::{CoreError, Result};

/// Sentinel k̂ for columns where smoothing was skipped (degenerate or
/// too-short tail); the column passes through unsmoothed.
pub const KHAT_SKIPPED: f64 = f64::NEG_INFINITY;

/// Generalized Pareto fit over threshold excesses: shape `k`, scale
/// `sigma`, location `mu` (the threshold itself).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpdFit {
    pub k: f64,
    pub sigma: f64,
    pub mu: f64,
}

impl GpdFit {
    /// Inverse CDF of the excess distribution at probability `p`, offset by
    /// the threshold.
    pub fn quantile(&self, p: f64) -> f64 {
        if self.k.abs() < 1e-12 {
            self.mu - self.sigma * (-p).ln_1p()
        } else {
            self.mu + self.sigma / self.k * ((1.0 - p).powf(-self.k) - 1.0)
        }
    }
}

/// Smoothed ratios for one chain with per-observation k̂ diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedRatios {
    /// S_k × n matrix of smoothed, right-truncated ratios (each column
    /// rescaled so its raw maximum is 1).
    pub r: Array2<f64>,
    /// Fitted GPD shape per observation; `KHAT_SKIPPED` where smoothing
    /// did not apply.
    pub khat: Vec<f64>,
    /// Per-column stabilizing shift c_i: the raw ratio is
    /// exp(−log_lik[s,i] − c_i) with c_i = max_s(−log_lik[s,i]), so the
    /// shift cancels in the self-normalized ratio.
    pub shift: Vec<f64>,
}

/// Leave-one-out predictive densities p_k(y_i|y_−i) and k̂ diagnostics,
/// n × K.
#[derive(Debug, Clone, PartialEq)]
pub struct LooMatrix {
    log_loo: Array2<f64>,
    khat: Array2<f64>,
}

impl LooMatrix {
    /// Builds from log densities, checking every entry is finite (loo
    /// entries strictly positive and finite).
    pub fn from_log(log_loo: Array2<f64>, khat: Array2<f64>) -> Result<Self> {
        if log_loo.dim() != khat.dim() {
            return Err(CoreError::dim(
                "khat shape vs loo shape",
                log_loo.len(),
                khat.len(),
            ));
        }
        for ((i, k), v) in log_loo.indexed_iter() {
            if !v.is_finite() {
                return Err(CoreError::Numerical(format!(
                    "loo entry at observation {i}, chain {k} is not a positive finite density"
                )));
            }
        }
        Ok(LooMatrix { log_loo, khat })
    }

    pub fn n_obs(&self) -> usize {
        self.log_loo.nrows()
    }

    pub fn n_chains(&self) -> usize {
        self.log_loo.ncols()
    }

    /// log p_k(y_i|y_−i), the numerically safe representation.
    pub fn log_loo(&self) -> &Array2<f64> {
        &self.log_loo
    }

    /// p_k(y_i|y_−i).
    pub fn loo(&self, i: usize, k: usize) -> f64 {
        self.log_loo[[i, k]].exp()
    }

    pub fn khat(&self) -> &Array2<f64> {
        &self.khat
    }

    /// Keeps the first `k` chain columns.
    pub fn prefix(&self, k: usize) -> LooMatrix {
        LooMatrix {
            log_loo: self.log_loo.slice(ndarray::s![.., ..k]).to_owned(),
            khat: self.khat.slice(ndarray::s![.., ..k]).to_owned(),
        }
    }

    /// Counts of k̂ values in the four reliability bins
    /// (good ≤ 0.5, ok ≤ 0.7, bad ≤ 1, very bad > 1).
    pub fn khat_bins(&self) -> KhatSummary {
        let mut s = KhatSummary::default();
        for &k in self.khat.iter() {
            if k <= 0.5 {
                s.good += 1;
            } else if k <= 0.7 {
                s.ok += 1;
            } else if k <= 1.0 {
                s.bad += 1;
            } else {
                s.very_bad += 1;
            }
        }
        s
    }
}

/// Counts per k̂ reliability bin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KhatSummary {
    pub good: usize,
    pub ok: usize,
    pub bad: usize,
    pub very_bad: usize,
}

impl KhatSummary {
    pub fn total(&self) -> usize {
        self.good + self.ok + self.bad + self.very_bad
    }
}

/// Tail size for Pareto smoothing: min(⌈0.2·S⌉, ⌈3·√S⌉).
pub fn tail_count(s: usize) -> usize {
    let s_f = s as f64;
    let a = (0.2 * s_f).ceil();
    let b = (3.0 * s_f.sqrt()).ceil();
    a.min(b) as usize
}

/// Fits a generalized Pareto distribution to the `tail_count` largest
/// values of `x` by the Zhang–Stephens profile posterior-mean estimator
/// (deterministic, no sampling). The threshold μ is the next-largest value
/// below the tail.
///
/// Returns `None` when the tail is degenerate (all excesses equal or
/// non-positive), in which case smoothing is skipped.
pub fn fit_gpd_tail(x: &[f64], tail_count: usize) -> Result<Option<GpdFit>> {
    if tail_count < 5 {
        return Err(CoreError::Domain(String::from(
            "GPD tail fit needs at least 5 tail values",
        )));
    }
    if x.len() <= tail_count {
        return Err(CoreError::Domain(format!(
            "GPD tail fit needs more than tail_count = {tail_count} values, got {}",
            x.len()
        )));
    }
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let mu = sorted[sorted.len() - tail_count - 1];
    let excess: Vec<f64> = sorted[sorted.len() - tail_count..]
        .iter()
        .map(|v| v - mu)
        .collect();
    Ok(zhang_stephens(&excess).map(|(k, sigma)| GpdFit { k, sigma, mu }))
}

/// Zhang–Stephens (2009) estimate of (k, σ) for excesses over a threshold,
/// with the weakly-informative shrinkage of k̂ toward 0.5 used by the PSIS
/// reference implementation. Input must be sorted ascending or is sorted
/// here; returns `None` for degenerate tails.
fn zhang_stephens(excess: &[f64]) -> Option<(f64, f64)> {
    let mut x: Vec<f64> = excess.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let n = x.len();
    let x_max = x[n - 1];
    let quart = x[(n as f64 / 4.0 + 0.5) as usize - 1];
    if !(x_max > 0.0) || !(quart > 0.0) || x[0] == x_max {
        return None;
    }
    let m = 30 + (n as f64).sqrt() as usize;
    let mut theta = Vec::with_capacity(m);
    let mut log_lik = Vec::with_capacity(m);
    for j in 1..=m {
        let t = 1.0 / x_max + (1.0 - (m as f64 / (j as f64 - 0.5)).sqrt()) / (3.0 * quart);
        let k: f64 = x.iter().map(|&v| (-t * v).ln_1p()).sum::<f64>() / n as f64;
        // profile log-likelihood l(θ) = n·(log(−θ/k) − k − 1)
        let l = n as f64 * ((-t / k).ln() - k - 1.0);
        theta.push(t);
        log_lik.push(l);
    }
    let l_max = log_lik.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_lik.iter().map(|l| (l - l_max).exp()).collect();
    let wsum: f64 = weights.iter().sum();
    let theta_hat: f64 = theta.iter().zip(&weights).map(|(t, w)| t * w).sum::<f64>() / wsum;
    let k_hat: f64 = x.iter().map(|&v| (-theta_hat * v).ln_1p()).sum::<f64>() / n as f64;
    if !k_hat.is_finite() || theta_hat == 0.0 {
        return None;
    }
    let sigma = -k_hat / theta_hat;
    let k_reg = (k_hat * n as f64 + 5.0) / (n as f64 + 10.0);
    Some((k_reg, sigma))
}

/// Raw leave-one-out importance ratios for one chain: entry (s, i) is
/// exp(−log_lik[s,i] − c_i) with the stabilizing shift
/// c_i = max_s(−log_lik[s,i]), so every column has maximum 1. The shift is
/// returned alongside and cancels in the self-normalized LOO estimate.
pub fn raw_ratios(chain: &ChainDraws) -> (Array2<f64>, Vec<f64>) {
    let ll = chain.log_lik();
    let (s, n) = ll.dim();
    let mut shift = Vec::with_capacity(n);
    for i in 0..n {
        let c = ll
            .column(i)
            .iter()
            .fold(f64::NEG_INFINITY, |a, &v| a.max(-v));
        shift.push(c);
    }
    let mut r = Array2::zeros((s, n));
    for ((row, col), v) in r.indexed_iter_mut() {
        *v = (-ll[[row, col]] - shift[col]).exp();
    }
    (r, shift)
}

/// Pareto-smooths one column of raw ratios.
///
/// The M = min(⌈0.2·S⌉, ⌈3·√S⌉) largest values are replaced by GPD
/// inverse-CDF values at plotting positions (z − 0.5)/M placed back at
/// their original indices in ascending order, then everything is truncated
/// above at the raw maximum. Degenerate or short tails pass through
/// unsmoothed with k̂ = −∞.
pub fn smooth_column(raw: &[f64]) -> Result<(Vec<f64>, f64)> {
    let s = raw.len();
    if s == 0 || raw.iter().all(|&v| v == 0.0) {
        return Err(CoreError::Domain(String::from(
            "ratio column must be nonempty and not identically zero",
        )));
    }
    if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(CoreError::Numerical(String::from(
            "ratio column must be finite and nonnegative",
        )));
    }
    let m = tail_count(s);
    if m < 5 || m >= s {
        return Ok((raw.to_vec(), KHAT_SKIPPED));
    }
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| {
        raw[a]
            .partial_cmp(&raw[b])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let tail_idx = &order[s - m..]; // ascending by raw value
    let mu = raw[order[s - m - 1]];
    let excess: Vec<f64> = tail_idx.iter().map(|&j| raw[j] - mu).collect();
    if excess[0] == excess[m - 1] {
        return Ok((raw.to_vec(), KHAT_SKIPPED));
    }
    let fit = match zhang_stephens(&excess) {
        None => return Ok((raw.to_vec(), KHAT_SKIPPED)),
        Some((k, sigma)) => GpdFit { k, sigma, mu },
    };
    let max_raw = raw[order[s - 1]];
    let mut out = raw.to_vec();
    for (z, &j) in tail_idx.iter().enumerate() {
        let p = (z as f64 + 0.5) / m as f64;
        out[j] = fit.quantile(p).min(max_raw);
    }
    Ok((out, fit.k))
}

/// Smoothed ratios and k̂ diagnostics for one chain.
pub fn smoothed_ratios(chain: &ChainDraws) -> Result<SmoothedRatios> {
    let (raw, shift) = raw_ratios(chain);
    let (s, n) = raw.dim();
    let mut r = Array2::zeros((s, n));
    let mut khat = Vec::with_capacity(n);
    for i in 0..n {
        let col: Vec<f64> = raw.column(i).to_vec();
        let (sm, k) = smooth_column(&col)?;
        for (row, v) in sm.iter().enumerate() {
            r[[row, i]] = *v;
        }
        khat.push(k);
    }
    Ok(SmoothedRatios { r, khat, shift })
}

/// Leave-one-out density of one observation from log-likelihood column and
/// smoothed log-ratios: logsumexp(ll + log r) − logsumexp(log r).
fn log_loo_entry(ll: &[f64], log_r: &[f64]) -> f64 {
    logsumexp_pair(ll, log_r) - logsumexp(log_r)
}

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn logsumexp_pair(a: &[f64], b: &[f64]) -> f64 {
    let m = a
        .iter()
        .zip(b)
        .map(|(x, y)| x + y)
        .fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + a
        .iter()
        .zip(b)
        .map(|(x, y)| (x + y - m).exp())
        .sum::<f64>()
        .ln()
}

/// The n × K matrix of PSIS-approximated leave-one-out predictive
/// densities with k̂ diagnostics, one column per chain (cluster).
pub fn loo_matrix(ds: &DrawSet) -> Result<LooMatrix> {
    let n = ds.n_obs();
    let k_chains = ds.n_chains();
    let mut log_loo = Array2::zeros((n, k_chains));
    let mut khat = Array2::zeros((n, k_chains));
    for (k, chain) in ds.chains().iter().enumerate() {
        let sm = smoothed_ratios(chain)?;
        let ll = chain.log_lik();
        for i in 0..n {
            let ll_col: Vec<f64> = ll.column(i).to_vec();
            let log_r: Vec<f64> = sm.r.column(i).iter().map(|v| v.ln()).collect();
            let v = log_loo_entry(&ll_col, &log_r);
            if !v.is_finite() {
                return Err(CoreError::Numerical(format!(
                    "loo entry at observation {i}, chain {k} is not finite"
                )));
            }
            log_loo[[i, k]] = v;
            khat[[i, k]] = sm.khat[i];
        }
    }
    LooMatrix::from_log(log_loo, khat)
}
