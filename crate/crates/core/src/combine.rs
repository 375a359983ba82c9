//! Consuming chain weights: weighted Monte Carlo estimation and
//! quasi-Monte-Carlo thinning back to an unweighted draw set.
//!
//! With weights w over K clusters, any posterior integral is estimated by
//! E(h|w) ≈ Σ_k Σ_s w_k · S_k⁻¹ · h(θ_ks). Thinning to S_thin draws first
//! takes ⌊S_thin·w_k⌋ draws per cluster without replacement, then allocates
//! the remaining draws by a single-offset systematic pass over the residual
//! probabilities w_k − ⌊S_thin·w_k⌋/S_thin, again without replacement
//! within clusters. Index selection is driven by a seeded counter-based
//! generator (ChaCha8, one documented stream per cluster), so plans are
//! bit-reproducible across platforms.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::draws::{ChainDraws, DrawSet, EstimandSeries};
use crate::stacking::ChainWeights;
use crate::{CoreError, Result};

/// A clustered draw set with simplex weights; each draw of cluster k
/// carries weight w_k / S_k, and the per-draw weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDrawSet {
    ds: DrawSet,
    w: ChainWeights,
}

impl WeightedDrawSet {
    pub fn new(ds: DrawSet, w: ChainWeights) -> Result<Self> {
        if w.len() != ds.n_chains() {
            return Err(CoreError::dim(
                "weights vs clusters",
                ds.n_chains(),
                w.len(),
            ));
        }
        Ok(WeightedDrawSet { ds, w })
    }

    pub fn draws(&self) -> &DrawSet {
        &self.ds
    }

    pub fn weights(&self) -> &ChainWeights {
        &self.w
    }

    /// Weight carried by each draw of cluster `k`.
    pub fn per_draw_weight(&self, k: usize) -> f64 {
        self.w.as_slice()[k] / self.ds.chain(k).n_draws() as f64
    }
}

/// Which rows to keep per cluster when thinning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResamplePlan {
    counts: Vec<usize>,
    indices: Vec<Vec<usize>>,
}

impl ResamplePlan {
    /// Draws taken per cluster; sums to S_thin.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Selected row indices per cluster, distinct within a cluster.
    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn s_thin(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Weighted Monte Carlo estimate Σ_k Σ_s w_k · S_k⁻¹ · h(θ_ks).
pub fn weighted_expectation(wds: &WeightedDrawSet, h: &[EstimandSeries]) -> Result<f64> {
    let k_clusters = wds.draws().n_chains();
    if h.len() != k_clusters {
        return Err(CoreError::dim(
            "estimand series vs clusters",
            k_clusters,
            h.len(),
        ));
    }
    let mut total = 0.0;
    for (k, h_k) in h.iter().enumerate() {
        let s_k = wds.draws().chain(k).n_draws();
        if h_k.len() != s_k {
            return Err(CoreError::dim("estimand length vs draws", s_k, h_k.len()));
        }
        total += wds.per_draw_weight(k) * h_k.values().iter().sum::<f64>();
    }
    Ok(total)
}

/// Plans a thinning of the weighted draw set down to `s_thin` draws.
///
/// Requires s_thin ≤ min over clusters with w_k > 0 of S_k / w_k; the
/// violated cluster is named otherwise. Deterministic given the seed.
pub fn thin_resample(wds: &WeightedDrawSet, s_thin: usize, rng_seed: u64) -> Result<ResamplePlan> {
    let w = wds.weights().as_slice();
    let k_clusters = w.len();
    // the bound ignores zero-weight clusters, which contribute no draws
    for (k, &wk) in w.iter().enumerate() {
        if wk > 0.0 {
            let bound = wds.draws().chain(k).n_draws() as f64 / wk;
            if s_thin as f64 > bound {
                return Err(CoreError::BoundViolation {
                    s_thin,
                    bound,
                    cluster: k,
                });
            }
        }
    }
    // fixed allocation ⌊S_thin · w_k⌋, then one systematic residual pass
    let mut counts: Vec<usize> = w.iter().map(|&wk| (s_thin as f64 * wk) as usize).collect();
    let fixed: usize = counts.iter().sum();
    let residual_draws = s_thin - fixed;
    if residual_draws > 0 {
        let residual: Vec<f64> = w
            .iter()
            .enumerate()
            .map(|(k, &wk)| wk - counts[k] as f64 / s_thin as f64)
            .collect();
        let res_sum: f64 = residual.iter().sum();
        let mut rng = rng_for(rng_seed, u64::MAX); // allocation stream
        let offset: f64 = rng.random::<f64>();
        // arrows at (offset + j)/R over the normalized residual cumsum; each
        // cluster segment is shorter than 1/R, so no cluster receives two
        let mut cum = 0.0;
        let mut arrow = 0usize;
        for (k, &r) in residual.iter().enumerate() {
            cum += r / res_sum;
            while arrow < residual_draws && (offset + arrow as f64) / residual_draws as f64 <= cum {
                counts[k] += 1;
                arrow += 1;
            }
        }
        // float-edge safety: any unassigned arrows go to the last positive-residual cluster
        while arrow < residual_draws {
            let last = residual
                .iter()
                .rposition(|&r| r > 0.0)
                .unwrap_or(k_clusters - 1);
            counts[last] += 1;
            arrow += 1;
        }
    }
    // within-cluster selection without replacement, one stream per cluster
    let mut indices = Vec::with_capacity(k_clusters);
    for (k, &c) in counts.iter().enumerate() {
        let s_k = wds.draws().chain(k).n_draws();
        if c > s_k {
            return Err(CoreError::BoundViolation {
                s_thin,
                bound: s_k as f64,
                cluster: k,
            });
        }
        let mut rng = rng_for(rng_seed, k as u64);
        indices.push(sample_without_replacement(&mut rng, s_k, c));
    }
    Ok(ResamplePlan { counts, indices })
}

/// ChaCha8 stream derived from the run seed; each cluster gets its own
/// stream so per-cluster selections are independent and reproducible.
fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Partial Fisher–Yates: `take` distinct indices from 0..n, in selection
/// order.
fn sample_without_replacement(rng: &mut ChaCha8Rng, n: usize, take: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(take);
    for i in 0..take {
        let j = i + (rng.random::<u64>() % (n - i) as u64) as usize;
        pool.swap(i, j);
        out.push(pool[i]);
    }
    out
}

/// Materializes a plan into a single unweighted chain of S_thin rows,
/// concatenating the selected rows cluster by cluster; parameter draws are
/// carried along when every selected cluster has them.
pub fn materialize(wds: &WeightedDrawSet, plan: &ResamplePlan) -> Result<ChainDraws> {
    let ds = wds.draws();
    if plan.counts.len() != ds.n_chains() {
        return Err(CoreError::dim(
            "plan clusters vs draw set",
            ds.n_chains(),
            plan.counts.len(),
        ));
    }
    let n = ds.n_obs();
    let total: usize = plan.counts.iter().sum();
    if total < 2 {
        return Err(CoreError::TooFewDraws {
            needed: 2,
            got: total,
        });
    }
    let carry_params = ds.chains().iter().all(|c| c.params().is_some());
    let p_cols = if carry_params {
        ds.chain(0).params().map(|p| p.ncols()).unwrap_or(0)
    } else {
        0
    };
    let mut log_lik = ndarray::Array2::zeros((total, n));
    let mut params = ndarray::Array2::zeros((total, p_cols));
    let mut row_out = 0usize;
    for (k, idx) in plan.indices.iter().enumerate() {
        if idx.len() != plan.counts[k] {
            return Err(CoreError::dim(
                "plan indices vs counts",
                plan.counts[k],
                idx.len(),
            ));
        }
        let chain = ds.chain(k);
        for &r in idx {
            if r >= chain.n_draws() {
                return Err(CoreError::Domain(String::from(
                    "plan index outside cluster draws",
                )));
            }
            for c in 0..n {
                log_lik[[row_out, c]] = chain.log_lik()[[r, c]];
            }
            if carry_params {
                let p = chain.params().unwrap();
                for c in 0..p_cols {
                    params[[row_out, c]] = p[[r, c]];
                }
            }
            row_out += 1;
        }
    }
    ChainDraws::new(
        "stacked-thinned",
        log_lik,
        if carry_params { Some(params) } else { None },
    )
}
