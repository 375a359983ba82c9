//! Within-chain mixing diagnostics and between-chain clustering.
//!
//! Split-R̂ compares the two halves of a chain's draws:
//! with between- and within-half variances
//! B = S·Σ_m (x̄⁽ᵐ⁾ − x̄)² and W = (1/(S−2))·Σ_m Σ_s (x⁽ˢ⁾ − x̄⁽ᵐ⁾)²,
//! split-R̂ = √((S−2)/S + 2B/(S·W)). The same statistic generalized to the
//! four halves of two chains is the pairwise mixing measure used to group
//! chains into predictively distinct clusters.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// f64 transcendentals come from this trait in no_std builds; with std
// feature unification (tests) the inherent methods win and it sits idle
#[allow(unused_imports)]
use num_traits::Float;

use crate::draws::{ChainDraws, DrawSet};
use crate::{CoreError, Result};

/// Scalar series used to summarize a chain for mixing diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SummaryBy {
    /// Per-draw mean log predictive density, (1/n) Σ_i log_lik[s, i].
    #[default]
    MeanLogLik,
    /// A parameter column of the chain's draws.
    Param(usize),
}

impl SummaryBy {
    pub fn series(&self, chain: &ChainDraws) -> Result<Vec<f64>> {
        match self {
            SummaryBy::MeanLogLik => Ok(chain.mean_log_lik_series()),
            SummaryBy::Param(c) => chain.param_series(*c),
        }
    }
}

/// Per-chain diagnostics: split-R̂ and effective sample size of the chosen
/// scalar summary, plus the cluster label once clustering has run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub chain_id: String,
    pub split_rhat: f64,
    pub ess: f64,
    pub cluster_label: Option<usize>,
}

/// Assignment of M chains onto clusters 0..K-1, labels in order of first
/// appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    n_clusters: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let n_clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
        for k in 0..n_clusters {
            if !labels.contains(&k) {
                return Err(CoreError::Domain(format!(
                    "cluster labels must be a surjection onto 0..{n_clusters}, label {k} missing"
                )));
            }
        }
        Ok(ClusterAssignment { labels, n_clusters })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// Chain indices belonging to cluster `k`, in original order.
    pub fn members(&self, k: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == k)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Split-R̂ generalized to G groups (the two-half statistic at G = 2):
/// R̂² = (S−G)/S + (4/W)·mean_g (x̄_g − x̄)², with W the pooled within-group
/// variance on S−G degrees of freedom and x̄ the grand mean.
///
/// Reduces exactly to the two-half formula for one chain and is invariant
/// under duplicating the whole set of groups, so the two-chain version of a
/// chain against itself equals the chain's own split-R̂.
fn grouped_rhat(groups: &[&[f64]]) -> f64 {
    let g = groups.len();
    let s: usize = groups.iter().map(|h| h.len()).sum();
    let grand: f64 = groups.iter().flat_map(|h| h.iter()).sum::<f64>() / s as f64;
    let mut between = 0.0;
    let mut ssw = 0.0;
    for h in groups {
        let m = h.iter().sum::<f64>() / h.len() as f64;
        between += (m - grand) * (m - grand);
        ssw += h.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    }
    let tbar = between / g as f64;
    let w = ssw / (s - g) as f64;
    let base = (s - g) as f64 / s as f64;
    if w == 0.0 {
        // degenerate constant halves: disagreement means infinite R-hat
        return if tbar > 0.0 {
            f64::INFINITY
        } else {
            base.sqrt()
        };
    }
    (base + 4.0 * tbar / w).sqrt()
}

/// Split-R̂ of a single scalar series: √((S−2)/S + 2B/(S·W)).
///
/// Constant halves that agree report √((S−2)/S); constant halves that
/// disagree report +∞.
pub fn split_rhat(series: &[f64]) -> Result<f64> {
    let s = series.len();
    if s < 4 {
        return Err(CoreError::TooFewDraws { needed: 4, got: s });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite {
            context: String::from("split_rhat series"),
            row: i,
            col: 0,
        });
    }
    let mid = s / 2;
    Ok(grouped_rhat(&[&series[..mid], &series[mid..]]))
}

/// Two-chain mixing measure: split-R̂ over the four halves of the two
/// chains' summary series.
pub fn two_chain_rhat(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 4 || b.len() < 4 {
        return Err(CoreError::TooFewDraws {
            needed: 4,
            got: a.len().min(b.len()),
        });
    }
    for (i, v) in a.iter().chain(b.iter()).enumerate() {
        if !v.is_finite() {
            return Err(CoreError::NonFinite {
                context: String::from("two_chain_rhat series"),
                row: i,
                col: 0,
            });
        }
    }
    let (ma, mb) = (a.len() / 2, b.len() / 2);
    Ok(grouped_rhat(&[&a[..ma], &a[ma..], &b[..mb], &b[mb..]]))
}

/// Effective sample size of one series by Geyer's initial monotone positive
/// sequence over paired autocovariances, capped at S.
///
/// A constant series reports S: it carries no autocorrelation information.
pub fn chain_ess(series: &[f64]) -> Result<f64> {
    let s = series.len();
    if s < 8 {
        return Err(CoreError::TooFewDraws { needed: 8, got: s });
    }
    let mean = series.iter().sum::<f64>() / s as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let acov = |lag: usize| -> f64 {
        centered[..s - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / s as f64
    };
    let c0 = acov(0);
    if c0 == 0.0 {
        return Ok(s as f64);
    }
    // Geyer: sum paired autocovariances Γ_m = γ(2m) + γ(2m+1) while positive,
    // forcing the sequence nonincreasing.
    let mut gamma_sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0usize;
    while 2 * m + 1 < s {
        let g = acov(2 * m) + acov(2 * m + 1);
        if g <= 0.0 {
            break;
        }
        let g = g.min(prev);
        gamma_sum += g;
        prev = g;
        m += 1;
    }
    let tau = (2.0 * gamma_sum / c0 - 1.0).max(1.0 / s as f64);
    Ok((s as f64 / tau).min(s as f64))
}

/// Per-chain split-R̂ and ESS of the chosen summary series.
pub fn chain_diagnostics(ds: &DrawSet, summary: SummaryBy) -> Result<Vec<ChainDiagnostics>> {
    ds.chains()
        .iter()
        .map(|c| {
            let series = summary.series(c)?;
            Ok(ChainDiagnostics {
                chain_id: String::from(c.chain_id()),
                split_rhat: split_rhat(&series)?,
                ess: chain_ess(&series)?,
                cluster_label: None,
            })
        })
        .collect()
}

/// Symmetric M×M between-chain mixing matrix.
///
/// Entry (j, k) is the two-chain split-R̂ of the summary series, each chain
/// contributing its own halves; the diagonal holds each chain's own
/// split-R̂.
pub fn pairwise_mixing(ds: &DrawSet, summary: SummaryBy) -> Result<Vec<Vec<f64>>> {
    let m = ds.n_chains();
    let series: Vec<Vec<f64>> = ds
        .chains()
        .iter()
        .map(|c| summary.series(c))
        .collect::<Result<_>>()?;
    let mut mix = vec![vec![0.0; m]; m];
    for (j, row) in mix.iter_mut().enumerate() {
        row[j] = split_rhat(&series[j])?;
    }
    for j in 0..m {
        for k in j + 1..m {
            let r = two_chain_rhat(&series[j], &series[k])?;
            mix[j][k] = r;
            mix[k][j] = r;
        }
    }
    Ok(mix)
}

/// Single-linkage clustering: chains joined whenever their pairwise measure
/// is below `threshold`. Labels are assigned in order of first appearance.
pub fn cluster_chains(mix: &[Vec<f64>], threshold: f64) -> Result<ClusterAssignment> {
    let m = mix.len();
    for (j, row) in mix.iter().enumerate() {
        if row.len() != m {
            return Err(CoreError::dim("pairwise matrix row", m, row.len()));
        }
        for (k, v) in row.iter().enumerate() {
            if (*v - mix[k][j]).abs() > 1e-12 && !(v.is_infinite() && mix[k][j].is_infinite()) {
                return Err(CoreError::Domain(String::from(
                    "pairwise matrix must be symmetric",
                )));
            }
        }
    }
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (j, row) in mix.iter().enumerate() {
        for (k, &value) in row.iter().enumerate().skip(j + 1) {
            if value < threshold {
                let (rj, rk) = (find(&mut parent, j), find(&mut parent, k));
                if rj != rk {
                    parent[rk.max(rj)] = rk.min(rj);
                }
            }
        }
    }
    let mut next = 0usize;
    let mut label_of_root = vec![usize::MAX; m];
    let mut labels = vec![0usize; m];
    for (j, label) in labels.iter_mut().enumerate() {
        let r = find(&mut parent, j);
        if label_of_root[r] == usize::MAX {
            label_of_root[r] = next;
            next += 1;
        }
        *label = label_of_root[r];
    }
    ClusterAssignment::new(labels)
}

/// Merges each cluster's member chains into one chain by row concatenation,
/// preserving the total draw count.
pub fn merge_clusters(ds: &DrawSet, ca: &ClusterAssignment) -> Result<DrawSet> {
    if ca.labels().len() != ds.n_chains() {
        return Err(CoreError::dim(
            "cluster labels vs chains",
            ds.n_chains(),
            ca.labels().len(),
        ));
    }
    let mut merged = Vec::with_capacity(ca.n_clusters());
    for k in 0..ca.n_clusters() {
        let members = ca.members(k);
        let parts: Vec<&ChainDraws> = members.iter().map(|&j| ds.chain(j)).collect();
        let id = parts
            .iter()
            .map(|c| c.chain_id())
            .collect::<Vec<_>>()
            .join("+");
        merged.push(ChainDraws::concat(id, &parts)?);
    }
    DrawSet::assemble(merged)
}
