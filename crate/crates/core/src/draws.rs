//! Data model for multi-chain posterior output.
//!
//! A [`ChainDraws`] holds one chain's pointwise log-likelihood matrix
//! (rows = draws, columns = observations) and, optionally, its parameter
//! draws. A [`DrawSet`] is an ordered, validated collection of chains over
//! the same observations. Everything is immutable after construction and
//! safe to share across threads.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use ndarray::{concatenate, s, Array2, Axis};

use crate::{CoreError, Result};

/// Which half of a chain to keep when splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    First,
    Second,
}

/// Draws from a single chain: log-likelihood values and optional parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    log_lik: Array2<f64>,
    params: Option<Array2<f64>>,
    chain_id: String,
}

impl ChainDraws {
    /// Builds a chain from its pointwise log-likelihood matrix
    /// (rows = draws, columns = observations).
    ///
    /// Requires at least 2 draws and all-finite entries; a parameter matrix,
    /// when given, must have the same number of rows.
    pub fn new(
        chain_id: impl Into<String>,
        log_lik: Array2<f64>,
        params: Option<Array2<f64>>,
    ) -> Result<Self> {
        let chain_id = chain_id.into();
        if log_lik.nrows() < 2 {
            return Err(CoreError::TooFewDraws {
                needed: 2,
                got: log_lik.nrows(),
            });
        }
        for ((r, c), v) in log_lik.indexed_iter() {
            if !v.is_finite() {
                return Err(CoreError::NonFinite {
                    context: format!("log_lik of chain {chain_id}"),
                    row: r,
                    col: c,
                });
            }
        }
        if let Some(p) = &params {
            if p.nrows() != log_lik.nrows() {
                return Err(CoreError::dim(
                    "params rows vs log_lik rows",
                    log_lik.nrows(),
                    p.nrows(),
                ));
            }
        }
        Ok(ChainDraws {
            log_lik,
            params,
            chain_id,
        })
    }

    /// Number of draws S_k.
    pub fn n_draws(&self) -> usize {
        self.log_lik.nrows()
    }

    /// Number of observations n.
    pub fn n_obs(&self) -> usize {
        self.log_lik.ncols()
    }

    pub fn chain_id(&self) -> &str {
        &self.chain_id
    }

    /// Log-likelihood matrix, rows = draws, columns = observations.
    pub fn log_lik(&self) -> &Array2<f64> {
        &self.log_lik
    }

    /// Parameter draws, if supplied.
    pub fn params(&self) -> Option<&Array2<f64>> {
        self.params.as_ref()
    }

    /// Per-draw mean log predictive density, (1/n) Σ_i log_lik[s, i].
    ///
    /// The default scalar summary for mixing diagnostics and clustering.
    pub fn mean_log_lik_series(&self) -> Vec<f64> {
        let n = self.n_obs().max(1) as f64;
        self.log_lik
            .rows()
            .into_iter()
            .map(|row| row.sum() / n)
            .collect()
    }

    /// Values of one parameter column across draws.
    pub fn param_series(&self, col: usize) -> Result<Vec<f64>> {
        let p = self.params.as_ref().ok_or_else(|| {
            CoreError::Domain(format!(
                "chain {} carries no parameter draws",
                self.chain_id
            ))
        })?;
        if col >= p.ncols() {
            return Err(CoreError::dim("parameter column", p.ncols(), col));
        }
        Ok(p.column(col).to_vec())
    }

    /// Keeps one half of the chain: the first ⌊S/2⌋ draws or the remainder.
    pub fn select_half(&self, which: Half) -> Result<ChainDraws> {
        let s = self.n_draws();
        if s < 2 {
            return Err(CoreError::TooFewDraws { needed: 2, got: s });
        }
        let mid = s / 2;
        let range = match which {
            Half::First => 0..mid,
            Half::Second => mid..s,
        };
        let log_lik = self.log_lik.slice(s![range.clone(), ..]).to_owned();
        let params = self
            .params
            .as_ref()
            .map(|p| p.slice(s![range.clone(), ..]).to_owned());
        ChainDraws::new(
            format!(
                "{}:{}",
                self.chain_id,
                match which {
                    Half::First => "first",
                    Half::Second => "second",
                }
            ),
            log_lik,
            params,
        )
    }

    /// Row-concatenates several chains into one.
    pub fn concat(chain_id: impl Into<String>, parts: &[&ChainDraws]) -> Result<ChainDraws> {
        let views: Vec<_> = parts.iter().map(|c| c.log_lik.view()).collect();
        let log_lik = concatenate(Axis(0), &views)
            .map_err(|_| CoreError::dim("concat log_lik columns", parts[0].n_obs(), 0))?;
        let params = if parts.iter().all(|c| c.params.is_some()) {
            let pviews: Vec<_> = parts
                .iter()
                .map(|c| c.params.as_ref().unwrap().view())
                .collect();
            Some(
                concatenate(Axis(0), &pviews)
                    .map_err(|_| CoreError::dim("concat params columns", 0, 0))?,
            )
        } else {
            None
        };
        ChainDraws::new(chain_id, log_lik, params)
    }
}

/// A validated, ordered collection of chains over the same observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawSet {
    chains: Vec<ChainDraws>,
    n_obs: usize,
}

impl DrawSet {
    /// Assembles chains into a draw set, checking that every chain reports
    /// the same number of observations. Chain order is preserved.
    pub fn assemble(chains: Vec<ChainDraws>) -> Result<Self> {
        let first = chains
            .first()
            .ok_or_else(|| CoreError::Domain(String::from("assemble needs at least one chain")))?;
        let n_obs = first.n_obs();
        for c in &chains {
            if c.n_obs() != n_obs {
                return Err(CoreError::dim(
                    &format!("n_obs of chain {}", c.chain_id()),
                    n_obs,
                    c.n_obs(),
                ));
            }
        }
        Ok(DrawSet { chains, n_obs })
    }

    /// Number of chains K.
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn chains(&self) -> &[ChainDraws] {
        &self.chains
    }

    pub fn chain(&self, k: usize) -> &ChainDraws {
        &self.chains[k]
    }

    /// Draw counts S_k per chain.
    pub fn draw_counts(&self) -> Vec<usize> {
        self.chains.iter().map(|c| c.n_draws()).collect()
    }
}

/// Evaluations h(θ_ks) of a scalar estimand over one chain's draws.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimandSeries {
    values: Vec<f64>,
}

impl EstimandSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(CoreError::NonFinite {
                    context: String::from("estimand series"),
                    row: i,
                    col: 0,
                });
            }
        }
        Ok(EstimandSeries { values })
    }

    /// Applies h to each parameter-draw row of a chain.
    pub fn from_params(chain: &ChainDraws, h: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let p = chain.params().ok_or_else(|| {
            CoreError::Domain(format!(
                "chain {} carries no parameter draws",
                chain.chain_id()
            ))
        })?;
        let values = p
            .rows()
            .into_iter()
            .map(|row| h(row.as_slice().expect("contiguous row")))
            .collect();
        EstimandSeries::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
