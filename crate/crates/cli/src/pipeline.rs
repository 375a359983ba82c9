//! Orchestration of the full pipeline: ingest → diagnose → cluster →
//! PSIS → stack → resample, with serializable stage outputs.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use chainstack_core::cauchy;
use chainstack_core::combine::{materialize, thin_resample, WeightedDrawSet};
use chainstack_core::diagnostics::{
    chain_diagnostics, cluster_chains, merge_clusters, pairwise_mixing, ClusterAssignment,
    SummaryBy,
};
use chainstack_core::draws::{ChainDraws, DrawSet};
use chainstack_core::psis::{loo_matrix, LooMatrix};
use chainstack_core::stacking::{
    monitor_curve, optimize_weights, pseudo_bma_weights, stacked_ess, uniform_weights,
    ChainWeights, StackingConfig,
};

use crate::error::{CliError, CliResult};
use crate::io::{self, LoadOptions, Manifest, ManifestChain};
use crate::jsonfmt::to_json_string;

pub const SCHEMA: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// JSON-safe float: non-finite values become null.
fn js(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Configuration echo embedded in every output for reproducibility.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub inputs: Vec<String>,
    pub n_obs: usize,
    pub n_chains: usize,
    pub flags: FlagEcho,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlagEcho {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: u64,
    pub threshold: f64,
    pub no_cluster: bool,
    pub skip_rows: usize,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_thin: Option<usize>,
}

/// Everything the ingest + diagnose + cluster + PSIS stages produce.
pub struct PipelineState {
    pub manifest: RunManifest,
    pub draws: DrawSet,
    pub per_chain: Vec<PerChain>,
    pub pairwise: Vec<Vec<Option<f64>>>,
    pub clusters: ClusterAssignment,
    pub merged: DrawSet,
    pub cluster_ess: Vec<f64>,
    pub loo: LooMatrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerChain {
    pub chain_id: String,
    pub split_rhat: Option<f64>,
    pub ess: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct KhatSummaryOut {
    pub bins: Vec<KhatBin>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KhatBin {
    pub range: String,
    pub label: String,
    pub count: usize,
    pub proportion: f64,
}

pub fn khat_summary_out(loo: &LooMatrix) -> KhatSummaryOut {
    let bins = loo.khat_bins();
    let total = bins.total().max(1);
    let mk = |range: &str, label: &str, count: usize| KhatBin {
        range: range.to_string(),
        label: label.to_string(),
        count,
        proportion: count as f64 / total as f64,
    };
    KhatSummaryOut {
        bins: vec![
            mk("(-Inf, 0.5]", "good", bins.good),
            mk("(0.5, 0.7]", "ok", bins.ok),
            mk("(0.7, 1]", "bad", bins.bad),
            mk("(1, Inf)", "very bad", bins.very_bad),
        ],
    }
}

/// Options shared by the pipeline-driving subcommands.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub skip_rows: usize,
    pub summary: SummaryBy,
    pub threshold: f64,
    pub no_cluster: bool,
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: u64,
    pub method: String,
    pub seed: Option<u64>,
    pub s_thin: Option<usize>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            skip_rows: 0,
            summary: SummaryBy::MeanLogLik,
            threshold: 1.05,
            no_cluster: false,
            lambda: 1.001,
            tol: 1e-9,
            max_iter: 100_000,
            method: "stacking".to_string(),
            seed: None,
            s_thin: None,
        }
    }
}

impl PipelineOptions {
    pub fn stacking_config(&self, ess: Option<Vec<f64>>) -> CliResult<StackingConfig> {
        let mut cfg = StackingConfig::default()
            .with_lambda(self.lambda)
            .map_err(CliError::Core)?
            .with_tol(self.tol)
            .map_err(CliError::Core)?
            .with_max_iter(self.max_iter);
        if let Some(e) = ess {
            cfg = cfg.with_ess(e).map_err(CliError::Core)?;
        }
        Ok(cfg)
    }
}

/// Ingests a directory of chains and runs diagnostics, clustering (unless
/// disabled), merging, and PSIS.
pub fn run_pipeline(dir: &Path, opts: &PipelineOptions) -> CliResult<PipelineState> {
    let load = LoadOptions {
        skip_rows: opts.skip_rows,
    };
    let (draws, entries) = io::load_draw_set(dir, load)?;
    let inputs = entries.iter().map(|e| e.log_lik.clone()).collect();
    pipeline_from_draws(draws, inputs, opts)
}

/// The diagnose → cluster → PSIS stages over an already-assembled draw
/// set; the disk-loading subcommands and the in-memory test bed share this
/// path.
pub fn pipeline_from_draws(
    draws: DrawSet,
    inputs: Vec<String>,
    opts: &PipelineOptions,
) -> CliResult<PipelineState> {
    let diag = chain_diagnostics(&draws, opts.summary).map_err(CliError::Core)?;
    let pairwise = pairwise_mixing(&draws, opts.summary).map_err(CliError::Core)?;

    let clusters = if opts.no_cluster {
        ClusterAssignment::new((0..draws.n_chains()).collect()).map_err(CliError::Core)?
    } else {
        cluster_chains(&pairwise, opts.threshold).map_err(CliError::Core)?
    };
    let merged = merge_clusters(&draws, &clusters).map_err(CliError::Core)?;

    // S_eff of a merged cluster: sum over its member chains (independent runs)
    let cluster_ess: Vec<f64> = (0..clusters.n_clusters())
        .map(|k| clusters.members(k).iter().map(|&j| diag[j].ess).sum())
        .collect();

    // per-cluster LOO columns are independent; compute them in parallel
    let columns: Vec<(Vec<f64>, Vec<f64>)> = merged
        .chains()
        .par_iter()
        .map(|chain| {
            let single = DrawSet::assemble(vec![chain.clone()]).map_err(CliError::Core)?;
            let m = loo_matrix(&single).map_err(CliError::Core)?;
            let log_loo: Vec<f64> = (0..m.n_obs()).map(|i| m.log_loo()[[i, 0]]).collect();
            let khat: Vec<f64> = (0..m.n_obs()).map(|i| m.khat()[[i, 0]]).collect();
            Ok((log_loo, khat))
        })
        .collect::<CliResult<_>>()?;
    let n = merged.n_obs();
    let kk = merged.n_chains();
    let mut log_loo = chainstack_core::ndarray::Array2::zeros((n, kk));
    let mut khat = chainstack_core::ndarray::Array2::zeros((n, kk));
    for (k, (col, kh)) in columns.iter().enumerate() {
        for i in 0..n {
            log_loo[[i, k]] = col[i];
            khat[[i, k]] = kh[i];
        }
    }
    let loo = LooMatrix::from_log(log_loo, khat).map_err(CliError::Core)?;

    let per_chain: Vec<PerChain> = diag
        .iter()
        .enumerate()
        .map(|(j, d)| PerChain {
            chain_id: d.chain_id.clone(),
            split_rhat: js(d.split_rhat),
            ess: d.ess,
            cluster: clusters.labels()[j],
        })
        .collect();

    let manifest = RunManifest {
        tool: "chainstack".to_string(),
        version: TOOL_VERSION.to_string(),
        inputs,
        n_obs: draws.n_obs(),
        n_chains: draws.n_chains(),
        flags: FlagEcho {
            lambda: opts.lambda,
            tol: opts.tol,
            max_iter: opts.max_iter,
            threshold: opts.threshold,
            no_cluster: opts.no_cluster,
            skip_rows: opts.skip_rows,
            method: opts.method.clone(),
            seed: opts.seed,
            s_thin: opts.s_thin,
        },
    };

    Ok(PipelineState {
        manifest,
        draws,
        per_chain,
        pairwise: pairwise
            .into_iter()
            .map(|row| row.into_iter().map(js).collect())
            .collect(),
        clusters,
        merged,
        cluster_ess,
        loo,
    })
}

#[derive(Debug, Serialize)]
pub struct DiagnoseOutput {
    pub schema: u32,
    pub manifest: RunManifest,
    pub per_chain: Vec<PerChain>,
    pub pairwise: Vec<Vec<Option<f64>>>,
    pub clusters: Vec<usize>,
    pub n_clusters: usize,
}

pub fn diagnose_output(state: &PipelineState) -> DiagnoseOutput {
    DiagnoseOutput {
        schema: SCHEMA,
        manifest: state.manifest.clone(),
        per_chain: state.per_chain.clone(),
        pairwise: state.pairwise.clone(),
        clusters: state.clusters.labels().to_vec(),
        n_clusters: state.clusters.n_clusters(),
    }
}

#[derive(Debug, Serialize)]
pub struct PsisOutput {
    pub schema: u32,
    pub manifest: RunManifest,
    pub cluster_ids: Vec<String>,
    /// n × K, row-major: loo[i][k] = p_k(y_i | y_−i).
    pub loo: Vec<Vec<f64>>,
    pub khat: Vec<Vec<Option<f64>>>,
    pub khat_summary: KhatSummaryOut,
}

pub fn psis_output(state: &PipelineState) -> PsisOutput {
    let n = state.loo.n_obs();
    let k = state.loo.n_chains();
    PsisOutput {
        schema: SCHEMA,
        manifest: state.manifest.clone(),
        cluster_ids: state
            .merged
            .chains()
            .iter()
            .map(|c| c.chain_id().to_string())
            .collect(),
        loo: (0..n)
            .map(|i| (0..k).map(|c| state.loo.loo(i, c)).collect())
            .collect(),
        khat: (0..n)
            .map(|i| (0..k).map(|c| js(state.loo.khat()[[i, c]])).collect())
            .collect(),
        khat_summary: khat_summary_out(&state.loo),
    }
}

#[derive(Debug, Serialize)]
pub struct StackOutput {
    pub schema: u32,
    pub manifest: RunManifest,
    pub method: String,
    pub cluster_ids: Vec<String>,
    pub clusters: Vec<usize>,
    pub weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub iterations: u64,
    pub stacked_ess: f64,
    pub cluster_ess: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monitor_curve: Option<Vec<f64>>,
    pub khat_summary: KhatSummaryOut,
}

/// Runs the weighting stage of the pipeline with the configured method.
pub fn stack_output(
    state: &PipelineState,
    opts: &PipelineOptions,
    monitor: bool,
) -> CliResult<StackOutput> {
    let cfg = opts.stacking_config(Some(state.cluster_ess.clone()))?;
    let k = state.loo.n_chains();
    let (weights, objective, iterations) = match opts.method.as_str() {
        "stacking" => {
            let sol = optimize_weights(&state.loo, &cfg).map_err(CliError::Core)?;
            (sol.weights, Some(sol.objective), sol.iterations)
        }
        "pseudo-bma" => (
            pseudo_bma_weights(&state.loo).map_err(CliError::Core)?,
            None,
            0,
        ),
        "uniform" => (uniform_weights(k).map_err(CliError::Core)?, None, 0),
        other => {
            return Err(CliError::Usage(format!(
                "unknown method '{other}' (expected stacking, pseudo-bma, or uniform)"
            )))
        }
    };
    let curve = if monitor {
        let order: Vec<usize> = (0..k).collect();
        Some(
            monitor_curve(&state.loo, &cfg, &order)
                .map_err(CliError::Core)?
                .lpd_loo,
        )
    } else {
        None
    };
    let s_ess = stacked_ess(&weights, &state.cluster_ess).map_err(CliError::Core)?;
    Ok(StackOutput {
        schema: SCHEMA,
        manifest: state.manifest.clone(),
        method: opts.method.clone(),
        cluster_ids: state
            .merged
            .chains()
            .iter()
            .map(|c| c.chain_id().to_string())
            .collect(),
        clusters: state.clusters.labels().to_vec(),
        weights: weights.as_slice().to_vec(),
        objective,
        iterations,
        stacked_ess: s_ess,
        cluster_ess: state.cluster_ess.clone(),
        monitor_curve: curve,
        khat_summary: khat_summary_out(&state.loo),
    })
}

#[derive(Debug, Serialize)]
pub struct ResampleOutput {
    pub schema: u32,
    pub manifest: RunManifest,
    pub seed: u64,
    pub s_thin: usize,
    pub weights: Vec<f64>,
    pub counts: Vec<usize>,
    pub indices: Vec<Vec<usize>>,
    pub params_csv: String,
}

/// Stack, thin, and materialize: writes the resampled parameter draws as a
/// CSV next to a JSON plan record.
pub fn run_resample(
    state: &PipelineState,
    opts: &PipelineOptions,
    out_dir: &Path,
) -> CliResult<ResampleOutput> {
    let s_thin = opts
        .s_thin
        .ok_or_else(|| CliError::Usage("--s-thin is required".to_string()))?;
    let seed = opts.seed.unwrap_or(0);
    let stack = stack_output(state, opts, false)?;
    let weights = ChainWeights::new(stack.weights.clone()).map_err(CliError::Core)?;
    let wds = WeightedDrawSet::new(state.merged.clone(), weights).map_err(CliError::Core)?;
    let plan = thin_resample(&wds, s_thin, seed).map_err(CliError::Core)?;
    let thinned = materialize(&wds, &plan).map_err(CliError::Core)?;

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let csv_name = "resampled_params.csv".to_string();
    match thinned.params() {
        Some(p) => {
            let header: Vec<String> = (0..p.ncols()).map(|j| format!("param_{j}")).collect();
            io::write_matrix_csv(
                &out_dir.join(&csv_name),
                Some(&header),
                p.rows().into_iter().map(|r| r.to_vec()),
            )?;
        }
        None => {
            // no parameter draws anywhere: export the selected log-lik rows instead
            let ll = thinned.log_lik();
            let header: Vec<String> = (0..ll.ncols()).map(|j| format!("obs_{j}")).collect();
            io::write_matrix_csv(
                &out_dir.join(&csv_name),
                Some(&header),
                ll.rows().into_iter().map(|r| r.to_vec()),
            )?;
        }
    }
    Ok(ResampleOutput {
        schema: SCHEMA,
        manifest: state.manifest.clone(),
        seed,
        s_thin,
        weights: stack.weights,
        counts: plan.counts().to_vec(),
        indices: plan.indices().to_vec(),
        params_csv: csv_name,
    })
}

#[derive(Debug, Serialize)]
pub struct ScenarioOutput {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub a: f64,
    pub p0: f64,
    pub n: usize,
    pub seed: u64,
    pub chains: usize,
    pub iters: usize,
    pub warmup: usize,
    pub step: f64,
    pub acceptance_rates: Vec<f64>,
    pub data: Vec<f64>,
}

/// Generates a Cauchy-mixture scenario and writes per-chain log-lik and
/// parameter CSVs plus a manifest and scenario record.
#[allow(clippy::too_many_arguments)]
pub fn run_simulate(
    a: f64,
    p0: f64,
    n: usize,
    chains: usize,
    iters: usize,
    warmup: usize,
    step: f64,
    seed: u64,
    out_dir: &Path,
) -> CliResult<ScenarioOutput> {
    let sc = cauchy::CauchyScenario::new(a, p0, n, seed).map_err(CliError::Core)?;
    let data = cauchy::generate_data(&sc);
    let runs =
        cauchy::simulate_chains(&sc, &data, chains, iters, warmup, step).map_err(CliError::Core)?;

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut manifest_chains = Vec::with_capacity(runs.len());
    let mut acceptance = Vec::with_capacity(runs.len());
    for (j, run) in runs.iter().enumerate() {
        let ll_name = format!("chain_{j:02}_loglik.csv");
        let p_name = format!("chain_{j:02}_params.csv");
        let chain: &ChainDraws = &run.chain;
        let header: Vec<String> = (0..chain.n_obs()).map(|i| format!("obs_{i}")).collect();
        io::write_matrix_csv(
            &out_dir.join(&ll_name),
            Some(&header),
            chain.log_lik().rows().into_iter().map(|r| r.to_vec()),
        )?;
        let params = chain.params().expect("simulated chains carry mu draws");
        let header = vec!["iter".to_string(), "mu".to_string()];
        io::write_matrix_csv(
            &out_dir.join(&p_name),
            Some(&header),
            params.rows().into_iter().enumerate().map(|(i, r)| {
                let mut row = vec![i as f64];
                row.extend(r.iter().copied());
                row
            }),
        )?;
        manifest_chains.push(ManifestChain {
            id: format!("chain_{j:02}"),
            log_lik: ll_name,
            params: Some(p_name),
            acceptance_rate: Some(run.acceptance_rate),
        });
        acceptance.push(run.acceptance_rate);
    }
    let manifest = Manifest {
        schema: SCHEMA,
        n_obs: n,
        chains: manifest_chains,
        provenance: vec![format!(
            "chainstack {TOOL_VERSION} simulate-cauchy --a {a} --p0 {p0} --n {n} --chains {chains} --iters {iters} --warmup {warmup} --step {step} --seed {seed}"
        )],
    };
    io::write_text(&out_dir.join(io::MANIFEST_FILE), &to_json_string(&manifest))?;
    let scenario = ScenarioOutput {
        schema: SCHEMA,
        tool: "chainstack".to_string(),
        version: TOOL_VERSION.to_string(),
        a,
        p0,
        n,
        seed,
        chains,
        iters,
        warmup,
        step,
        acceptance_rates: acceptance,
        data,
    };
    io::write_text(&out_dir.join("scenario.json"), &to_json_string(&scenario))?;
    Ok(scenario)
}

#[derive(Debug, Serialize)]
pub struct TheoryOutput {
    pub schema: u32,
    pub a: f64,
    pub p0: f64,
    pub xi: Option<f64>,
    pub modes: Vec<f64>,
    pub bimodal: bool,
    pub elpd_bayes_limit: f64,
    pub elpd_true: f64,
    pub elpd_stacking_opt: f64,
    pub stacking_weights: Vec<f64>,
}

/// Closed-form and quadrature predictions for a scenario.
pub fn run_theory(a: f64, p0: f64) -> CliResult<TheoryOutput> {
    let report = cauchy::limiting_modes(a, p0).map_err(CliError::Core)?;
    let xi = if a > 2.0 {
        Some(cauchy::xi(a).map_err(CliError::Core)?)
    } else {
        None
    };
    let elpd_bayes = cauchy::elpd_bayes_limit(a, p0).map_err(CliError::Core)?;
    let elpd_truth = cauchy::elpd_true(a, p0).map_err(CliError::Core)?;
    let (weights, elpd_opt) =
        cauchy::optimal_mixture_weights(a, p0, &report.modes).map_err(CliError::Core)?;
    Ok(TheoryOutput {
        schema: SCHEMA,
        a,
        p0,
        xi,
        modes: report.modes.clone(),
        bimodal: report.bimodal,
        elpd_bayes_limit: elpd_bayes,
        elpd_true: elpd_truth,
        elpd_stacking_opt: elpd_opt,
        stacking_weights: weights.as_slice().to_vec(),
    })
}
