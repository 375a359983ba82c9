//! Command-line interface: argument definitions and subcommand dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use chainstack_core::diagnostics::SummaryBy;

use crate::error::{CliError, CliResult};
use crate::io::write_text;
use crate::jsonfmt::to_json_string;
use crate::pipeline::{
    self, diagnose_output, psis_output, run_pipeline, run_resample, run_simulate, run_theory,
    stack_output, PipelineOptions,
};

#[derive(Parser)]
#[command(
    name = "chainstack",
    version,
    about = "Stack non-mixing MCMC chains into one predictive distribution"
)]
pub struct Cli {
    /// Worker threads (CHAINSTACK_THREADS overrides; default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct IngestArgs {
    /// Directory with manifest.json or *_loglik.csv chain files
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,

    /// Drop this many leading draws from every chain file
    #[arg(long, default_value_t = 0)]
    skip_rows: usize,

    /// Scalar summary for mixing diagnostics: mean-log-lik or param:<col>
    #[arg(long, default_value = "mean-log-lik")]
    summary: String,

    /// Between-chain split-R-hat threshold for clustering
    #[arg(long, default_value_t = 1.05)]
    threshold: f64,

    /// Treat every chain as its own cluster (skip the clustering step)
    #[arg(long)]
    no_cluster: bool,
}

#[derive(Args, Clone)]
struct StackArgs {
    /// Dirichlet partial-pooling scale (must be > 1)
    #[arg(long, default_value_t = 1.001)]
    lambda: f64,

    /// Optimizer objective tolerance
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,

    /// Optimizer iteration budget
    #[arg(long, default_value_t = 100_000)]
    max_iter: u64,

    /// Weighting method: stacking, pseudo-bma, or uniform
    #[arg(long, default_value = "stacking")]
    method: String,
}

#[derive(Subcommand)]
enum Command {
    /// Split-R-hat, effective sample size, and chain clustering
    Diagnose {
        #[command(flatten)]
        ingest: IngestArgs,
        /// Also write the JSON to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pareto-smoothed leave-one-out densities with k-hat diagnostics
    Psis {
        #[command(flatten)]
        ingest: IngestArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline: diagnose, cluster, PSIS, and weight the clusters
    Stack {
        #[command(flatten)]
        ingest: IngestArgs,
        #[command(flatten)]
        stack: StackArgs,
        /// Re-optimize over chain prefixes and report lpd_loo(K')
        #[arg(long)]
        monitor: bool,
        /// Also write diagnostics.json, loo.json, and weights.json here
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Thin the stacked draw set into plain draws without weights
    Resample {
        #[command(flatten)]
        ingest: IngestArgs,
        #[command(flatten)]
        stack: StackArgs,
        /// Number of draws to keep (bounded by min over clusters of S_k/w_k)
        #[arg(long)]
        s_thin: usize,
        /// Resampling seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the plan record and the resampled CSV
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate a Cauchy-mixture test bed with mode-trapped chains
    SimulateCauchy {
        /// Mode separation half-distance (a > 0)
        #[arg(long)]
        a: f64,
        /// Right-component probability (0.5 <= p0 <= 1)
        #[arg(long)]
        p0: f64,
        /// Observations
        #[arg(long)]
        n: usize,
        /// Parallel Metropolis chains
        #[arg(long, default_value_t = 8)]
        chains: usize,
        /// Post-warmup draws per chain
        #[arg(long, default_value_t = 4000)]
        iters: usize,
        /// Discarded warmup iterations per chain
        #[arg(long, default_value_t = 1000)]
        warmup: usize,
        /// Random-walk proposal scale
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Closed-form scenario predictions: xi, modes, and limiting elpds
    Theory {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        p0: f64,
    },
}

fn parse_summary(text: &str) -> CliResult<SummaryBy> {
    if text == "mean-log-lik" {
        return Ok(SummaryBy::MeanLogLik);
    }
    if let Some(col) = text.strip_prefix("param:") {
        let col: usize = col
            .parse()
            .map_err(|_| CliError::Usage(format!("bad --summary column '{col}'")))?;
        return Ok(SummaryBy::Param(col));
    }
    Err(CliError::Usage(format!(
        "unknown --summary '{text}' (expected mean-log-lik or param:<col>)"
    )))
}

fn pipeline_options(ingest: &IngestArgs, stack: Option<&StackArgs>) -> CliResult<PipelineOptions> {
    let mut opts = PipelineOptions {
        skip_rows: ingest.skip_rows,
        summary: parse_summary(&ingest.summary)?,
        threshold: ingest.threshold,
        no_cluster: ingest.no_cluster,
        ..PipelineOptions::default()
    };
    if let Some(s) = stack {
        opts.lambda = s.lambda;
        opts.tol = s.tol;
        opts.max_iter = s.max_iter;
        opts.method = s.method.clone();
    }
    Ok(opts)
}

fn emit(json: &str, out: Option<&PathBuf>) -> CliResult<()> {
    print!("{json}");
    if let Some(path) = out {
        write_text(path, json)?;
    }
    Ok(())
}

fn thread_pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let from_env = std::env::var("CHAINSTACK_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = from_env.or(threads) {
        builder = builder.num_threads(t.max(1));
    }
    builder
        .build()
        .map_err(|e| CliError::Usage(format!("could not build thread pool: {e}")))
}

/// Parses arguments and runs the selected subcommand.
pub fn run<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    let pool = thread_pool(cli.threads)?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Diagnose { ingest, out } => {
            let opts = pipeline_options(&ingest, None)?;
            let state = run_pipeline(&ingest.input, &opts)?;
            emit(&to_json_string(&diagnose_output(&state)), out.as_ref())
        }
        Command::Psis { ingest, out } => {
            let opts = pipeline_options(&ingest, None)?;
            let state = run_pipeline(&ingest.input, &opts)?;
            emit(&to_json_string(&psis_output(&state)), out.as_ref())
        }
        Command::Stack {
            ingest,
            stack,
            monitor,
            out_dir,
        } => {
            let opts = pipeline_options(&ingest, Some(&stack))?;
            let state = run_pipeline(&ingest.input, &opts)?;
            let result = stack_output(&state, &opts, monitor)?;
            let json = to_json_string(&result);
            if let Some(dir) = &out_dir {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                write_text(
                    &dir.join("diagnostics.json"),
                    &to_json_string(&diagnose_output(&state)),
                )?;
                write_text(&dir.join("loo.json"), &to_json_string(&psis_output(&state)))?;
                write_text(&dir.join("weights.json"), &json)?;
            }
            emit(&json, None)
        }
        Command::Resample {
            ingest,
            stack,
            s_thin,
            seed,
            out_dir,
        } => {
            let mut opts = pipeline_options(&ingest, Some(&stack))?;
            opts.s_thin = Some(s_thin);
            opts.seed = Some(seed);
            let state = run_pipeline(&ingest.input, &opts)?;
            let result = run_resample(&state, &opts, &out_dir)?;
            let json = to_json_string(&result);
            write_text(&out_dir.join("plan.json"), &json)?;
            emit(&json, None)
        }
        Command::SimulateCauchy {
            a,
            p0,
            n,
            chains,
            iters,
            warmup,
            step,
            seed,
            out_dir,
        } => {
            let scenario = run_simulate(a, p0, n, chains, iters, warmup, step, seed, &out_dir)?;
            // echo a short confirmation rather than the full data vector
            let summary = serde_json::json!({
                "schema": pipeline::SCHEMA,
                "out_dir": out_dir.display().to_string(),
                "chains": scenario.chains,
                "iters": scenario.iters,
                "n": scenario.n,
                "acceptance_rates": scenario.acceptance_rates,
            });
            println!("{summary}");
            Ok(())
        }
        Command::Theory { a, p0 } => {
            let result = run_theory(a, p0)?;
            emit(&to_json_string(&result), None)
        }
    }
}
