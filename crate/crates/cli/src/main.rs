//! `levrec` — leverage-weighted low-rank matrix recovery.
//!
//! Subcommands: `gen` (synthetic data), `weigh` (row weights by coordinate
//! descent), `complete` (weighted nuclear norm completion), `rpca`
//! (robust PCA), `experiment` (scenario harness).

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use levrec_cli::config::ConfigFile;
use levrec_cli::harness::{self, HarnessOptions};
use levrec_core::completion::{admm_weighted_complete, weighting_completion, AdmmConfig};
use levrec_core::datagen::{
    add_gaussian_noise, gen_coherent_lowrank, gen_sparse_corruption, sample_uniform, GenSpec,
};
use levrec_core::io::{
    read_dense_csv, read_matrix_market, write_dense_csv, write_indexed_csv, write_matrix_market,
    write_records_csv,
};
use levrec_core::leverage::{trim, TrimMode};
use levrec_core::linalg::SparseObservation;
use levrec_core::nalgebra::DMatrix;
use levrec_core::rpca::{rpca, weighted_rpca, RpcaConfig, RpcaVariant};
use levrec_core::weighting::{
    coordinate_descent, target_scores_uniform, DiagonalWeights, WeightingConfig, WeightingInput,
};
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "levrec", version, about = "Leverage-weighted low-rank matrix recovery")]
struct Cli {
    /// Worker threads for grid x seed parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Plain `key = value` file supplying defaults for any flag below;
    /// explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Default output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Default seed for single-run subcommands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic coherent low-rank instance.
    Gen(GenArgs),
    /// Compute row weights from a partial observation or full matrix.
    Weigh(WeighArgs),
    /// Complete a partially observed matrix (optionally weighted).
    Complete(CompleteArgs),
    /// Decompose a matrix into low-rank plus sparse parts.
    Rpca(RpcaArgs),
    /// Run a full experiment scenario over seeds and parameter grids.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Observation probability; omit to skip writing a mask.
    #[arg(long)]
    p: Option<f64>,
    /// Gaussian noise level; 0 disables noise.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    noise_fraction: Option<f64>,
    #[arg(long)]
    noise_mean: Option<f64>,
    /// Sparse corruption density; 0 disables corruption output.
    #[arg(long)]
    corrupt_p: Option<f64>,
    #[arg(long)]
    corrupt_s: Option<f64>,
}

#[derive(Args, Debug)]
struct WeighArgs {
    /// Observation (.mtx) or full matrix (.csv).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rank: Option<usize>,
    /// Estimation accuracy rho (default: 20·sqrt(observed fraction)).
    #[arg(long)]
    rho: Option<f64>,
    /// Step budget T (default: rank²).
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args, Debug)]
struct CompleteArgs {
    /// Observation in MatrixMarket coordinate format.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rank: Option<usize>,
    /// Run the weighting–completion loop for this many rounds.
    #[arg(long)]
    rounds: Option<usize>,
    /// Precomputed row weights CSV (index,weight).
    #[arg(long)]
    row_weights: Option<PathBuf>,
    /// Precomputed column weights CSV (index,weight).
    #[arg(long)]
    col_weights: Option<PathBuf>,
    /// Absolute nuclear penalty; overrides --lambda-mult.
    #[arg(long)]
    lambda: Option<f64>,
    /// Nuclear penalty as a multiple of the observed-entry RMS.
    #[arg(long)]
    lambda_mult: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Weighting accuracy rho for --rounds mode.
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Args, Debug)]
struct RpcaArgs {
    /// Fully observed matrix D as CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rank: Option<usize>,
    /// unweighted | type1 | type2
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    lambda_sparse: Option<f64>,
    /// Weighting accuracy rho for the type1/type2 variants.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// weighting-trace | rounds | completion-error | rpca-trace |
    /// rpca-error | loss-compare (fig3/fig4/fig7/fig5/6/fig8/appB aliases
    /// accepted).
    #[arg(long)]
    scenario: Option<String>,
    /// Comma-separated seed list.
    #[arg(long)]
    seeds: Option<String>,
    /// Also emit an SVG chart per scenario.
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Observation density (scenarios with a single p).
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated p grid (scenarios sweeping p).
    #[arg(long)]
    p_grid: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Corruption magnitude for the RPCA scenarios.
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("initializing worker pool")?;
    }
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let out_dir = cli
        .out
        .clone()
        .or(cfg.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = resolve(cli.seed, &cfg, "seed")?.unwrap_or(0);

    match cli.command {
        Command::Gen(args) => cmd_gen(args, &cfg, &out_dir, seed),
        Command::Weigh(args) => cmd_weigh(args, &cfg, &out_dir, seed),
        Command::Complete(args) => cmd_complete(args, &cfg, &out_dir, seed),
        Command::Rpca(args) => cmd_rpca(args, &cfg, &out_dir, seed),
        Command::Experiment(args) => cmd_experiment(args, &cfg, &out_dir, seed),
    }
}

/// Flag value, else config value, else `None`.
fn resolve<T: std::str::FromStr + Clone>(
    flag: Option<T>,
    cfg: &ConfigFile,
    key: &str,
) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.parse(key).map_err(anyhow::Error::msg),
    }
}

fn parse_list<T: std::str::FromStr>(raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<T>().map_err(|e| anyhow::anyhow!("{e}: `{t}`")))
        .collect()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

fn read_input_matrix(path: &Path) -> Result<WeighInput> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mtx") => Ok(WeighInput::Sparse(read_matrix_market(path)?)),
        Some("csv") => Ok(WeighInput::Dense(read_dense_csv(path)?)),
        _ => bail!("input must end in .mtx (observation) or .csv (dense matrix)"),
    }
}

enum WeighInput {
    Sparse(SparseObservation),
    Dense(DMatrix<f64>),
}

fn read_weights_csv(path: &Path, expect_len: usize) -> Result<DiagonalWeights> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let value = line
            .split(',')
            .nth(1)
            .with_context(|| format!("bad weights line `{line}`"))?;
        values.push(value.trim().parse::<f64>()?);
    }
    anyhow::ensure!(
        values.len() == expect_len,
        "weights file {} has {} entries, expected {expect_len}",
        path.display(),
        values.len()
    );
    Ok(DiagonalWeights::from_values(values).map_err(anyhow::Error::from)?)
}

fn cmd_gen(args: GenArgs, cfg: &ConfigFile, out_dir: &Path, seed: u64) -> Result<()> {
    ensure_dir(out_dir)?;
    let n1 = resolve(args.n1, cfg, "n1")?.unwrap_or(400);
    let n2 = resolve(args.n2, cfg, "n2")?.unwrap_or(200);
    let rank = resolve(args.rank, cfg, "rank")?.unwrap_or(8);
    let p = resolve(args.p, cfg, "p")?;
    let sigma = resolve(args.sigma, cfg, "sigma")?.unwrap_or(0.0);
    let noise_fraction = resolve(args.noise_fraction, cfg, "noise-fraction")?.unwrap_or(0.5);
    let noise_mean = resolve(args.noise_mean, cfg, "noise-mean")?.unwrap_or(1.0);
    let corrupt_p = resolve(args.corrupt_p, cfg, "corrupt-p")?.unwrap_or(0.0);
    let corrupt_s = resolve(args.corrupt_s, cfg, "corrupt-s")?.unwrap_or(10.0);

    let spec = GenSpec::new(n1, n2, rank, seed);
    let l0 = gen_coherent_lowrank(&spec)?;
    write_dense_csv(&out_dir.join("l0.csv"), &l0)?;

    let mut m = l0.clone();
    if sigma > 0.0 {
        m = add_gaussian_noise(
            &l0,
            noise_fraction,
            sigma,
            noise_mean,
            harness::subseed(seed, "noise"),
        )?;
        write_dense_csv(&out_dir.join("m.csv"), &m)?;
    }
    if let Some(p) = p {
        let omega = sample_uniform(n1, n2, p, harness::subseed(seed, "omega"))?;
        let obs = SparseObservation::from_mask(&m, &omega)?;
        write_matrix_market(&out_dir.join("omega.mtx"), &obs)?;
    }
    if corrupt_p > 0.0 {
        let s0 = gen_sparse_corruption(n1, n2, corrupt_p, corrupt_s, harness::subseed(seed, "s0"))?;
        write_dense_csv(&out_dir.join("s0.csv"), &s0)?;
        write_dense_csv(&out_dir.join("d.csv"), &(&l0 + &s0))?;
    }

    let mut manifest = std::fs::File::create(out_dir.join("manifest.txt"))?;
    writeln!(manifest, "n1 = {n1}")?;
    writeln!(manifest, "n2 = {n2}")?;
    writeln!(manifest, "rank = {rank}")?;
    writeln!(manifest, "seed = {seed}")?;
    if let Some(p) = p {
        writeln!(manifest, "p = {p}")?;
    }
    writeln!(manifest, "sigma = {sigma}")?;
    writeln!(manifest, "noise-fraction = {noise_fraction}")?;
    writeln!(manifest, "noise-mean = {noise_mean}")?;
    writeln!(manifest, "corrupt-p = {corrupt_p}")?;
    writeln!(manifest, "corrupt-s = {corrupt_s}")?;
    writeln!(manifest, "t-dof = {}", spec.t_dof)?;
    writeln!(manifest, "cov-base = {}", spec.cov_base)?;
    writeln!(manifest, "cov-decay = {}", spec.cov_decay)?;
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn cmd_weigh(args: WeighArgs, cfg: &ConfigFile, out_dir: &Path, seed: u64) -> Result<()> {
    ensure_dir(out_dir)?;
    let rank = resolve(args.rank, cfg, "rank")?.context("--rank is required")?;
    let input = read_input_matrix(&args.input)?;
    let (n1, density) = match &input {
        WeighInput::Sparse(o) => (
            o.n_rows(),
            o.nnz() as f64 / (o.n_rows() * o.n_cols()) as f64,
        ),
        WeighInput::Dense(m) => (m.nrows(), 1.0),
    };
    let rho = resolve(args.rho, cfg, "rho")?.unwrap_or(20.0 * density.sqrt());
    let mut wcfg = WeightingConfig::for_rank(rank, rho);
    wcfg.seed = seed;
    if let Some(steps) = resolve(args.steps, cfg, "steps")? {
        wcfg.max_steps = steps;
    }
    let targets = target_scores_uniform(n1, rank);
    let (weights, traces) = match &input {
        WeighInput::Sparse(o) => {
            // Same trim stream as the weighting-completion loop, so
            // `weigh` + `complete` composes to `complete --rounds`.
            let trimmed = trim(o, TrimMode::Subsample, wcfg.seed);
            coordinate_descent(WeightingInput::Observation(&trimmed), rank, &wcfg, &targets)?
        }
        WeighInput::Dense(m) => {
            coordinate_descent(WeightingInput::Matrix(m), rank, &wcfg, &targets)?
        }
    };
    write_indexed_csv(&out_dir.join("weights.csv"), "index,weight", weights.values())?;
    let rows: Vec<Vec<String>> = traces
        .iter()
        .map(|t| {
            vec![
                t.step.to_string(),
                t.chosen_row.to_string(),
                format!("{}", t.gamma),
                format!("{}", t.coherence),
                format!("{}", t.l1_loss),
                format!("{}", t.kappa),
            ]
        })
        .collect();
    write_records_csv(
        &out_dir.join("trace.csv"),
        "step,chosen_row,gamma,coherence,l1_loss,kappa",
        &rows,
    )?;
    println!(
        "wrote {} ({} steps, rho = {rho})",
        out_dir.display(),
        traces.len()
    );
    Ok(())
}

fn cmd_complete(args: CompleteArgs, cfg: &ConfigFile, out_dir: &Path, seed: u64) -> Result<()> {
    ensure_dir(out_dir)?;
    let obs = read_matrix_market(&args.input)?;
    let scale = harness::rms_scale(&obs);
    let lambda = match resolve(args.lambda, cfg, "lambda")? {
        Some(l) => l,
        None => resolve(args.lambda_mult, cfg, "lambda-mult")?.unwrap_or(1e-2) * scale,
    };
    let max_iters = resolve(args.max_iters, cfg, "max-iters")?.unwrap_or(800);
    let mut acfg = AdmmConfig::for_lambda(lambda, scale, max_iters);
    if let Some(tol) = resolve(args.tol, cfg, "tol")? {
        acfg.primal_tol = tol;
    }

    let rounds = resolve(args.rounds, cfg, "rounds")?;
    let result = match (rounds, &args.row_weights, &args.col_weights) {
        (Some(rounds), None, None) => {
            let rank = resolve(args.rank, cfg, "rank")?.context("--rank is required with --rounds")?;
            let density = obs.nnz() as f64 / (obs.n_rows() * obs.n_cols()) as f64;
            let rho = resolve(args.rho, cfg, "rho")?.unwrap_or(20.0 * density.sqrt());
            let mut wcfg = WeightingConfig::for_rank(rank, rho);
            wcfg.seed = seed;
            let out = weighting_completion(&obs, rank, rounds, &wcfg, &acfg)?;
            let rows: Vec<Vec<String>> = out
                .rounds
                .iter()
                .map(|d| {
                    vec![
                        d.round.to_string(),
                        format!("{}", d.coherence),
                        format!("{}", d.l1_loss),
                        d.admm_iterations.to_string(),
                        d.admm_converged.to_string(),
                    ]
                })
                .collect();
            write_records_csv(
                &out_dir.join("rounds.csv"),
                "round,coherence,l1_loss,admm_iterations,admm_converged",
                &rows,
            )?;
            out.result
        }
        (None, row_path, col_path) => {
            let r = match row_path {
                Some(p) => read_weights_csv(p, obs.n_rows())?,
                None => DiagonalWeights::identity(obs.n_rows()),
            };
            let c = match col_path {
                Some(p) => read_weights_csv(p, obs.n_cols())?,
                None => DiagonalWeights::identity(obs.n_cols()),
            };
            admm_weighted_complete(&obs, &r, &c, &acfg)?
        }
        (Some(_), _, _) => bail!("--rounds cannot be combined with precomputed weights"),
    };

    write_dense_csv(&out_dir.join("lstar.csv"), &result.recovered)?;
    write_indexed_csv(
        &out_dir.join("residuals.csv"),
        "iteration,primal_residual",
        &result.residual_trace,
    )?;
    println!(
        "wrote {} ({} iterations, converged = {})",
        out_dir.display(),
        result.iterations,
        result.converged
    );
    Ok(())
}

fn cmd_rpca(args: RpcaArgs, cfg: &ConfigFile, out_dir: &Path, seed: u64) -> Result<()> {
    ensure_dir(out_dir)?;
    let d = read_dense_csv(&args.input)?;
    let variant = resolve(args.variant.clone(), cfg, "variant")?.unwrap_or_else(|| "unweighted".into());
    let mut rcfg = RpcaConfig::default();
    rcfg.lambda_sparse = resolve(args.lambda_sparse, cfg, "lambda-sparse")?;
    if let Some(iters) = resolve(args.max_iters, cfg, "max-iters")? {
        rcfg.max_iters = iters;
    }
    if let Some(tol) = resolve(args.tol, cfg, "tol")? {
        rcfg.tol = tol;
    }
    let result = match variant.as_str() {
        "unweighted" => rpca(&d, &rcfg)?,
        v @ ("type1" | "type2") => {
            let rank = resolve(args.rank, cfg, "rank")?.context("--rank is required for weighted variants")?;
            let rho = resolve(args.rho, cfg, "rho")?.unwrap_or(20.0);
            let mut wcfg = WeightingConfig::for_rank(rank, rho);
            wcfg.seed = seed;
            let variant = if v == "type1" {
                RpcaVariant::Type1
            } else {
                RpcaVariant::Type2
            };
            weighted_rpca(&d, rank, variant, &wcfg, &rcfg)?
        }
        other => bail!("unknown variant `{other}` (expected unweighted, type1 or type2)"),
    };
    write_dense_csv(&out_dir.join("lstar.csv"), &result.low_rank)?;
    write_dense_csv(&out_dir.join("sstar.csv"), &result.sparse)?;
    println!(
        "wrote {} ({} iterations, converged = {})",
        out_dir.display(),
        result.iterations,
        result.converged
    );
    Ok(())
}

fn cmd_experiment(
    args: ExperimentArgs,
    cfg: &ConfigFile,
    out_dir: &Path,
    seed: u64,
) -> Result<()> {
    let svg = args.svg;
    let scenario = resolve(args.scenario.clone(), cfg, "scenario")?
        .context("--scenario is required")?;
    let seeds: Vec<u64> = match resolve(args.seeds.clone(), cfg, "seeds")? {
        Some(raw) => parse_list(&raw)?,
        None => (seed..seed + 5).collect(),
    };
    anyhow::ensure!(!seeds.is_empty(), "seed list must be nonempty");
    let mut opts = HarnessOptions::new(out_dir, seeds);
    opts.svg = svg;

    let n1 = resolve(args.n1, cfg, "n1")?;
    let n2 = resolve(args.n2, cfg, "n2")?;
    let rank = resolve(args.rank, cfg, "rank")?;
    let p = resolve(args.p, cfg, "p")?;
    let p_grid: Option<Vec<f64>> = match resolve(args.p_grid.clone(), cfg, "p-grid")? {
        Some(raw) => Some(parse_list(&raw)?),
        None => None,
    };
    let sigma = resolve(args.sigma, cfg, "sigma")?;
    let s = resolve(args.s, cfg, "s")?;
    let max_steps = resolve(args.max_steps, cfg, "max-steps")?;

    match scenario.as_str() {
        "weighting-trace" | "fig3-weighting-trace" => {
            let mut params = harness::WeightingTraceParams::default();
            if let Some(v) = n1 {
                params.n1 = v;
            }
            if let Some(v) = n2 {
                params.n2 = v;
            }
            if let Some(v) = rank {
                params.k = v;
            }
            if let Some(v) = p_grid {
                params.p_grid = v;
            }
            let cells = harness::run_weighting_trace(&params, &opts)?;
            println!("weighting-trace: {} cells -> {}", cells.len(), out_dir.display());
        }
        "rounds" | "fig4-rounds" => {
            let mut params = harness::RoundsParams::default();
            if let Some(v) = n1 {
                params.n1 = v;
            }
            if let Some(v) = n2 {
                params.n2 = v;
            }
            if let Some(v) = rank {
                params.k = v;
            }
            if let Some(v) = p {
                params.p = v;
            }
            let cells = harness::run_rounds(&params, &opts)?;
            println!("rounds: {} cells -> {}", cells.len(), out_dir.display());
        }
        "completion-error" | "fig7-noisy-completion" => {
            let mut params = harness::CompletionErrorParams::default();
            if let Some(v) = n1 {
                params.n1 = v;
            }
            if let Some(v) = n2 {
                params.n2 = v;
            }
            if let Some(v) = rank {
                params.k = v;
            }
            if let Some(v) = p {
                params.p = v;
            }
            if let Some(v) = sigma {
                params.sigma = v;
            }
            let cells = harness::run_completion_error(&params, &opts)?;
            println!(
                "completion-error: {} cells -> {}",
                cells.len(),
                out_dir.display()
            );
        }
        "rpca-trace" | "fig5/6-rpca-trace" | "fig56-rpca-trace" => {
            let mut params = harness::RpcaTraceParams::default();
            if let Some(v) = n1 {
                params.n1 = v;
            }
            if let Some(v) = n2 {
                params.n2 = v;
            }
            if let Some(v) = rank {
                params.k = v;
            }
            let cells = harness::run_rpca_trace(&params, &opts)?;
            println!("rpca-trace: {} cells -> {}", cells.len(), out_dir.display());
        }
        "rpca-error" | "fig8-rpca-error" => {
            let mut params = harness::RpcaErrorParams::default();
            if let Some(v) = n1 {
                params.n1 = v;
            }
            if let Some(v) = n2 {
                params.n2 = v;
            }
            if let Some(v) = rank {
                params.k = v;
            }
            if let Some(v) = p_grid {
                params.p_grid = v;
            }
            if let Some(v) = s {
                params.s = v;
            }
            let cells = harness::run_rpca_error(&params, &opts)?;
            println!("rpca-error: {} cells -> {}", cells.len(), out_dir.display());
        }
        "loss-compare" | "appB-loss-compare" | "appb-loss-compare" => {
            let mut params = harness::LossCompareParams::default();
            if let Some(v) = n1 {
                params.n1 = v;
            }
            if let Some(v) = n2 {
                params.n2 = v;
            }
            if let Some(v) = rank {
                params.k = v;
            }
            if let Some(v) = max_steps {
                params.max_steps = v;
            }
            let cells = harness::run_loss_compare(&params, &opts)?;
            println!("loss-compare: {} cells -> {}", cells.len(), out_dir.display());
        }
        other => bail!("unknown scenario `{other}`"),
    }
    Ok(())
}
