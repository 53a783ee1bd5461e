//! Experiment harness: generates synthetic data, runs the configured
//! methods over parameter grids and seeds, and emits tidy CSVs plus an
//! optional SVG chart per scenario.
//!
//! Scenario naming follows the report sections they reproduce:
//! weighting traces vs sampling density, weighting–completion rounds,
//! noisy completion accuracy, RPCA weighting traces, RPCA recovery error,
//! and the step-size/loss comparison.

use crate::config::config_hash;
use crate::svg::{write_line_chart, Series};
use anyhow::{Context, Result};
use levrec_core::completion::{
    admm_weighted_complete, coherence, relative_error, AdmmConfig,
};
use levrec_core::datagen::{gen_coherent_lowrank, gen_sparse_corruption, sample_uniform, GenSpec};
use levrec_core::io::write_records_csv;
use levrec_core::leverage::{compute_leverage, trim, TrimMode};
use levrec_core::linalg::{fro_norm, truncated_svd, SparseObservation};
use levrec_core::nalgebra::DMatrix;
use levrec_core::rpca::{rpca, weighted_rpca, RpcaConfig, RpcaResult, RpcaVariant};
use levrec_core::weighting::{
    coordinate_descent, exact_coordinate_descent, hinge_loss, target_scores_uniform,
    DiagonalWeights, LossNorm, StepTrace, WeightingConfig, WeightingInput,
};
use rayon::prelude::*;
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub struct HarnessOptions {
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub svg: bool,
}

impl HarnessOptions {
    pub fn new(out_dir: impl Into<PathBuf>, seeds: Vec<u64>) -> Self {
        HarnessOptions {
            out_dir: out_dir.into(),
            seeds,
            svg: false,
        }
    }

    fn validate(&self) -> Result<()> {
        anyhow::ensure!(!self.seeds.is_empty(), "at least one seed is required");
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating output directory {}", self.out_dir.display()))?;
        Ok(())
    }
}

/// Derive an independent stream seed for one purpose within a run.
pub fn subseed(seed: u64, tag: &str) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(tag.as_bytes());
    crate::config::fnv1a64(&bytes)
}

/// The λ sweep used whenever a method says "tuned to the best":
/// multipliers of ‖P_Ω(M)‖_F/√|Ω|.
pub const LAMBDA_MULTS: [f64; 6] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2];

pub fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// RMS of the observed entries, the scale unit of the λ grid.
pub fn rms_scale(obs: &SparseObservation) -> f64 {
    let ss: f64 = obs.triplets().iter().map(|&(_, _, v)| v * v).sum();
    (ss / obs.nnz().max(1) as f64).sqrt()
}

/// Exact row coherence and ℓ1 hinge loss of diag(w)·L0 at rank k.
fn true_row_state(l0: &DMatrix<f64>, w: &DiagonalWeights, k: usize) -> Result<(f64, f64)> {
    let weighted = w.scale_rows_dense(l0);
    let f = truncated_svd(&weighted, k)?;
    let p = compute_leverage(&f, k, false)?;
    let coh = coherence(&p, l0.nrows())?;
    let loss = hinge_loss(p.scores(), &target_scores_uniform(l0.nrows(), k), LossNorm::L1);
    Ok((coh, loss))
}

/// Replay a descent trace against the true matrix: exact coherence and ℓ1
/// loss after every step (index 0 = identity weights).
fn replay_true_states(
    l0: &DMatrix<f64>,
    traces: &[StepTrace],
    k: usize,
) -> Result<Vec<(f64, f64)>> {
    let mut w = DiagonalWeights::identity(l0.nrows());
    let mut out = vec![true_row_state(l0, &w, k)?];
    for t in traces {
        w.apply_step(t.chosen_row, t.gamma);
        out.push(true_row_state(l0, &w, k)?);
    }
    Ok(out)
}

fn f(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------------------
// Weighting traces vs sampling density (the p-sweep experiment)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct WeightingTraceParams {
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub p_grid: Vec<f64>,
}

impl Default for WeightingTraceParams {
    fn default() -> Self {
        WeightingTraceParams {
            n1: 400,
            n2: 200,
            k: 8,
            p_grid: vec![0.1, 0.3, 1.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightingTraceCell {
    pub p: f64,
    pub seed: u64,
    pub steps: usize,
    pub initial_l1: f64,
    pub final_l1: f64,
    pub initial_coherence: f64,
    pub final_coherence: f64,
}

pub fn run_weighting_trace(
    params: &WeightingTraceParams,
    opts: &HarnessOptions,
) -> Result<Vec<WeightingTraceCell>> {
    opts.validate()?;
    let hash = config_hash(&[
        ("scenario", "weighting-trace".into()),
        ("n1", params.n1.to_string()),
        ("n2", params.n2.to_string()),
        ("k", params.k.to_string()),
        ("p_grid", format!("{:?}", params.p_grid)),
        ("seeds", format!("{:?}", opts.seeds)),
    ]);
    let mut jobs: Vec<(f64, u64)> = Vec::new();
    for &p in &params.p_grid {
        for &seed in &opts.seeds {
            jobs.push((p, seed));
        }
    }
    let cells: Result<Vec<(WeightingTraceCell, Vec<Vec<String>>)>> = jobs
        .par_iter()
        .map(|&(p, seed)| -> Result<_> {
            let spec = GenSpec::new(params.n1, params.n2, params.k, seed);
            let l0 = gen_coherent_lowrank(&spec)?;
            let omega = sample_uniform(params.n1, params.n2, p, subseed(seed, "omega"))?;
            let obs = SparseObservation::from_mask(&l0, &omega)?;
            let trimmed = trim(&obs, TrimMode::Subsample, subseed(seed, "trim"));
            let mut wcfg = WeightingConfig::for_rank(params.k, 20.0 * p.sqrt());
            wcfg.seed = seed;
            let targets = target_scores_uniform(params.n1, params.k);
            let (_, traces) =
                coordinate_descent(WeightingInput::Observation(&trimmed), params.k, &wcfg, &targets)?;
            let states = replay_true_states(&l0, &traces, params.k)?;

            let mut records = Vec::new();
            records.push(vec![
                "0".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                f(states[0].0),
                f(states[0].1),
            ]);
            for (t, s) in traces.iter().zip(states.iter().skip(1)) {
                records.push(vec![
                    t.step.to_string(),
                    t.chosen_row.to_string(),
                    f(t.gamma),
                    f(t.coherence),
                    f(t.l1_loss),
                    f(t.kappa),
                    f(s.0),
                    f(s.1),
                ]);
            }
            let cell = WeightingTraceCell {
                p,
                seed,
                steps: traces.len(),
                initial_l1: states[0].1,
                final_l1: states.last().unwrap().1,
                initial_coherence: states[0].0,
                final_coherence: states.last().unwrap().0,
            };
            Ok((cell, records))
        })
        .collect();
    let cells = cells?;

    let mut summary_rows = Vec::new();
    let mut out_cells = Vec::new();
    for ((p, seed), (cell, records)) in jobs.iter().zip(cells) {
        let path = opts
            .out_dir
            .join(format!("weighting-trace_p{p}_seed{seed}_{hash}.csv"));
        write_records_csv(
            &path,
            "step,chosen_row,gamma,est_coherence,est_l1_loss,kappa,true_coherence,true_l1_loss",
            &records,
        )?;
        summary_rows.push(vec![
            f(cell.p),
            cell.seed.to_string(),
            cell.steps.to_string(),
            f(cell.initial_l1),
            f(cell.final_l1),
            f(cell.initial_coherence),
            f(cell.final_coherence),
        ]);
        out_cells.push(cell);
    }
    write_records_csv(
        &opts.out_dir.join(format!("weighting-trace_summary_{hash}.csv")),
        "p,seed,steps,initial_l1,final_l1,initial_coherence,final_coherence",
        &summary_rows,
    )?;

    if opts.svg {
        let seed0 = opts.seeds[0];
        let series: Vec<Series> = params
            .p_grid
            .iter()
            .map(|&p| {
                let pts = out_cells
                    .iter()
                    .filter(|c| c.p == p && c.seed == seed0)
                    .flat_map(|c| {
                        vec![(0.0, c.initial_l1), (c.steps as f64, c.final_l1)]
                    })
                    .collect();
                Series {
                    label: format!("p={p}"),
                    points: pts,
                }
            })
            .collect();
        write_line_chart(
            &opts.out_dir.join(format!("weighting-trace_{hash}.svg")),
            "l1 hinge loss before/after weighting",
            "step",
            "l1 loss",
            false,
            &series,
        )?;
    }
    Ok(out_cells)
}

// ---------------------------------------------------------------------------
// Weighting–completion rounds
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RoundsParams {
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub p: f64,
    pub rounds: usize,
    pub lambda_mult: f64,
    pub admm_max_iters: usize,
}

impl Default for RoundsParams {
    fn default() -> Self {
        RoundsParams {
            n1: 400,
            n2: 200,
            k: 8,
            p: 0.2,
            rounds: 2,
            lambda_mult: 1e-2,
            admm_max_iters: 600,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoundsCell {
    pub seed: u64,
    pub round: usize,
    /// Exact coherence of the row-weighted true matrix after this round's
    /// row descent.
    pub true_coherence: f64,
    pub true_l1: f64,
    /// Coherence of the round's recovered matrix.
    pub recovered_coherence: f64,
    pub error: f64,
}

pub fn run_rounds(params: &RoundsParams, opts: &HarnessOptions) -> Result<Vec<RoundsCell>> {
    opts.validate()?;
    let hash = config_hash(&[
        ("scenario", "rounds".into()),
        ("n1", params.n1.to_string()),
        ("n2", params.n2.to_string()),
        ("k", params.k.to_string()),
        ("p", params.p.to_string()),
        ("rounds", params.rounds.to_string()),
        ("seeds", format!("{:?}", opts.seeds)),
    ]);
    let cells: Result<Vec<Vec<RoundsCell>>> = opts
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<RoundsCell>> {
            let spec = GenSpec::new(params.n1, params.n2, params.k, seed);
            let l0 = gen_coherent_lowrank(&spec)?;
            let omega =
                sample_uniform(params.n1, params.n2, params.p, subseed(seed, "omega"))?;
            let obs = SparseObservation::from_mask(&l0, &omega)?;
            let scale = rms_scale(&obs);
            let mut wcfg = WeightingConfig::for_rank(params.k, 20.0 * params.p.sqrt());
            wcfg.seed = seed;
            let acfg = AdmmConfig::for_lambda(
                params.lambda_mult * scale,
                scale,
                params.admm_max_iters,
            );
            let out = levrec_core::completion::weighting_completion(
                &obs,
                params.k,
                params.rounds,
                &wcfg,
                &acfg,
            )?;
            let mut rows = Vec::new();
            for diag in &out.rounds {
                let (coh, l1) = true_row_state(&l0, &diag.row_weights, params.k)?;
                let err = match diag.round == out.rounds.len() {
                    true => relative_error(&out.result.recovered, &l0)?,
                    false => f64::NAN,
                };
                rows.push(RoundsCell {
                    seed,
                    round: diag.round,
                    true_coherence: coh,
                    true_l1: l1,
                    recovered_coherence: diag.coherence,
                    error: err,
                });
            }
            Ok(rows)
        })
        .collect();
    let cells: Vec<RoundsCell> = cells?.into_iter().flatten().collect();

    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.seed.to_string(),
                c.round.to_string(),
                f(c.true_coherence),
                f(c.true_l1),
                f(c.recovered_coherence),
                f(c.error),
            ]
        })
        .collect();
    write_records_csv(
        &opts.out_dir.join(format!("rounds_summary_{hash}.csv")),
        "seed,round,true_coherence,true_l1,recovered_coherence,error",
        &rows,
    )?;
    Ok(cells)
}

// ---------------------------------------------------------------------------
// Completion accuracy with tuned λ (unweighted vs Type 1 vs Type 2)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CompletionErrorParams {
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub p: f64,
    /// Noise level σ of the Gaussian(mean, σ²) addend; σ = 0 disables noise.
    pub sigma: f64,
    pub noise_fraction: f64,
    pub noise_mean: f64,
    pub lambda_mults: Vec<f64>,
    pub admm_max_iters: usize,
}

impl Default for CompletionErrorParams {
    fn default() -> Self {
        CompletionErrorParams {
            n1: 400,
            n2: 200,
            k: 8,
            p: 0.2,
            sigma: 0.0,
            noise_fraction: 0.5,
            noise_mean: 1.0,
            lambda_mults: LAMBDA_MULTS.to_vec(),
            admm_max_iters: 800,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionErrorCell {
    pub seed: u64,
    pub method: &'static str,
    pub lambda_mult: f64,
    pub error: f64,
}

pub fn run_completion_error(
    params: &CompletionErrorParams,
    opts: &HarnessOptions,
) -> Result<Vec<CompletionErrorCell>> {
    opts.validate()?;
    let hash = config_hash(&[
        ("scenario", "completion-error".into()),
        ("n1", params.n1.to_string()),
        ("n2", params.n2.to_string()),
        ("k", params.k.to_string()),
        ("p", params.p.to_string()),
        ("sigma", params.sigma.to_string()),
        ("seeds", format!("{:?}", opts.seeds)),
    ]);

    let cells: Result<Vec<Vec<CompletionErrorCell>>> = opts
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<CompletionErrorCell>> {
            let spec = GenSpec::new(params.n1, params.n2, params.k, seed);
            let l0 = gen_coherent_lowrank(&spec)?;
            let m = if params.sigma > 0.0 {
                levrec_core::datagen::add_gaussian_noise(
                    &l0,
                    params.noise_fraction,
                    params.sigma,
                    params.noise_mean,
                    subseed(seed, "noise"),
                )?
            } else {
                l0.clone()
            };
            let omega =
                sample_uniform(params.n1, params.n2, params.p, subseed(seed, "omega"))?;
            let obs = SparseObservation::from_mask(&m, &omega)?;
            let scale = rms_scale(&obs);
            let trimmed = trim(&obs, TrimMode::Subsample, subseed(seed, "trim"));
            let mut wcfg = WeightingConfig::for_rank(params.k, 20.0 * params.p.sqrt());
            wcfg.seed = seed;
            let row_targets = target_scores_uniform(params.n1, params.k);
            let col_targets = target_scores_uniform(params.n2, params.k);

            // Round-1 weights depend only on the observation.
            let (r1, _) = coordinate_descent(
                WeightingInput::Observation(&trimmed),
                params.k,
                &wcfg,
                &row_targets,
            )?;
            let trimmed_t = trimmed.transposed();
            let (c1, _) = coordinate_descent(
                WeightingInput::Observation(&trimmed_t),
                params.k,
                &wcfg,
                &col_targets,
            )?;
            let identity_r = DiagonalWeights::identity(params.n1);
            let identity_c = DiagonalWeights::identity(params.n2);

            let mut rows = Vec::new();
            for &mult in &params.lambda_mults {
                let acfg =
                    AdmmConfig::for_lambda(mult * scale, scale, params.admm_max_iters);
                let unweighted =
                    admm_weighted_complete(&obs, &identity_r, &identity_c, &acfg)?;
                rows.push(CompletionErrorCell {
                    seed,
                    method: "unweighted",
                    lambda_mult: mult,
                    error: relative_error(&unweighted.recovered, &l0)?,
                });

                let type1 = admm_weighted_complete(&obs, &r1, &c1, &acfg)?;
                rows.push(CompletionErrorCell {
                    seed,
                    method: "type1",
                    lambda_mult: mult,
                    error: relative_error(&type1.recovered, &l0)?,
                });

                // Type 2: re-weight from the Type-1 recovery, solve again.
                let (r2, _) = coordinate_descent(
                    WeightingInput::Matrix(&type1.recovered),
                    params.k,
                    &wcfg,
                    &row_targets,
                )?;
                let type1_t = type1.recovered.transpose();
                let (c2, _) = coordinate_descent(
                    WeightingInput::Matrix(&type1_t),
                    params.k,
                    &wcfg,
                    &col_targets,
                )?;
                let type2 = admm_weighted_complete(&obs, &r2, &c2, &acfg)?;
                rows.push(CompletionErrorCell {
                    seed,
                    method: "type2",
                    lambda_mult: mult,
                    error: relative_error(&type2.recovered, &l0)?,
                });
            }
            Ok(rows)
        })
        .collect();
    let cells: Vec<CompletionErrorCell> = cells?.into_iter().flatten().collect();

    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.seed.to_string(),
                c.method.to_string(),
                f(c.lambda_mult),
                f(c.error),
            ]
        })
        .collect();
    write_records_csv(
        &opts.out_dir.join(format!("completion-error_cells_{hash}.csv")),
        "seed,method,lambda_mult,error",
        &rows,
    )?;

    // Per-method medians of the per-seed best errors.
    let mut summary = Vec::new();
    for method in ["unweighted", "type1", "type2"] {
        let best = best_errors_by_seed(&cells, method, &opts.seeds);
        summary.push(vec![method.to_string(), f(median(best))]);
    }
    write_records_csv(
        &opts.out_dir.join(format!("completion-error_summary_{hash}.csv")),
        "method,median_best_error",
        &summary,
    )?;

    if opts.svg {
        let series: Vec<Series> = ["unweighted", "type1", "type2"]
            .iter()
            .map(|method| Series {
                label: method.to_string(),
                points: params
                    .lambda_mults
                    .iter()
                    .map(|&mult| {
                        let errs: Vec<f64> = cells
                            .iter()
                            .filter(|c| c.method == *method && c.lambda_mult == mult)
                            .map(|c| c.error)
                            .collect();
                        (mult.log10(), median(errs))
                    })
                    .collect(),
            })
            .collect();
        write_line_chart(
            &opts.out_dir.join(format!("completion-error_{hash}.svg")),
            "completion error vs lambda",
            "log10 lambda multiplier",
            "relative error",
            true,
            &series,
        )?;
    }
    Ok(cells)
}

/// Per-seed best (minimum over the λ grid) errors for one method.
pub fn best_errors_by_seed(
    cells: &[CompletionErrorCell],
    method: &str,
    seeds: &[u64],
) -> Vec<f64> {
    seeds
        .iter()
        .map(|&seed| {
            cells
                .iter()
                .filter(|c| c.seed == seed && c.method == method)
                .map(|c| c.error)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// RPCA weighting traces (vary corruption density / magnitude)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RpcaTraceParams {
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    /// (p, s) corruption cells to trace.
    pub grid: Vec<(f64, f64)>,
    pub accuracy_rho: f64,
}

impl Default for RpcaTraceParams {
    fn default() -> Self {
        RpcaTraceParams {
            n1: 300,
            n2: 200,
            k: 5,
            grid: vec![(0.05, 10.0), (0.1, 10.0), (0.2, 10.0), (0.1, 1.0), (0.1, 100.0)],
            accuracy_rho: 20.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RpcaTraceCell {
    pub p: f64,
    pub s: f64,
    pub seed: u64,
    pub initial_coherence_d: f64,
    pub final_coherence_d: f64,
    pub initial_coherence_l0: f64,
    pub final_coherence_l0: f64,
}

pub fn run_rpca_trace(
    params: &RpcaTraceParams,
    opts: &HarnessOptions,
) -> Result<Vec<RpcaTraceCell>> {
    opts.validate()?;
    let hash = config_hash(&[
        ("scenario", "rpca-trace".into()),
        ("n1", params.n1.to_string()),
        ("n2", params.n2.to_string()),
        ("k", params.k.to_string()),
        ("grid", format!("{:?}", params.grid)),
        ("seeds", format!("{:?}", opts.seeds)),
    ]);
    let mut jobs = Vec::new();
    for &(p, s) in &params.grid {
        for &seed in &opts.seeds {
            jobs.push((p, s, seed));
        }
    }
    let cells: Result<Vec<(RpcaTraceCell, Vec<Vec<String>>)>> = jobs
        .par_iter()
        .map(|&(p, s, seed)| -> Result<_> {
            let spec = GenSpec::new(params.n1, params.n2, params.k, seed);
            let l0 = gen_coherent_lowrank(&spec)?;
            let s0 = gen_sparse_corruption(params.n1, params.n2, p, s, subseed(seed, "s0"))?;
            let d = &l0 + &s0;
            let mut wcfg = WeightingConfig::for_rank(params.k, params.accuracy_rho);
            wcfg.seed = seed;
            let targets = target_scores_uniform(params.n1, params.k);
            let (_, traces) =
                coordinate_descent(WeightingInput::Matrix(&d), params.k, &wcfg, &targets)?;

            // Replay against both what the algorithm sees (D) and the truth.
            let mut w = DiagonalWeights::identity(params.n1);
            let mut states_d = vec![true_row_state(&d, &w, params.k)?];
            let mut states_l0 = vec![true_row_state(&l0, &w, params.k)?];
            let mut records = vec![vec![
                "0".into(),
                String::new(),
                String::new(),
                f(states_d[0].0),
                f(states_l0[0].0),
            ]];
            for t in &traces {
                w.apply_step(t.chosen_row, t.gamma);
                states_d.push(true_row_state(&d, &w, params.k)?);
                states_l0.push(true_row_state(&l0, &w, params.k)?);
                records.push(vec![
                    t.step.to_string(),
                    t.chosen_row.to_string(),
                    f(t.gamma),
                    f(states_d.last().unwrap().0),
                    f(states_l0.last().unwrap().0),
                ]);
            }
            let cell = RpcaTraceCell {
                p,
                s,
                seed,
                initial_coherence_d: states_d[0].0,
                final_coherence_d: states_d.last().unwrap().0,
                initial_coherence_l0: states_l0[0].0,
                final_coherence_l0: states_l0.last().unwrap().0,
            };
            Ok((cell, records))
        })
        .collect();
    let cells = cells?;

    let mut summary = Vec::new();
    let mut out = Vec::new();
    for ((p, s, seed), (cell, records)) in jobs.iter().zip(cells) {
        write_records_csv(
            &opts
                .out_dir
                .join(format!("rpca-trace_p{p}_s{s}_seed{seed}_{hash}.csv")),
            "step,chosen_row,gamma,coherence_d,coherence_l0",
            &records,
        )?;
        summary.push(vec![
            f(cell.p),
            f(cell.s),
            cell.seed.to_string(),
            f(cell.initial_coherence_d),
            f(cell.final_coherence_d),
            f(cell.initial_coherence_l0),
            f(cell.final_coherence_l0),
        ]);
        out.push(cell);
    }
    write_records_csv(
        &opts.out_dir.join(format!("rpca-trace_summary_{hash}.csv")),
        "p,s,seed,initial_coherence_d,final_coherence_d,initial_coherence_l0,final_coherence_l0",
        &summary,
    )?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// RPCA recovery error (unweighted vs Type 1 vs Type 2)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RpcaErrorParams {
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub p_grid: Vec<f64>,
    pub s: f64,
    pub accuracy_rho: f64,
    pub rpca: RpcaConfig,
}

impl Default for RpcaErrorParams {
    fn default() -> Self {
        RpcaErrorParams {
            n1: 300,
            n2: 200,
            k: 5,
            p_grid: vec![0.05, 0.1, 0.2],
            s: 10.0,
            accuracy_rho: 20.0,
            rpca: RpcaConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RpcaErrorCell {
    pub p: f64,
    pub seed: u64,
    pub method: &'static str,
    pub error: f64,
    pub converged: bool,
}

pub fn run_rpca_error(
    params: &RpcaErrorParams,
    opts: &HarnessOptions,
) -> Result<Vec<RpcaErrorCell>> {
    opts.validate()?;
    let hash = config_hash(&[
        ("scenario", "rpca-error".into()),
        ("n1", params.n1.to_string()),
        ("n2", params.n2.to_string()),
        ("k", params.k.to_string()),
        ("p_grid", format!("{:?}", params.p_grid)),
        ("s", params.s.to_string()),
        ("seeds", format!("{:?}", opts.seeds)),
    ]);
    let mut jobs = Vec::new();
    for &p in &params.p_grid {
        for &seed in &opts.seeds {
            jobs.push((p, seed));
        }
    }
    let cells: Result<Vec<Vec<RpcaErrorCell>>> = jobs
        .par_iter()
        .map(|&(p, seed)| -> Result<Vec<RpcaErrorCell>> {
            let spec = GenSpec::new(params.n1, params.n2, params.k, seed);
            let l0 = gen_coherent_lowrank(&spec)?;
            let s0 =
                gen_sparse_corruption(params.n1, params.n2, p, params.s, subseed(seed, "s0"))?;
            let d = &l0 + &s0;
            let mut wcfg = WeightingConfig::for_rank(params.k, params.accuracy_rho);
            wcfg.seed = seed;

            let run = |name: &'static str, res: RpcaResult| -> Result<RpcaErrorCell> {
                Ok(RpcaErrorCell {
                    p,
                    seed,
                    method: name,
                    error: relative_error(&res.low_rank, &l0)?,
                    converged: res.converged,
                })
            };
            Ok(vec![
                run("unweighted", rpca(&d, &params.rpca)?)?,
                run(
                    "type1",
                    weighted_rpca(&d, params.k, RpcaVariant::Type1, &wcfg, &params.rpca)?,
                )?,
                run(
                    "type2",
                    weighted_rpca(&d, params.k, RpcaVariant::Type2, &wcfg, &params.rpca)?,
                )?,
            ])
        })
        .collect();
    let cells: Vec<RpcaErrorCell> = cells?.into_iter().flatten().collect();

    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                f(c.p),
                c.seed.to_string(),
                c.method.to_string(),
                f(c.error),
                c.converged.to_string(),
            ]
        })
        .collect();
    write_records_csv(
        &opts.out_dir.join(format!("rpca-error_cells_{hash}.csv")),
        "p,seed,method,error,converged",
        &rows,
    )?;

    let mut summary = Vec::new();
    for &p in &params.p_grid {
        for method in ["unweighted", "type1", "type2"] {
            let errs: Vec<f64> = cells
                .iter()
                .filter(|c| c.p == p && c.method == method)
                .map(|c| c.error)
                .collect();
            summary.push(vec![f(p), method.to_string(), f(median(errs))]);
        }
    }
    write_records_csv(
        &opts.out_dir.join(format!("rpca-error_summary_{hash}.csv")),
        "p,method,median_error",
        &summary,
    )?;
    Ok(cells)
}

// ---------------------------------------------------------------------------
// Loss/step-size comparison on exact leverage scores
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LossCompareParams {
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub max_steps: usize,
    pub grid: usize,
}

impl Default for LossCompareParams {
    fn default() -> Self {
        LossCompareParams {
            n1: 100,
            n2: 100,
            k: 5,
            max_steps: 400,
            grid: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LossCompareCell {
    pub seed: u64,
    pub variant: &'static str,
    pub steps: usize,
    pub initial_l1: f64,
    pub final_l1: f64,
    pub final_l2: f64,
    pub final_linf: f64,
    /// Steps until the ℓ1 loss first fell to half its initial value
    /// (`usize::MAX` when it never did).
    pub steps_to_half_l1: usize,
}

pub fn run_loss_compare(
    params: &LossCompareParams,
    opts: &HarnessOptions,
) -> Result<Vec<LossCompareCell>> {
    opts.validate()?;
    let hash = config_hash(&[
        ("scenario", "loss-compare".into()),
        ("n1", params.n1.to_string()),
        ("k", params.k.to_string()),
        ("max_steps", params.max_steps.to_string()),
        ("seeds", format!("{:?}", opts.seeds)),
    ]);
    let variants: [(&'static str, LossNorm); 3] = [
        ("l1", LossNorm::L1),
        ("l2", LossNorm::L2),
        ("linf", LossNorm::LInf),
    ];
    let cells: Result<Vec<Vec<LossCompareCell>>> = opts
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<LossCompareCell>> {
            let spec = GenSpec::new(params.n1, params.n2, params.k, seed);
            let m = gen_coherent_lowrank(&spec)?;
            let targets = target_scores_uniform(params.n1, params.k);
            let f0 = truncated_svd(&m, params.k)?;
            let p0 = compute_leverage(&f0, params.k, false)?;
            let initial_l1 = hinge_loss(p0.scores(), &targets, LossNorm::L1);

            let mut rows = Vec::new();
            for (name, q) in variants {
                let mut cfg = WeightingConfig::for_rank(params.k, 20.0);
                cfg.max_steps = params.max_steps;
                let (_, traces) =
                    exact_coordinate_descent(&m, params.k, &targets, q, params.grid, &cfg)?;
                let records: Vec<Vec<String>> = std::iter::once(vec![
                    "0".into(),
                    String::new(),
                    String::new(),
                    f(initial_l1),
                    String::new(),
                    String::new(),
                ])
                .chain(traces.iter().map(|t| {
                    vec![
                        t.step.to_string(),
                        t.chosen_row.to_string(),
                        f(t.gamma),
                        f(t.l1_loss),
                        f(t.l2_loss),
                        f(t.linf_loss),
                    ]
                }))
                .collect();
                write_records_csv(
                    &opts
                        .out_dir
                        .join(format!("loss-compare_{name}_seed{seed}_{hash}.csv")),
                    "step,chosen_row,gamma,l1_loss,l2_loss,linf_loss",
                    &records,
                )?;
                let steps_to_half = traces
                    .iter()
                    .position(|t| t.l1_loss <= 0.5 * initial_l1)
                    .map(|i| i + 1)
                    .unwrap_or(usize::MAX);
                rows.push(LossCompareCell {
                    seed,
                    variant: name,
                    steps: traces.len(),
                    initial_l1,
                    final_l1: traces.last().map(|t| t.l1_loss).unwrap_or(initial_l1),
                    final_l2: traces.last().map(|t| t.l2_loss).unwrap_or(f64::NAN),
                    final_linf: traces.last().map(|t| t.linf_loss).unwrap_or(f64::NAN),
                    steps_to_half_l1: steps_to_half,
                });
            }
            Ok(rows)
        })
        .collect();
    let cells: Vec<LossCompareCell> = cells?.into_iter().flatten().collect();

    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.seed.to_string(),
                c.variant.to_string(),
                c.steps.to_string(),
                f(c.initial_l1),
                f(c.final_l1),
                f(c.final_l2),
                f(c.final_linf),
                if c.steps_to_half_l1 == usize::MAX {
                    "never".into()
                } else {
                    c.steps_to_half_l1.to_string()
                },
            ]
        })
        .collect();
    write_records_csv(
        &opts.out_dir.join(format!("loss-compare_summary_{hash}.csv")),
        "seed,variant,steps,initial_l1,final_l1,final_l2,final_linf,steps_to_half_l1",
        &rows,
    )?;
    Ok(cells)
}

/// Simple consistency helper used by the CLI round-trip paths: recover a
/// matrix end to end with identity weights and return the error against a
/// reference read from disk.
pub fn pipeline_error(
    obs: &SparseObservation,
    reference: &DMatrix<f64>,
    lambda_mult: f64,
    max_iters: usize,
) -> Result<f64> {
    let scale = rms_scale(obs);
    let acfg = AdmmConfig::for_lambda(lambda_mult * scale, scale, max_iters);
    let res = admm_weighted_complete(
        obs,
        &DiagonalWeights::identity(obs.n_rows()),
        &DiagonalWeights::identity(obs.n_cols()),
        &acfg,
    )?;
    Ok(relative_error(&res.recovered, reference)?)
}

/// Sanity guard shared by RPCA harness paths.
pub fn rpca_residual(d: &DMatrix<f64>, res: &RpcaResult) -> f64 {
    fro_norm(&(d - &res.low_rank - &res.sparse)) / fro_norm(d).max(1e-300)
}
