//! Row weighting by coordinate descent on the ℓq hinge loss.
//!
//! A diagonal weight matrix `R` is built one rank-one step at a time: pick
//! a row whose leverage score exceeds its target, scale it by `√(1−γ)`,
//! repeat. Step sizes come from closed forms — [`gamma_exact`] when the
//! score is known exactly, [`gamma_medium`]/[`gamma_large`] when only an
//! estimate with additive error `1/(2ρ)` is available — or from a grid
//! line search over the loss ([`line_search_step`]).
//!
//! Column weighting is the same machinery applied to the transpose.

use crate::error::{Error, Result};
use crate::leverage::{
    compute_leverage, rank_one_update, scaled_bases, updated_scores, LeverageProfile,
};
use crate::linalg::{condensed_svd, truncated_svd, SparseObservation};
use nalgebra::DMatrix;
use std::collections::BTreeSet;

/// Tolerance below which a hinge violation or loss improvement counts as zero.
const VIOLATION_EPS: f64 = 1e-12;

/// Which ℓq hinge loss drives the descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossNorm {
    L1,
    L2,
    LInf,
}

/// Target leverage scores μ_i*, with rows whose target fell below zero
/// marked abandoned (they get weight zero and leave the loss sums).
#[derive(Debug, Clone)]
pub struct TargetScores {
    values: Vec<f64>,
    abandoned: BTreeSet<usize>,
}

impl TargetScores {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn abandoned(&self) -> &BTreeSet<usize> {
        &self.abandoned
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Uniform sampling targets: μ_i* = k/n1 for every row.
pub fn target_scores_uniform(n1: usize, k: usize) -> TargetScores {
    debug_assert!(k <= n1);
    TargetScores {
        values: vec![k as f64 / n1 as f64; n1],
        abandoned: BTreeSet::new(),
    }
}

/// Targets aligned with observed row marginals:
/// μ_i* = 2k·p_i / Σ p − k/n1. Negative targets mark the row abandoned.
pub fn target_scores_from_marginals(row_marginals: &[f64], k: usize) -> Result<TargetScores> {
    if row_marginals.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(Error::InvalidMarginals);
    }
    let total: f64 = row_marginals.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidMarginals);
    }
    let n1 = row_marginals.len() as f64;
    let k_f = k as f64;
    let values: Vec<f64> = row_marginals
        .iter()
        .map(|&p| 2.0 * k_f * p / total - k_f / n1)
        .collect();
    let abandoned = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < 0.0)
        .map(|(i, _)| i)
        .collect();
    Ok(TargetScores { values, abandoned })
}

/// ℓq hinge loss `(Σ_i max{μ_i − μ_i*, 0}^q)^{1/q}` (max over i for q=∞),
/// skipping abandoned rows.
pub fn hinge_loss(scores: &[f64], targets: &TargetScores, q: LossNorm) -> f64 {
    debug_assert_eq!(scores.len(), targets.len());
    let terms = scores
        .iter()
        .zip(targets.values.iter())
        .enumerate()
        .filter(|(i, _)| !targets.abandoned.contains(i))
        .map(|(_, (&mu, &t))| (mu - t).max(0.0));
    match q {
        LossNorm::L1 => terms.sum(),
        LossNorm::L2 => terms.map(|v| v * v).sum::<f64>().sqrt(),
        LossNorm::LInf => terms.fold(0.0, f64::max),
    }
}

/// Step that lands the i-th leverage score exactly on `mu_target`:
/// γ = (1 − μ'/μ_i) / (1 − μ').
pub fn gamma_exact(mu_i: f64, mu_target: f64) -> Result<f64> {
    if !(mu_i > 0.0 && mu_i < 1.0) || !(mu_target > 0.0 && mu_target <= mu_i) {
        return Err(Error::InvalidLeverage(format!(
            "gamma_exact needs 0 < target <= mu < 1, got mu = {mu_i}, target = {mu_target}"
        )));
    }
    Ok((1.0 - mu_target / mu_i) / (1.0 - mu_target))
}

/// Step for an estimated score in the medium band `[1/ρ, 1−1/ρ]`:
/// γ = (n1 − 2k/μ̂) / (n1 − 2k). Drives the true score into
/// `(k/n1, 4k/n1·(1+o(1)))` when the estimate has additive error ≤ 1/(2ρ);
/// with exact estimates it lands on 2k/n1.
pub fn gamma_medium(mu_hat: f64, n1: usize, k: usize) -> Result<f64> {
    if n1 <= 2 * k {
        return Err(Error::InvalidDims(format!("need n1 > 2k, got n1 = {n1}, k = {k}")));
    }
    if !(mu_hat > 0.0 && mu_hat < 1.0) {
        return Err(Error::InvalidLeverage(format!(
            "gamma_medium needs mu_hat in (0, 1), got {mu_hat}"
        )));
    }
    let n1 = n1 as f64;
    let k = k as f64;
    let gamma = (n1 - 2.0 * k / mu_hat) / (n1 - 2.0 * k);
    if gamma < 0.0 {
        return Err(Error::InvalidLeverage(format!(
            "mu_hat = {mu_hat} is below 2k/n1; the medium step would be negative"
        )));
    }
    Ok(gamma)
}

/// Conservative step for a score estimated close to one,
/// μ̂ ∈ (1−1/ρ, 1): γ = (ρ − 1/(μ̂ − 1/(2ρ))) / (ρ − 1). The true score
/// after weighting stays in `[1/ρ, μ_i(M))`.
pub fn gamma_large(mu_hat: f64, accuracy_rho: f64) -> Result<f64> {
    if accuracy_rho <= 1.0 {
        return Err(Error::InvalidLeverage(format!(
            "accuracy_rho must exceed 1, got {accuracy_rho}"
        )));
    }
    if !(mu_hat < 1.0) || mu_hat < 1.0 - 1.0 / accuracy_rho - 1e-12 {
        return Err(Error::InvalidLeverage(format!(
            "gamma_large needs mu_hat in [1 - 1/rho, 1), got {mu_hat}"
        )));
    }
    let shifted = mu_hat - 0.5 / accuracy_rho;
    if shifted * accuracy_rho < 1.0 - 1e-12 {
        return Err(Error::InvalidLeverage(format!(
            "mu_hat - 1/(2rho) = {shifted} falls below 1/rho; no safe step exists"
        )));
    }
    Ok(((accuracy_rho - 1.0 / shifted) / (accuracy_rho - 1.0)).max(0.0))
}

/// Diagonal of a row (or column) weight matrix. Every entry starts at 1
/// and only ever shrinks by factors √(1−γ); abandoned rows sit at exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalWeights {
    values: Vec<f64>,
}

impl DiagonalWeights {
    pub fn identity(n: usize) -> Self {
        DiagonalWeights { values: vec![1.0; n] }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| !v.is_finite() || !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidInput(
                "diagonal weights must be finite and in [0, 1]".into(),
            ));
        }
        Ok(DiagonalWeights { values })
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

    pub fn is_identity(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0)
    }

    /// Multiply entry `i` by √(1−γ).
    pub fn apply_step(&mut self, i: usize, gamma: f64) {
        self.values[i] *= (1.0 - gamma).sqrt();
    }

    pub fn zero_out(&mut self, i: usize) {
        self.values[i] = 0.0;
    }

    /// diag(w)·M.
    pub fn scale_rows_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        debug_assert_eq!(self.values.len(), m.nrows());
        let mut out = m.clone();
        for (i, &w) in self.values.iter().enumerate() {
            out.row_mut(i).scale_mut(w);
        }
        out
    }
}

/// Configuration for [`coordinate_descent`].
#[derive(Debug, Clone)]
pub struct WeightingConfig {
    /// Estimation accuracy ρ; rows with estimated score ≥ 1/ρ are violators.
    pub accuracy_rho: f64,
    /// Step budget T (the experiments use T = k²).
    pub max_steps: usize,
    /// Which hinge loss the traces report.
    pub loss_q: LossNorm,
    /// Fresh-SVD refresh cadence for chained closed-form updates.
    pub refresh_period: usize,
    pub seed: u64,
}

impl WeightingConfig {
    /// Defaults for target rank k: T = k², ℓ1 loss, refresh every 50 steps.
    pub fn for_rank(k: usize, accuracy_rho: f64) -> Self {
        WeightingConfig {
            accuracy_rho,
            max_steps: k * k,
            loss_q: LossNorm::L1,
            refresh_period: 50,
            seed: 0,
        }
    }
}

/// Per-step trace of the descent (the columns of the trace CSV).
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub step: usize,
    pub chosen_row: usize,
    pub gamma: f64,
    /// Row coherence (n1/k)·max μ̂ of the current weighted estimate.
    pub coherence: f64,
    /// ℓ1 hinge loss of the estimated scores against the targets.
    pub l1_loss: f64,
    /// Condition number σ_1/σ_k of the weighted estimate.
    pub kappa: f64,
}

/// Input to [`coordinate_descent`]: a (pre-trimmed) partial observation,
/// or a fully known matrix whose leverage is computed exactly.
pub enum WeightingInput<'a> {
    Observation(&'a SparseObservation),
    Matrix(&'a DMatrix<f64>),
}

impl<'a> From<&'a SparseObservation> for WeightingInput<'a> {
    fn from(o: &'a SparseObservation) -> Self {
        WeightingInput::Observation(o)
    }
}

impl<'a> From<&'a DMatrix<f64>> for WeightingInput<'a> {
    fn from(m: &'a DMatrix<f64>) -> Self {
        WeightingInput::Matrix(m)
    }
}

enum Working {
    Sparse(SparseObservation),
    Dense(DMatrix<f64>),
}

/// Coordinate descent using per-step re-estimated leverage scores.
///
/// Starting from `R = I`, each step takes the rank-k truncated SVD of
/// `R·M̃`, picks the largest estimated violator `μ̂_i ≥ 1/ρ` (ties to the
/// smallest index), chooses γ by [`gamma_medium`] in the medium band and
/// [`gamma_large`] above it, and multiplies `R_ii` by `√(1−γ)`. Stops when
/// no violator remains or the step budget is exhausted.
///
/// Sparse inputs are taken as already trimmed (callers holding a raw
/// observation trim first). Dense inputs of rank r < n2 are reduced once
/// to the σ-scaled basis `U·Σ`, so each step factors an n1×r matrix
/// instead of n1×n2.
pub fn coordinate_descent(
    input: WeightingInput<'_>,
    k: usize,
    cfg: &WeightingConfig,
    targets: &TargetScores,
) -> Result<(DiagonalWeights, Vec<StepTrace>)> {
    let (n1, n2) = match &input {
        WeightingInput::Observation(o) => (o.n_rows(), o.n_cols()),
        WeightingInput::Matrix(m) => (m.nrows(), m.ncols()),
    };
    let limit = n1.min(n2);
    if k == 0 || k > limit {
        return Err(Error::InvalidRank { requested: k, limit });
    }
    if targets.len() != n1 {
        return Err(Error::ShapeMismatch {
            left: format!("targets of length {}", targets.len()),
            right: format!("{n1} rows"),
        });
    }
    if cfg.accuracy_rho <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "accuracy_rho must exceed 1, got {}",
            cfg.accuracy_rho
        )));
    }

    let working = match input {
        WeightingInput::Observation(o) => {
            if o.nnz() == 0 {
                return Err(Error::DegenerateObservation("empty observation set".into()));
            }
            Working::Sparse(o.clone())
        }
        WeightingInput::Matrix(m) => {
            let f = condensed_svd(m, 1e-12)?;
            if f.rank() < k {
                return Err(Error::DegenerateObservation(format!(
                    "input rank {} below target rank {k}",
                    f.rank()
                )));
            }
            if f.rank() < n2 {
                Working::Dense(scaled_bases(&f))
            } else {
                Working::Dense(m.clone())
            }
        }
    };

    let mut weights = DiagonalWeights::identity(n1);
    for &i in targets.abandoned() {
        weights.zero_out(i);
    }

    let rho = cfg.accuracy_rho;
    let violator_floor = 1.0 / rho;
    let large_band = 1.0 - 1.0 / rho;
    let mut traces = Vec::new();

    for step in 1..=cfg.max_steps {
        let factors = match &working {
            Working::Sparse(o) => truncated_svd(&o.scale_rows(weights.values()), k)?,
            Working::Dense(b) => truncated_svd(&weights.scale_rows_dense(b), k)?,
        };
        let sigma = factors.singular_values();
        if sigma[k - 1] <= 1e-14 * sigma[0].max(1e-300) {
            return Err(Error::DegenerateObservation(format!(
                "weighted matrix lost rank {k} at step {step}"
            )));
        }
        let profile = compute_leverage(&factors, k, false)?;
        let scores = profile.scores();
        let kappa = sigma[0] / sigma[k - 1];
        let coherence = n1 as f64 / k as f64 * profile.max_score();
        let l1_loss = hinge_loss(scores, targets, LossNorm::L1);

        let violator = scores
            .iter()
            .enumerate()
            .filter(|&(i, &mu)| {
                !targets.abandoned().contains(&i)
                    && weights.values()[i] > 0.0
                    && mu >= violator_floor
            })
            // largest score wins; ties go to the smallest index
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)));

        let Some((row, &mu_hat)) = violator else {
            break;
        };

        let gamma = if mu_hat >= 1.0 {
            // Estimation error can push a score to 1 or past it; clamp into
            // the domain of the large-score rule.
            gamma_large(1.0 - 0.5 / rho, rho)?
        } else if mu_hat > large_band {
            gamma_large(mu_hat, rho)?
        } else {
            match gamma_medium(mu_hat, n1, k) {
                Ok(g) => g,
                // The largest violator sits below 2k/n1: no productive
                // medium step exists, so the descent is done.
                Err(Error::InvalidLeverage(_)) => break,
                Err(e) => return Err(e),
            }
        };
        if gamma <= VIOLATION_EPS {
            break;
        }
        weights.apply_step(row, gamma);
        traces.push(StepTrace {
            step,
            chosen_row: row,
            gamma,
            coherence,
            l1_loss,
            kappa,
        });
    }

    Ok((weights, traces))
}

/// One line-search step on a known leverage profile.
///
/// For q = 1 the optimal step has the closed form
/// γ = (1 − μ_i*/μ_i)/(1 − μ_i*), which sends μ_i exactly onto its target.
/// For q ∈ {2, ∞} the step is the argmin of the loss over the grid
/// γ ∈ {1/grid, …, (grid−1)/grid}. Returns 0 when no step improves the
/// loss.
pub fn line_search_step(
    p: &LeverageProfile,
    i: usize,
    q: LossNorm,
    targets: &TargetScores,
    grid: usize,
) -> Result<f64> {
    if p.cross().is_none() {
        return Err(Error::NeedsCross);
    }
    if targets.abandoned().contains(&i) {
        return Ok(0.0);
    }
    let mu_i = p.scores()[i];
    let target = targets.values()[i];
    let current = hinge_loss(p.scores(), targets, q);
    match q {
        LossNorm::L1 => {
            if mu_i <= target + VIOLATION_EPS || target <= 0.0 || mu_i >= 1.0 {
                return Ok(0.0);
            }
            let gamma = gamma_exact(mu_i, target)?;
            let probe = updated_scores(p, i, gamma)?;
            if hinge_loss(&probe, targets, q) < current - VIOLATION_EPS {
                Ok(gamma)
            } else {
                Ok(0.0)
            }
        }
        LossNorm::L2 | LossNorm::LInf => {
            if grid < 2 {
                return Err(Error::InvalidInput("line-search grid needs >= 2 points".into()));
            }
            let mut best = (0.0f64, current);
            for g in 1..grid {
                let gamma = g as f64 / grid as f64;
                let probe = updated_scores(p, i, gamma)?;
                let loss = hinge_loss(&probe, targets, q);
                if loss < best.1 - VIOLATION_EPS {
                    best = (gamma, loss);
                }
            }
            Ok(best.0)
        }
    }
}

/// Trace of one exact-leverage descent step.
#[derive(Debug, Clone)]
pub struct ExactStepTrace {
    pub step: usize,
    pub chosen_row: usize,
    pub gamma: f64,
    pub l1_loss: f64,
    pub l2_loss: f64,
    pub linf_loss: f64,
    pub coherence: f64,
}

/// Coordinate descent with *exact* leverage scores, chaining the
/// closed-form rank-one updates and refreshing from a fresh SVD every
/// `cfg.refresh_period` steps to shed floating-point drift.
///
/// Violators (μ_i > μ_i*) are tried in decreasing score order; the first
/// with a positive line-search step is taken. Stops when no violator can
/// make progress — which for the ℓ∞ loss can happen while violations
/// remain.
pub fn exact_coordinate_descent(
    m: &DMatrix<f64>,
    k: usize,
    targets: &TargetScores,
    q: LossNorm,
    grid: usize,
    cfg: &WeightingConfig,
) -> Result<(DiagonalWeights, Vec<ExactStepTrace>)> {
    let n1 = m.nrows();
    if targets.len() != n1 {
        return Err(Error::ShapeMismatch {
            left: format!("targets of length {}", targets.len()),
            right: format!("{n1} rows"),
        });
    }
    let mut weights = DiagonalWeights::identity(n1);
    for &i in targets.abandoned() {
        weights.zero_out(i);
    }
    let refresh = |w: &DiagonalWeights| -> Result<LeverageProfile> {
        let f = truncated_svd(&w.scale_rows_dense(m), k)?;
        compute_leverage(&f, k, true)
    };
    let mut profile = refresh(&weights)?;
    let mut traces = Vec::new();
    let mut since_refresh = 0usize;

    for step in 1..=cfg.max_steps {
        let mut violators: Vec<(usize, f64)> = profile
            .scores()
            .iter()
            .enumerate()
            .filter(|&(i, &mu)| {
                !targets.abandoned().contains(&i) && mu > targets.values()[i] + VIOLATION_EPS
            })
            .map(|(i, &mu)| (i, mu))
            .collect();
        violators.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut taken = None;
        for (row, _) in violators {
            let gamma = line_search_step(&profile, row, q, targets, grid)?;
            if gamma > 0.0 {
                taken = Some((row, gamma));
                break;
            }
        }
        let Some((row, gamma)) = taken else {
            break; // no violator, or the loss is stuck (possible for ℓ∞)
        };
        profile = rank_one_update(&profile, row, gamma)?;
        weights.apply_step(row, gamma);
        since_refresh += 1;
        if since_refresh >= cfg.refresh_period {
            profile = refresh(&weights)?;
            since_refresh = 0;
        }
        traces.push(ExactStepTrace {
            step,
            chosen_row: row,
            gamma,
            l1_loss: hinge_loss(profile.scores(), targets, LossNorm::L1),
            l2_loss: hinge_loss(profile.scores(), targets, LossNorm::L2),
            linf_loss: hinge_loss(profile.scores(), targets, LossNorm::LInf),
            coherence: n1 as f64 / k as f64 * profile.max_score(),
        });
    }
    Ok((weights, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_lowrank(n1: usize, n2: usize, r: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n1, r, |_, _| rng.gen_range(-1.0..1.0));
        let c = DMatrix::from_fn(n2, r, |_, _| rng.gen_range(-1.0..1.0));
        b * c.transpose()
    }

    /// One very heavy row on top of an otherwise flat low-rank matrix.
    fn coherent_matrix(n1: usize, n2: usize, r: usize, seed: u64) -> DMatrix<f64> {
        let mut m = random_lowrank(n1, n2, r, seed);
        m.row_mut(0).scale_mut(20.0);
        m
    }

    fn exact_profile(m: &DMatrix<f64>, k: usize) -> LeverageProfile {
        compute_leverage(&truncated_svd(m, k).unwrap(), k, true).unwrap()
    }

    fn heaviest(p: &LeverageProfile) -> (usize, f64) {
        p.scores()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, &mu)| (i, mu))
            .unwrap()
    }

    #[test]
    fn uniform_targets() {
        let t = target_scores_uniform(100, 5);
        assert!(t.values().iter().all(|&v| (v - 0.05).abs() <= 1e-15));
        assert!(t.abandoned().is_empty());
        let t1 = target_scores_uniform(7, 7);
        assert!(t1.values().iter().all(|&v| (v - 1.0).abs() <= 1e-15));
        let t2 = target_scores_uniform(1000, 20);
        assert!(t2.values().iter().all(|&v| (v - 0.02).abs() <= 1e-15));
    }

    #[test]
    fn marginal_targets() {
        // Uniform marginals reduce to the uniform case k/n1.
        let t = target_scores_from_marginals(&[0.3; 10], 2).unwrap();
        assert!(t.values().iter().all(|&v| (v - 0.2).abs() <= 1e-12));

        // One row at twice the average marginal: μ* = 4k/n1 − k/n1 = 3k/n1.
        // With the others at 1, x = 2·mean solves to x = 2(n1−1)/(n1−2).
        let k = 2;
        let n1 = 12;
        let mut marg = vec![1.0; n1];
        marg[3] = 2.0 * (n1 as f64 - 1.0) / (n1 as f64 - 2.0);
        let t = target_scores_from_marginals(&marg, k).unwrap();
        let expect = 3.0 * k as f64 / n1 as f64;
        assert!((t.values()[3] - expect).abs() <= 1e-12, "got {}", t.values()[3]);

        // A marginal below half the average goes negative and is abandoned.
        let mut low = vec![1.0; 10];
        low[7] = 0.3;
        let t = target_scores_from_marginals(&low, 2).unwrap();
        assert!(t.values()[7] < 0.0);
        assert!(t.abandoned().contains(&7));

        assert!(matches!(
            target_scores_from_marginals(&[0.0; 4], 1),
            Err(Error::InvalidMarginals)
        ));
    }

    #[test]
    fn hinge_loss_examples() {
        let t = target_scores_uniform(3, 1);
        let mu = [0.6, 0.2, 0.2];
        let expect = 0.6 - 1.0 / 3.0;
        assert!((hinge_loss(&mu, &t, LossNorm::L1) - expect).abs() <= 1e-12);
        assert!((hinge_loss(&mu, &t, LossNorm::LInf) - expect).abs() <= 1e-12);
        assert!((hinge_loss(&mu, &t, LossNorm::L2) - expect).abs() <= 1e-12);
        let exact = [1.0 / 3.0; 3];
        assert_eq!(hinge_loss(&exact, &t, LossNorm::L1), 0.0);
    }

    #[test]
    fn gamma_exact_values() {
        assert!((gamma_exact(0.5, 0.25).unwrap() - 2.0 / 3.0).abs() <= 1e-15);
        assert_eq!(gamma_exact(0.4, 0.4).unwrap(), 0.0);
        assert!(gamma_exact(0.5, 0.6).is_err());
        assert!(gamma_exact(1.0, 0.5).is_err());
    }

    #[test]
    fn gamma_exact_round_trip_via_svd() {
        // Send the heaviest row of a rank-3 matrix to μ' = 0.1 and verify
        // with a fresh factorization of the explicitly weighted matrix.
        let m = coherent_matrix(12, 8, 3, 3);
        let p = exact_profile(&m, 3);
        let (i, mu) = heaviest(&p);
        let gamma = gamma_exact(mu, 0.1).unwrap();
        let mut w = m.clone();
        w.row_mut(i).scale_mut((1.0 - gamma).sqrt());
        let after = exact_profile(&w, 3);
        assert!((after.scores()[i] - 0.1).abs() <= 1e-8, "mu' = {}", after.scores()[i]);
    }

    #[test]
    fn gamma_medium_values() {
        let g = gamma_medium(0.5, 1000, 20).unwrap();
        assert!((g - (1000.0 - 80.0) / 960.0).abs() <= 1e-12);
        // Numerator vanishes at mu_hat = 2k/n1.
        assert!(gamma_medium(0.04, 1000, 20).unwrap().abs() <= 1e-12);
        assert!(matches!(gamma_medium(0.5, 40, 20), Err(Error::InvalidDims(_))));
        assert!(gamma_medium(0.01, 1000, 20).is_err());
    }

    #[test]
    fn gamma_medium_lands_at_twice_target() {
        // With exact estimates the medium step sends μ_i to exactly 2k/n1.
        let m = coherent_matrix(60, 30, 4, 11);
        let p = exact_profile(&m, 4);
        let (i, mu) = heaviest(&p);
        assert!(mu > 8.0 / 60.0, "need a violator, got {mu}");
        let gamma = gamma_medium(mu, 60, 4).unwrap();
        let mut w = m.clone();
        w.row_mut(i).scale_mut((1.0 - gamma).sqrt());
        let after = exact_profile(&w, 4);
        assert!((after.scores()[i] - 2.0 * 4.0 / 60.0).abs() <= 1e-8);
    }

    #[test]
    fn gamma_large_values() {
        let g = gamma_large(0.99, 20.0).unwrap();
        assert!((g - (20.0 - 1.0 / 0.965) / 19.0).abs() <= 1e-10);
        // Boundary: mu_hat − 1/(2ρ) = 1/ρ gives the no-op continuation.
        let rho = 2.5;
        let g0 = gamma_large(3.0 / (2.0 * rho), rho).unwrap();
        assert!(g0.abs() <= 1e-12);
        assert!(gamma_large(0.2, 20.0).is_err());
    }

    #[test]
    fn gamma_large_repeated_descent() {
        // Repeated large-score steps keep μ ≥ 1/ρ and strictly decrease it.
        let rho = 20.0;
        let mut m = coherent_matrix(15, 10, 2, 7);
        m.row_mut(0).scale_mut(50.0);
        let mut prev = exact_profile(&m, 2).scores()[0];
        assert!(prev > 1.0 - 1.0 / rho, "need mu near one, got {prev}");
        let mut steps = 0;
        while prev > 1.0 - 1.0 / rho && steps < 40 {
            let gamma = gamma_large(prev, rho).unwrap();
            m.row_mut(0).scale_mut((1.0 - gamma).sqrt());
            let mu = exact_profile(&m, 2).scores()[0];
            assert!(mu >= 1.0 / rho - 1e-9, "dropped below 1/rho: {mu}");
            assert!(mu < prev, "not strictly decreasing: {mu} vs {prev}");
            prev = mu;
            steps += 1;
        }
        assert!(steps > 0);
    }

    #[test]
    fn coordinate_descent_incoherent_is_noop() {
        // Flat factors: all scores well below 1/ρ → identity weights.
        let m = random_lowrank(50, 30, 3, 21);
        let p = exact_profile(&m, 3);
        let rho = 5.0;
        assert!(p.max_score() < 1.0 / rho, "max = {}", p.max_score());
        let cfg = WeightingConfig::for_rank(3, rho);
        let targets = target_scores_uniform(50, 3);
        let (w, traces) = coordinate_descent((&m).into(), 3, &cfg, &targets).unwrap();
        assert!(w.is_identity());
        assert!(traces.is_empty());
    }

    #[test]
    fn coordinate_descent_reduces_coherence() {
        // Rank-1 with a dominant row, fully observed (exact estimates).
        let mut m = random_lowrank(30, 20, 1, 2);
        m.row_mut(4).scale_mut(25.0);
        let before = exact_profile(&m, 1).max_score();
        let cfg = WeightingConfig::for_rank(1, 10.0);
        let targets = target_scores_uniform(30, 1);
        let (w, traces) = coordinate_descent((&m).into(), 1, &cfg, &targets).unwrap();
        assert!(!traces.is_empty());
        let after = exact_profile(&w.scale_rows_dense(&m), 1).max_score();
        assert!(after < before, "coherence did not drop: {after} vs {before}");
    }

    #[test]
    fn weights_only_shrink_and_replay() {
        let m = coherent_matrix(40, 25, 4, 9);
        let cfg = WeightingConfig::for_rank(4, 10.0);
        let targets = target_scores_uniform(40, 4);
        let (w, traces) = coordinate_descent((&m).into(), 4, &cfg, &targets).unwrap();
        assert!(w.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        // Each step multiplies exactly one entry by √(1−γ): replaying the
        // trace reproduces the weights.
        let mut replay = DiagonalWeights::identity(40);
        for t in &traces {
            replay.apply_step(t.chosen_row, t.gamma);
        }
        for i in 0..40 {
            assert!((replay.values()[i] - w.values()[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn line_search_l1_matches_gamma_exact() {
        let m = coherent_matrix(20, 12, 3, 5);
        let p = exact_profile(&m, 3);
        let targets = target_scores_uniform(20, 3);
        let (i, mu) = heaviest(&p);
        let g = line_search_step(&p, i, LossNorm::L1, &targets, 100).unwrap();
        let expect = gamma_exact(mu, targets.values()[i]).unwrap();
        assert!((g - expect).abs() <= 1e-12);
    }

    #[test]
    fn line_search_needs_cross() {
        let m = coherent_matrix(10, 8, 2, 5);
        let f = truncated_svd(&m, 2).unwrap();
        let p = compute_leverage(&f, 2, false).unwrap();
        let targets = target_scores_uniform(10, 2);
        assert!(matches!(
            line_search_step(&p, 0, LossNorm::L1, &targets, 100),
            Err(Error::NeedsCross)
        ));
    }

    #[test]
    fn exact_descent_l1_loss_non_increasing() {
        let m = coherent_matrix(30, 20, 3, 13);
        let targets = target_scores_uniform(30, 3);
        let cfg = WeightingConfig::for_rank(3, 10.0);
        let (_, traces) =
            exact_coordinate_descent(&m, 3, &targets, LossNorm::L1, 100, &cfg).unwrap();
        assert!(!traces.is_empty());
        let initial = hinge_loss(exact_profile(&m, 3).scores(), &targets, LossNorm::L1);
        let mut prev = initial;
        for t in &traces {
            assert!(t.l1_loss <= prev + 1e-10, "loss rose at step {}", t.step);
            prev = t.l1_loss;
        }
        assert!(prev < initial);
    }
}
