//! Leverage scores: exact computation, estimation from partial
//! observations, trimming, and closed-form rank-one weighting updates.
//!
//! Row leverage scores of the rank-k truncation are the diagonal of the
//! projector `U_k U_kᵀ`; cross scores are its off-diagonal entries. They
//! satisfy `0 ≤ μ_i ≤ 1`, `Σ_i μ_i = k` and `μ_i = Σ_j μ_ij²`, and all
//! three identities are preserved by the rank-one update below.

use crate::error::{Error, Result};
use crate::linalg::{row_norms_sq, truncated_svd, SparseObservation, SvdFactors};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Row leverage scores (and optionally cross scores) of a rank-k subspace.
#[derive(Debug, Clone)]
pub struct LeverageProfile {
    rank: usize,
    scores: Vec<f64>,
    /// Full projector block `U_k U_kᵀ`; diagonal equals `scores`.
    cross: Option<DMatrix<f64>>,
}

impl LeverageProfile {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn cross(&self) -> Option<&DMatrix<f64>> {
        self.cross.as_ref()
    }

    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }

    pub fn max_score(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }
}

/// How [`trim`] handles over-degree rows and columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimMode {
    /// Empty every over-degree row/column outright.
    ZeroOut,
    /// Keep a seeded uniformly random subset of the mean degree instead of
    /// discarding the whole row/column.
    Subsample,
}

/// Parameters for [`estimate_leverage`].
#[derive(Debug, Clone)]
pub struct EstimationParams {
    /// Accuracy parameter ρ > 1; the estimate targets additive error 1/(2ρ).
    pub accuracy_rho: f64,
    pub target_rank: usize,
    pub trim_mode: TrimMode,
    pub seed: u64,
}

impl EstimationParams {
    pub fn new(target_rank: usize, accuracy_rho: f64) -> Self {
        EstimationParams {
            accuracy_rho,
            target_rank,
            trim_mode: TrimMode::Subsample,
            seed: 0,
        }
    }
}

/// Leverage scores of the top-k left subspace of `f`.
pub fn compute_leverage(f: &SvdFactors, k: usize, with_cross: bool) -> Result<LeverageProfile> {
    if k == 0 || k > f.rank() {
        return Err(Error::InvalidRank { requested: k, limit: f.rank() });
    }
    let u_k = f.left_vectors().columns(0, k);
    let scores: Vec<f64> = row_norms_sq(&u_k.into_owned()).iter().copied().collect();
    let cross = with_cross.then(|| &u_k * u_k.transpose());
    Ok(LeverageProfile { rank: k, scores, cross })
}

/// Trim over-degree rows and columns of a partial observation.
///
/// A row counts as over-degree when it holds more than `2|Ω|/n1` entries
/// (columns: `2|Ω|/n2`, both thresholds from the input `|Ω|`). Rows are
/// handled first, then columns on the row-trimmed result. In
/// [`TrimMode::Subsample`], over-degree rows keep a uniformly random
/// `⌊|Ω|/n1⌋`-subset of their entries instead of being emptied.
pub fn trim(obs: &SparseObservation, mode: TrimMode, seed: u64) -> SparseObservation {
    let nnz = obs.nnz();
    if nnz == 0 {
        return obs.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row_threshold = 2.0 * nnz as f64 / obs.n_rows() as f64;
    let row_keep = nnz / obs.n_rows();
    let after_rows = trim_axis(obs, true, row_threshold, row_keep, mode, &mut rng);
    let col_threshold = 2.0 * nnz as f64 / obs.n_cols() as f64;
    let col_keep = nnz / obs.n_cols();
    trim_axis(&after_rows, false, col_threshold, col_keep, mode, &mut rng)
}

fn trim_axis(
    obs: &SparseObservation,
    rows: bool,
    threshold: f64,
    keep: usize,
    mode: TrimMode,
    rng: &mut ChaCha8Rng,
) -> SparseObservation {
    let degrees = if rows { obs.row_degrees() } else { obs.col_degrees() };
    let over: Vec<bool> = degrees.iter().map(|&d| d as f64 > threshold).collect();
    if !over.iter().any(|&b| b) {
        return obs.clone();
    }
    let axis_of = |t: &(usize, usize, f64)| if rows { t.0 } else { t.1 };
    let mut kept: Vec<(usize, usize, f64)> = obs
        .triplets()
        .iter()
        .filter(|t| !over[axis_of(t)])
        .copied()
        .collect();
    if mode == TrimMode::Subsample && keep > 0 {
        // Deterministic order: over-degree lines processed by ascending index.
        let n_lines = degrees.len();
        let mut per_line: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n_lines];
        for t in obs.triplets() {
            let a = axis_of(t);
            if over[a] {
                per_line[a].push(*t);
            }
        }
        for line in per_line.iter_mut().filter(|l| !l.is_empty()) {
            partial_shuffle(line, keep, rng);
            kept.extend_from_slice(&line[..keep.min(line.len())]);
        }
    }
    SparseObservation::new(obs.n_rows(), obs.n_cols(), kept)
        .expect("trim preserves validity of triplets")
}

/// Fisher–Yates prefix shuffle: after the call, the first `k` slots hold a
/// uniform random k-subset.
fn partial_shuffle<T>(items: &mut [T], k: usize, rng: &mut ChaCha8Rng) {
    let n = items.len();
    for i in 0..k.min(n.saturating_sub(1)) {
        let j = rng.gen_range(i..n);
        items.swap(i, j);
    }
}

/// Estimate leverage scores from a partial observation: trim, take the
/// rank-k truncated SVD, and read the scores off that subspace.
///
/// When `|Ω|` is large enough the estimates carry additive error at most
/// `1/(2·accuracy_rho)` with high probability.
pub fn estimate_leverage(
    obs: &SparseObservation,
    params: &EstimationParams,
) -> Result<LeverageProfile> {
    if params.accuracy_rho <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "accuracy_rho must exceed 1, got {}",
            params.accuracy_rho
        )));
    }
    let limit = obs.n_rows().min(obs.n_cols());
    if params.target_rank == 0 || params.target_rank > limit {
        return Err(Error::InvalidRank { requested: params.target_rank, limit });
    }
    if obs.nnz() == 0 {
        return Err(Error::DegenerateObservation("empty observation set".into()));
    }
    let trimmed = trim(obs, params.trim_mode, params.seed);
    if trimmed.nnz() == 0 {
        return Err(Error::DegenerateObservation(
            "trimming removed every observation".into(),
        ));
    }
    let f = truncated_svd(&trimmed, params.target_rank)?;
    let sigma = f.singular_values();
    if sigma[params.target_rank - 1] <= 1e-12 * sigma[0].max(1e-300) {
        return Err(Error::DegenerateObservation(format!(
            "trimmed observation is rank deficient below target rank {}",
            params.target_rank
        )));
    }
    compute_leverage(&f, params.target_rank, false)
}

/// Closed-form leverage profile of `W(n1, i, γ)·M` given the profile of
/// `M`, where the weighting scales row `i` by `√(1−γ)`.
///
/// With `d = 1 − γ·μ_i`:
///
/// ```text
/// μ_i'  = (1−γ)·μ_i / d
/// μ_j'  = μ_j + γ·μ_ij² / d           (j ≠ i)
/// μ_ij' = √(1−γ)·μ_ij / d             (j ≠ i)
/// μ_jl' = μ_jl + γ·μ_ij·μ_il / d      (j, l ≠ i)
/// ```
///
/// These are the Sherman–Morrison images of the projector `U_k U_kᵀ` under
/// the row scaling; they keep the projector identities (score sum, and
/// `μ_i = Σ_j μ_ij²`) intact, which a fresh SVD of the weighted matrix
/// reproduces to machine precision.
pub fn rank_one_update(p: &LeverageProfile, i: usize, gamma: f64) -> Result<LeverageProfile> {
    let cross = p.cross.as_ref().ok_or(Error::NeedsCross)?;
    let n = p.scores.len();
    if i >= n {
        return Err(Error::InvalidInput(format!("row {i} out of bounds for {n}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidStep(gamma));
    }
    let mu_i = p.scores[i];
    let denom = 1.0 - gamma * mu_i;
    if denom <= 0.0 {
        return Err(Error::InvalidLeverage(format!(
            "gamma*mu_i = {} reaches 1; update undefined",
            gamma * mu_i
        )));
    }
    let scale = (1.0 - gamma).sqrt();
    let row_i: Vec<f64> = cross.row(i).iter().copied().collect();

    let mut updated = cross.clone();
    for j in 0..n {
        if j == i {
            continue;
        }
        for l in 0..=j {
            if l == i {
                continue;
            }
            let v = cross[(j, l)] + gamma * row_i[j] * row_i[l] / denom;
            updated[(j, l)] = v;
            updated[(l, j)] = v;
        }
        let vij = scale * row_i[j] / denom;
        updated[(i, j)] = vij;
        updated[(j, i)] = vij;
    }
    updated[(i, i)] = (1.0 - gamma) * mu_i / denom;

    let scores: Vec<f64> = (0..n).map(|j| updated[(j, j)]).collect();
    Ok(LeverageProfile { rank: p.rank, scores, cross: Some(updated) })
}

/// Evaluate only the scores of `W(n1, i, γ)·M` without forming the updated
/// cross block. O(n) — used by line searches that probe many step sizes.
pub fn updated_scores(p: &LeverageProfile, i: usize, gamma: f64) -> Result<Vec<f64>> {
    let cross = p.cross.as_ref().ok_or(Error::NeedsCross)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidStep(gamma));
    }
    let mu_i = p.scores[i];
    let denom = 1.0 - gamma * mu_i;
    let mut scores = p.scores.clone();
    for j in 0..scores.len() {
        if j == i {
            scores[j] = (1.0 - gamma) * mu_i / denom;
        } else {
            let mu_ij = cross[(i, j)];
            scores[j] += gamma * mu_ij * mu_ij / denom;
        }
    }
    Ok(scores)
}

/// The `n1×r` left-vector block of `f`. For any nonsingular diagonal `R`,
/// the (full rank-r) leverage scores of `R·A` and of `R·U_A` coincide.
pub fn reduce_to_bases(f: &SvdFactors) -> DMatrix<f64> {
    f.left_vectors().clone()
}

/// `U·diag(σ)`: a basis that also preserves rank-k *truncations* under row
/// weighting. `A = (UΣ)Vᵀ` with `Vᵀ` having orthonormal rows, so `R·A` and
/// `R·(UΣ)` share singular values and left singular vectors; leverage of
/// `(R·A)_k` equals leverage of `(R·UΣ)_k` for every k ≤ r, which the plain
/// orthonormal basis does not guarantee when k < r.
pub fn scaled_bases(f: &SvdFactors) -> DMatrix<f64> {
    let mut b = f.left_vectors().clone();
    for (c, &s) in f.singular_values().iter().enumerate() {
        b.column_mut(c).scale_mut(s);
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::condensed_svd;
    use proptest::prelude::*;

    fn random_matrix(n1: usize, n2: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n1, n2, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_lowrank(n1: usize, n2: usize, r: usize, seed: u64) -> DMatrix<f64> {
        random_matrix(n1, r, seed) * random_matrix(n2, r, seed ^ 0x77).transpose()
    }

    fn exact_profile(m: &DMatrix<f64>, k: usize) -> LeverageProfile {
        let f = truncated_svd(m, k).unwrap();
        compute_leverage(&f, k, true).unwrap()
    }

    /// Scale row i of `m` by √(1−γ).
    fn weight_row(m: &DMatrix<f64>, i: usize, gamma: f64) -> DMatrix<f64> {
        let mut w = m.clone();
        w.row_mut(i).scale_mut((1.0 - gamma).sqrt());
        w
    }

    #[test]
    fn orthonormal_embedding_rows() {
        // Rows 0..k of M are orthonormal, the rest zero: μ_i = 1 for i < k.
        let k = 3;
        let mut m = DMatrix::<f64>::zeros(6, 4);
        for i in 0..k {
            m[(i, i)] = 1.0;
        }
        let p = exact_profile(&m, k);
        for i in 0..6 {
            let expect = if i < k { 1.0 } else { 0.0 };
            assert!((p.scores()[i] - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn score_sum_equals_rank() {
        for seed in 0..6u64 {
            let m = random_matrix(15, 9, seed);
            let p = exact_profile(&m, 4);
            assert!((p.sum() - 4.0).abs() <= 1e-8, "sum = {}", p.sum());
        }
    }

    #[test]
    fn cross_scores_satisfy_projector_identity() {
        let m = random_lowrank(12, 8, 3, 21);
        let p = exact_profile(&m, 3);
        let cross = p.cross().unwrap();
        for i in 0..12 {
            let s: f64 = (0..12).map(|j| cross[(i, j)] * cross[(i, j)]).sum();
            assert!((s - p.scores()[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn compute_leverage_rank_check() {
        let m = random_matrix(6, 4, 2);
        let f = truncated_svd(&m, 2).unwrap();
        assert!(matches!(
            compute_leverage(&f, 3, false),
            Err(Error::InvalidRank { .. })
        ));
    }

    #[test]
    fn trim_noop_when_balanced() {
        // 4x4 grid fully observed: every degree equals the threshold base.
        let m = random_matrix(4, 4, 3);
        let omega: Vec<(usize, usize)> =
            (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
        let obs = SparseObservation::from_mask(&m, &omega).unwrap();
        let t = trim(&obs, TrimMode::ZeroOut, 0);
        assert_eq!(t, obs);
    }

    #[test]
    fn trim_zero_out_drops_heavy_row() {
        // Row 0 holds 18 of 20 entries (n1 = 10): degree 18 > 2·20/10 = 4.
        let mut triplets = Vec::new();
        for j in 0..18 {
            triplets.push((0usize, j, 1.0));
        }
        triplets.push((1, 0, 1.0));
        triplets.push((2, 1, 1.0));
        let obs = SparseObservation::new(10, 20, triplets).unwrap();
        let t = trim(&obs, TrimMode::ZeroOut, 0);
        assert!(t.triplets().iter().all(|&(i, _, _)| i != 0));
        assert_eq!(t.nnz(), 2);
    }

    #[test]
    fn trim_subsample_keeps_mean_degree() {
        let mut triplets = Vec::new();
        for j in 0..18 {
            triplets.push((0usize, j, 1.0));
        }
        triplets.push((1, 0, 1.0));
        triplets.push((2, 1, 1.0));
        let obs = SparseObservation::new(10, 20, triplets).unwrap();
        let t = trim(&obs, TrimMode::Subsample, 7);
        let deg0 = t.triplets().iter().filter(|&&(i, _, _)| i == 0).count();
        assert_eq!(deg0, obs.nnz() / 10);
        // Deterministic under the same seed.
        assert_eq!(t, trim(&obs, TrimMode::Subsample, 7));
    }

    #[test]
    fn estimate_full_observation_matches_exact() {
        let m = random_lowrank(20, 12, 3, 5);
        let omega: Vec<(usize, usize)> =
            (0..20).flat_map(|i| (0..12).map(move |j| (i, j))).collect();
        let obs = SparseObservation::from_mask(&m, &omega).unwrap();
        let est = estimate_leverage(&obs, &EstimationParams::new(3, 10.0)).unwrap();
        let exact = exact_profile(&m, 3);
        for i in 0..20 {
            assert!((est.scores()[i] - exact.scores()[i]).abs() <= 1e-8);
        }
    }

    #[test]
    fn estimate_empty_observation_errors() {
        let obs = SparseObservation::new(5, 5, vec![]).unwrap();
        assert!(matches!(
            estimate_leverage(&obs, &EstimationParams::new(2, 10.0)),
            Err(Error::DegenerateObservation(_))
        ));
    }

    #[test]
    fn rank_one_update_tiny_gamma_is_identity() {
        let m = random_lowrank(8, 6, 2, 9);
        let p = exact_profile(&m, 2);
        let q = rank_one_update(&p, 3, 1e-15).unwrap();
        for i in 0..8 {
            assert!((q.scores()[i] - p.scores()[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn rank_one_update_direct_substitution() {
        // n1 = 2, k = 1, μ = (0.8, 0.2); scaling row 0 with γ = 0.5 gives
        // μ_0' = 0.4/0.6 = 2/3.
        let u = DMatrix::from_column_slice(2, 1, &[0.8f64.sqrt(), 0.2f64.sqrt()]);
        let cross = &u * u.transpose();
        let p = LeverageProfile {
            rank: 1,
            scores: vec![0.8, 0.2],
            cross: Some(cross),
        };
        let q = rank_one_update(&p, 0, 0.5).unwrap();
        assert!((q.scores()[0] - 2.0 / 3.0).abs() <= 1e-12);
        assert!((q.sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rank_one_update_matches_svd_oracle() {
        // Scale row 2 by √(1−0.3) and compare the full updated profile
        // against the SVD of the explicitly weighted matrix.
        let m = random_lowrank(10, 6, 3, 13);
        let p = exact_profile(&m, 3);
        let q = rank_one_update(&p, 2, 0.3).unwrap();
        let oracle = exact_profile(&weight_row(&m, 2, 0.3), 3);
        let qc = q.cross().unwrap();
        let oc = oracle.cross().unwrap();
        for i in 0..10 {
            assert!((q.scores()[i] - oracle.scores()[i]).abs() <= 1e-8);
            for j in 0..10 {
                // The projector U_k U_kᵀ is basis-independent, so cross
                // scores compare directly, signs included.
                assert!((qc[(i, j)] - oc[(i, j)]).abs() <= 1e-8, "cross ({i},{j})");
            }
        }
    }

    #[test]
    fn rank_one_update_requires_cross() {
        let m = random_lowrank(6, 4, 2, 1);
        let f = truncated_svd(&m, 2).unwrap();
        let p = compute_leverage(&f, 2, false).unwrap();
        assert!(matches!(rank_one_update(&p, 0, 0.5), Err(Error::NeedsCross)));
    }

    #[test]
    fn rank_one_update_step_domain() {
        let m = random_lowrank(6, 4, 2, 1);
        let p = exact_profile(&m, 2);
        assert!(matches!(rank_one_update(&p, 0, 0.0), Err(Error::InvalidStep(_))));
        assert!(matches!(rank_one_update(&p, 0, 1.0), Err(Error::InvalidStep(_))));
    }

    #[test]
    fn updated_scores_agree_with_full_update() {
        let m = random_lowrank(9, 7, 3, 31);
        let p = exact_profile(&m, 3);
        let fast = updated_scores(&p, 4, 0.6).unwrap();
        let full = rank_one_update(&p, 4, 0.6).unwrap();
        for i in 0..9 {
            assert!((fast[i] - full.scores()[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn reduce_to_bases_preserves_leverage_under_weighting() {
        let a = random_lowrank(30, 20, 6, 17);
        let f = condensed_svd(&a, 1e-10).unwrap();
        assert_eq!(f.rank(), 6);
        let bases = reduce_to_bases(&f);
        assert_eq!(bases.ncols(), 6);

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let w: Vec<f64> = (0..30).map(|_| rng.gen_range(0.1..2.0)).collect();
        let scale = |m: &DMatrix<f64>| {
            let mut s = m.clone();
            for (i, &wi) in w.iter().enumerate() {
                s.row_mut(i).scale_mut(wi);
            }
            s
        };
        let p_full = exact_profile(&scale(&a), 6);
        let p_bases = exact_profile(&scale(&bases), 6);
        for i in 0..30 {
            assert!((p_full.scores()[i] - p_bases.scores()[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn scaled_bases_preserve_truncated_leverage() {
        // k strictly below rank: the σ-scaled basis must reproduce the
        // rank-k leverage of the weighted full matrix.
        let a = random_lowrank(24, 16, 6, 23);
        let f = condensed_svd(&a, 1e-10).unwrap();
        let b = scaled_bases(&f);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w: Vec<f64> = (0..24).map(|_| rng.gen_range(0.05..1.0)).collect();
        let scale = |m: &DMatrix<f64>| {
            let mut s = m.clone();
            for (i, &wi) in w.iter().enumerate() {
                s.row_mut(i).scale_mut(wi);
            }
            s
        };
        let p_full = exact_profile(&scale(&a), 3);
        let p_b = exact_profile(&scale(&b), 3);
        for i in 0..24 {
            assert!((p_full.scores()[i] - p_b.scores()[i]).abs() <= 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        /// Monotonicity and sum conservation of the rank-one update.
        #[test]
        fn update_monotone_and_sum_conserving(
            seed in 0u64..1000,
            i in 0usize..10,
            gamma in 1e-6f64..0.999,
        ) {
            let m = random_lowrank(10, 7, 3, seed);
            let p = exact_profile(&m, 3);
            let q = rank_one_update(&p, i, gamma).unwrap();
            prop_assert!(q.scores()[i] <= p.scores()[i] + 1e-12);
            for j in 0..10 {
                if j != i {
                    prop_assert!(q.scores()[j] >= p.scores()[j] - 1e-12);
                }
            }
            prop_assert!((q.sum() - p.sum()).abs() <= 1e-10);
            // Projector identity survives the closed-form update.
            let c = q.cross().unwrap();
            for r in 0..10 {
                let s: f64 = (0..10).map(|t| c[(r, t)] * c[(r, t)]).sum();
                prop_assert!((s - q.scores()[r]).abs() <= 1e-9);
            }
        }
    }
}
