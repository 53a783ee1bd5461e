//! Seeded generators for the synthetic experiments: coherent low-rank
//! factors with heavy-tailed rows, uniform sampling masks, Gaussian noise,
//! and trinary sparse corruption.
//!
//! All generators draw from `ChaCha8Rng` seeded with a caller-provided
//! `u64`, so identical seeds give bitwise-identical outputs on every
//! platform (modulo the pinned `rand`/`rand_distr` versions).

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// Shape and distribution parameters of a coherent low-rank instance.
#[derive(Debug, Clone)]
pub struct GenSpec {
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub seed: u64,
    /// Degrees of freedom of the multivariate t factor rows.
    pub t_dof: u32,
    /// Λ_ij = cov_base · cov_decay^|i−j|.
    pub cov_base: f64,
    pub cov_decay: f64,
}

impl GenSpec {
    /// Paper-style defaults: t(2) rows, Λ_ij = 2·0.5^|i−j|.
    pub fn new(n1: usize, n2: usize, k: usize, seed: u64) -> Self {
        GenSpec {
            n1,
            n2,
            k,
            seed,
            t_dof: 2,
            cov_base: 2.0,
            cov_decay: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n1.min(self.n2) {
            return Err(Error::InvalidRank {
                requested: self.k,
                limit: self.n1.min(self.n2),
            });
        }
        if !(self.cov_decay > 0.0 && self.cov_decay < 1.0) || !(self.cov_base > 0.0) {
            return Err(Error::InvalidInput(
                "covariance needs cov_base > 0 and cov_decay in (0, 1)".into(),
            ));
        }
        if self.t_dof == 0 {
            return Err(Error::InvalidInput("t_dof must be at least 1".into()));
        }
        Ok(())
    }
}

/// The k×k factor covariance Λ.
pub fn covariance_matrix(spec: &GenSpec) -> DMatrix<f64> {
    DMatrix::from_fn(spec.k, spec.k, |i, j| {
        spec.cov_base * spec.cov_decay.powi((i as i32 - j as i32).abs())
    })
}

/// One multivariate t(ν, Λ) draw: z ~ N(0, Λ) via the Cholesky factor,
/// w ~ χ²(ν), row = z·√(ν/w).
fn t_row(chol_l: &DMatrix<f64>, dof: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let k = chol_l.nrows();
    let g = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
    let z = chol_l * g;
    let w: f64 = ChiSquared::new(dof).expect("dof >= 1").sample(rng);
    z * (dof / w).sqrt()
}

/// Coherent low-rank matrix `L0 = U Vᵀ` with every row of U (n1×k) and
/// V (n2×k) drawn from the multivariate t distribution. Heavy-tailed rows
/// make a handful of leverage scores dominate, so the output is coherent
/// with high probability.
pub fn gen_coherent_lowrank(spec: &GenSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let lambda = covariance_matrix(spec);
    let chol = Cholesky::new(lambda)
        .ok_or_else(|| Error::InvalidInput("factor covariance is not positive definite".into()))?;
    let l = chol.l();
    let dof = spec.t_dof as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut u = DMatrix::zeros(spec.n1, spec.k);
    for i in 0..spec.n1 {
        u.row_mut(i).copy_from(&t_row(&l, dof, &mut rng).transpose());
    }
    let mut v = DMatrix::zeros(spec.n2, spec.k);
    for j in 0..spec.n2 {
        v.row_mut(j).copy_from(&t_row(&l, dof, &mut rng).transpose());
    }
    Ok(u * v.transpose())
}

/// Uniform Bernoulli(p) sampling of the index grid, row-major order.
pub fn sample_uniform(n1: usize, n2: usize, p: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "sampling probability must lie in (0, 1], got {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut omega = Vec::with_capacity((p * (n1 * n2) as f64) as usize);
    for i in 0..n1 {
        for j in 0..n2 {
            if rng.gen::<f64>() < p {
                omega.push((i, j));
            }
        }
    }
    Ok(omega)
}

/// Add an independent Gaussian(mean, σ²) term to a Bernoulli(fraction)
/// subset of entries.
pub fn add_gaussian_noise(
    l0: &DMatrix<f64>,
    fraction: f64,
    sigma: f64,
    mean: f64,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!(
            "noise fraction must lie in [0, 1], got {fraction}"
        )));
    }
    if sigma < 0.0 {
        return Err(Error::InvalidInput(format!("sigma must be nonnegative, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = l0.clone();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if fraction > 0.0 && rng.gen::<f64>() < fraction {
                let g: f64 = StandardNormal.sample(&mut rng);
                m[(i, j)] += mean + sigma * g;
            }
        }
    }
    Ok(m)
}

/// Trinary sparse corruption: each entry is `s` with probability p/2,
/// `−s` with probability p/2, and zero otherwise.
pub fn gen_sparse_corruption(
    n1: usize,
    n2: usize,
    p: f64,
    s: f64,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!(
            "corruption probability must lie in [0, 1], got {p}"
        )));
    }
    if !(s > 0.0) {
        return Err(Error::InvalidInput(format!("magnitude s must be positive, got {s}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(DMatrix::from_fn(n1, n2, |_, _| {
        let u: f64 = rng.gen();
        if u < p / 2.0 {
            s
        } else if u < p {
            -s
        } else {
            0.0
        }
    }))
}

/// Orthonormal `n1×k` block whose row norms² equal `mu` exactly.
///
/// Requires `0 ≤ mu_i ≤ 1` and `Σ mu_i = k` (the Schur–Horn feasibility
/// condition). Built by Givens rotations acting on row pairs: for rows
/// with Gram entries (a, b, c) the rotated norm is
/// `f(θ) = (a+b)/2 + R·cos(2θ − φ)`, a pure sinusoid, so each rotation
/// lands one row exactly on its target (or as close as the pair allows).
fn orthonormal_with_row_norms(n1: usize, k: usize, mu: &[f64]) -> Result<DMatrix<f64>> {
    if mu.len() != n1 {
        return Err(Error::ShapeMismatch {
            left: format!("{} targets", mu.len()),
            right: format!("{n1} rows"),
        });
    }
    if mu.iter().any(|&m| !(0.0..=1.0 + 1e-12).contains(&m)) {
        return Err(Error::InvalidInput("row leverage targets must lie in [0, 1]".into()));
    }
    let total: f64 = mu.iter().sum();
    if (total - k as f64).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "row leverage targets must sum to k = {k}, got {total}"
        )));
    }

    // Extraction chain: starting from the identity embedding (row norms
    // are k ones and n1−k zeros, which majorize any feasible target),
    // peel off the largest remaining target with one rotation of the
    // current (max, min) pair. The extracted row is never touched again.
    let mut u = DMatrix::<f64>::zeros(n1, k);
    for i in 0..k {
        u[(i, i)] = 1.0;
    }
    let mut order: Vec<usize> = (0..n1).collect();
    order.sort_by(|&x, &y| mu[y].partial_cmp(&mu[x]).unwrap().then(x.cmp(&y)));

    let mut avail: Vec<usize> = (0..n1).collect();
    let mut norm_of = vec![0.0f64; n1];
    for i in 0..k {
        norm_of[i] = 1.0;
    }
    let mut slot_of = vec![usize::MAX; n1]; // target index -> row of u
    for &target_idx in order.iter().take(n1 - 1) {
        let tau = mu[target_idx];
        let (ai, &arow) = avail
            .iter()
            .enumerate()
            .max_by(|x, y| norm_of[*x.1].partial_cmp(&norm_of[*y.1]).unwrap())
            .expect("avail nonempty");
        let a = norm_of[arow];
        if (a - tau).abs() <= 1e-15 {
            slot_of[target_idx] = arow;
            avail.swap_remove(ai);
            continue;
        }
        let (_bi, &brow) = avail
            .iter()
            .enumerate()
            .min_by(|x, y| norm_of[*x.1].partial_cmp(&norm_of[*y.1]).unwrap())
            .expect("avail nonempty");
        let b = norm_of[brow];
        if !(b - 1e-9 <= tau && tau <= a + 1e-9) || arow == brow {
            return Err(Error::InvalidInput(format!(
                "leverage planting infeasible: target {tau} outside [{b}, {a}]"
            )));
        }
        let c: f64 = (0..k).map(|t| u[(arow, t)] * u[(brow, t)]).sum();
        let m0 = 0.5 * (a + b);
        let amp = (0.25 * (a - b) * (a - b) + c * c).sqrt().max(1e-300);
        // Rotated norm of row a is m0 + amp·cos(2θ − φ); solve for τ.
        let phi = c.atan2(0.5 * (a - b));
        let theta = 0.5 * (phi + ((tau - m0) / amp).clamp(-1.0, 1.0).acos());
        rotate_rows(&mut u, arow, brow, theta);
        norm_of[arow] = u.row(arow).norm_squared();
        norm_of[brow] = u.row(brow).norm_squared();
        if (norm_of[arow] - tau).abs() > 1e-10 {
            // The other root of the sinusoid.
            rotate_rows(&mut u, arow, brow, -theta);
            let theta2 = 0.5 * (phi - ((tau - m0) / amp).clamp(-1.0, 1.0).acos());
            rotate_rows(&mut u, arow, brow, theta2);
            norm_of[arow] = u.row(arow).norm_squared();
            norm_of[brow] = u.row(brow).norm_squared();
        }
        slot_of[target_idx] = arow;
        avail.swap_remove(ai);
    }
    // Last target takes the last row (sums force it to match).
    let last_target = order[n1 - 1];
    slot_of[last_target] = avail[0];

    // Permute rows into the caller's order.
    let mut out = DMatrix::<f64>::zeros(n1, k);
    for target_idx in 0..n1 {
        out.row_mut(target_idx).copy_from(&u.row(slot_of[target_idx]));
    }
    let worst = (0..n1)
        .map(|i| (out.row(i).norm_squared() - mu[i]).abs())
        .fold(0.0f64, f64::max);
    if worst > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "leverage planting did not converge (residual {worst:.2e})"
        )));
    }
    Ok(out)
}

/// In-place Givens rotation of rows i and j by angle θ.
fn rotate_rows(u: &mut DMatrix<f64>, i: usize, j: usize, theta: f64) {
    let (s, c) = theta.sin_cos();
    for t in 0..u.ncols() {
        let (ui, uj) = (u[(i, t)], u[(j, t)]);
        u[(i, t)] = c * ui + s * uj;
        u[(j, t)] = -s * ui + c * uj;
    }
}

/// Rank-k matrix with an exactly planted row-leverage profile and chosen
/// singular values (nonincreasing, distinct, positive). The right factor
/// is a seeded random orthonormal block, so column leverage is generic.
pub fn gen_planted_lowrank(
    n1: usize,
    n2: usize,
    sigma: &[f64],
    row_mu: &[f64],
    seed: u64,
) -> Result<DMatrix<f64>> {
    let k = sigma.len();
    if k == 0 || k > n1.min(n2) {
        return Err(Error::InvalidRank { requested: k, limit: n1.min(n2) });
    }
    if sigma.windows(2).any(|w| w[0] <= w[1]) || sigma.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidInput(
            "singular values must be positive, distinct and decreasing".into(),
        ));
    }
    let u = orthonormal_with_row_norms(n1, k, row_mu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x56_0b_a5e5);
    let v = DMatrix::from_fn(n2, k, |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        g
    })
    .qr()
    .q();
    let mut us = u;
    for (c, &s) in sigma.iter().enumerate() {
        us.column_mut(c).scale_mut(s);
    }
    Ok(us * v.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leverage::compute_leverage;
    use crate::linalg::truncated_svd;

    #[test]
    fn covariance_entries() {
        let spec = GenSpec::new(10, 8, 3, 0);
        let lam = covariance_matrix(&spec);
        assert_eq!(lam[(0, 0)], 2.0);
        assert_eq!(lam[(0, 1)], 1.0);
        assert_eq!(lam[(0, 2)], 0.5);
        assert_eq!(lam[(2, 0)], 0.5);
    }

    #[test]
    fn lowrank_has_exact_rank() {
        let spec = GenSpec::new(40, 30, 5, 3);
        let l0 = gen_coherent_lowrank(&spec).unwrap();
        let f = truncated_svd(&l0, 6).unwrap();
        let sigma = f.singular_values();
        assert!(sigma[4] > 1e-8 * sigma[0], "rank fell below k");
        assert!(sigma[5] <= 1e-10 * sigma[0], "rank exceeds k: {}", sigma[5]);
    }

    #[test]
    fn lowrank_is_coherent() {
        // Heavy-tailed factor rows push the max leverage score well above
        // the uniform level on typical draws.
        let mut coherent_seeds = 0;
        for seed in 0..4u64 {
            let spec = GenSpec::new(200, 120, 6, seed);
            let l0 = gen_coherent_lowrank(&spec).unwrap();
            let f = truncated_svd(&l0, 6).unwrap();
            let p = compute_leverage(&f, 6, false).unwrap();
            let coherence = 200.0 / 6.0 * p.max_score();
            if coherence > 2.0 {
                coherent_seeds += 1;
            }
        }
        assert!(coherent_seeds >= 3, "only {coherent_seeds}/4 draws were coherent");
    }

    #[test]
    fn generators_are_deterministic() {
        let spec = GenSpec::new(25, 18, 4, 77);
        assert_eq!(
            gen_coherent_lowrank(&spec).unwrap(),
            gen_coherent_lowrank(&spec).unwrap()
        );
        assert_eq!(
            sample_uniform(30, 20, 0.3, 5).unwrap(),
            sample_uniform(30, 20, 0.3, 5).unwrap()
        );
        assert_eq!(
            gen_sparse_corruption(12, 9, 0.2, 5.0, 1).unwrap(),
            gen_sparse_corruption(12, 9, 0.2, 5.0, 1).unwrap()
        );
    }

    #[test]
    fn sampling_density() {
        assert_eq!(sample_uniform(20, 10, 1.0, 0).unwrap().len(), 200);
        assert!(sample_uniform(20, 10, 0.0, 0).is_err());

        // |Ω| within 4 standard deviations of p·n1·n2 across seeds.
        let (n1, n2, p) = (400, 200, 0.1);
        let expect = p * (n1 * n2) as f64;
        let sd = ((n1 * n2) as f64 * p * (1.0 - p)).sqrt();
        for seed in 0..20u64 {
            let count = sample_uniform(n1, n2, p, seed).unwrap().len() as f64;
            assert!(
                (count - expect).abs() <= 4.0 * sd,
                "seed {seed}: |Omega| = {count}"
            );
        }
    }

    #[test]
    fn noise_trivial_cases() {
        let spec = GenSpec::new(15, 10, 2, 5);
        let l0 = gen_coherent_lowrank(&spec).unwrap();
        assert_eq!(add_gaussian_noise(&l0, 0.5, 0.0, 0.0, 3).unwrap(), l0);
        assert_eq!(add_gaussian_noise(&l0, 0.0, 1.0, 1.0, 3).unwrap(), l0);
    }

    #[test]
    fn noise_touches_half_the_entries() {
        let spec = GenSpec::new(60, 50, 2, 6);
        let l0 = gen_coherent_lowrank(&spec).unwrap();
        let m = add_gaussian_noise(&l0, 0.5, 1.0, 1.0, 9).unwrap();
        let changed = m
            .iter()
            .zip(l0.iter())
            .filter(|(a, b)| a != b)
            .count() as f64;
        let n = (60 * 50) as f64;
        let sd = (n * 0.25).sqrt();
        assert!((changed - 0.5 * n).abs() <= 4.0 * sd, "changed = {changed}");
    }

    #[test]
    fn planted_leverage_profile_is_exact() {
        let n1 = 50;
        let k = 3;
        let mut mu = vec![(3.0 - 0.9 - 0.6) / 48.0; n1];
        mu[4] = 0.9;
        mu[17] = 0.6;
        let sigma = [5.0, 4.0, 3.0];
        let l0 = gen_planted_lowrank(n1, 30, &sigma, &mu, 11).unwrap();
        let fac = truncated_svd(&l0, k).unwrap();
        for (a, b) in fac.singular_values().iter().zip(sigma.iter()) {
            assert!((a - b).abs() <= 1e-9);
        }
        let p = compute_leverage(&fac, k, false).unwrap();
        for i in 0..n1 {
            assert!(
                (p.scores()[i] - mu[i]).abs() <= 1e-9,
                "row {i}: {} vs {}",
                p.scores()[i],
                mu[i]
            );
        }
        // Determinism.
        assert_eq!(l0, gen_planted_lowrank(n1, 30, &sigma, &mu, 11).unwrap());
    }

    #[test]
    fn planted_leverage_rejects_bad_targets() {
        // Sum must equal k.
        assert!(gen_planted_lowrank(10, 8, &[2.0, 1.0], &[0.5; 10], 0).is_err());
        // Values must stay within [0, 1].
        let mut mu = vec![0.0; 10];
        mu[0] = 1.5;
        mu[1] = 0.5;
        assert!(gen_planted_lowrank(10, 8, &[2.0, 1.0], &mu, 0).is_err());
    }

    #[test]
    fn corruption_counts_and_signs() {
        assert_eq!(
            gen_sparse_corruption(10, 10, 0.0, 2.0, 0).unwrap(),
            DMatrix::zeros(10, 10)
        );
        let full = gen_sparse_corruption(10, 10, 1.0, 2.0, 0).unwrap();
        assert!(full.iter().all(|&v| v == 2.0 || v == -2.0));

        let (n1, n2, p) = (300, 200, 0.1);
        let s0 = gen_sparse_corruption(n1, n2, p, 5.0, 3).unwrap();
        let nnz = s0.iter().filter(|&&v| v != 0.0).count() as f64;
        let n = (n1 * n2) as f64;
        let sd_nnz = (n * p * (1.0 - p)).sqrt();
        assert!((nnz - p * n).abs() <= 4.0 * sd_nnz, "nnz = {nnz}");

        let plus = s0.iter().filter(|&&v| v > 0.0).count() as f64;
        let sd_sign = (nnz * 0.25).sqrt();
        assert!((plus - nnz / 2.0).abs() <= 4.0 * sd_sign, "plus = {plus}");
        assert!(s0.iter().fold(0.0f64, |m, &v| m.max(v.abs())) == 5.0);
    }
}
