//! Dense/sparse matrix containers and SVD kernels.
//!
//! Dense matrices are plain `nalgebra::DMatrix<f64>`. Sparse partial
//! observations are coordinate triplets. Every factorization funnels
//! through [`condensed_svd`] or [`truncated_svd`], which is what the rest
//! of the crate builds on.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Once;

static FAER_SETUP: Once = Once::new();

/// Thin SVD of a dense matrix: `(U, σ, V)` with σ descending and
/// `A = U diag(σ) Vᵀ`. Runs faer's kernel sequentially so results do not
/// depend on the thread pool.
fn dense_svd_kernel(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    FAER_SETUP.call_once(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
    let m = faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let svd = m.thin_svd().expect("svd of a finite matrix converges");
    let rank = a.nrows().min(a.ncols());
    let u = DMatrix::from_fn(a.nrows(), rank, |i, j| svd.U()[(i, j)]);
    let v = DMatrix::from_fn(a.ncols(), rank, |i, j| svd.V()[(i, j)]);
    let sigma: Vec<f64> = (0..rank).map(|i| svd.S()[i]).collect();
    (u, sigma, v)
}

/// Iteration cap for sparse subspace iteration.
pub const SUBSPACE_MAX_ITERS: usize = 300;
/// Relative convergence tolerance for sparse subspace iteration.
pub const SUBSPACE_TOL: f64 = 1e-10;
/// Seed for the deterministic start block of subspace iteration.
pub const SUBSPACE_SEED: u64 = 0x5eed_5afe;

/// A partially observed matrix: the index set Ω with observed values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseObservation {
    n_rows: usize,
    n_cols: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl SparseObservation {
    /// Build from coordinate triplets, validating bounds, duplicates and
    /// finiteness.
    pub fn new(n_rows: usize, n_cols: usize, triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(triplets.len());
        for &(i, j, v) in &triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::InvalidInput(format!(
                    "index ({i}, {j}) out of bounds for {n_rows}x{n_cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite value at ({i}, {j})")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidInput(format!("duplicate entry at ({i}, {j})")));
            }
        }
        Ok(Self { n_rows, n_cols, triplets })
    }

    /// P_Ω(M): keep the entries of `m` indexed by `omega`.
    pub fn from_mask(m: &DMatrix<f64>, omega: &[(usize, usize)]) -> Result<Self> {
        let triplets = omega.iter().map(|&(i, j)| (i, j, m[(i, j)])).collect();
        Self::new(m.nrows(), m.ncols(), triplets)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    /// Number of observed entries per row.
    pub fn row_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_rows];
        for &(i, _, _) in &self.triplets {
            deg[i] += 1;
        }
        deg
    }

    /// Number of observed entries per column.
    pub fn col_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_cols];
        for &(_, j, _) in &self.triplets {
            deg[j] += 1;
        }
        deg
    }

    /// Zero-filled dense image of the observation.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for &(i, j, v) in &self.triplets {
            m[(i, j)] = v;
        }
        m
    }

    pub fn transposed(&self) -> SparseObservation {
        SparseObservation {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            triplets: self.triplets.iter().map(|&(i, j, v)| (j, i, v)).collect(),
        }
    }

    /// Scale row i by `weights[i]`. Entries in zero-weight rows are kept
    /// (as explicit zeros do not change degrees or factorization results).
    pub fn scale_rows(&self, weights: &[f64]) -> SparseObservation {
        debug_assert_eq!(weights.len(), self.n_rows);
        SparseObservation {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            triplets: self
                .triplets
                .iter()
                .map(|&(i, j, v)| (i, j, weights[i] * v))
                .collect(),
        }
    }

    /// y = A * x for each column of `x`.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        debug_assert_eq!(x.nrows(), self.n_cols);
        let mut y = DMatrix::zeros(self.n_rows, x.ncols());
        for &(i, j, v) in &self.triplets {
            for c in 0..x.ncols() {
                y[(i, c)] += v * x[(j, c)];
            }
        }
        y
    }

    /// y = Aᵀ * x for each column of `x`.
    pub fn tr_mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        debug_assert_eq!(x.nrows(), self.n_rows);
        let mut y = DMatrix::zeros(self.n_cols, x.ncols());
        for &(i, j, v) in &self.triplets {
            for c in 0..x.ncols() {
                y[(j, c)] += v * x[(i, c)];
            }
        }
        y
    }
}

/// Condensed SVD: `A = U diag(σ) Vᵀ` with `U: n1×r`, `V: n2×r`
/// column-orthonormal and `σ` nonincreasing and positive.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    left_vectors: DMatrix<f64>,
    singular_values: Vec<f64>,
    right_vectors: DMatrix<f64>,
}

impl SvdFactors {
    fn new(left: DMatrix<f64>, sigma: Vec<f64>, right: DMatrix<f64>) -> Self {
        debug_assert_eq!(left.ncols(), sigma.len());
        debug_assert_eq!(right.ncols(), sigma.len());
        SvdFactors {
            left_vectors: left,
            singular_values: sigma,
            right_vectors: right,
        }
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `U`: n1×r column-orthonormal block.
    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.left_vectors
    }

    /// `V`: n2×r column-orthonormal block.
    pub fn right_vectors(&self) -> &DMatrix<f64> {
        &self.right_vectors
    }

    /// Nonincreasing singular values.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Keep the top-k factors.
    pub fn truncate(&self, k: usize) -> Result<SvdFactors> {
        if k == 0 || k > self.rank() {
            return Err(Error::InvalidRank { requested: k, limit: self.rank() });
        }
        Ok(SvdFactors {
            left_vectors: self.left_vectors.columns(0, k).into_owned(),
            singular_values: self.singular_values[..k].to_vec(),
            right_vectors: self.right_vectors.columns(0, k).into_owned(),
        })
    }

    /// `U diag(σ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let r = self.rank();
        if r == 0 {
            return DMatrix::zeros(self.left_vectors.nrows(), self.right_vectors.nrows());
        }
        let mut us = self.left_vectors.clone();
        for c in 0..r {
            us.column_mut(c).scale_mut(self.singular_values[c]);
        }
        &us * self.right_vectors.transpose()
    }
}

fn check_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

/// Condensed SVD of a dense matrix. Factors with `σ_i ≤ tol·σ_1` are
/// dropped, so the returned rank is the numerical rank at that tolerance.
pub fn condensed_svd(a: &DMatrix<f64>, tol: f64) -> Result<SvdFactors> {
    check_finite(a)?;
    let (u, sigma, v) = dense_svd_kernel(a);
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let cut = tol.max(0.0) * sigma_max;
    let r = sigma.iter().take_while(|&&s| s > cut && s > 0.0).count();
    Ok(SvdFactors::new(
        u.columns(0, r).into_owned(),
        sigma[..r].to_vec(),
        v.columns(0, r).into_owned(),
    ))
}

/// Matrix argument accepted by [`truncated_svd`].
pub enum MatrixRef<'a> {
    Dense(&'a DMatrix<f64>),
    Sparse(&'a SparseObservation),
}

impl<'a> From<&'a DMatrix<f64>> for MatrixRef<'a> {
    fn from(m: &'a DMatrix<f64>) -> Self {
        MatrixRef::Dense(m)
    }
}

impl<'a> From<&'a SparseObservation> for MatrixRef<'a> {
    fn from(o: &'a SparseObservation) -> Self {
        MatrixRef::Sparse(o)
    }
}

impl MatrixRef<'_> {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            MatrixRef::Dense(m) => (m.nrows(), m.ncols()),
            MatrixRef::Sparse(o) => (o.n_rows(), o.n_cols()),
        }
    }

    fn mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            MatrixRef::Dense(m) => *m * x,
            MatrixRef::Sparse(o) => o.mul_dense(x),
        }
    }

    fn tr_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            MatrixRef::Dense(m) => m.transpose() * x,
            MatrixRef::Sparse(o) => o.tr_mul_dense(x),
        }
    }
}

/// Top-k SVD factors. Dense inputs use the direct kernel; sparse inputs
/// use seeded subspace iteration (deterministic: fixed seed, iteration
/// cap [`SUBSPACE_MAX_ITERS`], tolerance [`SUBSPACE_TOL`]).
///
/// Always returns exactly `k` factors; trailing singular values may be
/// zero when the input rank is below `k`.
pub fn truncated_svd<'a>(a: impl Into<MatrixRef<'a>>, k: usize) -> Result<SvdFactors> {
    let a = a.into();
    let (n1, n2) = a.shape();
    let limit = n1.min(n2);
    if k == 0 || k > limit {
        return Err(Error::InvalidRank { requested: k, limit });
    }
    match a {
        MatrixRef::Dense(m) => {
            check_finite(m)?;
            let (u, sigma, v) = dense_svd_kernel(m);
            Ok(SvdFactors::new(
                u.columns(0, k).into_owned(),
                sigma.iter().take(k).map(|s| s.max(0.0)).collect(),
                v.columns(0, k).into_owned(),
            ))
        }
        MatrixRef::Sparse(_) => subspace_iteration(&a, k, SUBSPACE_SEED),
    }
}

/// Thin QR factor of `m` (columns orthonormalized).
fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.qr();
    qr.q()
}

/// Deterministic block subspace iteration for the top-k factors of `a`.
fn subspace_iteration(a: &MatrixRef<'_>, k: usize, seed: u64) -> Result<SvdFactors> {
    let (n1, n2) = a.shape();
    let block = (k + 6).min(n1.min(n2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n2, block, |_, _| {
        // Box-Muller on ChaCha output keeps the start block reproducible
        // without depending on rand_distr's sampling internals.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    });

    let mut q = orthonormalize(a.mul(&g));
    // Negative sentinel keeps the first change estimate finite and large.
    let mut prev_sigma: Vec<f64> = vec![-1.0; k];
    for _ in 0..SUBSPACE_MAX_ITERS {
        let p = orthonormalize(a.tr_mul(&q));
        let y = a.mul(&p);
        let qr = y.qr();
        q = qr.q();
        let r = qr.r();
        // Ritz estimates from the small projected factor.
        let sigma_est = r.svd(false, false).singular_values;
        let worst = (0..k.min(sigma_est.len()))
            .map(|i| {
                let s = sigma_est[i];
                let p = prev_sigma[i];
                if s <= 0.0 && p <= 0.0 {
                    0.0
                } else {
                    (s - p).abs() / s.abs().max(p.abs()).max(f64::MIN_POSITIVE)
                }
            })
            .fold(0.0, f64::max);
        prev_sigma = sigma_est.iter().copied().collect();
        if worst < SUBSPACE_TOL {
            break;
        }
    }

    // Project once more and resolve the block with a small dense SVD.
    let b = a.tr_mul(&q).transpose(); // QᵀA, block × n2
    let (u_small, sigma, v) = dense_svd_kernel(&b);
    let u = &q * u_small.columns(0, k);
    Ok(SvdFactors::new(
        u,
        sigma.iter().take(k).map(|s| s.max(0.0)).collect(),
        v.columns(0, k).into_owned(),
    ))
}

/// κ = σ_1/σ_k of the rank-k truncation.
pub fn condition_number(f: &SvdFactors, k: usize) -> Result<f64> {
    if k == 0 || k > f.rank() {
        return Err(Error::InvalidRank { requested: k, limit: f.rank() });
    }
    let s1 = f.singular_values[0];
    let sk = f.singular_values[k - 1];
    // Numerical-rank cutoff: tiny σ_k is roundoff from an exactly zero one.
    let dim = f.left_vectors.nrows().max(f.right_vectors.nrows());
    if sk <= s1 * f64::EPSILON * dim as f64 {
        return Err(Error::RankDeficient(k));
    }
    Ok(s1 / sk)
}

/// Frobenius norm of a dense matrix.
pub fn fro_norm(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Max-abs deviation of `UᵀU` from the identity.
pub fn orthonormality_defect(u: &DMatrix<f64>) -> f64 {
    let g = u.transpose() * u;
    let r = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..r {
        for j in 0..r {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Column vector of row Euclidean norms squared.
pub fn row_norms_sq(u: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(u.nrows(), u.row_iter().map(|r| r.norm_squared()))
}
