//! Robust PCA (low-rank + sparse decomposition) and its row/column
//! weighted variants.
//!
//! The solver is an inexact augmented-Lagrangian method for
//! `min ‖L‖_* + λ‖S‖_1  s.t.  L + S = D`: singular value thresholding on
//! L, entrywise shrinkage on S, dual ascent on the constraint, with the
//! usual geometric penalty growth. Weighted RPCA lowers the coherence of
//! the low-rank part first (`D̂ = R·D·C`), solves on `D̂`, and maps the
//! solution back through the inverse weights.

use crate::error::{Error, Result};
use crate::linalg::{fro_norm, truncated_svd};
use crate::weighting::{
    coordinate_descent, target_scores_uniform, DiagonalWeights, WeightingConfig, WeightingInput,
};
use crate::completion::singular_value_shrink;
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct RpcaConfig {
    /// Weight λ on the ℓ1 term; `None` uses 1/√max(n1, n2).
    pub lambda_sparse: Option<f64>,
    /// Scales the initial augmented-Lagrangian penalty.
    pub admm_penalty: f64,
    pub max_iters: usize,
    /// Converged when ‖D − L − S‖_F ≤ tol·‖D‖_F.
    pub tol: f64,
}

impl Default for RpcaConfig {
    fn default() -> Self {
        RpcaConfig {
            lambda_sparse: None,
            admm_penalty: 1.0,
            max_iters: 300,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RpcaResult {
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Which weighted-RPCA pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpcaVariant {
    /// Weights from the corrupted observation D itself.
    Type1,
    /// Weights recomputed from the Type-1 recovery, then solved again.
    Type2,
}

/// Entrywise soft threshold.
fn soft_shrink(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    a.map(|v| {
        if v > tau {
            v - tau
        } else if v < -tau {
            v + tau
        } else {
            0.0
        }
    })
}

/// Decompose `D = L + S` with L low-rank and S sparse.
pub fn rpca(d: &DMatrix<f64>, cfg: &RpcaConfig) -> Result<RpcaResult> {
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    if !(cfg.admm_penalty > 0.0) || !(cfg.tol > 0.0) || cfg.max_iters == 0 {
        return Err(Error::InvalidInput("rpca config must be positive".into()));
    }
    let (n1, n2) = d.shape();
    let lambda = cfg
        .lambda_sparse
        .unwrap_or_else(|| 1.0 / (n1.max(n2) as f64).sqrt());
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput("lambda_sparse must be positive".into()));
    }
    let d_norm = fro_norm(d);
    if d_norm == 0.0 {
        return Ok(RpcaResult {
            low_rank: DMatrix::zeros(n1, n2),
            sparse: DMatrix::zeros(n1, n2),
            iterations: 0,
            converged: true,
        });
    }
    let sigma1 = truncated_svd(d, 1)?.singular_values()[0];
    let d_inf = d.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    // Standard inexact-ALM initialization and penalty schedule.
    let mut y = d / sigma1.max(d_inf / lambda);
    let mut s = DMatrix::<f64>::zeros(n1, n2);
    let mut l = DMatrix::<f64>::zeros(n1, n2);
    let mut mu = cfg.admm_penalty * 1.25 / sigma1;
    let mu_max = mu * 1e7;
    let growth = 1.6;

    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        l = singular_value_shrink(&(d - &s + &y / mu), 1.0 / mu)?;
        s = soft_shrink(&(d - &l + &y / mu), lambda / mu);
        let gap = d - &l - &s;
        y += mu * &gap;
        mu = (mu * growth).min(mu_max);
        if fro_norm(&gap) <= cfg.tol * d_norm {
            converged = true;
            break;
        }
    }
    Ok(RpcaResult {
        low_rank: l,
        sparse: s,
        iterations,
        converged,
    })
}

fn scale_rows_cols(d: &DMatrix<f64>, r: &[f64], c: &[f64]) -> DMatrix<f64> {
    let mut out = d.clone();
    for (i, &w) in r.iter().enumerate() {
        out.row_mut(i).scale_mut(w);
    }
    for (j, &w) in c.iter().enumerate() {
        out.column_mut(j).scale_mut(w);
    }
    out
}

fn weight_pair(
    source: &DMatrix<f64>,
    k: usize,
    wcfg: &WeightingConfig,
) -> Result<(DiagonalWeights, DiagonalWeights)> {
    let (n1, n2) = source.shape();
    let (r, _) = coordinate_descent(
        WeightingInput::Matrix(source),
        k,
        wcfg,
        &target_scores_uniform(n1, k),
    )?;
    let source_t = source.transpose();
    let (c, _) = coordinate_descent(
        WeightingInput::Matrix(&source_t),
        k,
        wcfg,
        &target_scores_uniform(n2, k),
    )?;
    for (i, &w) in r.values().iter().enumerate() {
        if w <= 0.0 {
            return Err(Error::SingularWeight(i));
        }
    }
    for (j, &w) in c.values().iter().enumerate() {
        if w <= 0.0 {
            return Err(Error::SingularWeight(j));
        }
    }
    Ok((r, c))
}

fn solve_weighted(
    d: &DMatrix<f64>,
    r: &DiagonalWeights,
    c: &DiagonalWeights,
    cfg: &RpcaConfig,
) -> Result<RpcaResult> {
    let d_hat = scale_rows_cols(d, r.values(), c.values());
    let hat = rpca(&d_hat, cfg)?;
    let r_inv: Vec<f64> = r.values().iter().map(|&w| 1.0 / w).collect();
    let c_inv: Vec<f64> = c.values().iter().map(|&w| 1.0 / w).collect();
    Ok(RpcaResult {
        low_rank: scale_rows_cols(&hat.low_rank, &r_inv, &c_inv),
        sparse: scale_rows_cols(&hat.sparse, &r_inv, &c_inv),
        iterations: hat.iterations,
        converged: hat.converged,
    })
}

/// Weighted RPCA.
///
/// Type 1: compute R, C by coordinate descent on D and Dᵀ (leverage of
/// `D_k` is exact — the matrix is fully known), solve RPCA on `R·D·C`,
/// return `L* = R⁻¹L̂*C⁻¹`, `S* = R⁻¹Ŝ*C⁻¹`. Type 2 recomputes the weights
/// from the Type-1 recovery and solves once more. Zero weights are an
/// error here: the back-map inverts R and C.
pub fn weighted_rpca(
    d: &DMatrix<f64>,
    k: usize,
    variant: RpcaVariant,
    wcfg: &WeightingConfig,
    cfg: &RpcaConfig,
) -> Result<RpcaResult> {
    let (n1, n2) = d.shape();
    let limit = n1.min(n2);
    if k == 0 || k > limit {
        return Err(Error::InvalidRank { requested: k, limit });
    }
    let (r1, c1) = weight_pair(d, k, wcfg)?;
    let type1 = solve_weighted(d, &r1, &c1, cfg)?;
    match variant {
        RpcaVariant::Type1 => Ok(type1),
        RpcaVariant::Type2 => {
            let (r2, c2) = weight_pair(&type1.low_rank, k, wcfg)?;
            solve_weighted(d, &r2, &c2, cfg)
        }
    }
}
