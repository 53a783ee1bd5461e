//! Weighted low-rank matrix recovery via leverage-score adjustment.
//!
//! The crate recovers coherent low-rank matrices from partial or sparsely
//! corrupted observations:
//!
//! - [`linalg`] — dense/sparse containers and SVD kernels;
//! - [`leverage`] — exact and estimated leverage scores, trimming, and
//!   closed-form rank-one weighting updates;
//! - [`weighting`] — the ℓq hinge loss on leverage scores and the
//!   coordinate-descent row-weighting algorithm;
//! - [`completion`] — ADMM for weighted nuclear norm minimization and the
//!   alternating weighting–completion loop;
//! - [`rpca`] — robust PCA and its row/column-weighted variants;
//! - [`datagen`] — seeded generators for the synthetic experiments;
//! - [`io`] — CSV and MatrixMarket readers/writers.

pub mod completion;
pub mod datagen;
pub mod error;
pub mod io;
pub mod leverage;
pub mod linalg;
pub mod rpca;
pub mod weighting;

pub use error::{Error, Result};
pub use linalg::{SparseObservation, SvdFactors};

// Downstream crates work with the same matrix types.
pub use nalgebra;

