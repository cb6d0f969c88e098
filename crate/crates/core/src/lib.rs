//! Explainable similarity between learned tasks.
//!
//! Each task is summarized by its first-order accumulated local effects
//! (ALE) curves, one per feature. Two tasks are compared feature by
//! feature with a weighted discrete Fréchet distance, where each coupled
//! pair of curve vertices is weighted by how unevenly the two tasks' data
//! support that region. The per-feature distances are combined with the
//! reference task's feature importances into a single dissimilarity
//! (0 = identical explanation profiles), optionally scaled by the ratio of
//! the two models' losses.
//!
//! Module map:
//!
//! - [`types`]: datasets, partitions, curves, profiles, matrices
//! - [`ale`]: raw curve estimation, common grids, smoothing
//! - [`frechet`]: weighted discrete Fréchet distance
//! - [`importance`]: permutation and manual feature importance
//! - [`similarity`]: task dissimilarity, performance scaling, prefiltering
//! - [`clustering`]: Ward-linkage dendrograms and flat cuts
//! - [`synth`]: reproducible synthetic benchmark
//! - [`models`]: kNN and binned regressors, losses
//! - [`pipeline`]: datasets + models to profiles
//! - [`io`]: file formats used by the `mtsim` binary
//! - [`report`]: markdown summaries of a similarity run
//!
//! ```
//! use mtsim::{AleCurve, GridKind, weighted_frechet};
//!
//! let a = AleCurve::new("t1", "x", vec![0.0, 1.0], vec![0.0, 0.0], vec![0.5, 0.5], vec![1, 1], GridKind::Common)?;
//! let b = AleCurve::new("t2", "x", vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5], vec![1, 1], GridKind::Common)?;
//! assert_eq!(weighted_frechet(&a, &b)?, 2.0);
//! # Ok::<(), mtsim::Error>(())
//! ```

pub mod ale;
pub mod clustering;
pub mod error;
pub mod frechet;
pub mod importance;
pub mod io;
pub mod models;
pub mod pipeline;
pub mod predict;
pub mod report;
pub mod similarity;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use frechet::{brute_force_frechet, frechet_min_variant, weighted_frechet, FrechetOptions};
pub use predict::{from_fn, FnPredictor, Predictor};
pub use similarity::{similarity_matrix, task_similarity, SimilarityOptions, Tau};
pub use types::{
    AleCurve, GridKind, Matching, Partition, SimilarityMatrix, TaskDataset, TaskProfile,
};
