//! Reproducible synthetic multi-task benchmark.
//!
//! Five tasks share `X1, X2 ~ N2((0,0), [[2,1],[1,2]])` and `X3 ~ U(0,1)`;
//! `X4` and `X5` are independent equal-weight two-component normal mixtures
//! whose means depend on the task. The target is
//! `Y = rastrigin_std(X1, X2) + q_std(X4, X5)`, where `q` is a quadratic
//! form with task-specific signs and both terms are standardized to zero
//! mean and unit variance within the generated sample. `X3` is noise.
//!
//! A sixth task reuses Task 1's distribution and is paired with a
//! deliberately coarse model (see [`degraded_model`]).
//!
//! Sampling: uniforms come from a ChaCha8 generator seeded with the task's
//! 64-bit seed (`rand_chacha`, stream 0); normals are drawn with the
//! Box-Muller transform, using both outputs of every pair in order.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::BinnedRegressor;
use crate::predict::Predictor;
use crate::types::TaskDataset;

pub const FEATURES: [&str; 5] = ["X1", "X2", "X3", "X4", "X5"];
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 2024;
/// Standard deviation of each mixture component of `X4` and `X5`.
pub const MIXTURE_STD: f64 = 0.1;
/// Bins per feature of the degraded model's grid.
pub const DEGRADED_BINS: usize = 4;

/// What kind of model a generated task is meant to be paired with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskRole {
    Oracle,
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    /// Component means of the `X4`/`X5` mixtures.
    pub mixture_means: (f64, f64),
    pub mixture_std: f64,
    /// Quadratic form coefficients `(a, b, c)`, each `-1` or `1`.
    pub coefficients: (f64, f64, f64),
    pub n: usize,
    pub seed: u64,
    pub role: TaskRole,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.coefficients;
        if [a, b, c].iter().any(|&x| x != 1.0 && x != -1.0) {
            return Err(Error::invalid(format!(
                "task `{}`: coefficients must be -1 or 1",
                self.task_id
            )));
        }
        if self.n < 2 {
            return Err(Error::invalid(format!("task `{}`: n must be at least 2", self.task_id)));
        }
        if !(self.mixture_std > 0.0) {
            return Err(Error::invalid(format!("task `{}`: mixture std must be positive", self.task_id)));
        }
        Ok(())
    }
}

/// Parameters of benchmark task `index` (1..=5); the seed is `base_seed + index`.
pub fn benchmark_spec(index: usize, n: usize, base_seed: u64) -> Result<TaskSpec> {
    let (means, coefficients) = match index {
        1 => ((0.0, 0.0), (1.0, 1.0, 1.0)),
        2 => ((0.0, 0.0), (1.0, 1.0, -1.0)),
        3 => ((-0.25, 0.25), (1.0, -1.0, 1.0)),
        4 => ((0.0, 0.0), (-1.0, 1.0, 1.0)),
        5 => ((-0.25, 0.25), (-1.0, -1.0, 1.0)),
        _ => return Err(Error::invalid(format!("benchmark task index {index} outside 1..=5"))),
    };
    Ok(TaskSpec {
        task_id: format!("task_{index}"),
        mixture_means: means,
        mixture_std: MIXTURE_STD,
        coefficients,
        n,
        seed: base_seed.wrapping_add(index as u64),
        role: TaskRole::Oracle,
    })
}

/// The five benchmark tasks.
pub fn benchmark_specs(n: usize, base_seed: u64) -> Vec<TaskSpec> {
    (1..=5)
        .map(|i| benchmark_spec(i, n, base_seed).expect("index in range"))
        .collect()
}

/// Task 6: Task 1's distribution on its own seed stream, meant for the degraded model.
pub fn degraded_spec(n: usize, base_seed: u64) -> TaskSpec {
    let mut spec = benchmark_spec(1, n, base_seed).expect("index in range");
    spec.task_id = "task_6".into();
    spec.seed = base_seed.wrapping_add(6);
    spec.role = TaskRole::Degraded;
    spec
}

/// `20 + sum (x_i^2 - 10 cos(2 pi x_i))` over two coordinates.
pub fn rastrigin(x1: f64, x2: f64) -> f64 {
    20.0 + (x1 * x1 - 10.0 * (2.0 * PI * x1).cos()) + (x2 * x2 - 10.0 * (2.0 * PI * x2).cos())
}

/// `a x4^2 + b x5^2 + c x4 x5`.
pub fn quadratic_form(x4: f64, x5: f64, a: f64, b: f64, c: f64) -> f64 {
    a * x4 * x4 + b * x5 * x5 + c * x4 * x5
}

/// Box-Muller normal sampler over a seeded uniform stream.
pub struct NormalSampler {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping the logarithm finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// The exact generating function of a task's target, with the
/// standardization constants of its generated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleModel {
    coefficients: (f64, f64, f64),
    rastrigin_mean: f64,
    rastrigin_std: f64,
    quadratic_mean: f64,
    quadratic_std: f64,
}

impl OracleModel {
    /// Freezes the standardization constants from `data`'s feature columns.
    pub fn from_data(spec: &TaskSpec, data: &TaskDataset) -> Result<Self> {
        spec.validate()?;
        let idx = feature_indices(data)?;
        let (a, b, c) = spec.coefficients;
        let r: Vec<f64> = data.rows().map(|x| rastrigin(x[idx[0]], x[idx[1]])).collect();
        let q: Vec<f64> = data
            .rows()
            .map(|x| quadratic_form(x[idx[3]], x[idx[4]], a, b, c))
            .collect();
        let (rastrigin_mean, rastrigin_std) = mean_std(&r);
        let (quadratic_mean, quadratic_std) = mean_std(&q);
        if !(rastrigin_std > 0.0 && quadratic_std > 0.0) {
            return Err(Error::Numerical("zero variance in a generating component".into()));
        }
        Ok(Self {
            coefficients: spec.coefficients,
            rastrigin_mean,
            rastrigin_std,
            quadratic_mean,
            quadratic_std,
        })
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let (a, b, c) = self.coefficients;
        (rastrigin(x[0], x[1]) - self.rastrigin_mean) / self.rastrigin_std
            + (quadratic_form(x[3], x[4], a, b, c) - self.quadratic_mean) / self.quadratic_std
    }

    /// Standardized Rastrigin term of a row.
    pub fn rastrigin_component(&self, x: &[f64]) -> f64 {
        (rastrigin(x[0], x[1]) - self.rastrigin_mean) / self.rastrigin_std
    }

    /// Standardized quadratic term of a row.
    pub fn quadratic_component(&self, x: &[f64]) -> f64 {
        let (a, b, c) = self.coefficients;
        (quadratic_form(x[3], x[4], a, b, c) - self.quadratic_mean) / self.quadratic_std
    }
}

impl Predictor for OracleModel {
    fn n_features(&self) -> usize {
        FEATURES.len()
    }

    fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != FEATURES.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} features, got {}",
                FEATURES.len(),
                row.len()
            )));
        }
        Ok(self.eval(row))
    }
}

fn feature_indices(data: &TaskDataset) -> Result<[usize; 5]> {
    let mut idx = [0usize; 5];
    for (k, name) in FEATURES.iter().enumerate() {
        idx[k] = data.feature_index(name).ok_or_else(|| {
            Error::invalid(format!("task `{}` has no feature `{name}`", data.task_id()))
        })?;
        if idx[k] != k {
            return Err(Error::invalid(format!(
                "task `{}`: expected features in order {FEATURES:?}",
                data.task_id()
            )));
        }
    }
    Ok(idx)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Draws a task's features and computes its target.
pub fn generate_task(spec: &TaskSpec) -> Result<TaskDataset> {
    spec.validate()?;
    let mut sampler = NormalSampler::new(spec.seed);
    // Cholesky factor of [[2, 1], [1, 2]]
    let l11 = 2f64.sqrt();
    let l21 = 1.0 / l11;
    let l22 = (1.5f64).sqrt();
    let (m1, m2) = spec.mixture_means;
    let mut samples = Vec::with_capacity(spec.n * 5);
    for _ in 0..spec.n {
        let z1 = sampler.standard_normal();
        let z2 = sampler.standard_normal();
        let x1 = l11 * z1;
        let x2 = l21 * z1 + l22 * z2;
        let x3 = loop {
            let u = sampler.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let mixture = |s: &mut NormalSampler| {
            let mean = if s.uniform() < 0.5 { m1 } else { m2 };
            mean + spec.mixture_std * s.standard_normal()
        };
        let x4 = mixture(&mut sampler);
        let x5 = mixture(&mut sampler);
        samples.extend_from_slice(&[x1, x2, x3, x4, x5]);
    }
    let names: Vec<String> = FEATURES.iter().map(|s| s.to_string()).collect();
    let unlabeled =
        TaskDataset::from_row_major(&spec.task_id, names.clone(), samples, vec![0.0; spec.n])?;
    let oracle = OracleModel::from_data(spec, &unlabeled)?;
    let targets = oracle.predict_batch(unlabeled.samples())?;
    TaskDataset::from_row_major(&spec.task_id, names, unlabeled.samples().to_vec(), targets)
}

/// Oracle for a spec, with constants taken from the regenerated sample.
pub fn oracle_model(spec: &TaskSpec) -> Result<OracleModel> {
    let data = generate_task(spec)?;
    OracleModel::from_data(spec, &data)
}

/// Coarse stand-in for a badly under-fitted model: a 4x4 equal-width grid
/// over `(X4, X5)` predicting cell means of `Y`; every other feature is ignored.
pub fn degraded_model(spec: &TaskSpec, data: &TaskDataset) -> Result<BinnedRegressor> {
    spec.validate()?;
    let idx = feature_indices(data)?;
    BinnedRegressor::fit(data, &[idx[3], idx[4]], DEGRADED_BINS)
}
