//! Feature importance normalized to sum to one.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::LossKind;
use crate::predict::Predictor;
use crate::types::{normalize_importance, TaskDataset};

pub const DEFAULT_REPEATS: usize = 5;
/// Smallest dataset accepted by [`permutation_importance`].
pub const MIN_SAMPLES: usize = 10;

/// Mean loss increase per feature when its column is shuffled, floored at 0.
///
/// Feature `j` draws its shuffles from stream `j` of a ChaCha8 generator
/// seeded with `seed`, so results do not depend on evaluation order.
pub fn permutation_importance_raw<P: Predictor + ?Sized>(
    model: &P,
    data: &TaskDataset,
    repeats: usize,
    seed: u64,
    loss: LossKind,
) -> Result<Vec<f64>> {
    let n = data.n_samples();
    if n < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "permutation importance needs at least {MIN_SAMPLES} samples, task `{}` has {n}",
            data.task_id()
        )));
    }
    if repeats == 0 {
        return Err(Error::invalid("repeats must be positive"));
    }
    let d = data.n_features();
    let base_pred = model.predict_batch(data.samples())?;
    let baseline = checked_loss(loss, &base_pred, data)?;

    (0..d)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let column = data.column(j);
            let mut perm: Vec<usize> = (0..n).collect();
            let mut buf = data.samples().to_vec();
            let mut total = 0.0;
            for _ in 0..repeats {
                perm.shuffle(&mut rng);
                for (i, &src) in perm.iter().enumerate() {
                    buf[i * d + j] = column[src];
                }
                let pred = model.predict_batch(&buf)?;
                total += checked_loss(loss, &pred, data)? - baseline;
            }
            Ok((total / repeats as f64).max(0.0))
        })
        .collect()
}

/// Permutation importance normalized to sum to one; a model on which no
/// shuffle increases the loss gets the uniform vector.
pub fn permutation_importance<P: Predictor + ?Sized>(
    model: &P,
    data: &TaskDataset,
    repeats: usize,
    seed: u64,
    loss: LossKind,
) -> Result<Vec<f64>> {
    let raw = permutation_importance_raw(model, data, repeats, seed, loss)?;
    if raw.iter().all(|&v| v == 0.0) {
        let d = raw.len();
        return Ok(vec![1.0 / d as f64; d]);
    }
    normalize_importance(&raw)
}

/// Expert-specified weights, normalized to sum to one.
pub fn manual_importance(weights: &[f64]) -> Result<Vec<f64>> {
    normalize_importance(weights)
}

fn checked_loss(loss: LossKind, pred: &[f64], data: &TaskDataset) -> Result<f64> {
    if pred.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite prediction on task `{}`",
            data.task_id()
        )));
    }
    Ok(loss.evaluate(pred, data.targets()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::from_fn;
    use rand::Rng;

    fn data(n: usize) -> TaskDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let targets = rows.iter().map(|r| 2.0 * r[0]).collect();
        TaskDataset::new("t", vec!["x1".into(), "x2".into()], rows, targets).unwrap()
    }

    #[test]
    fn ignored_feature_gets_no_importance() {
        let ds = data(200);
        let f = from_fn(2, |x: &[f64]| 2.0 * x[0]);
        let raw = permutation_importance_raw(&f, &ds, 5, 1, LossKind::Rmse).unwrap();
        assert!(raw[1] <= 1e-6);
        let imp = permutation_importance(&f, &ds, 5, 1, LossKind::Rmse).unwrap();
        assert!((imp[0] - 1.0).abs() <= 1e-9);
        assert!((imp.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn constant_model_is_uniform() {
        let ds = data(50);
        let imp = permutation_importance(&from_fn(2, |_| 0.7), &ds, 3, 0, LossKind::Rmse).unwrap();
        assert_eq!(imp, vec![0.5, 0.5]);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let ds = data(100);
        let f = from_fn(2, |x: &[f64]| x[0] * x[1] + x[1]);
        let a = permutation_importance(&f, &ds, 4, 42, LossKind::Rmse).unwrap();
        let b = permutation_importance(&f, &ds, 4, 42, LossKind::Rmse).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_samples() {
        let ds = data(9);
        assert!(permutation_importance(&from_fn(2, |_| 0.0), &ds, 1, 0, LossKind::Rmse).is_err());
    }

    #[test]
    fn manual_examples() {
        assert_eq!(manual_importance(&[2.0, 2.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(manual_importance(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(manual_importance(&[3.0, 1.0]).unwrap(), vec![0.75, 0.25]);
        assert!(manual_importance(&[0.0, 0.0]).is_err());
    }
}
