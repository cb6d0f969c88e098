use crate::error::{Error, Result};

/// A fitted model: maps a `d`-dimensional point to a real prediction.
///
/// Implementations must be deterministic and safe to call from several
/// threads at once.
pub trait Predictor: Send + Sync {
    fn n_features(&self) -> usize;

    fn predict(&self, row: &[f64]) -> Result<f64>;

    /// Predicts every row of a row-major buffer.
    fn predict_batch(&self, rows: &[f64]) -> Result<Vec<f64>> {
        let d = self.n_features();
        if d == 0 || rows.len() % d != 0 {
            return Err(Error::DimensionMismatch(format!(
                "batch of {} values is not a multiple of {d} features",
                rows.len()
            )));
        }
        rows.chunks_exact(d).map(|r| self.predict(r)).collect()
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn predict(&self, row: &[f64]) -> Result<f64> {
        (**self).predict(row)
    }

    fn predict_batch(&self, rows: &[f64]) -> Result<Vec<f64>> {
        (**self).predict_batch(rows)
    }
}

impl<P: Predictor + ?Sized> Predictor for std::sync::Arc<P> {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn predict(&self, row: &[f64]) -> Result<f64> {
        (**self).predict(row)
    }

    fn predict_batch(&self, rows: &[f64]) -> Result<Vec<f64>> {
        (**self).predict_batch(rows)
    }
}

/// Wraps a plain closure as a [`Predictor`].
pub struct FnPredictor<F> {
    n_features: usize,
    f: F,
}

impl<F> FnPredictor<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(n_features: usize, f: F) -> Self {
        Self { n_features, f }
    }
}

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch(format!(
                "expected {} features, got {}",
                self.n_features,
                row.len()
            )));
        }
        Ok((self.f)(row))
    }
}

/// Builds a [`Predictor`] from a closure.
pub fn from_fn<F>(n_features: usize, f: F) -> FnPredictor<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    FnPredictor::new(n_features, f)
}
