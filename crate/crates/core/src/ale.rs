//! First-order accumulated local effects.
//!
//! A raw curve is estimated on an equal-width partition of the feature's
//! observed range: within each bin the model is evaluated at both bin
//! edges for every sample falling in that bin, the differences are averaged,
//! and the averages are accumulated from left to right. The accumulated
//! curve is then shifted so that its count-weighted mean is zero.
//!
//! Curves from different tasks are made comparable by interpolating them
//! onto a [`CommonGrid`] of pooled quantiles.

use crate::error::{Error, Result};
use crate::predict::Predictor;
use crate::types::{
    count_weighted_mean, floored_proportions, proportion_floor, strictly_increasing, AleCurve,
    GridKind, Partition, TaskDataset,
};

/// Default number of raw partition bins.
pub const DEFAULT_BINS: usize = 50;
/// Default number of common-grid knots.
pub const DEFAULT_GRID_KNOTS: usize = 50;
/// Default roughness penalty for [`smooth_curve`].
pub const DEFAULT_SMOOTH_LAMBDA: f64 = 10.0;

/// Splits `[min, max]` of `values` into `bins` intervals of equal width and
/// counts the observations in each (left-open, right-closed; the minimum
/// goes to the first interval).
pub fn equal_width_partition(feature: &str, values: &[f64], bins: usize) -> Result<Partition> {
    if values.len() < 2 {
        return Err(Error::invalid(format!(
            "feature `{feature}`: at least 2 values are required"
        )));
    }
    if bins == 0 {
        return Err(Error::invalid("number of bins must be positive"));
    }
    let (lo, hi) = min_max(values);
    if !(lo < hi) {
        return Err(Error::DegenerateFeature(feature.to_string()));
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    edges[bins] = hi;
    if !strictly_increasing(&edges) {
        return Err(Error::DegenerateFeature(feature.to_string()));
    }
    let mut counts = vec![0usize; bins];
    for &x in values {
        let k = edges[1..].partition_point(|&e| e < x).min(bins - 1);
        counts[k] += 1;
    }
    Partition::new(feature, edges, counts)
}

/// Number of bins to use for a feature: `requested`, or the number of
/// distinct observed values when that is smaller.
pub fn effective_bins(values: &[f64], requested: usize) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    requested.min(sorted.len()).max(1)
}

/// Accumulated (uncentered) local effects of feature column `feature` on the
/// given partition. Empty bins add nothing and carry the running total forward.
pub fn uncentered_ale<P: Predictor + ?Sized>(
    model: &P,
    data: &TaskDataset,
    feature: usize,
    partition: &Partition,
) -> Result<Vec<f64>> {
    let d = data.n_features();
    if feature >= d {
        return Err(Error::invalid(format!("feature index {feature} out of range")));
    }
    if model.n_features() != d {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} features, dataset `{}` has {d}",
            model.n_features(),
            data.task_id()
        )));
    }
    let bins = partition.n_bins();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); bins];
    for (i, row) in data.rows().enumerate() {
        members[partition.bin_of(row[feature])].push(i);
    }
    for (k, m) in members.iter().enumerate() {
        if m.len() != partition.counts()[k] {
            return Err(Error::invalid(format!(
                "partition for `{}` was not built from this dataset's column",
                partition.feature()
            )));
        }
    }

    let edges = partition.edges();
    let name = &data.feature_names()[feature];
    let mut out = Vec::with_capacity(bins);
    let mut acc = 0.0;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (k, idx) in members.iter().enumerate() {
        if idx.is_empty() {
            out.push(acc);
            continue;
        }
        lower.clear();
        upper.clear();
        for &i in idx {
            let row = data.row(i);
            lower.extend_from_slice(row);
            upper.extend_from_slice(row);
            let at = lower.len() - d + feature;
            lower[at] = edges[k];
            upper[at] = edges[k + 1];
        }
        let wrap = |e: Error| Error::Prediction {
            task: data.task_id().to_string(),
            feature: name.clone(),
            bin: k,
            sample: idx[0],
            reason: e.to_string(),
        };
        let lo = model.predict_batch(&lower).map_err(wrap)?;
        let hi = model.predict_batch(&upper).map_err(wrap)?;
        let mut sum = 0.0;
        for (s, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::Prediction {
                    task: data.task_id().to_string(),
                    feature: name.clone(),
                    bin: k,
                    sample: idx[s],
                    reason: "non-finite prediction".into(),
                });
            }
            sum += b - a;
        }
        acc += sum / idx.len() as f64;
        out.push(acc);
    }
    Ok(out)
}

/// Subtracts the count-weighted mean of `uncentered` from every entry.
pub fn center_ale(uncentered: &[f64], partition: &Partition) -> Result<Vec<f64>> {
    if uncentered.len() != partition.n_bins() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} bins",
            uncentered.len(),
            partition.n_bins()
        )));
    }
    let mean = count_weighted_mean(uncentered, partition.counts());
    Ok(uncentered.iter().map(|g| g - mean).collect())
}

/// Full raw-curve estimation for one feature: partition, accumulate, center.
pub fn compute_ale<P: Predictor + ?Sized>(
    model: &P,
    data: &TaskDataset,
    feature: usize,
    bins: usize,
) -> Result<AleCurve> {
    let name = data
        .feature_names()
        .get(feature)
        .ok_or_else(|| Error::invalid(format!("feature index {feature} out of range")))?
        .clone();
    if bins == 0 {
        return Err(Error::invalid("number of bins must be positive"));
    }
    let column = data.column(feature);
    let bins = effective_bins(&column, bins);
    let partition = equal_width_partition(&name, &column, bins)?;
    let raw = uncentered_ale(model, data, feature, &partition)?;
    let values = center_ale(&raw, &partition)?;
    AleCurve::new(
        data.task_id(),
        name,
        partition.edges()[1..].to_vec(),
        values,
        partition.proportions().to_vec(),
        partition.counts().to_vec(),
        GridKind::Raw,
    )
}

/// Task-independent knots for one feature, shared by every task's curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonGrid {
    feature: String,
    knots: Vec<f64>,
}

impl CommonGrid {
    pub fn new(feature: impl Into<String>, knots: Vec<f64>) -> Result<Self> {
        let feature = feature.into();
        if knots.len() < 2 {
            return Err(Error::invalid(format!(
                "common grid for `{feature}` needs at least 2 knots"
            )));
        }
        if !strictly_increasing(&knots) {
            return Err(Error::Invariant(format!(
                "common grid for `{feature}` is not strictly increasing"
            )));
        }
        Ok(Self { feature, knots })
    }

    pub fn feature(&self) -> &str {
        &self.feature
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }
}

/// Linear-interpolation quantile of sorted data (`h = (n-1)p + 1`).
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// `knots` pooled quantiles (probabilities `i/(knots-1)`) of all tasks'
/// observations of one feature. Repeated quantiles are collapsed.
pub fn pooled_quantile_grid(
    feature: &str,
    per_task_values: &[&[f64]],
    knots: usize,
) -> Result<CommonGrid> {
    if knots < 2 {
        return Err(Error::invalid("a common grid needs at least 2 knots"));
    }
    let mut pooled: Vec<f64> = per_task_values.iter().flat_map(|v| v.iter().copied()).collect();
    if pooled.len() < knots {
        return Err(Error::invalid(format!(
            "feature `{feature}`: {} pooled values for {knots} knots",
            pooled.len()
        )));
    }
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("feature `{feature}`: non-finite value")));
    }
    pooled.sort_by(f64::total_cmp);
    if pooled[0] == pooled[pooled.len() - 1] {
        return Err(Error::DegenerateFeature(feature.to_string()));
    }
    let mut q: Vec<f64> = (0..knots)
        .map(|i| quantile_sorted(&pooled, i as f64 / (knots - 1) as f64))
        .collect();
    q.dedup_by(|b, a| *b <= *a);
    CommonGrid::new(feature, q)
}

/// Linear interpolation through `(xs, ys)`, clamped to the end values.
pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&k| k < x);
    if i == 0 {
        return ys[0];
    }
    if i == xs.len() {
        return ys[xs.len() - 1];
    }
    if xs[i] == x {
        return ys[i];
    }
    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

/// Counts observations per knot of `knots`, where each knot owns the values
/// closer to it than to its neighbours (cell boundaries at the midpoints
/// between consecutive knots; a value on a boundary goes to the left knot).
pub fn grid_cell_counts(knots: &[f64], values: &[f64]) -> Vec<usize> {
    let mids: Vec<f64> = knots.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut counts = vec![0usize; knots.len()];
    for &x in values {
        counts[mids.partition_point(|&m| m < x)] += 1;
    }
    counts
}

/// Interpolates a raw curve onto a common grid. Proportions are recomputed
/// from the task's own observations of the feature.
pub fn resample_to_grid(
    curve: &AleCurve,
    grid: &CommonGrid,
    task_values: &[f64],
) -> Result<AleCurve> {
    if curve.grid_kind() != GridKind::Raw {
        return Err(Error::invalid(format!(
            "curve `{}`/`{}` is already on a common grid",
            curve.task_id(),
            curve.feature()
        )));
    }
    if grid.knots().len() < 2 {
        return Err(Error::invalid("common grid needs at least 2 knots"));
    }
    if task_values.is_empty() {
        return Err(Error::invalid("no observations to weight the grid"));
    }
    let values: Vec<f64> = grid
        .knots()
        .iter()
        .map(|&g| interpolate(curve.knots(), curve.values(), g))
        .collect();
    let counts = grid_cell_counts(grid.knots(), task_values);
    let proportions = floored_proportions(&counts, proportion_floor(task_values.len()))?;
    AleCurve::new(
        curve.task_id(),
        curve.feature(),
        grid.knots().to_vec(),
        values,
        proportions,
        counts,
        GridKind::Common,
    )
}

/// Minimizer of `sum (v_k - s_k)^2 + lambda * sum (s_{k+1} - 2 s_k + s_{k-1})^2`.
///
/// Solves `(I + lambda D'D) s = v` with a banded Cholesky factorization
/// (half-bandwidth 2).
pub fn whittaker_smooth(values: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("smoothing penalty must be >= 0, got {lambda}")));
    }
    let n = values.len();
    if n < 3 || lambda == 0.0 {
        return Ok(values.to_vec());
    }
    const BW: usize = 2;
    // band[i][k] holds A[i][i - k]
    let mut band = vec![[0.0f64; BW + 1]; n];
    for row in band.iter_mut() {
        row[0] = 1.0;
    }
    let stencil = [1.0, -2.0, 1.0];
    for r in 0..n - 2 {
        for a in 0..3 {
            for b in 0..=a {
                band[r + a][a - b] += lambda * stencil[a] * stencil[b];
            }
        }
    }
    // in-place Cholesky: A = L L'
    for i in 0..n {
        for j in i.saturating_sub(BW)..=i {
            let mut sum = band[i][i - j];
            for k in i.saturating_sub(BW)..j {
                sum -= band[i][i - k] * band[j][j - k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return Err(Error::Numerical("smoothing system is not positive definite".into()));
                }
                band[i][0] = sum.sqrt();
            } else {
                band[i][i - j] = sum / band[j][0];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = values[i];
        for k in i.saturating_sub(BW)..i {
            sum -= band[i][i - k] * y[k];
        }
        y[i] = sum / band[i][0];
    }
    let mut s = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n.min(i + BW + 1) {
            sum -= band[k][k - i] * s[k];
        }
        s[i] = sum / band[i][0];
    }
    Ok(s)
}

/// Roughness-penalized smoothing of a curve's values. Knots, proportions
/// and counts are kept; the result is re-centered (count-weighted for raw
/// curves, proportion-weighted for common-grid curves).
pub fn smooth_curve(curve: &AleCurve, lambda: f64) -> Result<AleCurve> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("smoothing penalty must be >= 0, got {lambda}")));
    }
    if curve.len() < 3 {
        return Err(Error::invalid(format!(
            "curve `{}`/`{}` has fewer than 3 knots",
            curve.task_id(),
            curve.feature()
        )));
    }
    let mut s = whittaker_smooth(curve.values(), lambda)?;
    let mean = match curve.grid_kind() {
        GridKind::Raw => count_weighted_mean(&s, curve.counts()),
        GridKind::Common => s.iter().zip(curve.proportions()).map(|(v, p)| v * p).sum(),
    };
    for v in &mut s {
        *v -= mean;
    }
    curve.with_values(s)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}
