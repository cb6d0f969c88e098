//! Domain types shared by every stage of the pipeline.
//!
//! Every constructor validates its invariants, so a value of any of these
//! types is always well-formed. All types are immutable after construction.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of a proportions vector.
pub const PROPORTION_SUM_TOL: f64 = 1e-12;
/// Tolerance on the sum of an importance vector.
pub const IMPORTANCE_SUM_TOL: f64 = 1e-9;
/// Tolerance on the count-weighted mean of a raw centered curve.
pub const CENTERING_TOL: f64 = 1e-9;

/// A task's tabular samples (row-major, `n x d`) with targets and feature names.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    task_id: String,
    feature_names: Vec<String>,
    samples: Vec<f64>,
    targets: Vec<f64>,
}

impl TaskDataset {
    /// Validates raw rows and builds a dataset. Rows are never dropped.
    pub fn new(
        task_id: impl Into<String>,
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        let d = feature_names.len();
        let mut samples = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} columns but {d} feature names were given",
                    row.len()
                )));
            }
            samples.extend_from_slice(row);
        }
        Self::from_row_major(task_id, feature_names, samples, targets)
    }

    /// Builds a dataset from a flat row-major sample buffer.
    pub fn from_row_major(
        task_id: impl Into<String>,
        feature_names: Vec<String>,
        samples: Vec<f64>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        let d = feature_names.len();
        let n = targets.len();
        if d == 0 {
            return Err(Error::DimensionMismatch("no features".into()));
        }
        if n < 2 {
            return Err(Error::DimensionMismatch(format!(
                "at least 2 samples are required, got {n}"
            )));
        }
        if samples.len() != n * d {
            return Err(Error::DimensionMismatch(format!(
                "{} sample values for {n} targets and {d} features",
                samples.len()
            )));
        }
        let mut seen = HashSet::with_capacity(d);
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateFeature(name.clone()));
            }
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        if let Some(row) = targets.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col: d });
        }
        Ok(Self {
            task_id: task_id.into(),
            feature_names,
            samples,
            targets,
        })
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Row-major sample buffer.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.samples[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.n_features())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Returns a copy with a different task id.
    pub fn renamed(&self, task_id: impl Into<String>) -> Self {
        Self {
            task_id: task_id.into(),
            ..self.clone()
        }
    }
}

/// Smallest admissible bin proportion for a task with `n` observations.
pub fn proportion_floor(n: usize) -> f64 {
    1.0 / (10.0 * n as f64)
}

/// Normalizes bin counts to proportions, raising every entry to at least
/// `floor` and taking the excess from the entries above it, so the result
/// sums to one and respects the floor.
pub fn floored_proportions(counts: &[usize], floor: f64) -> Result<Vec<f64>> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("cannot build proportions from empty counts"));
    }
    if floor * counts.len() as f64 > 1.0 {
        return Err(Error::invalid(format!(
            "proportion floor {floor} is too large for {} bins",
            counts.len()
        )));
    }
    let raw: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let mut clamped = vec![false; raw.len()];
    let mut out = raw.clone();
    loop {
        let fixed_mass: f64 = clamped.iter().filter(|&&c| c).count() as f64 * floor;
        let free_raw: f64 = raw
            .iter()
            .zip(&clamped)
            .filter(|(_, &c)| !c)
            .map(|(p, _)| p)
            .sum();
        let scale = (1.0 - fixed_mass) / free_raw;
        let mut changed = false;
        for k in 0..raw.len() {
            if clamped[k] {
                out[k] = floor;
            } else {
                out[k] = raw[k] * scale;
                if out[k] < floor {
                    clamped[k] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(out)
}

/// Equal-width partition of one feature's observed range.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    feature: String,
    edges: Vec<f64>,
    counts: Vec<usize>,
    proportions: Vec<f64>,
}

impl Partition {
    pub fn new(feature: impl Into<String>, edges: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let feature = feature.into();
        if edges.len() < 2 {
            return Err(Error::invalid("a partition needs at least two edges"));
        }
        if counts.len() != edges.len() - 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} counts for {} intervals",
                counts.len(),
                edges.len() - 1
            )));
        }
        if !strictly_increasing(&edges) {
            return Err(Error::Invariant(format!(
                "partition edges for `{feature}` are not strictly increasing"
            )));
        }
        let n: usize = counts.iter().sum();
        let proportions = floored_proportions(&counts, proportion_floor(n))?;
        Ok(Self {
            feature,
            edges,
            counts,
            proportions,
        })
    }

    pub fn feature(&self) -> &str {
        &self.feature
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn n_observations(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Bin index (0-based) of `x` under the left-open, right-closed rule,
    /// with the minimum assigned to the first bin. Values outside the range
    /// clamp to the end bins.
    pub fn bin_of(&self, x: f64) -> usize {
        let k = self.edges[1..].partition_point(|&e| e < x);
        k.min(self.n_bins() - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Raw,
    Common,
}

/// Polygonal ALE curve: vertices `(knot, value)` with a data proportion per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AleCurve {
    task_id: String,
    feature: String,
    knots: Vec<f64>,
    values: Vec<f64>,
    proportions: Vec<f64>,
    counts: Vec<usize>,
    grid_kind: GridKind,
}

impl AleCurve {
    pub fn new(
        task_id: impl Into<String>,
        feature: impl Into<String>,
        knots: Vec<f64>,
        values: Vec<f64>,
        proportions: Vec<f64>,
        counts: Vec<usize>,
        grid_kind: GridKind,
    ) -> Result<Self> {
        let curve = Self {
            task_id: task_id.into(),
            feature: feature.into(),
            knots,
            values,
            proportions,
            counts,
            grid_kind,
        };
        curve.validate()?;
        Ok(curve)
    }

    /// Checks every invariant; also used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let k = self.knots.len();
        let ctx = || format!("curve `{}`/`{}`", self.task_id, self.feature);
        if k == 0 {
            return Err(Error::invalid(format!("{}: empty curve", ctx())));
        }
        if self.values.len() != k || self.proportions.len() != k || self.counts.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{}: {} knots, {} values, {} proportions, {} counts",
                ctx(),
                k,
                self.values.len(),
                self.proportions.len(),
                self.counts.len()
            )));
        }
        if !strictly_increasing(&self.knots) || self.knots.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invariant(format!("{}: knots not strictly increasing", ctx())));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant(format!("{}: non-finite value", ctx())));
        }
        if self.proportions.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::Invariant(format!("{}: proportion outside (0, 1]", ctx())));
        }
        let sum: f64 = self.proportions.iter().sum();
        if (sum - 1.0).abs() > PROPORTION_SUM_TOL {
            return Err(Error::Invariant(format!("{}: proportions sum to {sum}", ctx())));
        }
        if self.grid_kind == GridKind::Raw {
            let mean = count_weighted_mean(&self.values, &self.counts);
            if mean.abs() > CENTERING_TOL {
                return Err(Error::Invariant(format!(
                    "{}: count-weighted mean {mean:e} is not zero",
                    ctx()
                )));
            }
        }
        Ok(())
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn feature(&self) -> &str {
        &self.feature
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    /// Observation counts behind each vertex.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn grid_kind(&self) -> GridKind {
        self.grid_kind
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Same curve with replaced values; re-validated.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.task_id.clone(),
            self.feature.clone(),
            self.knots.clone(),
            values,
            self.proportions.clone(),
            self.counts.clone(),
            self.grid_kind,
        )
    }

    pub fn with_task_id(&self, task_id: impl Into<String>) -> Self {
        Self {
            task_id: task_id.into(),
            ..self.clone()
        }
    }
}

pub(crate) fn count_weighted_mean(values: &[f64], counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    values
        .iter()
        .zip(counts)
        .map(|(v, &c)| v * c as f64)
        .sum::<f64>()
        / total as f64
}

pub(crate) fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

/// Normalizes non-negative weights to sum to one.
pub fn normalize_importance(weights: &[f64]) -> Result<Vec<f64>> {
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::invalid(format!(
            "importance weights must be finite and non-negative, got {w}"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::invalid("at least one importance weight must be positive"));
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

/// A task's explanation surface: one curve per feature, normalized
/// importances aligned with the curves, and the model's empirical loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskProfile {
    task_id: String,
    curves: Vec<AleCurve>,
    importance: Vec<f64>,
    loss: Option<f64>,
    flagged: bool,
}

impl TaskProfile {
    pub fn new(
        task_id: impl Into<String>,
        curves: Vec<AleCurve>,
        importance: Vec<f64>,
        loss: Option<f64>,
    ) -> Result<Self> {
        let task_id = task_id.into();
        if curves.is_empty() {
            return Err(Error::invalid(format!("task `{task_id}` has no curves")));
        }
        if curves.len() != importance.len() {
            return Err(Error::DimensionMismatch(format!(
                "task `{task_id}`: {} curves but {} importances",
                curves.len(),
                importance.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &curves {
            if !seen.insert(c.feature()) {
                return Err(Error::DuplicateFeature(c.feature().to_string()));
            }
        }
        if importance.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
            return Err(Error::Invariant(format!(
                "task `{task_id}`: importance outside [0, 1]"
            )));
        }
        let sum: f64 = importance.iter().sum();
        if (sum - 1.0).abs() > IMPORTANCE_SUM_TOL {
            return Err(Error::Invariant(format!(
                "task `{task_id}`: importances sum to {sum}"
            )));
        }
        if let Some(l) = loss {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::invalid(format!("task `{task_id}`: invalid loss {l}")));
            }
        }
        Ok(Self {
            task_id,
            curves,
            importance,
            loss,
            flagged: false,
        })
    }

    /// Builds a profile with equal importance on every feature.
    pub fn uniform(
        task_id: impl Into<String>,
        curves: Vec<AleCurve>,
        loss: Option<f64>,
    ) -> Result<Self> {
        let d = curves.len().max(1);
        Self::new(task_id, curves, vec![1.0 / d as f64; d], loss)
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn curves(&self) -> &[AleCurve] {
        &self.curves
    }

    pub fn importance(&self) -> &[f64] {
        &self.importance
    }

    pub fn loss(&self) -> Option<f64> {
        self.loss
    }

    pub fn flagged(&self) -> bool {
        self.flagged
    }

    pub fn features(&self) -> impl Iterator<Item = &str> {
        self.curves.iter().map(|c| c.feature())
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.curves.iter().position(|c| c.feature() == name)
    }

    pub fn curve(&self, name: &str) -> Option<&AleCurve> {
        self.curves.iter().find(|c| c.feature() == name)
    }

    pub fn importance_of(&self, name: &str) -> Option<f64> {
        self.feature_index(name).map(|i| self.importance[i])
    }

    /// Replaces the importance vector; weights are renormalized.
    pub fn with_importance(&self, weights: &[f64]) -> Result<Self> {
        let importance = normalize_importance(weights)?;
        Self::new(self.task_id.clone(), self.curves.clone(), importance, self.loss)
            .map(|p| p.with_flag(self.flagged))
    }

    pub fn with_loss(&self, loss: Option<f64>) -> Result<Self> {
        Self::new(self.task_id.clone(), self.curves.clone(), self.importance.clone(), loss)
            .map(|p| p.with_flag(self.flagged))
    }

    pub fn with_curves(&self, curves: Vec<AleCurve>) -> Result<Self> {
        Self::new(self.task_id.clone(), curves, self.importance.clone(), self.loss)
            .map(|p| p.with_flag(self.flagged))
    }

    pub fn with_flag(mut self, flagged: bool) -> Self {
        self.flagged = flagged;
        self
    }
}

/// How features of the reference task are paired with the compared task's features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// Same-named features are compared.
    #[default]
    ByName,
    /// Each feature is compared to its closest feature of the other task.
    BestMatch,
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Matching::ByName => "by_name",
            Matching::BestMatch => "best_match",
        })
    }
}

impl FromStr for Matching {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by_name" | "by-name" | "name" => Ok(Matching::ByName),
            "best_match" | "best-match" | "best" => Ok(Matching::BestMatch),
            other => Err(Error::invalid(format!("unknown matching mode `{other}`"))),
        }
    }
}

/// Square matrix of task dissimilarities; row = reference task, column = compared task.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    task_ids: Vec<String>,
    values: Vec<f64>,
    scaled: bool,
    matching: Matching,
}

impl SimilarityMatrix {
    pub fn new(
        task_ids: Vec<String>,
        values: Vec<f64>,
        scaled: bool,
        matching: Matching,
    ) -> Result<Self> {
        let t = task_ids.len();
        if values.len() != t * t {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {t}x{t} matrix",
                values.len()
            )));
        }
        for i in 0..t {
            for j in 0..t {
                let v = values[i * t + j];
                if i == j && v != 0.0 {
                    return Err(Error::Invariant(format!("diagonal entry ({i}, {i}) is {v}")));
                }
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Invariant(format!("entry ({i}, {j}) is {v}")));
                }
            }
        }
        Ok(Self {
            task_ids,
            values,
            scaled,
            matching,
        })
    }

    pub fn task_ids(&self) -> &[String] {
        &self.task_ids
    }

    pub fn len(&self) -> usize {
        self.task_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.task_ids.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.len() + col]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let t = self.len();
        &self.values[i * t..(i + 1) * t]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self) -> bool {
        self.scaled
    }

    pub fn matching(&self) -> Matching {
        self.matching
    }

    pub fn index_of(&self, task_id: &str) -> Option<usize> {
        self.task_ids.iter().position(|t| t == task_id)
    }

    /// Largest `|d_ij - d_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let t = self.len();
        let mut worst = 0.0f64;
        for i in 0..t {
            for j in (i + 1)..t {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Column index of the smallest off-diagonal entry in row `i`
    /// (lowest index on ties). `None` for a 1x1 matrix.
    pub fn row_argmin(&self, i: usize) -> Option<usize> {
        (0..self.len())
            .filter(|&j| j != i)
            .min_by(|&a, &b| self.get(i, a).total_cmp(&self.get(i, b)))
    }
}
