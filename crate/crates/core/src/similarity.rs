//! Task-level dissimilarity built from per-feature weighted Fréchet distances.
//!
//! For a reference task `t` and a compared task `t'`, each feature of `t`
//! contributes its importance times the distance to a feature of `t'`:
//! the same-named feature under [`Matching::ByName`], or the closest one
//! under [`Matching::BestMatch`]. Zero means identical explanation profiles.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frechet::{weighted_frechet_with, FrechetOptions};
use crate::types::{Matching, SimilarityMatrix, TaskProfile};

/// Default stabilizer in the performance factor.
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityOptions {
    pub matching: Matching,
    pub apply_gamma: bool,
    pub epsilon: f64,
    pub frechet: FrechetOptions,
}

impl Default for SimilarityOptions {
    fn default() -> Self {
        Self {
            matching: Matching::ByName,
            apply_gamma: false,
            epsilon: DEFAULT_EPSILON,
            frechet: FrechetOptions::default(),
        }
    }
}

impl SimilarityOptions {
    pub fn with_matching(mut self, matching: Matching) -> Self {
        self.matching = matching;
        self
    }

    pub fn with_gamma(mut self, apply: bool) -> Self {
        self.apply_gamma = apply;
        self
    }
}

/// One feature's contribution to `delta_t(t')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTerm {
    pub feature: String,
    /// Feature of the compared task the distance was taken against.
    pub matched: String,
    pub distance: f64,
    pub importance: f64,
}

impl FeatureTerm {
    pub fn contribution(&self) -> f64 {
        self.importance * self.distance
    }
}

/// Per-feature terms of `delta_t(t')`, in the reference task's feature order.
///
/// Under by-name matching a feature missing from `t'` falls back to its
/// closest feature of `t'`; at least one name must be shared. Ties in the
/// closest-feature search go to the lowest feature index of `t'`.
pub fn similarity_terms(
    reference: &TaskProfile,
    compared: &TaskProfile,
    opts: &SimilarityOptions,
) -> Result<Vec<FeatureTerm>> {
    if opts.matching == Matching::ByName
        && !reference.features().any(|f| compared.feature_index(f).is_some())
    {
        return Err(Error::invalid(format!(
            "tasks `{}` and `{}` share no feature names",
            reference.task_id(),
            compared.task_id()
        )));
    }
    let closest = |curve| -> Result<(usize, f64)> {
        let mut best = (0usize, f64::INFINITY);
        for (j, other) in compared.curves().iter().enumerate() {
            let d = weighted_frechet_with(curve, other, &opts.frechet)?;
            if d < best.1 {
                best = (j, d);
            }
        }
        Ok(best)
    };
    reference
        .curves()
        .iter()
        .zip(reference.importance())
        .map(|(curve, &importance)| {
            let same = match opts.matching {
                Matching::ByName => compared.feature_index(curve.feature()),
                Matching::BestMatch => None,
            };
            let (j, distance) = match same {
                Some(j) => (j, weighted_frechet_with(curve, &compared.curves()[j], &opts.frechet)?),
                None => closest(curve)?,
            };
            Ok(FeatureTerm {
                feature: curve.feature().to_string(),
                matched: compared.curves()[j].feature().to_string(),
                distance,
                importance,
            })
        })
        .collect()
}

/// `delta_t(t')`: importance-weighted sum of per-feature distances.
pub fn task_similarity(
    reference: &TaskProfile,
    compared: &TaskProfile,
    matching: Matching,
) -> Result<f64> {
    task_similarity_with(reference, compared, &SimilarityOptions::default().with_matching(matching))
}

pub fn task_similarity_with(
    reference: &TaskProfile,
    compared: &TaskProfile,
    opts: &SimilarityOptions,
) -> Result<f64> {
    Ok(similarity_terms(reference, compared, opts)?
        .iter()
        .map(FeatureTerm::contribution)
        .sum())
}

/// `min(L, L') / (max(L, L') + epsilon)`.
pub fn performance_gamma(loss: f64, other_loss: f64, epsilon: f64) -> Result<f64> {
    if !(loss >= 0.0 && other_loss >= 0.0) || !loss.is_finite() || !other_loss.is_finite() {
        return Err(Error::invalid(format!(
            "losses must be finite and non-negative, got {loss} and {other_loss}"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(loss.min(other_loss) / (loss.max(other_loss) + epsilon))
}

/// `gamma * delta`.
pub fn scaled_similarity(delta: f64, gamma: f64) -> f64 {
    gamma * delta
}

/// Loss threshold for flagging unreliable tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tau {
    /// Median loss across the tasks.
    Median,
    Value(f64),
}

impl Tau {
    pub fn resolve(self, losses: &[f64]) -> f64 {
        match self {
            Tau::Value(v) => v,
            Tau::Median => median(losses),
        }
    }
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tau::Median => f.write_str("median"),
            Tau::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Tau {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "median" => Ok(Tau::Median),
            "inf" | "+inf" | "infinity" => Ok(Tau::Value(f64::INFINITY)),
            v => v
                .parse::<f64>()
                .map(Tau::Value)
                .map_err(|_| Error::invalid(format!("tau must be `median` or a number, got `{v}`"))),
        }
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Flags every task whose loss strictly exceeds the threshold.
pub fn flag_unreliable(losses: &[f64], tau: Tau) -> Result<Vec<bool>> {
    if losses.is_empty() {
        return Err(Error::invalid("no losses to flag"));
    }
    let threshold = tau.resolve(losses);
    Ok(losses.iter().map(|&l| l > threshold).collect())
}

/// Sets the `flagged` bit of every profile; all profiles must carry a loss.
pub fn flag_profiles(profiles: &[TaskProfile], tau: Tau) -> Result<Vec<TaskProfile>> {
    let losses = losses_of(profiles)?;
    let flags = flag_unreliable(&losses, tau)?;
    Ok(profiles
        .iter()
        .zip(flags)
        .map(|(p, f)| p.clone().with_flag(f))
        .collect())
}

fn losses_of(profiles: &[TaskProfile]) -> Result<Vec<f64>> {
    profiles
        .iter()
        .map(|p| {
            p.loss()
                .ok_or_else(|| Error::invalid(format!("task `{}` has no loss", p.task_id())))
        })
        .collect()
}

/// All pairwise terms, computed in parallel. Entry `[i][j]` holds the terms
/// of `delta_i(j)`; the diagonal is empty.
pub fn pairwise_terms(
    profiles: &[TaskProfile],
    opts: &SimilarityOptions,
) -> Result<Vec<Vec<Vec<FeatureTerm>>>> {
    let t = profiles.len();
    let cells: Vec<Vec<FeatureTerm>> = (0..t * t)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c / t, c % t);
            if i == j {
                Ok(Vec::new())
            } else {
                similarity_terms(&profiles[i], &profiles[j], opts)
            }
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(t);
    let mut it = cells.into_iter();
    for _ in 0..t {
        rows.push(it.by_ref().take(t).collect());
    }
    Ok(rows)
}

/// Matrix of `delta_t(t')` with the reference task on rows, optionally
/// multiplied by the pair's performance factor.
pub fn similarity_matrix(
    profiles: &[TaskProfile],
    opts: &SimilarityOptions,
) -> Result<SimilarityMatrix> {
    let terms = pairwise_terms(profiles, opts)?;
    matrix_from_terms(profiles, &terms, opts)
}

/// Assembles the matrix from already computed pairwise terms.
pub fn matrix_from_terms(
    profiles: &[TaskProfile],
    terms: &[Vec<Vec<FeatureTerm>>],
    opts: &SimilarityOptions,
) -> Result<SimilarityMatrix> {
    let t = profiles.len();
    if t < 2 {
        return Err(Error::invalid("a similarity matrix needs at least 2 tasks"));
    }
    let losses = if opts.apply_gamma {
        Some(losses_of(profiles)?)
    } else {
        None
    };
    let mut values = vec![0.0; t * t];
    for i in 0..t {
        for j in 0..t {
            if i == j {
                continue;
            }
            let delta: f64 = terms[i][j].iter().map(FeatureTerm::contribution).sum();
            values[i * t + j] = match &losses {
                Some(l) => scaled_similarity(delta, performance_gamma(l[i], l[j], opts.epsilon)?),
                None => delta,
            };
        }
    }
    SimilarityMatrix::new(
        profiles.iter().map(|p| p.task_id().to_string()).collect(),
        values,
        opts.apply_gamma,
        opts.matching,
    )
}

/// Greedy grouping of tasks by cosine similarity of their importance
/// vectors (over the union of feature names, missing features read as 0).
/// A task joins the first cluster whose first member is at least
/// `threshold`-similar, otherwise it opens a new cluster.
pub fn cosine_prefilter(profiles: &[TaskProfile], threshold: f64) -> Result<Vec<Vec<usize>>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold {threshold} outside [0, 1]")));
    }
    let mut names: Vec<&str> = Vec::new();
    for p in profiles {
        for f in p.features() {
            if !names.contains(&f) {
                names.push(f);
            }
        }
    }
    let vectors: Vec<Vec<f64>> = profiles
        .iter()
        .map(|p| names.iter().map(|n| p.importance_of(n).unwrap_or(0.0)).collect())
        .collect();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        match clusters
            .iter_mut()
            .find(|c| cosine(&vectors[c[0]], v) >= threshold)
        {
            Some(c) => c.push(i),
            None => clusters.push(vec![i]),
        }
    }
    Ok(clusters)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{AleCurve, GridKind};

    fn curve(task: &str, feature: &str, values: &[f64]) -> AleCurve {
        let k = values.len();
        AleCurve::new(
            task,
            feature,
            (0..k).map(|i| i as f64).collect(),
            values.to_vec(),
            vec![1.0 / k as f64; k],
            vec![1; k],
            GridKind::Common,
        )
        .unwrap()
    }

    fn profile(task: &str, curves: &[(&str, &[f64])], imp: &[f64], loss: Option<f64>) -> TaskProfile {
        TaskProfile::new(
            task,
            curves.iter().map(|(f, v)| curve(task, f, v)).collect(),
            imp.to_vec(),
            loss,
        )
        .unwrap()
    }

    #[test]
    fn identical_profiles_have_zero_distance() {
        let a = profile("a", &[("x", &[0.0, 1.0]), ("y", &[2.0, 0.0])], &[0.4, 0.6], None);
        let b = profile("b", &[("x", &[0.0, 1.0]), ("y", &[2.0, 0.0])], &[0.4, 0.6], None);
        assert_eq!(task_similarity(&a, &b, Matching::ByName).unwrap(), 0.0);
        assert_eq!(task_similarity(&a, &a, Matching::BestMatch).unwrap(), 0.0);
    }

    #[test]
    fn single_feature_distance() {
        let a = profile("a", &[("x", &[0.0])], &[1.0], None);
        let b = profile("b", &[("x", &[5.0])], &[1.0], None);
        assert_eq!(task_similarity(&a, &b, Matching::ByName).unwrap(), 5.0);
    }

    #[test]
    fn table_style_aggregation() {
        // per-feature distances from the synthetic benchmark's Task 1 / Task 2 column
        let d = [10.41, 9.46, 1.75, 7.89, 4.73];
        let w = [0.19, 0.19, 0.09, 0.27, 0.26];
        let delta: f64 = d.iter().zip(&w).map(|(a, b)| a * b).sum();
        // the published importances are rounded to two decimals
        assert!((delta - 7.33).abs() < 0.05);
    }

    #[test]
    fn best_match_never_exceeds_by_name() {
        let a = profile("a", &[("x", &[0.0, 3.0]), ("y", &[1.0, 1.0])], &[0.5, 0.5], None);
        let b = profile("b", &[("x", &[1.0, 1.0]), ("y", &[0.0, 3.0])], &[0.5, 0.5], None);
        let by_name = task_similarity(&a, &b, Matching::ByName).unwrap();
        let best = task_similarity(&a, &b, Matching::BestMatch).unwrap();
        assert!(best <= by_name);
        assert_eq!(best, 0.0);
    }

    #[test]
    fn missing_feature_falls_back_to_closest() {
        let a = profile("a", &[("x", &[0.0, 1.0]), ("z", &[4.0, 4.0])], &[0.5, 0.5], None);
        let b = profile("b", &[("x", &[0.0, 1.0]), ("y", &[4.0, 4.5])], &[0.5, 0.5], None);
        let terms = similarity_terms(&a, &b, &SimilarityOptions::default()).unwrap();
        assert_eq!(terms[1].matched, "y");
        assert!((terms[1].distance - 0.5).abs() < 1e-12);

        let c = profile("c", &[("w", &[0.0, 1.0])], &[1.0], None);
        assert!(task_similarity(&a, &c, Matching::ByName).is_err());
        assert!(task_similarity(&a, &c, Matching::BestMatch).is_ok());
    }

    #[test]
    fn best_match_ties_go_to_lowest_index() {
        let a = profile("a", &[("x", &[0.0, 0.0])], &[1.0], None);
        let b = profile("b", &[("p", &[1.0, 1.0]), ("q", &[-1.0, -1.0])], &[0.5, 0.5], None);
        let opts = SimilarityOptions::default().with_matching(Matching::BestMatch);
        assert_eq!(similarity_terms(&a, &b, &opts).unwrap()[0].matched, "p");
    }

    #[test]
    fn gamma_examples() {
        assert!((performance_gamma(0.5, 0.5, 1e-8).unwrap() - 0.5 / (0.5 + 1e-8)).abs() < 1e-15);
        assert!((performance_gamma(1.0, 2.0, 1e-8).unwrap() - 0.5).abs() < 1e-8);
        assert_eq!(performance_gamma(0.0, 0.0, 1e-8).unwrap(), 0.0);
        assert!(performance_gamma(-1.0, 0.0, 1e-8).is_err());
    }

    #[test]
    fn scaled_examples() {
        assert!((scaled_similarity(29.73, 21.34 / 29.73) - 21.34).abs() < 1e-12);
        assert_eq!(scaled_similarity(3.5, 1.0), 3.5);
        assert_eq!(scaled_similarity(3.5, 0.0), 0.0);
    }

    #[test]
    fn flag_examples() {
        assert_eq!(flag_unreliable(&[1.0, 2.0, 3.0], Tau::Median).unwrap(), vec![false, false, true]);
        assert_eq!(
            flag_unreliable(&[1.0, 2.0, 3.0], Tau::Value(f64::INFINITY)).unwrap(),
            vec![false; 3]
        );
        assert_eq!(flag_unreliable(&[4.0], Tau::Median).unwrap(), vec![false]);
        assert!(flag_unreliable(&[], Tau::Median).is_err());
        assert_eq!("median".parse::<Tau>().unwrap(), Tau::Median);
        assert_eq!("0.5".parse::<Tau>().unwrap(), Tau::Value(0.5));
    }

    #[test]
    fn matrix_examples() {
        let a = profile("a", &[("x", &[0.0, 1.0])], &[1.0], Some(1.0));
        let b = profile("b", &[("x", &[0.0, 1.0])], &[1.0], Some(1.0));
        let m = similarity_matrix(&[a.clone(), b], &SimilarityOptions::default()).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));

        let c = profile("c", &[("x", &[1.0, 3.0])], &[1.0], Some(2.0));
        let raw = similarity_matrix(&[a.clone(), c.clone()], &SimilarityOptions::default()).unwrap();
        assert_eq!(raw.max_asymmetry(), 0.0);
        let scaled =
            similarity_matrix(&[a, c], &SimilarityOptions::default().with_gamma(true)).unwrap();
        assert!(scaled.scaled());
        assert!(scaled.get(0, 1) < raw.get(0, 1));
        assert!((scaled.get(0, 1) - raw.get(0, 1) * 1.0 / (2.0 + 1e-8)).abs() < 1e-12);
    }

    #[test]
    fn gamma_requires_losses() {
        let a = profile("a", &[("x", &[0.0, 1.0])], &[1.0], None);
        let b = profile("b", &[("x", &[0.0, 2.0])], &[1.0], None);
        assert!(similarity_matrix(&[a, b], &SimilarityOptions::default().with_gamma(true)).is_err());
    }

    #[test]
    fn prefilter_examples() {
        let mk = |t: &str, w: &[f64]| {
            profile(t, &[("x", &[0.0]), ("y", &[0.0])], w, None)
        };
        let same = [mk("a", &[0.5, 0.5]), mk("b", &[0.5, 0.5])];
        assert_eq!(cosine_prefilter(&same, 0.9).unwrap(), vec![vec![0, 1]]);
        let orth = [mk("a", &[1.0, 0.0]), mk("b", &[0.0, 1.0])];
        assert_eq!(cosine_prefilter(&orth, 0.5).unwrap(), vec![vec![0], vec![1]]);
        // 0.48 / 0.52
        let close = [mk("a", &[0.6, 0.4]), mk("b", &[0.4, 0.6])];
        assert!((cosine(&[0.6, 0.4], &[0.4, 0.6]) - 0.48 / 0.52).abs() < 1e-15);
        assert_eq!(cosine_prefilter(&close, 0.9).unwrap(), vec![vec![0, 1]]);
    }
}
