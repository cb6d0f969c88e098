//! Small learned predictors for exercising the pipeline on real data, and
//! the empirical losses that feed importance and performance scaling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::predict::Predictor;
use crate::types::TaskDataset;

/// Default neighbour count: `max(5, n / 100)`.
pub fn default_k(n: usize) -> usize {
    (n / 100).max(5)
}

/// k-nearest-neighbour regressor on min-max normalized inputs.
///
/// Ties in distance are broken by training index, so predictions are
/// fully deterministic.
#[derive(Debug, Clone)]
pub struct KnnRegressor {
    k: usize,
    d: usize,
    offset: Vec<f64>,
    scale: Vec<f64>,
    points: Vec<f64>,
    targets: Vec<f64>,
    tree: KdTree,
}

pub fn fit_knn(data: &TaskDataset, k: usize) -> Result<KnnRegressor> {
    KnnRegressor::fit(data, k)
}

impl KnnRegressor {
    pub fn fit(data: &TaskDataset, k: usize) -> Result<Self> {
        let n = data.n_samples();
        let d = data.n_features();
        if k == 0 || k > n {
            return Err(Error::invalid(format!("k = {k} must lie in 1..={n}")));
        }
        let mut offset = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in 0..d {
            let col = data.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            offset[j] = lo;
            if hi > lo {
                scale[j] = 1.0 / (hi - lo);
            }
        }
        let mut points = Vec::with_capacity(n * d);
        for row in data.rows() {
            points.extend(row.iter().enumerate().map(|(j, x)| (x - offset[j]) * scale[j]));
        }
        let tree = KdTree::build(&points, d);
        Ok(Self {
            k,
            d,
            offset,
            scale,
            points,
            targets: data.targets().to_vec(),
            tree,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Training indices of the `k` nearest neighbours, nearest first.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let q: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, x)| (x - self.offset[j]) * self.scale[j])
            .collect();
        self.tree.k_nearest(&self.points, self.d, &q, self.k)
    }
}

impl Predictor for KnnRegressor {
    fn n_features(&self) -> usize {
        self.d
    }

    fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "expected {} features, got {}",
                self.d,
                row.len()
            )));
        }
        let mut idx = self.neighbours(row);
        idx.sort_unstable();
        Ok(idx.iter().map(|&i| self.targets[i]).sum::<f64>() / idx.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<usize>),
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone)]
struct KdTree {
    root: Node,
}

const LEAF_SIZE: usize = 64;

impl KdTree {
    fn build(points: &[f64], d: usize) -> Self {
        let idx: Vec<usize> = (0..points.len() / d).collect();
        Self {
            root: Self::build_node(points, d, idx, 0),
        }
    }

    fn build_node(points: &[f64], d: usize, mut idx: Vec<usize>, depth: usize) -> Node {
        if idx.len() <= LEAF_SIZE {
            return Node::Leaf(idx);
        }
        // split on the widest axis
        let axis = (0..d)
            .max_by(|&a, &b| {
                let spread = |ax: usize| {
                    let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &i| {
                        let v = points[i * d + ax];
                        (l.min(v), h.max(v))
                    });
                    hi - lo
                };
                spread(a).total_cmp(&spread(b))
            })
            .unwrap_or(depth % d);
        idx.sort_by(|&a, &b| points[a * d + axis].total_cmp(&points[b * d + axis]).then(a.cmp(&b)));
        let mid = idx.len() / 2;
        let value = points[idx[mid] * d + axis];
        let right = idx.split_off(mid);
        Node::Split {
            axis,
            value,
            left: Box::new(Self::build_node(points, d, idx, depth + 1)),
            right: Box::new(Self::build_node(points, d, right, depth + 1)),
        }
    }

    fn k_nearest(&self, points: &[f64], d: usize, q: &[f64], k: usize) -> Vec<usize> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        let mut offsets = vec![0.0; d];
        Self::search(&self.root, points, d, q, k, &mut heap, &mut offsets, 0.0);
        heap.into_sorted_vec().into_iter().map(|c| c.index).collect()
    }

    /// `cell_dist` is the squared distance from `q` to the node's cell,
    /// `offsets` its per-axis components.
    #[allow(clippy::too_many_arguments)]
    fn search(
        node: &Node,
        points: &[f64],
        d: usize,
        q: &[f64],
        k: usize,
        heap: &mut BinaryHeap<Candidate>,
        offsets: &mut [f64],
        cell_dist: f64,
    ) {
        match node {
            Node::Leaf(idx) => {
                for &i in idx {
                    let p = &points[i * d..(i + 1) * d];
                    let dist: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                    let c = Candidate { dist, index: i };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                Self::search(near, points, d, q, k, heap, offsets, cell_dist);
                let old = offsets[*axis];
                let far_dist = cell_dist - old * old + diff * diff;
                if heap.len() < k || far_dist <= heap.peek().expect("heap is non-empty").dist {
                    offsets[*axis] = diff;
                    Self::search(far, points, d, q, k, heap, offsets, far_dist);
                    offsets[*axis] = old;
                }
            }
        }
    }
}

/// Piecewise-constant regressor on an equal-width grid over a few features.
///
/// Each cell predicts the mean target of the training samples inside it;
/// empty cells fall back to the global mean. All other features are ignored.
#[derive(Debug, Clone)]
pub struct BinnedRegressor {
    d: usize,
    features: Vec<usize>,
    bins: usize,
    lo: Vec<f64>,
    width: Vec<f64>,
    cell_means: Vec<f64>,
}

impl BinnedRegressor {
    pub fn fit(data: &TaskDataset, features: &[usize], bins: usize) -> Result<Self> {
        if bins == 0 || features.is_empty() {
            return Err(Error::invalid("binned regressor needs at least one feature and bin"));
        }
        if let Some(&j) = features.iter().find(|&&j| j >= data.n_features()) {
            return Err(Error::invalid(format!("feature index {j} out of range")));
        }
        let mut lo = Vec::new();
        let mut width = Vec::new();
        for &j in features {
            let col = data.column(j);
            let a = col.iter().copied().fold(f64::INFINITY, f64::min);
            let b = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            lo.push(a);
            width.push(if b > a { (b - a) / bins as f64 } else { 1.0 });
        }
        let mut model = Self {
            d: data.n_features(),
            features: features.to_vec(),
            bins,
            lo,
            width,
            cell_means: Vec::new(),
        };
        let cells = bins.pow(features.len() as u32);
        let mut sums = vec![0.0; cells];
        let mut counts = vec![0usize; cells];
        for (row, &y) in data.rows().zip(data.targets()) {
            let c = model.cell(row);
            sums[c] += y;
            counts[c] += 1;
        }
        let global = data.targets().iter().sum::<f64>() / data.n_samples() as f64;
        model.cell_means = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { global })
            .collect();
        Ok(model)
    }

    fn cell(&self, row: &[f64]) -> usize {
        self.features.iter().enumerate().fold(0, |acc, (f, &j)| {
            let b = ((row[j] - self.lo[f]) / self.width[f]).floor();
            let b = if b.is_nan() { 0 } else { (b.max(0.0) as usize).min(self.bins - 1) };
            acc * self.bins + b
        })
    }
}

impl Predictor for BinnedRegressor {
    fn n_features(&self) -> usize {
        self.d
    }

    fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "expected {} features, got {}",
                self.d,
                row.len()
            )));
        }
        Ok(self.cell_means[self.cell(row)])
    }
}

/// Loss used for importance and performance scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    /// Root mean squared error.
    #[default]
    Rmse,
    /// Binary cross-entropy on predictions clipped to `[1e-9, 1 - 1e-9]`.
    LogLoss,
}

impl LossKind {
    /// `LogLoss` when every target is 0 or 1, `Rmse` otherwise.
    pub fn detect(targets: &[f64]) -> Self {
        if targets.iter().all(|&y| y == 0.0 || y == 1.0) {
            LossKind::LogLoss
        } else {
            LossKind::Rmse
        }
    }

    pub fn evaluate(self, predictions: &[f64], targets: &[f64]) -> f64 {
        let n = targets.len() as f64;
        match self {
            LossKind::Rmse => {
                let sse: f64 = predictions
                    .iter()
                    .zip(targets)
                    .map(|(p, y)| (p - y) * (p - y))
                    .sum();
                (sse / n).sqrt()
            }
            LossKind::LogLoss => {
                const CLIP: f64 = 1e-9;
                -predictions
                    .iter()
                    .zip(targets)
                    .map(|(&p, &y)| {
                        let p = p.clamp(CLIP, 1.0 - CLIP);
                        y * p.ln() + (1.0 - y) * (1.0 - p).ln()
                    })
                    .sum::<f64>()
                    / n
            }
        }
    }
}

/// Root mean squared error of `model` on `data`.
pub fn rmse<P: Predictor + ?Sized>(model: &P, data: &TaskDataset) -> Result<f64> {
    let pred = model.predict_batch(data.samples())?;
    if pred.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite prediction on task `{}`",
            data.task_id()
        )));
    }
    Ok(LossKind::Rmse.evaluate(&pred, data.targets()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::from_fn;

    fn line_data(n: usize) -> TaskDataset {
        let rows = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect::<Vec<_>>();
        let targets = rows.iter().map(|r| 2.0 * r[0]).collect();
        TaskDataset::new("line", vec!["x".into()], rows, targets).unwrap()
    }

    fn brute_neighbours(m: &KnnRegressor, q: &[f64]) -> Vec<usize> {
        let qn: Vec<f64> = q.iter().enumerate().map(|(j, x)| (x - m.offset[j]) * m.scale[j]).collect();
        let mut c: Vec<Candidate> = (0..m.targets.len())
            .map(|i| Candidate {
                dist: m.points[i * m.d..(i + 1) * m.d]
                    .iter()
                    .zip(&qn)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum(),
                index: i,
            })
            .collect();
        c.sort();
        c.truncate(m.k);
        c.into_iter().map(|c| c.index).collect()
    }

    #[test]
    fn kd_tree_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 400;
        // coarse values produce many exact distance ties
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.gen_range(0..6) as f64).collect())
            .collect();
        let data = TaskDataset::new("t", vec!["a".into(), "b".into(), "c".into()], rows, vec![0.0; n])
            .unwrap();
        for k in [1, 7, 30] {
            let m = fit_knn(&data, k).unwrap();
            for _ in 0..50 {
                let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..6.0)).collect();
                assert_eq!(m.neighbours(&q), brute_neighbours(&m, &q));
            }
        }
    }

    #[test]
    fn knn_examples() {
        let data = line_data(101);
        let all = fit_knn(&data, 101).unwrap();
        let mean = data.targets().iter().sum::<f64>() / 101.0;
        assert!((all.predict(&[0.3]).unwrap() - mean).abs() <= 1e-12);

        let one = fit_knn(&data, 1).unwrap();
        assert_eq!(one.predict(&[0.5]).unwrap(), 1.0);

        let three = fit_knn(&data, 3).unwrap();
        for i in 1..100 {
            let x = i as f64 / 100.0 + 0.003;
            assert!((three.predict(&[x]).unwrap() - 2.0 * x).abs() < 0.1);
        }
        assert!(fit_knn(&data, 102).is_err());
    }

    #[test]
    fn knn_predictions_within_target_range() {
        let data = line_data(50);
        let m = fit_knn(&data, 4).unwrap();
        for x in [-10.0, 0.0, 0.37, 1.0, 12.0] {
            let p = m.predict(&[x]).unwrap();
            assert!((0.0..=2.0).contains(&p));
        }
    }

    #[test]
    fn rmse_examples() {
        let data = line_data(20);
        let perfect = from_fn(1, |x: &[f64]| 2.0 * x[0]);
        assert_eq!(rmse(&perfect, &data).unwrap(), 0.0);

        let two = TaskDataset::new("t", vec!["x".into()], vec![vec![0.0], vec![1.0]], vec![3.0, -3.0])
            .unwrap();
        assert_eq!(rmse(&from_fn(1, |_| 0.0), &two).unwrap(), 3.0);
        let two = TaskDataset::new("t", vec!["x".into()], vec![vec![0.0], vec![1.0]], vec![0.0, 2.0])
            .unwrap();
        assert_eq!(rmse(&from_fn(1, |_| 1.0), &two).unwrap(), 1.0);
    }

    #[test]
    fn binned_regressor_constant_targets() {
        let rows = (0..30).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let data = TaskDataset::new("t", vec!["a".into(), "b".into()], rows, vec![4.0; 30]).unwrap();
        let m = BinnedRegressor::fit(&data, &[0, 1], 4).unwrap();
        for q in [[0.0, 0.0], [100.0, -5.0], [14.0, 3.0]] {
            assert_eq!(m.predict(&q).unwrap(), 4.0);
        }
    }

    #[test]
    fn log_loss_is_used_for_binary_targets() {
        assert_eq!(LossKind::detect(&[0.0, 1.0, 1.0]), LossKind::LogLoss);
        assert_eq!(LossKind::detect(&[0.0, 0.5]), LossKind::Rmse);
        let l = LossKind::LogLoss.evaluate(&[1.0, 0.0], &[1.0, 0.0]);
        assert!(l >= 0.0 && l < 1e-8);
        assert!(LossKind::LogLoss.evaluate(&[0.0], &[1.0]).is_finite());
    }
}
