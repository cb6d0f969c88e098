//! Ward-linkage agglomerative clustering of tasks.
//!
//! Cluster ids follow the usual stepwise-dendrogram convention: leaves are
//! `0..T`, and the cluster created by merge step `s` gets id `T + s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SimilarityMatrix;

/// Absolute tolerance (scaled by the largest entry) for the symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    leaves: Vec<String>,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn new(leaves: Vec<String>, merges: Vec<Merge>) -> Result<Self> {
        let t = leaves.len();
        if t == 0 {
            return Err(Error::invalid("dendrogram without leaves"));
        }
        if merges.len() != t - 1 {
            return Err(Error::Invariant(format!(
                "{} merges for {t} leaves",
                merges.len()
            )));
        }
        let mut size = vec![1usize; t];
        let mut used = vec![false; 2 * t - 1];
        for (s, m) in merges.iter().enumerate() {
            let next = t + s;
            if m.a >= next || m.b >= next || m.a == m.b || used[m.a] || used[m.b] {
                return Err(Error::Invariant(format!("invalid merge at step {s}")));
            }
            used[m.a] = true;
            used[m.b] = true;
            let merged = size[m.a] + size[m.b];
            if merged != m.size || !m.height.is_finite() {
                return Err(Error::Invariant(format!("inconsistent merge at step {s}")));
            }
            size.push(merged);
        }
        Ok(Self { leaves, merges })
    }

    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Leaf indices in left-to-right drawing order.
    pub fn leaf_order(&self) -> Vec<usize> {
        let t = self.n_leaves();
        let mut out = Vec::with_capacity(t);
        let mut stack = vec![2 * t - 2];
        while let Some(id) = stack.pop() {
            if id < t {
                out.push(id);
            } else {
                let m = self.merges[id - t];
                stack.push(m.b);
                stack.push(m.a);
            }
        }
        out
    }

    fn height_of(&self, id: usize) -> f64 {
        if id < self.n_leaves() {
            0.0
        } else {
            self.merges[id - self.n_leaves()].height
        }
    }

    /// Newick string with branch lengths given by height differences.
    pub fn to_newick(&self) -> String {
        fn clean(name: &str) -> String {
            name.chars()
                .map(|c| if "(),:;' \t".contains(c) { '_' } else { c })
                .collect()
        }
        fn rec(d: &Dendrogram, id: usize, parent: f64, out: &mut String) {
            let t = d.n_leaves();
            if id < t {
                out.push_str(&clean(&d.leaves[id]));
            } else {
                let m = d.merges[id - t];
                out.push('(');
                rec(d, m.a, m.height, out);
                out.push(',');
                rec(d, m.b, m.height, out);
                out.push(')');
            }
            out.push_str(&format!(":{}", parent - d.height_of(id)));
        }
        let t = self.n_leaves();
        let mut out = String::new();
        if t == 1 {
            out.push_str(&clean(&self.leaves[0]));
        } else {
            let root = 2 * t - 2;
            let m = self.merges[root - t];
            out.push('(');
            rec(self, m.a, m.height, &mut out);
            out.push(',');
            rec(self, m.b, m.height, &mut out);
            out.push(')');
        }
        out.push(';');
        out
    }

    /// Plot-ready line segments: for each merge, the `(x, y)` of both
    /// children and the merge height. Leaves sit at `x = position` in
    /// [`Dendrogram::leaf_order`], internal nodes at the mean of their children.
    pub fn segments(&self) -> Vec<Segment> {
        let t = self.n_leaves();
        let mut x = vec![0.0; 2 * t - 1];
        for (pos, &leaf) in self.leaf_order().iter().enumerate() {
            x[leaf] = pos as f64;
        }
        let mut out = Vec::with_capacity(self.merges.len());
        for (s, m) in self.merges.iter().enumerate() {
            x[t + s] = 0.5 * (x[m.a] + x[m.b]);
            out.push(Segment {
                step: s,
                x_a: x[m.a],
                y_a: self.height_of(m.a),
                x_b: x[m.b],
                y_b: self.height_of(m.b),
                height: m.height,
            });
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub step: usize,
    pub x_a: f64,
    pub y_a: f64,
    pub x_b: f64,
    pub y_b: f64,
    pub height: f64,
}

/// Averages the matrix with its transpose.
pub fn symmetrize(matrix: &SimilarityMatrix) -> SimilarityMatrix {
    let t = matrix.len();
    let mut values = vec![0.0; t * t];
    for i in 0..t {
        for j in 0..t {
            if i != j {
                values[i * t + j] = 0.5 * (matrix.get(i, j) + matrix.get(j, i));
            }
        }
    }
    SimilarityMatrix::new(matrix.task_ids().to_vec(), values, matrix.scaled(), matrix.matching())
        .expect("average of a valid matrix is valid")
}

/// Ward-linkage agglomeration treating entries as distances.
///
/// At each step the closest pair of active clusters is merged (ties go to
/// the lowest `(a, b)` id pair) and distances are updated with the
/// Lance-Williams form of Ward's criterion.
pub fn ward_cluster(matrix: &SimilarityMatrix) -> Result<Dendrogram> {
    let t = matrix.len();
    if t == 0 {
        return Err(Error::invalid("cannot cluster an empty matrix"));
    }
    let scale = matrix.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if matrix.max_asymmetry() > SYMMETRY_TOL * scale {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (max asymmetry {:e}); symmetrize it first",
            matrix.max_asymmetry()
        )));
    }
    let total = 2 * t - 1;
    let mut dist = vec![vec![0.0; total]; total];
    for i in 0..t {
        for j in 0..t {
            dist[i][j] = matrix.get(i, j);
        }
    }
    let mut size = vec![0usize; total];
    size[..t].fill(1);
    let mut active: Vec<usize> = (0..t).collect();
    let mut merges = Vec::with_capacity(t - 1);
    for step in 0..t - 1 {
        let mut best = (0, 0, f64::INFINITY);
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                if dist[a][b] < best.2 {
                    best = (a, b, dist[a][b]);
                }
            }
        }
        let (a, b, h) = best;
        let new = t + step;
        size[new] = size[a] + size[b];
        active.retain(|&c| c != a && c != b);
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for &k in &active {
            let nk = size[k] as f64;
            let d2 = ((na + nk) * dist[a][k].powi(2) + (nb + nk) * dist[b][k].powi(2)
                - nk * h * h)
                / (na + nb + nk);
            let d = d2.max(0.0).sqrt();
            dist[new][k] = d;
            dist[k][new] = d;
        }
        active.push(new);
        merges.push(Merge {
            a,
            b,
            height: h,
            size: size[new],
        });
    }
    Dendrogram::new(matrix.task_ids().to_vec(), merges)
}

/// Flat clustering into `k` groups: labels `1..=k`, numbered by first
/// appearance in leaf (input) order.
pub fn cut_tree(dendrogram: &Dendrogram, k: usize) -> Result<Vec<usize>> {
    let t = dendrogram.n_leaves();
    if k == 0 || k > t {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={t}")));
    }
    let mut parent: Vec<usize> = (0..2 * t - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (s, m) in dendrogram.merges().iter().take(t - k).enumerate() {
        let new = t + s;
        let ra = find(&mut parent, m.a);
        let rb = find(&mut parent, m.b);
        parent[ra] = new;
        parent[rb] = new;
    }
    let mut roots: Vec<usize> = Vec::new();
    let mut labels = Vec::with_capacity(t);
    for leaf in 0..t {
        let r = find(&mut parent, leaf);
        let label = match roots.iter().position(|&x| x == r) {
            Some(p) => p + 1,
            None => {
                roots.push(r);
                roots.len()
            }
        };
        labels.push(label);
    }
    Ok(labels)
}
