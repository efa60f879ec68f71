//! Undirected communication graphs: weighted adjacency, Laplacian and its
//! spectrum.
//!
//! Agent indices in a [`GraphSpec`] are 1-based, matching the way networks
//! are usually written down (`(1, 3)` joins the first and third agent).
//! Everything inside [`NetworkGraph`] is 0-based.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How edge weights `a_ij` are assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `a_ij = 1` on every edge.
    Unit,
    /// `a_ij = 1 / (1 + max(d_i, d_j))`.
    Metropolis,
    /// A full symmetric, nonnegative `n x n` matrix.
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n: usize,
    /// Unordered agent pairs, 1-based. Self-loops `(i, i)` are allowed.
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
    pub weights: WeightRule,
}

impl GraphSpec {
    pub fn new(n: usize, edges: Vec<(usize, usize)>, weights: WeightRule) -> Self {
        Self { n, edges, weights }
    }
}

/// A built, immutable communication graph.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    n: usize,
    /// Deduplicated 0-based pairs with `i <= j`.
    edges: Vec<(usize, usize)>,
    weights: DMatrix<f64>,
    laplacian: DMatrix<f64>,
    /// Ascending Laplacian eigenvalues.
    spectrum: Vec<f64>,
}

/// Normalizes a 1-based edge list into sorted, deduplicated 0-based pairs.
fn normalize_edges(n: usize, edges: &[(usize, usize)]) -> Result<Vec<(usize, usize)>> {
    let mut set = BTreeSet::new();
    for &(a, b) in edges {
        for idx in [a, b] {
            if idx == 0 || idx > n {
                return Err(Error::UnknownAgent { index: idx, n });
            }
        }
        let (i, j) = (a.min(b) - 1, a.max(b) - 1);
        set.insert((i, j));
    }
    Ok(set.into_iter().collect())
}

fn degrees(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut deg = vec![0usize; n];
    for &(i, j) in edges {
        if i != j {
            deg[i] += 1;
            deg[j] += 1;
        }
    }
    deg
}

/// Metropolis weights for a 1-based edge list. Degrees exclude self-loops,
/// and self-loops get zero weight.
pub fn metropolis_weights(n: usize, edges: &[(usize, usize)]) -> Result<DMatrix<f64>> {
    let edges = normalize_edges(n, edges)?;
    Ok(metropolis_from_normalized(n, &edges))
}

fn metropolis_from_normalized(n: usize, edges: &[(usize, usize)]) -> DMatrix<f64> {
    let deg = degrees(n, edges);
    let mut a = DMatrix::zeros(n, n);
    for &(i, j) in edges {
        if i == j {
            continue;
        }
        let w = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        a[(i, j)] = w;
        a[(j, i)] = w;
    }
    a
}

/// Builds the graph, its Laplacian `L = D - A` and the Laplacian spectrum.
pub fn build_graph(spec: &GraphSpec) -> Result<NetworkGraph> {
    let n = spec.n;
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut edges = normalize_edges(n, &spec.edges)?;

    let weights = match &spec.weights {
        WeightRule::Unit => {
            let mut a = DMatrix::zeros(n, n);
            for &(i, j) in &edges {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
            a
        }
        WeightRule::Metropolis => metropolis_from_normalized(n, &edges),
        WeightRule::Explicit(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::DimensionMismatch {
                    context: "explicit weight matrix",
                    expected: n * n,
                    found: rows.iter().map(Vec::len).sum(),
                });
            }
            let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            for i in 0..n {
                for j in 0..n {
                    let w = a[(i, j)];
                    if !w.is_finite() || w < 0.0 {
                        return Err(Error::NegativeWeight { i: i + 1, j: j + 1, weight: w });
                    }
                    if w != a[(j, i)] {
                        return Err(Error::AsymmetricWeights { i: i + 1, j: j + 1 });
                    }
                }
            }
            // An explicit matrix may introduce edges the list omitted; an
            // edge listed with zero weight is a contradiction.
            for &(i, j) in &edges {
                if i != j && a[(i, j)] == 0.0 {
                    return Err(Error::WeightEdgeMismatch { i: i + 1, j: j + 1 });
                }
            }
            let mut set: BTreeSet<_> = edges.into_iter().collect();
            for i in 0..n {
                for j in i..n {
                    if a[(i, j)] > 0.0 {
                        set.insert((i, j));
                    }
                }
            }
            edges = set.into_iter().collect();
            a
        }
    };

    let row_sums = DVector::from_fn(n, |i, _| weights.row(i).sum());
    let laplacian = DMatrix::from_diagonal(&row_sums) - &weights;
    let mut spectrum: Vec<f64> = SymmetricEigen::new(laplacian.clone()).eigenvalues.iter().copied().collect();
    spectrum.sort_by(f64::total_cmp);

    Ok(NetworkGraph { n, edges, weights, laplacian, spectrum })
}

impl NetworkGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    /// 0-based unordered pairs, self-loops included.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// Laplacian eigenvalues in non-decreasing order.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Largest Laplacian eigenvalue `κ_n`.
    pub fn max_eigenvalue(&self) -> f64 {
        self.spectrum.last().copied().unwrap_or(0.0).max(0.0)
    }

    /// Second-smallest Laplacian eigenvalue, or `None` for a single agent.
    pub fn algebraic_connectivity(&self) -> Option<f64> {
        self.spectrum.get(1).copied()
    }

    /// Breadth-first search over positive-weight, non-loop edges.
    pub fn is_connected(&self) -> bool {
        let n = self.n;
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for (j, s) in seen.iter_mut().enumerate() {
                if j != i && !*s && self.weights[(i, j)] > 0.0 {
                    *s = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }

    /// Computes `(L ⊗ I_m) x` for a stacked vector of `n` blocks of size `m`.
    pub fn apply_laplacian(&self, x: &DVector<f64>, m: usize) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.n * m);
        let mut out = DVector::zeros(x.len());
        for i in 0..self.n {
            for j in 0..self.n {
                let l = self.laplacian[(i, j)];
                if l == 0.0 {
                    continue;
                }
                for c in 0..m {
                    out[i * m + c] += l * x[j * m + c];
                }
            }
        }
        out
    }

    /// `I - L`, the mixing matrix used by consensus-averaging baselines.
    pub fn mixing_matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n) - &self.laplacian
    }
}
