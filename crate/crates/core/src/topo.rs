//! Graphs, oriented incidence matrices and the projections that split phase
//! space into a common mode plus relative phases, and filter space into the
//! conserved direction `q` plus its orthogonal complement `Q`.
//!
//! Vertices are 1-indexed in every external surface (constructor input, JSON,
//! error messages) and 0-indexed everywhere else.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An oriented edge, 0-indexed. The incidence column has `+1` at the tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
}

/// Simple, connected, edge-weighted graph with a fixed orientation per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphSpec", into = "GraphSpec")]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    weights: Vec<f64>,
}

/// Wire form of [`Graph`]: `{"n": 3, "edges": [[1,2],[2,3]], "weights": [1.0, 1.0]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub weights: Vec<f64>,
}

impl TryFrom<GraphSpec> for Graph {
    type Error = Error;

    fn try_from(spec: GraphSpec) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = spec.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::new(spec.n, &pairs, &spec.weights)
    }
}

impl From<Graph> for GraphSpec {
    fn from(g: Graph) -> Self {
        GraphSpec {
            n: g.n,
            edges: g.edges.iter().map(|e| [e.tail + 1, e.head + 1]).collect(),
            weights: g.weights,
        }
    }
}

impl Graph {
    /// Builds a graph from 1-indexed `(tail, head)` pairs.
    ///
    /// Edge order and orientation are kept exactly as given.
    pub fn new(n: usize, edges: &[(usize, usize)], weights: &[f64]) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewVertices(n));
        }
        if edges.len() != weights.len() {
            return Err(Error::WeightCountMismatch { edges: edges.len(), weights: weights.len() });
        }
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut out = Vec::with_capacity(edges.len());
        for (k, &(t, h)) in edges.iter().enumerate() {
            for v in [t, h] {
                if v == 0 || v > n {
                    return Err(Error::VertexOutOfRange { edge: k + 1, vertex: v, n });
                }
            }
            if t == h {
                return Err(Error::SelfLoop { edge: k + 1, vertex: t });
            }
            let key = (t.min(h), t.max(h));
            if let Some(&first) = seen.get(&key) {
                return Err(Error::DuplicateEdge { edge: k + 1, first, a: t, b: h });
            }
            seen.insert(key, k + 1);
            out.push(Edge { tail: t - 1, head: h - 1 });
        }
        for (k, &w) in weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonPositiveWeight { edge: k + 1, weight: w });
            }
        }
        let g = Graph { n, edges: out, weights: weights.to_vec() };
        if let Some(v) = g.first_unreachable() {
            return Err(Error::DisconnectedGraph { vertex: v + 1 });
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same graph with new edge weights.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        let pairs: Vec<_> = self.edges.iter().map(|e| (e.tail + 1, e.head + 1)).collect();
        Graph::new(self.n, &pairs, weights)
    }

    /// Same graph with every edge orientation flipped.
    pub fn reversed(&self) -> Self {
        Graph {
            n: self.n,
            edges: self.edges.iter().map(|e| Edge { tail: e.head, head: e.tail }).collect(),
            weights: self.weights.clone(),
        }
    }

    fn first_unreachable(&self) -> Option<usize> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.tail].push(e.head);
            adj[e.head].push(e.tail);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().position(|s| !s)
    }

    /// Path `1-2-...-n`.
    pub fn path(n: usize, weights: &[f64]) -> Result<Self> {
        let pairs: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
        Graph::new(n, &pairs, weights)
    }

    /// Cycle `1-2-...-n-1`. Needs `n >= 3`.
    pub fn cycle(n: usize, weights: &[f64]) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("cycle needs n >= 3, got {n}")));
        }
        let mut pairs: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
        pairs.push((n, 1));
        Graph::new(n, &pairs, weights)
    }

    pub fn complete(n: usize, weights: &[f64]) -> Result<Self> {
        Graph::new(n, &complete_pairs(n), weights)
    }

    /// Seeded Erdos-Renyi graph `G(n, p)`, resampled until connected.
    ///
    /// Edge weights are drawn afterwards by the caller; this returns the
    /// oriented pairs (1-indexed, lower vertex as tail).
    pub fn random_connected_pairs(n: usize, p: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!("edge probability {p} outside (0, 1]")));
        }
        if n < 2 {
            return Err(Error::TooFewVertices(n));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10_000 {
            let pairs: Vec<_> = complete_pairs(n).into_iter().filter(|_| rng.gen::<f64>() < p).collect();
            let ones = vec![1.0; pairs.len()];
            if Graph::new(n, &pairs, &ones).is_ok() {
                return Ok(pairs);
            }
        }
        Err(Error::InvalidParameter(format!("no connected G({n}, {p}) found in 10000 draws")))
    }
}

fn complete_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 1..=n {
        for j in (i + 1)..=n {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Signed `n x m` incidence matrix: column `k` has `+1` at the tail of edge
/// `k` and `-1` at its head.
pub fn incidence_matrix(g: &Graph) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(g.n(), g.m());
    for (k, e) in g.edges().iter().enumerate() {
        b[(e.tail, k)] = 1.0;
        b[(e.head, k)] = -1.0;
    }
    b
}

/// Numerical rank by SVD with a relative singular-value threshold.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Unit vector along `C^{-1} 1`.
pub fn conserved_direction(gains: &[f64]) -> Result<DVector<f64>> {
    check_gains(gains)?;
    let v = DVector::from_iterator(gains.len(), gains.iter().map(|c| 1.0 / c));
    let norm = v.norm();
    Ok(v / norm)
}

fn check_gains(gains: &[f64]) -> Result<()> {
    for (i, &c) in gains.iter().enumerate() {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::NonPositiveGain { vertex: i + 1, gain: c });
        }
    }
    Ok(())
}

/// The matrices `B`, `R`, `S`, `q`, `Q`, `C` together with
/// `Y = (S^T C^2 S)^{1/2}`.
#[derive(Debug, Clone)]
pub struct ProjectionSet {
    pub b: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub q: DVector<f64>,
    pub q_perp: DMatrix<f64>,
    pub c: DVector<f64>,
    pub y: DMatrix<f64>,
}

/// Principal square root and inverse square root of an SPD matrix.
pub fn spd_sqrt_pair(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let v = &eig.eigenvectors;
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    (v * sqrt * v.transpose(), v * inv_sqrt * v.transpose())
}

pub fn projection_set(g: &Graph, gains: &[f64]) -> Result<ProjectionSet> {
    let n = g.n();
    if gains.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: gains.len() });
    }
    check_gains(gains)?;
    let b = incidence_matrix(g);
    let mut r = DMatrix::zeros(n, n - 1);
    let mut s = DMatrix::zeros(n, n - 1);
    for j in 0..n - 1 {
        r[(j + 1, j)] = 1.0;
        s[(j + 1, j)] = 1.0;
        s[(0, j)] = -1.0;
    }
    let c = DVector::from_column_slice(gains);
    let cs = DMatrix::from_diagonal(&c) * &s;
    let gram = cs.transpose() * &cs;
    let (y, y_inv) = spd_sqrt_pair(&gram);
    let q_perp = cs * y_inv;
    let q = conserved_direction(gains)?;
    Ok(ProjectionSet { b, r, s, q, q_perp, c, y })
}

/// `m` weights drawn uniformly from the open interval `(lo, hi)`.
pub fn random_weights(m: usize, seed: u64, range: (f64, f64)) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidRange { lo, hi });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one weight".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new(lo, hi);
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let w = dist.sample(&mut rng);
        if w > lo {
            out.push(w);
        }
    }
    Ok(out)
}
