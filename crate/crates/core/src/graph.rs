//! Weighted undirected information-sharing graph.
//!
//! Indices are 0-based in the library API. Scenario files use 1-based edge
//! lists and are converted on load.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense symmetric weighted adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    weights: DMatrix<f64>,
}

impl Topology {
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::NonSquareWeights {
                rows: weights.nrows(),
                cols: weights.ncols(),
            });
        }
        let n = weights.nrows();
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::SelfLoop(i));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::NegativeWeight { i, j, value: w });
                }
                if w != weights[(j, i)] {
                    return Err(Error::AsymmetricWeights { i, j });
                }
            }
        }
        Ok(Self { weights })
    }

    /// Builds a graph from `(i, j, weight)` triples with 0-based indices.
    pub fn from_edges(n_agents: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut weights = DMatrix::zeros(n_agents, n_agents);
        for &(i, j, w) in edges {
            for idx in [i, j] {
                if idx >= n_agents {
                    return Err(Error::AgentIndex {
                        index: idx,
                        n_agents,
                    });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::NegativeWeight { i, j, value: w });
            }
            if weights[(i, j)] != 0.0 {
                return Err(Error::DuplicateEdge(i, j));
            }
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
        Self::from_weights(weights)
    }

    /// No edges.
    pub fn empty(n_agents: usize) -> Self {
        Self {
            weights: DMatrix::zeros(n_agents, n_agents),
        }
    }

    /// Complete graph with unit weights.
    pub fn complete(n_agents: usize) -> Self {
        let weights = DMatrix::from_fn(n_agents, n_agents, |i, j| if i == j { 0.0 } else { 1.0 });
        Self { weights }
    }

    pub fn n_agents(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn neighbors(&self, i: usize) -> Result<Vec<usize>> {
        let n = self.n_agents();
        if i >= n {
            return Err(Error::AgentIndex {
                index: i,
                n_agents: n,
            });
        }
        Ok((0..n).filter(|&j| self.weights[(i, j)] > 0.0).collect())
    }

    /// Breadth-first search from node 0 over positive-weight edges.
    pub fn is_connected(&self) -> bool {
        let n = self.n_agents();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for (j, s) in seen.iter_mut().enumerate() {
                if !*s && self.weights[(i, j)] > 0.0 {
                    *s = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }

    pub fn laplacian(&self) -> LaplacianMatrix {
        laplacian(self)
    }
}

/// `l_ii = sum_j a_ij`, `l_ij = -a_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// `L v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.0.nrows();
        (0..n)
            .map(|i| (0..n).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }
}

pub fn laplacian(topology: &Topology) -> LaplacianMatrix {
    let a = topology.weights();
    let n = a.nrows();
    let mut l = -a.clone();
    for i in 0..n {
        l[(i, i)] = (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
    }
    LaplacianMatrix(l)
}

#[cfg(test)]
pub(crate) fn fig2() -> Topology {
    Topology::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 2, 1.0)]).unwrap()
}
