//! Undirected weighted interaction graphs.
//!
//! Agents are indexed `0..n` in the API; scenario files use 1-based indices and are
//! converted on load.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph needs at least {min} agents, got {found}")]
    TooFewAgents { min: usize, found: usize },
    #[error("agent index {index} out of range for {n_agents} agents")]
    IndexOutOfRange { index: usize, n_agents: usize },
    #[error("self-loop at agent {0}")]
    SelfLoop(usize),
    #[error("edge {{{0}, {1}}} listed more than once")]
    DuplicateEdge(usize, usize),
    #[error("edge {{{i}, {j}}} has invalid weight {weight}")]
    InvalidWeight { i: usize, j: usize, weight: f64 },
}

/// Undirected edge `{i, j}` stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Immutable interaction topology `(V, E, a_ij)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_agents: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    /// Builds a graph from `(i, j, a_ij)` triples with 0-based indices.
    pub fn from_edges(
        n_agents: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        if n_agents == 0 {
            return Err(GraphError::TooFewAgents { min: 1, found: 0 });
        }
        let mut keyed = BTreeMap::new();
        for (i, j, weight) in edges {
            for index in [i, j] {
                if index >= n_agents {
                    return Err(GraphError::IndexOutOfRange { index, n_agents });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            if !(weight >= 0.0 && weight.is_finite()) {
                return Err(GraphError::InvalidWeight { i, j, weight });
            }
            let key = (i.min(j), i.max(j));
            if keyed.insert(key, weight).is_some() {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
        }
        let mut adjacency = vec![Vec::new(); n_agents];
        let edges: Vec<Edge> = keyed
            .into_iter()
            .map(|((i, j), weight)| {
                if weight == 0.0 {
                    log::warn!("edge {{{i}, {j}}} has zero weight; the effective graph may be disconnected");
                }
                adjacency[i].push((j, weight));
                adjacency[j].push((i, weight));
                Edge { i, j, weight }
            })
            .collect();
        for list in &mut adjacency {
            list.sort_by_key(|&(j, _)| j);
        }
        Ok(Self {
            n_agents,
            edges,
            adjacency,
        })
    }

    /// Cycle `{0,1}, {1,2}, …, {n−1,0}` with unit weights.
    pub fn cycle(n_agents: usize) -> Result<Self, GraphError> {
        if n_agents < 3 {
            return Err(GraphError::TooFewAgents {
                min: 3,
                found: n_agents,
            });
        }
        Self::from_edges(n_agents, (0..n_agents).map(|i| (i, (i + 1) % n_agents, 1.0)))
    }

    /// Two agents joined by a single edge.
    pub fn pair(weight: f64) -> Result<Self, GraphError> {
        Self::from_edges(2, [(0, 1, weight)])
    }

    /// All pairs joined with a common weight.
    pub fn complete(n_agents: usize, weight: f64) -> Result<Self, GraphError> {
        Self::from_edges(
            n_agents,
            (0..n_agents).flat_map(|i| (i + 1..n_agents).map(move |j| (i, j, weight))),
        )
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `i` with their weights, in ascending index order.
    pub fn neighbors(&self, i: usize) -> Result<&[(usize, f64)], GraphError> {
        self.adjacency
            .get(i)
            .map(Vec::as_slice)
            .ok_or(GraphError::IndexOutOfRange {
                index: i,
                n_agents: self.n_agents,
            })
    }

    /// Weight matrix `K` with `K_ij = a_ij` (zero where there is no edge).
    pub fn weight_matrix(&self) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(self.n_agents, self.n_agents);
        for e in &self.edges {
            k[(e.i, e.j)] = e.weight;
            k[(e.j, e.i)] = e.weight;
        }
        k
    }

    /// Connectivity over edges with positive weight.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_agents];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &(j, w) in &self.adjacency[i] {
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
