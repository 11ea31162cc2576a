//! Weighted communication digraphs.
//!
//! `weights[i][j] = a_ij` is the weight of the edge *from* node `j` *to*
//! node `i`; node `i` listens to node `j`. Nodes are 0-based inside the
//! library and 1-based in every external format, see [`NodeId`].

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matkernel::{self, Matrix, MatrixError};

/// Margin used when asserting that the reduced Laplacian has eigenvalues
/// with positive real part.
pub const REDUCED_SPECTRUM_MARGIN: f64 = 1e-10;

/// Largest supported node count; the weight table is dense.
pub const MAX_NODES: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    NoNodes,
    #[error("graph has {n} nodes; at most {max} are supported")]
    TooManyNodes { n: usize, max: usize },
    #[error("node {node} out of range 1..={n}")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("negative weight {weight} on edge {from} -> {to}")]
    NegativeWeight { from: NodeId, to: NodeId, weight: f64 },
    #[error("non-finite weight on edge {from} -> {to}")]
    NonFiniteWeight { from: NodeId, to: NodeId },
    #[error("self-loop at node {node}")]
    SelfLoop { node: NodeId },
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: NodeId, to: NodeId },
    #[error("graph contains no directed spanning tree")]
    NoSpanningTree,
    #[error("node {theta} is not a root; root set is {{{}}}", label_list(roots))]
    NotARoot { theta: NodeId, roots: Vec<NodeId> },
    #[error("expected {expected} in-degree bounds, found {found}")]
    BoundsLength { expected: usize, found: usize },
    #[error("in-degree bound {bound} at node {node} is below the weighted in-degree {in_degree}")]
    BoundViolation { node: NodeId, bound: f64, in_degree: f64 },
    #[error("graph needs at least two nodes for a reduced Laplacian")]
    TooSmall,
    #[error("internal consistency failure: {0}")]
    Consistency(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Node index, 0-based internally, printed and parsed 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub const fn new(index: usize) -> Self {
        NodeId(index)
    }

    /// Converts a 1-based label. Returns `None` for 0.
    pub fn from_one_based(label: usize) -> Option<Self> {
        label.checked_sub(1).map(NodeId)
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn one_based(self) -> usize {
        self.0 + 1
    }
}

fn label_list(nodes: &[NodeId]) -> String {
    nodes.iter().map(NodeId::to_string).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.one_based())
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(self.one_based() as u64)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let label = usize::deserialize(d)?;
        NodeId::from_one_based(label)
            .ok_or_else(|| serde::de::Error::custom("node labels are 1-based; 0 is not a node"))
    }
}

/// An edge `from -> to` with weight `a_{to,from}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    n: usize,
    weights: Vec<f64>,
}

impl WeightedDigraph {
    /// Graph on `n` nodes with no edges.
    pub fn empty(n: usize) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::NoNodes);
        }
        if n > MAX_NODES {
            return Err(GraphError::TooManyNodes { n, max: MAX_NODES });
        }
        Ok(Self {
            n,
            weights: vec![0.0; n * n],
        })
    }

    pub fn from_edges(n: usize, edges: &[Edge]) -> Result<Self, GraphError> {
        let mut g = Self::empty(n)?;
        for e in edges {
            for node in [e.from, e.to] {
                if node.index() >= n {
                    return Err(GraphError::NodeOutOfRange {
                        node: node.one_based(),
                        n,
                    });
                }
            }
            if !e.weight.is_finite() {
                return Err(GraphError::NonFiniteWeight { from: e.from, to: e.to });
            }
            if e.weight < 0.0 {
                return Err(GraphError::NegativeWeight {
                    from: e.from,
                    to: e.to,
                    weight: e.weight,
                });
            }
            if e.from == e.to {
                if e.weight == 0.0 {
                    continue;
                }
                return Err(GraphError::SelfLoop { node: e.from });
            }
            let slot = &mut g.weights[e.to.index() * n + e.from.index()];
            if *slot != 0.0 {
                return Err(GraphError::DuplicateEdge { from: e.from, to: e.to });
            }
            *slot = e.weight;
        }
        Ok(g)
    }

    /// Builds from a dense `a_ij` matrix, validating the graph invariants.
    pub fn from_adjacency(a: &Matrix) -> Result<Self, GraphError> {
        if !a.is_square() {
            return Err(MatrixError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            }
            .into());
        }
        let n = a.rows();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] != 0.0 || i == j {
                    edges.push(Edge {
                        from: NodeId(j),
                        to: NodeId(i),
                        weight: a[(i, j)],
                    });
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// `a_ij`, the weight with which `i` hears `j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// `(j, a_ij)` for every in-neighbour `j` of `i`.
    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights[i * self.n..(i + 1) * self.n]
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(j, &w)| (j, w))
    }

    /// Edges in `(to, from)` row-major order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for (j, w) in self.in_neighbors(i) {
                out.push(Edge {
                    from: NodeId(j),
                    to: NodeId(i),
                    weight: w,
                });
            }
        }
        out
    }

    pub fn in_degree(&self, i: usize) -> f64 {
        self.in_neighbors(i).fold(0.0, |acc, (_, w)| acc + w)
    }

    pub fn laplacian(&self) -> Matrix {
        let n = self.n;
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for (j, w) in self.in_neighbors(i) {
                l[(i, j)] = -w;
                diag += w;
            }
            l[(i, i)] = diag;
        }
        l
    }

    /// Nodes reachable from `start` along directed edges (including `start`).
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(j) = queue.pop_front() {
            for i in 0..self.n {
                if !seen[i] && self.weight(i, j) != 0.0 {
                    seen[i] = true;
                    queue.push_back(i);
                }
            }
        }
        seen
    }

    /// Every node from which all nodes are reachable.
    pub fn root_set(&self) -> BTreeSet<NodeId> {
        (0..self.n)
            .filter(|&r| self.reachable_from(r).iter().all(|&v| v))
            .map(NodeId)
            .collect()
    }

    pub fn analyze(&self) -> GraphAnalysis {
        GraphAnalysis {
            laplacian: self.laplacian(),
            in_degrees: (0..self.n).map(|i| self.in_degree(i)).collect(),
            root_set: self.root_set(),
        }
    }
}

/// Laplacian, weighted in-degrees and root set of a digraph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphAnalysis {
    pub laplacian: Matrix,
    pub in_degrees: Vec<f64>,
    pub root_set: BTreeSet<NodeId>,
}

impl GraphAnalysis {
    pub fn node_count(&self) -> usize {
        self.in_degrees.len()
    }

    pub fn has_spanning_tree(&self) -> bool {
        !self.root_set.is_empty()
    }

    /// Checks that `theta` can serve as the reference agent.
    pub fn require_root(&self, theta: NodeId) -> Result<(), GraphError> {
        if theta.index() >= self.node_count() {
            return Err(GraphError::NodeOutOfRange {
                node: theta.one_based(),
                n: self.node_count(),
            });
        }
        if self.root_set.is_empty() {
            return Err(GraphError::NoSpanningTree);
        }
        if !self.root_set.contains(&theta) {
            return Err(GraphError::NotARoot {
                theta,
                roots: self.root_set.iter().copied().collect(),
            });
        }
        Ok(())
    }

    /// Laplacian with the row and column of `theta` removed. Asserts that
    /// every eigenvalue has real part above [`REDUCED_SPECTRUM_MARGIN`].
    pub fn reduced_laplacian(&self, theta: NodeId) -> Result<Matrix, GraphError> {
        if self.node_count() < 2 {
            return Err(GraphError::TooSmall);
        }
        self.require_root(theta)?;
        let reduced = self.laplacian.delete_row_col(theta.index())?;
        let min_re = matkernel::eigenvalues(&reduced)?
            .iter()
            .fold(f64::INFINITY, |acc, z| acc.min(z.re));
        if min_re <= REDUCED_SPECTRUM_MARGIN {
            return Err(GraphError::Consistency(format!(
                "reduced Laplacian has an eigenvalue with real part {min_re:e}"
            )));
        }
        Ok(reduced)
    }

    /// Exact in-degrees, the default bound choice.
    pub fn default_bounds(&self) -> Vec<f64> {
        self.in_degrees.clone()
    }

    /// Validates per-node in-degree upper bounds; `theta`'s entry is unused.
    pub fn check_bounds(&self, theta: NodeId, bounds: &[f64]) -> Result<(), GraphError> {
        if bounds.len() != self.node_count() {
            return Err(GraphError::BoundsLength {
                expected: self.node_count(),
                found: bounds.len(),
            });
        }
        for (i, (&b, &d)) in bounds.iter().zip(&self.in_degrees).enumerate() {
            if i == theta.index() {
                continue;
            }
            if !(b >= d) {
                return Err(GraphError::BoundViolation {
                    node: NodeId(i),
                    bound: b,
                    in_degree: d,
                });
            }
        }
        Ok(())
    }

    /// `(I + D)⁻¹ L̂`, the normalised reduced Laplacian. Equals `I − D̄`.
    pub fn scaled_reduced_laplacian(&self, theta: NodeId, bounds: &[f64]) -> Result<Matrix, GraphError> {
        self.check_bounds(theta, bounds)?;
        let reduced = self.reduced_laplacian(theta)?;
        let kept: Vec<f64> = bounds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != theta.index())
            .map(|(_, &b)| b)
            .collect();
        let mut g = reduced;
        for (r, b) in kept.iter().enumerate() {
            let s = 1.0 / (1.0 + b);
            for c in 0..g.cols() {
                g[(r, c)] *= s;
            }
        }
        Ok(g)
    }

    /// Contraction matrix `D̄ = I − (I + D)⁻¹ L̂` governing the estimation
    /// error. Its spectral radius is asserted below 1.
    pub fn dbar(&self, theta: NodeId, bounds: &[f64]) -> Result<Matrix, GraphError> {
        let g = self.scaled_reduced_laplacian(theta, bounds)?;
        let dbar = &Matrix::identity(g.rows()) - &g;
        let radius = matkernel::spectral_radius(&dbar)?;
        if radius >= 1.0 {
            return Err(GraphError::Consistency(format!(
                "contraction matrix has spectral radius {radius}"
            )));
        }
        Ok(dbar)
    }
}

pub fn analyze(g: &WeightedDigraph) -> GraphAnalysis {
    g.analyze()
}

pub fn reduced_laplacian(analysis: &GraphAnalysis, theta: NodeId) -> Result<Matrix, GraphError> {
    analysis.reduced_laplacian(theta)
}

pub fn dbar(analysis: &GraphAnalysis, theta: NodeId, din_bounds: &[f64]) -> Result<Matrix, GraphError> {
    analysis.dbar(theta, din_bounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(from: usize, to: usize) -> Edge {
        Edge {
            from: NodeId::from_one_based(from).unwrap(),
            to: NodeId::from_one_based(to).unwrap(),
            weight: 1.0,
        }
    }

    fn chain4() -> WeightedDigraph {
        WeightedDigraph::from_edges(4, &[edge(1, 2), edge(2, 3), edge(3, 4)]).unwrap()
    }

    #[test]
    fn chain_laplacian_and_roots() {
        let a = chain4().analyze();
        let expected = Matrix::from_rows(&[
            &[0.0, 0.0, 0.0, 0.0],
            &[-1.0, 1.0, 0.0, 0.0],
            &[0.0, -1.0, 1.0, 0.0],
            &[0.0, 0.0, -1.0, 1.0],
        ]);
        assert_eq!(a.laplacian, expected);
        assert_eq!(a.root_set, BTreeSet::from([NodeId::new(0)]));
        assert_eq!(a.in_degrees, vec![0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn empty_graph_has_no_roots() {
        let a = WeightedDigraph::empty(3).unwrap().analyze();
        assert_eq!(a.laplacian, Matrix::zeros(3, 3));
        assert!(a.root_set.is_empty());
        assert_eq!(a.require_root(NodeId::new(0)), Err(GraphError::NoSpanningTree));
    }

    #[test]
    fn validation_errors_name_the_entry() {
        let bad = Edge {
            weight: -1.0,
            ..edge(1, 2)
        };
        assert!(matches!(
            WeightedDigraph::from_edges(2, &[bad]),
            Err(GraphError::NegativeWeight { weight, .. }) if weight == -1.0
        ));
        assert_eq!(
            WeightedDigraph::from_edges(2, &[edge(2, 2)]),
            Err(GraphError::SelfLoop { node: NodeId::new(1) })
        );
        assert!(matches!(
            WeightedDigraph::from_edges(2, &[edge(1, 3)]),
            Err(GraphError::NodeOutOfRange { node: 3, n: 2 })
        ));
        assert!(matches!(
            WeightedDigraph::from_edges(2, &[edge(1, 2), edge(1, 2)]),
            Err(GraphError::DuplicateEdge { .. })
        ));
    }

    #[test]
    fn reduced_laplacian_chain() {
        let a = chain4().analyze();
        let lhat = a.reduced_laplacian(NodeId::new(0)).unwrap();
        assert_eq!(
            lhat,
            Matrix::from_rows(&[&[1.0, 0.0, 0.0], &[-1.0, 1.0, 0.0], &[0.0, -1.0, 1.0]])
        );
        let pair = WeightedDigraph::from_edges(2, &[edge(1, 2)]).unwrap().analyze();
        assert_eq!(pair.reduced_laplacian(NodeId::new(0)).unwrap(), Matrix::from_rows(&[&[1.0]]));
    }

    #[test]
    fn reduced_laplacian_rejects_non_root() {
        let a = chain4().analyze();
        assert!(matches!(
            a.reduced_laplacian(NodeId::new(2)),
            Err(GraphError::NotARoot { .. })
        ));
    }

    #[test]
    fn dbar_chain_by_hand() {
        let a = chain4().analyze();
        let d = a.dbar(NodeId::new(0), &a.default_bounds()).unwrap();
        assert_eq!(
            d,
            Matrix::from_rows(&[&[0.5, 0.0, 0.0], &[0.5, 0.5, 0.0], &[0.0, 0.5, 0.5]])
        );
    }

    #[test]
    fn dbar_rejects_low_bound() {
        let a = chain4().analyze();
        let err = a.dbar(NodeId::new(0), &[0.0, 1.0, 0.5, 1.0]).unwrap_err();
        assert!(matches!(err, GraphError::BoundViolation { node, .. } if node == NodeId::new(2)));
        // the root's own bound is never consulted
        assert!(a.dbar(NodeId::new(0), &[0.0, 1.0, 1.0, 1.0]).is_ok());
        assert!(matches!(a.dbar(NodeId::new(0), &[1.0]), Err(GraphError::BoundsLength { .. })));
    }

    #[test]
    fn directed_cycle_all_roots() {
        let n = 6;
        let mut edges: Vec<Edge> = (1..n).map(|i| edge(i, i + 1)).collect();
        edges.push(edge(n, 1));
        let a = WeightedDigraph::from_edges(n, &edges).unwrap().analyze();
        assert_eq!(a.root_set.len(), n);
        assert!(a.in_degrees.iter().all(|&d| d == 1.0));
    }

    #[test]
    fn node_labels_are_one_based() {
        assert_eq!(NodeId::from_one_based(0), None);
        assert_eq!(NodeId::from_one_based(1), Some(NodeId::new(0)));
        assert_eq!(NodeId::new(4).to_string(), "5");
        let parsed: NodeId = serde_json::from_str("3").unwrap();
        assert_eq!(parsed.index(), 2);
        assert!(serde_json::from_str::<NodeId>("0").is_err());
    }
}
