//! Directed communication network.
//!
//! An edge `(i, j)` means information flows from node `j` to node `i`, so `j`
//! is in the neighborhood of `i`. Indices are 0-based in this API; scenario
//! files and event logs use 1-based ids and convert at the boundary.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Digraph {
    /// Builds a digraph from 0-based ordered pairs `(receiver, sender)`.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            for index in [i, j] {
                if index >= n {
                    return Err(Error::NodeOutOfRange { index, n });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            set.insert((i, j));
        }
        Ok(Self { n, edges: set })
    }

    /// Builds a digraph from 1-based pairs as they appear in scenario files.
    pub fn from_one_based(n: usize, edges: &[[usize; 2]]) -> Result<Self> {
        let mut zero = Vec::with_capacity(edges.len());
        for &[i, j] in edges {
            for index in [i, j] {
                if index == 0 || index > n {
                    return Err(Error::NodeOutOfRange { index, n });
                }
            }
            zero.push((i - 1, j - 1));
        }
        Self::new(n, zero)
    }

    /// Complete digraph: every node hears every other node.
    pub fn complete(n: usize) -> Result<Self> {
        Self::new(
            n,
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))),
        )
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn to_one_based(&self) -> Vec<[usize; 2]> {
        self.edges.iter().map(|&(i, j)| [i + 1, j + 1]).collect()
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
        }
        a
    }

    pub fn laplacian(&self) -> LaplacianMatrix {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            l[(i, j)] = -1.0;
            l[(i, i)] += 1.0;
        }
        LaplacianMatrix(l)
    }

    /// The set `N_i` of nodes that transmit to `i`, in ascending order.
    pub fn neighborhood(&self, i: usize) -> Result<Vec<usize>> {
        if i >= self.n {
            return Err(Error::NodeOutOfRange { index: i, n: self.n });
        }
        Ok(self
            .edges
            .range((i, 0)..(i + 1, 0))
            .map(|&(_, j)| j)
            .collect())
    }

    /// Nodes reachable from `root` along the direction information travels.
    fn reach_from(&self, root: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(j) = queue.pop_front() {
            // j transmits to every i with (i, j) in the edge set
            for &(i, _) in self.edges.iter().filter(|&&(_, s)| s == j) {
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(i);
                }
            }
        }
        seen
    }

    /// Smallest node index from which every node can be reached, if any.
    pub fn spanning_tree_root(&self) -> Option<usize> {
        (0..self.n).find(|&r| self.reach_from(r).iter().all(|&s| s))
    }

    pub fn has_spanning_tree(&self) -> bool {
        self.spanning_tree_root().is_some()
    }

    /// Spectral form of the spanning tree test: the Laplacian has exactly one
    /// eigenvalue within `1e-8` of zero and every other eigenvalue has a
    /// positive real part.
    pub fn has_spanning_tree_spectral(&self) -> Result<bool> {
        let eig = linalg::spectrum(self.laplacian().matrix())?;
        let zeros = eig.iter().filter(|z| z.norm() <= 1e-8).count();
        let rest_positive = eig.iter().filter(|z| z.norm() > 1e-8).all(|z| z.re > 1e-8);
        Ok(zeros == 1 && rest_positive)
    }
}

/// `L = Delta - A`; rows sum to zero and entries are small integers.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}
