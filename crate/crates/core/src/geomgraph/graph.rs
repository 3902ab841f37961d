//! Graph representation of an acquisition geometry.
//!
//! Nodes are source positions; each node is connected to its immediate
//! angular neighbours with weight `cos(angle_j - angle_i)`. Full uniform
//! rotations close the path into a cycle.

use std::fmt::Write as _;

use super::geometry::AcquisitionGeometry;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Edges whose cosine weight falls at or below this value are rejected:
/// neighbours a quarter turn or more apart carry no usable similarity.
pub const MIN_EDGE_WEIGHT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryGraph {
    node_count: usize,
    /// Sorted by `(i, j)` with `i < j`.
    edges: Vec<Edge>,
    cyclic: bool,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl GeometryGraph {
    /// Graph of a geometry: immediate-neighbour edges, wrap-around edge iff
    /// the geometry is a uniform full rotation.
    pub fn from_geometry(g: &AcquisitionGeometry) -> Result<Self> {
        Self::from_node_angles(g.angles(), g.full_rotation())
    }

    /// Builds the neighbour graph of nodes labelled in the given order.
    /// Adjacency follows angular order, so any relabelling of `angles`
    /// yields the correspondingly relabelled graph.
    pub fn from_node_angles(angles: &[f64], cyclic: bool) -> Result<Self> {
        let n = angles.len();
        if n == 0 {
            return Err(Error::Graph("graph needs at least one node".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]));
        let cyclic = cyclic && n >= 3;

        let mut pairs: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0], w[1])).collect();
        if cyclic {
            pairs.push((order[n - 1], order[0]));
        }
        let mut edges = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let weight = (angles[b] - angles[a]).cos();
            if weight <= MIN_EDGE_WEIGHT {
                return Err(Error::Geometry(format!(
                    "angular gap between nodes {a} and {b} is {:.6} rad; cosine weight {weight:.3e} is not positive",
                    (angles[b] - angles[a]).abs()
                )));
            }
            edges.push((a, b, weight));
        }
        Self::from_edges(n, &edges, cyclic)
    }

    /// Unit-weight cycle `C_n`.
    pub fn unit_cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Graph(format!("a cycle needs at least 3 nodes, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        Self::from_edges(n, &edges, true)
    }

    /// Undirected graph from an explicit edge list. Weights must be finite
    /// and non-zero; self loops and repeated edges are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], cyclic: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("graph needs at least one node".into()));
        }
        let mut list = Vec::with_capacity(edges.len());
        for &(a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::Graph(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if a == b {
                return Err(Error::Graph(format!("self loop on node {a}")));
            }
            if !w.is_finite() || w == 0.0 {
                return Err(Error::Graph(format!("edge ({a}, {b}) has invalid weight {w}")));
            }
            list.push(Edge {
                i: a.min(b),
                j: a.max(b),
                weight: w,
            });
        }
        list.sort_by_key(|e| (e.i, e.j));
        if let Some(w) = list.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::Graph(format!("duplicate edge ({}, {})", w[0].i, w[0].j)));
        }
        let mut neighbors = vec![Vec::new(); n];
        for e in &list {
            neighbors[e.i].push((e.j, e.weight));
            neighbors[e.j].push((e.i, e.weight));
        }
        for row in &mut neighbors {
            row.sort_by_key(|&(j, _)| j);
        }
        Ok(Self {
            node_count: n,
            edges: list,
            cyclic,
            neighbors,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn cyclic(&self) -> bool {
        self.cyclic
    }

    /// Neighbours of node `i` with edge weights, sorted by node index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.neighbors[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map_or(0.0, |&(_, w)| w)
    }

    /// `D_ii = Σ_j W_ij`.
    pub fn degree(&self) -> Vec<f64> {
        self.neighbors
            .iter()
            .map(|row| row.iter().map(|&(_, w)| w).sum())
            .collect()
    }

    /// True for cycles whose every edge weight is exactly 1.
    pub fn is_unit_cycle(&self) -> bool {
        self.cyclic
            && self.node_count >= 3
            && self.edges.len() == self.node_count
            && self.edges.iter().all(|e| e.weight == 1.0)
            && self.neighbors.iter().all(|row| row.len() == 2)
    }

    /// Combinatorial Laplacian `L = D - W`.
    pub fn laplacian(&self) -> CsrMatrix {
        let degree = self.degree();
        let rows = self
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r: Vec<(usize, f64)> = row.iter().map(|&(j, w)| (j, -w)).collect();
                r.push((i, degree[i]));
                r
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    /// Symmetric normalised Laplacian `I - D^{-1/2} W D^{-1/2}`.
    pub fn normalized_laplacian(&self) -> Result<CsrMatrix> {
        let degree = self.degree();
        if let Some(i) = degree.iter().position(|&d| d <= 0.0) {
            return Err(Error::Graph(format!("node {i} has non-positive degree")));
        }
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| d.sqrt().recip()).collect();
        let rows = self
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r: Vec<(usize, f64)> = row
                    .iter()
                    .map(|&(j, w)| (j, -w * inv_sqrt[i] * inv_sqrt[j]))
                    .collect();
                r.push((i, 1.0));
                r
            })
            .collect();
        Ok(CsrMatrix::from_rows(rows))
    }

    /// Propagation matrix `D̃^{-1/2} (W + I) D̃^{-1/2}` with `D̃` the degree of
    /// the self-loop-augmented adjacency.
    pub fn normalized_propagation(&self) -> Result<CsrMatrix> {
        let aug_degree: Vec<f64> = self.degree().iter().map(|d| d + 1.0).collect();
        if let Some(i) = aug_degree.iter().position(|&d| d <= 0.0) {
            return Err(Error::Graph(format!(
                "node {i} has non-positive augmented degree {}",
                aug_degree[i]
            )));
        }
        let inv_sqrt: Vec<f64> = aug_degree.iter().map(|d| d.sqrt().recip()).collect();
        let rows = self
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r: Vec<(usize, f64)> = row
                    .iter()
                    .map(|&(j, w)| (j, w * inv_sqrt[i] * inv_sqrt[j]))
                    .collect();
                r.push((i, inv_sqrt[i] * inv_sqrt[i]));
                r
            })
            .collect();
        Ok(CsrMatrix::from_rows(rows))
    }

    /// Relabels nodes: node `i` of `self` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.node_count)?;
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| (perm[e.i], perm[e.j], e.weight))
            .collect();
        Self::from_edges(self.node_count, &edges, self.cyclic)
    }

    /// Hop distances from `source` (breadth-first); `usize::MAX` if unreachable.
    pub fn hop_distances(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.node_count];
        let mut queue = std::collections::VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.neighbors[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Text edge list: header `n=<n> cyclic=<0|1>` then one `i j weight` line
    /// per edge, `i < j`, ascending.
    pub fn to_dump(&self) -> String {
        let mut out = format!("n={} cyclic={}\n", self.node_count, self.cyclic as u8);
        for e in &self.edges {
            writeln!(out, "{} {} {:?}", e.i, e.j, e.weight).expect("writing to String");
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Graph(format!("malformed graph dump: {msg}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let mut n = None;
        let mut cyclic = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("cyclic", "0")) => cyclic = Some(false),
                Some(("cyclic", "1")) => cyclic = Some(true),
                _ => return Err(bad(format!("unexpected header field `{field}`"))),
            }
        }
        let (n, cyclic) = n.zip(cyclic).ok_or_else(|| bad("header needs n and cyclic".into()))?;
        let mut edges = Vec::new();
        for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                [i, j, w] => i.parse().ok().zip(j.parse().ok()).zip(w.parse().ok()),
                _ => None,
            };
            let ((i, j), w) = parsed.ok_or_else(|| bad(format!("line {}: `{line}`", lineno + 2)))?;
            edges.push((i, j, w));
        }
        Self::from_edges(n, &edges, cyclic)
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::arg(format!("permutation has length {}, expected {n}", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::arg("not a permutation"));
        }
    }
    Ok(())
}
