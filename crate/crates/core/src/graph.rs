//! Weighted multigraphs with a permanently closed backbone, plus the vector
//! types that live on them (demands, switching probabilities, binary
//! configurations).
//!
//! Nodes are `0..n`. Edges keep their input order; every per-edge vector in
//! the crate (switches, weights, gradients) is indexed by that order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Undirected edge `u < v` with positive conductance `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

impl Edge {
    /// Builds an edge with endpoints sorted so that `u <= v`.
    pub fn new(a: usize, b: usize, w: f64) -> Self {
        let (u, v) = if a <= b { (a, b) } else { (b, a) };
        Edge { u, v, w }
    }
}

/// A single failed graph invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoNodes,
    NonPositiveWeight { edge: usize },
    SelfLoop { edge: usize },
    UnorderedEndpoints { edge: usize },
    NodeOutOfRange { edge: usize, node: usize },
    BackboneIndexOutOfRange { index: usize },
    DuplicateBackboneIndex { index: usize },
    BackboneNotSpanning { node: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoNodes => write!(f, "graph has no nodes"),
            Violation::NonPositiveWeight { edge } => write!(f, "nonpositive weight at edge {edge}"),
            Violation::SelfLoop { edge } => write!(f, "self-loop at edge {edge}"),
            Violation::UnorderedEndpoints { edge } => {
                write!(f, "endpoints of edge {edge} are not ordered i < j")
            }
            Violation::NodeOutOfRange { edge, node } => {
                write!(f, "edge {edge} references node {node} out of range")
            }
            Violation::BackboneIndexOutOfRange { index } => {
                write!(f, "backbone index {index} is not a valid edge")
            }
            Violation::DuplicateBackboneIndex { index } => {
                write!(f, "backbone index {index} listed twice")
            }
            Violation::BackboneNotSpanning { node } => {
                write!(f, "backbone does not span node {node}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    backbone: Vec<usize>,
    #[serde(skip)]
    in_backbone: Vec<bool>,
}

impl Graph {
    /// Builds a graph and rejects it if any invariant fails.
    pub fn new(n: usize, edges: Vec<Edge>, backbone: Vec<usize>) -> Result<Self> {
        let g = Self::new_unchecked(n, edges, backbone);
        let violations = g.validate();
        if !violations.is_empty() {
            let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidInput(msgs.join("; ")));
        }
        Ok(g)
    }

    /// Builds a graph without checking invariants. Backbone indices out of
    /// range are ignored by [`Graph::is_backbone`].
    pub fn new_unchecked(n: usize, edges: Vec<Edge>, mut backbone: Vec<usize>) -> Self {
        let mut in_backbone = vec![false; edges.len()];
        for &e in &backbone {
            if e < edges.len() {
                in_backbone[e] = true;
            }
        }
        backbone.sort_unstable();
        Graph {
            n,
            edges,
            backbone,
            in_backbone,
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push(Violation::NoNodes);
        }
        for (k, e) in self.edges.iter().enumerate() {
            if !(e.w > 0.0) || !e.w.is_finite() {
                out.push(Violation::NonPositiveWeight { edge: k });
            }
            for node in [e.u, e.v] {
                if node >= self.n {
                    out.push(Violation::NodeOutOfRange { edge: k, node });
                }
            }
            if e.u == e.v {
                out.push(Violation::SelfLoop { edge: k });
            } else if e.u > e.v {
                out.push(Violation::UnorderedEndpoints { edge: k });
            }
        }
        let mut seen = vec![false; self.edges.len()];
        let mut dsu = DisjointSets::new(self.n);
        for &b in &self.backbone {
            if b >= self.edges.len() {
                out.push(Violation::BackboneIndexOutOfRange { index: b });
                continue;
            }
            if seen[b] {
                out.push(Violation::DuplicateBackboneIndex { index: b });
            }
            seen[b] = true;
            let e = self.edges[b];
            if e.u < self.n && e.v < self.n {
                dsu.union(e.u, e.v);
            }
        }
        if self.n > 0 {
            let root = dsu.find(0);
            for node in 1..self.n {
                if dsu.find(node) != root {
                    out.push(Violation::BackboneNotSpanning { node });
                }
            }
        }
        out
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

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    /// Backbone edge indices in increasing order.
    pub fn backbone(&self) -> &[usize] {
        &self.backbone
    }

    pub fn backbone_len(&self) -> usize {
        self.backbone.len()
    }

    pub fn is_backbone(&self, e: usize) -> bool {
        self.in_backbone.get(e).copied().unwrap_or(false)
    }

    /// Indices of switchable (non-backbone) edges in increasing order.
    pub fn free_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.m()).filter(move |&e| !self.in_backbone[e])
    }

    pub fn free_count(&self) -> usize {
        self.m() - self.backbone.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.w).collect()
    }

    pub fn max_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).fold(0.0, f64::max)
    }

    /// Multiplies every weight by `c > 0`.
    pub fn scaled(&self, c: f64) -> Graph {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge { w: e.w * c, ..*e })
            .collect();
        Graph::new_unchecked(self.n, edges, self.backbone.clone())
    }

    /// Same edges in the same order with node `v` renamed `label[v]`.
    pub fn relabeled(&self, label: &[usize]) -> Graph {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(label[e.u], label[e.v], e.w))
            .collect();
        Graph::new_unchecked(self.n, edges, self.backbone.clone())
    }

    /// Node labels following a breadth-first sweep of the backbone, so that
    /// tree neighbours sit close together in memory. Nodes the backbone
    /// misses keep their relative order at the end.
    pub fn locality_labels(&self) -> Vec<usize> {
        let mut adj = vec![Vec::new(); self.n];
        for &e in &self.backbone {
            if let Some(edge) = self.edges.get(e) {
                adj[edge.u].push(edge.v);
                adj[edge.v].push(edge.u);
            }
        }
        let mut label = vec![usize::MAX; self.n];
        let mut order = Vec::with_capacity(self.n);
        for root in 0..self.n {
            if label[root] != usize::MAX {
                continue;
            }
            label[root] = order.len();
            order.push(root);
            let mut head = order.len() - 1;
            while head < order.len() {
                let v = order[head];
                head += 1;
                for &u in &adj[v] {
                    if label[u] == usize::MAX {
                        label[u] = order.len();
                        order.push(u);
                    }
                }
            }
        }
        label
    }
}

/// Union-find with path halving.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Relative tolerance on `|sum(d)| / ||d||_2` for a demand vector.
pub const DEMAND_BALANCE_TOL: f64 = 1e-12;

/// Nodal injections summing to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandVector(Vec<f64>);

impl DemandVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_balanced(&values)?;
        Ok(DemandVector(values))
    }

    /// Projects `values` onto the zero-sum subspace.
    pub fn centered(values: Vec<f64>) -> Self {
        DemandVector(project_zero_mean(&values))
    }

    /// Unit injection at `source`, unit withdrawal at `sink`.
    pub fn pair(n: usize, source: usize, sink: usize) -> Self {
        let mut d = vec![0.0; n];
        d[source] += 1.0;
        d[sink] -= 1.0;
        DemandVector(d)
    }

    pub fn zeros(n: usize) -> Self {
        DemandVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        DemandVector(self.0.iter().map(|x| x * c).collect())
    }
}

impl std::ops::Deref for DemandVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_balanced(d: &[f64]) -> Result<()> {
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "demand vector has non-finite entries".into(),
        ));
    }
    let sum: f64 = d.iter().sum();
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if sum.abs() > DEMAND_BALANCE_TOL * norm.max(f64::MIN_POSITIVE) && sum != 0.0 {
        return Err(Error::InvalidInput(format!(
            "demands must sum to zero (sum = {sum:e}, norm = {norm:e})"
        )));
    }
    Ok(())
}

/// Returns `v - mean(v) * 1`.
pub fn project_zero_mean(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

/// Fractional switching probabilities with backbone entries pinned to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SwitchVector(Vec<f64>);

impl SwitchVector {
    pub fn new(g: &Graph, values: Vec<f64>) -> Result<Self> {
        check_len("switch vector", values.len(), g.m())?;
        for (e, &x) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidInput(format!(
                    "switch entry {e} = {x} outside [0, 1]"
                )));
            }
            if g.is_backbone(e) && x != 1.0 {
                return Err(Error::InvalidInput(format!(
                    "backbone edge {e} must have switch value 1, got {x}"
                )));
            }
        }
        Ok(SwitchVector(values))
    }

    /// Indicator of the backbone.
    pub fn backbone(g: &Graph) -> Self {
        let mut s = vec![0.0; g.m()];
        for &e in g.backbone() {
            s[e] = 1.0;
        }
        SwitchVector(s)
    }

    /// Every switch closed.
    pub fn ones(g: &Graph) -> Self {
        SwitchVector(vec![1.0; g.m()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().sum()
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        SwitchVector(values)
    }
}

impl std::ops::Deref for SwitchVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A binary switching decision, optionally with the voltages it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub sbin: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltages: Option<Vec<f64>>,
}

impl Configuration {
    pub fn new(sbin: Vec<bool>) -> Self {
        Configuration {
            sbin,
            voltages: None,
        }
    }

    pub fn backbone(g: &Graph) -> Self {
        let mut sbin = vec![false; g.m()];
        for &e in g.backbone() {
            sbin[e] = true;
        }
        Configuration::new(sbin)
    }

    pub fn closed_count(&self) -> usize {
        self.sbin.iter().filter(|&&b| b).count()
    }

    pub fn to_switches(&self) -> Vec<f64> {
        self.sbin
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn respects_backbone(&self, g: &Graph) -> bool {
        self.sbin.len() == g.m() && g.backbone().iter().all(|&e| self.sbin[e])
    }
}

/// True when the edges with positive switch value connect all nodes.
pub fn is_connected(g: &Graph, s: &[f64]) -> bool {
    if g.n() == 0 {
        return false;
    }
    let mut dsu = DisjointSets::new(g.n());
    let mut components = g.n();
    for (e, edge) in g.edges().iter().enumerate() {
        if s[e] > 0.0 && dsu.union(edge.u, edge.v) {
            components -= 1;
        }
    }
    components == 1
}
