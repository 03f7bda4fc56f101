//! Grid data model: oscillator nodes coupled by transmission lines.
//!
//! A [`GridTopology`] is immutable once built. Every operation that changes the
//! network ([`GridTopology::remove_edge`], [`GridTopology::remove_node`],
//! [`GridTopology::with_powers`]) returns a fresh copy, so topologies can be
//! shared freely between campaign workers.
//!
//! Node phases and every per-node vector used elsewhere in the crate are laid
//! out in the order of [`GridTopology::nodes`], not by raw id.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};

/// Allowed deviation of the total injected power from zero.
pub const POWER_BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N{}", self.0)
    }
}

/// Unordered node pair identifying a line. Always stored with `a <= b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub a: NodeId,
    pub b: NodeId,
}

impl EdgeKey {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            EdgeKey { a, b }
        } else {
            EdgeKey { a: b, b: a }
        }
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.a == n || self.b == n
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{}-{}", self.a.0, self.b.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridNode {
    pub id: NodeId,
    /// Injected power in p.u.; positive for generators, negative for loads.
    pub power: f64,
    pub inertia: f64,
    pub damping: f64,
}

impl GridNode {
    pub fn new(id: u32, power: f64, inertia: f64, damping: f64) -> Self {
        GridNode {
            id: NodeId(id),
            power,
            inertia,
            damping,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub coupling: f64,
}

impl GridEdge {
    pub fn new(a: u32, b: u32, coupling: f64) -> Self {
        GridEdge {
            a: NodeId(a),
            b: NodeId(b),
            coupling,
        }
    }

    pub fn key(&self) -> EdgeKey {
        EdgeKey::new(self.a, self.b)
    }
}

/// A broken invariant found by [`validate_grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    EmptyGrid,
    DuplicateNode(NodeId),
    NonPositiveInertia(NodeId),
    NonPositiveDamping(NodeId),
    NonFinitePower(NodeId),
    SelfLoop(NodeId),
    DuplicateEdge(EdgeKey),
    NonPositiveCoupling(EdgeKey),
    DanglingEdge { edge: EdgeKey, missing: NodeId },
    PowerImbalance { total: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGrid => write!(f, "grid has no nodes"),
            Violation::DuplicateNode(n) => write!(f, "node {n} is defined more than once"),
            Violation::NonPositiveInertia(n) => write!(f, "node {n}: inertia must be > 0"),
            Violation::NonPositiveDamping(n) => write!(f, "node {n}: damping must be > 0"),
            Violation::NonFinitePower(n) => write!(f, "node {n}: power is not finite"),
            Violation::SelfLoop(n) => write!(f, "edge {n}-{n} connects a node to itself"),
            Violation::DuplicateEdge(e) => write!(f, "edge {e} is defined more than once"),
            Violation::NonPositiveCoupling(e) => write!(f, "edge {e}: coupling must be > 0"),
            Violation::DanglingEdge { edge, missing } => {
                write!(f, "edge {edge} references unknown node {missing}")
            }
            Violation::PowerImbalance { total } => {
                write!(f, "power balance violated: sum of P = {total:e}")
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GridTopology {
    nodes: Vec<GridNode>,
    edges: Vec<GridEdge>,
    index: HashMap<NodeId, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl PartialEq for GridTopology {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl GridTopology {
    /// Builds a topology without checking invariants. Use [`validate_grid`] or
    /// [`GridTopology::validated`] to check them.
    pub fn new(nodes: Vec<GridNode>, edges: Vec<GridEdge>) -> Self {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            index.entry(n.id).or_insert(i);
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            if let (Some(&i), Some(&j)) = (index.get(&e.a), index.get(&e.b)) {
                if i != j {
                    adjacency[i].push((j, e.coupling));
                    adjacency[j].push((i, e.coupling));
                }
            }
        }
        GridTopology {
            nodes,
            edges,
            index,
            adjacency,
        }
    }

    pub fn validated(nodes: Vec<GridNode>, edges: Vec<GridEdge>) -> Result<Self> {
        let g = Self::new(nodes, edges);
        let violations = validate_grid(&g);
        if violations.is_empty() {
            Ok(g)
        } else {
            Err(GridError::Validation(violations))
        }
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GridEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Position of `id` in [`GridTopology::nodes`].
    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node(&self, id: NodeId) -> Option<&GridNode> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn edge(&self, a: NodeId, b: NodeId) -> Option<&GridEdge> {
        let key = EdgeKey::new(a, b);
        self.edges.iter().find(|e| e.key() == key)
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edge(a, b).is_some()
    }

    /// Neighbours of the node at position `i` as `(position, coupling)`.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, id: NodeId) -> Option<usize> {
        self.index_of(id).map(|i| self.adjacency[i].len())
    }

    pub fn powers(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.power).collect()
    }

    pub fn total_power(&self) -> f64 {
        self.nodes.iter().map(|n| n.power).sum()
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    pub fn remove_edge(&self, a: NodeId, b: NodeId) -> Result<GridTopology> {
        let key = EdgeKey::new(a, b);
        if !self.has_edge(a, b) {
            return Err(GridError::MissingEdge(key));
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| e.key() != key)
            .copied()
            .collect();
        Ok(GridTopology::new(self.nodes.clone(), edges))
    }

    /// Removes a node and all incident lines. The result is generally not
    /// power-balanced.
    pub fn remove_node(&self, id: NodeId) -> Result<GridTopology> {
        if self.index_of(id).is_none() {
            return Err(GridError::MissingNode(id));
        }
        Ok(self.without_nodes(&[id].into_iter().collect()))
    }

    pub(crate) fn without_nodes(&self, ids: &HashSet<NodeId>) -> GridTopology {
        let nodes = self
            .nodes
            .iter()
            .filter(|n| !ids.contains(&n.id))
            .copied()
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| !ids.contains(&e.a) && !ids.contains(&e.b))
            .copied()
            .collect();
        GridTopology::new(nodes, edges)
    }

    pub(crate) fn without_edges(&self, keys: &HashSet<EdgeKey>) -> GridTopology {
        let edges = self
            .edges
            .iter()
            .filter(|e| !keys.contains(&e.key()))
            .copied()
            .collect();
        GridTopology::new(self.nodes.clone(), edges)
    }

    pub fn add_edge(&self, edge: GridEdge) -> GridTopology {
        let mut edges = self.edges.clone();
        edges.push(edge);
        GridTopology::new(self.nodes.clone(), edges)
    }

    /// Copy with new injected powers, given in node order.
    pub fn with_powers(&self, powers: &[f64]) -> Result<GridTopology> {
        if powers.len() != self.nodes.len() {
            return Err(GridError::DimensionMismatch {
                expected: self.nodes.len(),
                actual: powers.len(),
            });
        }
        let nodes = self
            .nodes
            .iter()
            .zip(powers)
            .map(|(n, &p)| GridNode { power: p, ..*n })
            .collect();
        Ok(GridTopology::new(nodes, self.edges.clone()))
    }

    /// Sub-grid induced by the node positions in `members`.
    pub fn induced(&self, members: &[usize]) -> GridTopology {
        let keep: HashSet<NodeId> = members.iter().map(|&i| self.nodes[i].id).collect();
        let nodes = members.iter().map(|&i| self.nodes[i]).collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| keep.contains(&e.a) && keep.contains(&e.b))
            .copied()
            .collect();
        GridTopology::new(nodes, edges)
    }

    /// Connected components as lists of node positions, each list ascending,
    /// ordered by their smallest position.
    pub fn component_indices(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut members = Vec::new();
            while let Some(i) = stack.pop() {
                members.push(i);
                for &(j, _) in &self.adjacency[i] {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

pub fn validate_grid(g: &GridTopology) -> Vec<Violation> {
    let mut out = Vec::new();
    if g.nodes.is_empty() {
        out.push(Violation::EmptyGrid);
        return out;
    }
    let mut ids = HashSet::new();
    for n in &g.nodes {
        if !ids.insert(n.id) {
            out.push(Violation::DuplicateNode(n.id));
        }
        // negated comparisons also reject NaN
        if !(n.inertia > 0.0) {
            out.push(Violation::NonPositiveInertia(n.id));
        }
        if !(n.damping > 0.0) {
            out.push(Violation::NonPositiveDamping(n.id));
        }
        if !n.power.is_finite() {
            out.push(Violation::NonFinitePower(n.id));
        }
    }
    let mut pairs = HashSet::new();
    for e in &g.edges {
        let key = e.key();
        if e.a == e.b {
            out.push(Violation::SelfLoop(e.a));
            continue;
        }
        if !pairs.insert(key) {
            out.push(Violation::DuplicateEdge(key));
        }
        if !(e.coupling > 0.0) {
            out.push(Violation::NonPositiveCoupling(key));
        }
        for end in [e.a, e.b] {
            if !ids.contains(&end) {
                out.push(Violation::DanglingEdge {
                    edge: key,
                    missing: end,
                });
            }
        }
    }
    let total = g.total_power();
    if !(total.abs() < POWER_BALANCE_TOL) {
        out.push(Violation::PowerImbalance { total });
    }
    out
}

/// Partition of the node ids into connected components, each sorted, ordered
/// by smallest member.
pub fn connected_components(g: &GridTopology) -> Vec<BTreeSet<NodeId>> {
    let mut comps: Vec<BTreeSet<NodeId>> = g
        .component_indices()
        .into_iter()
        .map(|c| c.into_iter().map(|i| g.nodes[i].id).collect())
        .collect();
    comps.sort_by_key(|c| c.iter().next().copied());
    comps
}
