//! Finite undirected graphs, initial edge weights, automorphisms, and the
//! reflection-symmetry check used by the abstract main bound.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::EdgePotential;

/// A finite, connected, simple undirected graph with dense indices.
///
/// Edges are stored with their endpoints in the order they were given; the
/// adjacency list of each vertex holds incident edge indices in ascending
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGraph {
    labels: Vec<String>,
    edges: Vec<(usize, usize)>,
    incident: Vec<Vec<usize>>,
    lookup: HashMap<(usize, usize), usize>,
}

impl FiniteGraph {
    /// Builds a graph on `n` vertices labelled by their index.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let labels = (0..n).map(|v| v.to_string()).collect();
        Self::with_labels(labels, edges)
    }

    pub fn with_labels(labels: Vec<String>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut incident = vec![Vec::new(); n];
        let mut lookup = HashMap::with_capacity(edges.len());
        for (idx, &(u, v)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} = ({u}, {v}) references a missing vertex"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("edge {idx} is a self-loop at {u}")));
            }
            if lookup.insert(key(u, v), idx).is_some() {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} = ({u}, {v}) is parallel to an earlier edge"
                )));
            }
            incident[u].push(idx);
            incident[v].push(idx);
        }
        let graph = FiniteGraph {
            labels,
            edges,
            incident,
            lookup,
        };
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(graph)
    }

    pub fn n_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// Incident edge indices of `v`, ascending.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incident[v].len()
    }

    pub fn other_end(&self, e: usize, v: usize) -> usize {
        let (a, b) = self.edges[e];
        if a == v {
            b
        } else {
            debug_assert_eq!(b, v, "vertex {v} is not an endpoint of edge {e}");
            a
        }
    }

    /// `(edge, neighbor)` pairs around `v`.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.incident[v].iter().map(move |&e| (e, self.other_end(e, v)))
    }

    pub fn find_edge(&self, u: usize, v: usize) -> Option<usize> {
        self.lookup.get(&key(u, v)).copied()
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        self.find_edge(u, v).is_some()
    }

    pub fn contains_vertex(&self, e: usize, v: usize) -> bool {
        let (a, b) = self.edges[e];
        a == v || b == v
    }

    pub(crate) fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n_vertices() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange(v))
        }
    }

    pub(crate) fn check_edge(&self, e: usize) -> Result<()> {
        if e < self.n_edges() {
            Ok(())
        } else {
            Err(Error::EdgeOutOfRange(e))
        }
    }

    fn is_connected(&self) -> bool {
        let n = self.n_vertices();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for (_, w) in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    /// Cycle on `n >= 3` vertices; edge `k` joins `k` and `k + 1 mod n`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("cycle needs n >= 3, got {n}")));
        }
        Self::new(n, (0..n).map(|k| (k, (k + 1) % n)).collect())
    }

    pub fn triangle() -> Self {
        Self::cycle(3).expect("triangle is valid")
    }

    /// Path on `n >= 2` vertices; edge `k` joins `k` and `k + 1`.
    pub fn path(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("path needs n >= 2, got {n}")));
        }
        Self::new(n, (0..n - 1).map(|k| (k, k + 1)).collect())
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("complete graph needs n >= 1".into()));
        }
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Self::new(n, edges)
    }

    /// The `r`-diluted `n`-cycle: a cycle on `n * r` vertices whose
    /// "crossing" vertices are the multiples of `r`.
    pub fn diluted_cycle(n: usize, r: usize) -> Result<Self> {
        if r < 1 {
            return Err(Error::InvalidParameter("dilution factor must be >= 1".into()));
        }
        Self::cycle(n * r)
    }
}

/// Every connected simple graph on `n <= 6` vertices, one per isomorphism
/// class. Classes are identified by the smallest edge bitmask over all
/// vertex relabelings.
pub fn connected_graphs(n: usize) -> Result<Vec<FiniteGraph>> {
    if n == 0 || n > 6 {
        return Err(Error::InvalidParameter(format!(
            "exhaustive generation supports 1..=6 vertices, got {n}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let index = |u: usize, v: usize| pairs.iter().position(|&p| p == key(u, v)).unwrap();
    let perms = permutations(n);
    let maps: Vec<Vec<usize>> = perms
        .iter()
        .map(|p| pairs.iter().map(|&(u, v)| index(p[u], p[v])).collect())
        .collect();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let edges: Vec<(usize, usize)> = (0..pairs.len())
            .filter(|&k| mask >> k & 1 == 1)
            .map(|k| pairs[k])
            .collect();
        if edges.len() + 1 < n {
            continue;
        }
        let Ok(g) = FiniteGraph::new(n, edges) else {
            continue;
        };
        let canon = maps
            .iter()
            .map(|m| {
                (0..pairs.len())
                    .filter(|&k| mask >> k & 1 == 1)
                    .fold(0u64, |acc, k| acc | 1 << m[k])
            })
            .min()
            .unwrap();
        if seen.insert(canon) {
            out.push(g);
        }
    }
    Ok(out)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn key(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Strictly positive initial edge weights `a_e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialWeights(Vec<f64>);

impl InitialWeights {
    pub fn new(graph: &FiniteGraph, values: Vec<f64>) -> Result<Self> {
        if values.len() != graph.n_edges() {
            return Err(Error::InvalidParameter(format!(
                "expected {} initial weights, got {}",
                graph.n_edges(),
                values.len()
            )));
        }
        if let Some((e, w)) = values.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "initial weight a_{e} = {w} is not positive"
            )));
        }
        Ok(InitialWeights(values))
    }

    pub fn constant(graph: &FiniteGraph, a: f64) -> Result<Self> {
        Self::new(graph, vec![a; graph.n_edges()])
    }

    pub fn edge(&self, e: usize) -> f64 {
        self.0[e]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// `a_v`, the sum of initial weights around `v`.
    pub fn vertex(&self, graph: &FiniteGraph, v: usize) -> f64 {
        graph.incident(v).iter().map(|&e| self.0[e]).sum()
    }
}

/// A vertex permutation, `image[v] = f(v)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Automorphism(pub Vec<usize>);

impl Automorphism {
    pub fn apply(&self, v: usize) -> usize {
        self.0[v]
    }

    pub fn is_involution(&self) -> bool {
        self.0.iter().enumerate().all(|(v, &w)| self.0.get(w) == Some(&v))
    }

    /// Image of an edge, if `f` maps it onto an edge.
    pub fn apply_edge(&self, graph: &FiniteGraph, e: usize) -> Option<usize> {
        let (u, v) = graph.endpoints(e);
        graph.find_edge(self.0[u], self.0[v])
    }
}

/// One failed clause of the reflection-symmetry assumption.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// (a): `v0 == v1` or the two are adjacent.
    NotSeparated { v0: usize, v1: usize },
    /// (b): the reference edge does not touch `v0`.
    ReferenceEdge { e0: usize, v0: usize },
    /// (c): `f` is not a weight-preserving automorphism swapping `v0` and `v1`.
    Automorphism(String),
    /// (d): the potential is not 0 around `v0` or not 1 around `v1`.
    Potential { edge: usize, value: f64, expected: f64 },
    /// Arguments do not live on the same graph.
    Shape(String),
}

impl Violation {
    pub fn clause(&self) -> char {
        match self {
            Violation::NotSeparated { .. } => 'a',
            Violation::ReferenceEdge { .. } => 'b',
            Violation::Automorphism(_) => 'c',
            Violation::Potential { .. } => 'd',
            Violation::Shape(_) => '-',
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotSeparated { v0, v1 } => {
                write!(f, "(a) v0 = {v0} and v1 = {v1} must be distinct and non-adjacent")
            }
            Violation::ReferenceEdge { e0, v0 } => {
                write!(f, "(b) reference edge {e0} is not incident to v0 = {v0}")
            }
            Violation::Automorphism(msg) => write!(f, "(c) {msg}"),
            Violation::Potential { edge, value, expected } => {
                write!(f, "(d) phi({edge}) = {value}, expected {expected}")
            }
            Violation::Shape(msg) => write!(f, "{msg}"),
        }
    }
}

/// Outcome of [`check_assumption`]; violations are listed in clause order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssumptionReport {
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::Precondition(v.to_string())),
        }
    }
}

/// Checks that `f` is a weight-preserving automorphism exchanging `v0` and `v1`.
pub fn check_automorphism(
    graph: &FiniteGraph,
    a: &InitialWeights,
    v0: usize,
    v1: usize,
    f: &Automorphism,
) -> Option<Violation> {
    let n = graph.n_vertices();
    if f.0.len() != n {
        return Some(Violation::Automorphism(format!(
            "permutation has length {}, graph has {n} vertices",
            f.0.len()
        )));
    }
    let mut hit = vec![false; n];
    for &w in &f.0 {
        if w >= n || std::mem::replace(&mut hit[w], true) {
            return Some(Violation::Automorphism("map is not a bijection".into()));
        }
    }
    if f.apply(v0) != v1 || f.apply(v1) != v0 {
        return Some(Violation::Automorphism(format!(
            "f({v0}) = {}, f({v1}) = {}; the two vertices must be swapped",
            f.apply(v0),
            f.apply(v1)
        )));
    }
    // A bijection on vertices that maps every edge to an edge is an
    // automorphism of a finite graph: the edge counts agree.
    for e in 0..graph.n_edges() {
        match f.apply_edge(graph, e) {
            None => {
                return Some(Violation::Automorphism(format!("edge {e} is not mapped to an edge")));
            }
            Some(fe) if a.edge(fe) != a.edge(e) => {
                return Some(Violation::Automorphism(format!(
                    "weight of edge {e} ({}) differs from its image {fe} ({})",
                    a.edge(e),
                    a.edge(fe)
                )));
            }
            _ => {}
        }
    }
    None
}

/// Verifies clauses (a)-(d) of the reflection-symmetry assumption.
pub fn check_assumption(
    graph: &FiniteGraph,
    a: &InitialWeights,
    v0: usize,
    v1: usize,
    e0: usize,
    f: &Automorphism,
    phi: &EdgePotential,
) -> AssumptionReport {
    let mut report = AssumptionReport::default();
    let n = graph.n_vertices();
    if v0 >= n || v1 >= n || e0 >= graph.n_edges() {
        report
            .violations
            .push(Violation::Shape("v0, v1, or e0 is out of range".into()));
        return report;
    }
    if a.values().len() != graph.n_edges() || phi.values().len() != graph.n_edges() {
        report
            .violations
            .push(Violation::Shape("weights or potential have the wrong length".into()));
        return report;
    }
    if v0 == v1 || graph.is_adjacent(v0, v1) {
        report.violations.push(Violation::NotSeparated { v0, v1 });
    }
    if !graph.contains_vertex(e0, v0) {
        report.violations.push(Violation::ReferenceEdge { e0, v0 });
    }
    if let Some(v) = check_automorphism(graph, a, v0, v1, f) {
        report.violations.push(v);
    }
    for &e in graph.incident(v0) {
        if phi.value(e) != 0.0 {
            report.violations.push(Violation::Potential {
                edge: e,
                value: phi.value(e),
                expected: 0.0,
            });
        }
    }
    for &e in graph.incident(v1) {
        if phi.value(e) != 1.0 {
            report.violations.push(Violation::Potential {
                edge: e,
                value: phi.value(e),
                expected: 1.0,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn connected_graph_classes() {
        let counts: Vec<usize> = (1..=5).map(|n| connected_graphs(n).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 6, 21]);
        assert!(connected_graphs(7).is_err());
    }

    fn square_instance() -> (FiniteGraph, InitialWeights, Automorphism, EdgePotential) {
        // 0 -e0- 1 -e1- 2 -e2- 3 -e3- 0 with v0 = 0, v1 = 2.
        let g = FiniteGraph::cycle(4).unwrap();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        let f = Automorphism(vec![2, 1, 0, 3]);
        let phi = EdgePotential::new(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        (g, a, f, phi)
    }

    #[test]
    fn rejects_malformed_graphs() {
        assert!(matches!(FiniteGraph::new(2, vec![(0, 0)]), Err(Error::InvalidGraph(_))));
        assert!(matches!(
            FiniteGraph::new(2, vec![(0, 1), (1, 0)]),
            Err(Error::InvalidGraph(_))
        ));
        assert!(matches!(FiniteGraph::new(2, vec![(0, 2)]), Err(Error::InvalidGraph(_))));
        assert_eq!(FiniteGraph::new(3, vec![(0, 1)]), Err(Error::Disconnected));
    }

    #[test]
    fn adjacency_is_consistent() {
        let g = FiniteGraph::complete(5).unwrap();
        assert_eq!(g.n_edges(), 10);
        for v in 0..5 {
            assert_eq!(g.degree(v), 4);
            for (e, w) in g.neighbors(v) {
                assert_eq!(g.find_edge(v, w), Some(e));
                assert_eq!(g.find_edge(w, v), Some(e));
            }
        }
    }

    #[test]
    fn vertex_weights_sum_incident_edges() {
        let g = FiniteGraph::path(3).unwrap();
        let a = InitialWeights::new(&g, vec![0.5, 2.0]).unwrap();
        assert_eq!(a.vertex(&g, 0), 0.5);
        assert_eq!(a.vertex(&g, 1), 2.5);
        assert!(InitialWeights::new(&g, vec![0.5, 0.0]).is_err());
        assert!(InitialWeights::new(&g, vec![0.5]).is_err());
    }

    #[test]
    fn symmetric_square_passes() {
        let (g, a, f, phi) = square_instance();
        let report = check_assumption(&g, &a, 0, 2, 0, &f, &phi);
        assert!(report.passed(), "{:?}", report);
        assert!(f.is_involution());
    }

    #[test]
    fn adjacent_targets_fail_clause_a() {
        let (g, a, _, phi) = square_instance();
        let f = Automorphism(vec![1, 0, 3, 2]);
        let report = check_assumption(&g, &a, 0, 1, 0, &f, &phi);
        assert_eq!(report.first().unwrap().clause(), 'a');
    }

    #[test]
    fn reference_edge_away_from_v0_fails_clause_b() {
        let (g, a, f, phi) = square_instance();
        let report = check_assumption(&g, &a, 0, 2, 1, &f, &phi);
        assert_eq!(report.first().unwrap().clause(), 'b');
    }

    #[test]
    fn unequal_weights_fail_clause_c() {
        let (g, _, f, phi) = square_instance();
        let a = InitialWeights::new(&g, vec![1.0, 1.0, 1.0, 1.5]).unwrap();
        let report = check_assumption(&g, &a, 0, 2, 0, &f, &phi);
        assert_eq!(report.first().unwrap().clause(), 'c');
    }

    #[test]
    fn half_potential_at_v1_fails_clause_d() {
        let (g, a, f, _) = square_instance();
        let phi = EdgePotential::new(vec![0.0, 0.5, 1.0, 0.0]).unwrap();
        let report = check_assumption(&g, &a, 0, 2, 0, &f, &phi);
        assert_eq!(report.first().unwrap().clause(), 'd');
        assert!(report.into_result().is_err());
    }
}
