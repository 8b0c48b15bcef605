//! Graph files, oracle fixtures and CSV formatting.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{check_assumption, AssumptionReport, Automorphism, FiniteGraph, InitialWeights};
use crate::potential::EdgePotential;

/// On-disk description of an instance: vertices, edges, per-edge initial
/// weights and the optional marked data of the symmetry assumption.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub automorphism: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e0: Option<usize>,
}

/// A validated [`GraphFile`].
#[derive(Clone, Debug)]
pub struct Instance {
    pub graph: FiniteGraph,
    pub a: InitialWeights,
    pub phi: Option<EdgePotential>,
    pub automorphism: Option<Automorphism>,
    pub v0: Option<usize>,
    pub v1: Option<usize>,
    pub e0: Option<usize>,
}

impl GraphFile {
    pub fn from_parts(graph: &FiniteGraph, a: &InitialWeights) -> Self {
        GraphFile {
            vertices: (0..graph.n_vertices()).map(|v| graph.label(v).to_string()).collect(),
            edges: graph.edges().to_vec(),
            a: a.values().to_vec(),
            phi: None,
            automorphism: None,
            v0: None,
            v1: None,
            e0: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn instance(&self) -> Result<Instance> {
        let graph = FiniteGraph::with_labels(self.vertices.clone(), self.edges.clone())?;
        let a = InitialWeights::new(&graph, self.a.clone())?;
        let phi = match &self.phi {
            Some(p) if p.len() != graph.n_edges() => {
                return Err(Error::InvalidGraph(format!(
                    "phi has {} entries for {} edges",
                    p.len(),
                    graph.n_edges()
                )))
            }
            Some(p) => Some(EdgePotential::new(p.clone())?),
            None => None,
        };
        if let Some(v) = self.v0.iter().chain(&self.v1).find(|&&v| v >= graph.n_vertices()) {
            return Err(Error::VertexOutOfRange(*v));
        }
        if let Some(e) = self.e0.filter(|&e| e >= graph.n_edges()) {
            return Err(Error::EdgeOutOfRange(e));
        }
        Ok(Instance {
            graph,
            a,
            phi,
            automorphism: self.automorphism.clone().map(Automorphism),
            v0: self.v0,
            v1: self.v1,
            e0: self.e0,
        })
    }
}

impl Instance {
    /// Checks the symmetry assumption when all of its data is present.
    pub fn assumption(&self) -> Option<AssumptionReport> {
        Some(check_assumption(
            &self.graph,
            &self.a,
            self.v0?,
            self.v1?,
            self.e0?,
            self.automorphism.as_ref()?,
            self.phi.as_ref()?,
        ))
    }
}

/// SHA-256 over the vertex count, edge list and initial weights.
pub fn graph_hash(graph: &FiniteGraph, a: &InitialWeights) -> String {
    let mut h = Sha256::new();
    h.update((graph.n_vertices() as u64).to_le_bytes());
    for &(u, v) in graph.edges() {
        h.update((u as u64).to_le_bytes());
        h.update((v as u64).to_le_bytes());
    }
    for w in a.values() {
        h.update(w.to_bits().to_le_bytes());
    }
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// An archived oracle value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub graph_hash: String,
    pub quantity: String,
    pub value: f64,
    pub error: f64,
}

pub fn save_fixtures(path: &Path, fixtures: &[Fixture]) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(fixtures)? + "\n")?;
    Ok(())
}

pub fn load_fixtures(path: &Path) -> Result<Vec<Fixture>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Finds the fixture for `(graph_hash, quantity)`.
pub fn find_fixture<'a>(fixtures: &'a [Fixture], graph_hash: &str, quantity: &str) -> Result<&'a Fixture> {
    fixtures
        .iter()
        .find(|f| f.graph_hash == graph_hash && f.quantity == quantity)
        .ok_or_else(|| Error::Precondition(format!("no fixture for {quantity} on graph {graph_hash}")))
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV document with a header row; cells are written verbatim.
pub fn csv<S: AsRef<str>>(header: &[&str], rows: impl IntoIterator<Item = Vec<S>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<&str> = row.iter().map(|c| c.as_ref()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_file_round_trip() {
        let g = FiniteGraph::cycle(4).unwrap();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        let mut f = GraphFile::from_parts(&g, &a);
        f.phi = Some(vec![0.0, 1.0, 1.0, 0.0]);
        f.automorphism = Some(vec![2, 1, 0, 3]);
        f.v0 = Some(0);
        f.v1 = Some(2);
        f.e0 = Some(0);
        let text = serde_json::to_string(&f).unwrap();
        let back: GraphFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
        assert!(back.instance().unwrap().assumption().unwrap().passed());
        f.v1 = Some(9);
        assert!(matches!(f.instance(), Err(Error::VertexOutOfRange(9))));
    }

    #[test]
    fn hash_depends_on_weights() {
        let g = FiniteGraph::triangle();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        let b = InitialWeights::constant(&g, 2.0).unwrap();
        assert_eq!(graph_hash(&g, &a).len(), 64);
        assert_ne!(graph_hash(&g, &a), graph_hash(&g, &b));
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, std::f64::consts::PI] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
