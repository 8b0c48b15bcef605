//! The deformation `x_e ↦ e^{γφ(e)} x_e` of the interpolated measure, the
//! log Radon–Nikodym derivative `f_γ` it induces, and its γ-derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, InitialWeights};
use crate::measure::{log_vertex_weight, Environment};
use crate::potential::EdgePotential;
use crate::trees::{
    for_each_spanning_tree, log_sum_exp, log_tree_polynomial, log_tree_polynomial_in, LaplacianFactor, TreeScratch,
    ENUMERATION_MAX_VERTICES,
};

pub use crate::potential::{moment_bound, optimal_gamma};

/// `H = ¼ log(x_{v1}/x_{v0})`.
pub fn h(graph: &FiniteGraph, x: &Environment, v0: usize, v1: usize) -> f64 {
    h_log(graph, x.log_weights(), v0, v1)
}

pub(crate) fn h_log(graph: &FiniteGraph, log_w: &[f64], v0: usize, v1: usize) -> f64 {
    0.25 * (log_vertex_weight(graph, log_w, v1) - log_vertex_weight(graph, log_w, v0))
}

/// Everything the deformation needs: the graph, initial weights, the two
/// marked vertices, the reference edge, the potential, and γ.
#[derive(Clone, Debug)]
pub struct DeformationContext<'a> {
    pub graph: &'a FiniteGraph,
    pub a: &'a InitialWeights,
    pub v0: usize,
    pub v1: usize,
    pub e0: usize,
    pub phi: &'a EdgePotential,
    pub gamma: f64,
    vertex_a: Vec<f64>,
}

impl<'a> DeformationContext<'a> {
    /// Checks shapes, `v0 ∈ e0` and `φ(e0) = 0`; the symmetry assumption
    /// itself is checked separately with [`crate::graph::check_assumption`].
    pub fn new(
        graph: &'a FiniteGraph,
        a: &'a InitialWeights,
        v0: usize,
        v1: usize,
        e0: usize,
        phi: &'a EdgePotential,
        gamma: f64,
    ) -> Result<Self> {
        graph.check_vertex(v0)?;
        graph.check_vertex(v1)?;
        graph.check_edge(e0)?;
        if phi.len() != graph.n_edges() || a.values().len() != graph.n_edges() {
            return Err(Error::InvalidParameter(
                "potential or weights have the wrong length".into(),
            ));
        }
        if !graph.contains_vertex(e0, v0) {
            return Err(Error::Precondition(format!(
                "reference edge {e0} does not contain v0 = {v0}"
            )));
        }
        if phi.value(e0) != 0.0 {
            return Err(Error::Precondition(format!("phi(e0) = {} must vanish", phi.value(e0))));
        }
        if !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} is not finite")));
        }
        let vertex_a = (0..graph.n_vertices()).map(|v| a.vertex(graph, v)).collect();
        Ok(DeformationContext {
            graph,
            a,
            v0,
            v1,
            e0,
            phi,
            gamma,
            vertex_a,
        })
    }

    /// The same context at another γ.
    pub fn at(&self, gamma: f64) -> Self {
        DeformationContext { gamma, ..self.clone() }
    }

    fn deformed_log_weights_into(&self, log_w: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(log_w.iter().zip(self.phi.values()).map(|(y, p)| y + self.gamma * p));
    }

    /// `Ξ^{(γφ)}(x) = (e^{γφ(e)} x_e)_e`.
    pub fn deform(&self, x: &Environment) -> Result<Environment> {
        let mut out = Vec::new();
        self.deformed_log_weights_into(x.log_weights(), &mut out);
        let mut y = Environment::from_log_weights(out)?;
        y.reference = x.reference;
        Ok(y)
    }

    /// `x_v^{(γφ)} = Σ_{e∋v} e^{γφ(e)} x_e`.
    pub fn deformed_vertex_weight(&self, x: &Environment, v: usize) -> f64 {
        self.deform(x).map(|y| y.vertex(self.graph, v)).unwrap_or(f64::NAN)
    }

    /// `f_γ(x)`, the log-density of the deformed measure against the
    /// interpolated one, evaluated at `Ξ(x)`.
    pub fn log_f_gamma(&self, x: &Environment) -> Result<f64> {
        let mut ws = FWorkspace::default();
        self.log_f_gamma_with(x.log_weights(), &mut ws)
    }

    /// [`Self::log_f_gamma`] on raw log weights with reusable buffers.
    pub fn log_f_gamma_with(&self, log_w: &[f64], ws: &mut FWorkspace) -> Result<f64> {
        let g = self.gamma;
        let (v0, v1) = (self.v0, self.v1);
        let mut linear = self.vertex_a[v1] / 2.0 + 0.25;
        for (p, a) in self.phi.values().iter().zip(self.a.values()) {
            linear -= p * a;
        }
        let mut deformed = std::mem::take(&mut ws.deformed);
        self.deformed_log_weights_into(log_w, &mut deformed);
        let mut vertices = 0.0;
        for v in 0..self.graph.n_vertices() {
            if v == v0 || v == v1 {
                continue;
            }
            let diff = log_vertex_weight(self.graph, &deformed, v) - log_vertex_weight(self.graph, log_w, v);
            vertices += (self.vertex_a[v] + 1.0) / 2.0 * diff;
        }
        let t_def = log_tree_polynomial_in(self.graph, &deformed, &mut ws.trees)?;
        let t = log_tree_polynomial_in(self.graph, log_w, &mut ws.trees)?;
        ws.deformed = deformed;
        Ok(g * linear + vertices - 0.5 * (t_def - t))
    }

    /// `(∂f_γ/∂γ, ∂²f_γ/∂γ²)` at `x`.
    pub fn f_gamma_derivatives(&self, x: &Environment) -> Result<(f64, f64)> {
        self.f_gamma_derivatives_with(x.log_weights(), TreeRoute::Laplacian)
    }

    pub fn f_gamma_derivatives_with(&self, log_w: &[f64], route: TreeRoute) -> Result<(f64, f64)> {
        let (v0, v1) = (self.v0, self.v1);
        let mut d1 = self.vertex_a[v1] / 2.0 + 0.25;
        for (p, a) in self.phi.values().iter().zip(self.a.values()) {
            d1 -= p * a;
        }
        let mut d2 = 0.0;
        let mut deformed = Vec::new();
        self.deformed_log_weights_into(log_w, &mut deformed);
        for v in 0..self.graph.n_vertices() {
            if v == v0 || v == v1 {
                continue;
            }
            let (mean, var) = self.vertex_statistics(&deformed, v);
            let k = (self.vertex_a[v] + 1.0) / 2.0;
            d1 += k * mean;
            d2 += k * var;
        }
        let ts = tree_statistics_log(self.graph, &deformed, self.phi, route)?;
        d1 -= 0.5 * ts.mean;
        d2 -= 0.5 * ts.variance;
        Ok((d1, d2))
    }

    /// Mean and variance of φ under `μ_{x,v,γ}`, given deformed log weights.
    fn vertex_statistics(&self, deformed: &[f64], v: usize) -> (f64, f64) {
        let inc = self.graph.incident(v);
        let lv = log_vertex_weight(self.graph, deformed, v);
        let mut mean = 0.0;
        for &e in inc {
            mean += (deformed[e] - lv).exp() * self.phi.value(e);
        }
        let mut var = 0.0;
        for &e in inc {
            let d = self.phi.value(e) - mean;
            var += (deformed[e] - lv).exp() * d * d;
        }
        (mean, var)
    }

    /// `H(Ξ(x)) = H(x) + γ/4`.
    pub fn h_deformed(&self, log_w: &[f64]) -> f64 {
        let mut deformed = Vec::new();
        self.deformed_log_weights_into(log_w, &mut deformed);
        h_log(self.graph, &deformed, self.v0, self.v1)
    }
}

/// Buffers reused across evaluations of `f_γ`.
#[derive(Clone, Debug, Default)]
pub struct FWorkspace {
    deformed: Vec<f64>,
    trees: TreeScratch,
}

/// Mean and variance of `Δ(T) = Σ_{e∈T} φ(e)` under the tree measure with
/// weights `Π_{e∈T} e^{γφ(e)} x_e`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeStatistics {
    pub mean: f64,
    pub variance: f64,
}

/// How tree statistics are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeRoute {
    /// Sum over all spanning trees (small graphs only).
    Enumeration,
    /// Edge-inclusion probabilities and transfer currents from the inverse
    /// reduced Laplacian.
    Laplacian,
    /// Enumeration when the graph has at most ten vertices and at most
    /// [`AUTO_ENUMERATION_MAX_TREES`] spanning trees, otherwise Laplacian.
    Auto,
}

pub const AUTO_ENUMERATION_MAX_TREES: f64 = 100_000.0;

pub fn tree_statistics(
    graph: &FiniteGraph,
    x: &Environment,
    phi: &EdgePotential,
    gamma: f64,
    route: TreeRoute,
) -> Result<TreeStatistics> {
    let deformed: Vec<f64> = x
        .log_weights()
        .iter()
        .zip(phi.values())
        .map(|(y, p)| y + gamma * p)
        .collect();
    tree_statistics_log(graph, &deformed, phi, route)
}

fn tree_statistics_log(
    graph: &FiniteGraph,
    log_w: &[f64],
    phi: &EdgePotential,
    route: TreeRoute,
) -> Result<TreeStatistics> {
    let route = match route {
        TreeRoute::Auto => {
            let zeros = vec![0.0; graph.n_edges()];
            let small = graph.n_vertices() <= ENUMERATION_MAX_VERTICES
                && log_tree_polynomial(graph, &zeros)? <= AUTO_ENUMERATION_MAX_TREES.ln();
            if small {
                TreeRoute::Enumeration
            } else {
                TreeRoute::Laplacian
            }
        }
        r => r,
    };
    match route {
        TreeRoute::Enumeration => {
            let mut logs = Vec::new();
            let mut deltas = Vec::new();
            for_each_spanning_tree(graph, |t| {
                logs.push(t.iter().map(|&e| log_w[e]).sum::<f64>());
                deltas.push(t.iter().map(|&e| phi.value(e)).sum::<f64>());
            })?;
            let z = log_sum_exp(&logs);
            let probs: Vec<f64> = logs.iter().map(|l| (l - z).exp()).collect();
            let mean: f64 = probs.iter().zip(&deltas).map(|(p, d)| p * d).sum();
            let variance: f64 = probs
                .iter()
                .zip(&deltas)
                .map(|(p, d)| p * (d - mean) * (d - mean))
                .sum();
            Ok(TreeStatistics { mean, variance })
        }
        _ => {
            let f = LaplacianFactor::new(graph, log_w, 0)?;
            let k = f.transfer_matrix_scaled(graph);
            let ne = graph.n_edges();
            let w: Vec<f64> = log_w.iter().map(|y| (y - f.log_scale()).exp()).collect();
            let mut mean = 0.0;
            let mut var = 0.0;
            for e in 0..ne {
                let pe = w[e] * k[e * ne + e];
                mean += phi.value(e) * pe;
                var += phi.value(e) * phi.value(e) * pe;
            }
            for e in 0..ne {
                for g in 0..ne {
                    let c = w[e] * w[g] * k[e * ne + g] * k[e * ne + g];
                    var -= phi.value(e) * phi.value(g) * c;
                }
            }
            Ok(TreeStatistics {
                mean,
                variance: var.max(0.0),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square() -> (FiniteGraph, InitialWeights, EdgePotential) {
        let g = FiniteGraph::cycle(4).unwrap();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        let phi = EdgePotential::new(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        (g, a, phi)
    }

    #[test]
    fn h_examples() {
        let g = FiniteGraph::cycle(4).unwrap();
        let x = Environment::from_log_weights(vec![0.0, 4.0, 4.0, 0.0]).unwrap();
        // x_2 = 2e^4, x_0 = 2.
        assert_relative_eq!(h(&g, &x, 0, 2), 1.0, epsilon = 1e-15);
        assert_relative_eq!(h(&g, &x, 2, 0), -1.0, epsilon = 1e-15);
        assert_eq!(h(&g, &Environment::unit(4, 0), 0, 2), 0.0);
    }

    #[test]
    fn deformation_properties() {
        let (g, a, phi) = square();
        let ctx = DeformationContext::new(&g, &a, 0, 2, 0, &phi, -0.7).unwrap();
        let x = Environment::from_log_weights(vec![0.0, 0.3, -1.2, 2.0]).unwrap();
        let y = ctx.deform(&x).unwrap();
        assert_eq!(y.log_weight(0), 0.0);
        assert_relative_eq!(y.vertex(&g, 2) / x.vertex(&g, 2), (-0.7f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(y.vertex(&g, 0), x.vertex(&g, 0), max_relative = 1e-15);
        let back = ctx.at(0.7).deform(&y).unwrap();
        for e in 0..4 {
            assert!((back.log_weight(e) - x.log_weight(e)).abs() < 1e-14);
        }
        assert_eq!(ctx.at(0.0).deform(&x).unwrap(), x);
        assert_relative_eq!(
            ctx.h_deformed(x.log_weights()),
            h(&g, &x, 0, 2) - 0.7 / 4.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn f_gamma_vanishes_at_zero() {
        let (g, a, phi) = square();
        let ctx = DeformationContext::new(&g, &a, 0, 2, 0, &phi, 0.0).unwrap();
        for lw in [[0.0, 0.1, 0.2, 0.3], [0.0, -5.0, 7.0, 1.0]] {
            let x = Environment::from_log_weights(lw.to_vec()).unwrap();
            assert_eq!(ctx.log_f_gamma(&x).unwrap(), 0.0);
        }
    }

    #[test]
    fn f_gamma_square_by_hand() {
        // x ≡ 1, γ = 1, φ = (0, 1, 1, 0) around the square, v0 = 0, v1 = 2.
        let (g, a, phi) = square();
        let ctx = DeformationContext::new(&g, &a, 0, 2, 0, &phi, 1.0).unwrap();
        let x = Environment::unit(4, 0);
        let e = 1f64.exp();
        let linear = (2.0 / 2.0 + 0.25) - 2.0;
        // Vertices 1 and 3 each see one edge with φ = 1 and one with φ = 0.
        let vertices = 2.0 * 1.5 * ((1.0 + e) / 2.0).ln();
        // Trees drop one edge: weights e, e, e², e² against 4.
        let trees = -0.5 * ((2.0 * e + 2.0 * e * e) / 4.0).ln();
        assert_relative_eq!(ctx.log_f_gamma(&x).unwrap(), linear + vertices + trees, epsilon = 1e-14);
    }

    #[test]
    fn triangle_tree_statistics() {
        let g = FiniteGraph::triangle();
        let x = Environment::unit(3, 0);
        let phi = EdgePotential::new(vec![0.0, 1.0, 1.0]).unwrap();
        for route in [TreeRoute::Enumeration, TreeRoute::Laplacian, TreeRoute::Auto] {
            let ts = tree_statistics(&g, &x, &phi, 0.0, route).unwrap();
            assert_relative_eq!(ts.mean, 4.0 / 3.0, epsilon = 1e-14);
            assert_relative_eq!(ts.variance, 2.0 / 9.0, epsilon = 1e-14);
        }
        let ones = EdgePotential::constant(3, 1.0).unwrap();
        let ts = tree_statistics(&g, &x, &ones, 0.4, TreeRoute::Laplacian).unwrap();
        assert_relative_eq!(ts.mean, 2.0, epsilon = 1e-14);
        assert!(ts.variance < 1e-14);
    }

    #[test]
    fn zero_potential_derivatives() {
        let g = FiniteGraph::cycle(5).unwrap();
        let a = InitialWeights::constant(&g, 0.8).unwrap();
        let phi = EdgePotential::constant(5, 0.0).unwrap();
        let ctx = DeformationContext::new(&g, &a, 0, 2, 0, &phi, 0.3).unwrap();
        let x = Environment::from_log_weights(vec![0.0, 1.0, -1.0, 0.5, 2.0]).unwrap();
        let (d1, d2) = ctx.f_gamma_derivatives(&x).unwrap();
        assert_relative_eq!(d1, 1.6 / 2.0 + 0.25, epsilon = 1e-14);
        assert_eq!(d2, 0.0);
    }

    #[test]
    fn context_rejects_bad_reference() {
        let (g, a, phi) = square();
        assert!(DeformationContext::new(&g, &a, 0, 2, 1, &phi, 0.0).is_err());
        let bad = EdgePotential::new(vec![0.5, 1.0, 1.0, 0.0]).unwrap();
        assert!(DeformationContext::new(&g, &a, 0, 2, 0, &bad, 0.0).is_err());
    }
}
