//! Environments and the explicit mixing density `Φ_{v0,a}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, InitialWeights};
use crate::trees::{log_sum_exp, log_tree_polynomial, log_tree_polynomial_in, TreeScratch};

/// Strictly positive edge weights, stored as logarithms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    log_w: Vec<f64>,
    /// Edge whose weight is 1 when the environment is normalized.
    pub reference: Option<usize>,
}

impl Environment {
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if let Some((e, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!("weight x_{e} = {w} is not positive")));
        }
        Ok(Environment {
            log_w: weights.iter().map(|w| w.ln()).collect(),
            reference: None,
        })
    }

    pub fn from_log_weights(log_w: Vec<f64>) -> Result<Self> {
        if let Some((e, y)) = log_w.iter().enumerate().find(|(_, y)| !y.is_finite()) {
            return Err(Error::InvalidParameter(format!("log weight y_{e} = {y} is not finite")));
        }
        Ok(Environment { log_w, reference: None })
    }

    /// All weights equal to one, normalized at `e0`.
    pub fn unit(n_edges: usize, e0: usize) -> Self {
        Environment {
            log_w: vec![0.0; n_edges],
            reference: Some(e0),
        }
    }

    pub fn n_edges(&self) -> usize {
        self.log_w.len()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    pub fn weight(&self, e: usize) -> f64 {
        self.log_w[e].exp()
    }

    pub fn log_weight(&self, e: usize) -> f64 {
        self.log_w[e]
    }

    /// `log x_v = log Σ_{e∋v} x_e`.
    pub fn log_vertex(&self, graph: &FiniteGraph, v: usize) -> f64 {
        log_vertex_weight(graph, &self.log_w, v)
    }

    pub fn vertex(&self, graph: &FiniteGraph, v: usize) -> f64 {
        self.log_vertex(graph, v).exp()
    }

    /// Whether `x_{e0} = 1` exactly.
    pub fn is_normalized_at(&self, e0: usize) -> bool {
        self.log_w.get(e0) == Some(&0.0)
    }

    /// `(x_e / x_{e1})_e`, tagged as normalized at `e1`.
    pub fn renormalize(&self, e1: usize) -> Result<Environment> {
        let shift = *self.log_w.get(e1).ok_or(Error::EdgeOutOfRange(e1))?;
        Ok(Environment {
            log_w: self.log_w.iter().map(|y| y - shift).collect(),
            reference: Some(e1),
        })
    }

    /// `(λ x_e)_e`.
    pub fn scaled(&self, lambda: f64) -> Result<Environment> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale {lambda} is not positive")));
        }
        let s = lambda.ln();
        Environment::from_log_weights(self.log_w.iter().map(|y| y + s).collect())
    }

    fn check_len(&self, graph: &FiniteGraph) -> Result<()> {
        if self.log_w.len() != graph.n_edges() {
            return Err(Error::InvalidParameter(format!(
                "environment has {} weights for {} edges",
                self.log_w.len(),
                graph.n_edges()
            )));
        }
        Ok(())
    }
}

pub(crate) fn log_vertex_weight(graph: &FiniteGraph, log_w: &[f64], v: usize) -> f64 {
    let inc = graph.incident(v);
    match inc {
        [e] => log_w[*e],
        [e, f] => {
            let (a, b) = (log_w[*e], log_w[*f]);
            let m = a.max(b);
            m + (-(a - b).abs()).exp().ln_1p()
        }
        _ => {
            let m = inc.iter().map(|&e| log_w[e]).fold(f64::NEG_INFINITY, f64::max);
            m + inc.iter().map(|&e| (log_w[e] - m).exp()).sum::<f64>().ln()
        }
    }
}

/// `log Σ_T Π_{e∈T} x_e`.
pub fn spanning_tree_log_polynomial(graph: &FiniteGraph, x: &Environment) -> Result<f64> {
    x.check_len(graph)?;
    log_tree_polynomial(graph, &x.log_w)
}

/// A log-density of the form `Σ_e a_e log x_e − Σ_v k_v log x_v + ½ log T(x)`.
///
/// Both `Φ_{v0,a}` and the geometric mean `(Φ_{v0,a} Φ_{v1,a})^{1/2}` have
/// this shape and differ only in the vertex exponents `k_v`.
#[derive(Clone, Debug)]
pub struct LogDensity {
    a: Vec<f64>,
    k: Vec<f64>,
}

impl LogDensity {
    /// `log Φ_{v0,a}`: `k_{v0} = a_{v0}/2`, otherwise `(a_v + 1)/2`.
    pub fn q(graph: &FiniteGraph, a: &InitialWeights, v0: usize) -> Result<Self> {
        graph.check_vertex(v0)?;
        let k = (0..graph.n_vertices())
            .map(|v| {
                let av = a.vertex(graph, v);
                if v == v0 {
                    av / 2.0
                } else {
                    (av + 1.0) / 2.0
                }
            })
            .collect();
        Ok(LogDensity {
            a: a.values().to_vec(),
            k,
        })
    }

    /// `½(log Φ_{v0,a} + log Φ_{v1,a})`.
    pub fn p(graph: &FiniteGraph, a: &InitialWeights, v0: usize, v1: usize) -> Result<Self> {
        let q0 = Self::q(graph, a, v0)?;
        let q1 = Self::q(graph, a, v1)?;
        let k = q0.k.iter().zip(&q1.k).map(|(s, t)| 0.5 * (s + t)).collect();
        Ok(LogDensity { a: q0.a, k })
    }

    pub fn vertex_exponents(&self) -> &[f64] {
        &self.k
    }

    pub fn edge_exponents(&self) -> &[f64] {
        &self.a
    }

    pub fn eval(&self, graph: &FiniteGraph, log_w: &[f64], scratch: &mut TreeScratch) -> Result<f64> {
        let mut s = 0.0;
        for (a, y) in self.a.iter().zip(log_w) {
            s += a * y;
        }
        for (v, k) in self.k.iter().enumerate() {
            s -= k * log_vertex_weight(graph, log_w, v);
        }
        Ok(s + 0.5 * log_tree_polynomial_in(graph, log_w, scratch)?)
    }
}

/// `log Φ_{v0,a}(x)`.
pub fn log_phi(graph: &FiniteGraph, a: &InitialWeights, v0: usize, x: &Environment) -> Result<f64> {
    x.check_len(graph)?;
    LogDensity::q(graph, a, v0)?.eval(graph, &x.log_w, &mut TreeScratch::default())
}

/// Unnormalized log-density of `Q_{v0,e0}` against `ρ_{e0}`.
pub fn log_density_q(graph: &FiniteGraph, a: &InitialWeights, v0: usize, e0: usize, x: &Environment) -> Result<f64> {
    graph.check_edge(e0)?;
    if !x.is_normalized_at(e0) {
        return Err(Error::NotNormalized(e0));
    }
    log_phi(graph, a, v0, x)
}

/// Unnormalized log-density of the interpolated measure `P_{v0,v1,e0}`.
pub fn log_density_p(
    graph: &FiniteGraph,
    a: &InitialWeights,
    v0: usize,
    v1: usize,
    e0: usize,
    x: &Environment,
) -> Result<f64> {
    graph.check_edge(e0)?;
    if !x.is_normalized_at(e0) {
        return Err(Error::NotNormalized(e0));
    }
    x.check_len(graph)?;
    LogDensity::p(graph, a, v0, v1)?.eval(graph, &x.log_w, &mut TreeScratch::default())
}

/// `log Σ_i exp(t_i)`.
pub fn logsumexp(terms: &[f64]) -> f64 {
    log_sum_exp(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tree_polynomial_examples() {
        let tri = FiniteGraph::triangle();
        let x = Environment::from_weights(&[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(
            spanning_tree_log_polynomial(&tri, &x).unwrap(),
            11f64.ln(),
            epsilon = 1e-14
        );
        let sq = FiniteGraph::cycle(4).unwrap();
        let one = Environment::unit(4, 0);
        assert_relative_eq!(
            spanning_tree_log_polynomial(&sq, &one).unwrap(),
            4f64.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn square_log_phi_by_hand() {
        // a ≡ 1, x ≡ 1: x_v = 2, a_v = 2, T = 4.
        let g = FiniteGraph::cycle(4).unwrap();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        let got = log_phi(&g, &a, 0, &Environment::unit(4, 0)).unwrap();
        let want = -1.0 * 2f64.ln() - 3.0 * 1.5 * 2f64.ln() + 0.5 * 4f64.ln();
        assert_relative_eq!(got, want, epsilon = 1e-14);
    }

    #[test]
    fn scaling_and_renormalization_leave_phi_unchanged() {
        let g = FiniteGraph::complete(4).unwrap();
        let a = InitialWeights::new(&g, vec![0.5, 1.0, 1.5, 2.0, 0.25, 1.0]).unwrap();
        let x = Environment::from_weights(&[0.3, 2.0, 1.1, 7.0, 0.01, 4.0]).unwrap();
        let base = log_phi(&g, &a, 2, &x).unwrap();
        for lambda in [7.3, 1e-3, 1e3] {
            let scaled = log_phi(&g, &a, 2, &x.scaled(lambda).unwrap()).unwrap();
            assert!((scaled - base).abs() < 1e-12);
        }
        let y = x.renormalize(3).unwrap();
        assert!(y.is_normalized_at(3));
        assert_relative_eq!(log_phi(&g, &a, 2, &y).unwrap(), base, epsilon = 1e-12);
        let back = y.renormalize(0).unwrap();
        for e in 0..6 {
            assert_relative_eq!(back.weight(e), x.weight(e) / x.weight(0), max_relative = 1e-14);
        }
        assert_eq!(
            x.renormalize(0).unwrap().renormalize(0).unwrap(),
            x.renormalize(0).unwrap()
        );
    }

    #[test]
    fn q_density_requires_normalization() {
        let g = FiniteGraph::triangle();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        let x = Environment::from_weights(&[2.0, 1.0, 1.0]).unwrap();
        assert_eq!(log_density_q(&g, &a, 0, 0, &x), Err(Error::NotNormalized(0)));
        let y = x.renormalize(0).unwrap();
        assert_eq!(
            log_density_q(&g, &a, 0, 0, &y).unwrap(),
            log_phi(&g, &a, 0, &y).unwrap()
        );
    }

    #[test]
    fn interpolated_density_offset_is_constant() {
        let g = FiniteGraph::cycle(5).unwrap();
        let a = InitialWeights::new(&g, vec![1.0, 0.5, 2.0, 1.5, 0.7]).unwrap();
        let (v0, v1) = (0, 2);
        let offset = |w: &[f64]| {
            let x = Environment::from_weights(w).unwrap().renormalize(0).unwrap();
            let p = log_density_p(&g, &a, v0, v1, 0, &x).unwrap();
            let q = log_density_q(&g, &a, v0, 0, &x).unwrap();
            p - q - 0.25 * (x.log_vertex(&g, v1) - x.log_vertex(&g, v0))
        };
        let c0 = offset(&[1.0, 1.0, 1.0, 1.0, 1.0]);
        let c1 = offset(&[0.2, 5.0, 3.0, 0.1, 9.0]);
        assert_relative_eq!(c0, c1, epsilon = 1e-12);
        let x = Environment::from_weights(&[1.0, 4.0, 3.0, 0.1, 9.0]).unwrap();
        let p01 = log_density_p(&g, &a, v0, v1, 0, &x).unwrap();
        let p10 = log_density_p(&g, &a, v1, v0, 0, &x).unwrap();
        assert_relative_eq!(p01, p10, epsilon = 1e-13);
    }
}
