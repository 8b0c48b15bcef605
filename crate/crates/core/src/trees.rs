//! Spanning trees: the weighted matrix-tree theorem evaluated by
//! subtraction-free elimination, and brute-force enumeration for small graphs.

use crate::error::{Error, Result};
use crate::graph::FiniteGraph;

/// Vertex cap for explicit enumeration.
pub const ENUMERATION_MAX_VERTICES: usize = 10;

/// Factorization of the weighted Laplacian with one vertex grounded.
///
/// Eliminating a vertex of a resistor network leaves a network (Kron
/// reduction), so every pivot is a sum of positive conductances and no
/// cancellation occurs: the log-determinant is accurate to a few ulps per
/// pivot however badly the weights are scaled.
#[derive(Clone, Debug)]
pub struct LaplacianFactor {
    n: usize,
    root: usize,
    /// Reduced index of every vertex (root maps to `usize::MAX`).
    reduced: Vec<usize>,
    /// Pivots `d_k`.
    pivots: Vec<f64>,
    /// Unit lower-triangular multipliers, row-major `(n-1) x (n-1)`.
    lower: Vec<f64>,
    log_scale: f64,
}

impl LaplacianFactor {
    /// Factors the Laplacian with edge weights `exp(log_weights[e])`,
    /// grounding vertex `root`.
    pub fn new(graph: &FiniteGraph, log_weights: &[f64], root: usize) -> Result<Self> {
        let n = graph.n_vertices();
        graph.check_vertex(root)?;
        debug_assert_eq!(log_weights.len(), graph.n_edges());
        let shift = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        let m = n - 1;
        let mut reduced = vec![usize::MAX; n];
        let mut k = 0;
        for (v, slot) in reduced.iter_mut().enumerate() {
            if v != root {
                *slot = k;
                k += 1;
            }
        }
        // Conductances between reduced vertices and to ground.
        let mut cond = vec![0.0f64; m * m];
        let mut ground = vec![0.0f64; m];
        for (e, &(u, v)) in graph.edges().iter().enumerate() {
            let w = (log_weights[e] - shift).exp();
            match (reduced[u], reduced[v]) {
                (usize::MAX, j) | (j, usize::MAX) => ground[j] += w,
                (i, j) => {
                    cond[i * m + j] += w;
                    cond[j * m + i] += w;
                }
            }
        }
        let mut pivots = Vec::with_capacity(m);
        let mut lower = vec![0.0f64; m * m];
        for k in 0..m {
            let mut d = ground[k];
            for j in k + 1..m {
                d += cond[k * m + j];
            }
            if !(d > 0.0) {
                return Err(Error::Disconnected);
            }
            pivots.push(d);
            lower[k * m + k] = 1.0;
            for i in k + 1..m {
                let cik = cond[i * m + k];
                lower[i * m + k] = -cik / d;
                if cik == 0.0 {
                    continue;
                }
                let t = cik / d;
                ground[i] += t * ground[k];
                for j in k + 1..m {
                    if j != i {
                        cond[i * m + j] += t * cond[k * m + j];
                    }
                }
            }
        }
        Ok(LaplacianFactor {
            n,
            root,
            reduced,
            pivots,
            lower,
            log_scale: shift,
        })
    }

    /// `log Σ_T Π_{e∈T} x_e`.
    pub fn log_tree_polynomial(&self) -> f64 {
        let logdet: f64 = self.pivots.iter().map(|d| d.ln()).sum();
        logdet + (self.n as f64 - 1.0) * self.log_scale
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// The common shift subtracted from every log weight before factoring.
    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Inverse of the reduced Laplacian built from the shifted weights
    /// `exp(log_weights[e] − log_scale)`, row-major.
    pub fn inverse_scaled(&self) -> Vec<f64> {
        let m = self.n - 1;
        let mut inv = vec![0.0f64; m * m];
        let mut y = vec![0.0f64; m];
        for col in 0..m {
            // L y = e_col
            for i in 0..m {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for k in 0..i {
                    s -= self.lower[i * m + k] * y[k];
                }
                y[i] = s;
            }
            for (yi, d) in y.iter_mut().zip(&self.pivots) {
                *yi /= d;
            }
            // Lᵀ z = y
            for i in (0..m).rev() {
                let mut s = y[i];
                for k in i + 1..m {
                    s -= self.lower[k * m + i] * y[k];
                }
                y[i] = s;
            }
            for i in 0..m {
                inv[i * m + col] = y[i];
            }
        }
        inv
    }

    /// Inverse of the reduced Laplacian in the unscaled weights, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let scale = (-self.log_scale).exp();
        self.inverse_scaled().into_iter().map(|v| v * scale).collect()
    }

    fn transfer_from(&self, graph: &FiniteGraph, inv: &[f64]) -> Vec<f64> {
        let m = self.n - 1;
        let g = |a: usize, b: usize| -> f64 {
            let (i, j) = (self.reduced[a], self.reduced[b]);
            if i == usize::MAX || j == usize::MAX {
                0.0
            } else {
                inv[i * m + j]
            }
        };
        let edges = graph.edges();
        let ne = edges.len();
        let mut out = vec![0.0f64; ne * ne];
        for (e, &(u, v)) in edges.iter().enumerate() {
            for (f, &(s, t)) in edges.iter().enumerate().skip(e) {
                let val = g(u, s) - g(u, t) - g(v, s) + g(v, t);
                out[e * ne + f] = val;
                out[f * ne + e] = val;
            }
        }
        out
    }

    /// `b_eᵀ A⁻¹ b_f` for every pair of edges, where `b_e` is the signed
    /// incidence vector with the grounded coordinate removed. Diagonal
    /// entries are effective resistances.
    pub fn transfer_matrix(&self, graph: &FiniteGraph) -> Vec<f64> {
        self.transfer_from(graph, &self.inverse())
    }

    /// [`Self::transfer_matrix`] for the shifted weights.
    pub fn transfer_matrix_scaled(&self, graph: &FiniteGraph) -> Vec<f64> {
        self.transfer_from(graph, &self.inverse_scaled())
    }
}

/// `log Σ_T Π_{e∈T} exp(log_weights[e])` by the matrix-tree theorem.
pub fn log_tree_polynomial(graph: &FiniteGraph, log_weights: &[f64]) -> Result<f64> {
    log_tree_polynomial_in(graph, log_weights, &mut TreeScratch::default())
}

/// Reusable buffers for [`log_tree_polynomial_in`].
#[derive(Clone, Debug, Default)]
pub struct TreeScratch {
    cond: Vec<f64>,
    ground: Vec<f64>,
}

/// Same as [`log_tree_polynomial`] without allocating in the hot path.
/// Vertex 0 is grounded.
pub fn log_tree_polynomial_in(graph: &FiniteGraph, log_weights: &[f64], scratch: &mut TreeScratch) -> Result<f64> {
    let n = graph.n_vertices();
    let m = n - 1;
    let shift = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shift = if shift.is_finite() { shift } else { 0.0 };
    let cond = &mut scratch.cond;
    let ground = &mut scratch.ground;
    cond.clear();
    cond.resize(m * m, 0.0);
    ground.clear();
    ground.resize(m, 0.0);
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        let w = (log_weights[e] - shift).exp();
        match (u, v) {
            (0, j) | (j, 0) => ground[j - 1] += w,
            (i, j) => {
                cond[(i - 1) * m + j - 1] += w;
                cond[(j - 1) * m + i - 1] += w;
            }
        }
    }
    let mut logdet = 0.0;
    for k in 0..m {
        let mut d = ground[k];
        for j in k + 1..m {
            d += cond[k * m + j];
        }
        if !(d > 0.0) {
            return Err(Error::Disconnected);
        }
        logdet += d.ln();
        for i in k + 1..m {
            let cik = cond[i * m + k];
            if cik == 0.0 {
                continue;
            }
            let t = cik / d;
            ground[i] += t * ground[k];
            for j in k + 1..m {
                if j != i {
                    cond[i * m + j] += t * cond[k * m + j];
                }
            }
        }
    }
    Ok(logdet + m as f64 * shift)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&self, mut v: usize) -> usize {
        while self.parent[v] != v {
            v = self.parent[v];
        }
        v
    }
}

/// Calls `visit` with the edge set of every spanning tree, in lexicographic
/// order of edge indices.
///
/// Fails for graphs above [`ENUMERATION_MAX_VERTICES`].
pub fn for_each_spanning_tree(graph: &FiniteGraph, mut visit: impl FnMut(&[usize])) -> Result<()> {
    let n = graph.n_vertices();
    if n > ENUMERATION_MAX_VERTICES {
        return Err(Error::EnumerationLimit(format!(
            "{n} vertices exceeds the enumeration cap of {ENUMERATION_MAX_VERTICES}"
        )));
    }
    let mut chosen = Vec::with_capacity(n.saturating_sub(1));
    let mut uf = UnionFind::new(n);
    recurse(graph, 0, &mut chosen, &mut uf, &mut visit);
    Ok(())
}

fn recurse(
    graph: &FiniteGraph,
    next: usize,
    chosen: &mut Vec<usize>,
    uf: &mut UnionFind,
    visit: &mut impl FnMut(&[usize]),
) {
    let need = graph.n_vertices() - 1 - chosen.len();
    if need == 0 {
        visit(chosen);
        return;
    }
    let m = graph.n_edges();
    if m - next < need {
        return;
    }
    // Include `next` if it joins two components.
    let (u, v) = graph.endpoints(next);
    let (ru, rv) = (uf.find(u), uf.find(v));
    if ru != rv {
        uf.parent[ru] = rv;
        chosen.push(next);
        recurse(graph, next + 1, chosen, uf, visit);
        chosen.pop();
        uf.parent[ru] = ru;
    }
    recurse(graph, next + 1, chosen, uf, visit);
}

/// All spanning trees as sorted edge lists.
pub fn spanning_trees(graph: &FiniteGraph) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for_each_spanning_tree(graph, |t| out.push(t.to_vec()))?;
    Ok(out)
}

/// The tree polynomial in log scale by explicit enumeration.
pub fn log_tree_polynomial_enumerated(graph: &FiniteGraph, log_weights: &[f64]) -> Result<f64> {
    let mut terms = Vec::new();
    for_each_spanning_tree(graph, |t| terms.push(t.iter().map(|&e| log_weights[e]).sum::<f64>()))?;
    if terms.is_empty() {
        return Err(Error::Disconnected);
    }
    Ok(log_sum_exp(&terms))
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn logs(w: &[f64]) -> Vec<f64> {
        w.iter().map(|x| x.ln()).collect()
    }

    #[test]
    fn small_tree_counts() {
        let tri = FiniteGraph::triangle();
        assert_relative_eq!(
            log_tree_polynomial(&tri, &[0.0; 3]).unwrap(),
            3f64.ln(),
            epsilon = 1e-14
        );
        let sq = FiniteGraph::cycle(4).unwrap();
        assert_relative_eq!(log_tree_polynomial(&sq, &[0.0; 4]).unwrap(), 4f64.ln(), epsilon = 1e-14);
        // 1*2 + 1*3 + 2*3
        let t = log_tree_polynomial(&tri, &logs(&[1.0, 2.0, 3.0])).unwrap();
        assert_relative_eq!(t, 11f64.ln(), epsilon = 1e-14);
        // Cayley: n^(n-2)
        let k5 = FiniteGraph::complete(5).unwrap();
        assert_relative_eq!(
            log_tree_polynomial(&k5, &[0.0; 10]).unwrap(),
            125f64.ln(),
            epsilon = 1e-13
        );
        assert_eq!(spanning_trees(&k5).unwrap().len(), 125);
    }

    #[test]
    fn single_vertex_has_the_empty_tree() {
        let g = FiniteGraph::new(1, vec![]).unwrap();
        assert_eq!(log_tree_polynomial(&g, &[]).unwrap(), 0.0);
        assert_eq!(spanning_trees(&g).unwrap(), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn extreme_scales_stay_accurate() {
        // A bridge of weight e^-60 next to a triangle of weight e^40.
        let g = FiniteGraph::new(4, vec![(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let lw = [40.0, 40.0, 40.0, -60.0];
        let a = log_tree_polynomial(&g, &lw).unwrap();
        let b = log_tree_polynomial_enumerated(&g, &lw).unwrap();
        assert_relative_eq!(a, 3f64.ln() + 80.0 - 60.0, epsilon = 1e-12);
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn scratch_route_matches_factor() {
        let g = FiniteGraph::complete(5).unwrap();
        let lw: Vec<f64> = (0..10).map(|k| (k as f64 * 0.37).sin() * 4.0).collect();
        let mut scratch = TreeScratch::default();
        let a = log_tree_polynomial_in(&g, &lw, &mut scratch).unwrap();
        let b = LaplacianFactor::new(&g, &lw, 3).unwrap().log_tree_polynomial();
        assert_relative_eq!(a, b, epsilon = 1e-13);
        let c = log_tree_polynomial_in(&g, &lw, &mut scratch).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn root_choice_does_not_matter() {
        let g = FiniteGraph::complete(4).unwrap();
        let lw = [0.3, -1.2, 2.0, 0.0, 0.7, -0.4];
        let base = LaplacianFactor::new(&g, &lw, 0).unwrap().log_tree_polynomial();
        for root in 1..4 {
            let other = LaplacianFactor::new(&g, &lw, root).unwrap().log_tree_polynomial();
            assert_relative_eq!(base, other, epsilon = 1e-13);
        }
    }

    #[test]
    fn effective_resistance_is_edge_inclusion_probability() {
        let g = FiniteGraph::complete(4).unwrap();
        let lw = [0.3, -1.2, 2.0, 0.0, 0.7, -0.4];
        let f = LaplacianFactor::new(&g, &lw, 2).unwrap();
        let k = f.transfer_matrix(&g);
        let trees = spanning_trees(&g).unwrap();
        let weight = |t: &[usize]| t.iter().map(|&e| lw[e]).sum::<f64>().exp();
        let total: f64 = trees.iter().map(|t| weight(t)).sum();
        for e in 0..6 {
            let p: f64 = trees.iter().filter(|t| t.contains(&e)).map(|t| weight(t)).sum::<f64>() / total;
            assert_relative_eq!(lw[e].exp() * k[e * 6 + e], p, epsilon = 1e-12);
        }
    }
}
