//! Tensor-product quadrature against `ρ_{e0}` in log coordinates, for graphs
//! with at most a handful of edges. Used as the exact oracle for the
//! sampler and the mixture identity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, InitialWeights};
use crate::measure::LogDensity;
use crate::trees::TreeScratch;
use crate::walker::{errw_path_probability, markov_path_log_probability};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    /// Half-width `M` of the cube `[−M, M]^{|E|−1}`.
    pub half_width: f64,
    /// Odd number of equispaced nodes per axis.
    pub nodes_per_axis: usize,
    pub rel_tol: f64,
    pub max_dim: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            half_width: 50.0,
            nodes_per_axis: 201,
            rel_tol: 1e-8,
            max_dim: 4,
        }
    }
}

impl QuadratureSettings {
    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.nodes_per_axis - 1) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.nodes_per_axis < 5 || self.nodes_per_axis % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "nodes per axis must be odd and at least 5, got {}",
                self.nodes_per_axis
            )));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::InvalidParameter("half width must be positive".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("relative tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Integrals `∫ f_j e^{log density} dρ_{e0}`, all stored relative to
/// `exp(log_scale)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub log_scale: f64,
    pub integrals: Vec<f64>,
    pub abs_integrals: Vec<f64>,
    /// `|T_h − T_{2h}|`, the difference to the rule on every other node.
    pub coarse_difference: Vec<f64>,
    /// Error of the fine rule. The rule converges geometrically in `1/h`,
    /// so halving the step squares the relative error: this is
    /// `|I| (|T_h − T_{2h}|/|I|)²`, floored at accumulated round-off.
    pub discretization_error: Vec<f64>,
    /// Estimated mass outside the cube.
    pub truncation_error: Vec<f64>,
    pub dim: usize,
    pub n_nodes: u64,
}

impl QuadratureResult {
    pub fn error(&self, j: usize) -> f64 {
        self.discretization_error[j] + self.truncation_error[j]
    }

    pub fn log_integral(&self, j: usize) -> f64 {
        self.log_scale + self.integrals[j].ln()
    }

    /// `I_j / I_0` with a first-order error bound; integrand 0 is
    /// expected to be the constant 1.
    pub fn expectation(&self, j: usize) -> (f64, f64) {
        let z = self.integrals[0];
        let v = self.integrals[j] / z;
        let err = (self.error(j) + v.abs() * self.error(0)) / z;
        (v, err)
    }
}

#[derive(Clone)]
struct Partial {
    sum: Vec<f64>,
    abs: Vec<f64>,
    coarse: Vec<f64>,
    // [integrand][axis][side][offset from the face]
    face: Vec<f64>,
}

impl Partial {
    fn zero(k: usize, d: usize) -> Self {
        Partial {
            sum: vec![0.0; k],
            abs: vec![0.0; k],
            coarse: vec![0.0; k],
            face: vec![0.0; k * d * 4],
        }
    }

    fn add(&mut self, o: &Partial) {
        for (s, t) in [
            (&mut self.sum, &o.sum),
            (&mut self.abs, &o.abs),
            (&mut self.coarse, &o.coarse),
            (&mut self.face, &o.face),
        ] {
            s.iter_mut().zip(t).for_each(|(a, b)| *a += b);
        }
    }
}

/// Integrates `n_integrands` functions of the full log-weight vector
/// (`y[e0] = 0`) against the density on `Ω_{e0}`.
///
/// The trapezoid rule is applied on an equispaced grid; the integrands are
/// analytic in a strip around the real axis, so its error decays
/// geometrically in `1/h`. Slices along the outermost axis run in parallel
/// and are summed in index order.
pub fn quadrature_integrate<F>(
    graph: &FiniteGraph,
    density: &LogDensity,
    e0: usize,
    n_integrands: usize,
    integrand: F,
    settings: &QuadratureSettings,
) -> Result<QuadratureResult>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    settings.validate()?;
    graph.check_edge(e0)?;
    let ne = graph.n_edges();
    let d = ne - 1;
    if d > settings.max_dim {
        return Err(Error::Quadrature(format!(
            "dimension {d} exceeds the cap {}",
            settings.max_dim
        )));
    }
    let free: Vec<usize> = (0..ne).filter(|&e| e != e0).collect();
    let k = n_integrands;
    let mut scratch = TreeScratch::default();
    let zero = vec![0.0; ne];
    let log_scale = density.eval(graph, &zero, &mut scratch)?;

    if d == 0 {
        let mut vals = vec![0.0; k];
        integrand(&zero, &mut vals);
        return Ok(QuadratureResult {
            log_scale,
            abs_integrals: vals.iter().map(|v| v.abs()).collect(),
            integrals: vals,
            coarse_difference: vec![0.0; k],
            discretization_error: vec![0.0; k],
            truncation_error: vec![0.0; k],
            dim: 0,
            n_nodes: 1,
        });
    }

    let n = settings.nodes_per_axis;
    let h = settings.step();
    let m = settings.half_width;
    let node = |i: usize| -m + i as f64 * h;

    let slice = |i0: usize| -> Result<Partial> {
        let mut p = Partial::zero(k, d);
        let mut scratch = TreeScratch::default();
        let mut y = vec![0.0; ne];
        let mut idx = vec![0usize; d];
        idx[0] = i0;
        let mut vals = vec![0.0; k];
        loop {
            for (a, &e) in free.iter().enumerate() {
                y[e] = node(idx[a]);
            }
            let w = (density.eval(graph, &y, &mut scratch)? - log_scale).exp();
            integrand(&y, &mut vals);
            let even = idx.iter().all(|i| i % 2 == 0);
            for j in 0..k {
                let v = vals[j] * w;
                p.sum[j] += v;
                p.abs[j] += v.abs();
                if even {
                    p.coarse[j] += v;
                }
                for (a, &i) in idx.iter().enumerate() {
                    let slot = match i {
                        0 => Some(0),
                        1 => Some(1),
                        _ if i == n - 1 => Some(2),
                        _ if i == n - 2 => Some(3),
                        _ => None,
                    };
                    if let Some(s) = slot {
                        p.face[(j * d + a) * 4 + s] += v.abs();
                    }
                }
            }
            // Odometer over the inner axes.
            let mut a = d - 1;
            loop {
                if a == 0 {
                    return Ok(p);
                }
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
                a -= 1;
            }
        }
    };

    let partials: Vec<Partial> = (0..n).into_par_iter().map(slice).collect::<Result<_>>()?;
    let mut total = Partial::zero(k, d);
    for p in &partials {
        total.add(p);
    }

    let vol = h.powi(d as i32);
    let coarse_vol = (2.0 * h).powi(d as i32);
    let face_vol = h.powi(d as i32 - 1);
    let mut result = QuadratureResult {
        log_scale,
        integrals: total.sum.iter().map(|s| s * vol).collect(),
        abs_integrals: total.abs.iter().map(|s| s * vol).collect(),
        coarse_difference: total
            .sum
            .iter()
            .zip(&total.coarse)
            .map(|(s, c)| (s * vol - c * coarse_vol).abs())
            .collect(),
        discretization_error: vec![0.0; k],
        truncation_error: vec![0.0; k],
        dim: d,
        n_nodes: (n as u64).pow(d as u32),
    };
    let roundoff = (result.n_nodes as f64).sqrt() * f64::EPSILON;
    for j in 0..k {
        let abs = result.abs_integrals[j];
        let diff = result.coarse_difference[j];
        result.discretization_error[j] = if abs > 0.0 {
            (diff * diff / abs).max(roundoff * abs)
        } else {
            0.0
        };
        let mut tail = 0.0;
        for a in 0..d {
            for side in 0..2 {
                let f0 = total.face[(j * d + a) * 4 + 2 * side] * face_vol;
                let f1 = total.face[(j * d + a) * 4 + 2 * side + 1] * face_vol;
                if f0 == 0.0 {
                    continue;
                }
                tail += if f1 > f0 {
                    f0 / ((f1 / f0).ln() / h)
                } else {
                    f64::INFINITY
                };
            }
        }
        result.truncation_error[j] = tail;
        if !(tail <= settings.rel_tol * result.abs_integrals[j]) {
            return Err(Error::Quadrature(format!(
                "truncation bound {tail:.3e} for integrand {j} exceeds {:.1e} of its mass {:.3e}",
                settings.rel_tol, result.abs_integrals[j]
            )));
        }
    }
    Ok(result)
}

/// `E[f_j]` under the normalized density for each integrand, with error
/// bounds.
pub fn quadrature_expectations<F>(
    graph: &FiniteGraph,
    density: &LogDensity,
    e0: usize,
    n_integrands: usize,
    integrand: F,
    settings: &QuadratureSettings,
) -> Result<Vec<(f64, f64)>>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let res = quadrature_integrate(
        graph,
        density,
        e0,
        n_integrands + 1,
        |y, out| {
            out[0] = 1.0;
            integrand(y, &mut out[1..]);
        },
        settings,
    )?;
    Ok((1..=n_integrands).map(|j| res.expectation(j)).collect())
}

/// Log normalizing constant `log ∫ e^{log density} dρ_{e0}` and its
/// relative error bound.
pub fn log_normalizer(
    graph: &FiniteGraph,
    density: &LogDensity,
    e0: usize,
    settings: &QuadratureSettings,
) -> Result<(f64, f64)> {
    let res = quadrature_integrate(graph, density, e0, 1, |_, out| out[0] = 1.0, settings)?;
    Ok((res.log_integral(0), res.error(0) / res.integrals[0]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureCheck {
    pub path: Vec<usize>,
    /// Reinforced walk path probability.
    pub lhs: f64,
    /// Mixture over the environment of the Markov path probability.
    pub rhs: f64,
    pub abs_diff: f64,
    pub quadrature_error: f64,
}

/// Both sides of the mixture identity for several paths from `v0`, sharing
/// one quadrature pass.
pub fn mixture_check_paths(
    graph: &FiniteGraph,
    a: &InitialWeights,
    v0: usize,
    e0: usize,
    paths: &[Vec<usize>],
    settings: &QuadratureSettings,
) -> Result<Vec<MixtureCheck>> {
    let lhs: Vec<f64> = paths
        .iter()
        .map(|p| errw_path_probability(graph, a, v0, p))
        .collect::<Result<_>>()?;
    let density = LogDensity::q(graph, a, v0)?;
    let rhs = quadrature_expectations(
        graph,
        &density,
        e0,
        paths.len(),
        |y, out| {
            for (o, p) in out.iter_mut().zip(paths) {
                *o = markov_path_log_probability(graph, y, p).exp();
            }
        },
        settings,
    )?;
    Ok(paths
        .iter()
        .zip(lhs)
        .zip(rhs)
        .map(|((p, l), (r, err))| MixtureCheck {
            path: p.clone(),
            lhs: l,
            rhs: r,
            abs_diff: (l - r).abs(),
            quadrature_error: err,
        })
        .collect())
}

pub fn mixture_check(
    graph: &FiniteGraph,
    a: &InitialWeights,
    v0: usize,
    e0: usize,
    path: &[usize],
    settings: &QuadratureSettings,
) -> Result<MixtureCheck> {
    Ok(mixture_check_paths(graph, a, v0, e0, &[path.to_vec()], settings)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walker::paths_from;

    fn triangle() -> (FiniteGraph, InitialWeights) {
        let g = FiniteGraph::triangle();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        (g, a)
    }

    #[test]
    fn normalizer_does_not_depend_on_reference_edge() {
        let (g, a) = triangle();
        let s = QuadratureSettings::default();
        let q = LogDensity::q(&g, &a, 0).unwrap();
        let (z0, err0) = log_normalizer(&g, &q, 0, &s).unwrap();
        let (z2, _) = log_normalizer(&g, &q, 2, &s).unwrap();
        assert!((z0 - z2).abs() < 1e-9, "{z0} {z2}");
        assert!(err0 < 1e-8, "{err0}");
    }

    #[test]
    fn single_edge_graph_is_a_point_mass() {
        let g = FiniteGraph::path(2).unwrap();
        let a = InitialWeights::constant(&g, 0.7).unwrap();
        let q = LogDensity::q(&g, &a, 0).unwrap();
        let r = quadrature_expectations(&g, &q, 0, 1, |_, o| o[0] = 3.0, &Default::default()).unwrap();
        assert_eq!(r[0], (3.0, 0.0));
    }

    #[test]
    fn mixture_on_triangle() {
        let (g, a) = triangle();
        let s = QuadratureSettings::default();
        let c = mixture_check(&g, &a, 0, 0, &[0, 1, 2], &s).unwrap();
        assert!((c.lhs - 1.0 / 6.0).abs() < 1e-15);
        assert!(c.abs_diff < 1e-6, "{c:?}");
        let empty = mixture_check(&g, &a, 0, 0, &[0], &s).unwrap();
        assert_eq!(empty.lhs, 1.0);
        assert!((empty.rhs - 1.0).abs() < 1e-12);
        let two = mixture_check_paths(&g, &a, 0, 1, &paths_from(&g, 0, 2), &s).unwrap();
        let total: f64 = two.iter().map(|c| c.rhs).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn limits_are_enforced() {
        let g = FiniteGraph::complete(4).unwrap();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        let q = LogDensity::q(&g, &a, 0).unwrap();
        let s = QuadratureSettings::default();
        assert!(matches!(log_normalizer(&g, &q, 0, &s), Err(Error::Quadrature(_))));
        let (t, a) = triangle();
        let q = LogDensity::q(&t, &a, 0).unwrap();
        let narrow = QuadratureSettings {
            half_width: 4.0,
            nodes_per_axis: 33,
            ..Default::default()
        };
        assert!(matches!(log_normalizer(&t, &q, 0, &narrow), Err(Error::Quadrature(_))));
        let even = QuadratureSettings {
            nodes_per_axis: 96,
            ..Default::default()
        };
        assert!(log_normalizer(&t, &q, 0, &even).is_err());
    }
}
