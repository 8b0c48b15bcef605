//! The ten acceptance criteria as runnable checks, shared by the test suite
//! and `errw verify`. Every tolerance is a named constant.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{check_assumption, connected_graphs, Automorphism, FiniteGraph, InitialWeights};
use crate::lattice::{enumerate_r_edges_between_levels, enumerate_shell_crossings};
use crate::measure::{log_phi, log_vertex_weight, Environment, LogDensity};
use crate::potential::{bound_chain, default_c, dirichlet_form, moment_bound, xi_and_l0, EdgePotential};
use crate::quadrature::{mixture_check_paths, quadrature_expectations, QuadratureSettings};
use crate::rng;
use crate::sampler::{estimate_mean, mcmc_sample, quarter_moment, Chain, ChainConfig, Target};
use crate::trees::{log_tree_polynomial, log_tree_polynomial_enumerated};
use crate::variational::{DeformationContext, FWorkspace, TreeRoute};
use crate::walker::{errw_path_probability, errw_step, markov_path_log_probability, paths_from, WalkState};

pub const MATRIX_TREE_RTOL: f64 = 1e-10;
pub const SCALING_ATOL: f64 = 1e-9;
pub const MIXTURE_ATOL: f64 = 1e-6;
pub const SIGMAS: f64 = 3.0;
pub const FD_RTOL: f64 = 1e-6;
pub const FD_ATOL: f64 = 1e-9;
pub const FD_STEP_FIRST: f64 = 1e-5;
pub const FD_STEP_SECOND: f64 = 1e-2;
pub const REVERSIBILITY_RTOL: f64 = 1e-12;
pub const WALKER_SIGMAS: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceConfig {
    pub seed: u64,
    pub weight_vectors_per_graph: usize,
    pub scaling_samples_per_graph: usize,
    pub mcmc_samples: usize,
    pub mcmc_burn_in: usize,
    pub derivative_cases: usize,
    pub reversibility_cases: usize,
    pub walker_replicas: u64,
    pub walker_path_len: usize,
    pub quadrature: QuadratureSettings,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            seed: 20_240_611,
            weight_vectors_per_graph: 50,
            scaling_samples_per_graph: 100,
            mcmc_samples: 100_000,
            mcmc_burn_in: 5_000,
            derivative_cases: 200,
            reversibility_cases: 100,
            walker_replicas: 1_000_000,
            walker_path_len: 4,
            quadrature: QuadratureSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "[PASS]" } else { "[FAIL]" };
        write!(f, "{tag} {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "matrix-tree equals enumeration"),
    (2, "scaling invariance"),
    (3, "mixture identity"),
    (4, "abstract main lemma"),
    (5, "linearity of the deformed H-expectation"),
    (6, "entropy sandwich"),
    (7, "derivative correctness"),
    (8, "reversibility identity"),
    (9, "bound-chain arithmetic"),
    (10, "walker statistics"),
];

/// Runs criterion `id`; an error inside the check is a failure.
pub fn run(id: u8, cfg: &AcceptanceConfig) -> CriterionOutcome {
    let name = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1.to_string())
        .unwrap_or_else(|| format!("unknown criterion {id}"));
    let res = match id {
        1 => matrix_tree(cfg),
        2 => scaling(cfg),
        3 => mixture(cfg),
        4 => main_lemma(cfg),
        5 => linearity(cfg),
        6 => entropy_sandwich(cfg),
        7 => derivatives(cfg),
        8 => reversibility(cfg),
        9 => bound_arithmetic(cfg),
        10 => walker_statistics(cfg),
        _ => Ok((false, "no such criterion".into())),
    };
    let (passed, detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionOutcome {
        id,
        name,
        passed,
        detail,
    }
}

pub fn run_all(cfg: &AcceptanceConfig) -> Vec<CriterionOutcome> {
    CRITERIA.iter().map(|&(id, _)| run(id, cfg)).collect()
}

/// A graph with the marked data of the symmetry assumption.
#[derive(Clone, Debug)]
pub struct SymmetricInstance {
    pub name: &'static str,
    pub graph: FiniteGraph,
    pub a: InitialWeights,
    pub v0: usize,
    pub v1: usize,
    pub e0: usize,
    pub phi: EdgePotential,
    pub automorphism: Automorphism,
}

impl SymmetricInstance {
    /// The `n`-cycle (`n` even) with antipodal `v0 = 0`, `v1 = n/2`,
    /// `e0 = {0, 1}`, and `φ` rising linearly along both arcs from 0 on the
    /// edges at `v0` to 1 on the edges at `v1`.
    pub fn even_cycle(name: &'static str, n: usize, a: f64) -> Result<Self> {
        let graph = FiniteGraph::cycle(n)?;
        let half = n / 2;
        let steps = (half - 1) as f64;
        // Edge k joins k and k + 1.
        let phi = (0..n)
            .map(|k| {
                if k < half {
                    k as f64 / steps
                } else {
                    (n - 1 - k) as f64 / steps
                }
            })
            .collect();
        let automorphism = Automorphism((0..n).map(|v| (half + n - v) % n).collect());
        Ok(SymmetricInstance {
            name,
            a: InitialWeights::constant(&graph, a)?,
            graph,
            v0: 0,
            v1: half,
            e0: 0,
            phi: EdgePotential::new(phi)?,
            automorphism,
        })
    }

    pub fn square() -> Self {
        Self::even_cycle("4-cycle", 4, 1.0).expect("valid instance")
    }

    pub fn hexagon() -> Self {
        Self::even_cycle("6-cycle", 6, 1.0).expect("valid instance")
    }

    /// The 4-cycle with every edge subdivided once.
    pub fn diluted_square() -> Self {
        let mut s = Self::even_cycle("diluted 4-cycle", 8, 1.0).expect("valid instance");
        s.graph = FiniteGraph::diluted_cycle(4, 2).expect("valid graph");
        s
    }

    pub fn s_phi(&self) -> f64 {
        dirichlet_form(&self.graph, &self.a, &self.phi)
    }

    pub fn check(&self) -> Result<()> {
        check_assumption(
            &self.graph,
            &self.a,
            self.v0,
            self.v1,
            self.e0,
            &self.automorphism,
            &self.phi,
        )
        .into_result()
    }

    pub fn context(&self, gamma: f64) -> Result<DeformationContext<'_>> {
        DeformationContext::new(&self.graph, &self.a, self.v0, self.v1, self.e0, &self.phi, gamma)
    }

    pub fn chain(&self, target: Target, cfg: &AcceptanceConfig, stream: u64) -> Result<Chain> {
        let mut c = ChainConfig::new(target, cfg.mcmc_samples, cfg.seed);
        c.burn_in = cfg.mcmc_burn_in;
        c.stream = stream;
        mcmc_sample(&self.graph, &self.a, self.e0, &c)
    }

    /// Quadrature value and error of `E_Q[(x_{v1}/x_{v0})^{1/4}]`.
    pub fn quadrature_quarter_moment(&self, settings: &QuadratureSettings) -> Result<(f64, f64)> {
        let q = LogDensity::q(&self.graph, &self.a, self.v0)?;
        let (g, v0, v1) = (&self.graph, self.v0, self.v1);
        let r = quadrature_expectations(
            g,
            &q,
            self.e0,
            1,
            |y, out| out[0] = (0.25 * (log_vertex_weight(g, y, v1) - log_vertex_weight(g, y, v0))).exp(),
            settings,
        )?;
        Ok(r[0])
    }
}

type Check = Result<(bool, String)>;

fn uniform_log_weights(rng: &mut rng::Rng, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-half_width..=half_width)).collect()
}

fn small_graphs(min_vertices: usize) -> Result<Vec<FiniteGraph>> {
    let mut out = Vec::new();
    for n in min_vertices..=6 {
        out.extend(connected_graphs(n)?);
    }
    Ok(out)
}

fn matrix_tree(cfg: &AcceptanceConfig) -> Check {
    let graphs = small_graphs(1)?;
    let worst = graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| -> Result<f64> {
            let mut rng = rng::stream(cfg.seed, i as u64);
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.weight_vectors_per_graph {
                let lw = uniform_log_weights(&mut rng, g.n_edges(), 5.0);
                let d = log_tree_polynomial(g, &lw)? - log_tree_polynomial_enumerated(g, &lw)?;
                worst = worst.max(d.exp_m1().abs());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((
        worst <= MATRIX_TREE_RTOL,
        format!(
            "{} graphs x {} weight vectors, max relative error {worst:.2e} (tol {MATRIX_TREE_RTOL:.0e})",
            graphs.len(),
            cfg.weight_vectors_per_graph
        ),
    ))
}

fn scaling(cfg: &AcceptanceConfig) -> Check {
    let graphs = small_graphs(2)?;
    let worst = graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| -> Result<f64> {
            let mut rng = rng::stream(cfg.seed, 1000 + i as u64);
            let a = InitialWeights::new(g, (0..g.n_edges()).map(|_| rng.random_range(0.2..5.0)).collect())?;
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.scaling_samples_per_graph {
                let x = Environment::from_log_weights(uniform_log_weights(&mut rng, g.n_edges(), 5.0))?;
                let v0 = rng.random_range(0..g.n_vertices());
                let base = log_phi(g, &a, v0, &x)?;
                for lambda in [1e-3, 1.0, 1e3] {
                    let scaled = log_phi(g, &a, v0, &x.scaled(lambda)?)?;
                    worst = worst.max((scaled - base).abs());
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((
        worst <= SCALING_ATOL,
        format!(
            "{} graphs x {} environments x 3 scales, max |log ratio| {worst:.2e} (tol {SCALING_ATOL:.0e})",
            graphs.len(),
            cfg.scaling_samples_per_graph
        ),
    ))
}

fn mixture(cfg: &AcceptanceConfig) -> Check {
    let mut worst: f64 = 0.0;
    let mut n_paths = 0;
    for g in [FiniteGraph::triangle(), FiniteGraph::path(4)?] {
        let a = InitialWeights::constant(&g, 1.0)?;
        for v0 in 0..g.n_vertices() {
            let paths: Vec<Vec<usize>> = (0..=4).flat_map(|len| paths_from(&g, v0, len)).collect();
            let e0 = g.incident(v0)[0];
            for c in mixture_check_paths(&g, &a, v0, e0, &paths, &cfg.quadrature)? {
                worst = worst.max(c.abs_diff);
                n_paths += 1;
            }
        }
    }
    Ok((
        worst <= MIXTURE_ATOL,
        format!("{n_paths} paths on triangle and 4-path, max |lhs - rhs| {worst:.2e} (tol {MIXTURE_ATOL:.0e})"),
    ))
}

fn main_lemma(cfg: &AcceptanceConfig) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();

    let sq = SymmetricInstance::square();
    sq.check()?;
    let bound = moment_bound(sq.s_phi())?;
    let (quad, quad_err) = sq.quadrature_quarter_moment(&cfg.quadrature)?;
    let chain = sq.chain(Target::Q { v0: sq.v0 }, cfg, 0)?;
    chain.require_healthy()?;
    let mc = quarter_moment(&sq.graph, &chain, sq.v0, sq.v1);
    let sigma = mc.std_error.hypot(quad_err);
    let below = quad + quad_err <= bound;
    let agree = (mc.value - quad).abs() <= SIGMAS * sigma && mc.warnings.is_empty();
    ok &= below && agree;
    parts.push(format!(
        "{}: S={} quad={quad:.8} bound={bound:.8} mcmc={:.6}+-{:.1e} ess={:.0}",
        sq.name,
        sq.s_phi(),
        mc.value,
        mc.std_error,
        mc.ess
    ));

    for inst in [SymmetricInstance::hexagon(), SymmetricInstance::diluted_square()] {
        inst.check()?;
        let bound = moment_bound(inst.s_phi())?;
        let target = Target::Q { v0: inst.v0 };
        let c1 = inst.chain(target, cfg, 0)?;
        let c2 = inst.chain(target, cfg, 1)?;
        c1.require_healthy()?;
        c2.require_healthy()?;
        let m1 = quarter_moment(&inst.graph, &c1, inst.v0, inst.v1);
        let m2 = quarter_moment(&inst.graph, &c2, inst.v0, inst.v1);
        let below = m1.value <= bound + SIGMAS * m1.std_error;
        let agree = (m1.value - m2.value).abs() <= SIGMAS * m1.std_error.hypot(m2.std_error);
        let healthy = m1.warnings.is_empty() && m2.warnings.is_empty();
        ok &= below && agree && healthy;
        parts.push(format!(
            "{}: S={} bound={bound:.6} mcmc={:.6}+-{:.1e} (second chain {:.6})",
            inst.name,
            inst.s_phi(),
            m1.value,
            m1.std_error,
            m2.value
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn linearity(cfg: &AcceptanceConfig) -> Check {
    let mut ok = true;
    let mut worst_z: f64 = 0.0;
    for inst in [SymmetricInstance::square(), SymmetricInstance::hexagon()] {
        inst.check()?;
        let chain = inst.chain(
            Target::P {
                v0: inst.v0,
                v1: inst.v1,
            },
            cfg,
            2,
        )?;
        chain.require_healthy()?;
        for gamma in [-1.0, -0.25, 0.0, 0.5] {
            let ctx = inst.context(gamma)?;
            let est = estimate_mean(&chain.map(|y| ctx.h_deformed(y)));
            let z = (est.value - gamma / 4.0) / est.std_error;
            worst_z = worst_z.max(z.abs());
            ok &= z.abs() <= SIGMAS && est.warnings.is_empty();
        }
    }
    Ok((
        ok,
        format!("4-cycle and 6-cycle, gamma in {{-1, -0.25, 0, 0.5}}, max |z| {worst_z:.2} (tol {SIGMAS})"),
    ))
}

fn entropy_sandwich(cfg: &AcceptanceConfig) -> Check {
    let inst = SymmetricInstance::square();
    inst.check()?;
    let s = inst.s_phi();
    let chain = inst.chain(
        Target::P {
            v0: inst.v0,
            v1: inst.v1,
        },
        cfg,
        3,
    )?;
    chain.require_healthy()?;
    let mut ok = true;
    let mut rows = Vec::new();
    for k in 0..11 {
        let gamma = (k as f64 - 5.0) * 0.4;
        let ctx = inst.context(gamma)?;
        let mut ws = FWorkspace::default();
        let values = chain
            .iter()
            .map(|y| ctx.log_f_gamma_with(y, &mut ws))
            .collect::<Result<Vec<_>>>()?;
        let est = estimate_mean(&values);
        let upper = s * gamma * gamma / 2.0;
        let sigma = SIGMAS * est.std_error;
        let inside = est.value >= -sigma && est.value <= upper + sigma;
        let exact_zero = gamma != 0.0 || est.value == 0.0;
        ok &= inside && exact_zero;
        rows.push(format!("{gamma:+.1}:{:.4}", est.value));
    }
    Ok((ok, format!("4-cycle, S={s}, g_hat = {}", rows.join(" "))))
}

fn derivatives(cfg: &AcceptanceConfig) -> Check {
    let graphs = small_graphs(2)?;
    let mut rng = rng::stream(cfg.seed, 7);
    let mut worst_first: f64 = 0.0;
    let mut worst_second: f64 = 0.0;
    let mut bound_violations = 0;
    let mut fd_failures = 0;
    for _ in 0..cfg.derivative_cases {
        let g = &graphs[rng.random_range(0..graphs.len())];
        let n = g.n_vertices();
        let v0 = rng.random_range(0..n);
        let v1 = (v0 + rng.random_range(1..n)) % n;
        let inc = g.incident(v0);
        let e0 = inc[rng.random_range(0..inc.len())];
        let phi: Vec<f64> = (0..g.n_edges())
            .map(|e| if e == e0 { 0.0 } else { rng.random::<f64>() })
            .collect();
        let phi = EdgePotential::new(phi)?;
        let a = InitialWeights::new(g, (0..g.n_edges()).map(|_| rng.random_range(0.2..5.0)).collect())?;
        let lw = uniform_log_weights(&mut rng, g.n_edges(), 5.0);
        let gamma = rng.random_range(-2.0..2.0);
        let ctx = DeformationContext::new(g, &a, v0, v1, e0, &phi, gamma)?;
        let mut ws = FWorkspace::default();
        let mut f = |t: f64| ctx.at(gamma + t).log_f_gamma_with(&lw, &mut ws);
        let (h1, h2) = (FD_STEP_FIRST, FD_STEP_SECOND);
        let fd1 = (f(h1)? - f(-h1)?) / (2.0 * h1);
        let fd2 = (-f(2.0 * h2)? + 16.0 * f(h2)? - 30.0 * f(0.0)? + 16.0 * f(-h2)? - f(-2.0 * h2)?) / (12.0 * h2 * h2);
        let (d1, d2) = ctx.f_gamma_derivatives_with(&lw, TreeRoute::Auto)?;
        let err1 = (d1 - fd1).abs();
        let err2 = (d2 - fd2).abs();
        if err1 > (FD_RTOL * fd1.abs()).max(FD_ATOL) || err2 > (FD_RTOL * fd2.abs()).max(FD_ATOL) {
            fd_failures += 1;
        }
        worst_first = worst_first.max(err1 / fd1.abs().max(1.0));
        worst_second = worst_second.max(err2 / fd2.abs().max(1.0));
        if d2 > dirichlet_form(g, &a, &phi) {
            bound_violations += 1;
        }
    }
    Ok((
        fd_failures == 0 && bound_violations == 0,
        format!(
            "{} cases: {fd_failures} finite-difference mismatches, {bound_violations} second-derivative bound violations; \
             max scaled error {worst_first:.1e} (first), {worst_second:.1e} (second)",
            cfg.derivative_cases
        ),
    ))
}

fn reversibility(cfg: &AcceptanceConfig) -> Check {
    let graphs = small_graphs(2)?;
    let mut rng = rng::stream(cfg.seed, 8);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.reversibility_cases {
        let g = &graphs[rng.random_range(0..graphs.len())];
        let lw = uniform_log_weights(&mut rng, g.n_edges(), 5.0);
        let len = rng.random_range(1..=12);
        let mut path = vec![rng.random_range(0..g.n_vertices())];
        for _ in 0..len {
            let inc = g.incident(*path.last().unwrap());
            let e = inc[rng.random_range(0..inc.len())];
            path.push(g.other_end(e, *path.last().unwrap()));
        }
        let (start, end) = (path[0], *path.last().unwrap());
        let forward = markov_path_log_probability(g, &lw, &path);
        let reversed: Vec<usize> = path.iter().rev().copied().collect();
        let rhs = log_vertex_weight(g, &lw, end) - log_vertex_weight(g, &lw, start)
            + markov_path_log_probability(g, &lw, &reversed);
        worst = worst.max((forward - rhs).exp_m1().abs());
    }
    Ok((
        worst <= REVERSIBILITY_RTOL,
        format!(
            "{} random paths, max relative error {worst:.2e} (tol {REVERSIBILITY_RTOL:.0e})",
            cfg.reversibility_cases
        ),
    ))
}

fn bound_arithmetic(_cfg: &AcceptanceConfig) -> Check {
    let mut ok = true;
    let mut failures = Vec::new();
    let mut n = 0;
    for r in [130u64, 200, 500] {
        let amax = (r as f64 - 129.0) / 256.0;
        for frac in [0.25, 0.5, 0.75] {
            let a = amax * frac;
            let c = default_c(r, a);
            let (_, l0) = xi_and_l0(r, a, c)?;
            let report = bound_chain(r, a, Some(c), l0, None, false)?;
            n += 1;
            if let Some(link) = report.failing_link() {
                ok = false;
                failures.push(format!(
                    "r={r} a={a}: {} fails ({} > {})",
                    link.name, link.lhs, link.rhs
                ));
            }
        }
    }
    let mut count_failures = 0;
    for l in 1..=10u64 {
        if enumerate_shell_crossings(l) != (8 * l) as usize
            || enumerate_r_edges_between_levels(l) != (4 * (2 * l - 1)) as usize
        {
            count_failures += 1;
        }
    }
    ok &= count_failures == 0;
    let mut detail = format!("{n} (r, a) points at l0, level counts checked for l <= 10");
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join("; ")));
    }
    if count_failures > 0 {
        detail.push_str(&format!("; {count_failures} level-count mismatches"));
    }
    Ok((ok, detail))
}

fn walker_statistics(cfg: &AcceptanceConfig) -> Check {
    let g = FiniteGraph::triangle();
    let a = InitialWeights::constant(&g, 1.0)?;
    let len = cfg.walker_path_len;
    let code = |path: &[usize]| path.iter().rev().fold(0usize, |acc, &v| acc * 3 + v);
    let slots = 3usize.pow(len as u32 + 1);
    let (counts, inconsistent) = (0..cfg.walker_replicas)
        .into_par_iter()
        .fold(
            || (vec![0u64; slots], 0u64),
            |(mut counts, mut bad), k| {
                let mut rng = rng::stream(cfg.seed, k);
                let mut state = WalkState::new(&g, 0).expect("vertex 0 exists");
                let mut path = vec![0usize];
                let mut crossed = vec![0u64; g.n_edges()];
                for _ in 0..len {
                    let e = errw_step(&g, &a, &mut state, &mut rng);
                    crossed[e] += 1;
                    path.push(state.position);
                }
                let exact = state.is_consistent()
                    && state.time == len as u64
                    && state.crossings == crossed
                    && (0..g.n_edges()).all(|e| state.weight(&a, e) - a.edge(e) == crossed[e] as f64);
                if !exact {
                    bad += 1;
                }
                counts[code(&path)] += 1;
                (counts, bad)
            },
        )
        .reduce(
            || (vec![0u64; slots], 0u64),
            |(mut c1, b1), (c2, b2)| {
                c1.iter_mut().zip(&c2).for_each(|(x, y)| *x += y);
                (c1, b1 + b2)
            },
        );
    let n = cfg.walker_replicas as f64;
    let mut worst_z: f64 = 0.0;
    let paths = paths_from(&g, 0, len);
    let mut total_p = 0.0;
    for p in &paths {
        let prob = errw_path_probability(&g, &a, 0, p)?;
        total_p += prob;
        let sd = (n * prob * (1.0 - prob)).sqrt();
        let z = (counts[code(p)] as f64 - n * prob) / sd;
        worst_z = worst_z.max(z.abs());
    }
    let ok = worst_z <= WALKER_SIGMAS && inconsistent == 0 && (total_p - 1.0).abs() < 1e-12;
    Ok((
        ok,
        format!(
            "{} replicas, {} paths of length {len}: max |z| {worst_z:.2} (tol {WALKER_SIGMAS}), {inconsistent} bookkeeping mismatches",
            cfg.walker_replicas,
            paths.len()
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_satisfy_the_assumption() {
        for (inst, s) in [
            (SymmetricInstance::square(), 3.0),
            (SymmetricInstance::hexagon(), 1.5),
            (SymmetricInstance::diluted_square(), 1.0),
        ] {
            inst.check().unwrap();
            assert!((inst.s_phi() - s).abs() < 1e-12, "{}", inst.name);
        }
        assert_eq!(SymmetricInstance::square().phi.values(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn unknown_criterion_fails() {
        let out = run(42, &AcceptanceConfig::default());
        assert!(!out.passed);
        assert!(out.to_string().starts_with("[FAIL]"));
    }
}
