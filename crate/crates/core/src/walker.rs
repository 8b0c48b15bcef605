//! Edge-reinforced and fixed-environment random walks: exact stepping, path
//! probabilities, and hitting-before-return Monte Carlo.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, InitialWeights};
use crate::lattice::LatticeVertex;
use crate::measure::Environment;
use crate::rng;

/// Position, time and per-edge crossing counts. The current weight of `e` is
/// `a_e + crossings[e]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkState {
    pub position: usize,
    pub time: u64,
    pub crossings: Vec<u64>,
}

impl WalkState {
    pub fn new(graph: &FiniteGraph, v0: usize) -> Result<Self> {
        graph.check_vertex(v0)?;
        Ok(WalkState {
            position: v0,
            time: 0,
            crossings: vec![0; graph.n_edges()],
        })
    }

    /// `w_t(e) = a_e + (number of crossings of e)`.
    pub fn weight(&self, a: &InitialWeights, e: usize) -> f64 {
        a.edge(e) + self.crossings[e] as f64
    }

    /// Whether the crossing counts add up to the elapsed time.
    pub fn is_consistent(&self) -> bool {
        self.crossings.iter().sum::<u64>() == self.time
    }
}

fn pick<R: Rng + ?Sized>(rng: &mut R, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (k, w) in weights.enumerate() {
        if u < w {
            return k;
        }
        u -= w;
        last = k;
    }
    last
}

/// One step of the reinforced walk. Returns the edge crossed.
pub fn errw_step<R: Rng + ?Sized>(
    graph: &FiniteGraph,
    a: &InitialWeights,
    state: &mut WalkState,
    rng: &mut R,
) -> usize {
    let inc = graph.incident(state.position);
    let k = pick(rng, inc.iter().map(|&e| state.weight(a, e)));
    let e = inc[k];
    state.crossings[e] += 1;
    state.time += 1;
    state.position = graph.other_end(e, state.position);
    e
}

/// One step of the Markov walk in the fixed environment `x`. Returns the
/// edge crossed; crossing counts are recorded but do not affect the law.
pub fn markov_step<R: Rng + ?Sized>(graph: &FiniteGraph, x: &Environment, state: &mut WalkState, rng: &mut R) -> usize {
    let inc = graph.incident(state.position);
    let m = inc.iter().map(|&e| x.log_weight(e)).fold(f64::NEG_INFINITY, f64::max);
    let k = pick(rng, inc.iter().map(|&e| (x.log_weight(e) - m).exp()));
    let e = inc[k];
    state.crossings[e] += 1;
    state.time += 1;
    state.position = graph.other_end(e, state.position);
    e
}

fn check_path_start(graph: &FiniteGraph, v0: usize, path: &[usize]) -> Result<()> {
    graph.check_vertex(v0)?;
    match path.first() {
        Some(&p) if p == v0 => Ok(()),
        _ => Err(Error::InvalidParameter(format!("path must start at vertex {v0}"))),
    }
}

/// Probability that the reinforced walk from `v0` follows `path` (0 when a
/// step is not along an edge).
pub fn errw_path_probability(graph: &FiniteGraph, a: &InitialWeights, v0: usize, path: &[usize]) -> Result<f64> {
    check_path_start(graph, v0, path)?;
    let mut counts = vec![0u64; graph.n_edges()];
    let mut p = 1.0;
    for w in path.windows(2) {
        let Some(e) = graph.find_edge(w[0], w[1]) else {
            return Ok(0.0);
        };
        let total: f64 = graph.incident(w[0]).iter().map(|&f| a.edge(f) + counts[f] as f64).sum();
        p *= (a.edge(e) + counts[e] as f64) / total;
        counts[e] += 1;
    }
    Ok(p)
}

/// Probability that the Markov walk in environment `x` from `v0` follows
/// `path`.
pub fn markov_path_probability(graph: &FiniteGraph, x: &Environment, v0: usize, path: &[usize]) -> Result<f64> {
    check_path_start(graph, v0, path)?;
    Ok(markov_path_log_probability(graph, x.log_weights(), path).exp())
}

/// `log Π_t x_{v_t v_{t+1}} / x_{v_t}`; `-inf` for inadmissible paths.
pub fn markov_path_log_probability(graph: &FiniteGraph, log_w: &[f64], path: &[usize]) -> f64 {
    let mut lp = 0.0;
    for w in path.windows(2) {
        let Some(e) = graph.find_edge(w[0], w[1]) else {
            return f64::NEG_INFINITY;
        };
        lp += log_w[e] - crate::measure::log_vertex_weight(graph, log_w, w[0]);
    }
    lp
}

/// Every path of exactly `len` steps from `v0` along edges.
pub fn paths_from(graph: &FiniteGraph, v0: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![v0]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                let last = *p.last().unwrap();
                graph.neighbors(last).map(move |(_, w)| {
                    let mut q = p.clone();
                    q.push(w);
                    q
                })
            })
            .collect();
    }
    out
}

/// Reinforced or fixed-environment dynamics.
#[derive(Clone, Copy, Debug)]
pub enum Dynamics<'a> {
    Reinforced(&'a InitialWeights),
    Fixed(&'a Environment),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingConfig {
    pub n_walks: u64,
    pub max_steps: u64,
    pub seed: u64,
    /// Largest tolerated fraction of replicas that reach `max_steps`.
    pub censor_threshold: f64,
}

impl Default for HittingConfig {
    fn default() -> Self {
        HittingConfig {
            n_walks: 10_000,
            max_steps: 1_000_000,
            seed: 0,
            censor_threshold: 0.01,
        }
    }
}

/// Hit / return counts with a normal-approximation 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub n_walks: u64,
    pub n_hits: u64,
    pub n_returns: u64,
    pub n_censored: u64,
    /// `n_hits / (n_hits + n_returns)`.
    pub estimate: f64,
    pub ci_halfwidth: f64,
    pub censored_frac: f64,
    pub seed: u64,
}

impl HittingEstimate {
    fn from_counts(n_walks: u64, n_hits: u64, n_returns: u64, seed: u64) -> Self {
        let decided = n_hits + n_returns;
        let p = if decided > 0 {
            n_hits as f64 / decided as f64
        } else {
            f64::NAN
        };
        let half = if decided > 0 {
            1.96 * (p * (1.0 - p) / decided as f64).sqrt()
        } else {
            f64::NAN
        };
        let n_censored = n_walks - decided;
        HittingEstimate {
            n_walks,
            n_hits,
            n_returns,
            n_censored,
            estimate: p,
            ci_halfwidth: half,
            censored_frac: n_censored as f64 / n_walks.max(1) as f64,
            seed,
        }
    }

    /// Binomial standard error of the estimate.
    pub fn std_error(&self) -> f64 {
        let n = (self.n_hits + self.n_returns) as f64;
        (self.estimate * (1.0 - self.estimate) / n).sqrt()
    }

    fn check_censoring(self, threshold: f64) -> Result<Self> {
        if self.censored_frac > threshold {
            return Err(Error::Diagnostic(format!(
                "{} of {} walks ({:.3}%) reached the step cap, above the {:.3}% threshold",
                self.n_censored,
                self.n_walks,
                100.0 * self.censored_frac,
                100.0 * threshold
            )));
        }
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Hit,
    Returned,
    Censored,
}

/// Estimates the probability that the walk from `v0` enters `targets`
/// before coming back to `v0`.
pub fn hit_before_return(
    graph: &FiniteGraph,
    dynamics: Dynamics<'_>,
    v0: usize,
    targets: &[usize],
    cfg: &HittingConfig,
) -> Result<HittingEstimate> {
    graph.check_vertex(v0)?;
    if targets.is_empty() {
        return Err(Error::InvalidParameter("target set is empty".into()));
    }
    for &t in targets {
        graph.check_vertex(t)?;
    }
    if targets.contains(&v0) {
        return Err(Error::InvalidParameter(format!("start vertex {v0} is a target")));
    }
    let mut is_target = vec![false; graph.n_vertices()];
    for &t in targets {
        is_target[t] = true;
    }
    let replica = |k: u64| -> Outcome {
        let mut rng = rng::stream(cfg.seed, k);
        let mut state = WalkState::new(graph, v0).expect("start vertex checked");
        while state.time < cfg.max_steps {
            match dynamics {
                Dynamics::Reinforced(a) => errw_step(graph, a, &mut state, &mut rng),
                Dynamics::Fixed(x) => markov_step(graph, x, &mut state, &mut rng),
            };
            if is_target[state.position] {
                return Outcome::Hit;
            }
            if state.position == v0 {
                return Outcome::Returned;
            }
        }
        Outcome::Censored
    };
    let (hits, returns) = (0..cfg.n_walks)
        .into_par_iter()
        .map(|k| match replica(k) {
            Outcome::Hit => (1u64, 0u64),
            Outcome::Returned => (0, 1),
            Outcome::Censored => (0, 0),
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    HittingEstimate::from_counts(cfg.n_walks, hits, returns, cfg.seed).check_censoring(cfg.censor_threshold)
}

/// One row of an exported trajectory: time, vertex, and the edge crossed
/// to get there (`None` at time 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrajectoryStep {
    pub t: u64,
    pub vertex: usize,
    pub edge: Option<usize>,
}

/// A reinforced trajectory of `steps` steps from `v0`.
pub fn errw_trajectory(
    graph: &FiniteGraph,
    a: &InitialWeights,
    v0: usize,
    steps: u64,
    seed: u64,
) -> Result<(Vec<TrajectoryStep>, WalkState)> {
    let mut state = WalkState::new(graph, v0)?;
    let mut rng = rng::stream(seed, 0);
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(TrajectoryStep {
        t: 0,
        vertex: v0,
        edge: None,
    });
    for _ in 0..steps {
        let e = errw_step(graph, a, &mut state, &mut rng);
        out.push(TrajectoryStep {
            t: state.time,
            vertex: state.position,
            edge: Some(e),
        });
    }
    Ok((out, state))
}

/// What a walk on the diluted lattice is waiting for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LatticeTarget {
    /// Any of the given lattice vertices.
    Vertices(Vec<LatticeVertex>),
    /// The crossings of rZ² on every shell `|v|∞ = r l`, `l = 1..=L`,
    /// tracked simultaneously.
    BoundaryLevels(u64),
}

/// The reinforced walk on the whole diluted lattice with sparse crossing
/// counts, so no window has to be materialized or grown.
struct LatticeWalk {
    r: i64,
    a: f64,
    position: LatticeVertex,
    time: u64,
    /// Keyed by the lower endpoint and direction (0 = x1, 1 = x2).
    crossings: HashMap<(LatticeVertex, u8), u64>,
}

impl LatticeWalk {
    fn new(r: u64, a: f64) -> Self {
        LatticeWalk {
            r: r as i64,
            a,
            position: LatticeVertex::ORIGIN,
            time: 0,
            crossings: HashMap::new(),
        }
    }

    fn neighbours(&self) -> ([LatticeVertex; 4], usize) {
        let v = self.position;
        let mut out = [v; 4];
        let mut n = 0;
        if v.1.rem_euclid(self.r) == 0 {
            out[n] = LatticeVertex(v.0 + 1, v.1);
            out[n + 1] = LatticeVertex(v.0 - 1, v.1);
            n += 2;
        }
        if v.0.rem_euclid(self.r) == 0 {
            out[n] = LatticeVertex(v.0, v.1 + 1);
            out[n + 1] = LatticeVertex(v.0, v.1 - 1);
            n += 2;
        }
        (out, n)
    }

    fn key(u: LatticeVertex, v: LatticeVertex) -> (LatticeVertex, u8) {
        let dir = if u.1 == v.1 { 0 } else { 1 };
        (u.min(v), dir)
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let (nbrs, n) = self.neighbours();
        let weights: Vec<f64> = nbrs[..n]
            .iter()
            .map(|&w| self.a + *self.crossings.get(&Self::key(self.position, w)).unwrap_or(&0) as f64)
            .collect();
        let k = pick(rng, weights.iter().copied());
        let next = nbrs[k];
        *self.crossings.entry(Self::key(self.position, next)).or_insert(0) += 1;
        self.position = next;
        self.time += 1;
    }
}

/// Hitting estimates for walks started at the origin of the diluted
/// lattice with constant initial weight `a`. Returns one `(label, estimate)`
/// per target vertex set or per level.
pub fn lattice_hit_before_return(
    r: u64,
    a: f64,
    target: &LatticeTarget,
    cfg: &HittingConfig,
) -> Result<Vec<(String, HittingEstimate)>> {
    if r < 2 {
        return Err(Error::InvalidParameter(format!("r = {r} is below 2")));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("a = {a} is not positive")));
    }
    match target {
        LatticeTarget::Vertices(vs) => {
            if vs.is_empty() {
                return Err(Error::InvalidParameter("target set is empty".into()));
            }
            for v in vs {
                if !v.in_lattice(r) {
                    return Err(Error::NotInLattice((v.0, v.1)));
                }
                if *v == LatticeVertex::ORIGIN {
                    return Err(Error::InvalidParameter("the origin is a target".into()));
                }
            }
            let set: HashSet<LatticeVertex> = vs.iter().copied().collect();
            let (hits, returns) = (0..cfg.n_walks)
                .into_par_iter()
                .map(|k| {
                    let mut rng = rng::stream(cfg.seed, k);
                    let mut walk = LatticeWalk::new(r, a);
                    while walk.time < cfg.max_steps {
                        walk.step(&mut rng);
                        if set.contains(&walk.position) {
                            return (1u64, 0u64);
                        }
                        if walk.position == LatticeVertex::ORIGIN {
                            return (0, 1);
                        }
                    }
                    (0, 0)
                })
                .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
            let label = vs
                .iter()
                .map(|v| format!("({};{})", v.0, v.1))
                .collect::<Vec<_>>()
                .join(" ");
            let est = HittingEstimate::from_counts(cfg.n_walks, hits, returns, cfg.seed)
                .check_censoring(cfg.censor_threshold)?;
            Ok(vec![(label, est)])
        }
        LatticeTarget::BoundaryLevels(levels) => {
            let top = *levels;
            if top == 0 {
                return Err(Error::InvalidParameter("boundary level must be at least 1".into()));
            }
            let ri = r as i64;
            // Per replica: highest crossing level reached, and whether the
            // walk ended by returning (true) or by the step cap.
            let outcomes: Vec<(u64, bool)> = (0..cfg.n_walks)
                .into_par_iter()
                .map(|k| {
                    let mut rng = rng::stream(cfg.seed, k);
                    let mut walk = LatticeWalk::new(r, a);
                    let mut best = 0u64;
                    while walk.time < cfg.max_steps {
                        walk.step(&mut rng);
                        let p = walk.position;
                        if p == LatticeVertex::ORIGIN {
                            return (best, true);
                        }
                        if p.0.rem_euclid(ri) == 0 && p.1.rem_euclid(ri) == 0 {
                            best = best.max(p.norm_inf() / r);
                            if best >= top {
                                return (best, true);
                            }
                        }
                    }
                    (best, false)
                })
                .collect();
            let mut out = Vec::with_capacity(top as usize);
            let mut worst_censoring = 0.0f64;
            for l in 1..=top {
                let mut hits = 0;
                let mut returns = 0;
                for &(best, finished) in &outcomes {
                    if best >= l {
                        hits += 1;
                    } else if finished {
                        returns += 1;
                    }
                }
                let est = HittingEstimate::from_counts(cfg.n_walks, hits, returns, cfg.seed);
                worst_censoring = worst_censoring.max(est.censored_frac);
                out.push((format!("level:{l}"), est));
            }
            if worst_censoring > cfg.censor_threshold {
                return Err(Error::Diagnostic(format!(
                    "{:.3}% of walks were censored, above the {:.3}% threshold",
                    100.0 * worst_censoring,
                    100.0 * cfg.censor_threshold
                )));
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn degree_two_step_probabilities() {
        // At vertex 1 of the square after crossing {0, 1} once.
        let g = FiniteGraph::cycle(4).unwrap();
        let a = InitialWeights::constant(&g, 0.5).unwrap();
        let back = errw_path_probability(&g, &a, 0, &[0, 1, 0]).unwrap();
        let on = errw_path_probability(&g, &a, 0, &[0, 1, 2]).unwrap();
        assert_relative_eq!(back, 0.5 * 1.5 / 2.0, epsilon = 1e-15);
        assert_relative_eq!(on, 0.5 * 0.5 / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn path_probability_examples() {
        let tri = FiniteGraph::triangle();
        let a = InitialWeights::constant(&tri, 1.0).unwrap();
        assert_relative_eq!(errw_path_probability(&tri, &a, 0, &[0, 1, 2]).unwrap(), 1.0 / 6.0);
        assert_eq!(errw_path_probability(&tri, &a, 0, &[0]).unwrap(), 1.0);
        let p4 = FiniteGraph::path(4).unwrap();
        let a4 = InitialWeights::constant(&p4, 1.0).unwrap();
        assert_eq!(errw_path_probability(&p4, &a4, 0, &[0, 2]).unwrap(), 0.0);
        assert!(errw_path_probability(&p4, &a4, 0, &[1, 2]).is_err());

        let sq = FiniteGraph::cycle(4).unwrap();
        let x = Environment::unit(4, 0);
        assert_relative_eq!(markov_path_probability(&sq, &x, 0, &[0, 1, 2]).unwrap(), 0.25);
        let x = Environment::from_weights(&[2.0, 1.0, 1.0]).unwrap();
        // Vertex 0 of the triangle sees edges 0 (weight 2) and 2 (weight 1).
        assert_relative_eq!(markov_path_probability(&tri, &x, 0, &[0, 1]).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn lattice_origin_path() {
        // Origin of the 4-diluted lattice in a window, then back.
        let w = crate::lattice::build_window_graph(4, 4).unwrap();
        let o = w.vertex_index(LatticeVertex::ORIGIN).unwrap();
        let v = w.vertex_index(LatticeVertex(1, 0)).unwrap();
        let a = InitialWeights::constant(&w.graph, 0.7).unwrap();
        assert_relative_eq!(errw_path_probability(&w.graph, &a, o, &[o, v]).unwrap(), 0.25);
        let p = errw_path_probability(&w.graph, &a, o, &[o, v, o]).unwrap();
        assert_relative_eq!(p, 0.25 * 1.7 / 2.4, epsilon = 1e-15);
    }

    #[test]
    fn bookkeeping_is_exact() {
        let g = FiniteGraph::complete(5).unwrap();
        let a = InitialWeights::constant(&g, 0.3).unwrap();
        let (traj, state) = errw_trajectory(&g, &a, 2, 10_000, 11).unwrap();
        assert!(state.is_consistent());
        let mut counts = vec![0u64; g.n_edges()];
        for s in &traj[1..] {
            counts[s.edge.unwrap()] += 1;
        }
        assert_eq!(counts, state.crossings);
        for e in 0..g.n_edges() {
            assert_eq!(state.weight(&a, e) - a.edge(e), counts[e] as f64);
        }
    }

    #[test]
    fn neighbours_are_always_hit() {
        let g = FiniteGraph::cycle(6).unwrap();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        let cfg = HittingConfig {
            n_walks: 1000,
            max_steps: 10,
            seed: 1,
            censor_threshold: 0.0,
        };
        let est = hit_before_return(&g, Dynamics::Reinforced(&a), 0, &[1, 5], &cfg).unwrap();
        assert_eq!(est.estimate, 1.0);
        assert!(hit_before_return(&g, Dynamics::Reinforced(&a), 0, &[0, 3], &cfg).is_err());
        assert!(hit_before_return(&g, Dynamics::Reinforced(&a), 0, &[], &cfg).is_err());
    }

    #[test]
    fn square_opposite_vertex_is_even_odds() {
        let g = FiniteGraph::cycle(4).unwrap();
        let x = Environment::unit(4, 0);
        let cfg = HittingConfig {
            n_walks: 40_000,
            max_steps: 1000,
            seed: 5,
            censor_threshold: 0.01,
        };
        let est = hit_before_return(&g, Dynamics::Fixed(&x), 0, &[2], &cfg).unwrap();
        assert!((est.estimate - 0.5).abs() < 3.0 * est.std_error(), "{est:?}");
    }

    #[test]
    fn censoring_is_reported() {
        let g = FiniteGraph::path(6).unwrap();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        let cfg = HittingConfig {
            n_walks: 200,
            max_steps: 3,
            seed: 2,
            censor_threshold: 0.01,
        };
        let err = hit_before_return(&g, Dynamics::Reinforced(&a), 0, &[5], &cfg).unwrap_err();
        assert!(matches!(err, Error::Diagnostic(_)));
    }

    #[test]
    fn parallel_runs_are_deterministic() {
        let g = FiniteGraph::cycle(5).unwrap();
        let a = InitialWeights::constant(&g, 0.5).unwrap();
        let cfg = HittingConfig {
            n_walks: 5000,
            max_steps: 10_000,
            seed: 9,
            censor_threshold: 0.01,
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let x = one.install(|| hit_before_return(&g, Dynamics::Reinforced(&a), 0, &[2], &cfg).unwrap());
        let y = four.install(|| hit_before_return(&g, Dynamics::Reinforced(&a), 0, &[2], &cfg).unwrap());
        assert_eq!(x, y);
    }

    #[test]
    fn lattice_levels_are_monotone() {
        let cfg = HittingConfig {
            n_walks: 2000,
            max_steps: 1_000_000,
            seed: 7,
            censor_threshold: 0.05,
        };
        let out = lattice_hit_before_return(3, 0.5, &LatticeTarget::BoundaryLevels(3), &cfg).unwrap();
        assert_eq!(out.len(), 3);
        for w in out.windows(2) {
            assert!(w[0].1.n_hits >= w[1].1.n_hits);
        }
        let first = lattice_hit_before_return(
            2,
            1.0,
            &LatticeTarget::Vertices(vec![
                LatticeVertex(1, 0),
                LatticeVertex(-1, 0),
                LatticeVertex(0, 1),
                LatticeVertex(0, -1),
            ]),
            &cfg,
        )
        .unwrap();
        assert_eq!(first[0].1.estimate, 1.0);
    }
}
