//! Metropolis sampling of the mixing measure and of the interpolated
//! measure in log coordinates, with effective-sample-size diagnostics.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, InitialWeights};
use crate::measure::{log_vertex_weight, LogDensity};
use crate::rng;
use crate::trees::TreeScratch;

/// Which unnormalized density a chain targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Target {
    /// The mixing measure for the walk started at `v0`.
    Q { v0: usize },
    /// The normalized geometric mean of the measures at `v0` and `v1`.
    P { v0: usize, v1: usize },
}

impl Target {
    pub fn density(&self, graph: &FiniteGraph, a: &InitialWeights) -> Result<LogDensity> {
        match *self {
            Target::Q { v0 } => LogDensity::q(graph, a, v0),
            Target::P { v0, v1 } => LogDensity::p(graph, a, v0, v1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Initial per-coordinate proposal standard deviation.
    pub proposal_scale: f64,
    pub seed: u64,
    /// Stream index, distinct for independent chains with the same seed.
    pub stream: u64,
    pub target: Target,
}

impl ChainConfig {
    pub fn new(target: Target, n_samples: usize, seed: u64) -> Self {
        ChainConfig {
            n_samples,
            burn_in: 2000,
            thinning: 1,
            proposal_scale: 1.0,
            seed,
            stream: 0,
            target,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be positive".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidParameter("thinning must be at least 1".into()));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return Err(Error::InvalidParameter("proposal scale must be positive".into()));
        }
        Ok(())
    }
}

/// Acceptance-rate target for the burn-in adaptation.
pub const TARGET_ACCEPTANCE: f64 = 0.35;
/// Post-adaptation acceptance rates outside this band are flagged.
pub const ACCEPTANCE_BAND: (f64, f64) = (0.15, 0.6);
/// Effective sample sizes below this are flagged.
pub const MIN_ESS: f64 = 100.0;

/// Retained samples as full log-weight vectors (the reference edge is
/// exactly 0), with per-coordinate acceptance rates and final scales.
/// The reference edge is never proposed and reports acceptance 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub e0: usize,
    pub n_edges: usize,
    samples: Vec<f64>,
    pub acceptance: Vec<f64>,
    pub scales: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len() / self.n_edges.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.samples[k * self.n_edges..(k + 1) * self.n_edges]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.samples.chunks(self.n_edges)
    }

    /// Applies `f` to every sample.
    pub fn map<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        self.iter().map(f).collect()
    }

    /// Fails with the first warning, if any.
    pub fn require_healthy(&self) -> Result<()> {
        match self.warnings.first() {
            Some(w) => Err(Error::Diagnostic(w.clone())),
            None => Ok(()),
        }
    }
}

/// Component-wise Gaussian random-walk Metropolis in `log x_e`, `e ≠ e0`.
///
/// During burn-in each coordinate's scale is nudged every 50 sweeps toward
/// [`TARGET_ACCEPTANCE`]; the scales are then frozen so the retained chain is
/// an ordinary reversible Metropolis chain. One retained sample is taken
/// every `thinning` full sweeps.
pub fn mcmc_sample(graph: &FiniteGraph, a: &InitialWeights, e0: usize, cfg: &ChainConfig) -> Result<Chain> {
    cfg.validate()?;
    graph.check_edge(e0)?;
    let density = cfg.target.density(graph, a)?;
    let ne = graph.n_edges();
    let free: Vec<usize> = (0..ne).filter(|&e| e != e0).collect();
    let mut rng = rng::stream(cfg.seed, cfg.stream);
    let mut scratch = TreeScratch::default();
    let mut y = vec![0.0; ne];
    let mut ld = density.eval(graph, &y, &mut scratch)?;
    let mut scales = vec![cfg.proposal_scale; ne];
    let mut accepted = vec![0u64; ne];
    let mut proposed = vec![0u64; ne];

    let mut sweep = |y: &mut Vec<f64>,
                     ld: &mut f64,
                     scales: &[f64],
                     accepted: &mut [u64],
                     proposed: &mut [u64],
                     rng: &mut rng::Rng|
     -> Result<()> {
        for &e in &free {
            let z: f64 = rng.sample(StandardNormal);
            let old = y[e];
            y[e] = old + scales[e] * z;
            let new_ld = density.eval(graph, y, &mut scratch)?;
            proposed[e] += 1;
            let u: f64 = rng.random();
            if u.ln() < new_ld - *ld {
                *ld = new_ld;
                accepted[e] += 1;
            } else {
                y[e] = old;
            }
        }
        Ok(())
    };

    const ADAPT_EVERY: usize = 50;
    for s in 0..cfg.burn_in {
        sweep(&mut y, &mut ld, &scales, &mut accepted, &mut proposed, &mut rng)?;
        if (s + 1) % ADAPT_EVERY == 0 {
            let step = 1.0 / (((s + 1) / ADAPT_EVERY) as f64).sqrt();
            for &e in &free {
                let rate = accepted[e] as f64 / proposed[e] as f64;
                scales[e] *= (step * (rate - TARGET_ACCEPTANCE) * 2.0).exp();
                accepted[e] = 0;
                proposed[e] = 0;
            }
        }
    }
    accepted.iter_mut().for_each(|c| *c = 0);
    proposed.iter_mut().for_each(|c| *c = 0);

    let mut samples = Vec::with_capacity(cfg.n_samples * ne);
    for _ in 0..cfg.n_samples {
        for _ in 0..cfg.thinning {
            sweep(&mut y, &mut ld, &scales, &mut accepted, &mut proposed, &mut rng)?;
        }
        samples.extend_from_slice(&y);
    }
    let acceptance: Vec<f64> = (0..ne)
        .map(|e| {
            if proposed[e] == 0 {
                0.0
            } else {
                accepted[e] as f64 / proposed[e] as f64
            }
        })
        .collect();
    let mut warnings = Vec::new();
    for &e in &free {
        let r = acceptance[e];
        if !(r >= ACCEPTANCE_BAND.0 && r <= ACCEPTANCE_BAND.1) {
            warnings.push(format!(
                "acceptance rate {r:.3} for edge {e} is outside [{}, {}]",
                ACCEPTANCE_BAND.0, ACCEPTANCE_BAND.1
            ));
        }
    }
    Ok(Chain {
        e0,
        n_edges: ne,
        samples,
        acceptance,
        scales,
        warnings,
    })
}

/// Runs `n_chains` chains on separate streams in parallel.
pub fn mcmc_chains(
    graph: &FiniteGraph,
    a: &InitialWeights,
    e0: usize,
    cfg: &ChainConfig,
    n_chains: usize,
) -> Result<Vec<Chain>> {
    (0..n_chains)
        .into_par_iter()
        .map(|k| {
            let mut c = cfg.clone();
            c.stream = cfg.stream + k as u64;
            mcmc_sample(graph, a, e0, &c)
        })
        .collect()
}

/// Mean with an autocorrelation-aware standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
    pub ess: f64,
    pub n: usize,
    pub warnings: Vec<String>,
}

impl MomentEstimate {
    /// Whether `x` lies within `k` standard errors.
    pub fn within(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.std_error
    }
}

/// Effective sample size by Geyer's initial monotone sequence estimator.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return n as f64;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let gamma = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let g0 = gamma(0);
    if g0 <= 0.0 {
        return n as f64;
    }
    // Sums of adjacent autocovariance pairs, truncated at the first
    // non-positive pair and made monotone.
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = gamma(2 * k) + gamma(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (2.0 * sum / g0 - 1.0).max(1e-12);
    (n as f64 / tau).min(n as f64)
}

/// Mean of `series` with standard error `sd/√ESS`.
pub fn estimate_mean(series: &[f64]) -> MomentEstimate {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n.max(1) as f64;
    let var = if n > 1 {
        series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let ess = effective_sample_size(series);
    let mut warnings = Vec::new();
    if ess < MIN_ESS {
        warnings.push(format!("effective sample size {ess:.1} is below {MIN_ESS}"));
    }
    MomentEstimate {
        value: mean,
        std_error: if var > 0.0 { (var / ess).sqrt() } else { 0.0 },
        ess,
        n,
        warnings,
    }
}

/// `log(x_{v1}/x_{v0})` for every sample.
pub fn log_ratio_series(graph: &FiniteGraph, chain: &Chain, v0: usize, v1: usize) -> Vec<f64> {
    chain.map(|y| log_vertex_weight(graph, y, v1) - log_vertex_weight(graph, y, v0))
}

/// `E[(x_{v1}/x_{v0})^{1/4}]` from a chain targeting the mixing measure.
pub fn quarter_moment(graph: &FiniteGraph, chain: &Chain, v0: usize, v1: usize) -> MomentEstimate {
    if v0 == v1 {
        return MomentEstimate {
            value: 1.0,
            std_error: 0.0,
            ess: chain.len() as f64,
            n: chain.len(),
            warnings: Vec::new(),
        };
    }
    let series: Vec<f64> = log_ratio_series(graph, chain, v0, v1)
        .into_iter()
        .map(|l| (0.25 * l).exp())
        .collect();
    estimate_mean(&series)
}

/// Comparison of `L = log(x_{v1}/x_{v0})` with `−L`: under the symmetry
/// both the mean and the third central moment vanish.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub mean: MomentEstimate,
    pub third_moment: MomentEstimate,
    pub z_mean: f64,
    pub z_third: f64,
}

impl SymmetryReport {
    pub fn consistent(&self, k: f64) -> bool {
        self.z_mean.abs() <= k && self.z_third.abs() <= k
    }
}

pub fn symmetry_check(graph: &FiniteGraph, chain: &Chain, v0: usize, v1: usize) -> SymmetryReport {
    let l = if v0 == v1 {
        vec![0.0; chain.len()]
    } else {
        log_ratio_series(graph, chain, v0, v1)
    };
    let mean = estimate_mean(&l);
    let m = mean.value;
    let third = estimate_mean(&l.iter().map(|x| (x - m).powi(3)).collect::<Vec<_>>());
    let z = |e: &MomentEstimate| {
        if e.std_error > 0.0 {
            e.value / e.std_error
        } else if e.value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    SymmetryReport {
        z_mean: z(&mean),
        z_third: z(&third),
        mean,
        third_moment: third,
    }
}

/// Self-normalized importance weights `w ∝ exp(s · l)` applied to `values`:
/// returns `Σ w_k values_k / Σ w_k`.
pub fn reweighted_mean(log_weights: &[f64], values: &[f64]) -> f64 {
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (lw, v) in log_weights.iter().zip(values) {
        let w = (lw - m).exp();
        num += w * v;
        den += w;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn ess_of_iid_noise_is_near_n() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let ess = effective_sample_size(&xs);
        assert!(ess > 15_000.0 && ess <= 20_000.0, "{ess}");
    }

    #[test]
    fn ess_of_ar1_matches_theory() {
        // AR(1) with ρ = 0.9 has integrated time (1 + ρ)/(1 − ρ) = 19.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                x = 0.9 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let ess = effective_sample_size(&xs);
        let expected = 200_000.0 / 19.0;
        assert!((ess / expected - 1.0).abs() < 0.15, "{ess} vs {expected}");
    }

    #[test]
    fn chain_is_deterministic_and_normalized() {
        let g = FiniteGraph::triangle();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        let mut cfg = ChainConfig::new(Target::Q { v0: 0 }, 500, 17);
        cfg.burn_in = 500;
        let c1 = mcmc_sample(&g, &a, 0, &cfg).unwrap();
        let c2 = mcmc_sample(&g, &a, 0, &cfg).unwrap();
        assert_eq!(c1, c2);
        assert!(c1.iter().all(|y| y[0] == 0.0));
        assert_eq!(c1.len(), 500);
        cfg.stream = 1;
        assert_ne!(mcmc_sample(&g, &a, 0, &cfg).unwrap(), c1);
    }

    #[test]
    fn adapted_acceptance_is_moderate() {
        let g = FiniteGraph::cycle(4).unwrap();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        let mut cfg = ChainConfig::new(Target::P { v0: 0, v1: 2 }, 5000, 1);
        cfg.proposal_scale = 10.0;
        let c = mcmc_sample(&g, &a, 0, &cfg).unwrap();
        for e in 1..4 {
            assert!((0.25..=0.5).contains(&c.acceptance[e]), "{:?}", c.acceptance);
        }
        assert!(c.require_healthy().is_ok());
    }

    #[test]
    fn degenerate_cases() {
        let g = FiniteGraph::cycle(4).unwrap();
        let a = InitialWeights::constant(&g, 1.0).unwrap();
        let mut cfg = ChainConfig::new(Target::Q { v0: 0 }, 200, 1);
        cfg.burn_in = 100;
        let c = mcmc_sample(&g, &a, 0, &cfg).unwrap();
        let q = quarter_moment(&g, &c, 1, 1);
        assert_eq!((q.value, q.std_error), (1.0, 0.0));
        let s = symmetry_check(&g, &c, 2, 2);
        assert_eq!((s.z_mean, s.z_third), (0.0, 0.0));
        cfg.thinning = 0;
        assert!(mcmc_sample(&g, &a, 0, &cfg).is_err());
    }
}
