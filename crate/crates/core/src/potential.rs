//! The approximate Green's function on the diluted lattice, the potential
//! built from it, Dirichlet forms, and the arithmetic of the bound chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, InitialWeights};
use crate::lattice::{level, min_box_size, r_edge_of, LatticeVertex, PeriodicBox};

/// Edge values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgePotential(Vec<f64>);

impl EdgePotential {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((e, p)) = values.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!("phi({e}) = {p} is outside [0, 1]")));
        }
        Ok(EdgePotential(values))
    }

    pub fn constant(n_edges: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n_edges])
    }

    pub fn value(&self, e: usize) -> f64 {
        self.0[e]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn log_level(v: LatticeVertex, r: u64) -> Result<f64> {
    Ok((level(v, r)?.max(1) as f64).ln())
}

/// `D(u, v)`: linear interpolation of `log(level ∨ 1)` along the r-edge.
pub fn approx_green_d(u: LatticeVertex, v: LatticeVertex, r: u64) -> Result<f64> {
    let pos = r_edge_of(u, v, r)?;
    let denom = (r - 1) as f64;
    let wu = pos.j_u as f64 / denom;
    let wv = pos.j_v as f64 / denom;
    Ok(wu * log_level(pos.u_prime, r)? + wv * log_level(pos.v_prime, r)?)
}

/// `D̲(v)`: the minimum of `D` over the lattice edges at `v`.
pub fn underline_d(v: LatticeVertex, r: u64) -> Result<f64> {
    level(v, r)?;
    let mut best = f64::INFINITY;
    for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
        let w = LatticeVertex(v.0 + dx, v.1 + dy);
        if w.in_lattice(r) {
            best = best.min(approx_green_d(v, w, r)?);
        }
    }
    Ok(best)
}

/// The potential `(D / D̲(ℓ)) ∧ 1` on the box, with value 1 on periodically
/// closing edges.
pub fn build_phi(ell: LatticeVertex, pbox: &PeriodicBox) -> Result<EdgePotential> {
    let r = pbox.spec.r;
    if !ell.is_crossing(r) {
        return Err(Error::InvalidParameter(format!("{ell:?} is not a crossing of rZ^2")));
    }
    let lvl = level(ell, r)?;
    if lvl < 2 {
        return Err(Error::InvalidParameter(format!(
            "level({ell:?}) = {lvl}; the potential needs level >= 2"
        )));
    }
    let need = min_box_size(ell, r)?;
    if pbox.spec.i < need {
        return Err(Error::InvalidParameter(format!(
            "box size {} is below i0 = {need} for {ell:?}",
            pbox.spec.i
        )));
    }
    let d_ell = underline_d(ell, r)?;
    let mut values = Vec::with_capacity(pbox.graph.n_edges());
    for e in 0..pbox.graph.n_edges() {
        if pbox.is_closing(e) {
            values.push(1.0);
            continue;
        }
        let (u, v) = pbox.lattice_edge(e);
        values.push((approx_green_d(u, v, r)? / d_ell).min(1.0));
    }
    EdgePotential::new(values)
}

/// `D` on every edge of the box (closing edges report the value of the
/// literal lattice edge they wrap).
pub fn box_green_values(pbox: &PeriodicBox) -> Result<Vec<f64>> {
    (0..pbox.graph.n_edges())
        .map(|e| {
            let (u, v) = pbox.lattice_edge(e);
            approx_green_d(u, v, pbox.spec.r)
        })
        .collect()
}

/// `S_φ = Σ_v ((a_v + 1)/2) max_{e,e'∋v} (φ(e) − φ(e'))²`.
pub fn dirichlet_form(graph: &FiniteGraph, a: &InitialWeights, phi: &EdgePotential) -> f64 {
    let mut total = 0.0;
    for v in 0..graph.n_vertices() {
        let (lo, hi) = graph
            .incident(v)
            .iter()
            .map(|&e| phi.value(e))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)));
        if hi > lo {
            total += (a.vertex(graph, v) + 1.0) / 2.0 * (hi - lo) * (hi - lo);
        }
    }
    total
}

/// A level that may be far beyond `u64`, kept as its logarithm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    /// `log(level)`.
    pub log: f64,
    /// The integer value when it is representable.
    pub exact: Option<u64>,
}

impl Level {
    pub fn exact(l: u64) -> Self {
        Level {
            log: (l as f64).ln(),
            exact: Some(l),
        }
    }

    pub fn from_log(log: f64) -> Self {
        if log < 43.0 {
            let l = log.exp().round();
            if (l.ln() - log).abs() <= 1e-15 * log.max(1.0) {
                return Self::exact(l as u64);
            }
        }
        Level { log, exact: None }
    }

    fn value_f64(&self) -> f64 {
        match self.exact {
            Some(l) => l as f64,
            None => self.log.exp(),
        }
    }
}

/// `α = (2a + 1)/2`.
pub fn alpha(a: f64) -> f64 {
    (2.0 * a + 1.0) / 2.0
}

/// `c = (1 + 256α/(r − 1))/2`, the midpoint of the admissible interval.
pub fn default_c(r: u64, a: f64) -> f64 {
    (1.0 + 256.0 * alpha(a) / (r - 1) as f64) / 2.0
}

/// `ξ = c(r − 1)/(256α) − 1`, without range checks.
pub fn xi(r: u64, a: f64, c: f64) -> f64 {
    c * (r - 1) as f64 / (256.0 * alpha(a)) - 1.0
}

/// Whether `(log l + 2)/log l ≤ 1/c`.
pub fn satisfies_level_threshold(log_level: f64, c: f64) -> bool {
    log_level > 0.0 && (log_level + 2.0) / log_level <= 1.0 / c
}

/// Smallest level `l >= 2` with `(log l + 2)/log l ≤ 1/c`.
///
/// Found by integer search while the answer fits comfortably in `u64`;
/// beyond that only `log l = 2c/(1 − c)` is returned.
pub fn level_threshold(c: f64) -> Result<Level> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParameter(format!("c = {c} must lie in (0, 1)")));
    }
    let t = 2.0 * c / (1.0 - c);
    if t >= 40.0 {
        return Ok(Level { log: t, exact: None });
    }
    let ok = |l: u64| satisfies_level_threshold((l as f64).ln(), c);
    let mut l = (t.exp().ceil() as u64).max(2);
    while l > 2 && ok(l - 1) {
        l -= 1;
    }
    while !ok(l) {
        l += 1;
    }
    Ok(Level::exact(l))
}

/// Checks `r ≥ 130`, `0 < a < (r − 129)/256` and `256α/(r − 1) < c < 1`.
pub fn check_regime(r: u64, a: f64, c: f64) -> Result<()> {
    if r < 130 {
        return Err(Error::InvalidParameter(format!("r = {r} is below 130")));
    }
    let amax = (r as f64 - 129.0) / 256.0;
    if !(a > 0.0 && a < amax) {
        return Err(Error::InvalidParameter(format!(
            "a = {a} is outside (0, (r - 129)/256) = (0, {amax})"
        )));
    }
    let cmin = 256.0 * alpha(a) / (r - 1) as f64;
    if !(c > cmin && c < 1.0) {
        return Err(Error::InvalidParameter(format!("c = {c} is outside ({cmin}, 1)")));
    }
    Ok(())
}

/// `(ξ, l₀)` with `l₀` given as a level; multiply by `r` for the `|ℓ|∞`
/// threshold.
pub fn xi_and_l0(r: u64, a: f64, c: f64) -> Result<(f64, Level)> {
    check_regime(r, a, c)?;
    Ok((xi(r, a, c), level_threshold(c)?))
}

const DIRECT_SUM_MAX: u64 = 2_000_000;

fn direct_level_sum(n: u64) -> f64 {
    let mut s = 0.0;
    for l in (2..=n).rev() {
        let lf = l as f64;
        let d = -(-1.0 / lf).ln_1p();
        s += (2.0 * lf - 1.0) * d * d;
    }
    s
}

/// `Σ_{l>m} l^{-k}` for `k ≥ 2` by Euler–Maclaurin.
fn zeta_tail(k: i32, m: f64) -> f64 {
    if m.is_infinite() {
        return 0.0;
    }
    let kf = k as f64;
    m.powi(1 - k) / (kf - 1.0) - m.powi(-k) / 2.0 + kf * m.powi(-k - 1) / 12.0
}

/// `H_m − log m` up to the constant.
fn harmonic_correction(m: f64) -> f64 {
    if m.is_infinite() {
        return 0.0;
    }
    1.0 / (2.0 * m) - 1.0 / (12.0 * m * m) + 1.0 / (120.0 * m.powi(4))
}

/// `Σ_{l=2}^{L} (2l − 1) log²(l/(l − 1))`.
///
/// Summed directly up to two million; the remainder uses the expansion
/// `2/l + 1/l² + 5/(6l³) + 3/(4l⁴)` of the summand.
pub fn level_sum(level: Level) -> f64 {
    if let Some(l) = level.exact {
        if l <= DIRECT_SUM_MAX {
            return direct_level_sum(l);
        }
    }
    let n = DIRECT_SUM_MAX as f64;
    let big = level.value_f64();
    let harmonic = (level.log - n.ln()) + harmonic_correction(big) - harmonic_correction(n);
    let tail = |k: i32| zeta_tail(k, n) - zeta_tail(k, big);
    direct_level_sum(DIRECT_SUM_MAX) + 2.0 * harmonic + tail(2) + 5.0 / 6.0 * tail(3) + 0.75 * tail(4)
}

/// Exact `S_φ` on a large enough box when `level(ℓ) = L ≥ 2` and the weights
/// are constant: `4α/((r − 1) log² L) Σ_{l=2}^{L} (2l − 1) log²(l/(l − 1))`.
pub fn s_phi_box(r: u64, a: f64, level: Level) -> Result<f64> {
    if !(level.log > 0.0) {
        return Err(Error::InvalidParameter("level(ell) must be at least 2".into()));
    }
    if r < 2 {
        return Err(Error::InvalidParameter(format!("r = {r} is below 2")));
    }
    Ok(4.0 * alpha(a) / ((r - 1) as f64 * level.log * level.log) * level_sum(level))
}

/// `8α(log L + 2)/((r − 1) log² L)`.
pub fn s_phi_level_bound(r: u64, a: f64, level: Level) -> f64 {
    8.0 * alpha(a) * (level.log + 2.0) / ((r - 1) as f64 * level.log * level.log)
}

/// `1/(32(1 + ξ) log L)`.
pub fn s_phi_target(xi: f64, level: Level) -> f64 {
    1.0 / (32.0 * (1.0 + xi) * level.log)
}

/// `γ* = −1/(4 S_φ)`.
pub fn optimal_gamma(s_phi: f64) -> Result<f64> {
    if !(s_phi > 0.0) {
        return Err(Error::InvalidParameter(format!("S_phi = {s_phi} must be positive")));
    }
    Ok(-1.0 / (4.0 * s_phi))
}

/// `exp(−1/(32 S_φ))`, the minimum over γ of `exp(γ/4 + S_φ γ²/2)`.
pub fn moment_bound(s_phi: f64) -> Result<f64> {
    let g = optimal_gamma(s_phi)?;
    Ok((g / 4.0 + s_phi * g * g / 2.0).exp())
}

/// `8 l^{−ξ}`: bound on hitting the shell at level `l` before returning.
pub fn boundary_bound(l: f64, xi: f64) -> f64 {
    8.0 * l.powf(-xi)
}

/// One inequality of the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub r: u64,
    pub a: f64,
    pub c: f64,
    /// `|ℓ|∞ / r`.
    pub ell_level: Level,
    pub alpha: f64,
    pub xi: f64,
    pub l0: Level,
    pub log_l0_norm: f64,
    pub s_phi: f64,
    pub s_phi_bound: f64,
    pub s_phi_target: f64,
    pub moment_bound: f64,
    pub log_moment_bound: f64,
    pub hitting_bound: f64,
    pub log_hitting_bound: f64,
    pub boundary_bound_level1: f64,
    pub in_regime: bool,
    pub links: Vec<Link>,
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub fn all_links_hold(&self) -> bool {
        self.links.iter().all(|l| l.holds)
    }

    pub fn failing_link(&self) -> Option<&Link> {
        self.links.iter().find(|l| !l.holds)
    }
}

/// Relative slack for the link between the level bound and the target,
/// which is an equality at the threshold level.
pub const THRESHOLD_RTOL: f64 = 1e-12;

/// Evaluates the bound chain for `ℓ` at level `ell_level` on a box of size
/// `i` (when given). Outside the regime of `(r, a, c)` this fails unless
/// `force` is set; a level below `l₀` only produces a warning.
pub fn bound_chain(
    r: u64,
    a: f64,
    c: Option<f64>,
    ell_level: Level,
    i: Option<u64>,
    force: bool,
) -> Result<BoundReport> {
    let c = c.unwrap_or_else(|| default_c(r, a));
    let mut warnings = Vec::new();
    let in_regime = match check_regime(r, a, c) {
        Ok(()) => true,
        Err(e) if force => {
            warnings.push(format!("outside the proven regime: {e}"));
            false
        }
        Err(e) => return Err(e),
    };
    if !(a > 0.0) || r < 2 {
        return Err(Error::InvalidParameter("need a > 0 and r >= 2".into()));
    }
    let l0 = level_threshold(c.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))?;
    let xi = xi(r, a, c);
    let s_phi = s_phi_box(r, a, ell_level)?;
    let s_bound = s_phi_level_bound(r, a, ell_level);
    let s_target = s_phi_target(xi, ell_level);
    let log_moment = -1.0 / (32.0 * s_phi);
    let log_hitting = -(1.0 + xi) * ell_level.log;

    let below_l0 = match (ell_level.exact, l0.exact) {
        (Some(l), Some(t)) => l < t,
        _ => ell_level.log < l0.log * (1.0 - THRESHOLD_RTOL),
    };
    if below_l0 {
        warnings.push(format!(
            "|ell|/r = exp({:.6}) is below the threshold l0 = exp({:.6}); the chain is not guaranteed",
            ell_level.log, l0.log
        ));
    }
    let mut links = vec![
        Link {
            name: "S_phi <= level bound".into(),
            lhs: s_phi,
            rhs: s_bound,
            holds: s_phi <= s_bound,
        },
        Link {
            name: "level bound <= target".into(),
            lhs: s_bound,
            rhs: s_target,
            holds: s_bound <= s_target * (1.0 + THRESHOLD_RTOL),
        },
        Link {
            name: "S_phi <= target".into(),
            lhs: s_phi,
            rhs: s_target,
            holds: s_phi <= s_target * (1.0 + THRESHOLD_RTOL),
        },
        Link {
            name: "log moment bound <= log hitting bound".into(),
            lhs: log_moment,
            rhs: log_hitting,
            holds: log_moment <= log_hitting + THRESHOLD_RTOL * log_hitting.abs(),
        },
    ];
    if let Some(i) = i {
        let need = 2 * (ell_level.exact.unwrap_or(u64::MAX / 4) + 1);
        links.push(Link {
            name: "box size >= i0".into(),
            lhs: i as f64,
            rhs: need as f64,
            holds: i >= need,
        });
    }
    Ok(BoundReport {
        r,
        a,
        c,
        ell_level,
        alpha: alpha(a),
        xi,
        l0,
        log_l0_norm: l0.log + (r as f64).ln(),
        s_phi,
        s_phi_bound: s_bound,
        s_phi_target: s_target,
        moment_bound: log_moment.exp(),
        log_moment_bound: log_moment,
        hitting_bound: log_hitting.exp(),
        log_hitting_bound: log_hitting,
        boundary_bound_level1: boundary_bound(1.0, xi),
        in_regime,
        links,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_periodic_box, PeriodicBoxSpec};
    use approx::assert_relative_eq;

    #[test]
    fn green_function_examples() {
        let o = LatticeVertex::ORIGIN;
        assert_eq!(approx_green_d(o, LatticeVertex(1, 0), 4).unwrap(), 0.0);
        assert_eq!(approx_green_d(LatticeVertex(0, -1), o, 4).unwrap(), 0.0);
        let d = approx_green_d(LatticeVertex(4, 0), LatticeVertex(5, 0), 3).unwrap();
        assert_relative_eq!(d, 0.5 * 2f64.ln(), epsilon = 1e-15);
        let r = 5;
        let d = approx_green_d(LatticeVertex(9, 0), LatticeVertex(10, 0), r).unwrap();
        assert_eq!(d, 2f64.ln());
        assert_eq!(approx_green_d(LatticeVertex(10, 0), LatticeVertex(9, 0), r).unwrap(), d);
    }

    #[test]
    fn underline_d_examples() {
        assert_eq!(underline_d(LatticeVertex::ORIGIN, 4).unwrap(), 0.0);
        assert_eq!(underline_d(LatticeVertex(8, 0), 4).unwrap(), 2f64.ln());
        assert_eq!(underline_d(LatticeVertex(4, 0), 4).unwrap(), 0.0);
        assert!(underline_d(LatticeVertex(1, 1), 4).is_err());
    }

    #[test]
    fn green_function_is_constant_at_crossings() {
        for r in 2..6u64 {
            let ri = r as i64;
            for x in -4..=4 {
                for y in -4..=4 {
                    let v = LatticeVertex(x * ri, y * ri);
                    let ds: Vec<f64> = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                        .iter()
                        .map(|&(dx, dy)| approx_green_d(v, LatticeVertex(v.0 + dx, v.1 + dy), r).unwrap())
                        .collect();
                    assert!(ds.iter().all(|&d| d == ds[0]), "{v:?}: {ds:?}");
                    assert_eq!(ds[0], (level(v, r).unwrap().max(1) as f64).ln());
                }
            }
        }
    }

    #[test]
    fn phi_boundary_values() {
        let ell = LatticeVertex(8, 0);
        let pbox = build_periodic_box(PeriodicBoxSpec::new(4, 6).unwrap()).unwrap();
        let phi = build_phi(ell, &pbox).unwrap();
        let g = &pbox.graph;
        for &e in g.incident(pbox.origin()) {
            assert_eq!(phi.value(e), 0.0);
        }
        for &e in g.incident(pbox.vertex_index(ell).unwrap()) {
            assert_eq!(phi.value(e), 1.0);
        }
        for e in 0..g.n_edges() {
            let (u, v) = g.endpoints(e);
            if pbox.level(u) > 2 && pbox.level(v) > 2 {
                assert_eq!(phi.value(e), 1.0);
            }
        }
        assert!(build_phi(LatticeVertex(4, 0), &pbox).is_err());
        let small = build_periodic_box(PeriodicBoxSpec::new(4, 4).unwrap()).unwrap();
        assert!(build_phi(ell, &small).is_err());
    }

    #[test]
    fn square_dirichlet_form() {
        let g = FiniteGraph::cycle(4).unwrap();
        for a in [0.5, 1.0, 3.0] {
            let w = InitialWeights::constant(&g, a).unwrap();
            let phi = EdgePotential::new(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
            assert_relative_eq!(dirichlet_form(&g, &w, &phi), 2.0 * a + 1.0, epsilon = 1e-14);
            let flat = EdgePotential::constant(4, 0.3).unwrap();
            assert_eq!(dirichlet_form(&g, &w, &flat), 0.0);
        }
    }

    #[test]
    fn box_dirichlet_form_matches_level_formula() {
        for (r, lvl) in [(3u64, 2u64), (3, 3), (4, 2), (5, 4), (2, 3)] {
            let ell = LatticeVertex((r * lvl) as i64, 0);
            let i = min_box_size(ell, r).unwrap();
            let pbox = build_periodic_box(PeriodicBoxSpec::new(r, i).unwrap()).unwrap();
            let phi = build_phi(ell, &pbox).unwrap();
            let a = 0.7;
            let w = InitialWeights::constant(&pbox.graph, a).unwrap();
            let direct = dirichlet_form(&pbox.graph, &w, &phi);
            let closed = s_phi_box(r, a, Level::exact(lvl)).unwrap();
            assert_relative_eq!(direct, closed, max_relative = 1e-12);
        }
    }

    #[test]
    fn level_sum_tail_matches_direct_sum() {
        let n = 3 * DIRECT_SUM_MAX;
        let direct = direct_level_sum(n);
        let mixed = level_sum(Level {
            log: (n as f64).ln(),
            exact: None,
        });
        assert_relative_eq!(direct, mixed, max_relative = 1e-13);
    }

    #[test]
    fn xi_examples() {
        let a = 1.0 / 512.0;
        assert_relative_eq!(alpha(a), 257.0 / 512.0);
        let (xi, _) = xi_and_l0(130, a, 0.998).unwrap();
        assert_relative_eq!(xi, 0.998 * 129.0 / 256.0 / (257.0 / 512.0) - 1.0, epsilon = 1e-15);
        assert_relative_eq!(xi, 0.0018832684824902, epsilon = 1e-12);
        assert!(xi_and_l0(130, 0.01, 0.998).is_err());
        assert!(xi_and_l0(129, 0.001, 0.998).is_err());
        assert!(xi_and_l0(130, a, 0.5).is_err());
    }

    #[test]
    fn level_threshold_is_minimal() {
        for c in [0.3, 0.5, 0.6, 0.75, 0.9] {
            let l0 = level_threshold(c).unwrap();
            let l = l0.exact.unwrap();
            assert!(satisfies_level_threshold((l as f64).ln(), c));
            if l > 2 {
                assert!(!satisfies_level_threshold(((l - 1) as f64).ln(), c));
            }
        }
        assert!(level_threshold(0.99).unwrap().exact.is_none());
    }

    #[test]
    fn gamma_and_moment_bound() {
        assert_eq!(optimal_gamma(1.0).unwrap(), -0.25);
        assert_relative_eq!(moment_bound(1.0).unwrap(), (-1.0f64 / 32.0).exp(), epsilon = 1e-15);
        assert_relative_eq!(moment_bound(3.0).unwrap(), 0.98963, epsilon = 1e-5);
        assert!(moment_bound(0.0).is_err());
        assert!(moment_bound(1e6).unwrap() > 0.999_999);
        assert!(moment_bound(1e-3).unwrap() < 1e-10);
        assert_eq!(boundary_bound(1.0, 0.3), 8.0);
    }

    #[test]
    fn chain_holds_at_threshold() {
        for r in [130u64, 200, 500] {
            let amax = (r as f64 - 129.0) / 256.0;
            for frac in [0.1, 0.5, 0.9] {
                let a = amax * frac;
                let c = default_c(r, a);
                let l0 = level_threshold(c).unwrap();
                let rep = bound_chain(r, a, None, l0, None, false).unwrap();
                assert!(rep.all_links_hold(), "{rep:?}");
                assert!(rep.warnings.is_empty());
            }
        }
    }

    #[test]
    fn chain_below_threshold_warns() {
        let rep = bound_chain(130, 1.0 / 512.0, Some(0.998), Level::exact(10), None, false).unwrap();
        assert!(!rep.warnings.is_empty());
        assert!(!rep.links[1].holds);
        assert!(bound_chain(20, 0.5, None, Level::exact(10), None, false).is_err());
        let forced = bound_chain(20, 0.5, None, Level::exact(10), None, true).unwrap();
        assert!(!forced.in_regime);
        assert!(forced.links[0].holds);
    }
}
