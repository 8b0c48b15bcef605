//! The r-diluted square lattice: levels, r-edges, periodic boxes and finite
//! windows.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Automorphism, FiniteGraph};

/// Integer point of Z².
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeVertex(pub i64, pub i64);

impl LatticeVertex {
    pub const ORIGIN: LatticeVertex = LatticeVertex(0, 0);

    pub fn norm_inf(self) -> u64 {
        self.0.unsigned_abs().max(self.1.unsigned_abs())
    }

    /// Member of the diluted lattice: some coordinate is a multiple of `r`.
    pub fn in_lattice(self, r: u64) -> bool {
        let r = r as i64;
        self.0.rem_euclid(r) == 0 || self.1.rem_euclid(r) == 0
    }

    /// Member of the crossing set rZ².
    pub fn is_crossing(self, r: u64) -> bool {
        let r = r as i64;
        self.0.rem_euclid(r) == 0 && self.1.rem_euclid(r) == 0
    }

    fn add(self, dx: i64, dy: i64) -> Self {
        LatticeVertex(self.0 + dx, self.1 + dy)
    }
}

fn check_r(r: u64) -> Result<()> {
    if r < 2 {
        Err(Error::InvalidParameter(format!(
            "dilution factor r must be >= 2, got {r}"
        )))
    } else {
        Ok(())
    }
}

/// `⌈|v|∞ / r⌉`.
pub fn level(v: LatticeVertex, r: u64) -> Result<u64> {
    check_r(r)?;
    if !v.in_lattice(r) {
        return Err(Error::NotInLattice((v.0, v.1)));
    }
    Ok(v.norm_inf().div_ceil(r))
}

/// Position of a unit edge inside its r-edge.
///
/// `u_prime` is the crossing on the side of `u`; the endpoints are recovered
/// as `u = ((j_u + 1) u' + j_v v') / r` and `v = ((j_v + 1) v' + j_u u') / r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct REdgePosition {
    pub u_prime: LatticeVertex,
    pub v_prime: LatticeVertex,
    pub j_u: u64,
    pub j_v: u64,
}

impl REdgePosition {
    /// Reconstructs `(u, v)` from the crossing representation.
    pub fn endpoints(&self, r: u64) -> (LatticeVertex, LatticeVertex) {
        let r = r as i64;
        let (ju, jv) = (self.j_u as i64, self.j_v as i64);
        let (a, b) = (self.u_prime, self.v_prime);
        let u = LatticeVertex(((ju + 1) * a.0 + jv * b.0) / r, ((ju + 1) * a.1 + jv * b.1) / r);
        let v = LatticeVertex(((jv + 1) * b.0 + ju * a.0) / r, ((jv + 1) * b.1 + ju * a.1) / r);
        (u, v)
    }
}

/// Locates the unit edge `{u, v}` of the diluted lattice inside its r-edge.
pub fn r_edge_of(u: LatticeVertex, v: LatticeVertex, r: u64) -> Result<REdgePosition> {
    check_r(r)?;
    for w in [u, v] {
        if !w.in_lattice(r) {
            return Err(Error::NotInLattice((w.0, w.1)));
        }
    }
    let (dx, dy) = (v.0 - u.0, v.1 - u.1);
    if dx.abs() + dy.abs() != 1 {
        return Err(Error::InvalidParameter(format!(
            "{u:?} and {v:?} are not lattice neighbours"
        )));
    }
    let ri = r as i64;
    // Coordinate along the edge, and the crossing below the lower endpoint.
    let (lo, step) = if dx != 0 {
        (u.0.min(v.0), (1, 0))
    } else {
        (u.1.min(v.1), (0, 1))
    };
    let base = lo.div_euclid(ri) * ri;
    let k = (lo - base) as u64;
    let lower = if dx != 0 {
        LatticeVertex(base, u.1)
    } else {
        LatticeVertex(u.0, base)
    };
    let upper = lower.add(step.0 * ri, step.1 * ri);
    let u_is_lower = (dx + dy) > 0;
    Ok(if u_is_lower {
        REdgePosition {
            u_prime: lower,
            v_prime: upper,
            j_u: r - 1 - k,
            j_v: k,
        }
    } else {
        REdgePosition {
            u_prime: upper,
            v_prime: lower,
            j_u: k,
            j_v: r - 1 - k,
        }
    })
}

/// Parameters of a periodic box: dilution `r >= 2`, box size `i >= 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicBoxSpec {
    pub r: u64,
    pub i: u64,
}

impl PeriodicBoxSpec {
    pub fn new(r: u64, i: u64) -> Result<Self> {
        check_r(r)?;
        if i <= 1 {
            return Err(Error::InvalidParameter(format!("box size i must be > 1, got {i}")));
        }
        Ok(PeriodicBoxSpec { r, i })
    }

    /// Upper bound of the half-open representative range, `r ⌊i/2⌋`.
    fn hi(&self) -> i64 {
        (self.r * (self.i / 2)) as i64
    }

    fn period(&self) -> i64 {
        (self.r * self.i) as i64
    }

    /// Canonical representative of `v + riZ²`.
    pub fn canonical(&self, v: LatticeVertex) -> LatticeVertex {
        let (hi, p) = (self.hi(), self.period());
        let reduce = |c: i64| hi - (hi - c).rem_euclid(p);
        LatticeVertex(reduce(v.0), reduce(v.1))
    }
}

/// Smallest box size for which `ell` and its four neighbours are
/// representatives and the whole shell one level beyond `ell` fits.
pub fn min_box_size(ell: LatticeVertex, r: u64) -> Result<u64> {
    check_r(r)?;
    if !ell.is_crossing(r) {
        return Err(Error::InvalidParameter(format!("{ell:?} is not a crossing of rZ²")));
    }
    Ok(2 * (ell.norm_inf() / r + 1))
}

/// A periodic box with its lattice bookkeeping.
#[derive(Clone, Debug)]
pub struct PeriodicBox {
    pub spec: PeriodicBoxSpec,
    pub graph: FiniteGraph,
    coords: Vec<LatticeVertex>,
    index: HashMap<LatticeVertex, usize>,
    closing: Vec<bool>,
    r_edge_ids: Vec<usize>,
    /// Per edge: literal lattice coordinates `(tail, tail + step)` before wrapping.
    unwrapped: Vec<(LatticeVertex, LatticeVertex)>,
}

/// Builds the periodic box with vertices in row-major order of their
/// representatives (`x2` outer, `x1` inner).
pub fn build_periodic_box(spec: PeriodicBoxSpec) -> Result<PeriodicBox> {
    let spec = PeriodicBoxSpec::new(spec.r, spec.i)?;
    let (hi, p, r) = (spec.hi(), spec.period(), spec.r);
    let mut coords = Vec::with_capacity((spec.i * spec.i * (2 * r - 1)) as usize);
    for x2 in hi - p + 1..=hi {
        for x1 in hi - p + 1..=hi {
            let v = LatticeVertex(x1, x2);
            if v.in_lattice(r) {
                coords.push(v);
            }
        }
    }
    let index: HashMap<_, _> = coords.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let crossing_rank: HashMap<LatticeVertex, usize> = coords
        .iter()
        .filter(|v| v.is_crossing(r))
        .enumerate()
        .map(|(k, &v)| (v, k))
        .collect();

    let ri = r as i64;
    let mut edges = Vec::new();
    let mut closing = Vec::new();
    let mut r_edge_ids = Vec::new();
    let mut unwrapped = Vec::new();
    for (k, &v) in coords.iter().enumerate() {
        for (dir, (dx, dy)) in [(1i64, 0i64), (0, 1)].into_iter().enumerate() {
            // Moving along x needs x2 on a lattice line, and vice versa.
            let on_line = if dir == 0 {
                v.1.rem_euclid(ri) == 0
            } else {
                v.0.rem_euclid(ri) == 0
            };
            if !on_line {
                continue;
            }
            let literal = v.add(dx, dy);
            let w = spec.canonical(literal);
            edges.push((k, index[&w]));
            closing.push(w != literal);
            let base = if dir == 0 {
                LatticeVertex(v.0.div_euclid(ri) * ri, v.1)
            } else {
                LatticeVertex(v.0, v.1.div_euclid(ri) * ri)
            };
            r_edge_ids.push(2 * crossing_rank[&spec.canonical(base)] + dir);
            unwrapped.push((v, literal));
        }
    }
    let labels = coords.iter().map(|v| format!("({},{})", v.0, v.1)).collect();
    let graph = FiniteGraph::with_labels(labels, edges)?;
    Ok(PeriodicBox {
        spec,
        graph,
        coords,
        index,
        closing,
        r_edge_ids,
        unwrapped,
    })
}

impl PeriodicBox {
    pub fn coords(&self, v: usize) -> LatticeVertex {
        self.coords[v]
    }

    /// Index of the class of `v` (any representative accepted).
    pub fn vertex_index(&self, v: LatticeVertex) -> Option<usize> {
        self.index.get(&self.spec.canonical(v)).copied()
    }

    pub fn origin(&self) -> usize {
        self.index[&LatticeVertex::ORIGIN]
    }

    /// The reference edge `{0, (1, 0)}`.
    pub fn reference_edge(&self) -> usize {
        let o = self.origin();
        let e = self
            .vertex_index(LatticeVertex(1, 0))
            .expect("(1,0) is a lattice point");
        self.graph.find_edge(o, e).expect("origin is joined to (1,0)")
    }

    pub fn is_closing(&self, e: usize) -> bool {
        self.closing[e]
    }

    pub fn in_crossings(&self, v: usize) -> bool {
        self.coords[v].is_crossing(self.spec.r)
    }

    pub fn r_edge_id(&self, e: usize) -> usize {
        self.r_edge_ids[e]
    }

    pub fn level(&self, v: usize) -> u64 {
        level(self.coords[v], self.spec.r).expect("box vertices lie in the lattice")
    }

    /// Lattice endpoints of a non-closing edge, in graph endpoint order.
    pub fn lattice_edge(&self, e: usize) -> (LatticeVertex, LatticeVertex) {
        self.unwrapped[e]
    }

    /// The reflection `v ↦ ell - v` taken modulo the box.
    pub fn reflection_automorphism(&self, ell: LatticeVertex) -> Result<Automorphism> {
        let ell = self.spec.canonical(ell);
        if !ell.is_crossing(self.spec.r) {
            return Err(Error::InvalidParameter(format!(
                "{ell:?} is not a four-way crossing of the box"
            )));
        }
        let image = self
            .coords
            .iter()
            .map(|&v| self.index[&self.spec.canonical(LatticeVertex(ell.0 - v.0, ell.1 - v.1))])
            .collect();
        Ok(Automorphism(image))
    }

    /// `edge_id,u,v,periodic_closing,r_edge_id`.
    pub fn edges_csv(&self) -> String {
        let mut out = String::from("edge_id,u,v,periodic_closing,r_edge_id\n");
        for (e, &(u, v)) in self.graph.edges().iter().enumerate() {
            let _ = writeln!(out, "{e},{u},{v},{},{}", self.closing[e], self.r_edge_ids[e]);
        }
        out
    }

    /// `vertex_id,x1,x2,level,in_L`.
    pub fn vertices_csv(&self) -> String {
        let mut out = String::from("vertex_id,x1,x2,level,in_L\n");
        for (k, v) in self.coords.iter().enumerate() {
            let _ = writeln!(out, "{k},{},{},{},{}", v.0, v.1, self.level(k), self.in_crossings(k));
        }
        out
    }
}

/// The diluted lattice restricted to `|v|∞ <= extent`.
#[derive(Clone, Debug)]
pub struct WindowGraph {
    pub r: u64,
    pub extent: u64,
    pub graph: FiniteGraph,
    coords: Vec<LatticeVertex>,
    index: HashMap<LatticeVertex, usize>,
}

pub fn build_window_graph(r: u64, extent: u64) -> Result<WindowGraph> {
    check_r(r)?;
    if extent < r {
        return Err(Error::InvalidParameter(format!(
            "window extent {extent} must be at least r = {r}"
        )));
    }
    let m = extent as i64;
    let mut coords = Vec::new();
    for x2 in -m..=m {
        for x1 in -m..=m {
            let v = LatticeVertex(x1, x2);
            if v.in_lattice(r) {
                coords.push(v);
            }
        }
    }
    let index: HashMap<_, _> = coords.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut edges = Vec::new();
    for (k, &v) in coords.iter().enumerate() {
        for w in [v.add(1, 0), v.add(0, 1)] {
            if let Some(&j) = index.get(&w) {
                // Both endpoints in the lattice and at distance one.
                if v.1 == w.1 && v.1.rem_euclid(r as i64) != 0 {
                    continue;
                }
                if v.0 == w.0 && v.0.rem_euclid(r as i64) != 0 {
                    continue;
                }
                edges.push((k, j));
            }
        }
    }
    let labels = coords.iter().map(|v| format!("({},{})", v.0, v.1)).collect();
    let graph = FiniteGraph::with_labels(labels, edges)?;
    Ok(WindowGraph {
        r,
        extent,
        graph,
        coords,
        index,
    })
}

impl WindowGraph {
    pub fn coords(&self, v: usize) -> LatticeVertex {
        self.coords[v]
    }

    pub fn vertex_index(&self, v: LatticeVertex) -> Option<usize> {
        self.index.get(&v).copied()
    }

    /// True when `v` sits on the window boundary, where the lattice
    /// continues beyond the materialized graph.
    pub fn on_boundary(&self, v: usize) -> bool {
        self.coords[v].norm_inf() >= self.extent
    }

    /// The window with doubled extent.
    pub fn grown(&self) -> Result<WindowGraph> {
        build_window_graph(self.r, self.extent * 2)
    }
}

/// Crossings of rZ² on the square shell `|v|∞ = r l`, by enumeration.
pub fn enumerate_shell_crossings(l: u64) -> usize {
    let l = l as i64;
    let mut count = 0;
    for x in -l..=l {
        for y in -l..=l {
            if x.abs().max(y.abs()) == l {
                count += 1;
            }
        }
    }
    count
}

/// r-edges joining a crossing at level `l` to one at level `l - 1`, by
/// enumeration on the crossing grid.
pub fn enumerate_r_edges_between_levels(l: u64) -> usize {
    let l = l as i64;
    let lvl = |x: i64, y: i64| x.abs().max(y.abs());
    let mut count = 0;
    for x in -l..=l {
        for y in -l..=l {
            if lvl(x, y) != l {
                continue;
            }
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if lvl(x + dx, y + dy) == l - 1 {
                    count += 1;
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels() {
        assert_eq!(level(LatticeVertex(0, 0), 4).unwrap(), 0);
        assert_eq!(level(LatticeVertex(4, 0), 4).unwrap(), 1);
        assert_eq!(level(LatticeVertex(1, 0), 4).unwrap(), 1);
        assert_eq!(level(LatticeVertex(-9, 8), 4).unwrap(), 3);
        assert!(matches!(level(LatticeVertex(1, 1), 4), Err(Error::NotInLattice(_))));
        assert!(level(LatticeVertex(0, 0), 1).is_err());
    }

    #[test]
    fn crossing_levels_are_exact_ratios() {
        for x in -5i64..=5 {
            for y in -5i64..=5 {
                let v = LatticeVertex(3 * x, 3 * y);
                assert_eq!(level(v, 3).unwrap(), v.norm_inf() / 3);
            }
        }
    }

    #[test]
    fn r_edge_examples() {
        let p = r_edge_of(LatticeVertex(4, 0), LatticeVertex(5, 0), 4).unwrap();
        assert_eq!(p.u_prime, LatticeVertex(4, 0));
        assert_eq!(p.v_prime, LatticeVertex(8, 0));
        assert_eq!((p.j_u, p.j_v), (3, 0));

        let p = r_edge_of(LatticeVertex(7, 0), LatticeVertex(8, 0), 4).unwrap();
        assert_eq!(p.v_prime, LatticeVertex(8, 0));
        assert_eq!(p.j_v, 3);

        let p = r_edge_of(LatticeVertex(0, 1), LatticeVertex(0, 2), 4).unwrap();
        assert_eq!(p.u_prime, LatticeVertex(0, 0));
        assert_eq!(p.v_prime, LatticeVertex(0, 4));
    }

    #[test]
    fn r_edge_rejects_non_edges() {
        assert!(r_edge_of(LatticeVertex(1, 1), LatticeVertex(2, 1), 4).is_err());
        assert!(r_edge_of(LatticeVertex(0, 0), LatticeVertex(0, 2), 4).is_err());
    }

    #[test]
    fn box_counts_r4_i4() {
        let b = build_periodic_box(PeriodicBoxSpec::new(4, 4).unwrap()).unwrap();
        assert_eq!(b.graph.n_vertices(), 112);
        assert_eq!(b.graph.n_edges(), 128);
        let deg4 = (0..112).filter(|&v| b.graph.degree(v) == 4).count();
        let deg2 = (0..112).filter(|&v| b.graph.degree(v) == 2).count();
        assert_eq!((deg4, deg2), (16, 96));
        for v in 0..112 {
            assert_eq!(b.graph.degree(v) == 4, b.in_crossings(v));
        }
    }

    #[test]
    fn box_rejects_bad_specs() {
        assert!(PeriodicBoxSpec::new(4, 1).is_err());
        assert!(PeriodicBoxSpec::new(1, 4).is_err());
    }

    #[test]
    fn small_box_is_connected_and_canonical() {
        let spec = PeriodicBoxSpec::new(2, 2).unwrap();
        let b = build_periodic_box(spec).unwrap();
        assert_eq!(b.graph.n_vertices(), 12);
        for v in 0..b.graph.n_vertices() {
            assert_eq!(spec.canonical(b.coords(v)), b.coords(v));
        }
        // A periodically closing edge.
        let spec = PeriodicBoxSpec::new(4, 4).unwrap();
        let b = build_periodic_box(spec).unwrap();
        let u = b.vertex_index(LatticeVertex(8, 0)).unwrap();
        let v = b.vertex_index(LatticeVertex(8 - 16 + 1, 0)).unwrap();
        let e = b.graph.find_edge(u, v).unwrap();
        assert!(b.is_closing(e));
        assert!(!b.is_closing(b.reference_edge()));
    }

    #[test]
    fn window_examples() {
        let w = build_window_graph(4, 4).unwrap();
        // Enumerate lattice points directly.
        let mut crossings = 0;
        let mut interior = 0;
        for x in -4i64..=4 {
            for y in -4i64..=4 {
                let v = LatticeVertex(x, y);
                if v.is_crossing(4) {
                    crossings += 1;
                } else if v.in_lattice(4) {
                    interior += 1;
                }
            }
        }
        assert_eq!((crossings, interior), (9, 36));
        assert_eq!(w.graph.n_vertices(), crossings + interior);
        assert!(w.vertex_index(LatticeVertex(1, 1)).is_none());

        let w = build_window_graph(2, 2).unwrap();
        let o = w.vertex_index(LatticeVertex::ORIGIN).unwrap();
        assert_eq!(w.graph.degree(o), 4);
        assert!(build_window_graph(4, 3).is_err());
    }

    #[test]
    fn reflection_is_an_involution() {
        let b = build_periodic_box(PeriodicBoxSpec::new(4, 4).unwrap()).unwrap();
        let f = b.reflection_automorphism(LatticeVertex(4, 0)).unwrap();
        let o = b.origin();
        let ell = b.vertex_index(LatticeVertex(4, 0)).unwrap();
        assert_eq!(f.apply(o), ell);
        assert_eq!(f.apply(ell), o);
        let one = b.vertex_index(LatticeVertex(1, 0)).unwrap();
        assert_eq!(b.coords(f.apply(one)), LatticeVertex(3, 0));
        assert!(f.is_involution());
        assert!(b.reflection_automorphism(LatticeVertex(1, 0)).is_err());
    }

    #[test]
    fn min_box_size_keeps_neighbours() {
        for r in 2..6u64 {
            for l in 1..5u64 {
                let ell = LatticeVertex((r * l) as i64, -((r * l) as i64));
                let i = min_box_size(ell, r).unwrap();
                let b = build_periodic_box(PeriodicBoxSpec::new(r, i).unwrap()).unwrap();
                let spec = b.spec;
                assert_eq!(spec.canonical(ell), ell);
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let w = ell.add(dx, dy);
                    assert_eq!(spec.canonical(w), w, "neighbour {w:?} wraps for r={r}, l={l}");
                }
            }
        }
    }

    #[test]
    fn shell_counts() {
        for l in 1..=10 {
            assert_eq!(enumerate_shell_crossings(l), 8 * l as usize);
            assert_eq!(enumerate_r_edges_between_levels(l), 4 * (2 * l as usize - 1));
        }
    }

    #[test]
    fn csv_headers() {
        let b = build_periodic_box(PeriodicBoxSpec::new(2, 2).unwrap()).unwrap();
        assert!(b.edges_csv().starts_with("edge_id,u,v,periodic_closing,r_edge_id\n"));
        assert!(b.vertices_csv().starts_with("vertex_id,x1,x2,level,in_L\n"));
        assert_eq!(b.edges_csv().lines().count(), 1 + b.graph.n_edges());
    }
}
