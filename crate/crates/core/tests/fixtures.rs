//! Archived quadrature values. `cargo test --test fixtures -- --ignored`
//! regenerates the archive; the regular test recomputes every entry and
//! compares it with the stored one.

use std::path::PathBuf;

use errw_core::acceptance::SymmetricInstance;
use errw_core::io::{graph_hash, load_fixtures, save_fixtures, Fixture};
use errw_core::measure::LogDensity;
use errw_core::quadrature::{log_normalizer, mixture_check, QuadratureSettings};
use errw_core::{FiniteGraph, InitialWeights};

fn archive() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/quadrature.json")
}

fn compute() -> Vec<Fixture> {
    let s = QuadratureSettings::default();
    let mut out = Vec::new();

    let sq = SymmetricInstance::square();
    let hash = graph_hash(&sq.graph, &sq.a);
    let (m, err) = sq.quadrature_quarter_moment(&s).unwrap();
    out.push(Fixture {
        graph_hash: hash.clone(),
        quantity: "quarter_moment_v0=0_v1=2_e0=0".into(),
        value: m,
        error: err,
    });
    for (v, e0) in [(0, 0), (0, 1), (2, 1)] {
        let q = LogDensity::q(&sq.graph, &sq.a, v).unwrap();
        let (lz, rel) = log_normalizer(&sq.graph, &q, e0, &s).unwrap();
        out.push(Fixture {
            graph_hash: hash.clone(),
            quantity: format!("log_z_v0={v}_e0={e0}"),
            value: lz,
            error: rel,
        });
    }

    let t = FiniteGraph::triangle();
    let a = InitialWeights::constant(&t, 1.0).unwrap();
    let c = mixture_check(&t, &a, 0, 0, &[0, 1, 2], &s).unwrap();
    out.push(Fixture {
        graph_hash: graph_hash(&t, &a),
        quantity: "mixture_path_0_1_2".into(),
        value: c.rhs,
        error: c.quadrature_error,
    });
    out
}

#[test]
#[ignore]
fn regenerate() {
    save_fixtures(&archive(), &compute()).unwrap();
}

#[test]
fn archive_matches_live_oracle() {
    let stored = load_fixtures(&archive()).unwrap();
    let live = compute();
    assert_eq!(stored.len(), live.len());
    for (s, l) in stored.iter().zip(&live) {
        assert_eq!((&s.graph_hash, &s.quantity), (&l.graph_hash, &l.quantity));
        assert!((s.value - l.value).abs() <= 1e-12 * l.value.abs(), "{s:?} vs {l:?}");
    }
}

#[test]
fn archived_values_are_consistent() {
    let f = load_fixtures(&archive()).unwrap();
    let get = |q: &str| f.iter().find(|x| x.quantity == q).unwrap();
    // The normalizer depends on neither the reference edge nor, by the
    // swap symmetry, on which of v0 and v1 the walk starts from.
    let z = get("log_z_v0=0_e0=0").value;
    assert!((z - get("log_z_v0=0_e0=1").value).abs() <= 1e-6 * z.abs().max(1.0));
    assert!((z - get("log_z_v0=2_e0=1").value).abs() <= 1e-6 * z.abs().max(1.0));
    assert!((get("mixture_path_0_1_2").value - 1.0 / 6.0).abs() <= 1e-6);
    let bound = (-1.0f64 / 96.0).exp();
    assert!(get("quarter_moment_v0=0_v1=2_e0=0").value <= bound);
}
