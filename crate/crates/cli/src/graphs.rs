//! `--graph` resolution: a JSON graph file or one of the builtins
//! `box:r,i`, `cycle:n`, `path:n`, `complete:n`, `diluted-cycle:n,r`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use errw_core::acceptance::SymmetricInstance;
use errw_core::io::{GraphFile, Instance};
use errw_core::lattice::{build_periodic_box, PeriodicBoxSpec};
use errw_core::{EdgePotential, Error, FiniteGraph, InitialWeights};

fn args(spec: &str, name: &str, n: usize) -> Result<Vec<usize>> {
    let vals = spec
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidParameter(format!("{name}: {e}")))?;
    if vals.len() != n {
        return Err(Error::InvalidParameter(format!("{name} takes {n} integer argument(s), got `{spec}`")).into());
    }
    Ok(vals)
}

fn bare(graph: FiniteGraph, a: f64) -> Result<Instance> {
    let a = InitialWeights::constant(&graph, a)?;
    Ok(Instance {
        graph,
        a,
        phi: None,
        automorphism: None,
        v0: None,
        v1: None,
        e0: None,
    })
}

/// Even cycles come with the antipodal symmetric data.
fn cycle(n: usize, a: f64) -> Result<Instance> {
    if n >= 4 && n.is_multiple_of(2) {
        let s = SymmetricInstance::even_cycle("cycle", n, a)?;
        return Ok(Instance {
            graph: s.graph,
            a: s.a,
            phi: Some(s.phi),
            automorphism: Some(s.automorphism),
            v0: Some(s.v0),
            v1: Some(s.v1),
            e0: Some(s.e0),
        });
    }
    bare(FiniteGraph::cycle(n)?, a)
}

/// Resolves `spec`. Builtins take the constant weight `a` (default 1, which
/// is written back); graph files carry their own weights, so `a` must then
/// be absent.
pub fn load(spec: &str, a: &mut Option<f64>) -> Result<Instance> {
    let w = a.unwrap_or(1.0);
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    if matches!(
        kind,
        "triangle" | "cycle" | "path" | "complete" | "diluted-cycle" | "box"
    ) {
        *a = Some(w);
    }
    match kind {
        "triangle" => bare(FiniteGraph::triangle(), w),
        "cycle" => cycle(args(rest, kind, 1)?[0], w),
        "path" => bare(FiniteGraph::path(args(rest, kind, 1)?[0])?, w),
        "complete" => bare(FiniteGraph::complete(args(rest, kind, 1)?[0])?, w),
        "diluted-cycle" => {
            let v = args(rest, kind, 2)?;
            FiniteGraph::diluted_cycle(v[0], v[1])?;
            cycle(v[0] * v[1], w)
        }
        "box" => {
            let v = args(rest, kind, 2)?;
            let pbox = build_periodic_box(PeriodicBoxSpec::new(v[0] as u64, v[1] as u64)?)?;
            let mut instance = bare(pbox.graph.clone(), w)?;
            instance.v0 = Some(pbox.origin());
            instance.e0 = Some(pbox.reference_edge());
            Ok(instance)
        }
        _ => {
            if a.is_some() {
                bail!(Error::InvalidParameter(
                    "--a cannot override the weights of a graph file".into()
                ));
            }
            let path = Path::new(spec);
            if !path.exists() {
                bail!(Error::InvalidParameter(format!(
                    "`{spec}` is neither a builtin graph nor an existing file"
                )));
            }
            let file = GraphFile::load(path).with_context(|| format!("reading graph file {spec}"))?;
            Ok(file.instance()?)
        }
    }
}

/// `(v0, v1, e0, φ)` of an instance that satisfies the symmetry assumption.
pub fn marked(instance: &Instance) -> Result<(usize, usize, usize, &EdgePotential)> {
    let missing = |what: &str| Error::InvalidParameter(format!("the graph provides no {what}"));
    let v0 = instance.v0.ok_or_else(|| missing("v0"))?;
    let v1 = instance.v1.ok_or_else(|| missing("v1"))?;
    let e0 = instance.e0.ok_or_else(|| missing("e0"))?;
    instance.automorphism.as_ref().ok_or_else(|| missing("automorphism"))?;
    let phi = instance.phi.as_ref().ok_or_else(|| missing("phi"))?;
    if let Some(report) = instance.assumption() {
        report.into_result()?;
    }
    Ok((v0, v1, e0, phi))
}
