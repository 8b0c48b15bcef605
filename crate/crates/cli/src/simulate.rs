use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use errw_core::io::{csv, fmt_f64};
use errw_core::lattice::LatticeVertex;
use errw_core::potential::{check_regime, default_c, xi};
use errw_core::walker::{
    errw_trajectory, hit_before_return, lattice_hit_before_return, Dynamics, HittingConfig, HittingEstimate,
    LatticeTarget,
};
use errw_core::Error;
use serde::Serialize;

use crate::graphs;
use crate::output::{write_csv, Header};
use crate::plot::{emit_plot_data, Series};

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    /// Finite graph: a JSON file or a builtin such as `cycle:6`.
    #[arg(long, conflicts_with = "r")]
    pub graph: Option<String>,
    /// Dilution of the lattice walk.
    #[arg(long)]
    pub r: Option<u64>,
    /// Constant initial weight (builtins and the lattice).
    #[arg(long)]
    pub a: Option<f64>,
    /// Start vertex on a finite graph (default: the file's v0, else 0).
    #[arg(long)]
    pub v0: Option<usize>,
    /// Target vertices on a finite graph (default: the file's v1).
    #[arg(long, value_delimiter = ',')]
    pub target: Vec<usize>,
    /// Track the shells at levels 1..=L of the lattice walk.
    #[arg(long, requires = "r")]
    pub boundary_level: Option<u64>,
    /// A lattice target vertex `x,y`; repeat for a target set.
    #[arg(long, requires = "r")]
    pub target_vertex: Vec<String>,
    /// Emit one trajectory of this many steps instead of hitting estimates.
    #[arg(long, requires = "graph")]
    pub trajectory: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub walks: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_steps: u64,
    /// Largest tolerated fraction of walks cut off at --max-steps.
    #[arg(long, default_value_t = 0.01)]
    pub censor_threshold: f64,
    #[arg(long, env = "ERRW_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Exponent of the reference curve; computed from (r, a, c) in the regime.
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write `<PREFIX>.csv` and `<PREFIX>.svg` for a boundary-level run.
    #[serde(skip)]
    #[arg(long, requires = "boundary_level")]
    pub plot: Option<PathBuf>,
}

const HITTING_HEADER: [&str; 6] = ["target", "estimate", "ci_halfwidth", "n_walks", "censored_frac", "seed"];

fn hitting_row(label: &str, e: &HittingEstimate) -> Vec<String> {
    vec![
        label.to_string(),
        fmt_f64(e.estimate),
        fmt_f64(e.ci_halfwidth),
        e.n_walks.to_string(),
        fmt_f64(e.censored_frac),
        e.seed.to_string(),
    ]
}

fn parse_vertex(s: &str) -> Result<LatticeVertex> {
    let bad = || Error::InvalidParameter(format!("lattice vertex `{s}` is not of the form x,y"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    Ok(LatticeVertex(
        x.trim().parse().map_err(|_| bad())?,
        y.trim().parse().map_err(|_| bad())?,
    ))
}

pub fn run(mut args: SimulateArgs) -> Result<()> {
    let cfg = HittingConfig {
        n_walks: args.walks,
        max_steps: args.max_steps,
        seed: args.seed,
        censor_threshold: args.censor_threshold,
    };
    if cfg.n_walks == 0 {
        bail!(Error::InvalidParameter("--walks must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.censor_threshold) {
        bail!(Error::InvalidParameter("--censor-threshold must lie in [0, 1]".into()));
    }
    match (&args.graph, args.r) {
        (Some(spec), _) => {
            let inst = &graphs::load(spec, &mut args.a)?;
            let v0 = args.v0.or(inst.v0).unwrap_or(0);
            args.v0 = Some(v0);
            if let Some(steps) = args.trajectory {
                let (path, _) = errw_trajectory(&inst.graph, &inst.a, v0, steps, args.seed)?;
                let rows = path.iter().map(|s| {
                    vec![
                        s.t.to_string(),
                        s.vertex.to_string(),
                        s.edge.map_or_else(String::new, |e| e.to_string()),
                    ]
                });
                let header = Header::new("simulate", &args, Some(args.seed))?;
                return write_csv(
                    args.out.as_deref(),
                    &header,
                    &csv(&["t", "vertex", "edge_crossed"], rows),
                );
            }
            if args.target.is_empty() {
                args.target = inst.v1.into_iter().collect();
            }
            if args.target.is_empty() {
                bail!(Error::InvalidParameter(
                    "no --target given and the graph marks no v1".into()
                ));
            }
            let est = hit_before_return(&inst.graph, Dynamics::Reinforced(&inst.a), v0, &args.target, &cfg)?;
            let label = args.target.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ");
            let header = Header::new("simulate", &args, Some(args.seed))?;
            write_csv(
                args.out.as_deref(),
                &header,
                &csv(&HITTING_HEADER, [hitting_row(&label, &est)]),
            )
        }
        (None, Some(r)) => {
            let a = args.a.unwrap_or(1.0);
            args.a = Some(a);
            let target = match (args.boundary_level, args.target_vertex.is_empty()) {
                (Some(l), true) => LatticeTarget::BoundaryLevels(l),
                (None, false) => LatticeTarget::Vertices(
                    args.target_vertex
                        .iter()
                        .map(|s| parse_vertex(s))
                        .collect::<Result<_>>()?,
                ),
                _ => bail!(Error::InvalidParameter(
                    "give exactly one of --boundary-level and --target-vertex".into()
                )),
            };
            let results = lattice_hit_before_return(r, a, &target, &cfg)?;
            if args.plot.is_some() && args.xi.is_none() {
                let c = args.c.unwrap_or_else(|| default_c(r, a));
                if check_regime(r, a, c).is_ok() {
                    args.c = Some(c);
                    args.xi = Some(xi(r, a, c));
                }
            }
            let header = Header::new("simulate", &args, Some(args.seed))?;
            let rows = results.iter().map(|(label, e)| hitting_row(label, e));
            write_csv(args.out.as_deref(), &header, &csv(&HITTING_HEADER, rows))?;
            if let Some(prefix) = &args.plot {
                let points: Vec<(f64, f64)> = results
                    .iter()
                    .enumerate()
                    .map(|(k, (_, e))| ((r * (k as u64 + 1)) as f64, e.estimate))
                    .collect();
                let overlays: Vec<Series> = args
                    .xi
                    .map(|xi| Series {
                        name: "(r/|ell|)^(1+xi)".into(),
                        points: points
                            .iter()
                            .map(|&(x, _)| (x, (r as f64 / x).powf(1.0 + xi)))
                            .collect(),
                    })
                    .into_iter()
                    .collect();
                let est = Series {
                    name: "estimate".into(),
                    points,
                };
                emit_plot_data(&est, &overlays, prefix, &header)?;
            }
            Ok(())
        }
        (None, None) => bail!(Error::InvalidParameter("give --graph or --r".into())),
    }
}
