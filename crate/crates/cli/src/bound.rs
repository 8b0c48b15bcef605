use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use errw_core::io::{csv, fmt_f64};
use errw_core::lattice::{build_periodic_box, level, min_box_size, LatticeVertex, PeriodicBoxSpec};
use errw_core::potential::{bound_chain, box_green_values, build_phi, default_c, level_threshold, Level};
use errw_core::Error;
use serde::Serialize;

use crate::output::{write_csv, write_json, write_out, Header};

#[derive(Args, Debug, Serialize)]
pub struct BoundArgs {
    #[arg(long)]
    pub r: u64,
    #[arg(long)]
    pub a: f64,
    /// Defaults to the midpoint of the admissible interval.
    #[arg(long)]
    pub c: Option<f64>,
    /// `<L>r` for |ell| = L r, a plain |ell|, `l0` for the threshold, or
    /// `log:<x>` for level e^x.
    #[arg(long)]
    pub ell: String,
    /// Box size; only recorded.
    #[arg(long)]
    pub i: Option<u64>,
    /// Evaluate outside the proven regime.
    #[arg(long)]
    pub force: bool,
    /// JSON report (default: stdout).
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// One-row CSV report.
    #[serde(skip)]
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn parse_level(spec: &str, r: u64, c: f64) -> Result<Level> {
    let bad = || Error::InvalidParameter(format!("cannot read --ell `{spec}`"));
    let s = spec.trim();
    if s == "l0" {
        return Ok(level_threshold(c)?);
    }
    if let Some(x) = s.strip_prefix("log:") {
        let log: f64 = x.parse().map_err(|_| bad())?;
        if !(log > 0.0 && log.is_finite()) {
            bail!(bad());
        }
        return Ok(Level::from_log(log));
    }
    if let Some(l) = s.strip_suffix('r') {
        let l: u64 = l.parse().map_err(|_| bad())?;
        if l == 0 {
            bail!(bad());
        }
        return Ok(Level::exact(l));
    }
    let norm: u64 = s.parse().map_err(|_| bad())?;
    if norm == 0 {
        bail!(bad());
    }
    Ok(Level::exact(norm.div_ceil(r)))
}

pub fn run_bound(mut args: BoundArgs) -> Result<()> {
    if args.r < 2 {
        bail!(Error::InvalidParameter(format!("r = {} is below 2", args.r)));
    }
    let c = args.c.unwrap_or_else(|| default_c(args.r, args.a));
    args.c = Some(c);
    let lvl = parse_level(&args.ell, args.r, c)?;
    let report = bound_chain(args.r, args.a, Some(c), lvl, args.i, args.force)?;
    let header = Header::new("bound", &args, None)?;
    write_json(args.out.as_deref(), &header, &report)?;
    if let Some(path) = &args.csv {
        let cols = [
            "r",
            "a",
            "c",
            "ell_level_log",
            "xi",
            "l0_log",
            "s_phi",
            "s_phi_bound",
            "s_phi_target",
            "moment_bound",
            "log_moment_bound",
            "hitting_bound",
            "log_hitting_bound",
            "boundary_bound_level1",
            "in_regime",
            "all_links_hold",
            "n_warnings",
        ];
        let row = vec![
            report.r.to_string(),
            fmt_f64(report.a),
            fmt_f64(report.c),
            fmt_f64(report.ell_level.log),
            fmt_f64(report.xi),
            fmt_f64(report.l0.log),
            fmt_f64(report.s_phi),
            fmt_f64(report.s_phi_bound),
            fmt_f64(report.s_phi_target),
            fmt_f64(report.moment_bound),
            fmt_f64(report.log_moment_bound),
            fmt_f64(report.hitting_bound),
            fmt_f64(report.log_hitting_bound),
            fmt_f64(report.boundary_bound_level1),
            report.in_regime.to_string(),
            report.all_links_hold().to_string(),
            report.warnings.len().to_string(),
        ];
        write_csv(Some(path), &header, &csv(&cols, [row]))?;
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct PhiArgs {
    #[arg(long)]
    pub r: u64,
    /// Lattice crossing `x,y` at level >= 2.
    #[arg(long)]
    pub ell: String,
    /// Box size (default: the smallest that fits ell).
    #[arg(long)]
    pub i: Option<u64>,
    /// `edge_id,D,phi` (default: stdout).
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    #[arg(long)]
    pub box_edges: Option<PathBuf>,
    #[serde(skip)]
    #[arg(long)]
    pub box_vertices: Option<PathBuf>,
}

pub fn run_phi(mut args: PhiArgs) -> Result<()> {
    let bad = || Error::InvalidParameter(format!("--ell `{}` is not of the form x,y", args.ell));
    let (x, y) = args.ell.split_once(',').ok_or_else(bad)?;
    let ell = LatticeVertex(
        x.trim().parse().map_err(|_| bad())?,
        y.trim().parse().map_err(|_| bad())?,
    );
    level(ell, args.r)?;
    let i = match args.i {
        Some(i) => i,
        None => min_box_size(ell, args.r)?,
    };
    args.i = Some(i);
    let pbox = build_periodic_box(PeriodicBoxSpec::new(args.r, i)?)?;
    let phi = build_phi(ell, &pbox)?;
    let d = box_green_values(&pbox)?;
    let rows = (0..pbox.graph.n_edges()).map(|e| vec![e.to_string(), fmt_f64(d[e]), fmt_f64(phi.value(e))]);
    let header = Header::new("phi", &args, None)?;
    write_csv(args.out.as_deref(), &header, &csv(&["edge_id", "D", "phi"], rows))?;
    if let Some(p) = &args.box_edges {
        write_out(Some(p), &(header.comment() + &pbox.edges_csv()))?;
    }
    if let Some(p) = &args.box_vertices {
        write_out(Some(p), &(header.comment() + &pbox.vertices_csv()))?;
    }
    Ok(())
}
