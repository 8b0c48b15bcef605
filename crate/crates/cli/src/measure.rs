use std::fs;
use std::io::Read;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use errw_core::io::{csv, fmt_f64, graph_hash, Instance};
use errw_core::measure::{log_density_p, log_density_q};
use errw_core::potential::dirichlet_form;
use errw_core::quadrature::{log_normalizer, QuadratureSettings};
use errw_core::sampler::{
    estimate_mean, mcmc_chains, quarter_moment, symmetry_check, ChainConfig, MomentEstimate, SymmetryReport, Target,
};
use errw_core::variational::{FWorkspace, TreeRoute};
use errw_core::{Environment, Error};
use serde::{Deserialize, Serialize};

use crate::graphs;
use crate::output::{write_csv, write_json, write_out, Header};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// The mixing measure of the walk from v0.
    Q,
    /// The interpolated measure between v0 and v1.
    P,
}

fn vertex(inst: &Instance, v: usize) -> Result<usize> {
    if v >= inst.graph.n_vertices() {
        bail!(Error::VertexOutOfRange(v));
    }
    Ok(v)
}

/// The reference edge: explicit, from the graph, or the first edge at `v0`.
fn reference_edge(inst: &Instance, e0: Option<usize>, v0: usize) -> Result<usize> {
    let e = e0.or(inst.e0).unwrap_or_else(|| inst.graph.incident(v0)[0]);
    if e >= inst.graph.n_edges() {
        bail!(Error::EdgeOutOfRange(e));
    }
    Ok(e)
}

fn target(measure: Measure, v0: usize, v1: Option<usize>) -> Result<Target> {
    Ok(match measure {
        Measure::Q => Target::Q { v0 },
        Measure::P => Target::P {
            v0,
            v1: v1.ok_or_else(|| Error::InvalidParameter("the interpolated measure needs --v1".into()))?,
        },
    })
}

#[derive(Args, Debug, Serialize)]
pub struct DensityArgs {
    #[arg(long)]
    pub graph: String,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, value_enum, default_value_t = Measure::Q)]
    pub measure: Measure,
    #[arg(long)]
    pub v0: Option<usize>,
    #[arg(long)]
    pub v1: Option<usize>,
    #[arg(long)]
    pub e0: Option<usize>,
    /// Comma-separated edge weights, instead of --input.
    #[arg(long, value_delimiter = ',', conflicts_with = "input")]
    pub weights: Vec<f64>,
    /// Also report the normalized log-density (quadrature; at most 5 edges).
    #[arg(long)]
    pub normalize: bool,
    /// JSON input: `{"weights": [..]}`, `{"log_weights": [..]}`, or a list of
    /// these; `-` reads stdin.
    #[serde(skip)]
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum EnvInput {
    Weights { weights: Vec<f64> },
    LogWeights { log_weights: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DensityInput {
    One(EnvInput),
    Many(Vec<EnvInput>),
}

#[derive(Debug, Serialize)]
struct DensityValue {
    log_weights: Vec<f64>,
    log_density: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_density_normalized: Option<f64>,
}

#[derive(Debug, Serialize)]
struct DensityOutput {
    graph_hash: String,
    measure: Measure,
    v0: usize,
    v1: Option<usize>,
    e0: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_normalizer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_normalizer_rel_error: Option<f64>,
    results: Vec<DensityValue>,
}

fn read_input(args: &DensityArgs) -> Result<Vec<EnvInput>> {
    let text = match args.input.as_deref() {
        None if !args.weights.is_empty() => {
            return Ok(vec![EnvInput::Weights {
                weights: args.weights.clone(),
            }])
        }
        None => bail!(Error::InvalidParameter("give --weights or --input".into())),
        Some(p) if p.as_os_str() == "-" => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            s
        }
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
    };
    let parsed: DensityInput =
        serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("density input: {e}")))?;
    Ok(match parsed {
        DensityInput::One(e) => vec![e],
        DensityInput::Many(v) => v,
    })
}

pub fn run_density(mut args: DensityArgs) -> Result<()> {
    let inst = graphs::load(&args.graph, &mut args.a)?;
    let v0 = vertex(&inst, args.v0.or(inst.v0).unwrap_or(0))?;
    let v1 = match args.measure {
        Measure::P => Some(vertex(&inst, args.v1.or(inst.v1).unwrap_or(0))?),
        Measure::Q => args.v1,
    };
    let e0 = reference_edge(&inst, args.e0, v0)?;
    (args.v0, args.v1, args.e0) = (Some(v0), v1, Some(e0));
    let inputs = read_input(&args)?;

    let (log_z, rel) = if args.normalize {
        let density = target(args.measure, v0, v1)?.density(&inst.graph, &inst.a)?;
        let (lz, rel) = log_normalizer(&inst.graph, &density, e0, &QuadratureSettings::default())?;
        (Some(lz), Some(rel))
    } else {
        (None, None)
    };
    let mut results = Vec::with_capacity(inputs.len());
    for input in inputs {
        let env = match input {
            EnvInput::Weights { weights } => Environment::from_weights(&weights)?,
            EnvInput::LogWeights { log_weights } => Environment::from_log_weights(log_weights)?,
        };
        if env.n_edges() != inst.graph.n_edges() {
            bail!(Error::InvalidParameter(format!(
                "environment has {} weights for {} edges",
                env.n_edges(),
                inst.graph.n_edges()
            )));
        }
        // The density is invariant under scaling, so normalize at e0.
        let env = env.renormalize(e0)?;
        let ld = match args.measure {
            Measure::Q => log_density_q(&inst.graph, &inst.a, v0, e0, &env)?,
            Measure::P => log_density_p(&inst.graph, &inst.a, v0, v1.unwrap_or(v0), e0, &env)?,
        };
        results.push(DensityValue {
            log_weights: env.log_weights().to_vec(),
            log_density: ld,
            log_density_normalized: log_z.map(|z| ld - z),
        });
    }
    let out = DensityOutput {
        graph_hash: graph_hash(&inst.graph, &inst.a),
        measure: args.measure,
        v0,
        v1,
        e0,
        log_normalizer: log_z,
        log_normalizer_rel_error: rel,
        results,
    };
    let header = Header::new("density", &args, None)?;
    write_json(args.out.as_deref(), &header, &out)
}

#[derive(Args, Debug, Serialize)]
pub struct VariationalArgs {
    /// A graph with symmetric data: a graph file or `cycle:<even n>`.
    #[arg(long)]
    pub graph: String,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub gamma_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = 11)]
    pub gamma_steps: usize,
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 2_000)]
    pub burn_in: usize,
    #[arg(long, env = "ERRW_SEED", default_value_t = 0)]
    pub seed: u64,
    /// `gamma,EH,EH_se,g_hat,g_hat_se,g_bound,second_deriv_max` (default: stdout).
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_variational(mut args: VariationalArgs) -> Result<()> {
    if args.gamma_steps < 2
        || args.gamma_min >= args.gamma_max
        || !args.gamma_min.is_finite()
        || !args.gamma_max.is_finite()
    {
        bail!(Error::InvalidParameter(
            "need gamma_min < gamma_max and at least 2 steps".into()
        ));
    }
    let inst = graphs::load(&args.graph, &mut args.a)?;
    let (v0, v1, e0, phi) = graphs::marked(&inst)?;
    let s_phi = dirichlet_form(&inst.graph, &inst.a, phi);
    let mut cfg = ChainConfig::new(Target::P { v0, v1 }, args.samples, args.seed);
    cfg.burn_in = args.burn_in;
    let chain = mcmc_chains(&inst.graph, &inst.a, e0, &cfg, 1)?.remove(0);
    let base = errw_core::variational::DeformationContext::new(&inst.graph, &inst.a, v0, v1, e0, phi, 0.0)?;

    let mut rows = Vec::with_capacity(args.gamma_steps);
    let mut worst_second = f64::NEG_INFINITY;
    for k in 0..args.gamma_steps {
        let t = k as f64 / (args.gamma_steps - 1) as f64;
        let gamma = args.gamma_min + t * (args.gamma_max - args.gamma_min);
        let ctx = base.at(gamma);
        let eh = estimate_mean(&chain.map(|y| ctx.h_deformed(y)));
        let mut ws = FWorkspace::default();
        let mut f = Vec::with_capacity(chain.len());
        let mut second = f64::NEG_INFINITY;
        for y in chain.iter() {
            f.push(ctx.log_f_gamma_with(y, &mut ws)?);
            second = second.max(ctx.f_gamma_derivatives_with(y, TreeRoute::Auto)?.1);
        }
        let g = estimate_mean(&f);
        worst_second = worst_second.max(second);
        rows.push(vec![
            fmt_f64(gamma),
            fmt_f64(eh.value),
            fmt_f64(eh.std_error),
            fmt_f64(g.value),
            fmt_f64(g.std_error),
            fmt_f64(s_phi * gamma * gamma / 2.0),
            fmt_f64(second),
        ]);
    }
    let header = Header::new("variational", &args, Some(args.seed))?;
    let cols = [
        "gamma",
        "EH",
        "EH_se",
        "g_hat",
        "g_hat_se",
        "g_bound",
        "second_deriv_max",
    ];
    write_csv(args.out.as_deref(), &header, &csv(&cols, rows))?;
    chain.require_healthy()?;
    if worst_second > s_phi * (1.0 + 1e-12) {
        bail!(Error::Diagnostic(format!(
            "second derivative {worst_second} exceeds S_phi = {s_phi}"
        )));
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct McmcArgs {
    #[arg(long)]
    pub graph: String,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, value_enum, default_value_t = Measure::Q)]
    pub target: Measure,
    #[arg(long)]
    pub v0: Option<usize>,
    #[arg(long)]
    pub v1: Option<usize>,
    #[arg(long)]
    pub e0: Option<usize>,
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 2_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 2)]
    pub chains: usize,
    #[arg(long, env = "ERRW_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Per-sample log-weights as CSV.
    #[serde(skip)]
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// JSON summary (default: stdout).
    #[serde(skip)]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ChainSummary {
    acceptance: Vec<f64>,
    scales: Vec<f64>,
    warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    quarter_moment: Option<MomentEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    symmetry: Option<SymmetryReport>,
}

#[derive(Debug, Serialize)]
struct McmcOutput {
    graph_hash: String,
    target: Target,
    e0: usize,
    n_samples: usize,
    chains: Vec<ChainSummary>,
    /// Largest pairwise |difference| / combined standard error of the
    /// quarter moments.
    #[serde(skip_serializing_if = "Option::is_none")]
    max_chain_z: Option<f64>,
}

pub fn run_mcmc(mut args: McmcArgs) -> Result<()> {
    if args.chains == 0 {
        bail!(Error::InvalidParameter("--chains must be positive".into()));
    }
    let inst = graphs::load(&args.graph, &mut args.a)?;
    let v0 = vertex(&inst, args.v0.or(inst.v0).unwrap_or(0))?;
    let v1 = match args.v1.or(inst.v1) {
        Some(v) => Some(vertex(&inst, v)?),
        None => None,
    };
    let e0 = reference_edge(&inst, args.e0, v0)?;
    (args.v0, args.v1, args.e0) = (Some(v0), v1, Some(e0));
    let tgt = target(args.target, v0, v1)?;
    let mut cfg = ChainConfig::new(tgt, args.samples, args.seed);
    cfg.burn_in = args.burn_in;
    cfg.thinning = args.thin;
    let chains = mcmc_chains(&inst.graph, &inst.a, e0, &cfg, args.chains)?;

    let summaries: Vec<ChainSummary> = chains
        .iter()
        .map(|c| ChainSummary {
            acceptance: c.acceptance.clone(),
            scales: c.scales.clone(),
            warnings: c.warnings.clone(),
            quarter_moment: match (args.target, v1) {
                (Measure::Q, Some(v1)) => Some(quarter_moment(&inst.graph, c, v0, v1)),
                _ => None,
            },
            symmetry: match (args.target, v1) {
                (Measure::P, Some(v1)) => Some(symmetry_check(&inst.graph, c, v0, v1)),
                _ => None,
            },
        })
        .collect();
    let moments: Vec<&MomentEstimate> = summaries.iter().filter_map(|s| s.quarter_moment.as_ref()).collect();
    let max_chain_z = (moments.len() > 1).then(|| {
        let mut worst: f64 = 0.0;
        for (i, a) in moments.iter().enumerate() {
            for b in &moments[i + 1..] {
                let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
                worst = worst.max((a.value - b.value).abs() / se);
            }
        }
        worst
    });
    let header = Header::new("mcmc", &args, Some(args.seed))?;
    if let Some(path) = &args.dump {
        let mut cols = vec!["chain".to_string(), "sample".to_string()];
        cols.extend((0..inst.graph.n_edges()).map(|e| format!("log_x{e}")));
        let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
        let rows = chains.iter().enumerate().flat_map(|(k, c)| {
            c.iter().enumerate().map(move |(j, y)| {
                let mut row = vec![k.to_string(), j.to_string()];
                row.extend(y.iter().map(|&v| fmt_f64(v)));
                row
            })
        });
        write_out(Some(path), &(header.comment() + &csv(&cols, rows)))?;
    }
    let out = McmcOutput {
        graph_hash: graph_hash(&inst.graph, &inst.a),
        target: tgt,
        e0,
        n_samples: args.samples,
        chains: summaries,
        max_chain_z,
    };
    write_json(args.out.as_deref(), &header, &out)?;
    for c in &chains {
        c.require_healthy()?;
    }
    Ok(())
}
