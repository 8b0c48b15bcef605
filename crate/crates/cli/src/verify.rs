use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use errw_core::acceptance::{self, AcceptanceConfig, CriterionOutcome, CRITERIA};
use serde::Serialize;

use crate::output::{write_json, Header};
use crate::AcceptanceFailure;

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    /// Defaults to the suite's fixed seed.
    #[arg(long, env = "ERRW_SEED")]
    pub seed: Option<u64>,
    /// Run only these criteria.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
    /// Also write the outcomes as JSON.
    #[serde(skip)]
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Serialize)]
struct Outcomes<'a> {
    config: &'a AcceptanceConfig,
    criteria: &'a [CriterionOutcome],
    passed: usize,
    total: usize,
}

pub fn run(args: VerifyArgs) -> Result<()> {
    let mut cfg = AcceptanceConfig::default();
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let ids: Vec<u8> = if args.only.is_empty() {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        args.only.clone()
    };
    if let Some(id) = ids.iter().find(|&&id| !CRITERIA.iter().any(|c| c.0 == id)) {
        anyhow::bail!(errw_core::Error::InvalidParameter(format!(
            "no acceptance criterion {id}"
        )));
    }
    let mut outcomes = Vec::with_capacity(ids.len());
    for id in ids {
        let o = acceptance::run(id, &cfg);
        println!("{o}");
        outcomes.push(o);
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("acceptance: {passed} of {} criteria passed", outcomes.len());
    if let Some(path) = &args.json {
        let header = Header::new("verify", &cfg, Some(cfg.seed))?;
        let body = Outcomes {
            config: &cfg,
            criteria: &outcomes,
            passed,
            total: outcomes.len(),
        };
        write_json(Some(path), &header, &body)?;
    }
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    if !failed.is_empty() {
        return Err(AcceptanceFailure(failed).into());
    }
    Ok(())
}
