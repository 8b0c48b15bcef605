//! Output files: every artifact starts with a header naming the tool
//! version, the resolved configuration and the seed.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug)]
pub struct Header {
    pub subcommand: &'static str,
    pub config: Value,
    pub seed: Option<u64>,
}

impl Header {
    pub fn new<C: Serialize>(subcommand: &'static str, config: &C, seed: Option<u64>) -> Result<Self> {
        Ok(Header {
            subcommand,
            config: serde_json::to_value(config)?,
            seed,
        })
    }

    fn seed_text(&self) -> String {
        self.seed.map_or_else(|| "none".to_string(), |s| s.to_string())
    }

    /// `# `-prefixed lines for CSV files.
    pub fn comment(&self) -> String {
        format!(
            "# errw {VERSION} {}\n# config: {}\n# seed: {}\n",
            self.subcommand,
            self.config,
            self.seed_text()
        )
    }

    /// The same information as an XML comment, for SVG files.
    pub fn xml_comment(&self) -> String {
        // `--` may not appear inside an XML comment.
        let config = self.config.to_string().replace("--", "- -");
        format!(
            "<!-- errw {VERSION} {} | config: {config} | seed: {} -->\n",
            self.subcommand,
            self.seed_text()
        )
    }

    pub fn json(&self) -> Value {
        json!({
            "tool": "errw",
            "version": VERSION,
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
        })
    }
}

/// Writes `body` to `path`, or to stdout when no path is given.
pub fn write_out(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn write_csv(path: Option<&Path>, header: &Header, csv: &str) -> Result<()> {
    write_out(path, &(header.comment() + csv))
}

/// Pretty JSON with the header under `_header`.
pub fn write_json<T: Serialize>(path: Option<&Path>, header: &Header, body: &T) -> Result<()> {
    let mut v = serde_json::to_value(body)?;
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("_header".into(), header.json());
        }
        None => v = json!({ "_header": header.json(), "data": v }),
    }
    write_out(path, &(serde_json::to_string_pretty(&v)? + "\n"))
}
