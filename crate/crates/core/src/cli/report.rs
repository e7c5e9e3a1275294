use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{emit_config, RunConfig};
use crate::error::Result;
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

/// Everything one command produced, written together with the resolved
/// config and a provenance block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub command: String,
    pub artifacts: Vec<Artifact>,
    pub resolved_config: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: &'static str,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ReportBundle {
    pub fn new(command: &str, cfg: &RunConfig) -> Result<Self> {
        let resolved_config = emit_config(cfg)?;
        Ok(Self {
            command: command.to_string(),
            artifacts: Vec::new(),
            config_sha256: sha256_hex(resolved_config.as_bytes()),
            resolved_config,
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION"),
        })
    }

    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.artifacts.push(Artifact {
            name: name.into(),
            contents: contents.into(),
        });
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.artifacts
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.contents.as_slice())
    }

    pub fn provenance(&self) -> String {
        let mut out = String::from("[provenance]\n");
        out.push_str(&format!("command = \"{}\"\n", self.command));
        out.push_str(&format!("config_sha256 = \"{}\"\n", self.config_sha256));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("tool = \"ecfsense\"\nversion = \"{}\"\n", self.version));
        out.push_str("artifacts = [\n");
        for a in &self.artifacts {
            out.push_str(&format!("  {{ name = \"{}\", sha256 = \"{}\" }},\n", a.name, sha256_hex(&a.contents)));
        }
        out.push_str("]\n");
        out
    }

    /// Writes every artifact, then `resolved_config.toml` and `provenance.toml`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.artifacts.len() + 2);
        for a in &self.artifacts {
            let p = dir.join(&a.name);
            write_atomic(&p, &a.contents)?;
            written.push(p);
        }
        let p = dir.join("resolved_config.toml");
        write_atomic(&p, self.resolved_config.as_bytes())?;
        written.push(p);
        let p = dir.join("provenance.toml");
        write_atomic(&p, self.provenance().as_bytes())?;
        written.push(p);
        Ok(written)
    }
}
