//! Run manifests: one JSON record per invocation capturing the resolved
//! configuration, the seed, and digests of every input file, so a run can
//! be reproduced exactly from the manifest plus its inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ResolvedConfig;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub subcommand: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: ResolvedConfig,
    /// Input path -> SHA-256 of its bytes, sorted by path.
    pub inputs: BTreeMap<String, String>,
    pub started_at: String,
    pub finished_at: String,
}

/// Collects inputs while a command runs, then writes the manifest as the
/// command's final act.
pub struct ManifestBuilder {
    subcommand: String,
    config: ResolvedConfig,
    inputs: BTreeMap<String, String>,
    started_at: String,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true)
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("digesting input {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, config: &ResolvedConfig) -> ManifestBuilder {
        ManifestBuilder {
            subcommand: subcommand.to_string(),
            config: config.clone(),
            inputs: BTreeMap::new(),
            started_at: now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_hex(path)?);
        Ok(())
    }

    pub fn write(self, out_dir: &Path) -> Result<PathBuf> {
        let manifest = RunManifest {
            format_version: 1,
            subcommand: self.subcommand,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.config.seed,
            config: self.config,
            inputs: self.inputs,
            started_at: self.started_at,
            finished_at: now(),
        };
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
        fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
