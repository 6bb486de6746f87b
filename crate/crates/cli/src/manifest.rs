use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cache::{green_constants, GreenConstants};
use crate::config::ExperimentConfig;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub green: GreenConstants,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub threads: usize,
    pub wall_seconds: f64,
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileDigest { path: path.to_path_buf(), sha256: hex::encode(Sha256::digest(&bytes)) })
}

/// Collects output files for one command and refuses to clobber them.
pub struct Outputs {
    dir: PathBuf,
    force: bool,
    written: Vec<PathBuf>,
    start: Instant,
}

impl Outputs {
    pub fn new(dir: PathBuf, force: bool) -> Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs { dir, force, written: vec![], start: Instant::now() })
    }

    /// Path for `name`, failing if it exists and --force was not given.
    pub fn claim(&self, name: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if path.exists() && !self.force {
            bail!("{} exists; pass --force to overwrite", path.display());
        }
        Ok(path)
    }

    /// Claims every name up front so a run never stops halfway through.
    pub fn claim_all<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for n in names.into_iter().chain(["manifest.json"]) {
            self.claim(n)?;
        }
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.claim(name)?;
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn finish(mut self, command: &str, config: &ExperimentConfig, inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
        let manifest = Manifest {
            tool: "steepfield",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config_sha256: config.hash()?,
            config: config.clone(),
            green: green_constants(config.nu)?,
            inputs: inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            outputs: self.written.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            threads: rayon::current_num_threads(),
            wall_seconds: self.start.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_vec_pretty(&manifest)?;
        self.write("manifest.json", &json)?;
        Ok(self.written)
    }
}
