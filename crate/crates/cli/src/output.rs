use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance block embedded in every output file.
#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command_line: Vec<String>,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
}

impl Metadata {
    pub fn new(seed: u64) -> Self {
        let mut command_line: Vec<String> = std::env::args().skip(1).collect();
        command_line.insert(0, env!("CARGO_BIN_NAME").to_string());
        Self {
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command_line,
            seed,
            inputs: Vec::new(),
        }
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("cannot read `{}`", path.display()))?;
        let digest = Sha256::digest(&bytes);
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(bytes)
    }

    /// `# key: value` lines for CSV outputs.
    pub fn csv_lines(&self, extra: &[(&str, String)]) -> Vec<(String, String)> {
        let mut lines = vec![
            ("tool".to_string(), self.tool.to_string()),
            ("version".to_string(), self.version.to_string()),
            ("command_line".to_string(), self.command_line.join(" ")),
            ("seed".to_string(), self.seed.to_string()),
        ];
        for input in &self.inputs {
            lines.push((format!("input {}", input.path), format!("sha256 {}", input.sha256)));
        }
        lines.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
        lines
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    metadata: &'a Metadata,
    result: &'a T,
}

/// Destination of a command's main artifact.
pub struct Sink(pub Option<PathBuf>);

impl Sink {
    pub fn write_bytes(&self, bytes: &[u8]) -> Result<()> {
        match &self.0 {
            Some(path) => fs::write(path, bytes).with_context(|| format!("cannot write `{}`", path.display())),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
                Ok(())
            }
        }
    }

    pub fn write_json<T: Serialize>(&self, metadata: &Metadata, result: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&Document { metadata, result })?;
        text.push('\n');
        self.write_bytes(text.as_bytes())
    }
}
