use std::path::{Path, PathBuf};

use mmsounder::io::sha256_hex;
use serde::Serialize;

#[derive(Debug, Serialize)]
struct Output {
    file: String,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: Option<u64>,
    config: &'a C,
    outputs: Vec<Output>,
}

/// Write `manifest.json` listing every output with its SHA-256.
pub fn write_manifest<C: Serialize>(out: &Path, command: &str, seed: Option<u64>, config: &C, files: &[PathBuf]) -> anyhow::Result<()> {
    let mut outputs = Vec::with_capacity(files.len());
    for f in files {
        let bytes = std::fs::read(f)?;
        outputs.push(Output {
            file: f.strip_prefix(out).unwrap_or(f).display().to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    let m = Manifest { command, version: env!("CARGO_PKG_VERSION"), seed, config, outputs };
    std::fs::write(out.join("manifest.json"), serde_json::to_vec_pretty(&m)?)?;
    Ok(())
}
