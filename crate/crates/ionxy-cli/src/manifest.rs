//! Run manifest: resolved-config echo, file digests, and atomic writes.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use ionxy::{Error, Result};

use crate::config::ResolvedConfig;

/// Write a file atomically: temp name in the same directory, then rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    let dest = dir.join(name);
    fs::write(&tmp, bytes)
        .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, &dest)
        .map_err(|e| Error::Invalid(format!("cannot rename into {}: {e}", dest.display())))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Manifest document written alongside every experiment.
pub fn manifest_json(
    cfg: &ResolvedConfig,
    files: &[(String, Vec<u8>)],
    wall_time_s: f64,
) -> serde_json::Value {
    let outputs: Vec<serde_json::Value> = files
        .iter()
        .map(|(name, bytes)| {
            serde_json::json!({
                "name": name,
                "bytes": bytes.len(),
                "sha256": sha256_hex(bytes),
            })
        })
        .collect();
    serde_json::json!({
        "tool": "sim",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "wall_time_s": wall_time_s,
        "resolved_config": serde_json::to_value(cfg).expect("config serializes"),
        "outputs": outputs,
    })
}
