//! Versioned, checksummed model snapshots.
//!
//! Layout: one header line `ANARX-SNAPSHOT v<version> sha256=<hex>` followed
//! by the JSON payload the digest covers.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::experiment::ModelState;

pub const SNAPSHOT_VERSION: u32 = 1;
const MAGIC: &str = "ANARX-SNAPSHOT";

fn digest(payload: &[u8]) -> String {
    hex::encode(Sha256::digest(payload))
}

pub fn snapshot_to_bytes(state: &ModelState) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(state).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    let mut out = format!("{MAGIC} v{SNAPSHOT_VERSION} sha256={}\n", digest(&payload)).into_bytes();
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn snapshot_from_bytes(bytes: &[u8]) -> Result<ModelState> {
    let corrupt = |m: &str| Error::CorruptSnapshot(m.to_string());
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| corrupt("missing header line"))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| corrupt("header is not text"))?;
    let payload = &bytes[split + 1..];

    let mut parts = header.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(corrupt("not a snapshot file"));
    }
    let found: u32 = parts
        .next()
        .and_then(|v| v.strip_prefix('v'))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| corrupt("unreadable version tag"))?;
    if found != SNAPSHOT_VERSION {
        return Err(Error::VersionMismatch {
            found,
            expected: SNAPSHOT_VERSION,
        });
    }
    let expected = parts
        .next()
        .and_then(|v| v.strip_prefix("sha256="))
        .ok_or_else(|| corrupt("missing checksum"))?;
    if digest(payload) != expected {
        return Err(corrupt("checksum mismatch"));
    }
    let state: ModelState =
        serde_json::from_slice(payload).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    state.config.validate()?;
    state.forecaster.check_invariants()?;
    Ok(state)
}

pub fn snapshot_save(state: &ModelState, path: &Path) -> Result<()> {
    std::fs::write(path, snapshot_to_bytes(state)?)?;
    Ok(())
}

pub fn snapshot_load(path: &Path) -> Result<ModelState> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    snapshot_from_bytes(&bytes)
}
