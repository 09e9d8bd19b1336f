//! Append-only JSON-lines record of verification runs.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::verify::{CheckResult, Ctx};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    /// SHA-256 of the canonical group and ψ specifications.
    pub config_hashes: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    pub started_unix: u64,
    pub wall_time_s: f64,
    pub exit_code: i32,
    pub checks: Vec<CheckResult>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(ctx: &Ctx, checks: Vec<CheckResult>, wall: Duration, exit_code: i32) -> Self {
        let mut hashes = BTreeMap::new();
        let group = serde_json::to_vec(&ctx.g.to_spec()).expect("group spec serializes");
        hashes.insert("group".to_string(), sha256_hex(&group));
        let psi = match &ctx.psi {
            Some(p) => serde_json::to_vec(&p.to_spec()).expect("ψ spec serializes"),
            None => b"null".to_vec(),
        };
        hashes.insert("psi".to_string(), sha256_hex(&psi));
        let now = SystemTime::now().checked_sub(wall).unwrap_or_else(SystemTime::now);
        Self {
            command: std::env::args().collect(),
            config_hashes: hashes,
            seed: ctx.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: now.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_time_s: wall.as_secs_f64(),
            exit_code,
            checks,
        }
    }

    pub fn append(&self, path: &Path) -> std::io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        let line = serde_json::to_string(self).map_err(std::io::Error::other)?;
        writeln!(f, "{line}")
    }
}
