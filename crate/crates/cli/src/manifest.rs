//! The run manifest: a JSON record written before training starts, pinning
//! everything needed to reproduce or audit the run. Every other output file
//! carries the manifest's `run_id`, and it is the only output allowed to
//! contain a timestamp.

use cbn_core::TrainConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, Serialize)]
pub struct RunOutputs {
    pub metrics_csv: String,
    pub summary_json: String,
    pub final_checkpoint: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// Deterministic digest of (artifact version, config, dataset hash):
    /// identical runs share it, and every output file embeds it.
    pub run_id: String,
    pub artifact_version: String,
    /// Source revision of the build, or "unknown" outside a repository.
    pub revision: String,
    pub seed: u64,
    pub dataset_path: String,
    pub dataset_sha256: String,
    pub config: TrainConfig,
    pub checkpoint_interval: usize,
    pub outputs: RunOutputs,
    pub created_unix_seconds: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// First sixteen hex digits of a digest over the run identity — everything
/// that determines the outputs, and nothing that doesn't (no timestamps, no
/// build revision).
pub fn compute_run_id(
    config: &TrainConfig,
    dataset_sha256: &str,
    artifact_version: &str,
) -> String {
    #[derive(Serialize)]
    struct Identity<'a> {
        artifact_version: &'a str,
        dataset_sha256: &'a str,
        config: &'a TrainConfig,
    }
    let identity = serde_json::to_vec(&Identity {
        artifact_version,
        dataset_sha256,
        config,
    })
    .expect("run identity serializes");
    sha256_hex(&identity)[..16].to_string()
}

pub fn now_unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_id_tracks_config_and_dataset_but_not_time() {
        let config = TrainConfig::default();
        let a = compute_run_id(&config, "abc", "0.1.0");
        let b = compute_run_id(&config, "abc", "0.1.0");
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        assert!(a.chars().all(|c| c.is_ascii_hexdigit()));

        let other_data = compute_run_id(&config, "def", "0.1.0");
        assert_ne!(a, other_data);

        let mut tweaked = TrainConfig::default();
        tweaked.lr += 0.01;
        let other_config = compute_run_id(&tweaked, "abc", "0.1.0");
        assert_ne!(a, other_config);
    }
}
