//! Versioned binary checkpoint files: an 8-byte magic, a little-endian
//! format version, then a bincode body carrying the policy, its id and the
//! training config that produced it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::policy::PolicyHandle;
use super::train::TrainConfig;

pub const MAGIC: &[u8; 8] = b"HSPCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub policy: PolicyHandle,
    /// Training config as JSON (bincode cannot carry its tagged enums).
    pub config: Option<String>,
    /// Free-form provenance such as the weight-vector seed.
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(policy: PolicyHandle, config: Option<&TrainConfig>) -> Self {
        Checkpoint {
            policy,
            config: config.map(|c| serde_json::to_string(c).expect("config serializes")),
            meta: BTreeMap::new(),
        }
    }

    pub fn train_config(&self) -> Option<TrainConfig> {
        self.config
            .as_deref()
            .and_then(|c| serde_json::from_str(c).ok())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend(bincode::serialize(self).expect("checkpoint serializes"));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        bincode::deserialize(&bytes[12..]).map_err(|e| CheckpointError::Corrupt(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Checkpoint::from_bytes(&fs::read(path)?)
    }
}
