//! Versioned JSON checkpoint framing shared by networks and replay dumps.
//!
//! ```text
//! { "format": "...", "version": 1, "checksum": "<sha256 hex>", "body": {...} }
//! ```
//!
//! The checksum covers the canonical JSON serialization of `body`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::{Network, NetworkSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const NETWORK_FORMAT: &str = "hugdrl.network";

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    checksum: String,
    body: serde_json::Value,
}

fn checksum(body: &serde_json::Value) -> Result<String> {
    let bytes = serde_json::to_vec(body)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `body` wrapped in a checksummed envelope.
pub fn write_framed<B: Serialize>(path: &Path, format: &str, body: &B) -> Result<()> {
    let body = serde_json::to_value(body)?;
    let envelope = Envelope {
        format: format.to_string(),
        version: CHECKPOINT_VERSION,
        checksum: checksum(&body)?,
        body,
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, serde_json::to_vec(&envelope)?)?;
    Ok(())
}

/// Reads and verifies an envelope written by [`write_framed`].
pub fn read_framed<B: DeserializeOwned>(path: &Path, format: &str) -> Result<B> {
    let fail = |reason: String| Error::Checkpoint { path: path.to_path_buf(), reason };
    let bytes = fs::read(path)?;
    let envelope: Envelope = serde_json::from_slice(&bytes).map_err(|e| fail(e.to_string()))?;
    if envelope.format != format {
        return Err(fail(format!("expected format {format}, found {}", envelope.format)));
    }
    if envelope.version != CHECKPOINT_VERSION {
        return Err(fail(format!("unsupported version {}", envelope.version)));
    }
    if checksum(&envelope.body)? != envelope.checksum {
        return Err(fail("checksum mismatch".into()));
    }
    serde_json::from_value(envelope.body).map_err(|e| fail(e.to_string()))
}

#[derive(Serialize, Deserialize)]
pub(crate) struct NetworkBody {
    pub spec: NetworkSpec,
    pub tensors: Vec<(Vec<usize>, Vec<f64>)>,
}

impl NetworkBody {
    pub fn from_network<T: Scalar>(net: &Network<T>) -> Self {
        Self {
            spec: net.spec().clone(),
            tensors: net.params().iter().map(|t| (t.shape().to_vec(), t.to_f64_vec())).collect(),
        }
    }

    pub fn into_network<T: Scalar>(self) -> Result<Network<T>> {
        let params = self
            .tensors
            .into_iter()
            .map(|(shape, data)| Tensor::new(shape, data.into_iter().map(T::of).collect()))
            .collect::<Result<Vec<_>>>()?;
        Network::from_params(self.spec, params)
    }
}

impl<T: Scalar> Network<T> {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_framed(path, NETWORK_FORMAT, &NetworkBody::from_network(self))
    }

    /// Loads a checkpoint, failing unless it was written for exactly `expected`.
    pub fn load(path: &Path, expected: &NetworkSpec) -> Result<Self> {
        let body: NetworkBody = read_framed(path, NETWORK_FORMAT)?;
        if &body.spec != expected {
            return Err(Error::Checkpoint {
                path: path.to_path_buf(),
                reason: format!("network spec mismatch: file has {:?}", body.spec),
            });
        }
        body.into_network()
    }

    /// Loads a checkpoint with whatever topology it records.
    pub fn load_any(path: &Path) -> Result<Self> {
        read_framed::<NetworkBody>(path, NETWORK_FORMAT)?.into_network()
    }
}
