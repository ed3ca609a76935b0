//! Binary checkpoint format.
//!
//! ```text
//! b"NARCKPT1" | header length (u64 LE) | JSON header | f32 LE payload
//! ```
//!
//! The header is `{format_version, config, params: [{name, shape,
//! byte_offset}], metadata}`; offsets are relative to the payload start.

use std::path::Path;

use narlab_tensor::Tensor;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::params::ParamStore;
use crate::{Model, ModelConfig, ModelError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NARCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    byte_offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    params: Vec<ParamEntry>,
    #[serde(default)]
    metadata: Value,
}

/// A model together with free-form training metadata.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub metadata: Value,
}

impl Checkpoint {
    pub fn new(model: Model<f32>, metadata: Value) -> Self {
        Self { model, metadata }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let params = self.model.params();
        let mut entries = Vec::with_capacity(params.len());
        let mut payload = Vec::with_capacity(params.count() * 4);
        for (name, t) in params.names().iter().zip(params.tensors()) {
            entries.push(ParamEntry { name: name.clone(), shape: t.shape().to_vec(), byte_offset: payload.len() });
            for x in t.data() {
                payload.extend_from_slice(&x.to_le_bytes());
            }
        }
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            config: self.model.config().clone(),
            params: entries,
            metadata: self.metadata.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serialises");
        let mut out = Vec::with_capacity(16 + json.len() + payload.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| ModelError::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let json = bytes.get(16..16 + len).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(json)?;
        if header.format_version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported format version {} (expected {CHECKPOINT_VERSION})",
                header.format_version
            )));
        }
        let payload = &bytes[16 + len..];
        let mut names = Vec::with_capacity(header.params.len());
        let mut tensors = Vec::with_capacity(header.params.len());
        for p in header.params {
            let count: usize = p.shape.iter().product();
            let raw = payload
                .get(p.byte_offset..p.byte_offset + 4 * count)
                .ok_or_else(|| ModelError::Checkpoint(format!("payload too short for {}", p.name)))?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            tensors.push(Tensor::new(p.shape, data)?);
            names.push(p.name);
        }
        let model = Model::from_params(header.config, ParamStore::from_parts(names, tensors)?)?;
        Ok(Self { model, metadata: header.metadata })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Processor;

    #[test]
    fn round_trip_is_bit_exact() {
        for processor in Processor::ALL {
            let cfg = ModelConfig { processor: *processor, latent_dim: 8, message_hidden: 6, ..Default::default() };
            let model = Model::<f32>::new(cfg, 3).unwrap();
            let ck = Checkpoint::new(model, serde_json::json!({"seed": 3, "steps": 0}));
            let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
            assert_eq!(back.model.params(), ck.model.params());
            assert_eq!(back.model.config(), ck.model.config());
            assert_eq!(back.metadata["seed"], 3);
            assert_eq!(back.to_bytes(), ck.to_bytes());
        }
    }

    #[test]
    fn rejects_corruption() {
        let model = Model::<f32>::new(ModelConfig { latent_dim: 4, ..Default::default() }, 0).unwrap();
        let bytes = Checkpoint::new(model, Value::Null).to_bytes();
        assert!(Checkpoint::from_bytes(b"NARTRAJ1........").is_err());
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        let text = String::from_utf8_lossy(&bytes).replace("\"format_version\":1", "\"format_version\":9");
        assert!(Checkpoint::from_bytes(text.as_bytes()).is_err());
    }
}
