//! `ckpt-v1` model checkpoints.
//!
//! Layout: the line `ckpt-v1`, one line of JSON header (policy config,
//! embedding source, optional data spec and the tensor table), then every
//! tensor's values as little-endian f64 in table order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tango_core::embed::EmbeddingTable;
use tango_core::harness::DataSpec;
use tango_core::nn::{ParamStore, Tensor};
use tango_core::policy::{PolicyConfig, TangoModel};

use crate::config::EmbeddingSource;
use crate::error::{Error, Result};

pub const CKPT_SCHEMA: &str = "ckpt-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub policy: PolicyConfig,
    pub embeddings: EmbeddingSource,
    /// How the training data was produced, so evaluation sets can be rebuilt.
    #[serde(default)]
    pub data: Option<DataSpec>,
    pub tensors: Vec<TensorEntry>,
}

/// A trained model with everything needed to run it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: TangoModel,
    pub embeddings: EmbeddingSource,
    pub data: Option<DataSpec>,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let tensors = self
            .model
            .params
            .iter()
            .map(|(_, p)| TensorEntry { name: p.name.clone(), shape: p.value.shape() })
            .collect();
        let header = Header {
            schema: CKPT_SCHEMA.into(),
            policy: self.model.config.clone(),
            embeddings: self.embeddings.clone(),
            data: self.data.clone(),
            tensors,
        };
        let mut out = format!("{CKPT_SCHEMA}\n{}\n", serde_json::to_string(&header).expect("header serializes")).into_bytes();
        for (_, p) in self.model.params.iter() {
            for x in p.value.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
        let bad = |m: String| Error::Checkpoint(m);
        let mut parts = bytes.splitn(3, |b| *b == b'\n');
        let magic = parts.next().unwrap_or_default();
        if magic != CKPT_SCHEMA.as_bytes() {
            return Err(bad(format!("not a {CKPT_SCHEMA} file (starts with {:?})", String::from_utf8_lossy(&magic[..magic.len().min(16)]))));
        }
        let header_bytes = parts.next().ok_or_else(|| bad("missing header".into()))?;
        let payload = parts.next().ok_or_else(|| bad("missing payload".into()))?;
        let header: Header = serde_json::from_slice(header_bytes).map_err(|e| bad(format!("header: {e}")))?;
        if header.schema != CKPT_SCHEMA {
            return Err(bad(format!("header schema `{}`", header.schema)));
        }
        let expected: usize = header.tensors.iter().map(|t| t.shape[0] * t.shape[1] * 8).sum();
        if payload.len() != expected {
            return Err(bad(format!("payload holds {} bytes, tensor table needs {expected}", payload.len())));
        }
        let mut store = ParamStore::new();
        let mut offset = 0;
        for t in &header.tensors {
            let n = t.shape[0] * t.shape[1];
            let values = payload[offset..offset + 8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            offset += 8 * n;
            store.add(&t.name, Tensor::from_vec(t.shape[0], t.shape[1], values)?);
        }
        let mut model = TangoModel::new(header.policy, 0)?;
        model.params.load_values(&store).map_err(|e| bad(e.to_string()))?;
        Ok(Checkpoint { model, embeddings: header.embeddings, data: header.data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        Checkpoint::decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// The table the model was trained with; fails when its width does not
    /// match the policy.
    pub fn table(&self) -> Result<EmbeddingTable> {
        let (retrofitted, base) = self.embeddings.tables()?;
        let table = if self.model.config.ablations.base_embeddings { base } else { retrofitted };
        if table.dim != self.model.config.embed_dim {
            return Err(Error::Checkpoint(format!(
                "embedding width {} differs from policy embed_dim {}",
                table.dim, self.model.config.embed_dim
            )));
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Checkpoint {
        let config = PolicyConfig { hidden: 8, ..PolicyConfig::default() };
        Checkpoint { model: TangoModel::new(config, 5).unwrap(), embeddings: EmbeddingSource::default(), data: Some(DataSpec::default()) }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = small();
        let bytes = c.encode();
        assert!(bytes.starts_with(b"ckpt-v1\n{"));
        let back = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.encode(), bytes);
        assert_eq!(back.table().unwrap().dim, c.model.config.embed_dim);
    }

    #[test]
    fn payload_is_little_endian_f64() {
        let c = small();
        let bytes = c.encode();
        let n = c.model.params.scalar_count();
        let payload = &bytes[bytes.len() - 8 * n..];
        let first = c.model.params.iter().next().unwrap().1.value.data()[0];
        assert_eq!(&payload[..8], &first.to_le_bytes());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = small().encode();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 8]).is_err());
        assert!(Checkpoint::decode(b"ckpt-v2\n{}\n").is_err());
        let text = String::from_utf8_lossy(&bytes[..bytes.iter().position(|b| *b == b'\n').unwrap() + 1]).to_string();
        assert_eq!(text, "ckpt-v1\n");
        // a header whose config disagrees with the tensor table
        let mut c = small();
        c.model.config.hidden = 9;
        assert!(Checkpoint::decode(&c.encode()).is_err());
        let mut wide = small();
        wide.embeddings = EmbeddingSource::Desk { dim: 8, seed: 0 };
        assert!(Checkpoint::decode(&wide.encode()).unwrap().table().is_err());
    }
}
