//! Binary model snapshots.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "MHALCKPT"            8 bytes
//! version               u32
//! metadata length       u64, then that many bytes of JSON
//! parameter count       u32
//! per parameter:
//!   name length         u32, then UTF-8 name
//!   ndim                u32, then ndim x u64 extents
//!   values              f64 x prod(extents)
//! ```
//!
//! The JSON metadata holds the model config, label scheme and vocabularies.
//! Values are written as raw IEEE-754 bits, so a load reproduces the saved
//! weights exactly.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelError};
use crate::corpus::{LabelScheme, Vocabs};
use crate::engine::{ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MHALCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    config: ModelConfig,
    scheme: LabelScheme,
    vocabs: Vocabs,
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

const MAX_META: u64 = 1 << 32;

impl Model {
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        let meta = serde_json::to_vec(&Metadata {
            config: self.config.clone(),
            scheme: self.scheme.clone(),
            vocabs: self.vocabs.clone(),
        })?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(meta.len() as u64).to_le_bytes())?;
        w.write_all(&meta)?;
        w.write_all(&(self.params.len() as u32).to_le_bytes())?;
        for (_, name, t) in self.params.iter() {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(t.len() * 8);
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut magic = [0; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let meta_len = read_u64(&mut r)?;
        if meta_len > MAX_META {
            return Err(CheckpointError::Malformed(format!("metadata length {meta_len}")));
        }
        let mut meta = vec![0; meta_len as usize];
        r.read_exact(&mut meta)?;
        let mut meta: Metadata = serde_json::from_slice(&meta)?;
        meta.vocabs.reindex();

        let count = read_u32(&mut r)?;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            let mut name = vec![0; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| CheckpointError::Malformed("non-UTF-8 name".into()))?;
            let ndim = read_u32(&mut r)? as usize;
            if ndim == 0 || ndim > 8 {
                return Err(CheckpointError::Malformed(format!("`{name}` has {ndim} dimensions")));
            }
            let shape = (0..ndim)
                .map(|_| read_u64(&mut r).map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let numel = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|&n| n <= 1 << 31)
                .ok_or_else(|| CheckpointError::Malformed(format!("`{name}` is too large")))?;
            let mut bytes = vec![0; numel * 8];
            r.read_exact(&mut bytes)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
            if params.id_of(&name).is_some() {
                return Err(CheckpointError::Malformed(format!("duplicate parameter `{name}`")));
            }
            params.add(name, t);
        }
        Ok(Model::from_parts(meta.config, meta.scheme, meta.vocabs, params)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let f = std::fs::File::create(path)?;
        self.write_checkpoint(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let f = std::fs::File::open(path)?;
        Self::read_checkpoint(std::io::BufReader::new(f))
    }
}
