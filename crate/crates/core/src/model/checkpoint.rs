//! `GMCK` checkpoint files, little-endian throughout:
//!
//! ```text
//! magic "GMCK" | version u32 | header length u32 | header (UTF-8 JSON)
//! then per parameter, in store order, until end of file:
//!   name length u32 | name (UTF-8) | rank u32 | dims u32 × rank | f64 × numel
//! ```
//!
//! The JSON header carries the model configuration and the vocabulary.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{layer_spec, Mode, ModelConfig};
use crate::autodiff::Tensor;
use crate::layers::ParamStore;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"GMCK";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ParamStore,
    /// Token strings by id, reserved ids included. May be empty.
    pub vocab: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vec<String>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_string(&Header {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
        })
        .map_err(|e| Error::Format(format!("cannot encode checkpoint header: {e}")))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for (name, t) in self.params.iter() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a GMCK checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}, expected {VERSION}"
            )));
        }
        let hlen = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(hlen)?)
            .map_err(|e| Error::Format(format!("bad checkpoint header: {e}")))?;
        let mut params = ParamStore::new();
        while r.pos < bytes.len() {
            let nlen = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(nlen)?)
                .map_err(|_| Error::Format(format!("non-UTF-8 parameter name at byte {}", r.pos)))?
                .to_string();
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let payload = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("overflow".into()))?)?;
            let data = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            params
                .insert(&name, Tensor::new(shape, data)?)
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        let ck = Checkpoint {
            config: header.config,
            params,
            vocab: header.vocab,
        };
        ck.check_layout()?;
        Ok(ck)
    }

    /// The stored parameters must be exactly the layout the stored config
    /// implies.
    fn check_layout(&self) -> Result<()> {
        self.config
            .validate()
            .map_err(|e| Error::Format(format!("checkpoint config invalid: {e}")))?;
        let spec = layer_spec(&self.config);
        if spec.entries.len() != self.params.len() {
            return Err(Error::Format(format!(
                "{} mode expects {} parameters, checkpoint has {}",
                self.config.mode,
                spec.entries.len(),
                self.params.len()
            )));
        }
        for (e, (name, t)) in spec.entries.iter().zip(self.params.iter()) {
            if e.name != name || e.shape != t.shape() {
                return Err(Error::Format(format!(
                    "parameter {name:?} {:?} does not match expected {:?} {:?}",
                    t.shape(),
                    e.name,
                    e.shape
                )));
            }
        }
        if !self.vocab.is_empty() && self.vocab.len() != self.config.vocab_size {
            return Err(Error::Format(format!(
                "vocabulary has {} tokens, config says {}",
                self.vocab.len(),
                self.config.vocab_size
            )));
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated checkpoint: need {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ck.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

/// Loads and rejects a checkpoint whose mode differs from `mode`.
pub fn load_checkpoint_for_mode(path: impl AsRef<Path>, mode: Mode) -> Result<Checkpoint> {
    let ck = load_checkpoint(path)?;
    if ck.config.mode != mode {
        return Err(Error::Format(format!(
            "checkpoint is {} but {} was requested",
            ck.config.mode, mode
        )));
    }
    Ok(ck)
}
