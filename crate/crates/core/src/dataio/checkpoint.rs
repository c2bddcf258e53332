//! `RPDC` checkpoint container.
//!
//! Layout (little-endian): magic `RPDC`, `u32` entry count, then per entry a
//! `u16` name length, the UTF-8 name, a `u8` rank, `rank` `u32` dims and the
//! values as `f32`. The file ends with a `u32` epoch and a 32-byte config
//! digest.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use sha2::{Digest, Sha256};

use super::pcb::Cursor;
use crate::error::{Error, Result};
use crate::nets::{LatentCode, ModelParams, Role, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RPDC";
pub type ConfigDigest = [u8; 32];

/// SHA-256 of a canonical configuration rendering.
pub fn config_digest(canonical: &str) -> ConfigDigest {
    Sha256::digest(canonical.as_bytes()).into()
}

pub fn digest_hex(d: &ConfigDigest) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Flat set of named tensors plus training epoch and config digest.
///
/// Network parameters are namespaced as `<group>/<entry>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub entries: IndexMap<String, Tensor>,
    pub epoch: u32,
    pub digest: ConfigDigest,
}

impl Checkpoint {
    pub fn new(epoch: u32, digest: ConfigDigest) -> Self {
        Self { entries: IndexMap::new(), epoch, digest }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if name.len() > u16::MAX as usize {
            return Err(Error::argument("entry name too long"));
        }
        if tensor.shape().len() > u8::MAX as usize || tensor.shape().iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::structural(&name, "shape not representable"));
        }
        if self.entries.insert(name.clone(), tensor).is_some() {
            return Err(Error::structural(name, "duplicate checkpoint entry"));
        }
        Ok(())
    }

    pub fn insert_params(&mut self, group: &str, params: &ModelParams) -> Result<()> {
        for (name, t) in params.iter() {
            self.insert(format!("{group}/{name}"), t.clone())?;
        }
        Ok(())
    }

    /// Rebuilds the parameter group `group`, in stored order.
    pub fn params(&self, group: &str, role: Role) -> Result<ModelParams> {
        let prefix = format!("{group}/");
        let mut out = ModelParams::new(role);
        for (name, t) in &self.entries {
            if let Some(rest) = name.strip_prefix(&prefix) {
                out.insert(rest, t.clone())?;
            }
        }
        if out.is_empty() {
            return Err(Error::structural(group, "group missing from checkpoint"));
        }
        Ok(out)
    }

    pub fn has_group(&self, group: &str) -> bool {
        let prefix = format!("{group}/");
        self.entries.keys().any(|k| k.starts_with(&prefix))
    }

    pub fn insert_codes<'a>(
        &mut self,
        group: &str,
        codes: impl IntoIterator<Item = (u32, &'a LatentCode)>,
    ) -> Result<()> {
        for (cat, code) in codes {
            self.insert(format!("{group}/{cat}"), Tensor::new(vec![code.dim()], code.0.clone())?)?;
        }
        Ok(())
    }

    pub fn codes(&self, group: &str) -> Result<Vec<(u32, LatentCode)>> {
        let prefix = format!("{group}/");
        let mut out = Vec::new();
        for (name, t) in &self.entries {
            if let Some(rest) = name.strip_prefix(&prefix) {
                let cat = rest.parse().map_err(|_| Error::structural(name, "latent key is not a category id"))?;
                out.push((cat, LatentCode::new(t.data().to_vec())?));
            }
        }
        Ok(out)
    }

    /// Compares the stored digest with `expected`, warning on mismatch.
    pub fn check_digest(&self, expected: &ConfigDigest) -> bool {
        let ok = &self.digest == expected;
        if !ok {
            log::warn!(
                "checkpoint config digest {} differs from current config {}",
                digest_hex(&self.digest),
                digest_hex(expected)
            );
        }
        ok
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.digest);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut cur = Cursor { buf, pos: 0 };
        if cur.take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::Format { offset: 0, reason: "bad magic, expected RPDC".into() });
        }
        let count = cur.u32("entry count")?;
        let mut entries = IndexMap::new();
        for _ in 0..count {
            let at = cur.pos;
            let len = u16::from_le_bytes(cur.take(2, "name length")?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(cur.take(len, "entry name")?)
                .map_err(|_| Error::Format { offset: at + 2, reason: "entry name is not UTF-8".into() })?
                .to_string();
            let rank = cur.take(1, "rank")?[0] as usize;
            let dims_at = cur.pos;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(cur.u32("dim")? as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d).filter(|_| d > 0))
                .filter(|&n| n.checked_mul(4).is_some_and(|b| b <= buf.len() - cur.pos))
                .ok_or_else(|| Error::Format {
                    offset: dims_at,
                    reason: format!("invalid dims {shape:?} for `{name}`"),
                })?;
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(cur.f32("values")? as f64);
            }
            let tensor = Tensor::new(shape, data).map_err(|e| Error::Format { offset: at, reason: e.to_string() })?;
            if entries.insert(name.clone(), tensor).is_some() {
                return Err(Error::Format { offset: at, reason: format!("duplicate entry `{name}`") });
            }
        }
        let epoch = cur.u32("epoch")?;
        let digest: ConfigDigest = cur.take(32, "config digest")?.try_into().unwrap();
        if cur.pos != buf.len() {
            return Err(Error::Format { offset: cur.pos, reason: "trailing bytes".into() });
        }
        Ok(Self { entries, epoch, digest })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ckpt.encode()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    Checkpoint::decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
