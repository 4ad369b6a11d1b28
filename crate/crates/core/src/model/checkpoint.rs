//! `RFCK` checkpoint container.
//!
//! Layout, little-endian: magic `RFCK`, `u32` version, `u64` config length, the
//! config as TOML, `u64` scalar count, then `(re, im)` `f64` pairs for every tensor
//! in declaration order, and finally a `u64` holding the byte length of everything
//! before it.

use std::path::Path;

use super::config::ModelConfig;
use super::forward::Model;
use super::params::ModelParams;
use crate::error::{read_file, write_file, Error, Result};
use crate::linalg::C64;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RFCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(model: &Model) -> Result<Vec<u8>> {
    let config = model.config.to_toml()?;
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(config.len() as u64).to_le_bytes());
    buf.extend_from_slice(config.as_bytes());
    buf.extend_from_slice(&(model.params.entry_count() as u64 * 2).to_le_bytes());
    for m in model.params.iter() {
        for z in m.as_slice() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let len = buf.len() as u64;
    buf.extend_from_slice(&len.to_le_bytes());
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let config_len = cur.u64()? as usize;
    let text = std::str::from_utf8(cur.take(config_len)?)
        .map_err(|e| Error::Format(format!("config is not UTF-8: {e}")))?;
    let config = ModelConfig::from_toml(text)?;
    let mut params = ModelParams::init(&config, 0)?;
    let count = cur.u64()? as usize;
    if count != params.entry_count() * 2 {
        return Err(Error::Format(format!(
            "checkpoint holds {count} scalars, config expects {}",
            params.entry_count() * 2
        )));
    }
    for m in params.iter_mut() {
        for z in m.as_mut_slice() {
            *z = C64::new(cur.f64()?, cur.f64()?);
        }
    }
    let body = cur.pos as u64;
    if cur.u64()? != body {
        return Err(Error::Format("length trailer does not match".into()));
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(Model { config, params })
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    write_file(path, &encode_checkpoint(model)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    decode_checkpoint(&read_file(path)?)
}
