//! Binary checkpoint format.
//!
//! ```text
//! magic "HINTKGCK" | version u32 | config length u32 | config text
//! users u64 | items u64 | tuples u64 | adam step u64
//! tensor count u32 | per tensor: name length u16, name, rows u64, cols u64, byte offset u64
//! payload length u64 | payload (f32 little-endian)
//! ```
//!
//! All integers are little-endian. The config is the canonical `key=value`
//! text, so a checkpoint carries everything needed to rebuild the model.

use std::fs;
use std::path::Path;

use hintkg_core::config::TrainConfig;
use hintkg_core::model::{HintModel, ModelDims};
use hintkg_core::tensor::Matrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HINTKGCK";
pub const FORMAT_VERSION: u32 = 1;

pub fn to_bytes(model: &HintModel<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let config = model.config.to_canonical();
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    for v in [model.dims.users, model.dims.items, model.dims.tuples] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&model.adam.step.to_le_bytes());

    let tensors = model.all_tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    let mut offset = 0u64;
    for (name, t) in &tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
        out.extend_from_slice(&offset.to_le_bytes());
        offset += 4 * t.as_slice().len() as u64;
    }
    out.extend_from_slice(&offset.to_le_bytes());
    for (_, t) in &tensors {
        for x in t.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::CorruptCheckpoint(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64(what)?).map_err(|_| Error::CorruptCheckpoint(format!("{what} does not fit in memory")))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<HintModel<f32>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic bytes".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let config_len = r.u32("config length")? as usize;
    let config_text = std::str::from_utf8(r.take(config_len, "config")?).map_err(|_| Error::CorruptCheckpoint("config is not UTF-8".into()))?;
    let config = TrainConfig::from_canonical(config_text)?;
    let dims = ModelDims {
        users: r.usize("users")?,
        items: r.usize("items")?,
        tuples: r.usize("tuples")?,
    };
    let step = r.u64("adam step")?;

    let count = r.u32("tensor count")? as usize;
    let mut manifest = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let len = r.u16("tensor name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "tensor name")?)
            .map_err(|_| Error::CorruptCheckpoint("tensor name is not UTF-8".into()))?
            .to_owned();
        let rows = r.usize("rows")?;
        let cols = r.usize("cols")?;
        let offset = r.usize("offset")?;
        manifest.push((name, rows, cols, offset));
    }
    let payload_len = r.usize("payload length")?;
    let payload = r.take(payload_len, "payload")?;
    if r.pos != buf.len() {
        return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", buf.len() - r.pos)));
    }

    let mut tensors = Vec::with_capacity(manifest.len());
    for (name, rows, cols, offset) in manifest {
        let bytes = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::CorruptCheckpoint(format!("tensor `{name}` is too large")))?;
        let end = offset.checked_add(bytes).filter(|&e| e <= payload.len());
        let Some(end) = end else {
            return Err(Error::CorruptCheckpoint(format!("tensor `{name}` runs past the payload")));
        };
        let data: Vec<f32> = payload[offset..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push((name, Matrix::from_vec(rows, cols, data)?));
    }
    HintModel::from_parts(config, dims, step, tensors).map_err(|e| match e {
        hintkg_core::Error::Integrity(m) => Error::ConfigMismatch(m),
        hintkg_core::Error::Shape { what, expected, found } => Error::ConfigMismatch(format!("{what}: expected {expected}, found {found}")),
        other => other.into(),
    })
}

pub fn save_checkpoint(model: &HintModel<f32>, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<HintModel<f32>> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&buf)
}

/// Loads a checkpoint and refuses it when its architecture or the data
/// dimensions differ from what the caller is about to use.
pub fn load_checkpoint_for(path: &Path, config: &TrainConfig, dims: Option<ModelDims>) -> Result<HintModel<f32>> {
    let model = load_checkpoint(path)?;
    if let Some(why) = model.config.architecture_mismatch(config) {
        return Err(Error::ConfigMismatch(why));
    }
    if let Some(d) = dims {
        if d != model.dims {
            return Err(Error::ConfigMismatch(format!("checkpoint dims {:?} do not match the dataset {:?}", model.dims, d)));
        }
    }
    Ok(model)
}
