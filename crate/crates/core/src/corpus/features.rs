//! `GMNF` feature files, little-endian throughout:
//!
//! ```text
//! magic "GMNF" | version u32 | clip count u32 | m u32 | D u32
//! then per clip: id length u16 | id (UTF-8) | f32 × m·D, row-major
//! ```
//!
//! Values are stored as `f32`, so a write/read round trip is exact for
//! features that are already `f32`-representable.

use std::fs;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::model::FeatureClip;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"GMNF";
const VERSION: u32 = 1;

pub fn write_features(clips: &[FeatureClip]) -> Result<Vec<u8>> {
    let (m, d) = clips.first().map_or((0, 0), |c| (c.frames(), c.dim()));
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [VERSION, clips.len() as u32, m as u32, d as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for c in clips {
        if (c.frames(), c.dim()) != (m, d) {
            return Err(Error::Data(format!(
                "clip {:?} is {}×{}, corpus is {m}×{d}",
                c.id,
                c.frames(),
                c.dim()
            )));
        }
        let id = c.id.as_bytes();
        let len = u16::try_from(id.len())
            .map_err(|_| Error::Data(format!("clip id {:?} longer than 65535 bytes", c.id)))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id);
        for &v in c.features.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated GMNF file: {what} needs {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn read_features(bytes: &[u8]) -> Result<Vec<FeatureClip>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic at offset 0, expected \"GMNF\"".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported GMNF version {version} at offset 4, expected {VERSION}"
        )));
    }
    let count = r.u32("clip count")? as usize;
    let m = r.u32("m")? as usize;
    let d = r.u32("D")? as usize;
    if count > 0 && (m == 0 || d == 0) {
        return Err(Error::Format(format!("clip shape {m}×{d} at offset 12 must be positive")));
    }
    let mut clips = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let at = r.pos;
        let len = u16::from_le_bytes(r.take(2, "id length")?.try_into().expect("2 bytes"));
        let id = std::str::from_utf8(r.take(len as usize, "id")?)
            .map_err(|_| Error::Format(format!("clip id at offset {at} is not UTF-8")))?
            .to_string();
        let payload = r.take(m * d * 4, "feature values")?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        let clip = FeatureClip::new(id, Tensor::new(vec![m, d], data)?)
            .map_err(|e| Error::Format(format!("clip at offset {at}: {e}")))?;
        clips.push(clip);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes at offset {}",
            bytes.len() - r.pos,
            r.pos
        )));
    }
    Ok(clips)
}

pub fn save_features(path: impl AsRef<Path>, clips: &[FeatureClip]) -> Result<()> {
    fs::write(path, write_features(clips)?)?;
    Ok(())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Vec<FeatureClip>> {
    read_features(&fs::read(path)?)
}
