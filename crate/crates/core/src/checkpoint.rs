//! Parameter checkpoint file: magic `MADP`, a format-version byte, the
//! named-segment layout, then the length-prefixed list of 64-bit floats.
//! All integers and floats are little-endian; writes are byte-deterministic.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::params::{Layout, ParameterVector};

const MAGIC: &[u8; 4] = b"MADP";
const VERSION: u8 = 1;

pub fn write_params(params: &ParameterVector, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    let segments = params.layout().segments();
    out.extend_from_slice(&(segments.len() as u32).to_le_bytes());
    for s in segments {
        let name = s.name.as_bytes();
        if name.len() > u16::MAX as usize {
            return Err(Error::Structural(format!(
                "segment name `{}` is too long to serialize",
                s.name
            )));
        }
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(s.offset as u64).to_le_bytes());
        out.extend_from_slice(&(s.len as u64).to_le_bytes());
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Data("checkpoint file is truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_params(path: impl AsRef<Path>) -> Result<ParameterVector> {
    let path = path.as_ref();
    let buf = std::fs::read(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Data(format!(
            "{} is not a parameter checkpoint (bad magic)",
            path.display()
        )));
    }
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(Error::Data(format!(
            "unsupported checkpoint format version {version}"
        )));
    }
    let n_segments = r.u32()? as usize;
    let mut segments = Vec::with_capacity(n_segments);
    for _ in 0..n_segments {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Data("segment name is not UTF-8".into()))?
            .to_string();
        let offset = r.u64()? as usize;
        let len = r.u64()? as usize;
        segments.push((name, offset, len));
    }
    let layout = Layout::new(segments.iter().map(|(n, _, l)| (n.clone(), *l)));
    for (stored, rebuilt) in segments.iter().zip(layout.segments()) {
        if stored.1 != rebuilt.offset {
            return Err(Error::Data(format!(
                "segment `{}` has offset {} but segments must be contiguous (expected {})",
                stored.0, stored.1, rebuilt.offset
            )));
        }
    }
    let n_values = r.u64()? as usize;
    if n_values != layout.total_len() {
        return Err(Error::Data(format!(
            "checkpoint declares {n_values} values but its layout covers {}",
            layout.total_len()
        )));
    }
    let mut values = Vec::with_capacity(n_values);
    for _ in 0..n_values {
        values.push(r.f64()?);
    }
    if r.pos != buf.len() {
        return Err(Error::Data(
            "trailing bytes after checkpoint payload".into(),
        ));
    }
    ParameterVector::new(Arc::new(layout), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, ModelSpec};

    #[test]
    fn roundtrip_preserves_everything() {
        let spec = ModelSpec {
            hash_dim: 16,
            hidden_dim: 3,
            ..ModelSpec::default()
        };
        let p = model::init_params(&spec, 3, 0.01, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.madp");
        write_params(&p, &path).unwrap();
        let q = read_params(&path).unwrap();
        assert_eq!(p.values(), q.values());
        assert_eq!(p.layout().segments(), q.layout().segments());
    }

    #[test]
    fn writes_are_byte_identical() {
        let spec = ModelSpec {
            hash_dim: 16,
            hidden_dim: 3,
            ..ModelSpec::default()
        };
        let p = model::init_params(&spec, 2, 0.01, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.madp");
        let b = dir.path().join("b.madp");
        write_params(&p, &a).unwrap();
        write_params(&p, &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.madp");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(read_params(&path), Err(Error::Data(_))));

        let spec = ModelSpec {
            hash_dim: 16,
            hidden_dim: 3,
            ..ModelSpec::default()
        };
        let p = model::init_params(&spec, 0, 0.01, 1).unwrap();
        let good = dir.path().join("good.madp");
        write_params(&p, &good).unwrap();
        let bytes = std::fs::read(&good).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_params(&path), Err(Error::Data(_))));
    }
}
