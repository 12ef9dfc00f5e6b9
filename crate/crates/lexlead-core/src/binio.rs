//! Little-endian binary readers/writers for the corpus and model containers.
//!
//! All multi-byte values are little-endian; strings are u32-length-prefixed
//! UTF-8. Readers validate lengths against a hard cap so a corrupted header
//! fails cleanly instead of attempting a huge allocation.

use crate::error::{Error, Result};
use std::io::{Read, Write};

/// Upper bound for any length field; corrupt headers fail fast.
const MAX_LEN: u64 = 1 << 33;

pub fn write_u8<W: Write>(w: &mut W, v: u8) -> std::io::Result<()> {
    w.write_all(&[v])
}

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn write_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn write_i64<W: Write>(w: &mut W, v: i64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn write_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_bits().to_le_bytes())
}

pub fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

pub fn write_f64_slice<W: Write>(w: &mut W, xs: &[f64]) -> std::io::Result<()> {
    for &x in xs {
        write_f64(w, x)?;
    }
    Ok(())
}

pub fn write_u32_slice<W: Write>(w: &mut W, xs: &[u32]) -> std::io::Result<()> {
    for &x in xs {
        write_u32(w, x)?;
    }
    Ok(())
}

/// Reader wrapper carrying the file path for error messages.
pub struct Reader<'a, R: Read> {
    inner: R,
    path: &'a str,
}

impl<'a, R: Read> Reader<'a, R> {
    pub fn new(inner: R, path: &'a str) -> Self {
        Reader { inner, path }
    }

    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::CorruptFile {
            path: self.path.to_string(),
            reason: reason.into(),
        }
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner
            .read_exact(buf)
            .map_err(|_| self.corrupt("unexpected end of file"))
    }

    pub fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.fill(&mut b)?;
        Ok(b[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn i64(&mut self) -> Result<i64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(i64::from_le_bytes(b))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    /// Length field validated against `MAX_LEN`.
    pub fn len(&mut self) -> Result<usize> {
        let n = self.u32()? as u64;
        if n > MAX_LEN {
            return Err(self.corrupt(format!("length field {n} exceeds limit")));
        }
        Ok(n as usize)
    }

    pub fn string(&mut self) -> Result<String> {
        let n = self.len()?;
        let mut buf = vec![0u8; n];
        self.fill(&mut buf)?;
        String::from_utf8(buf).map_err(|_| self.corrupt("invalid UTF-8 string"))
    }

    pub fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    pub fn u32_vec(&mut self, n: usize) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.u32()?);
        }
        Ok(out)
    }

    pub fn expect_magic(&mut self, magic: &[u8; 4], what: &str) -> Result<()> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        if &b != magic {
            return Err(self.corrupt(format!("bad magic bytes; not a {what} file")));
        }
        Ok(())
    }
}
