//! Little-endian binary encoding helpers shared by the checkpoint and code
//! file formats.
//!
//! Writers build the whole file in memory (artifacts are a few megabytes at
//! most) so a save is a single atomic-ish `fs::write`; readers parse from a
//! byte slice with position tracking and report the offending file on error.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Append-only little-endian encoder.
#[derive(Default)]
pub(crate) struct BinWriter {
    buf: Vec<u8>,
}

impl BinWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    pub fn f64_slice(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.f64(v);
        }
    }

    pub fn usize_slice(&mut self, vs: &[usize]) {
        self.u32(vs.len() as u32);
        for &v in vs {
            self.u32(v as u32);
        }
    }
}

/// Position-tracked little-endian decoder over a fully loaded file.
pub(crate) struct BinReader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: PathBuf,
}

impl<'a> BinReader<'a> {
    pub fn new(buf: &'a [u8], path: &Path) -> Self {
        BinReader {
            buf,
            pos: 0,
            path: path.to_path_buf(),
        }
    }

    fn err(&self, detail: impl Into<String>) -> Error {
        Error::parse(&self.path, format!("{} (at byte {})", detail.into(), self.pos))
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(self.err(format!(
                "truncated: wanted {n} bytes, {} remain",
                self.buf.len() - self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.err("string is not valid UTF-8"))
    }

    pub fn f64_slice(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        // Guard against corrupted lengths before allocating.
        if n.checked_mul(8).map_or(true, |b| self.pos + b > self.buf.len()) {
            return Err(self.err(format!("array length {n} exceeds file size")));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    pub fn usize_slice(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()? as usize;
        if n > self.buf.len() {
            return Err(self.err(format!("array length {n} exceeds file size")));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.u32()? as usize);
        }
        Ok(out)
    }

    /// True once every byte has been consumed.
    pub fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err(format!("{} trailing bytes", self.buf.len() - self.pos)))
        }
    }
}
