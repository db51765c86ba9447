//! Standalone latent-code file: the codebook tables without the networks.
//!
//! Inference writes recovered codes here; the render, mesh, interpolation,
//! swap, and animation commands consume them alongside a checkpoint. The
//! table encoding is shared with the checkpoint's codebook section.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{CodeBook, Variant};
use crate::io::bin::{BinReader, BinWriter};
use crate::io::checkpoint::{read_codebook, write_codebook};

const MAGIC: &[u8; 8] = b"ARTSDFCD";
const VERSION: u32 = 1;

/// Latent codes detached from a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CodesFile {
    /// Variant of the model these codes were recovered for; guards against
    /// feeding shared-articulation codes to a per-instance model and so on.
    pub variant: Variant,
    pub codes: CodeBook,
}

pub fn save_codes(path: &Path, codes: &CodesFile) -> Result<()> {
    let mut w = BinWriter::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.str(codes.variant.as_str());
    write_codebook(&mut w, &codes.codes);
    std::fs::write(path, w.into_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_codes(path: &Path) -> Result<CodesFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = BinReader::new(&bytes, path);
    if r.take(8)? != MAGIC {
        return Err(Error::BadMagic {
            what: "codes file".into(),
            path: path.to_path_buf(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::VersionMismatch {
            what: "codes file".into(),
            found: version.to_string(),
            expected: VERSION.to_string(),
        });
    }
    let variant = Variant::parse(&r.str()?)?;
    let codes = read_codebook(&mut r)?;
    r.expect_end()?;
    Ok(CodesFile { variant, codes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::LatentCode;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("artsdf-codes-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn round_trip() {
        let mut codes = CodeBook::default();
        codes
            .shape
            .insert("novel".into(), LatentCode(vec![0.25; 8]));
        codes
            .appearance
            .insert("novel".into(), LatentCode(vec![-1.5; 8]));
        codes
            .articulation
            .insert("novel/state_000".into(), LatentCode(vec![3.0, 4.0]));
        let cf = CodesFile {
            variant: Variant::ArtDef,
            codes,
        };
        let path = tmp("rt.codes");
        save_codes(&path, &cf).unwrap();
        assert_eq!(load_codes(&path).unwrap(), cf);
    }

    #[test]
    fn checkpoint_magic_is_not_a_codes_file() {
        let path = tmp("conf.codes");
        std::fs::write(&path, b"ARTSDFCK\x01\x00\x00\x00rest").unwrap();
        assert!(matches!(load_codes(&path), Err(Error::BadMagic { .. })));
    }
}
