//! Binary PPM (P6) and PGM (P5) image files, maxval 255.
//!
//! These formats are fully specified in a dozen lines, need no codec
//! dependency, and are byte-exact: writing the same image twice produces
//! identical files, which the dataset determinism contract relies on.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Image, MaskImage};

/// Clamp a linear [0, 1] channel to a byte with round-to-nearest.
pub fn channel_to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_ppm(path: &Path, image: &Image) -> Result<()> {
    let mut buf = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    buf.reserve(image.data.len() * 3);
    for px in &image.data {
        for c in 0..3 {
            buf.push(channel_to_byte(px[c]));
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_pgm(path: &Path, mask: &MaskImage) -> Result<()> {
    let mut buf = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    buf.reserve(mask.data.len());
    for &inside in &mask.data {
        buf.push(if inside { 255 } else { 0 });
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Header fields shared by P5/P6: width, height, and the payload offset.
fn parse_header(path: &Path, bytes: &[u8], magic: &str) -> Result<(u32, u32, usize)> {
    // Header tokens are whitespace-separated; '#' starts a comment that runs
    // to end of line. After the maxval token exactly one whitespace byte
    // precedes the binary payload.
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Result<String> {
        let mut t = String::new();
        while *pos < bytes.len() {
            let b = bytes[*pos];
            if b == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                if !t.is_empty() {
                    break;
                }
                *pos += 1;
            } else {
                t.push(b as char);
                *pos += 1;
            }
        }
        if t.is_empty() {
            Err(Error::parse(path, "truncated header"))
        } else {
            Ok(t)
        }
    };
    let found = token(&mut pos)?;
    if found != magic {
        return Err(Error::BadMagic {
            what: format!("{magic} image"),
            path: path.to_path_buf(),
        });
    }
    let width: u32 = token(&mut pos)?
        .parse()
        .map_err(|_| Error::parse(path, "bad width"))?;
    let height: u32 = token(&mut pos)?
        .parse()
        .map_err(|_| Error::parse(path, "bad height"))?;
    let maxval = token(&mut pos)?;
    if maxval != "255" {
        return Err(Error::parse(path, format!("unsupported maxval {maxval}")));
    }
    // Single whitespace separator before the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::parse(path, "missing separator before raster"));
    }
    Ok((width, height, pos + 1))
}

pub fn read_ppm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (width, height, off) = parse_header(path, &bytes, "P6")?;
    let n = width as usize * height as usize;
    let raster = bytes
        .get(off..off + 3 * n)
        .ok_or_else(|| Error::parse(path, "truncated raster"))?;
    let mut image = Image::new(width, height);
    for (i, px) in image.data.iter_mut().enumerate() {
        for c in 0..3 {
            px[c] = raster[3 * i + c] as f64 / 255.0;
        }
    }
    Ok(image)
}

pub fn read_pgm(path: &Path) -> Result<MaskImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (width, height, off) = parse_header(path, &bytes, "P5")?;
    let n = width as usize * height as usize;
    let raster = bytes
        .get(off..off + n)
        .ok_or_else(|| Error::parse(path, "truncated raster"))?;
    let mut mask = MaskImage::new(width, height);
    for (i, out) in mask.data.iter_mut().enumerate() {
        match raster[i] {
            0 => *out = false,
            255 => *out = true,
            other => {
                return Err(Error::parse(
                    path,
                    format!("mask byte {other} is not strictly binary (0 or 255)"),
                ))
            }
        }
    }
    Ok(mask)
}
