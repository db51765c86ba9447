//! Text manifest listing the posed cameras of one articulation state.
//!
//! One record per camera: a name tying it to its image files, the image
//! size, the 3x3 intrinsics matrix row-major, and the 4x4 world-from-camera
//! matrix row-major. Floats are printed with Rust's shortest round-trip
//! formatting, so read(write(x)) reproduces every value bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{Mat4, Rigid};
use crate::scenegen::cameras::{Camera, Intrinsics};

const HEADER: &str = "artsdf-cameras v1";

/// A camera plus the view name its image files are derived from
/// (`<name>.ppm`, and `mask_*`/`test_mask_*` per the dataset layout).
#[derive(Debug, Clone, PartialEq)]
pub struct NamedCamera {
    pub name: String,
    pub camera: Camera,
}

pub fn write_cameras(path: &Path, cameras: &[NamedCamera]) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "count {}", cameras.len());
    for nc in cameras {
        let k = &nc.camera.intrinsics;
        let _ = writeln!(out, "name {}", nc.name);
        let _ = writeln!(out, "size {} {}", k.width, k.height);
        let _ = writeln!(out, "K {} 0 {} 0 {} {} 0 0 1", k.fx, k.cx, k.fy, k.cy);
        let m = nc.camera.world_from_camera.to_mat4();
        let mut line = String::from("P");
        for row in &m {
            for v in row {
                let _ = write!(line, " {v}");
            }
        }
        let _ = writeln!(out, "{line}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_cameras(path: &Path) -> Result<Vec<NamedCamera>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let perr = |detail: &str| Error::parse(path, detail);

    if lines.next() != Some(HEADER) {
        return Err(Error::BadMagic {
            what: "camera manifest".into(),
            path: path.to_path_buf(),
        });
    }
    let count: usize = field(path, lines.next(), "count")?
        .parse()
        .map_err(|_| perr("bad count"))?;

    let mut cameras = Vec::with_capacity(count);
    for _ in 0..count {
        let name = field(path, lines.next(), "name")?;
        let size = field(path, lines.next(), "size")?;
        let (width, height) = {
            let mut it = size.split_whitespace();
            let w: u32 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| perr("bad size"))?;
            let h: u32 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| perr("bad size"))?;
            (w, h)
        };
        let k9 = floats(path, &field(path, lines.next(), "K")?, 9)?;
        for (idx, label) in [(1, "K[0,1]"), (3, "K[1,0]"), (6, "K[2,0]"), (7, "K[2,1]")] {
            if k9[idx] != 0.0 {
                return Err(perr(&format!("{label} must be 0 for a pinhole camera")));
            }
        }
        if k9[8] != 1.0 {
            return Err(perr("K[2,2] must be 1"));
        }
        let p16 = floats(path, &field(path, lines.next(), "P")?, 16)?;
        let mut m: Mat4 = [[0.0; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                m[r][c] = p16[4 * r + c];
            }
        }
        if m[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(perr("pose bottom row must be 0 0 0 1"));
        }
        cameras.push(NamedCamera {
            name,
            camera: Camera {
                intrinsics: Intrinsics {
                    width,
                    height,
                    fx: k9[0],
                    cx: k9[2],
                    fy: k9[4],
                    cy: k9[5],
                },
                world_from_camera: Rigid::from_mat4(&m),
            },
        });
    }
    Ok(cameras)
}

/// Strip `key ` from `line`, erroring if the line is missing or mislabeled.
fn field(path: &Path, line: Option<&str>, key: &str) -> Result<String> {
    let line = line.ok_or_else(|| Error::parse(path, format!("missing '{key}' line")))?;
    line.strip_prefix(key)
        .map(|rest| rest.trim().to_string())
        .ok_or_else(|| Error::parse(path, format!("expected '{key} ...', got '{line}'")))
}

fn floats(path: &Path, text: &str, n: usize) -> Result<Vec<f64>> {
    let vs: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(path, format!("bad float in '{text}'")))?;
    if vs.len() != n {
        return Err(Error::parse(
            path,
            format!("expected {n} numbers, got {}", vs.len()),
        ));
    }
    Ok(vs)
}
