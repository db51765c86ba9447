//! Mesh extraction and geometric evaluation: marching cubes, area-weighted
//! surface sampling, Chamfer-L1 and PSNR metrics, and a mesh-based estimator
//! for the opening angle of a hinged part. Meshes travel as minimal
//! Wavefront OBJ text, point clouds as whitespace-separated XYZ rows.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::Image;
use crate::math::{self, Vec3};
use crate::{Error, Result};

mod marching;
pub use marching::marching_cubes;

/// Default mesh-extraction bounds: unit-sphere scenes with margin.
pub const MESH_BOUNDS: (Vec3, Vec3) = ([-1.2, -1.2, -1.2], [1.2, 1.2, 1.2]);

/// Default number of surface samples per shape for Chamfer evaluation.
pub const CHAMFER_SAMPLES: usize = 30_000;

/// Indexed triangle mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Sum of triangle areas.
    pub fn surface_area(&self) -> f64 {
        self.triangles.iter().map(|t| self.triangle_area(t)).sum()
    }

    fn triangle_area(&self, t: &[usize; 3]) -> f64 {
        let ab = math::sub(self.vertices[t[1]], self.vertices[t[0]]);
        let ac = math::sub(self.vertices[t[2]], self.vertices[t[0]]);
        0.5 * math::norm(math::cross(ab, ac))
    }

    /// True when every undirected edge is shared by exactly two triangles
    /// (and the mesh is non-empty).
    pub fn is_watertight(&self) -> bool {
        if self.is_empty() {
            return false;
        }
        let mut counts: std::collections::HashMap<(usize, usize), u32> =
            std::collections::HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts.values().all(|&c| c == 2)
    }

    /// Index bounds and degeneracy check.
    pub fn validate(&self) -> Result<()> {
        for t in &self.triangles {
            for &v in t {
                if v >= self.vertices.len() {
                    return Err(Error::Parse {
                        path: "<mesh>".into(),
                        detail: format!(
                            "triangle references vertex {v} of {}",
                            self.vertices.len()
                        ),
                    });
                }
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Degenerate {
                    context: "mesh validation".into(),
                    detail: format!("triangle {t:?} repeats a vertex"),
                });
            }
        }
        Ok(())
    }
}

/// Unstructured 3D point set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

/// Area-weighted uniform surface samples, reproducible for a given seed.
pub fn sample_mesh_points(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in &mesh.triangles {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::EmptyMesh);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.gen_range(0.0..total);
        let ti = cumulative.partition_point(|&c| c <= r).min(mesh.triangles.len() - 1);
        let t = &mesh.triangles[ti];
        let (u, v): (f64, f64) = (rng.gen(), rng.gen());
        let su = u.sqrt();
        let (a, b, c) = (1.0 - su, su * (1.0 - v), su * v);
        let p = math::add(
            math::add(
                math::scale(mesh.vertices[t[0]], a),
                math::scale(mesh.vertices[t[1]], b),
            ),
            math::scale(mesh.vertices[t[2]], c),
        );
        points.push(p);
    }
    Ok(PointCloud { points })
}

#[inline]
fn dist2(a: Vec3, b: Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Mean over `from` of the Euclidean distance to the nearest point of `to`,
/// by exhaustive pairwise search.
fn mean_nearest_brute(from: &[Vec3], to: &[Vec3]) -> f64 {
    let mut sum = 0.0;
    for &a in from {
        let mut best = f64::INFINITY;
        for &b in to {
            let d = dist2(a, b);
            if d < best {
                best = d;
            }
        }
        sum += best.sqrt();
    }
    sum / from.len() as f64
}

/// Uniform spatial hash for exact nearest-neighbor queries. Cells are probed
/// in expanding Chebyshev rings until no unvisited cell can beat the current
/// best, so the minimum found is the true minimum over the same pairwise
/// distances the brute force computes.
struct NnGrid<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<u32>>,
}

impl<'a> NnGrid<'a> {
    fn new(points: &'a [Vec3]) -> NnGrid<'a> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let extent: Vec3 = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let max_extent = extent[0].max(extent[1]).max(extent[2]);
        // Aim for a handful of points per cell; collapse to one cell for
        // degenerate clouds.
        let target = (points.len() as f64 / 4.0).cbrt().ceil().max(1.0);
        let cell = if max_extent > 0.0 {
            (max_extent / target).max(max_extent * 1e-9)
        } else {
            1.0
        };
        let mut dims = [1usize; 3];
        for a in 0..3 {
            dims[a] = ((extent[a] / cell).floor() as usize + 1).clamp(1, 64);
        }
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        for (i, p) in points.iter().enumerate() {
            let c = Self::cell_of_raw(p, lo, cell, dims);
            buckets[(c[2] * dims[1] + c[1]) * dims[0] + c[0]].push(i as u32);
        }
        NnGrid {
            points,
            origin: lo,
            cell,
            dims,
            buckets,
        }
    }

    fn cell_of_raw(p: &Vec3, origin: Vec3, cell: f64, dims: [usize; 3]) -> [usize; 3] {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let i = ((p[a] - origin[a]) / cell).floor();
            c[a] = (i.max(0.0) as usize).min(dims[a] - 1);
        }
        c
    }

    fn nearest_dist2(&self, q: Vec3) -> f64 {
        let c = Self::cell_of_raw(&q, self.origin, self.cell, self.dims);
        let max_ring = self.dims[0].max(self.dims[1]).max(self.dims[2]);
        let mut best = f64::INFINITY;
        for r in 0..=max_ring {
            if r >= 2 {
                // Any point in a ring-r cell is at least (r-1) cells away.
                let bound = (r - 1) as f64 * self.cell;
                if bound * bound > best {
                    break;
                }
            }
            let ri = r as isize;
            for dz in -ri..=ri {
                for dy in -ri..=ri {
                    for dx in -ri..=ri {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ri {
                            continue;
                        }
                        let (x, y, z) = (
                            c[0] as isize + dx,
                            c[1] as isize + dy,
                            c[2] as isize + dz,
                        );
                        if x < 0
                            || y < 0
                            || z < 0
                            || x >= self.dims[0] as isize
                            || y >= self.dims[1] as isize
                            || z >= self.dims[2] as isize
                        {
                            continue;
                        }
                        let bucket = &self.buckets
                            [(z as usize * self.dims[1] + y as usize) * self.dims[0] + x as usize];
                        for &i in bucket {
                            let d = dist2(q, self.points[i as usize]);
                            if d < best {
                                best = d;
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

fn mean_nearest_grid(from: &[Vec3], to: &[Vec3]) -> f64 {
    let grid = NnGrid::new(to);
    let mut sum = 0.0;
    for &a in from {
        sum += grid.nearest_dist2(a).sqrt();
    }
    sum / from.len() as f64
}

/// Chamfer-L1: the mean of accuracy and completeness, with unsquared
/// Euclidean distances. Uses the grid-accelerated nearest-neighbor search,
/// which returns exactly the brute-force value.
pub fn chamfer_l1(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.points.is_empty() || b.points.is_empty() {
        return Err(Error::EmptyPointCloud {
            context: "chamfer distance".into(),
        });
    }
    Ok(0.5 * (mean_nearest_grid(&a.points, &b.points) + mean_nearest_grid(&b.points, &a.points)))
}

/// Reference O(|A|·|B|) Chamfer-L1 used to validate the accelerated path.
pub fn chamfer_l1_brute(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.points.is_empty() || b.points.is_empty() {
        return Err(Error::EmptyPointCloud {
            context: "chamfer distance".into(),
        });
    }
    Ok(0.5 * (mean_nearest_brute(&a.points, &b.points) + mean_nearest_brute(&b.points, &a.points)))
}

/// Peak signal-to-noise ratio in dB over all pixels and channels of two
/// equally sized images with values in [0, 1]. Identical images report
/// `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch {
            context: "psnr image sizes".into(),
            expected: a.data.len() * 3,
            actual: b.data.len() * 3,
        });
    }
    let mut sq = 0.0;
    for (pa, pb) in a.data.iter().zip(&b.data) {
        for c in 0..3 {
            let d = pa[c] - pb[c];
            sq += d * d;
        }
    }
    let mse = sq / (a.data.len() as f64 * 3.0);
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

/// Result of the hinge opening-angle estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpeningAngle {
    pub degrees: f64,
    /// False when the two half-shapes could not be separated cleanly
    /// (closed or degenerate configurations).
    pub confident: bool,
}

/// Estimate the dihedral angle between the two dominant flat parts of a
/// hinged shape. Mesh vertices are projected into the plane perpendicular to
/// the hinge `axis` through `pivot`, split into two angular clusters at the
/// two widest gaps, and each cluster's principal direction is fit; the
/// answer is the angle between those directions.
pub fn measure_opening_angle(mesh: &TriMesh, axis: Vec3, pivot: Vec3) -> Result<OpeningAngle> {
    let axis = math::normalize(axis);
    // Basis of the projection plane.
    let seed = if axis[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let e1 = math::normalize(math::cross(axis, seed));
    let e2 = math::cross(axis, e1);

    let mut projected: Vec<(f64, [f64; 2])> = Vec::new();
    let mut max_r = 0.0f64;
    for v in &mesh.vertices {
        let d = math::sub(*v, pivot);
        let p = [math::dot(d, e1), math::dot(d, e2)];
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        max_r = max_r.max(r);
        projected.push((r, p));
    }
    if projected.len() < 8 || max_r <= 0.0 {
        return Err(Error::Degenerate {
            context: "opening angle".into(),
            detail: format!("only {} usable vertices", projected.len()),
        });
    }

    // Points hugging the hinge carry no direction information.
    let r_min = 0.15 * max_r;
    let mut angled: Vec<(f64, [f64; 2])> = projected
        .iter()
        .filter(|(r, _)| *r > r_min)
        .map(|&(_, p)| (p[1].atan2(p[0]), p))
        .collect();
    if angled.len() < 8 {
        return Err(Error::Degenerate {
            context: "opening angle".into(),
            detail: "nearly all vertices sit on the hinge".into(),
        });
    }
    angled.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // The two widest angular gaps split the circle into the two clusters.
    let n = angled.len();
    let mut gaps: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let next = angled[(i + 1) % n].0 + if i + 1 == n { std::f64::consts::TAU } else { 0.0 };
            (next - angled[i].0, i)
        })
        .collect();
    gaps.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let (g1, g2) = (gaps[0], gaps[1]);
    let (cut_a, cut_b) = (g1.1.min(g2.1), g1.1.max(g2.1));

    let cluster_dir = |lo: usize, hi: usize| -> Option<[f64; 2]> {
        // Principal direction of the cluster's points about the pivot
        // (second moments; the hinge plane passes through the pivot).
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        let mut syy = 0.0;
        let mut mean = [0.0f64; 2];
        let mut count = 0.0;
        let mut i = lo;
        while i != hi {
            let p = angled[i].1;
            sxx += p[0] * p[0];
            sxy += p[0] * p[1];
            syy += p[1] * p[1];
            mean[0] += p[0];
            mean[1] += p[1];
            count += 1.0;
            i = (i + 1) % n;
        }
        if count < 3.0 {
            return None;
        }
        // Leading eigenvector of [[sxx, sxy], [sxy, syy]].
        let tr = sxx + syy;
        let det = sxx * syy - sxy * sxy;
        let lam = 0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt();
        let mut dir = if sxy.abs() > 1e-18 {
            [lam - syy, sxy]
        } else if sxx >= syy {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
        if norm == 0.0 {
            return None;
        }
        dir = [dir[0] / norm, dir[1] / norm];
        // Point the direction away from the hinge.
        if dir[0] * mean[0] + dir[1] * mean[1] < 0.0 {
            dir = [-dir[0], -dir[1]];
        }
        Some(dir)
    };

    let d1 = cluster_dir((cut_a + 1) % n, (cut_b + 1) % n);
    let d2 = cluster_dir((cut_b + 1) % n, (cut_a + 1) % n);
    let (d1, d2) = match (d1, d2) {
        (Some(a), Some(b)) => (a, b),
        // One side has too few points to fit: a closed or single-plank
        // configuration. Not an error, just nothing trustworthy to measure.
        _ => {
            return Ok(OpeningAngle {
                degrees: 0.0,
                confident: false,
            })
        }
    };
    let cos = (d1[0] * d2[0] + d1[1] * d2[1]).clamp(-1.0, 1.0);
    let degrees = cos.acos().to_degrees();

    // Confidence: both clusters populated and actually separated by a gap
    // wider than the in-cluster spread of a thin plank.
    let size_a = (cut_b + n - cut_a) % n;
    let size_b = n - size_a;
    let min_frac = size_a.min(size_b) as f64 / n as f64;
    let confident = min_frac > 0.1 && g2.0.to_degrees() > 12.0;
    Ok(OpeningAngle { degrees, confident })
}

// ------------------------------------------------------------------- file IO

/// Write a mesh as minimal Wavefront OBJ text (`v x y z`, `f i j k`,
/// 1-based indices).
pub fn write_obj(path: &Path, mesh: &TriMesh) -> Result<()> {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Read the minimal OBJ subset written by [`write_obj`]. Unknown line types
/// are rejected so silently misread files cannot slip through.
pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut mesh = TriMesh::default();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let kind = it.next().unwrap();
        let fields: Vec<&str> = it.collect();
        let bad = |detail: String| Error::parse(path, format!("line {}: {detail}", ln + 1));
        match kind {
            "v" => {
                if fields.len() != 3 {
                    return Err(bad(format!("vertex needs 3 coordinates, got {}", fields.len())));
                }
                let mut v = [0.0; 3];
                for (k, f) in fields.iter().enumerate() {
                    v[k] = f
                        .parse()
                        .map_err(|_| bad(format!("bad coordinate {f:?}")))?;
                }
                mesh.vertices.push(v);
            }
            "f" => {
                if fields.len() != 3 {
                    return Err(bad(format!("face needs 3 indices, got {}", fields.len())));
                }
                let mut t = [0usize; 3];
                for (k, f) in fields.iter().enumerate() {
                    let i: usize = f
                        .parse()
                        .map_err(|_| bad(format!("bad index {f:?}")))?;
                    if i == 0 || i > mesh.vertices.len() {
                        return Err(bad(format!("index {i} out of range")));
                    }
                    t[k] = i - 1;
                }
                mesh.triangles.push(t);
            }
            other => return Err(bad(format!("unsupported element {other:?}"))),
        }
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Write a point cloud as `x y z` rows.
pub fn write_xyz(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut s = String::new();
    for p in &cloud.points {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Read whitespace-separated XYZ rows.
pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                format!("line {}: expected 3 coordinates, got {}", ln + 1, fields.len()),
            ));
        }
        let mut p = [0.0; 3];
        for (k, f) in fields.iter().enumerate() {
            p[k] = f.parse().map_err(|_| {
                Error::parse(path, format!("line {}: bad coordinate {f:?}", ln + 1))
            })?;
        }
        points.push(p);
    }
    Ok(PointCloud { points })
}
