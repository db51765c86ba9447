//! Marching cubes over a regular grid.
//!
//! The 256-entry case table is derived once at startup instead of being
//! pasted in as literals: for every corner-sign configuration, the cut edges
//! are paired within each cube face (a saddle face pairs the two edges that
//! share an interior corner), the pairings are walked into closed loops, and
//! each loop becomes a triangle fan. Because the pairing rule depends only on
//! the signs of the four face corners, the two cells sharing a face always
//! cut it with the same segments, which makes the output watertight across
//! cells by construction.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::math::{self, Vec3};
use crate::{Error, Result};

use super::TriMesh;

/// Corner `i` of the unit cube sits at `(i&1, (i>>1)&1, (i>>2)&1)`.
fn corner_pos(i: usize) -> Vec3 {
    [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]
}

/// The 12 cube edges as corner pairs `(a, b)` with `a < b`.
fn edge_ends() -> [(usize, usize); 12] {
    let mut edges = [(0usize, 0usize); 12];
    let mut k = 0;
    for a in 0..8 {
        for bit in [1usize, 2, 4] {
            if a & bit == 0 {
                edges[k] = (a, a | bit);
                k += 1;
            }
        }
    }
    debug_assert_eq!(k, 12);
    edges
}

/// The 6 faces as corner cycles (quad order around the face).
fn face_cycles() -> [[usize; 4]; 6] {
    let mut faces = [[0usize; 4]; 6];
    let mut k = 0;
    for axis in 0..3usize {
        let u = 1usize << ((axis + 1) % 3);
        let v = 1usize << ((axis + 2) % 3);
        for side in 0..2usize {
            let base = side << axis;
            faces[k] = [base, base | u, base | u | v, base | v];
            k += 1;
        }
    }
    faces
}

/// Triangles (as triples of cube-edge indices) for one sign configuration.
type CaseTriangles = Vec<[u8; 3]>;

fn build_case(mask: usize, edges: &[(usize, usize); 12], faces: &[[usize; 4]; 6]) -> CaseTriangles {
    let inside = |c: usize| mask >> c & 1 == 1;
    let edge_index: HashMap<(usize, usize), usize> = edges
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| ((a, b), i))
        .collect();
    let cut = |a: usize, b: usize| inside(a) != inside(b);

    // Each cut edge is paired with exactly one other cut edge per incident
    // face, giving every cut edge degree 2 in the pairing graph.
    let mut partners: Vec<Vec<usize>> = vec![Vec::new(); 12];
    for cycle in faces {
        let mut face_cuts: Vec<(usize, usize)> = Vec::new(); // (edge id, inside corner)
        for i in 0..4 {
            let (a, b) = (cycle[i], cycle[(i + 1) % 4]);
            if cut(a, b) {
                let id = edge_index[&(a.min(b), a.max(b))];
                face_cuts.push((id, if inside(a) { a } else { b }));
            }
        }
        match face_cuts.len() {
            0 => {}
            2 => {
                partners[face_cuts[0].0].push(face_cuts[1].0);
                partners[face_cuts[1].0].push(face_cuts[0].0);
            }
            4 => {
                // Saddle face: keep the two diagonal interior corners apart
                // by joining the edges incident to the same interior corner.
                for i in 0..4 {
                    for j in i + 1..4 {
                        if face_cuts[i].1 == face_cuts[j].1 {
                            partners[face_cuts[i].0].push(face_cuts[j].0);
                            partners[face_cuts[j].0].push(face_cuts[i].0);
                        }
                    }
                }
            }
            n => unreachable!("face with {n} cut edges"),
        }
    }

    // Walk the pairings into closed loops.
    let mut visited = [false; 12];
    let mut triangles = Vec::new();
    for start in 0..12 {
        if visited[start] || partners[start].is_empty() {
            continue;
        }
        debug_assert_eq!(partners[start].len(), 2);
        let mut run = vec![start];
        visited[start] = true;
        let mut prev = start;
        let mut cur = partners[start][0];
        while cur != start {
            visited[cur] = true;
            run.push(cur);
            let next = if partners[cur][0] == prev {
                partners[cur][1]
            } else {
                partners[cur][0]
            };
            prev = cur;
            cur = next;
        }
        debug_assert!(run.len() >= 3);

        // Orient the loop so triangle normals point toward the positive
        // (outside) field: compare the loop's vector area with the mean
        // inside-to-outside direction of its cut edges.
        let midpoint = |e: usize| -> Vec3 {
            let (a, b) = edges[e];
            math::scale(math::add(corner_pos(a), corner_pos(b)), 0.5)
        };
        let mut area = [0.0; 3];
        let mut outward = [0.0; 3];
        for (i, &e) in run.iter().enumerate() {
            let p = midpoint(e);
            let q = midpoint(run[(i + 1) % run.len()]);
            area = math::add(area, math::cross(p, q));
            let (a, b) = edges[e];
            let (ins, out) = if inside(a) { (a, b) } else { (b, a) };
            outward = math::add(outward, math::sub(corner_pos(out), corner_pos(ins)));
        }
        if math::dot(area, outward) < 0.0 {
            run.reverse();
        }
        for i in 1..run.len() - 1 {
            triangles.push([run[0] as u8, run[i] as u8, run[i + 1] as u8]);
        }
    }
    triangles
}

fn case_table() -> &'static [CaseTriangles; 256] {
    static TABLE: OnceLock<Box<[CaseTriangles; 256]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let edges = edge_ends();
        let faces = face_cycles();
        let mut t: Vec<CaseTriangles> = Vec::with_capacity(256);
        for mask in 0..256 {
            t.push(build_case(mask, &edges, &faces));
        }
        t.try_into().unwrap()
    })
}

/// Extract the zero iso-surface of `field` on a regular grid of
/// `resolution^3` cells over `[lo, hi]`. Vertices sit on cell edges by
/// linear interpolation of the sampled values; shared edges share vertices,
/// and exact duplicates are welded, so any closed surface comes out
/// watertight. A field without sign changes yields an empty mesh.
pub fn marching_cubes<F: FnMut(Vec3) -> f64>(
    mut field: F,
    resolution: usize,
    lo: Vec3,
    hi: Vec3,
) -> Result<TriMesh> {
    if resolution < 2 {
        return Err(Error::InvalidConfig(format!(
            "marching cubes needs at least 2 cells per axis, got {resolution}"
        )));
    }
    if !(0..3).all(|a| hi[a] > lo[a] && lo[a].is_finite() && hi[a].is_finite()) {
        return Err(Error::InvalidConfig(
            "marching cubes bounds must be finite with hi > lo".into(),
        ));
    }
    let n = resolution;
    let np = n + 1;
    let step = [
        (hi[0] - lo[0]) / n as f64,
        (hi[1] - lo[1]) / n as f64,
        (hi[2] - lo[2]) / n as f64,
    ];
    let coord = |i: usize, axis: usize| lo[axis] + step[axis] * i as f64;

    let mut values = vec![0.0f64; np * np * np];
    let vidx = |x: usize, y: usize, z: usize| (z * np + y) * np + x;
    for z in 0..np {
        for y in 0..np {
            for x in 0..np {
                values[vidx(x, y, z)] = field([coord(x, 0), coord(y, 1), coord(z, 2)]);
            }
        }
    }

    let edges = edge_ends();
    let table = case_table();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    // Global edge -> vertex index; key is (flat lower-corner index, axis).
    let mut edge_vertex: HashMap<(usize, usize), usize> = HashMap::new();

    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let corner = |i: usize| (x + (i & 1), y + (i >> 1 & 1), z + (i >> 2 & 1));
                let mut mask = 0usize;
                for i in 0..8 {
                    let (cx, cy, cz) = corner(i);
                    if values[vidx(cx, cy, cz)] < 0.0 {
                        mask |= 1 << i;
                    }
                }
                let cases = &table[mask];
                if cases.is_empty() {
                    continue;
                }
                let mut local = [usize::MAX; 12];
                for tri in cases {
                    let mut out = [0usize; 3];
                    for (k, &e) in tri.iter().enumerate() {
                        let e = e as usize;
                        if local[e] == usize::MAX {
                            let (a, b) = edges[e];
                            let (ax, ay, az) = corner(a);
                            let axis = (a ^ b).trailing_zeros() as usize;
                            let key = (vidx(ax, ay, az), axis);
                            local[e] = *edge_vertex.entry(key).or_insert_with(|| {
                                let (bx, by, bz) = corner(b);
                                let fa = values[vidx(ax, ay, az)];
                                let fb = values[vidx(bx, by, bz)];
                                let t = fa / (fa - fb);
                                let pa = [coord(ax, 0), coord(ay, 1), coord(az, 2)];
                                let pb = [coord(bx, 0), coord(by, 1), coord(bz, 2)];
                                vertices.push(math::add(pa, math::scale(math::sub(pb, pa), t)));
                                vertices.len() - 1
                            });
                        }
                        out[k] = local[e];
                    }
                    triangles.push(out);
                }
            }
        }
    }

    Ok(weld_and_clean(vertices, triangles))
}

/// Merge vertices at bitwise-identical positions (interpolation can land two
/// different grid edges on the same point when a corner value is exactly
/// zero), drop the zero-area triangles that produces, and compact away
/// unused vertices.
fn weld_and_clean(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> TriMesh {
    let mut canon: HashMap<[u64; 3], usize> = HashMap::new();
    let mut remap = vec![0usize; vertices.len()];
    for (i, v) in vertices.iter().enumerate() {
        let key = [v[0].to_bits(), v[1].to_bits(), v[2].to_bits()];
        remap[i] = *canon.entry(key).or_insert(i);
    }

    let mut used = vec![usize::MAX; vertices.len()];
    let mut out_vertices: Vec<Vec3> = Vec::new();
    let mut out_triangles: Vec<[usize; 3]> = Vec::new();
    for t in &triangles {
        let m = [remap[t[0]], remap[t[1]], remap[t[2]]];
        if m[0] == m[1] || m[1] == m[2] || m[0] == m[2] {
            continue;
        }
        let ab = math::sub(vertices[m[1]], vertices[m[0]]);
        let ac = math::sub(vertices[m[2]], vertices[m[0]]);
        if math::norm(math::cross(ab, ac)) == 0.0 {
            continue;
        }
        let mut tri = [0usize; 3];
        for (k, &v) in m.iter().enumerate() {
            if used[v] == usize::MAX {
                used[v] = out_vertices.len();
                out_vertices.push(vertices[v]);
            }
            tri[k] = used[v];
        }
        out_triangles.push(tri);
    }
    TriMesh {
        vertices: out_vertices,
        triangles: out_triangles,
    }
}
