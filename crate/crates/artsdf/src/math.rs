//! Small fixed-size vector/matrix helpers used throughout the crate.
//!
//! Points, directions, and colors are plain `[f64; 3]`; these free functions
//! keep call sites readable without pulling in a linear-algebra dependency for
//! what is only ever 3-vectors and 3x3 / 4x4 matrices.

pub type Vec3 = [f64; 3];
/// Row-major 3x3 matrix.
pub type Mat3 = [[f64; 3]; 3];
/// Row-major 4x4 rigid transform (last row `0 0 0 1`).
pub type Mat4 = [[f64; 4]; 4];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: Vec3) -> Vec3 {
    let n = norm(a);
    if n == 0.0 {
        a
    } else {
        scale(a, 1.0 / n)
    }
}

pub fn mat3_mul_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn mat3_transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

pub const MAT3_IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
pub const MAT4_IDENTITY: Mat4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// Rotation about an arbitrary unit axis by `radians` (Rodrigues' formula).
pub fn rotation_about_axis(axis: Vec3, radians: f64) -> Mat3 {
    let [x, y, z] = normalize(axis);
    let (s, c) = radians.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

/// A rigid transform split into rotation and translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rigid {
    pub rot: Mat3,
    pub trans: Vec3,
}

impl Rigid {
    pub const IDENTITY: Rigid = Rigid {
        rot: MAT3_IDENTITY,
        trans: [0.0; 3],
    };

    pub fn new(rot: Mat3, trans: Vec3) -> Self {
        Rigid { rot, trans }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        add(mat3_mul_vec(&self.rot, p), self.trans)
    }

    /// Rotate a direction (no translation).
    pub fn apply_dir(&self, d: Vec3) -> Vec3 {
        mat3_mul_vec(&self.rot, d)
    }

    pub fn inverse(&self) -> Rigid {
        let rt = mat3_transpose(&self.rot);
        Rigid {
            rot: rt,
            trans: scale(mat3_mul_vec(&rt, self.trans), -1.0),
        }
    }

    /// Transform applying `other` first, then `self`.
    pub fn compose(&self, other: &Rigid) -> Rigid {
        Rigid {
            rot: mat3_mul(&self.rot, &other.rot),
            trans: add(mat3_mul_vec(&self.rot, other.trans), self.trans),
        }
    }

    pub fn to_mat4(&self) -> Mat4 {
        let mut m = MAT4_IDENTITY;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = self.rot[i][j];
            }
            m[i][3] = self.trans[i];
        }
        m
    }

    pub fn from_mat4(m: &Mat4) -> Rigid {
        let mut rot = MAT3_IDENTITY;
        let mut trans = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                rot[i][j] = m[i][j];
            }
            trans[i] = m[i][3];
        }
        Rigid { rot, trans }
    }
}

/// Linear interpolation between scalars.
pub fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Parameter interval where a ray (unit `dir`) is inside the origin-centered
/// sphere of `radius`; `None` if it misses entirely.
pub fn ray_sphere_range(origin: Vec3, dir: Vec3, radius: f64) -> Option<(f64, f64)> {
    // |o + t d|^2 = r^2 with |d| = 1.
    let b = dot(origin, dir);
    let c = dot(origin, origin) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((-b - s, -b + s))
}
