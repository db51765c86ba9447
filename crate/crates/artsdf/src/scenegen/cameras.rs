//! Camera models and view rigs.
//!
//! Training views sit on the 60 vertices of a rhombicosidodecahedron,
//! inference views on the 6 vertices of an octahedron (three antipodal
//! pairs); both rigs are randomly rotated as a whole by a seeded rotation so
//! datasets don't share axis-aligned structure. Every camera looks at the
//! origin from a fixed radius.
//!
//! Camera frame convention: +z forward, +x right, +y down (image rows grow
//! downward). A pixel `(px, py)` maps to the camera-frame direction
//! `((px - cx)/fx, (py - cy)/fy, 1)`, normalized; the principal point maps
//! exactly to the optical axis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{self, Mat3, Rigid, Vec3};

/// Pinhole intrinsics plus image size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Square-pixel intrinsics from a vertical field of view in degrees,
    /// with the principal point at the image center.
    pub fn from_fov(width: u32, height: u32, fov_y_deg: f64) -> Intrinsics {
        let f = 0.5 * height as f64 / (0.5 * fov_y_deg.to_radians()).tan();
        Intrinsics {
            width,
            height,
            fx: f,
            fy: f,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
        }
    }
}

/// A posed pinhole camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub world_from_camera: Rigid,
}

/// A world-space ray with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Camera {
    /// Camera at `eye` looking at `target`. `up` orients the image (it maps
    /// to image-up); when it is (anti)parallel to the view direction a fixed
    /// fallback axis is used instead.
    pub fn look_at(intrinsics: Intrinsics, eye: Vec3, target: Vec3, up: Vec3) -> Camera {
        let forward = math::normalize(math::sub(target, eye));
        let mut up = math::normalize(up);
        if math::dot(forward, up).abs() > 0.999 {
            up = if forward[0].abs() < 0.9 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 0.0, 1.0]
            };
        }
        let right = math::normalize(math::cross(forward, up));
        let down = math::cross(forward, right);
        let rot: Mat3 = [
            [right[0], down[0], forward[0]],
            [right[1], down[1], forward[1]],
            [right[2], down[2], forward[2]],
        ];
        Camera {
            intrinsics,
            world_from_camera: Rigid::new(rot, eye),
        }
    }

    pub fn position(&self) -> Vec3 {
        self.world_from_camera.trans
    }

    /// World-space ray through pixel `(px, py)` (pixel centers at integer
    /// coordinates).
    pub fn ray(&self, px: f64, py: f64) -> Ray {
        let k = &self.intrinsics;
        let dir_cam = math::normalize([(px - k.cx) / k.fx, (py - k.cy) / k.fy, 1.0]);
        Ray {
            origin: self.position(),
            dir: self.world_from_camera.apply_dir(dir_cam),
        }
    }
}

/// Which view rig to place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rig {
    /// 60 directions: rhombicosidodecahedron vertices.
    Training,
    /// 6 directions: octahedron vertices (three antipodal pairs).
    Inference,
}

/// Unit directions of the unrotated rig, in a fixed deterministic order.
pub fn rig_directions(rig: Rig) -> Vec<Vec3> {
    match rig {
        Rig::Training => rhombicosidodecahedron(),
        Rig::Inference => vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ],
    }
}

/// Vertices of a rhombicosidodecahedron: even permutations of
/// `(±1, ±1, ±phi^3)`, `(±phi^2, ±phi, ±2 phi)`, and `(±(2+phi), 0, ±phi^2)`,
/// normalized to unit length.
fn rhombicosidodecahedron() -> Vec<Vec3> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut verts = Vec::with_capacity(60);
    let mut push_even_perms = |base: Vec3| {
        verts.push(math::normalize(base));
        verts.push(math::normalize([base[1], base[2], base[0]]));
        verts.push(math::normalize([base[2], base[0], base[1]]));
    };
    let signs = [1.0f64, -1.0];
    for &sx in &signs {
        for &sy in &signs {
            for &sz in &signs {
                push_even_perms([sx * 1.0, sy * 1.0, sz * phi.powi(3)]);
                push_even_perms([sx * phi * phi, sy * phi, sz * 2.0 * phi]);
            }
        }
    }
    for &sx in &signs {
        for &sz in &signs {
            push_even_perms([sx * (2.0 + phi), 0.0, sz * phi * phi]);
        }
    }
    verts
}

/// Uniformly random rotation from a seed (Shoemake's quaternion method).
pub fn random_rotation(seed: u64) -> Mat3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let two_pi = 2.0 * std::f64::consts::PI;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = [
        a * (two_pi * u2).sin(),
        a * (two_pi * u2).cos(),
        b * (two_pi * u3).sin(),
        b * (two_pi * u3).cos(),
    ];
    let (x, y, z, w) = (q[0], q[1], q[2], q[3]);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Place look-at-origin cameras on a seeded random rotation of `rig`, at the
/// given orbit radius.
pub fn place_cameras(rig: Rig, seed: u64, radius: f64, intrinsics: Intrinsics) -> Vec<Camera> {
    let rot = random_rotation(seed);
    rig_directions(rig)
        .into_iter()
        .map(|d| {
            let dir = math::mat3_mul_vec(&rot, d);
            let eye = math::scale(dir, radius);
            Camera::look_at(intrinsics, eye, [0.0; 3], [0.0, 1.0, 0.0])
        })
        .collect()
}
