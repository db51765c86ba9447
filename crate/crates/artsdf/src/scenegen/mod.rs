//! Procedural articulated scenes with exact signed distance fields.
//!
//! Scenes are unions of rigid primitive parts, each optionally driven by one
//! articulation degree of freedom (a revolute hinge in degrees or a prismatic
//! slide in world units). Three built-in generators — laptop, drawer, cabinet
//! — produce per-instance size and color variations from a seed and normalize
//! every instance to fit the unit sphere across its whole articulation range,
//! which is the coordinate convention the learned models assume.

pub mod cameras;
pub mod export;
pub mod render_ref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{self, Rigid, Vec3};

/// Solid primitive, defined in its local frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// Box with half extents `half` plus an everywhere-rounded shell of
    /// `radius` (total extent `half + radius` per axis).
    RoundedBox { half: Vec3, radius: f64 },
    /// Capped cylinder along the local y axis.
    Cylinder { half_height: f64, radius: f64 },
}

impl Primitive {
    /// Exact signed distance in the local frame.
    pub fn sdf(&self, p: Vec3) -> f64 {
        match *self {
            Primitive::RoundedBox { half, radius } => {
                let d = [
                    p[0].abs() - half[0],
                    p[1].abs() - half[1],
                    p[2].abs() - half[2],
                ];
                let outside = [d[0].max(0.0), d[1].max(0.0), d[2].max(0.0)];
                let inside = d[0].max(d[1]).max(d[2]).min(0.0);
                math::norm(outside) + inside - radius
            }
            Primitive::Cylinder {
                half_height,
                radius,
            } => {
                let dr = (p[0] * p[0] + p[2] * p[2]).sqrt() - radius;
                let dy = p[1].abs() - half_height;
                let outside = (dr.max(0.0).powi(2) + dy.max(0.0).powi(2)).sqrt();
                dr.max(dy).min(0.0) + outside
            }
        }
    }

    /// Exact gradient of [`Primitive::sdf`] (a fixed subgradient on the
    /// measure-zero kink sets).
    pub fn gradient(&self, p: Vec3) -> Vec3 {
        match *self {
            Primitive::RoundedBox { half, .. } => {
                let d = [
                    p[0].abs() - half[0],
                    p[1].abs() - half[1],
                    p[2].abs() - half[2],
                ];
                let sign = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
                if d[0] > 0.0 || d[1] > 0.0 || d[2] > 0.0 {
                    let o = [d[0].max(0.0), d[1].max(0.0), d[2].max(0.0)];
                    let n = math::norm(o);
                    [
                        o[0] * sign(p[0]) / n,
                        o[1] * sign(p[1]) / n,
                        o[2] * sign(p[2]) / n,
                    ]
                } else {
                    // Inside: toward the nearest face.
                    let mut best = 0;
                    for i in 1..3 {
                        if d[i] > d[best] {
                            best = i;
                        }
                    }
                    let mut g = [0.0; 3];
                    g[best] = sign(p[best]);
                    g
                }
            }
            Primitive::Cylinder {
                half_height,
                radius,
            } => {
                let rxz = (p[0] * p[0] + p[2] * p[2]).sqrt();
                let dr = rxz - radius;
                let dy = p[1].abs() - half_height;
                let radial = if rxz > 1e-12 {
                    [p[0] / rxz, 0.0, p[2] / rxz]
                } else {
                    [1.0, 0.0, 0.0]
                };
                let ysign = if p[1] < 0.0 { -1.0 } else { 1.0 };
                if dr > 0.0 || dy > 0.0 {
                    let (or, oy) = (dr.max(0.0), dy.max(0.0));
                    let n = (or * or + oy * oy).sqrt();
                    [
                        radial[0] * or / n,
                        ysign * oy / n,
                        radial[2] * or / n,
                    ]
                } else if dr > dy {
                    radial
                } else {
                    [0.0, ysign, 0.0]
                }
            }
        }
    }

    /// Radius of a bounding sphere around the local origin.
    fn bounding_radius(&self) -> f64 {
        match *self {
            Primitive::RoundedBox { half, radius } => math::norm(half) + radius,
            Primitive::Cylinder {
                half_height,
                radius,
            } => (half_height * half_height + radius * radius).sqrt(),
        }
    }

    fn scaled(&self, s: f64) -> Primitive {
        match *self {
            Primitive::RoundedBox { half, radius } => Primitive::RoundedBox {
                half: math::scale(half, s),
                radius: radius * s,
            },
            Primitive::Cylinder {
                half_height,
                radius,
            } => Primitive::Cylinder {
                half_height: half_height * s,
                radius: radius * s,
            },
        }
    }
}

/// How an articulation value moves a part.
#[derive(Debug, Clone, PartialEq)]
pub enum Joint {
    Fixed,
    /// Rotation of `value` degrees about the axis through `pivot`.
    Revolute { axis: Vec3, pivot: Vec3 },
    /// Translation of `value` world units along `axis`.
    Prismatic { axis: Vec3 },
}

impl Joint {
    /// World-frame transform applied on top of a part's rest pose.
    pub fn transform(&self, value: f64) -> Rigid {
        match self {
            Joint::Fixed => Rigid::IDENTITY,
            Joint::Revolute { axis, pivot } => {
                let rot = math::rotation_about_axis(*axis, value.to_radians());
                let trans = math::sub(*pivot, math::mat3_mul_vec(&rot, *pivot));
                Rigid::new(rot, trans)
            }
            Joint::Prismatic { axis } => {
                Rigid::new(math::MAT3_IDENTITY, math::scale(math::normalize(*axis), value))
            }
        }
    }
}

/// One rigid part of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub name: String,
    pub primitive: Primitive,
    /// Part-local to world at articulation value 0.
    pub rest_pose: Rigid,
    pub albedo: [f64; 3],
    pub joint: Joint,
    /// Index into the articulation vector; `None` for static parts.
    pub dof: Option<usize>,
}

/// An articulated scene: parts plus articulation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub parts: Vec<Part>,
    /// Per-DOF (min, max) articulation values. Revolute DOFs are in degrees,
    /// prismatic in (normalized) world units.
    pub articulation_range: Vec<(f64, f64)>,
}

impl Scene {
    pub fn dof_count(&self) -> usize {
        self.articulation_range.len()
    }

    fn check_articulation(&self, articulation: &[f64]) -> Result<()> {
        if articulation.len() != self.dof_count() {
            return Err(Error::DimensionMismatch {
                context: format!("articulation of scene `{}`", self.name),
                expected: self.dof_count(),
                actual: articulation.len(),
            });
        }
        Ok(())
    }

    /// Pose of one part at the given articulation.
    pub fn world_from_part(&self, part: usize, articulation: &[f64]) -> Rigid {
        let p = &self.parts[part];
        let value = p.dof.map_or(0.0, |d| articulation[d]);
        p.joint.transform(value).compose(&p.rest_pose)
    }

    /// Signed distance and the index of the closest part.
    pub fn sdf(&self, p_world: Vec3, articulation: &[f64]) -> Result<(f64, usize)> {
        self.check_articulation(articulation)?;
        let mut best = (f64::INFINITY, 0usize);
        for (i, part) in self.parts.iter().enumerate() {
            let local = self
                .world_from_part(i, articulation)
                .inverse()
                .apply(p_world);
            let d = part.primitive.sdf(local);
            if d < best.0 {
                best = (d, i);
            }
        }
        Ok(best)
    }

    /// Gradient of the union SDF (gradient of the winning part).
    pub fn gradient(&self, p_world: Vec3, articulation: &[f64]) -> Result<Vec3> {
        let (_, idx) = self.sdf(p_world, articulation)?;
        let pose = self.world_from_part(idx, articulation);
        let local = pose.inverse().apply(p_world);
        let g_local = self.parts[idx].primitive.gradient(local);
        Ok(pose.apply_dir(g_local))
    }

    /// Uniformly rescale all geometry (and prismatic ranges) by `s`.
    fn rescale(&mut self, s: f64) {
        for part in &mut self.parts {
            part.primitive = part.primitive.scaled(s);
            part.rest_pose.trans = math::scale(part.rest_pose.trans, s);
            if let Joint::Revolute { pivot, .. } = &mut part.joint {
                *pivot = math::scale(*pivot, s);
            }
        }
        for (i, range) in self.articulation_range.iter_mut().enumerate() {
            let prismatic = self
                .parts
                .iter()
                .any(|p| p.dof == Some(i) && matches!(p.joint, Joint::Prismatic { .. }));
            if prismatic {
                range.0 *= s;
                range.1 *= s;
            }
        }
    }

    /// Conservative bound on the distance of any surface point from the
    /// origin at one articulation.
    fn bounding_radius(&self, articulation: &[f64]) -> f64 {
        let mut r: f64 = 0.0;
        for (i, part) in self.parts.iter().enumerate() {
            let pose = self.world_from_part(i, articulation);
            let center_dist = math::norm(pose.trans);
            r = r.max(center_dist + part.primitive.bounding_radius());
        }
        r
    }

    /// Rescale so the scene fits inside the unit sphere (with a small margin)
    /// at every articulation in its range.
    fn normalize_to_unit_sphere(&mut self, margin: f64) {
        let mut max_r: f64 = 0.0;
        // Probe the articulation box corners and midpoints; ranges are
        // monotone enough for these simple scenes.
        let probes = articulation_probes(&self.articulation_range);
        for probe in &probes {
            max_r = max_r.max(self.bounding_radius(probe));
        }
        if max_r > 0.0 {
            self.rescale((1.0 - margin) / max_r);
        }
    }
}

fn articulation_probes(ranges: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let mut probes = vec![Vec::new()];
    for &(lo, hi) in ranges {
        let mut next = Vec::new();
        for p in &probes {
            for v in [lo, 0.5 * (lo + hi), hi] {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        probes = next;
    }
    probes
}

/// Built-in scene kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Laptop,
    Drawer,
    Cabinet,
}

impl SceneKind {
    pub fn parse(s: &str) -> Result<SceneKind> {
        match s {
            "laptop" => Ok(SceneKind::Laptop),
            "drawer" => Ok(SceneKind::Drawer),
            "cabinet" => Ok(SceneKind::Cabinet),
            other => Err(Error::UnknownScene(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SceneKind::Laptop => "laptop",
            SceneKind::Drawer => "drawer",
            SceneKind::Cabinet => "cabinet",
        }
    }
}

/// Distinct, saturated-ish albedos; instances draw pairs from this table so
/// different instances are tellable apart by color alone.
const PALETTE: [[f64; 3]; 8] = [
    [0.80, 0.22, 0.18], // red
    [0.18, 0.32, 0.80], // blue
    [0.20, 0.72, 0.28], // green
    [0.85, 0.70, 0.15], // yellow
    [0.68, 0.25, 0.75], // purple
    [0.20, 0.72, 0.72], // teal
    [0.88, 0.48, 0.20], // orange
    [0.45, 0.50, 0.55], // gray
];

/// Build one instance of a built-in scene. `dataset_seed` and `instance`
/// together determine sizes and colors; the same pair always produces the
/// same scene.
pub fn build_scene(kind: SceneKind, dataset_seed: u64, instance: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(dataset_seed);
    rng.set_stream(0x5ce7e + instance as u64);
    let mut vary = |lo: f64, hi: f64| rng.gen::<f64>() * (hi - lo) + lo;
    let albedo_a = PALETTE[(2 * instance) % PALETTE.len()];
    let albedo_b = PALETTE[(2 * instance + 1) % PALETTE.len()];

    let mut scene = match kind {
        SceneKind::Laptop => {
            let wx = 0.50 * vary(0.85, 1.15);
            let wz = 0.35 * vary(0.85, 1.15);
            let thick = 0.035 * vary(0.9, 1.1);
            let hinge_z = -wz;
            let base = Part {
                name: "base".into(),
                primitive: Primitive::RoundedBox {
                    half: [wx, thick, wz],
                    radius: 0.015,
                },
                rest_pose: Rigid::new(math::MAT3_IDENTITY, [0.0, thick, 0.0]),
                albedo: albedo_a,
                joint: Joint::Fixed,
                dof: None,
            };
            // At articulation 0 the lid lies flat on the base, extending from
            // the hinge toward +z; positive angles lift its far edge.
            let lid = Part {
                name: "lid".into(),
                primitive: Primitive::RoundedBox {
                    half: [wx, thick * 0.8, wz],
                    radius: 0.015,
                },
                rest_pose: Rigid::new(
                    math::MAT3_IDENTITY,
                    [0.0, 2.0 * thick + thick * 0.8 + 0.01, 0.0],
                ),
                albedo: albedo_b,
                joint: Joint::Revolute {
                    axis: [-1.0, 0.0, 0.0],
                    pivot: [0.0, 2.0 * thick + 0.01, hinge_z],
                },
                dof: Some(0),
            };
            Scene {
                name: "laptop".into(),
                parts: vec![base, lid],
                articulation_range: vec![(30.0, 90.0)],
            }
        }
        SceneKind::Drawer => {
            let hx = 0.45 * vary(0.85, 1.15);
            let hy = 0.30 * vary(0.85, 1.15);
            let hz = 0.32;
            let wall = 0.03;
            let r = 0.01;
            let shell = |name: &str, half: Vec3, center: Vec3| Part {
                name: name.into(),
                primitive: Primitive::RoundedBox { half, radius: r },
                rest_pose: Rigid::new(math::MAT3_IDENTITY, center),
                albedo: albedo_a,
                joint: Joint::Fixed,
                dof: None,
            };
            let slide = 0.5 * hz;
            let tray = Part {
                name: "tray".into(),
                primitive: Primitive::RoundedBox {
                    half: [hx - 2.0 * wall - 0.01, hy - 2.0 * wall - 0.01, hz * 0.9],
                    radius: r,
                },
                rest_pose: Rigid::new(math::MAT3_IDENTITY, [0.0, 0.0, 0.02]),
                albedo: albedo_b,
                joint: Joint::Prismatic {
                    axis: [0.0, 0.0, 1.0],
                },
                dof: Some(0),
            };
            Scene {
                name: "drawer".into(),
                parts: vec![
                    shell("bottom", [hx, wall, hz], [0.0, -(hy - wall), 0.0]),
                    shell("top", [hx, wall, hz], [0.0, hy - wall, 0.0]),
                    shell("left", [wall, hy, hz], [-(hx - wall), 0.0, 0.0]),
                    shell("right", [wall, hy, hz], [hx - wall, 0.0, 0.0]),
                    shell("back", [hx, hy, wall], [0.0, 0.0, -(hz - wall)]),
                    tray,
                ],
                articulation_range: vec![(0.1 * slide, slide + 0.3 * hz)],
            }
        }
        SceneKind::Cabinet => {
            let hx = 0.40 * vary(0.85, 1.15);
            let hy = 0.45 * vary(0.85, 1.15);
            let hz = 0.28;
            let wall = 0.03;
            let r = 0.01;
            let shell = |name: &str, half: Vec3, center: Vec3| Part {
                name: name.into(),
                primitive: Primitive::RoundedBox { half, radius: r },
                rest_pose: Rigid::new(math::MAT3_IDENTITY, center),
                albedo: albedo_a,
                joint: Joint::Fixed,
                dof: None,
            };
            // Door covers the upper front; hinge on its right vertical edge.
            let door_h = 0.55 * hy;
            let door = Part {
                name: "door".into(),
                primitive: Primitive::RoundedBox {
                    half: [hx - wall, door_h, wall * 0.7],
                    radius: r,
                },
                rest_pose: Rigid::new(
                    math::MAT3_IDENTITY,
                    [0.0, hy - door_h - wall, hz + wall * 0.7 + 0.005],
                ),
                albedo: albedo_b,
                joint: Joint::Revolute {
                    axis: [0.0, 1.0, 0.0],
                    pivot: [hx - wall, 0.0, hz + wall * 0.7 + 0.005],
                },
                dof: Some(0),
            };
            let tray_h = 0.32 * hy;
            let tray = Part {
                name: "tray".into(),
                primitive: Primitive::RoundedBox {
                    half: [hx - 2.0 * wall - 0.01, tray_h, hz * 0.9],
                    radius: r,
                },
                rest_pose: Rigid::new(
                    math::MAT3_IDENTITY,
                    [0.0, -(hy - tray_h) + wall + 0.01, 0.02],
                ),
                albedo: PALETTE[(2 * instance + 3) % PALETTE.len()],
                joint: Joint::Prismatic {
                    axis: [0.0, 0.0, 1.0],
                },
                dof: Some(1),
            };
            Scene {
                name: "cabinet".into(),
                parts: vec![
                    shell("bottom", [hx, wall, hz], [0.0, -(hy - wall), 0.0]),
                    shell("top", [hx, wall, hz], [0.0, hy - wall, 0.0]),
                    shell("left", [wall, hy, hz], [-(hx - wall), 0.0, 0.0]),
                    shell("right", [wall, hy, hz], [hx - wall, 0.0, 0.0]),
                    shell("back", [hx, hy, wall], [0.0, 0.0, -(hz - wall)]),
                    door,
                    tray,
                ],
                articulation_range: vec![(10.0, 80.0), (0.05 * hz, 0.6 * hz)],
            }
        }
    };
    scene.normalize_to_unit_sphere(0.08);
    scene
}

/// Evenly spaced articulation states over the scene's range (one value per
/// DOF per state; a single state sits at the range minimum).
pub fn articulation_grid(scene: &Scene, states: usize) -> Vec<Vec<f64>> {
    (0..states)
        .map(|j| {
            scene
                .articulation_range
                .iter()
                .map(|&(lo, hi)| {
                    if states <= 1 {
                        lo
                    } else {
                        lo + (hi - lo) * j as f64 / (states - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounded_box_sdf_known_values() {
        let b = Primitive::RoundedBox {
            half: [0.5, 0.25, 0.4],
            radius: 0.05,
        };
        // On-surface along +x.
        assert!((b.sdf([0.55, 0.0, 0.0])).abs() < 1e-12);
        // Center: distance to nearest face is 0.25 + 0.05.
        assert!((b.sdf([0.0, 0.0, 0.0]) + 0.30).abs() < 1e-12);
        // Far corner: distance from rounded corner.
        let p = [1.5, 1.25, 1.4];
        let corner = [0.5, 0.25, 0.4];
        let want = math::norm(math::sub(p, corner)) - 0.05;
        assert!((b.sdf(p) - want).abs() < 1e-12);
    }

    #[test]
    fn cylinder_sdf_known_values() {
        let c = Primitive::Cylinder {
            half_height: 0.5,
            radius: 0.2,
        };
        assert!((c.sdf([0.2, 0.0, 0.0])).abs() < 1e-12);
        assert!((c.sdf([0.0, 0.5, 0.0])).abs() < 1e-12);
        assert!((c.sdf([0.0, 0.0, 0.0]) + 0.2).abs() < 1e-12);
        // Outside both caps and side: corner distance.
        let d = c.sdf([0.5, 0.9, 0.0]);
        let want = ((0.5 - 0.2f64).powi(2) + (0.9 - 0.5f64).powi(2)).sqrt();
        assert!((d - want).abs() < 1e-12);
    }

    #[test]
    fn primitive_gradients_match_finite_differences() {
        let prims = [
            Primitive::RoundedBox {
                half: [0.4, 0.3, 0.2],
                radius: 0.05,
            },
            Primitive::Cylinder {
                half_height: 0.4,
                radius: 0.25,
            },
        ];
        let points = [
            [0.7, 0.1, 0.05],
            [0.1, 0.6, 0.1],
            [0.5, 0.5, 0.3],
            [0.05, 0.1, 0.02],
            [-0.6, -0.2, 0.4],
        ];
        let h = 1e-7;
        for prim in &prims {
            for &p in &points {
                let g = prim.gradient(p);
                for j in 0..3 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[j] += h;
                    pm[j] -= h;
                    let fd = (prim.sdf(pp) - prim.sdf(pm)) / (2.0 * h);
                    assert!(
                        (g[j] - fd).abs() < 1e-5,
                        "{prim:?} at {p:?} component {j}: {} vs {}",
                        g[j],
                        fd
                    );
                }
                // Unit length away from the kink sets.
                assert!((math::norm(g) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn union_reports_closest_part() {
        let scene = build_scene(SceneKind::Laptop, 7, 0);
        // The posed center of the base slab is interior to it no matter how
        // the scene was rescaled, and with the lid opened away it is the
        // nearest part by a wide margin.
        let probe = scene.world_from_part(0, &[60.0]).apply([0.0, 0.0, 0.0]);
        let (d, idx) = scene.sdf(probe, &[60.0]).unwrap();
        assert_eq!(scene.parts[idx].name, "base");
        assert!(d < 0.0);
    }

    #[test]
    fn laptop_lid_rises_with_angle() {
        let scene = build_scene(SceneKind::Laptop, 7, 0);
        // Track the lid's far edge (at rest it points toward +z from the
        // hinge at -z); opening should lift it in +y.
        let lid = 1;
        let tip_rest = {
            let pose = scene.world_from_part(lid, &[0.0]);
            pose.apply([0.0, 0.0, scene_part_half_z(&scene, lid)])
        };
        let tip_open = {
            let pose = scene.world_from_part(lid, &[70.0]);
            pose.apply([0.0, 0.0, scene_part_half_z(&scene, lid)])
        };
        assert!(
            tip_open[1] > tip_rest[1] + 0.2,
            "lid tip did not rise: rest {tip_rest:?}, open {tip_open:?}"
        );
        // Hinge edge stays put.
        let hinge_rest = scene
            .world_from_part(lid, &[0.0])
            .apply([0.0, 0.0, -scene_part_half_z(&scene, lid)]);
        let hinge_open = scene
            .world_from_part(lid, &[70.0])
            .apply([0.0, 0.0, -scene_part_half_z(&scene, lid)]);
        assert!(math::norm(math::sub(hinge_rest, hinge_open)) < 0.05);
    }

    fn scene_part_half_z(scene: &Scene, idx: usize) -> f64 {
        match scene.parts[idx].primitive {
            Primitive::RoundedBox { half, .. } => half[2],
            Primitive::Cylinder { half_height, .. } => half_height,
        }
    }

    #[test]
    fn drawer_tray_translates() {
        let scene = build_scene(SceneKind::Drawer, 7, 0);
        let tray = scene.parts.len() - 1;
        let (lo, hi) = scene.articulation_range[0];
        let closed = scene.world_from_part(tray, &[lo]).trans;
        let open = scene.world_from_part(tray, &[hi]).trans;
        assert!((open[2] - closed[2] - (hi - lo)).abs() < 1e-12);
        assert!((open[0] - closed[0]).abs() < 1e-12);
    }

    #[test]
    fn scenes_fit_unit_sphere_across_articulation() {
        for kind in [SceneKind::Laptop, SceneKind::Drawer, SceneKind::Cabinet] {
            for instance in 0..3 {
                let scene = build_scene(kind, 42, instance);
                for art in articulation_probes(&scene.articulation_range) {
                    assert!(
                        scene.bounding_radius(&art) <= 1.0,
                        "{kind:?} instance {instance} exceeds unit sphere at {art:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn instances_vary_but_are_reproducible() {
        let a0 = build_scene(SceneKind::Laptop, 42, 0);
        let a0_again = build_scene(SceneKind::Laptop, 42, 0);
        let a1 = build_scene(SceneKind::Laptop, 42, 1);
        assert_eq!(a0, a0_again);
        assert_ne!(a0, a1);
        assert_ne!(a0.parts[0].albedo, a1.parts[0].albedo);
    }

    #[test]
    fn articulation_grid_spans_range() {
        let scene = build_scene(SceneKind::Laptop, 1, 0);
        let grid = articulation_grid(&scene, 5);
        assert_eq!(grid.len(), 5);
        assert!((grid[0][0] - 30.0).abs() < 1e-12);
        assert!((grid[4][0] - 90.0).abs() < 1e-12);
        assert!((grid[2][0] - 60.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_of_union_matches_finite_differences() {
        let scene = build_scene(SceneKind::Cabinet, 11, 1);
        let art = vec![45.0, 0.08];
        let points = [[0.0, 0.0, 0.6], [0.3, 0.3, 0.3], [-0.5, 0.1, 0.0]];
        let h = 1e-7;
        for &p in &points {
            let g = scene.gradient(p, &art).unwrap();
            for j in 0..3 {
                let mut pp = p;
                let mut pm = p;
                pp[j] += h;
                pm[j] -= h;
                let fd = (scene.sdf(pp, &art).unwrap().0 - scene.sdf(pm, &art).unwrap().0)
                    / (2.0 * h);
                assert!((g[j] - fd).abs() < 1e-5, "at {p:?} component {j}");
            }
        }
    }
}
