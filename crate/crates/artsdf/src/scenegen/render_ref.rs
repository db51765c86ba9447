//! Reference renderer for procedural scenes.
//!
//! Sphere-traces the exact scene SDF and shades hits with a headlight model:
//! `albedo * max(0, <n, -v>)`. Missed rays are black with mask 0. This is the
//! ground truth the learned models are trained against, so it is deliberately
//! simple and exactly reproducible.

use super::cameras::Camera;
use super::Scene;
use crate::error::Result;
use crate::image::{Image, MaskImage};
use crate::math;

/// Scene geometry is normalized to the unit sphere; rays are clipped to it.
const SCENE_BOUND: f64 = 1.0;
const MAX_STEPS: usize = 256;
const HIT_EPS: f64 = 1e-7;

/// Render one view. Returns the shaded image and the binary object mask.
pub fn render_reference(
    scene: &Scene,
    articulation: &[f64],
    camera: &Camera,
) -> Result<(Image, MaskImage)> {
    let k = &camera.intrinsics;
    let mut img = Image::new(k.width, k.height);
    let mut mask = MaskImage::new(k.width, k.height);
    for py in 0..k.height {
        for px in 0..k.width {
            let ray = camera.ray(px as f64, py as f64);
            if let Some(t) = trace(scene, articulation, ray.origin, ray.dir)? {
                let x = math::add(ray.origin, math::scale(ray.dir, t));
                let (_, part) = scene.sdf(x, articulation)?;
                let n = math::normalize(scene.gradient(x, articulation)?);
                let lambert = math::dot(n, math::scale(ray.dir, -1.0)).max(0.0);
                let albedo = scene.parts[part].albedo;
                img.set(px, py, [albedo[0] * lambert, albedo[1] * lambert, albedo[2] * lambert]);
                mask.set(px, py, true);
            }
        }
    }
    Ok((img, mask))
}

/// Sphere-trace an exact SDF; exactness guarantees no overshoot.
fn trace(scene: &Scene, articulation: &[f64], origin: math::Vec3, dir: math::Vec3) -> Result<Option<f64>> {
    let (t0, t1) = match math::ray_sphere_range(origin, dir, SCENE_BOUND) {
        Some(r) => r,
        None => return Ok(None),
    };
    let mut t = t0.max(0.0);
    let t_far = t1;
    for _ in 0..MAX_STEPS {
        let x = math::add(origin, math::scale(dir, t));
        let (d, _) = scene.sdf(x, articulation)?;
        if d < HIT_EPS {
            return Ok(Some(t));
        }
        t += d;
        if t > t_far {
            return Ok(None);
        }
    }
    Ok(None)
}
