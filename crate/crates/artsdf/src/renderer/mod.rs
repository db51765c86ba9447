//! First-intersection search on signed distance fields, the
//! tape-differentiable surface point, the soft occupancy mask, and forward
//! image rendering.
//!
//! The tracer combines sphere tracing (fast convergence on well-behaved
//! fields) with a dense fallback sampling that brackets the first sign
//! change and refines it by secant steps; the dense pass always runs because
//! it supplies the along-ray minimum that the occupancy mask needs.
//!
//! Differentiable quantities are built on the gradient tape: the hit point
//! uses first-order implicit differentiation around the frozen intersection
//! (its forward value is bit-identical to the traced point; its gradient
//! flows into network parameters and latent codes through one extra field
//! evaluation), and the soft mask differentiates through the field at the
//! frozen minimizing sample.

use rayon::prelude::*;

use crate::autodiff::mlp::{self, MlpScratch};
use crate::autodiff::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::fields::{FieldModel, FrozenField, LatentCode, TapeBinding};
use crate::image::{GrayImage, Image};
use crate::math::{self, Vec3};
use crate::scenegen::cameras::Camera;
use crate::scenegen::Scene;

/// Anything that can be queried for a signed distance and its spatial
/// gradient. Evaluation takes `&mut self` so implementors can reuse scratch
/// buffers; clone one evaluator per worker for parallel rendering.
pub trait SdfField {
    fn value(&mut self, x: Vec3) -> f64;
    fn value_and_grad(&mut self, x: Vec3) -> (f64, Vec3);
}

impl SdfField for FrozenField<'_> {
    fn value(&mut self, x: Vec3) -> f64 {
        FrozenField::value(self, x)
    }

    fn value_and_grad(&mut self, x: Vec3) -> (f64, Vec3) {
        FrozenField::value_and_grad(self, x)
    }
}

/// Analytic scene SDF at a fixed articulation, usable wherever a learned
/// field is.
#[derive(Clone)]
pub struct SceneField<'a> {
    scene: &'a Scene,
    articulation: Vec<f64>,
}

impl<'a> SceneField<'a> {
    pub fn new(scene: &'a Scene, articulation: &[f64]) -> Result<SceneField<'a>> {
        if articulation.len() != scene.dof_count() {
            return Err(Error::DimensionMismatch {
                context: format!("articulation for scene `{}`", scene.name),
                expected: scene.dof_count(),
                actual: articulation.len(),
            });
        }
        Ok(SceneField {
            scene,
            articulation: articulation.to_vec(),
        })
    }
}

impl SdfField for SceneField<'_> {
    fn value(&mut self, x: Vec3) -> f64 {
        self.scene
            .sdf(x, &self.articulation)
            .expect("articulation validated at construction")
            .0
    }

    fn value_and_grad(&mut self, x: Vec3) -> (f64, Vec3) {
        let d = self.value(x);
        let g = self
            .scene
            .gradient(x, &self.articulation)
            .expect("articulation validated at construction");
        (d, g)
    }
}

/// Tracer configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderSettings {
    /// Maximum sphere-tracing steps before the dense fallback takes over.
    pub sphere_trace_iters: usize,
    /// Convergence threshold on |f|.
    pub hit_eps: f64,
    /// Uniform samples along the ray for the minimum and for bracketing.
    pub n_ray_samples: usize,
    /// Secant refinement steps on a bracketed sign change.
    pub secant_iters: usize,
    /// Rays are clipped to a sphere of this radius around the origin.
    pub scene_bound_radius: f64,
}

impl Default for RenderSettings {
    fn default() -> RenderSettings {
        RenderSettings {
            sphere_trace_iters: 32,
            hit_eps: 5e-5,
            n_ray_samples: 100,
            secant_iters: 8,
            scene_bound_radius: 3.0,
        }
    }
}

/// A world ray clipped to the scene bounding sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedRay {
    pub origin: Vec3,
    /// Unit direction.
    pub dir: Vec3,
    pub t_near: f64,
    pub t_far: f64,
}

impl BoundedRay {
    pub fn at(&self, t: f64) -> Vec3 {
        math::add(self.origin, math::scale(self.dir, t))
    }
}

/// Clip a world ray to the scene bounding sphere. Rays that miss the sphere
/// entirely collapse to an empty range at their closest approach, which
/// traces to a miss with a far-field minimum.
pub fn bound_ray(origin: Vec3, dir: Vec3, settings: &RenderSettings) -> BoundedRay {
    match math::ray_sphere_range(origin, dir, settings.scene_bound_radius) {
        Some((t0, t1)) if t1 > 0.0 => BoundedRay {
            origin,
            dir,
            t_near: t0.max(0.0),
            t_far: t1,
        },
        _ => {
            let t_closest = (-math::dot(origin, dir)).max(0.0);
            BoundedRay {
                origin,
                dir,
                t_near: t_closest,
                t_far: t_closest,
            }
        }
    }
}

/// Rays through the listed pixel centers, clipped to the scene bounds.
/// Errors on out-of-bounds pixels.
pub fn generate_rays(
    camera: &Camera,
    pixels: &[(u32, u32)],
    settings: &RenderSettings,
) -> Result<Vec<BoundedRay>> {
    let k = &camera.intrinsics;
    pixels
        .iter()
        .map(|&(px, py)| {
            if px >= k.width || py >= k.height {
                return Err(Error::InvalidConfig(format!(
                    "pixel ({px}, {py}) outside {}x{} image",
                    k.width, k.height
                )));
            }
            let r = camera.ray(px as f64, py as f64);
            Ok(bound_ray(r.origin, r.dir, settings))
        })
        .collect()
}

/// Result of the first-intersection search along one ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub hit: bool,
    /// Ray parameter of the intersection (valid when `hit`).
    pub t0: f64,
    /// Intersection point (valid when `hit`).
    pub x: Vec3,
    /// Unit surface normal, `grad / |grad|` (valid when `hit`).
    pub normal: Vec3,
    /// Raw field gradient at the hit (valid when `hit`).
    pub grad: Vec3,
    /// Minimum field value over the dense ray samples; always populated.
    pub min_sdf: f64,
    /// Ray parameter of that minimum.
    pub t_min_sdf: f64,
}

impl SurfaceHit {
    fn miss(min_sdf: f64, t_min_sdf: f64) -> SurfaceHit {
        SurfaceHit {
            hit: false,
            t0: 0.0,
            x: [0.0; 3],
            normal: [0.0; 3],
            grad: [0.0; 3],
            min_sdf,
            t_min_sdf,
        }
    }
}

/// Find the first surface crossing along `ray`.
///
/// Sphere tracing marches from `t_near` with step sizes equal to the field
/// value; if it converges (|f| < eps) that intersection wins. If it steps
/// over the surface, the overshoot bracket is refined by secant steps. If it
/// leaves the ray range or runs out of iterations, the first sign change
/// among the dense samples (always evaluated, supplying `min_sdf`) is
/// refined instead. "No sign change anywhere" is a miss, not an error.
pub fn trace_first_intersection(
    field: &mut dyn SdfField,
    ray: &BoundedRay,
    settings: &RenderSettings,
) -> SurfaceHit {
    if ray.t_far <= ray.t_near {
        // The ray never enters the scene bounds. The field is only trusted
        // inside them, so report a geometric miss: distance from the ray to
        // the bounding sphere, with no field evaluation at all.
        let t_closest = (-math::dot(ray.origin, ray.dir)).max(0.0);
        let clearance = math::norm(ray.at(t_closest)) - settings.scene_bound_radius;
        return SurfaceHit::miss(clearance.max(0.0), t_closest);
    }

    // Dense pass: along-ray minimum plus the first sign-change bracket.
    let n = settings.n_ray_samples.max(2);
    let span = ray.t_far - ray.t_near;
    let mut min_sdf = f64::INFINITY;
    let mut t_min_sdf = ray.t_near;
    let mut dense_bracket: Option<(f64, f64, f64, f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..n {
        let t = ray.t_near + span * i as f64 / (n - 1) as f64;
        let f = field.value(ray.at(t));
        if f < min_sdf {
            min_sdf = f;
            t_min_sdf = t;
        }
        if dense_bracket.is_none() {
            if f <= 0.0 {
                dense_bracket = Some(match prev {
                    Some((tp, fp)) => (tp, fp, t, f),
                    None => (t, f, t, f),
                });
            }
            prev = Some((t, f));
        }
    }

    // Sphere trace from the near bound.
    let mut converged: Option<f64> = None;
    let mut overshoot: Option<(f64, f64, f64, f64)> = None;
    let mut t = ray.t_near;
    let mut prev_step: Option<(f64, f64)> = None;
    for _ in 0..settings.sphere_trace_iters {
        let f = field.value(ray.at(t));
        if f.abs() < settings.hit_eps {
            converged = Some(t);
            break;
        }
        if f < 0.0 {
            // Stepped past the surface: the previous sample (positive) and
            // this one bracket the crossing.
            match prev_step {
                Some((tp, fp)) => overshoot = Some((tp, fp, t, f)),
                None => converged = Some(t), // inside at the very first sample
            }
            break;
        }
        prev_step = Some((t, f));
        t += f;
        if t > ray.t_far {
            break;
        }
    }

    let refined = match (converged, overshoot, dense_bracket) {
        (Some(t0), _, _) => Some(t0),
        (None, Some(b), _) | (None, None, Some(b)) => {
            Some(refine_crossing(field, ray, b, settings))
        }
        (None, None, None) => None,
    };

    match refined {
        None => SurfaceHit::miss(min_sdf, t_min_sdf),
        Some(t0) => {
            let x = ray.at(t0);
            let (_, grad) = field.value_and_grad(x);
            let norm = math::norm(grad);
            if norm < 1e-12 {
                // Degenerate field point; cannot define a surface frame.
                return SurfaceHit::miss(min_sdf, t_min_sdf);
            }
            SurfaceHit {
                hit: true,
                t0,
                x,
                normal: math::scale(grad, 1.0 / norm),
                grad,
                min_sdf,
                t_min_sdf,
            }
        }
    }
}

/// Shrink a sign-change bracket `(t_lo, f_lo > 0, t_hi, f_hi <= 0)` by
/// secant steps, keeping the bracket valid, and return the final secant
/// estimate of the crossing.
fn refine_crossing(
    field: &mut dyn SdfField,
    ray: &BoundedRay,
    bracket: (f64, f64, f64, f64),
    settings: &RenderSettings,
) -> f64 {
    let (mut t_lo, mut f_lo, mut t_hi, mut f_hi) = bracket;
    if t_lo == t_hi {
        return t_hi;
    }
    for _ in 0..settings.secant_iters {
        let denom = f_hi - f_lo;
        if denom.abs() < 1e-300 {
            break;
        }
        let t_new = (t_hi - f_hi * (t_hi - t_lo) / denom).clamp(t_lo.min(t_hi), t_lo.max(t_hi));
        let f_new = field.value(ray.at(t_new));
        if f_new.abs() < settings.hit_eps {
            return t_new;
        }
        if f_new > 0.0 {
            t_lo = t_new;
            f_lo = f_new;
        } else {
            t_hi = t_new;
            f_hi = f_new;
        }
    }
    let denom = f_hi - f_lo;
    if denom.abs() < 1e-300 {
        t_hi
    } else {
        (t_hi - f_hi * (t_hi - t_lo) / denom).clamp(t_lo.min(t_hi), t_lo.max(t_hi))
    }
}

/// Grazing-ray threshold on |<grad f, v>| below which the implicit hit
/// derivative blows up and the pixel is dropped from the batch.
pub const GRAZING_EPS: f64 = 1e-8;

/// Attach the hit point to the tape via first-order implicit
/// differentiation: `x = x0 - v/<grad f, v> * (f(x0) - detach(f(x0)))`.
///
/// The forward value equals the traced point bit-for-bit; the gradient
/// flows into network parameters and codes through the field evaluation.
/// Returns `None` for grazing rays (denominator below [`GRAZING_EPS`]).
pub fn differentiable_hit(
    model: &FieldModel,
    tape: &Tape,
    binding: &TapeBinding,
    ray: &BoundedRay,
    hit: &SurfaceHit,
) -> Result<Option<[Var; 3]>> {
    assert!(hit.hit, "differentiable_hit needs a converged hit");
    let denom = math::dot(hit.grad, ray.dir);
    if denom.abs() < GRAZING_EPS {
        return Ok(None);
    }
    let x0 = [
        tape.constant(hit.x[0]),
        tape.constant(hit.x[1]),
        tape.constant(hit.x[2]),
    ];
    let f = model.sdf_tape(tape, binding, &x0)?;
    // Detach the forward value so x equals x0 exactly; only the derivative
    // of f survives.
    let df = &f - f.value();
    let scale = [
        ray.dir[0] / denom,
        ray.dir[1] / denom,
        ray.dir[2] / denom,
    ];
    Ok(Some([
        &x0[0] - &df * scale[0],
        &x0[1] - &df * scale[1],
        &x0[2] - &df * scale[2],
    ]))
}

/// Soft occupancy value `sigmoid(-alpha * min_sdf)`.
pub fn soft_mask_value(min_sdf: f64, alpha: f64) -> f64 {
    crate::autodiff::tape::sigmoid_f64(-alpha * min_sdf)
}

/// Tape-attached soft occupancy: the field is re-evaluated at the frozen
/// minimizing sample, so gradients flow through that one point.
pub fn soft_mask_tape(
    model: &FieldModel,
    tape: &Tape,
    binding: &TapeBinding,
    ray: &BoundedRay,
    hit: &SurfaceHit,
    alpha: f64,
) -> Result<Var> {
    let xm = ray.at(hit.t_min_sdf);
    let x = [
        tape.constant(xm[0]),
        tape.constant(xm[1]),
        tape.constant(xm[2]),
    ];
    let f = model.sdf_tape(tape, binding, &x)?;
    Ok((f * (-alpha)).sigmoid())
}

/// Forward renderer for one (shape, appearance, articulation) code triple:
/// geometry codes are folded into the network once, then pixels are pure
/// function evaluations. Clone one per worker thread.
#[derive(Clone)]
pub struct FieldRenderer<'a> {
    model: &'a FieldModel,
    geometry: FrozenField<'a>,
    appearance_fs: mlp::FrozenSuffix,
    scratch: MlpScratch,
    prefix: Vec<f64>,
    enc: Vec<f64>,
    out: Vec<f64>,
}

/// Everything rendered for one pixel.
#[derive(Debug, Clone, Copy)]
pub struct PixelRender {
    /// Radiance on hit, black on miss.
    pub rgb: [f64; 3],
    /// Soft occupancy in (0, 1).
    pub soft_mask: f64,
    pub hit: SurfaceHit,
}

impl<'a> FieldRenderer<'a> {
    pub fn new(
        model: &'a FieldModel,
        shape: &LatentCode,
        appearance: &LatentCode,
        articulation: &LatentCode,
    ) -> Result<FieldRenderer<'a>> {
        if appearance.len() != model.appearance_dim {
            return Err(Error::DimensionMismatch {
                context: "appearance code".into(),
                expected: model.appearance_dim,
                actual: appearance.len(),
            });
        }
        let geometry = model.freeze_geometry(shape, articulation)?;
        let appearance_fs = mlp::freeze_suffix(
            &model.appearance.spec,
            &model.appearance.params,
            &appearance.0,
        );
        Ok(FieldRenderer {
            model,
            geometry,
            appearance_fs,
            scratch: MlpScratch::default(),
            prefix: Vec::new(),
            enc: Vec::new(),
            out: Vec::new(),
        })
    }

    pub fn model(&self) -> &FieldModel {
        self.model
    }

    /// The geometry evaluator (for tracing or field probes).
    pub fn field(&mut self) -> &mut FrozenField<'a> {
        &mut self.geometry
    }

    /// Radiance in [0,1]^3 at surface point `x` with unit normal `n` seen
    /// along unit direction `v` (camera toward surface).
    pub fn radiance(&mut self, x: Vec3, n: Vec3, v: Vec3) -> [f64; 3] {
        self.prefix.clear();
        crate::autodiff::encoding::encode(&x, self.model.point_freqs, &mut self.enc);
        self.prefix.extend_from_slice(&self.enc);
        self.prefix.extend_from_slice(&n);
        crate::autodiff::encoding::encode(&v, self.model.view_freqs, &mut self.enc);
        self.prefix.extend_from_slice(&self.enc);
        mlp::forward_prefix(
            &self.model.appearance.spec,
            &self.model.appearance.params,
            &self.appearance_fs,
            &self.prefix,
            &mut self.scratch,
            &mut self.out,
        );
        [
            0.5 * (self.out[0] + 1.0),
            0.5 * (self.out[1] + 1.0),
            0.5 * (self.out[2] + 1.0),
        ]
    }

    /// Trace one ray and shade it: radiance on hit, black background on
    /// miss, plus the soft occupancy at sharpness `alpha`.
    pub fn render_pixel(
        &mut self,
        ray: &BoundedRay,
        settings: &RenderSettings,
        alpha: f64,
    ) -> PixelRender {
        let hit = trace_first_intersection(&mut self.geometry, ray, settings);
        let rgb = if hit.hit {
            let c = self.radiance(hit.x, hit.normal, ray.dir);
            [
                c[0].clamp(0.0, 1.0),
                c[1].clamp(0.0, 1.0),
                c[2].clamp(0.0, 1.0),
            ]
        } else {
            [0.0; 3]
        };
        PixelRender {
            rgb,
            soft_mask: soft_mask_value(hit.min_sdf, alpha),
            hit,
        }
    }
}

/// Render a full image and its soft mask, parallel over rows. Pixels are
/// independent, so the output is identical for any worker count.
pub fn render_image(
    renderer: &FieldRenderer,
    camera: &Camera,
    settings: &RenderSettings,
    alpha: f64,
) -> Result<(Image, GrayImage)> {
    let k = &camera.intrinsics;
    let width = k.width;
    let rows: Vec<Vec<PixelRender>> = (0..k.height)
        .into_par_iter()
        .map(|py| {
            let mut worker = renderer.clone();
            (0..width)
                .map(|px| {
                    let r = camera.ray(px as f64, py as f64);
                    let ray = bound_ray(r.origin, r.dir, settings);
                    worker.render_pixel(&ray, settings, alpha)
                })
                .collect()
        })
        .collect();
    let mut image = Image::new(k.width, k.height);
    let mut soft = GrayImage::new(k.width, k.height);
    for (py, row) in rows.iter().enumerate() {
        for (px, p) in row.iter().enumerate() {
            image.set(px as u32, py as u32, p.rgb);
            soft.data[py * width as usize + px] = p.soft_mask;
        }
    }
    Ok((image, soft))
}

#[cfg(test)]
mod tests;
