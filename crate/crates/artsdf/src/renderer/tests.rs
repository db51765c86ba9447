use super::*;
use crate::fields::{CodeBook, ModelConfig, Variant};
use crate::scenegen::cameras::Intrinsics;
use crate::scenegen::{build_scene, SceneKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Analytic sphere of radius `r` centered at the origin.
#[derive(Clone)]
struct SphereField {
    r: f64,
}

impl SdfField for SphereField {
    fn value(&mut self, x: Vec3) -> f64 {
        math::norm(x) - self.r
    }

    fn value_and_grad(&mut self, x: Vec3) -> (f64, Vec3) {
        let n = math::norm(x);
        (n - self.r, math::scale(x, 1.0 / n.max(1e-300)))
    }
}

fn z_ray(origin: Vec3, settings: &RenderSettings) -> BoundedRay {
    bound_ray(origin, [0.0, 0.0, 1.0], settings)
}

/// Brute-force first-crossing oracle: scan `n` samples for the first sign
/// change and bisect it down to machine-level accuracy.
fn brute_force_first_crossing(
    field: &mut dyn SdfField,
    ray: &BoundedRay,
    n: usize,
) -> Option<f64> {
    let span = ray.t_far - ray.t_near;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..n {
        let t = ray.t_near + span * i as f64 / (n - 1) as f64;
        let f = field.value(ray.at(t));
        if f <= 0.0 {
            let (mut lo, mut hi) = match prev {
                Some((tp, _)) => (tp, t),
                None => return Some(t),
            };
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if field.value(ray.at(mid)) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev = Some((t, f));
    }
    None
}

#[test]
fn sphere_head_on_hit_matches_closed_form() {
    let settings = RenderSettings::default();
    let mut field = SphereField { r: 0.5 };
    let ray = z_ray([0.0, 0.0, -2.0], &settings);
    let hit = trace_first_intersection(&mut field, &ray, &settings);
    assert!(hit.hit);
    assert!((hit.t0 - 1.5).abs() < 1e-4, "t0 = {}", hit.t0);
    assert!(math::norm(math::sub(hit.normal, [0.0, 0.0, -1.0])) < 1e-3);
    assert!(hit.min_sdf <= settings.hit_eps);
}

#[test]
fn sphere_miss_reports_closest_approach() {
    let settings = RenderSettings::default();
    let mut field = SphereField { r: 0.5 };
    let ray = z_ray([0.0, 1.0, -2.0], &settings);
    let hit = trace_first_intersection(&mut field, &ray, &settings);
    assert!(!hit.hit);
    // Closest approach distance 1, minus radius 0.5.
    assert!((hit.min_sdf - 0.5).abs() < 1e-3, "min_sdf = {}", hit.min_sdf);
    assert!((hit.t_min_sdf - 2.0).abs() < 0.05);
}

#[test]
fn ray_outside_scene_bounds_is_a_clean_miss() {
    let settings = RenderSettings::default();
    let mut field = SphereField { r: 0.5 };
    let ray = bound_ray([0.0, 10.0, -2.0], [0.0, 0.0, 1.0], &settings);
    assert_eq!(ray.t_near, ray.t_far);
    let hit = trace_first_intersection(&mut field, &ray, &settings);
    assert!(!hit.hit);
    assert!(hit.min_sdf > 5.0);
}

#[test]
fn random_rays_agree_with_brute_force_on_analytic_scene() {
    let scene = build_scene(SceneKind::Laptop, 21, 0);
    let mut field = SceneField::new(&scene, &[55.0]).unwrap();
    let settings = RenderSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut disagreements = 0;
    let mut max_t_err: f64 = 0.0;
    let n_rays = 400;
    for _ in 0..n_rays {
        let origin = [
            rng.gen::<f64>() * 4.0 - 2.0,
            rng.gen::<f64>() * 4.0 - 2.0,
            rng.gen::<f64>() * 4.0 - 2.0,
        ];
        let target = [
            rng.gen::<f64>() * 1.0 - 0.5,
            rng.gen::<f64>() * 1.0 - 0.5,
            rng.gen::<f64>() * 1.0 - 0.5,
        ];
        let dir = math::normalize(math::sub(target, origin));
        let ray = bound_ray(origin, dir, &settings);
        let hit = trace_first_intersection(&mut field, &ray, &settings);
        let oracle = brute_force_first_crossing(&mut field, &ray, 2000);
        match (hit.hit, oracle) {
            (true, Some(t)) => max_t_err = max_t_err.max((hit.t0 - t).abs()),
            (false, None) => {}
            _ => disagreements += 1,
        }
    }
    assert!(
        disagreements <= n_rays / 400,
        "{disagreements} hit/miss disagreements out of {n_rays}"
    );
    assert!(max_t_err < 1e-3, "max t0 error {max_t_err}");
}

/// Settings for learned fields: the bound hugs the region the network is
/// calibrated in, exactly as training configures it.
fn learned_settings() -> RenderSettings {
    RenderSettings {
        scene_bound_radius: 1.5,
        ..RenderSettings::default()
    }
}

fn tiny_model(variant: Variant, seed: u64) -> (crate::fields::FieldModel, CodeBook) {
    let mut cfg = ModelConfig::desk(variant);
    cfg.geometry_hidden = vec![16, 16, 16];
    cfg.geometry_skip = 1;
    cfg.deform_hidden = vec![16, 16];
    cfg.deform_skip = 1;
    cfg.appearance_hidden = vec![16, 16];
    cfg.shape_dim = 6;
    cfg.appearance_dim = 6;
    cfg.articulation_dim = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = crate::fields::FieldModel::init(&cfg, &mut rng).unwrap();
    let mut codes = CodeBook::default();
    let mut draw = |n: usize, s: f64| {
        crate::fields::LatentCode((0..n).map(|_| (rng.gen::<f64>() - 0.5) * s).collect())
    };
    codes.shape.insert("i".into(), draw(6, 0.2));
    codes.appearance.insert("i".into(), draw(6, 0.2));
    codes.articulation.insert("s".into(), draw(3, 0.2));
    (model, codes)
}

#[test]
fn traced_network_hits_match_brute_force() {
    // A freshly initialized geometry net is a near-perfect sphere; this
    // exercises the tracer on a real network field.
    let (model, codes) = tiny_model(Variant::ArtDef, 9);
    let mut frozen = model
        .freeze_geometry(&codes.shape["i"], &codes.articulation["s"])
        .unwrap();
    let settings = learned_settings();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut max_err: f64 = 0.0;
    for _ in 0..60 {
        let origin = math::scale(
            math::normalize([
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            ]),
            2.0,
        );
        let dir = math::normalize(math::sub(
            [
                0.2 * (rng.gen::<f64>() - 0.5),
                0.2 * (rng.gen::<f64>() - 0.5),
                0.2 * (rng.gen::<f64>() - 0.5),
            ],
            origin,
        ));
        let ray = bound_ray(origin, dir, &settings);
        let hit = trace_first_intersection(&mut frozen, &ray, &settings);
        let oracle = brute_force_first_crossing(&mut frozen, &ray, 2000);
        match (hit.hit, oracle) {
            (true, Some(t)) => max_err = max_err.max((hit.t0 - t).abs()),
            (false, None) => {}
            (h, o) => panic!("tracer hit={h}, oracle hit={}", o.is_some()),
        }
    }
    assert!(max_err < 1e-3, "max t0 error {max_err}");
}

#[test]
fn differentiable_hit_value_is_bit_identical_to_trace() {
    let (model, codes) = tiny_model(Variant::ArtDef, 11);
    let mut frozen = model
        .freeze_geometry(&codes.shape["i"], &codes.articulation["s"])
        .unwrap();
    let settings = learned_settings();
    let ray = z_ray([0.03, -0.05, -2.0], &settings);
    let hit = trace_first_intersection(&mut frozen, &ray, &settings);
    assert!(hit.hit);

    let tape = Tape::new();
    let binding = model
        .bind_tape(
            &tape,
            &codes.shape["i"],
            &codes.appearance["i"],
            &codes.articulation["s"],
        )
        .unwrap();
    let x = differentiable_hit(&model, &tape, &binding, &ray, &hit)
        .unwrap()
        .expect("not grazing");
    for j in 0..3 {
        assert_eq!(x[j].value().to_bits(), hit.x[j].to_bits());
    }
}

#[test]
fn sphere_radius_gradient_matches_closed_form() {
    // f(x; a) = |x| - a from (0,0,-2) toward +z: t0 = 2 - a, so
    // d x_hat_z / d a = +1 at the near intersection... taking the derivative
    // through the implicit formula: x = x0 - v/<g,v> * f. With g = (0,0,-1),
    // <g,v> = -1, df/da = -1: dx_z/da = -1/(-1) * ... = -(+1)*(-1) = ... the
    // closed form is x_z(a) = -a, so dx_z/da must be -1.
    let settings = RenderSettings::default();
    let a = 0.5;
    let mut field = SphereField { r: a };
    let ray = z_ray([0.0, 0.0, -2.0], &settings);
    let hit = trace_first_intersection(&mut field, &ray, &settings);
    assert!(hit.hit);

    // Build the implicit expression by hand on a tape with `a` as a leaf:
    // same construction as differentiable_hit but for the analytic field.
    let tape = Tape::new();
    let a_var = tape.leaf(a);
    let x0 = [
        tape.constant(hit.x[0]),
        tape.constant(hit.x[1]),
        tape.constant(hit.x[2]),
    ];
    let norm = (&x0[0] * &x0[0] + &x0[1] * &x0[1] + &x0[2] * &x0[2]).sqrt();
    let f = &norm - &a_var;
    let denom = math::dot(hit.grad, ray.dir);
    let x_z = &x0[2] - &(&f - f.value()) * (ray.dir[2] / denom);
    let grads = x_z.backward();
    let dxz_da = grads.wrt(&a_var);
    assert!(
        (dxz_da - (-1.0)).abs() < 1e-9,
        "dx_z/da = {dxz_da}, want -1"
    );
}

#[test]
fn hit_gradient_matches_retraced_finite_differences() {
    // Gradient of a pixel "loss" (sum of the differentiable hit coordinates)
    // with respect to geometry parameters, validated against re-tracing the
    // perturbed network. This is the core of the training signal.
    let (mut model, codes) = tiny_model(Variant::Art, 13);
    let settings = learned_settings();
    let ray = z_ray([0.02, 0.01, -2.0], &settings);

    let trace_x = |model: &crate::fields::FieldModel| -> Vec3 {
        let mut frozen = model
            .freeze_geometry(&codes.shape["i"], &codes.articulation["s"])
            .unwrap();
        let hit = trace_first_intersection(&mut frozen, &ray, &settings);
        assert!(hit.hit);
        hit.x
    };

    let mut frozen = model
        .freeze_geometry(&codes.shape["i"], &codes.articulation["s"])
        .unwrap();
    let hit = trace_first_intersection(&mut frozen, &ray, &settings);
    drop(frozen);

    let tape = Tape::new();
    let binding = model
        .bind_tape(
            &tape,
            &codes.shape["i"],
            &codes.appearance["i"],
            &codes.articulation["s"],
        )
        .unwrap();
    let x = differentiable_hit(&model, &tape, &binding, &ray, &hit)
        .unwrap()
        .expect("not grazing");
    let loss = &(&x[0] + &x[1]) + &x[2];
    let grads = loss.backward();
    let g = grads.wrt_range(&binding.geometry);

    let h = 1e-5;
    for &pi in &[0usize, 7, 40, model.geometry.params.len() - 1] {
        let orig = model.geometry.params[pi];
        model.geometry.params[pi] = orig + h;
        let xp = trace_x(&model);
        model.geometry.params[pi] = orig - h;
        let xm = trace_x(&model);
        model.geometry.params[pi] = orig;
        let fd = ((xp[0] + xp[1] + xp[2]) - (xm[0] + xm[1] + xm[2])) / (2.0 * h);
        let rel = (g[pi] - fd).abs() / fd.abs().max(g[pi].abs()).max(1e-4);
        assert!(
            rel < 1e-2,
            "param {pi}: tape {} vs retraced fd {} (rel {rel})",
            g[pi],
            fd
        );
    }
}

#[test]
fn soft_mask_values_match_closed_forms() {
    assert_eq!(soft_mask_value(0.0, 50.0), 0.5);
    assert!(soft_mask_value(0.5, 50.0) < 1e-10);
    assert!((soft_mask_value(-0.1, 50.0) - 0.9933).abs() < 1e-4);
    // Monotone non-increasing in min_sdf.
    let mut prev = f64::INFINITY;
    for i in 0..20 {
        let v = soft_mask_value(-1.0 + 0.1 * i as f64, 50.0);
        assert!(v <= prev);
        prev = v;
    }
}

#[test]
fn soft_mask_tape_matches_plain_value_and_is_differentiable() {
    let (model, codes) = tiny_model(Variant::Base, 17);
    let mut frozen = model
        .freeze_geometry(&codes.shape["i"], &codes.articulation["s"])
        .unwrap();
    let settings = learned_settings();
    // A ray that misses: min_sdf > 0.
    let ray = z_ray([0.0, 1.2, -2.0], &settings);
    let hit = trace_first_intersection(&mut frozen, &ray, &settings);
    assert!(!hit.hit);

    let tape = Tape::new();
    let binding = model
        .bind_tape(
            &tape,
            &codes.shape["i"],
            &codes.appearance["i"],
            &codes.articulation["s"],
        )
        .unwrap();
    let alpha = 50.0;
    let s = soft_mask_tape(&model, &tape, &binding, &ray, &hit, alpha).unwrap();
    let plain = soft_mask_value(frozen.value(ray.at(hit.t_min_sdf)), alpha);
    assert!(
        (s.value() - plain).abs() < 1e-12,
        "tape {} vs plain {plain}",
        s.value()
    );
    // Gradient flows into the geometry parameters.
    let grads = s.backward();
    let g = grads.wrt_range(&binding.geometry);
    assert!(g.iter().any(|&v| v != 0.0));
}

#[test]
fn render_pixel_miss_is_black_and_images_compose() {
    let (model, codes) = tiny_model(Variant::ArtDef, 23);
    let mut renderer = FieldRenderer::new(
        &model,
        &codes.shape["i"],
        &codes.appearance["i"],
        &codes.articulation["s"],
    )
    .unwrap();
    let settings = learned_settings();

    let miss = renderer.render_pixel(&z_ray([0.0, 2.0, -2.5], &settings), &settings, 50.0);
    assert!(!miss.hit.hit);
    assert_eq!(miss.rgb, [0.0; 3]);
    assert!(miss.soft_mask < 1e-6);

    let hit = renderer.render_pixel(&z_ray([0.0, 0.0, -2.5], &settings), &settings, 50.0);
    assert!(hit.hit.hit);
    assert!(hit.rgb.iter().all(|&v| (0.0..=1.0).contains(&v)));

    // A rendered image equals per-pixel calls.
    let intr = Intrinsics::from_fov(6, 4, 65.0);
    let cam = Camera::look_at(intr, [0.0, 0.0, -2.2], [0.0; 3], [0.0, 1.0, 0.0]);
    let (img, soft) = render_image(&renderer, &cam, &settings, 50.0).unwrap();
    for py in 0..4u32 {
        for px in 0..6u32 {
            let r = cam.ray(px as f64, py as f64);
            let ray = bound_ray(r.origin, r.dir, &settings);
            let p = renderer.render_pixel(&ray, &settings, 50.0);
            assert_eq!(img.get(px, py), p.rgb);
            assert_eq!(soft.get(px, py), p.soft_mask);
        }
    }
}

#[test]
fn empty_field_renders_all_zero_mask() {
    // A field that is positive everywhere: sphere of negative radius.
    #[derive(Clone)]
    struct Far;
    impl SdfField for Far {
        fn value(&mut self, x: Vec3) -> f64 {
            math::norm(x) + 1.0
        }
        fn value_and_grad(&mut self, x: Vec3) -> (f64, Vec3) {
            (self.value(x), math::normalize(x))
        }
    }
    let settings = RenderSettings::default();
    let mut f = Far;
    let ray = z_ray([0.0, 0.0, -2.5], &settings);
    let hit = trace_first_intersection(&mut f, &ray, &settings);
    assert!(!hit.hit);
    assert!(soft_mask_value(hit.min_sdf, 50.0) < 1e-20);
}

#[test]
fn generate_rays_validates_and_aims() {
    let intr = Intrinsics::from_fov(64, 48, 60.0);
    let cam = Camera::look_at(intr, [0.0, 0.0, -2.0], [0.0; 3], [0.0, 1.0, 0.0]);
    let settings = RenderSettings::default();
    let rays = generate_rays(
        &cam,
        &[(intr.cx as u32, intr.cy as u32), (0, 0)],
        &settings,
    )
    .unwrap();
    assert_eq!(rays.len(), 2);
    for r in &rays {
        assert!((math::norm(r.dir) - 1.0).abs() < 1e-12);
        assert!(r.t_near >= 0.0 && r.t_far > r.t_near);
    }
    assert!(generate_rays(&cam, &[(64, 0)], &settings).is_err());
}

#[test]
fn grazing_rays_are_dropped_not_exploded() {
    let (model, codes) = tiny_model(Variant::Base, 29);
    let settings = learned_settings();
    let mut frozen = model
        .freeze_geometry(&codes.shape["i"], &codes.articulation["s"])
        .unwrap();
    let ray = z_ray([0.0, 0.0, -2.0], &settings);
    let mut hit = trace_first_intersection(&mut frozen, &ray, &settings);
    assert!(hit.hit);
    // Force a grazing configuration by zeroing the gradient component along
    // the ray.
    hit.grad = [1.0, 0.0, 0.0];
    let tape = Tape::new();
    let binding = model
        .bind_tape(
            &tape,
            &codes.shape["i"],
            &codes.appearance["i"],
            &codes.articulation["s"],
        )
        .unwrap();
    let out = differentiable_hit(&model, &tape, &binding, &ray, &hit).unwrap();
    assert!(out.is_none());
}

