use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fields::{CodeBook, FieldModel, ModelConfig, Variant};
use crate::renderer::bound_ray;

// ---------------------------------------------------------------- pure terms

#[test]
fn rgb_loss_zero_when_predictions_match() {
    let pairs = [([0.2, 0.4, 0.9], [0.2, 0.4, 0.9]); 4];
    assert_eq!(rgb_loss(&pairs, 4), 0.0);
    assert_eq!(rgb_loss(&[], 7), 0.0);
}

#[test]
fn rgb_loss_sums_channels_l1() {
    let pairs = [([1.0, 1.0, 1.0], [0.0, 0.0, 0.0])];
    assert_eq!(rgb_loss(&pairs, 1), 3.0);
}

#[test]
fn rgb_loss_normalizes_by_full_batch_size() {
    // One hit pixel among ten: nine non-hit pixels still count toward the
    // normalizer.
    let pairs = [([1.0, 1.0, 1.0], [0.0, 0.0, 0.0])];
    assert_eq!(rgb_loss(&pairs, 10), 0.3);
}

#[test]
fn mask_loss_closed_form_at_surface_boundary() {
    // min_sdf = 0 makes the soft occupancy exactly 1/2 whatever alpha is, so
    // the cross-entropy is ln 2.
    let loss = mask_loss(&[(false, 0.0)], 50.0, 1);
    assert!((loss - std::f64::consts::LN_2 / 50.0).abs() < 1e-15);
    assert!((loss - 0.013863).abs() < 5e-7);
}

#[test]
fn mask_loss_near_zero_for_correct_empty_prediction() {
    // Background pixel whose ray stays well clear of the surface.
    let loss = mask_loss(&[(false, 0.5)], 50.0, 1);
    assert!(loss >= 0.0 && loss < 1e-10, "loss = {loss}");
}

#[test]
fn mask_loss_large_for_unexplained_foreground() {
    // Foreground pixel with no intersection: softplus(alpha * m) / alpha
    // approaches m, a strong pull toward the ray.
    let ce = binary_ce(true, 0.5, 50.0);
    assert!(ce > 24.9, "ce = {ce}");
    let loss = mask_loss(&[(true, 0.5)], 50.0, 1);
    assert!((loss - 0.5).abs() < 1e-9);
}

#[test]
fn mask_loss_tightens_as_alpha_grows() {
    // Matched predictions fade out as the indicator sharpens; the mismatch
    // penalty keeps its scale.
    let matched = [(false, 0.2), (true, -0.3)];
    let coarse = mask_loss(&matched, 50.0, 2);
    let sharp = mask_loss(&matched, 400.0, 2);
    assert!(sharp < coarse);
    assert!(sharp < 1e-10);
    let mismatch_sharp = mask_loss(&[(true, 0.2)], 400.0, 1);
    assert!((mismatch_sharp - 0.2).abs() < 1e-9);
}

struct SphereField {
    radius: f64,
    scale: f64,
}

impl SdfField for SphereField {
    fn value(&mut self, x: Vec3) -> f64 {
        self.scale * (math::norm(x) - self.radius)
    }
    fn value_and_grad(&mut self, x: Vec3) -> (f64, Vec3) {
        let n = math::norm(x);
        (
            self.scale * (n - self.radius),
            math::scale(x, self.scale / n),
        )
    }
}

#[test]
fn eikonal_loss_zero_for_exact_distance_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let points = sample_eikonal_points(&mut rng, 64, EIKONAL_HALF_EXTENT);
    let mut field = SphereField {
        radius: 0.7,
        scale: 1.0,
    };
    let loss = eikonal_loss(&mut field, &points);
    assert!(loss < 1e-20, "loss = {loss}");
}

#[test]
fn eikonal_loss_unit_for_doubled_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let points = sample_eikonal_points(&mut rng, 64, EIKONAL_HALF_EXTENT);
    let mut field = SphereField {
        radius: 0.7,
        scale: 2.0,
    };
    let loss = eikonal_loss(&mut field, &points);
    assert!((loss - 1.0).abs() < 1e-12, "loss = {loss}");
    assert_eq!(eikonal_loss(&mut field, &[]), 0.0);
}

#[test]
fn eikonal_sample_cloud_is_bounded_and_reproducible() {
    let mut a = ChaCha8Rng::seed_from_u64(5);
    let mut b = ChaCha8Rng::seed_from_u64(5);
    let pa = sample_eikonal_points(&mut a, 100, 1.5);
    let pb = sample_eikonal_points(&mut b, 100, 1.5);
    assert_eq!(pa, pb);
    assert!(pa
        .iter()
        .all(|p| p.iter().all(|c| c.abs() <= 1.5 + f64::EPSILON)));
}

#[test]
fn code_prior_sums_squared_norms() {
    let zero = LatentCode(vec![0.0; 16]);
    assert_eq!(code_prior(&[&zero, &zero, &zero]), 0.0);

    let mut e1 = vec![0.0; 16];
    e1[0] = 1.0;
    let unit = LatentCode(e1);
    assert_eq!(code_prior(&[&unit, &zero, &zero]), 1.0);

    let uniform = LatentCode(vec![0.0625; 256]);
    assert_eq!(code_prior(&[&uniform]), 1.0);
}

#[test]
fn total_loss_is_exact_weighted_sum() {
    let w = LossWeights::default();
    assert_eq!(w.rho, 100.0);
    assert_eq!(w.lambda, 0.1);
    assert_eq!(w.beta, 1e-4);

    let b = total_loss(0.3, 0.01, 0.5, 2.0, 3, 5, &w);
    assert!((b.total - 1.3502).abs() < 1e-12, "total = {}", b.total);
    // Recomputing the composition from the stored parts reproduces the
    // stored total bit for bit.
    let recomputed = b.rgb + w.rho * b.mask + w.lambda * b.eikonal + w.beta * b.code;
    assert_eq!(b.total.to_bits(), recomputed.to_bits());
    assert_eq!((b.n_in, b.n_out), (3, 5));

    let z = total_loss(0.0, 0.0, 0.0, 0.0, 0, 0, &w);
    assert_eq!(z.total, 0.0);
}

// ---------------------------------------------------------- batch assembly

fn tiny_model(variant: Variant, seed: u64) -> (FieldModel, CodeBook) {
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
    let model = FieldModel::init(&cfg, &mut rng).unwrap();
    let mut codes = CodeBook::default();
    let mut draw = |n: usize, s: f64| {
        LatentCode((0..n).map(|_| (rng.gen::<f64>() - 0.5) * s).collect())
    };
    codes.shape.insert("i".into(), draw(6, 0.2));
    codes.appearance.insert("i".into(), draw(6, 0.2));
    codes.articulation.insert("s".into(), draw(3, 0.2));
    (model, codes)
}

fn test_settings() -> RenderSettings {
    RenderSettings {
        scene_bound_radius: 1.5,
        hit_eps: 1e-6,
        secant_iters: 12,
        ..RenderSettings::default()
    }
}

/// A small hand-placed batch around the initial sphere (radius ~0.6): four
/// solid hits on foreground, one hit on background, plus true misses on both
/// mask values and one ray that misses the scene bounds entirely.
fn make_batch(settings: &RenderSettings) -> Vec<PixelSample> {
    let origin = [0.0, 0.0, -2.0];
    let aim = |target: Vec3| math::normalize(math::sub(target, origin));
    let ray = |target: Vec3| bound_ray(origin, aim(target), settings);
    let mut pixels = Vec::new();
    for target in [
        [0.15, 0.1, 0.0],
        [-0.15, 0.1, 0.0],
        [0.1, -0.12, 0.0],
        [0.0, 0.05, 0.0],
    ] {
        pixels.push(PixelSample {
            ray: ray(target),
            rgb: [0.3, 0.5, 0.7],
            occupied: true,
        });
    }
    // Hit geometry where the mask says empty.
    pixels.push(PixelSample {
        ray: ray([0.0, -0.1, 0.0]),
        rgb: [0.0; 3],
        occupied: false,
    });
    // Miss geometry where the mask says occupied.
    pixels.push(PixelSample {
        ray: ray([1.0, 0.0, 0.0]),
        rgb: [0.0; 3],
        occupied: true,
    });
    // Clean background rays.
    pixels.push(PixelSample {
        ray: ray([0.9, 0.3, 0.0]),
        rgb: [0.0; 3],
        occupied: false,
    });
    pixels.push(PixelSample {
        ray: ray([-0.8, 0.5, 0.0]),
        rgb: [0.0; 3],
        occupied: false,
    });
    // Pointing away from the scene bounds altogether.
    pixels.push(PixelSample {
        ray: bound_ray(origin, [1.0, 0.0, 0.0], settings),
        rgb: [0.0; 3],
        occupied: false,
    });
    pixels
}

fn eval_batch(
    model: &FieldModel,
    codes: &CodeBook,
    pixels: &[PixelSample],
    eik: &[Vec3],
    settings: &RenderSettings,
    alpha: f64,
) -> BatchLoss {
    batch_loss_grads(
        model,
        &codes.shape["i"],
        &codes.appearance["i"],
        &codes.articulation["s"],
        pixels,
        eik,
        settings,
        &LossWeights::default(),
        alpha,
    )
    .unwrap()
}

#[test]
fn batch_breakdown_composes_exactly() {
    let settings = test_settings();
    let (model, codes) = tiny_model(Variant::ArtDef, 31);
    let pixels = make_batch(&settings);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let eik = sample_eikonal_points(&mut rng, 6, 1.2);
    let out = eval_batch(&model, &codes, &pixels, &eik, &settings, 50.0);

    let b = out.breakdown;
    let w = LossWeights::default();
    let recomputed = b.rgb + w.rho * b.mask + w.lambda * b.eikonal + w.beta * b.code;
    assert_eq!(b.total.to_bits(), recomputed.to_bits());
    assert_eq!(b.n_in + b.n_out, pixels.len());
    assert!(b.n_in >= 3, "expected several foreground hits, got {}", b.n_in);
    for (name, v) in [
        ("rgb", b.rgb),
        ("mask", b.mask),
        ("eikonal", b.eikonal),
        ("code", b.code),
        ("total", b.total),
    ] {
        assert!(v >= 0.0 && v.is_finite(), "{name} = {v}");
    }
    // The code prior is attached to exactly one chunk.
    let direct = code_prior(&[
        &codes.shape["i"],
        &codes.appearance["i"],
        &codes.articulation["s"],
    ]);
    assert!((b.code - direct).abs() < 1e-12);
}

#[test]
fn batch_values_match_forward_renderer() {
    use crate::renderer::{trace_first_intersection, FieldRenderer};

    let settings = test_settings();
    let (model, codes) = tiny_model(Variant::ArtDef, 31);
    let pixels = make_batch(&settings);
    let out = eval_batch(&model, &codes, &pixels, &[], &settings, 50.0);

    // Independent recomputation from the forward path: trace each ray, shade
    // hits that the mask confirms, cross-entropy for everything else.
    let mut renderer =
        FieldRenderer::new(&model, &codes.shape["i"], &codes.appearance["i"], &codes.articulation["s"])
            .unwrap();
    let mut rgb_sum = 0.0;
    let mut ce_sum = 0.0;
    for p in &pixels {
        let hit = trace_first_intersection(renderer.field(), &p.ray, &settings);
        if hit.hit && p.occupied {
            let c = renderer.radiance(hit.x, hit.normal, p.ray.dir);
            rgb_sum += (c[0] - p.rgb[0]).abs() + (c[1] - p.rgb[1]).abs() + (c[2] - p.rgb[2]).abs();
        } else {
            ce_sum += binary_ce(p.occupied, hit.min_sdf, 50.0);
        }
    }
    let n = pixels.len() as f64;
    assert!((out.breakdown.rgb - rgb_sum / n).abs() < 1e-9);
    assert!((out.breakdown.mask - ce_sum / (50.0 * n)).abs() < 1e-9);
}

#[test]
fn batch_is_deterministic_across_calls() {
    let settings = test_settings();
    let (model, codes) = tiny_model(Variant::ArtDef, 40);
    let pixels = make_batch(&settings);
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let eik = sample_eikonal_points(&mut rng, 9, 1.2);
    let a = eval_batch(&model, &codes, &pixels, &eik, &settings, 50.0);
    let b = eval_batch(&model, &codes, &pixels, &eik, &settings, 50.0);
    assert_eq!(a.breakdown, b.breakdown);
    assert_eq!(a.grads, b.grads);
}

#[test]
fn multi_chunk_batch_counts_code_prior_once() {
    let settings = test_settings();
    let (model, codes) = tiny_model(Variant::Base, 55);
    // Three chunks' worth of background rays.
    let origin = [0.0, 0.0, -2.0];
    let mut pixels = Vec::new();
    for k in 0..(2 * CHUNK_PIXELS + 7) {
        let s = k as f64 / (2 * CHUNK_PIXELS + 7) as f64;
        let dir = math::normalize([0.9 + 0.2 * s, 0.3 - 0.1 * s, 2.0]);
        pixels.push(PixelSample {
            ray: bound_ray(origin, dir, &settings),
            rgb: [0.0; 3],
            occupied: false,
        });
    }
    let out = eval_batch(&model, &codes, &pixels, &[], &settings, 50.0);
    let direct = code_prior(&[
        &codes.shape["i"],
        &codes.appearance["i"],
        &codes.articulation["s"],
    ]);
    assert!((out.breakdown.code - direct).abs() < 1e-12);
    assert_eq!(out.breakdown.n_out, pixels.len());
}

#[test]
fn ray_missing_scene_bounds_contributes_constant() {
    let settings = test_settings();
    let (model, codes) = tiny_model(Variant::ArtDef, 60);
    let mut codes = codes;
    // Zero codes so the code prior's gradient vanishes too.
    for table in [&mut codes.shape, &mut codes.appearance] {
        for c in table.values_mut() {
            c.0.fill(0.0);
        }
    }
    for c in codes.articulation.values_mut() {
        c.0.fill(0.0);
    }
    let pixel = PixelSample {
        ray: bound_ray([0.0, 0.0, -2.0], [1.0, 0.0, 0.0], &settings),
        rgb: [0.0; 3],
        occupied: false,
    };
    assert!(pixel.ray.t_far <= pixel.ray.t_near);
    let out = eval_batch(&model, &codes, &[pixel], &[], &settings, 50.0);
    // Clearance from the ray to the bounding sphere is 0.5.
    let expected = binary_ce(false, 0.5, 50.0) / 50.0;
    assert!((out.breakdown.mask - expected).abs() < 1e-12);
    assert_eq!(out.breakdown.n_out, 1);
    assert_eq!(out.breakdown.rgb, 0.0);
    for (name, g) in out.grads.blocks() {
        assert!(g.iter().all(|&v| v == 0.0), "{name} has nonzero gradient");
    }
}

#[test]
fn empty_batch_reduces_to_code_prior() {
    let settings = test_settings();
    let (model, codes) = tiny_model(Variant::Base, 61);
    let out = eval_batch(&model, &codes, &[], &[], &settings, 50.0);
    // No pixels and no sample points: only the pixel-independent prior
    // remains.
    assert_eq!(out.breakdown.rgb, 0.0);
    assert_eq!(out.breakdown.mask, 0.0);
    assert_eq!(out.breakdown.eikonal, 0.0);
    let w = LossWeights::default();
    assert_eq!(out.breakdown.total, w.beta * out.breakdown.code);
    assert_eq!(out.breakdown.n_in + out.breakdown.n_out, 0);

    let err = batch_loss_grads(
        &model,
        &codes.shape["i"],
        &codes.appearance["i"],
        &codes.articulation["s"],
        &[],
        &[],
        &settings,
        &LossWeights::default(),
        0.0,
    );
    assert!(matches!(err, Err(Error::InvalidConfig(_))));
}

/// Central finite differences on the worst (largest-gradient) coordinate of
/// every parameter block, re-tracing rays at each perturbation.
fn check_gradients(variant: Variant, seed: u64) {
    let settings = test_settings();
    let (model, codes) = tiny_model(variant, seed);
    let pixels = make_batch(&settings);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe1c0);
    let eik = sample_eikonal_points(&mut rng, 5, 1.2);
    let alpha = 50.0;

    let base = eval_batch(&model, &codes, &pixels, &eik, &settings, alpha);
    let h = 1e-4;

    let blocks: Vec<(String, Vec<f64>)> = base
        .grads
        .blocks()
        .iter()
        .map(|(n, g)| (n.to_string(), g.to_vec()))
        .collect();
    let mut checked = 0;
    for (name, g) in &blocks {
        if g.is_empty() {
            continue;
        }
        let (idx, &gi) = g
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .unwrap();
        if gi.abs() < 1e-7 {
            continue;
        }
        let mut totals = [0.0; 2];
        let mut memberships = [(0, 0); 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut m = model.clone();
            let mut c = codes.clone();
            perturb(&mut m, &mut c, name, idx, sign * h);
            let out = eval_batch(&m, &c, &pixels, &eik, &settings, alpha);
            totals[k] = out.breakdown.total;
            memberships[k] = (out.breakdown.n_in, out.breakdown.n_out);
        }
        assert_eq!(
            memberships[0], memberships[1],
            "{name}[{idx}]: pixel set changed under perturbation"
        );
        let fd = (totals[0] - totals[1]) / (2.0 * h);
        let rel = (fd - gi).abs() / gi.abs().max(1e-12);
        assert!(
            rel < 1e-2,
            "{variant:?} {name}[{idx}]: tape {gi:.6e} vs fd {fd:.6e} (rel {rel:.3e})"
        );
        checked += 1;
    }
    assert!(checked >= 4, "only {checked} blocks had usable gradients");
}

fn perturb(model: &mut FieldModel, codes: &mut CodeBook, block: &str, idx: usize, dv: f64) {
    match block {
        "geometry" => model.geometry.params[idx] += dv,
        "deform" => model.deform.as_mut().unwrap().params[idx] += dv,
        "appearance" => model.appearance.params[idx] += dv,
        "shape" => codes.shape.get_mut("i").unwrap().0[idx] += dv,
        "appearance_code" => codes.appearance.get_mut("i").unwrap().0[idx] += dv,
        "articulation" => codes.articulation.get_mut("s").unwrap().0[idx] += dv,
        other => panic!("unknown block {other}"),
    }
}

#[test]
fn gradients_match_finite_differences_base() {
    check_gradients(Variant::Base, 101);
}

#[test]
fn gradients_match_finite_differences_artdef() {
    check_gradients(Variant::ArtDef, 102);
}
