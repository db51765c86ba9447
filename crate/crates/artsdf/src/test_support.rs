//! Shared fixtures for unit tests: tiny models and small datasets, both
//! synthetic and rendered from the procedural scenes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::{ModelConfig, Variant};
use crate::image::{Image, MaskImage};
use crate::losses::LossWeights;
use crate::scenegen::cameras::{place_cameras, Intrinsics, Rig};
use crate::scenegen::render_ref::render_reference;
use crate::scenegen::{articulation_grid, build_scene, SceneKind};
use crate::trainer::{CodeInitScale, LoadedDataset, LoadedView, TrainConfig};

pub(crate) fn tiny_model(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        point_freqs: 4,
        view_freqs: 2,
        shape_dim: 6,
        appearance_dim: 6,
        articulation_dim: 3,
        geometry_hidden: vec![16, 16],
        geometry_skip: 1,
        deform_hidden: vec![16, 16],
        deform_skip: 1,
        appearance_hidden: vec![16, 16],
        init_radius: 0.45,
    }
}

pub(crate) fn tiny_config(variant: Variant, seed: u64) -> TrainConfig {
    TrainConfig {
        model: tiny_model(variant),
        total_iters: 500,
        pixel_batch: 16,
        lr0: 1e-3,
        lr_decay_at: vec![0.5, 0.75],
        lr_decay_factor: 0.5,
        alpha0: 50.0,
        alpha_double_every: 10_000,
        alpha_max_doublings: 5,
        weights: LossWeights::default(),
        seed,
        n_ray_samples: 8,
        scene_bound_radius: 1.3,
        eikonal_extent: 1.2,
        code_init: CodeInitScale::VarianceInverseLen,
    }
}

/// Deterministic synthetic dataset: pseudo-random images and masks on real
/// cameras. Good for exercising sampling and update plumbing cheaply.
pub(crate) fn stub_dataset(
    m: usize,
    n_states: usize,
    n_views: usize,
    w: u32,
    h: u32,
) -> LoadedDataset {
    let intr = Intrinsics::from_fov(w, h, 65.0);
    let cams = place_cameras(Rig::Training, 42, 2.2, intr);
    let mut views = Vec::new();
    for slot in 0..m {
        let mut per_state = Vec::new();
        for j in 0..n_states {
            let mut list = Vec::new();
            for v in 0..n_views {
                let cam = &cams[(7 * slot + 3 * j + v) % cams.len()];
                let mut rng =
                    ChaCha8Rng::seed_from_u64((slot as u64) << 20 | (j as u64) << 10 | v as u64);
                let mut image = Image::new(w, h);
                let mut mask = MaskImage::new(w, h);
                for y in 0..h {
                    for x in 0..w {
                        image.set(x, y, [rng.gen(), rng.gen(), rng.gen()]);
                        mask.set(x, y, rng.gen::<f64>() < 0.4);
                    }
                }
                list.push(LoadedView {
                    camera: cam.clone(),
                    image,
                    mask,
                });
            }
            per_state.push(list);
        }
        views.push(per_state);
    }
    LoadedDataset {
        category: "stub".into(),
        width: w,
        height: h,
        instances: (0..m).collect(),
        n_states,
        views,
    }
}

/// Real renders of one or more procedural scene instances.
pub(crate) fn rendered_dataset(
    kind: SceneKind,
    instances: &[usize],
    n_states: usize,
    n_views: usize,
    w: u32,
    h: u32,
    seed: u64,
) -> LoadedDataset {
    let intr = Intrinsics::from_fov(w, h, 65.0);
    let cams = place_cameras(Rig::Training, seed, 2.2, intr);
    let mut views = Vec::new();
    for &i in instances {
        let scene = build_scene(kind, seed, i);
        let grid = articulation_grid(&scene, n_states);
        let mut per_state = Vec::new();
        for art in &grid {
            let mut list = Vec::new();
            for cam in cams.iter().take(n_views) {
                let (image, mask) = render_reference(&scene, art, cam).unwrap();
                list.push(LoadedView {
                    camera: cam.clone(),
                    image,
                    mask,
                });
            }
            per_state.push(list);
        }
        views.push(per_state);
    }
    LoadedDataset {
        category: kind.as_str().into(),
        width: w,
        height: h,
        instances: instances.to_vec(),
        n_states,
        views,
    }
}
