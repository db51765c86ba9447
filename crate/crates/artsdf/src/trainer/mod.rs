//! Auto-decoder training loop.
//!
//! Owns everything between a rendered dataset on disk and a trained
//! checkpoint: latent-code initialization, the mask-sharpness and
//! learning-rate schedules, uniform pixel batching over (instance, state,
//! view) triples, per-step Adam updates of the networks plus exactly the
//! three codes the batch touched, and exact-resume checkpointing.
//!
//! Determinism contract: a fixed seed fixes the whole run. All randomness
//! flows through one counter-based RNG per concern (model init, code init,
//! batch sampling), the batch RNG's stream position is stored in
//! checkpoints, and gradient reduction inside a step happens in fixed chunk
//! order regardless of worker count.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{adam_step, AdamHyper, OptimState};
use crate::error::{Error, Result};
use crate::fields::{CodeBook, FieldModel, LatentCode, ModelConfig, Variant};
use crate::image::{Image, MaskImage};
use crate::io::checkpoint::Checkpoint;
use crate::io::config::Kv;
use crate::io::dataset::DatasetIndex;
use crate::io::ppm::{read_pgm, read_ppm};
use crate::losses::{
    batch_loss_grads, sample_eikonal_points, LossBreakdown, LossWeights, PixelSample,
};
use crate::renderer::{generate_rays, RenderSettings};
use crate::scenegen::cameras::Camera;

/// RNG stream for network weight initialization.
pub const MODEL_RNG_STREAM: u64 = 0x30de1;
/// RNG stream for latent-code initialization.
pub const CODE_RNG_STREAM: u64 = 0xc0de5;
/// RNG stream for batch sampling during training.
pub const TRAIN_RNG_STREAM: u64 = 0x7ea13;

/// How the initial code component scale relates to the code length `l`:
/// components are drawn zero-mean Gaussian with either variance `1/l`
/// (standard deviation `1/sqrt(l)`) or standard deviation `1/l`. Recorded in
/// the resolved config so experiments can flip it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeInitScale {
    /// Variance `1/l`.
    VarianceInverseLen,
    /// Standard deviation `1/l`.
    StdInverseLen,
}

impl CodeInitScale {
    pub fn as_str(self) -> &'static str {
        match self {
            CodeInitScale::VarianceInverseLen => "variance",
            CodeInitScale::StdInverseLen => "std",
        }
    }

    pub fn parse(s: &str) -> Result<CodeInitScale> {
        match s {
            "variance" => Ok(CodeInitScale::VarianceInverseLen),
            "std" => Ok(CodeInitScale::StdInverseLen),
            other => Err(Error::InvalidConfig(format!(
                "unknown code_init `{other}` (expected variance or std)"
            ))),
        }
    }

    /// Standard deviation of the initialization Gaussian for codes of
    /// length `len`.
    pub fn std_for_len(self, len: usize) -> f64 {
        let l = len.max(1) as f64;
        match self {
            CodeInitScale::VarianceInverseLen => (1.0 / l).sqrt(),
            CodeInitScale::StdInverseLen => 1.0 / l,
        }
    }
}

/// Codebook key of a dataset instance index.
pub fn instance_key(instance: usize) -> String {
    format!("instance_{instance:03}")
}

/// Codebook key of an articulation-state index.
pub fn state_key(state: usize) -> String {
    format!("state_{state:03}")
}

/// Everything that determines a training run given a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub total_iters: u64,
    /// Pixels per optimization step.
    pub pixel_batch: usize,
    /// Initial learning rate, shared by networks and codes.
    pub lr0: f64,
    /// Fractions of `total_iters` at which the learning rate is scaled by
    /// `lr_decay_factor` (each reached point applies once, inclusively).
    pub lr_decay_at: Vec<f64>,
    pub lr_decay_factor: f64,
    /// Initial mask-sharpness α.
    pub alpha0: f64,
    /// Iterations between doublings of α.
    pub alpha_double_every: u64,
    /// Cap on the number of doublings.
    pub alpha_max_doublings: u32,
    pub weights: LossWeights,
    pub seed: u64,
    /// Samples along each ray when hunting for the first sign change.
    pub n_ray_samples: usize,
    /// Radius of the sphere rays are clipped against.
    pub scene_bound_radius: f64,
    /// Half extent of the cube regularity points are drawn from.
    pub eikonal_extent: f64,
    pub code_init: CodeInitScale,
}

impl TrainConfig {
    /// CPU-sized defaults: small networks, small pixel batches, schedules
    /// compressed to a 20k-iteration run by the same fractions the
    /// full-scale schedule uses over 250k.
    pub fn desk(variant: Variant) -> TrainConfig {
        TrainConfig {
            model: ModelConfig::desk(variant),
            total_iters: 20_000,
            pixel_batch: 96,
            lr0: 1e-4,
            lr_decay_at: vec![0.5, 0.75],
            lr_decay_factor: 0.5,
            alpha0: 50.0,
            alpha_double_every: 4_000,
            alpha_max_doublings: 5,
            weights: LossWeights::default(),
            seed: 7,
            n_ray_samples: 32,
            scene_bound_radius: 1.3,
            eikonal_extent: 1.5,
            code_init: CodeInitScale::VarianceInverseLen,
        }
    }

    /// Full-scale schedule: 250k iterations, 2048-pixel batches, α doubling
    /// every 50k iterations up to 5 times, learning rate halved at the 50%
    /// and 75% points. Used to pin down schedule arithmetic; far too slow to
    /// train in tests.
    pub fn paper(variant: Variant) -> TrainConfig {
        TrainConfig {
            model: ModelConfig::paper(variant),
            total_iters: 250_000,
            pixel_batch: 2048,
            lr0: 1e-4,
            lr_decay_at: vec![0.5, 0.75],
            lr_decay_factor: 0.5,
            alpha0: 50.0,
            alpha_double_every: 50_000,
            alpha_max_doublings: 5,
            weights: LossWeights::default(),
            seed: 7,
            n_ray_samples: 100,
            scene_bound_radius: 3.0,
            eikonal_extent: 3.0,
            code_init: CodeInitScale::VarianceInverseLen,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.total_iters == 0 {
            return bad("total_iters must be at least 1".into());
        }
        if self.pixel_batch == 0 {
            return bad("pixel_batch must be at least 1".into());
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return bad(format!("lr0 {} must be positive and finite", self.lr0));
        }
        if !(self.lr_decay_factor.is_finite()
            && self.lr_decay_factor > 0.0
            && self.lr_decay_factor <= 1.0)
        {
            return bad(format!(
                "lr_decay_factor {} must lie in (0, 1]",
                self.lr_decay_factor
            ));
        }
        for &f in &self.lr_decay_at {
            if !(f.is_finite() && (0.0..=1.0).contains(&f)) {
                return bad(format!("lr decay fraction {f} must lie in [0, 1]"));
            }
        }
        if !(self.alpha0.is_finite() && self.alpha0 > 0.0) {
            return bad(format!("alpha0 {} must be positive and finite", self.alpha0));
        }
        if self.alpha_double_every == 0 {
            return bad("alpha_double_every must be at least 1".into());
        }
        if self.n_ray_samples < 2 {
            return bad("n_ray_samples must be at least 2".into());
        }
        if !(self.scene_bound_radius.is_finite() && self.scene_bound_radius > 0.0) {
            return bad(format!(
                "scene_bound_radius {} must be positive and finite",
                self.scene_bound_radius
            ));
        }
        if !(self.eikonal_extent.is_finite() && self.eikonal_extent > 0.0) {
            return bad(format!(
                "eikonal_extent {} must be positive and finite",
                self.eikonal_extent
            ));
        }
        for (name, w) in [
            ("rho", self.weights.rho),
            ("lambda", self.weights.lambda),
            ("beta", self.weights.beta),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return bad(format!("loss weight {name} = {w} must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Ray-tracing settings this run trains (and should later render) with.
    pub fn settings(&self) -> RenderSettings {
        RenderSettings {
            n_ray_samples: self.n_ray_samples,
            scene_bound_radius: self.scene_bound_radius,
            ..RenderSettings::default()
        }
    }

    /// Serialize as flat `key = value` pairs.
    pub fn to_kv(&self) -> Kv {
        let mut kv = Kv::new();
        kv.set("variant", self.model.variant.as_str());
        kv.set("point_freqs", self.model.point_freqs);
        kv.set("view_freqs", self.model.view_freqs);
        kv.set("shape_dim", self.model.shape_dim);
        kv.set("appearance_dim", self.model.appearance_dim);
        kv.set("articulation_dim", self.model.articulation_dim);
        kv.set("geometry_hidden", join_list(&self.model.geometry_hidden));
        kv.set("geometry_skip", self.model.geometry_skip);
        kv.set("deform_hidden", join_list(&self.model.deform_hidden));
        kv.set("deform_skip", self.model.deform_skip);
        kv.set("appearance_hidden", join_list(&self.model.appearance_hidden));
        kv.set("init_radius", self.model.init_radius);
        kv.set("total_iters", self.total_iters);
        kv.set("pixel_batch", self.pixel_batch);
        kv.set("lr0", self.lr0);
        kv.set("lr_decay_at", join_list(&self.lr_decay_at));
        kv.set("lr_decay_factor", self.lr_decay_factor);
        kv.set("alpha0", self.alpha0);
        kv.set("alpha_double_every", self.alpha_double_every);
        kv.set("alpha_max_doublings", self.alpha_max_doublings);
        kv.set("rho", self.weights.rho);
        kv.set("lambda", self.weights.lambda);
        kv.set("beta", self.weights.beta);
        kv.set("seed", self.seed);
        kv.set("n_ray_samples", self.n_ray_samples);
        kv.set("scene_bound_radius", self.scene_bound_radius);
        kv.set("eikonal_extent", self.eikonal_extent);
        kv.set("code_init", self.code_init.as_str());
        kv
    }

    /// Build a config from `key = value` pairs: `variant` is required, every
    /// other key falls back to the [`TrainConfig::desk`] default for that
    /// variant. Unknown values are rejected; the result is validated.
    pub fn from_kv(kv: &Kv) -> Result<TrainConfig> {
        let variant = Variant::parse(kv.str("variant").map_err(Error::InvalidConfig)?)?;
        let mut cfg = TrainConfig::desk(variant);
        overlay(kv, "point_freqs", &mut cfg.model.point_freqs)?;
        overlay(kv, "view_freqs", &mut cfg.model.view_freqs)?;
        overlay(kv, "shape_dim", &mut cfg.model.shape_dim)?;
        overlay(kv, "appearance_dim", &mut cfg.model.appearance_dim)?;
        overlay(kv, "articulation_dim", &mut cfg.model.articulation_dim)?;
        overlay_list(kv, "geometry_hidden", &mut cfg.model.geometry_hidden)?;
        overlay(kv, "geometry_skip", &mut cfg.model.geometry_skip)?;
        overlay_list(kv, "deform_hidden", &mut cfg.model.deform_hidden)?;
        overlay(kv, "deform_skip", &mut cfg.model.deform_skip)?;
        overlay_list(kv, "appearance_hidden", &mut cfg.model.appearance_hidden)?;
        overlay(kv, "init_radius", &mut cfg.model.init_radius)?;
        overlay(kv, "total_iters", &mut cfg.total_iters)?;
        overlay(kv, "pixel_batch", &mut cfg.pixel_batch)?;
        overlay(kv, "lr0", &mut cfg.lr0)?;
        overlay_list(kv, "lr_decay_at", &mut cfg.lr_decay_at)?;
        overlay(kv, "lr_decay_factor", &mut cfg.lr_decay_factor)?;
        overlay(kv, "alpha0", &mut cfg.alpha0)?;
        overlay(kv, "alpha_double_every", &mut cfg.alpha_double_every)?;
        overlay(kv, "alpha_max_doublings", &mut cfg.alpha_max_doublings)?;
        overlay(kv, "rho", &mut cfg.weights.rho)?;
        overlay(kv, "lambda", &mut cfg.weights.lambda)?;
        overlay(kv, "beta", &mut cfg.weights.beta)?;
        overlay(kv, "seed", &mut cfg.seed)?;
        overlay(kv, "n_ray_samples", &mut cfg.n_ray_samples)?;
        overlay(kv, "scene_bound_radius", &mut cfg.scene_bound_radius)?;
        overlay(kv, "eikonal_extent", &mut cfg.eikonal_extent)?;
        if let Some(raw) = kv.get("code_init") {
            cfg.code_init = CodeInitScale::parse(raw)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn join_list<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn overlay<T: std::str::FromStr>(kv: &Kv, key: &str, dst: &mut T) -> Result<()>
where
    T::Err: std::fmt::Display,
{
    if let Some(raw) = kv.get(key) {
        *dst = raw
            .trim()
            .parse()
            .map_err(|e| Error::InvalidConfig(format!("bad value for {key}: {e}")))?;
    }
    Ok(())
}

fn overlay_list<T: std::str::FromStr>(kv: &Kv, key: &str, dst: &mut Vec<T>) -> Result<()>
where
    T::Err: std::fmt::Display,
{
    if let Some(raw) = kv.get(key) {
        let mut out = Vec::new();
        for piece in raw.split(',') {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            out.push(
                piece
                    .parse()
                    .map_err(|e| Error::InvalidConfig(format!("bad value for {key}: {e}")))?,
            );
        }
        *dst = out;
    }
    Ok(())
}

/// Mask sharpness after `iter` iterations of a doubling schedule:
/// `alpha0 * 2^min(iter / double_every, cap)`. Non-decreasing in `iter`.
pub fn alpha_schedule(iter: u64, alpha0: f64, double_every: u64, cap: u32) -> f64 {
    let doublings = (iter / double_every.max(1)).min(cap as u64);
    alpha0 * 2f64.powi(doublings as i32)
}

/// Mask sharpness at a training iteration.
pub fn alpha_at(iter: u64, cfg: &TrainConfig) -> f64 {
    alpha_schedule(
        iter,
        cfg.alpha0,
        cfg.alpha_double_every,
        cfg.alpha_max_doublings,
    )
}

/// Learning rate at an iteration: `lr0` scaled by `lr_decay_factor` once for
/// every decay fraction already reached (`iter >= fraction * total_iters`).
/// Non-increasing in `iter`.
pub fn lr_at(iter: u64, cfg: &TrainConfig) -> f64 {
    let mut lr = cfg.lr0;
    for &frac in &cfg.lr_decay_at {
        if iter as f64 >= frac * cfg.total_iters as f64 {
            lr *= cfg.lr_decay_factor;
        }
    }
    lr
}

/// Draw every latent code a training run needs: one shape and one appearance
/// code per instance, and articulation codes keyed per state (sharing
/// variants) or per (instance, state). Components are i.i.d. zero-mean
/// Gaussian scaled by the code length per `cfg.code_init`. Instances are
/// visited in the order given, so pass them in a fixed (ascending) order.
pub fn init_codes(instances: &[usize], n_states: usize, cfg: &TrainConfig) -> CodeBook {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(CODE_RNG_STREAM);
    let draw = |len: usize, rng: &mut ChaCha8Rng| {
        let normal = Normal::new(0.0, cfg.code_init.std_for_len(len))
            .expect("finite positive std by construction");
        LatentCode((0..len).map(|_| normal.sample(rng)).collect())
    };

    let mut codes = CodeBook::default();
    for &i in instances {
        codes
            .shape
            .insert(instance_key(i), draw(cfg.model.shape_dim, &mut rng));
    }
    for &i in instances {
        codes
            .appearance
            .insert(instance_key(i), draw(cfg.model.appearance_dim, &mut rng));
    }
    let variant = cfg.model.variant;
    if variant.shares_articulation() {
        for j in 0..n_states {
            let key = CodeBook::articulation_key(variant, "", &state_key(j));
            codes
                .articulation
                .insert(key, draw(cfg.model.articulation_dim, &mut rng));
        }
    } else {
        for &i in instances {
            for j in 0..n_states {
                let key = CodeBook::articulation_key(variant, &instance_key(i), &state_key(j));
                codes
                    .articulation
                    .insert(key, draw(cfg.model.articulation_dim, &mut rng));
            }
        }
    }
    codes
}

/// One posed view with its images resident in memory.
#[derive(Debug, Clone)]
pub struct LoadedView {
    pub camera: Camera,
    pub image: Image,
    pub mask: MaskImage,
}

/// A dataset's training views loaded into memory, indexed by
/// `[instance slot][state][view]`. Slot `s` corresponds to dataset instance
/// `instances[s]`; held-out instances are not loaded.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub category: String,
    pub width: u32,
    pub height: u32,
    /// Dataset indices of the training instances, ascending.
    pub instances: Vec<usize>,
    pub n_states: usize,
    pub views: Vec<Vec<Vec<LoadedView>>>,
}

impl LoadedDataset {
    /// Read every training image and mask referenced by the index.
    pub fn from_index(index: &DatasetIndex) -> Result<LoadedDataset> {
        let instances = index.train_instances();
        let n_states = index.n_states();
        let (width, height) = (index.manifest.width, index.manifest.height);
        let mut views = Vec::with_capacity(instances.len());
        for &i in &instances {
            let mut per_state = Vec::with_capacity(n_states);
            for j in 0..n_states {
                let records = &index.views[i][j].train;
                let mut loaded = Vec::with_capacity(records.len());
                for rec in records {
                    let image = read_ppm(&rec.rgb_path)?;
                    let mask = read_pgm(&rec.mask_path)?;
                    if image.width != width
                        || image.height != height
                        || mask.width != width
                        || mask.height != height
                    {
                        return Err(Error::parse(
                            &rec.rgb_path,
                            format!(
                                "view {} is {}x{}, manifest says {}x{}",
                                rec.name, image.width, image.height, width, height
                            ),
                        ));
                    }
                    loaded.push(LoadedView {
                        camera: rec.camera.clone(),
                        image,
                        mask,
                    });
                }
                per_state.push(loaded);
            }
            views.push(per_state);
        }
        Ok(LoadedDataset {
            category: index.manifest.category.clone(),
            width,
            height,
            instances,
            n_states,
            views,
        })
    }

    pub fn n_views_total(&self) -> usize {
        self.views
            .iter()
            .flat_map(|per_state| per_state.iter().map(Vec::len))
            .sum()
    }
}

/// One sampled pixel batch: a single view's identity plus the chosen pixels.
#[derive(Debug, Clone)]
pub struct SampledBatch {
    /// Index into `LoadedDataset::instances` / `views`.
    pub instance_slot: usize,
    /// Dataset instance id.
    pub instance: usize,
    pub state: usize,
    pub view: usize,
    pub coords: Vec<(u32, u32)>,
    pub pixels: Vec<PixelSample>,
}

/// Uniformly pick one view across all (instance, state, view) triples, then
/// `batch` distinct pixels uniformly from it (all pixels if the view is
/// smaller than the batch).
pub fn sample_pixel_batch<R: Rng>(
    data: &LoadedDataset,
    rng: &mut R,
    batch: usize,
    settings: &RenderSettings,
) -> Result<SampledBatch> {
    let total = data.n_views_total();
    if total == 0 {
        return Err(Error::InvalidConfig(
            "dataset has no training views".into(),
        ));
    }
    if batch == 0 {
        return Err(Error::InvalidConfig("pixel batch must be at least 1".into()));
    }
    let mut remaining = rng.gen_range(0..total);
    let (mut slot, mut state, mut view) = (0, 0, 0);
    'locate: for (s, per_state) in data.views.iter().enumerate() {
        for (j, views) in per_state.iter().enumerate() {
            if remaining < views.len() {
                (slot, state, view) = (s, j, remaining);
                break 'locate;
            }
            remaining -= views.len();
        }
    }
    let lv = &data.views[slot][state][view];
    let (w, h) = (lv.image.width, lv.image.height);
    let n_px = w as usize * h as usize;
    let picks = rand::seq::index::sample(rng, n_px, batch.min(n_px));
    let coords: Vec<(u32, u32)> = picks
        .iter()
        .map(|idx| ((idx % w as usize) as u32, (idx / w as usize) as u32))
        .collect();
    let rays = generate_rays(&lv.camera, &coords, settings)?;
    let pixels = coords
        .iter()
        .zip(rays)
        .map(|(&(x, y), ray)| PixelSample {
            ray,
            rgb: lv.image.get(x, y),
            occupied: lv.mask.get(x, y),
        })
        .collect();
    Ok(SampledBatch {
        instance_slot: slot,
        instance: data.instances[slot],
        state,
        view,
        coords,
        pixels,
    })
}

/// Header of the tab-separated training log.
pub const LOG_HEADER: &str = "iter\tlr\talpha\trgb\tmask\teikonal\tcode\ttotal";

/// What one optimization step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Iteration the step ran as (schedules were evaluated at this value).
    pub iter: u64,
    pub lr: f64,
    pub alpha: f64,
    /// Dataset instance id the batch came from.
    pub instance: usize,
    pub state: usize,
    pub view: usize,
    pub breakdown: LossBreakdown,
}

impl StepReport {
    /// One tab-separated line matching [`LOG_HEADER`].
    pub fn log_line(&self) -> String {
        let b = &self.breakdown;
        format!(
            "{}\t{:e}\t{}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}",
            self.iter, self.lr, self.alpha, b.rgb, b.mask, b.eikonal, b.code, b.total
        )
    }
}

/// Training state: model, codes, optimizer moments, and the batch RNG.
pub struct Trainer {
    pub model: FieldModel,
    pub codes: CodeBook,
    /// Adam moments keyed `net/<block>` and `code/<table>/<key>`.
    pub optim: BTreeMap<String, OptimState>,
    pub iteration: u64,
    pub config: TrainConfig,
    pub data: LoadedDataset,
    rng: ChaCha8Rng,
}

impl Trainer {
    /// Fresh run: initialize the model and codes from the config seed and
    /// zero optimizer moments for every block.
    pub fn new(config: TrainConfig, data: LoadedDataset) -> Result<Trainer> {
        config.validate()?;
        if data.n_views_total() == 0 {
            return Err(Error::InvalidConfig(
                "dataset has no training views".into(),
            ));
        }
        let mut model_rng = ChaCha8Rng::seed_from_u64(config.seed);
        model_rng.set_stream(MODEL_RNG_STREAM);
        let model = FieldModel::init(&config.model, &mut model_rng)?;
        let codes = init_codes(&data.instances, data.n_states, &config);
        let optim = fresh_optim(&model, &codes);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(TRAIN_RNG_STREAM);
        Ok(Trainer {
            model,
            codes,
            optim,
            iteration: 0,
            config,
            data,
            rng,
        })
    }

    /// Resume exactly where a checkpoint left off: parameters, codes,
    /// optimizer moments, iteration counter, and the batch RNG's stream
    /// position all restored.
    pub fn from_checkpoint(ckpt: &Checkpoint, data: LoadedDataset) -> Result<Trainer> {
        let kv = Kv::parse(&ckpt.config_text).map_err(Error::InvalidConfig)?;
        let mut config = TrainConfig::from_kv(&kv)?;
        config.seed = ckpt.seed;
        if config.model.variant != ckpt.model.variant {
            return Err(Error::VariantMismatch {
                detail: format!(
                    "checkpoint model is {}, its config says {}",
                    ckpt.model.variant.as_str(),
                    config.model.variant.as_str()
                ),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(ckpt.seed);
        rng.set_stream(TRAIN_RNG_STREAM);
        rng.set_word_pos(ckpt.rng_word_pos);
        Ok(Trainer {
            model: ckpt.model.clone(),
            codes: ckpt.codes.clone(),
            optim: ckpt.optim.clone(),
            iteration: ckpt.iteration,
            config,
            data,
            rng,
        })
    }

    /// One optimization step: sample a batch, evaluate the objective and its
    /// gradients, and Adam-update the networks plus exactly the three codes
    /// the batch bound. A non-finite total aborts with the batch identity.
    pub fn step(&mut self) -> Result<StepReport> {
        let iter = self.iteration;
        let alpha = alpha_at(iter, &self.config);
        let lr = lr_at(iter, &self.config);
        let settings = self.config.settings();
        let batch = sample_pixel_batch(&self.data, &mut self.rng, self.config.pixel_batch, &settings)?;
        let eik_points = sample_eikonal_points(
            &mut self.rng,
            batch.pixels.len(),
            self.config.eikonal_extent,
        );

        let ikey = instance_key(batch.instance);
        let skey = state_key(batch.state);
        let akey = CodeBook::articulation_key(self.model.variant, &ikey, &skey);
        let loss = {
            let (shape, appearance, articulation) =
                self.codes.triplet(self.model.variant, &ikey, &skey)?;
            batch_loss_grads(
                &self.model,
                shape,
                appearance,
                articulation,
                &batch.pixels,
                &eik_points,
                &settings,
                &self.config.weights,
                alpha,
            )?
        };
        if !loss.breakdown.total.is_finite() {
            return Err(Error::NonFiniteLoss {
                iter,
                instance: ikey,
                state: skey,
                view: batch.view,
                breakdown: format!("{:?}", loss.breakdown),
            });
        }

        let hyper = AdamHyper::default();
        let g = &loss.grads;
        let update =
            |params: &mut [f64], grads: &[f64], label: String, optim: &mut BTreeMap<String, OptimState>| {
                let state = optim
                    .entry(label.clone())
                    .or_insert_with(|| OptimState::new(params.len()));
                adam_step(params, grads, state, &hyper, lr, &label)
            };
        update(
            &mut self.model.geometry.params,
            &g.geometry,
            "net/geometry".into(),
            &mut self.optim,
        )?;
        if let Some(net) = self.model.deform.as_mut() {
            update(&mut net.params, &g.deform, "net/deform".into(), &mut self.optim)?;
        }
        update(
            &mut self.model.appearance.params,
            &g.appearance,
            "net/appearance".into(),
            &mut self.optim,
        )?;
        let missing = |table: &str, id: &str| Error::UnknownCode {
            table: table.to_string(),
            id: id.to_string(),
        };
        let shape_code = self
            .codes
            .shape
            .get_mut(&ikey)
            .ok_or_else(|| missing("shape", &ikey))?;
        update(
            &mut shape_code.0,
            &g.shape,
            format!("code/shape/{ikey}"),
            &mut self.optim,
        )?;
        let appearance_code = self
            .codes
            .appearance
            .get_mut(&ikey)
            .ok_or_else(|| missing("appearance", &ikey))?;
        update(
            &mut appearance_code.0,
            &g.appearance_code,
            format!("code/appearance/{ikey}"),
            &mut self.optim,
        )?;
        let articulation_code = self
            .codes
            .articulation
            .get_mut(&akey)
            .ok_or_else(|| missing("articulation", &akey))?;
        update(
            &mut articulation_code.0,
            &g.articulation,
            format!("code/articulation/{akey}"),
            &mut self.optim,
        )?;

        self.iteration += 1;
        Ok(StepReport {
            iter,
            lr,
            alpha,
            instance: batch.instance,
            state: batch.state,
            view: batch.view,
            breakdown: loss.breakdown,
        })
    }

    /// Step until `iteration` reaches `until`, reporting each step.
    pub fn run(&mut self, until: u64, mut on_step: impl FnMut(&StepReport)) -> Result<()> {
        while self.iteration < until {
            let report = self.step()?;
            on_step(&report);
        }
        Ok(())
    }

    /// Snapshot the full training state for exact resume.
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            category: self.data.category.clone(),
            model: self.model.clone(),
            codes: self.codes.clone(),
            optim: self.optim.clone(),
            iteration: self.iteration,
            seed: self.config.seed,
            rng_word_pos: self.rng.get_word_pos(),
            config_text: self.config.to_kv().render(),
        }
    }
}

/// Zero Adam moments for every network block and every code.
fn fresh_optim(model: &FieldModel, codes: &CodeBook) -> BTreeMap<String, OptimState> {
    let mut optim = BTreeMap::new();
    optim.insert(
        "net/geometry".to_string(),
        OptimState::new(model.geometry.params.len()),
    );
    if let Some(net) = &model.deform {
        optim.insert("net/deform".to_string(), OptimState::new(net.params.len()));
    }
    optim.insert(
        "net/appearance".to_string(),
        OptimState::new(model.appearance.params.len()),
    );
    for (table, map) in [
        ("shape", &codes.shape),
        ("appearance", &codes.appearance),
        ("articulation", &codes.articulation),
    ] {
        for (key, code) in map {
            optim.insert(format!("code/{table}/{key}"), OptimState::new(code.len()));
        }
    }
    optim
}
