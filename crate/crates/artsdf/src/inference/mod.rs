//! Code recovery for unseen objects.
//!
//! Given a trained checkpoint and a few posed masked views of a new object,
//! recover a (shape, appearance, articulation) code triple by gradient
//! descent on the same objective training used — with the network weights
//! frozen. Optionally follow up with test-time adaptation, which fine-tunes
//! the weights together with the codes at a much smaller learning rate and
//! returns a new checkpoint, leaving the input checkpoint untouched.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{adam_step, AdamHyper, OptimState};
use crate::error::{Error, Result};
use crate::fields::{CodeBook, CodeSet, FieldModel, LatentCode};
use crate::io::camera_manifest::read_cameras;
use crate::io::checkpoint::Checkpoint;
use crate::io::config::Kv;
use crate::io::ppm::{read_pgm, read_ppm};
use crate::losses::{batch_loss_grads, sample_eikonal_points, LossWeights};
use crate::trainer::{
    alpha_schedule, sample_pixel_batch, LoadedDataset, LoadedView, StepReport, TrainConfig,
};

/// RNG stream for fresh shape/appearance codes at inference.
pub const INFER_CODE_RNG_STREAM: u64 = 0xac0de5;
/// RNG stream for batch sampling during code recovery and adaptation.
pub const INFER_RNG_STREAM: u64 = 0xa7ea13;

/// Iterations after which an all-miss run is declared a mismatch between the
/// object and its cameras.
pub const WARMUP_ITERS: u64 = 100;

/// Schedules and batching for one recovery or adaptation run.
#[derive(Debug, Clone, PartialEq)]
pub struct InferConfig {
    pub iters: u64,
    pub pixel_batch: usize,
    pub lr0: f64,
    /// Absolute iterations at which the learning rate is scaled by
    /// `lr_decay_factor` (each reached point applies once, inclusively).
    pub lr_decay_at: Vec<u64>,
    pub lr_decay_factor: f64,
    pub alpha0: f64,
    pub alpha_double_every: u64,
    pub alpha_max_doublings: u32,
    pub weights: LossWeights,
    pub seed: u64,
}

impl InferConfig {
    /// Code recovery with frozen weights: 600 iterations at lr 0.009 halved
    /// at 300 and 450, α starting at 50 and doubling every 100 iterations up
    /// to 5 times.
    pub fn recover(seed: u64) -> InferConfig {
        InferConfig {
            iters: 600,
            pixel_batch: 96,
            lr0: 0.009,
            lr_decay_at: vec![300, 450],
            lr_decay_factor: 0.5,
            alpha0: 50.0,
            alpha_double_every: 100,
            alpha_max_doublings: 5,
            weights: LossWeights::default(),
            seed,
        }
    }

    /// Test-time adaptation: same schedules as recovery but jointly
    /// optimizing weights and codes at lr 0.00005.
    pub fn adapt(seed: u64) -> InferConfig {
        InferConfig {
            lr0: 5e-5,
            ..InferConfig::recover(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
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
        if !(self.alpha0.is_finite() && self.alpha0 > 0.0) {
            return bad(format!("alpha0 {} must be positive and finite", self.alpha0));
        }
        if self.alpha_double_every == 0 {
            return bad("alpha_double_every must be at least 1".into());
        }
        Ok(())
    }

    /// Learning rate at an iteration.
    pub fn lr_at(&self, iter: u64) -> f64 {
        let mut lr = self.lr0;
        for &at in &self.lr_decay_at {
            if iter >= at {
                lr *= self.lr_decay_factor;
            }
        }
        lr
    }

    /// Mask sharpness at an iteration.
    pub fn alpha_at(&self, iter: u64) -> f64 {
        alpha_schedule(
            iter,
            self.alpha0,
            self.alpha_double_every,
            self.alpha_max_doublings,
        )
    }

    /// Serialize as flat `key = value` pairs.
    pub fn to_kv(&self) -> Kv {
        let mut kv = Kv::new();
        kv.set("iters", self.iters);
        kv.set("pixel_batch", self.pixel_batch);
        kv.set("lr0", self.lr0);
        kv.set(
            "lr_decay_at",
            self.lr_decay_at
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv.set("lr_decay_factor", self.lr_decay_factor);
        kv.set("alpha0", self.alpha0);
        kv.set("alpha_double_every", self.alpha_double_every);
        kv.set("alpha_max_doublings", self.alpha_max_doublings);
        kv.set("rho", self.weights.rho);
        kv.set("lambda", self.weights.lambda);
        kv.set("beta", self.weights.beta);
        kv.set("seed", self.seed);
        kv
    }

    /// Overlay any keys present in `kv` onto this config, then validate.
    pub fn apply_kv(&mut self, kv: &Kv) -> Result<()> {
        let get = |key: &str, raw: &str| -> Result<f64> {
            raw.trim()
                .parse()
                .map_err(|e| Error::InvalidConfig(format!("bad value for {key}: {e}")))
        };
        for (key, raw) in kv.iter() {
            match key {
                "iters" => self.iters = get(key, raw)? as u64,
                "pixel_batch" => self.pixel_batch = get(key, raw)? as usize,
                "lr0" => self.lr0 = get(key, raw)?,
                "lr_decay_at" => {
                    let mut out = Vec::new();
                    for piece in raw.split(',') {
                        let piece = piece.trim();
                        if piece.is_empty() {
                            continue;
                        }
                        out.push(piece.parse().map_err(|e| {
                            Error::InvalidConfig(format!("bad value for lr_decay_at: {e}"))
                        })?);
                    }
                    self.lr_decay_at = out;
                }
                "lr_decay_factor" => self.lr_decay_factor = get(key, raw)?,
                "alpha0" => self.alpha0 = get(key, raw)?,
                "alpha_double_every" => self.alpha_double_every = get(key, raw)? as u64,
                "alpha_max_doublings" => self.alpha_max_doublings = get(key, raw)? as u32,
                "rho" => self.weights.rho = get(key, raw)?,
                "lambda" => self.weights.lambda = get(key, raw)?,
                "beta" => self.weights.beta = get(key, raw)?,
                "seed" => self.seed = get(key, raw)? as u64,
                _ => {}
            }
        }
        self.validate()
    }
}

/// The training configuration a checkpoint was produced with.
pub fn checkpoint_train_config(ckpt: &Checkpoint) -> Result<TrainConfig> {
    let kv = Kv::parse(&ckpt.config_text).map_err(Error::InvalidConfig)?;
    TrainConfig::from_kv(&kv)
}

/// Starting codes for recovery: the articulation code is the mean of all
/// trained articulation codes; shape and appearance codes are drawn fresh
/// exactly as training initialization draws them.
pub fn init_inference_codes(ckpt: &Checkpoint, cfg: &InferConfig) -> Result<CodeSet> {
    let train_cfg = checkpoint_train_config(ckpt)?;
    let trained: Vec<&LatentCode> = ckpt.codes.articulation.values().collect();
    if trained.is_empty() {
        return Err(Error::Degenerate {
            context: "inference initialization".into(),
            detail: "checkpoint has no articulation codes to average".into(),
        });
    }
    let dim = ckpt.model.articulation_dim;
    for code in &trained {
        if code.len() != dim {
            return Err(Error::Degenerate {
                context: "inference initialization".into(),
                detail: format!(
                    "articulation code of length {} in a model expecting {dim}",
                    code.len()
                ),
            });
        }
    }
    let mut mean = vec![0.0; dim];
    for code in &trained {
        for (m, c) in mean.iter_mut().zip(&code.0) {
            *m += c;
        }
    }
    let n = trained.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(INFER_CODE_RNG_STREAM);
    let mut draw = |len: usize| {
        let normal = Normal::new(0.0, train_cfg.code_init.std_for_len(len))
            .expect("finite positive std by construction");
        LatentCode((0..len).map(|_| normal.sample(&mut rng)).collect())
    };
    Ok(CodeSet {
        shape: draw(ckpt.model.shape_dim),
        appearance: draw(ckpt.model.appearance_dim),
        articulation: LatentCode(mean),
    })
}

/// What a recovery or adaptation run produced.
#[derive(Debug, Clone)]
pub struct InferOutcome {
    pub codes: CodeSet,
    /// One report per iteration, view indices referring to the input views.
    pub reports: Vec<StepReport>,
    /// The model the run ended with: identical to the checkpoint's for
    /// recovery, fine-tuned for adaptation.
    pub model: FieldModel,
}

/// Load every posed view in one directory: `cameras.txt` names the cameras,
/// and each camera `view_XXX` / `test_XXX` pairs with `view_XXX.ppm` +
/// `mask_XXX.pgm` / `test_XXX.ppm` + `test_mask_XXX.pgm`. This is the
/// per-state layout the dataset generator writes, so any state directory
/// works directly as a recovery target.
pub fn load_views_dir(dir: &Path) -> Result<Vec<LoadedView>> {
    let cam_path = dir.join("cameras.txt");
    let cams = read_cameras(&cam_path)?;
    let mut views = Vec::with_capacity(cams.len());
    for named in cams {
        let mask_name = if let Some(id) = named.name.strip_prefix("view_") {
            format!("mask_{id}")
        } else if let Some(id) = named.name.strip_prefix("test_") {
            format!("test_mask_{id}")
        } else {
            return Err(Error::parse(
                &cam_path,
                format!("camera name '{}' has no view_/test_ prefix", named.name),
            ));
        };
        views.push(LoadedView {
            camera: named.camera,
            image: read_ppm(&dir.join(format!("{}.ppm", named.name)))?,
            mask: read_pgm(&dir.join(format!("{mask_name}.pgm")))?,
        });
    }
    if views.is_empty() {
        return Err(Error::parse(&cam_path, "directory lists no cameras"));
    }
    Ok(views)
}

/// Recover codes for an unseen object from its posed masked views. The
/// checkpoint's weights stay frozen; only the code triple moves.
pub fn recover_codes(
    ckpt: &Checkpoint,
    views: &[LoadedView],
    cfg: &InferConfig,
) -> Result<InferOutcome> {
    let init = init_inference_codes(ckpt, cfg)?;
    optimize(ckpt, views, cfg, init, false)
}

/// Fine-tune weights and codes jointly on the object's views, returning a
/// new checkpoint with the adapted weights. The input checkpoint is left
/// untouched; with `cfg.iters == 0` the inputs come back unchanged.
pub fn test_time_adapt(
    ckpt: &Checkpoint,
    views: &[LoadedView],
    codes: &CodeSet,
    cfg: &InferConfig,
) -> Result<(Checkpoint, InferOutcome)> {
    let outcome = optimize(ckpt, views, cfg, codes.clone(), true)?;
    let mut adapted = ckpt.clone();
    adapted.model = outcome.model.clone();
    Ok((adapted, outcome))
}

/// Internal key labeling the recovered object inside the temporary codebook.
const TARGET: &str = "target";
const TARGET_STATE: &str = "state_000";

fn optimize(
    ckpt: &Checkpoint,
    views: &[LoadedView],
    cfg: &InferConfig,
    init: CodeSet,
    adapt_weights: bool,
) -> Result<InferOutcome> {
    cfg.validate()?;
    if views.is_empty() {
        return Err(Error::InvalidConfig(
            "code recovery needs at least one view".into(),
        ));
    }
    let (w, h) = (views[0].image.width, views[0].image.height);
    for (i, v) in views.iter().enumerate() {
        if v.image.width != w
            || v.image.height != h
            || v.mask.width != w
            || v.mask.height != h
            || v.camera.intrinsics.width != w
            || v.camera.intrinsics.height != h
        {
            return Err(Error::InvalidConfig(format!(
                "view {i} disagrees with view 0 on image size"
            )));
        }
    }
    let train_cfg = checkpoint_train_config(ckpt)?;
    let settings = train_cfg.settings();
    let variant = ckpt.model.variant;

    let data = LoadedDataset {
        category: ckpt.category.clone(),
        width: w,
        height: h,
        instances: vec![0],
        n_states: 1,
        views: vec![vec![views.to_vec()]],
    };

    let mut model = ckpt.model.clone();
    let mut codes = init.to_codebook(variant, TARGET, TARGET_STATE);
    let akey = CodeBook::articulation_key(variant, TARGET, TARGET_STATE);
    let mut optim: std::collections::BTreeMap<String, OptimState> = Default::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(INFER_RNG_STREAM);
    let hyper = AdamHyper::default();

    let mut reports = Vec::with_capacity(cfg.iters as usize);
    let mut hits_seen = 0usize;
    for iter in 0..cfg.iters {
        let alpha = cfg.alpha_at(iter);
        let lr = cfg.lr_at(iter);
        let batch = sample_pixel_batch(&data, &mut rng, cfg.pixel_batch, &settings)?;
        let eik_points = sample_eikonal_points(
            &mut rng,
            batch.pixels.len(),
            train_cfg.eikonal_extent,
        );
        let loss = {
            let (shape, appearance, articulation) = codes.triplet(variant, TARGET, TARGET_STATE)?;
            batch_loss_grads(
                &model,
                shape,
                appearance,
                articulation,
                &batch.pixels,
                &eik_points,
                &settings,
                &cfg.weights,
                alpha,
            )?
        };
        if !loss.breakdown.total.is_finite() {
            return Err(Error::NonFiniteLoss {
                iter,
                instance: TARGET.into(),
                state: TARGET_STATE.into(),
                view: batch.view,
                breakdown: format!("{:?}", loss.breakdown),
            });
        }
        hits_seen += loss.breakdown.n_in;

        let g = &loss.grads;
        let update = |params: &mut [f64],
                          grads: &[f64],
                          label: String,
                          optim: &mut std::collections::BTreeMap<String, OptimState>|
         -> Result<()> {
            let state = optim
                .entry(label.clone())
                .or_insert_with(|| OptimState::new(params.len()));
            adam_step(params, grads, state, &hyper, lr, &label)
        };
        if adapt_weights {
            update(
                &mut model.geometry.params,
                &g.geometry,
                "net/geometry".into(),
                &mut optim,
            )?;
            if let Some(net) = model.deform.as_mut() {
                update(&mut net.params, &g.deform, "net/deform".into(), &mut optim)?;
            }
            update(
                &mut model.appearance.params,
                &g.appearance,
                "net/appearance".into(),
                &mut optim,
            )?;
        }
        let shape_code = codes.shape.get_mut(TARGET).expect("inserted above");
        update(
            &mut shape_code.0,
            &g.shape,
            format!("code/shape/{TARGET}"),
            &mut optim,
        )?;
        let appearance_code = codes.appearance.get_mut(TARGET).expect("inserted above");
        update(
            &mut appearance_code.0,
            &g.appearance_code,
            format!("code/appearance/{TARGET}"),
            &mut optim,
        )?;
        let articulation_code = codes.articulation.get_mut(&akey).expect("inserted above");
        update(
            &mut articulation_code.0,
            &g.articulation,
            format!("code/articulation/{akey}"),
            &mut optim,
        )?;

        reports.push(StepReport {
            iter,
            lr,
            alpha,
            instance: 0,
            state: 0,
            view: batch.view,
            breakdown: loss.breakdown,
        });

        if iter + 1 == WARMUP_ITERS.min(cfg.iters) && hits_seen == 0 {
            return Err(Error::Degenerate {
                context: "code recovery".into(),
                detail: format!(
                    "no sampled ray hit the surface inside its mask in the first {} iterations; \
                     the cameras likely do not face the object",
                    iter + 1
                ),
            });
        }
    }

    let codes = CodeSet::from_codebook(&codes, variant, TARGET, TARGET_STATE)?;
    Ok(InferOutcome {
        codes,
        reports,
        model,
    })
}
