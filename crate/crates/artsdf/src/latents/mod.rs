//! Latent-space edits on trained models: interpolating or extrapolating
//! between code sets, swapping one component (shape, appearance, or
//! articulation) between two sets, and re-rendering a fixed object under a
//! sequence of articulation codes to animate it.
//!
//! All operations here are pure reads of the model and codes; nothing is
//! mutated and repeated calls give bitwise-identical results.

use crate::error::{Error, Result};
use crate::fields::{CodeSet, LatentCode};
use crate::geom::{marching_cubes, TriMesh, MESH_BOUNDS};
use crate::image::{GrayImage, Image};
use crate::io::checkpoint::Checkpoint;
use crate::io::config::Kv;
use crate::renderer::{render_image, FieldRenderer};
use crate::scenegen::cameras::Camera;
use crate::trainer::{alpha_schedule, TrainConfig};


/// Which component of a code set to replace in [`swap_codes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapKind {
    Shape,
    Appearance,
    Articulation,
}

impl SwapKind {
    pub const ALL: [SwapKind; 3] = [
        SwapKind::Shape,
        SwapKind::Appearance,
        SwapKind::Articulation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SwapKind::Shape => "shape",
            SwapKind::Appearance => "appearance",
            SwapKind::Articulation => "articulation",
        }
    }

    pub fn parse(text: &str) -> Result<SwapKind> {
        match text {
            "shape" => Ok(SwapKind::Shape),
            "appearance" => Ok(SwapKind::Appearance),
            "articulation" => Ok(SwapKind::Articulation),
            other => Err(Error::InvalidConfig(format!(
                "unknown swap component {other:?}; expected shape, appearance, or articulation"
            ))),
        }
    }
}

fn check_same_len(context: &str, a: &LatentCode, b: &LatentCode) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: context.to_string(),
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

fn lerp_one(a: &LatentCode, b: &LatentCode, t: f64) -> LatentCode {
    LatentCode(
        a.0.iter()
            .zip(&b.0)
            .map(|(&x, &y)| (1.0 - t) * x + t * y)
            .collect(),
    )
}

/// Component-wise linear blend `(1 - t) * a + t * b` of two code sets.
///
/// `t = 0` returns `a` exactly and `t = 1` returns `b` exactly; values of
/// `t` outside `[0, 1]` extrapolate along the same line. The two sets must
/// have matching code lengths.
pub fn lerp_codes(a: &CodeSet, b: &CodeSet, t: f64) -> Result<CodeSet> {
    check_same_len("lerp shape codes", &a.shape, &b.shape)?;
    check_same_len("lerp appearance codes", &a.appearance, &b.appearance)?;
    check_same_len("lerp articulation codes", &a.articulation, &b.articulation)?;
    if t == 0.0 {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    Ok(CodeSet {
        shape: lerp_one(&a.shape, &b.shape, t),
        appearance: lerp_one(&a.appearance, &b.appearance, t),
        articulation: lerp_one(&a.articulation, &b.articulation, t),
    })
}

/// `a` with the selected component replaced by `b`'s.
pub fn swap_codes(a: &CodeSet, b: &CodeSet, which: SwapKind) -> CodeSet {
    let mut out = a.clone();
    match which {
        SwapKind::Shape => out.shape = b.shape.clone(),
        SwapKind::Appearance => out.appearance = b.appearance.clone(),
        SwapKind::Articulation => out.articulation = b.articulation.clone(),
    }
    out
}

/// Rendering choices for [`animate`].
#[derive(Debug, Clone, Default)]
pub struct AnimateOptions {
    /// Soft-mask sharpness; `None` uses the final trained value from the
    /// checkpoint's schedule.
    pub alpha: Option<f64>,
    /// When set, also extract a triangle mesh of each frame's geometry by
    /// marching cubes at this grid resolution over the standard mesh bounds.
    pub mesh_resolution: Option<usize>,
}

/// One rendered articulation state: an RGB image, its soft foreground mask,
/// and optionally the extracted surface mesh.
#[derive(Debug, Clone)]
pub struct AnimationFrame {
    pub image: Image,
    pub mask: GrayImage,
    pub mesh: Option<TriMesh>,
}

/// Render a fixed object (one shape and appearance code) under each
/// articulation code in `psi_sequence`.
///
/// `cameras` holds either a single camera, reused for every frame, or
/// exactly one camera per frame. Ray-sampling settings come from the
/// training configuration embedded in the checkpoint. The checkpoint and
/// codes are never modified.
pub fn animate(
    ckpt: &Checkpoint,
    shape: &LatentCode,
    appearance: &LatentCode,
    psi_sequence: &[LatentCode],
    cameras: &[Camera],
    opts: &AnimateOptions,
) -> Result<Vec<AnimationFrame>> {
    if psi_sequence.is_empty() {
        return Err(Error::InvalidConfig(
            "animation needs at least one articulation code".into(),
        ));
    }
    if cameras.len() != 1 && cameras.len() != psi_sequence.len() {
        return Err(Error::InvalidConfig(format!(
            "got {} cameras for {} frames; pass one camera or one per frame",
            cameras.len(),
            psi_sequence.len()
        )));
    }
    let cfg = TrainConfig::from_kv(&Kv::parse(&ckpt.config_text).map_err(Error::InvalidConfig)?)?;
    let settings = cfg.settings();
    let alpha = opts.alpha.unwrap_or_else(|| {
        alpha_schedule(
            u64::MAX,
            cfg.alpha0,
            cfg.alpha_double_every,
            cfg.alpha_max_doublings,
        )
    });
    let (lo, hi) = MESH_BOUNDS;

    let mut frames = Vec::with_capacity(psi_sequence.len());
    for (k, psi) in psi_sequence.iter().enumerate() {
        let camera = if cameras.len() == 1 {
            &cameras[0]
        } else {
            &cameras[k]
        };
        let renderer = FieldRenderer::new(&ckpt.model, shape, appearance, psi)?;
        let (image, mask) = render_image(&renderer, camera, &settings, alpha)?;
        let mesh = match opts.mesh_resolution {
            Some(resolution) => {
                let mut field = ckpt.model.freeze_geometry(shape, psi)?;
                Some(marching_cubes(|p| field.value(p), resolution, lo, hi)?)
            }
            None => None,
        };
        frames.push(AnimationFrame { image, mask, mesh });
    }
    Ok(frames)
}
