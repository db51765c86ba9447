//! Loss terms for mask-supervised inverse rendering, and the batched tape
//! assembly that turns a pixel mini-batch into per-block gradients.
//!
//! Four terms make up the objective:
//!
//! * **RGB**: L1 colour error over pixels where the traced surface agrees
//!   with the mask (`rgb_loss`), normalized by the *full* batch size.
//! * **Mask**: soft-occupancy cross-entropy over every other pixel
//!   (`mask_loss`), scaled by `1/alpha` so the term stays bounded while the
//!   occupancy indicator sharpens.
//! * **Eikonal**: unit-gradient-norm penalty at uniformly sampled points
//!   (`eikonal_loss`), keeping the geometry field metrically a distance.
//! * **Code prior**: squared norms of the latent codes (`code_prior`).
//!
//! `batch_loss_grads` is the trainer's entry point: it traces, builds fixed
//! pixel chunks on separate tapes, and reduces chunk gradients in chunk
//! order, so results are bitwise reproducible for a given chunk size no
//! matter how many worker threads run.

use rand::Rng;
use rayon::prelude::*;

use crate::autodiff::tape::{softplus_f64, Tape, Var};
use crate::fields::{FieldModel, LatentCode};
use crate::math::{self, Vec3};
use crate::renderer::{
    differentiable_hit, trace_first_intersection, BoundedRay, RenderSettings, SdfField,
    SurfaceHit,
};
use crate::{Error, Result};

/// Half edge length of the cube the eikonal penalty samples; unit-sphere
/// scenes with margin.
pub const EIKONAL_HALF_EXTENT: f64 = 1.5;

/// Number of pixels per gradient chunk. Each chunk gets its own tape, so
/// this bounds peak tape memory and fixes the reduction granularity.
pub const CHUNK_PIXELS: usize = 48;

/// Relative weights of the loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Mask term weight.
    pub rho: f64,
    /// Eikonal term weight.
    pub lambda: f64,
    /// Code-prior weight.
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            rho: 100.0,
            lambda: 0.1,
            beta: 1e-4,
        }
    }
}

/// The four loss terms of one batch plus their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub rgb: f64,
    pub mask: f64,
    pub eikonal: f64,
    pub code: f64,
    pub total: f64,
    /// Pixels that contributed to the RGB term.
    pub n_in: usize,
    /// Pixels that contributed to the mask term.
    pub n_out: usize,
}

/// Compose the weighted sum; `total` is exactly
/// `rgb + rho*mask + lambda*eikonal + beta*code`.
pub fn total_loss(
    rgb: f64,
    mask: f64,
    eikonal: f64,
    code: f64,
    n_in: usize,
    n_out: usize,
    weights: &LossWeights,
) -> LossBreakdown {
    LossBreakdown {
        rgb,
        mask,
        eikonal,
        code,
        total: rgb + weights.rho * mask + weights.lambda * eikonal + weights.beta * code,
        n_in,
        n_out,
    }
}

/// L1 colour loss: `(1/batch_size) * sum |pred - target|` over channels of
/// the given (prediction, target) pairs. `batch_size` is the full mini-batch
/// pixel count, not the number of pairs.
pub fn rgb_loss(pairs: &[([f64; 3], [f64; 3])], batch_size: usize) -> f64 {
    if pairs.is_empty() || batch_size == 0 {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|(pred, target)| {
            (pred[0] - target[0]).abs()
                + (pred[1] - target[1]).abs()
                + (pred[2] - target[2]).abs()
        })
        .sum();
    sum / batch_size as f64
}

/// Binary cross-entropy between a hard occupancy target and the soft
/// occupancy `sigmoid(-alpha * min_sdf)`, written in softplus form so both
/// tails are stable.
pub fn binary_ce(occupied: bool, min_sdf: f64, alpha: f64) -> f64 {
    if occupied {
        softplus_f64(alpha * min_sdf, 1.0)
    } else {
        softplus_f64(-alpha * min_sdf, 1.0)
    }
}

/// Mask loss: `(1/(alpha * batch_size)) * sum CE` over `(occupied, min_sdf)`
/// entries for the pixels outside the RGB set.
pub fn mask_loss(entries: &[(bool, f64)], alpha: f64, batch_size: usize) -> f64 {
    if entries.is_empty() || batch_size == 0 {
        return 0.0;
    }
    let sum: f64 = entries
        .iter()
        .map(|&(occupied, min_sdf)| binary_ce(occupied, min_sdf, alpha))
        .sum();
    sum / (alpha * batch_size as f64)
}

/// Uniform sample points in `[-half_extent, half_extent]^3` for the eikonal
/// penalty. Draw order is x, y, z per point, so a seeded generator yields a
/// reproducible cloud.
pub fn sample_eikonal_points<R: Rng>(rng: &mut R, n: usize, half_extent: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            let mut p = [0.0; 3];
            for c in &mut p {
                *c = rng.gen_range(-half_extent..=half_extent);
            }
            p
        })
        .collect()
}

/// Mean squared deviation of the field's gradient norm from 1 over the given
/// points. Forward-only; use `batch_loss_grads` for the differentiable
/// version.
pub fn eikonal_loss<F: SdfField>(field: &mut F, points: &[Vec3]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let sum: f64 = points
        .iter()
        .map(|&x| {
            let (_, g) = field.value_and_grad(x);
            let d = math::norm(g) - 1.0;
            d * d
        })
        .sum();
    sum / points.len() as f64
}

/// Sum of squared norms of the latent codes.
pub fn code_prior(codes: &[&LatentCode]) -> f64 {
    codes
        .iter()
        .map(|c| c.0.iter().map(|v| v * v).sum::<f64>())
        .sum()
}

/// One supervised pixel: a scene-bounded camera ray with its ground truth.
#[derive(Debug, Clone)]
pub struct PixelSample {
    pub ray: BoundedRay,
    /// Target colour (only read when `occupied`).
    pub rgb: [f64; 3],
    /// Ground-truth mask bit.
    pub occupied: bool,
}

/// Per-block gradients in the fixed reduction order: geometry, deform,
/// appearance, shape code, appearance code, articulation code.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrads {
    pub geometry: Vec<f64>,
    /// Empty when the variant has no deformation net.
    pub deform: Vec<f64>,
    pub appearance: Vec<f64>,
    pub shape: Vec<f64>,
    pub appearance_code: Vec<f64>,
    pub articulation: Vec<f64>,
}

impl BlockGrads {
    /// All-zero gradients shaped like the model's blocks.
    pub fn zeros(model: &FieldModel) -> Self {
        BlockGrads {
            geometry: vec![0.0; model.geometry.params.len()],
            deform: vec![0.0; model.deform.as_ref().map_or(0, |d| d.params.len())],
            appearance: vec![0.0; model.appearance.params.len()],
            shape: vec![0.0; model.shape_dim],
            appearance_code: vec![0.0; model.appearance_dim],
            articulation: vec![0.0; model.articulation_dim],
        }
    }

    /// Accumulate `other` into `self` elementwise.
    pub fn add(&mut self, other: &BlockGrads) {
        fn add_slice(dst: &mut [f64], src: &[f64]) {
            debug_assert_eq!(dst.len(), src.len());
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        add_slice(&mut self.geometry, &other.geometry);
        add_slice(&mut self.deform, &other.deform);
        add_slice(&mut self.appearance, &other.appearance);
        add_slice(&mut self.shape, &other.shape);
        add_slice(&mut self.appearance_code, &other.appearance_code);
        add_slice(&mut self.articulation, &other.articulation);
    }

    /// Named views over the blocks, in reduction order. Empty blocks are
    /// included so indices stay stable across variants.
    pub fn blocks(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("geometry", &self.geometry),
            ("deform", &self.deform),
            ("appearance", &self.appearance),
            ("shape", &self.shape),
            ("appearance_code", &self.appearance_code),
            ("articulation", &self.articulation),
        ]
    }
}

/// Raw per-chunk sums before normalization.
#[derive(Debug, Clone, Copy, Default)]
struct ChunkSums {
    rgb: f64,
    mask_ce: f64,
    eikonal: f64,
    code: f64,
    n_in: usize,
    n_out: usize,
}

/// Shared per-batch constants for chunk evaluation.
#[derive(Clone, Copy)]
struct ChunkContext<'a> {
    settings: &'a RenderSettings,
    weights: &'a LossWeights,
    alpha: f64,
    /// Full mini-batch pixel count (normalizes RGB and mask terms).
    batch_size: usize,
    /// Full eikonal sample count across all chunks.
    n_eikonal: usize,
    /// The code prior is attached to exactly one chunk.
    include_code_prior: bool,
}

/// Left-fold sum preserving term order.
fn fold_sum(terms: Vec<Var>) -> Option<Var> {
    let mut it = terms.into_iter();
    let first = it.next()?;
    Some(it.fold(first, |acc, t| &acc + &t))
}

/// Trace, build, and differentiate one pixel chunk on its own tape.
fn chunk_loss_grads(
    model: &FieldModel,
    shape: &LatentCode,
    appearance: &LatentCode,
    articulation: &LatentCode,
    pixels: &[PixelSample],
    eik_points: &[Vec3],
    ctx: &ChunkContext<'_>,
) -> Result<(ChunkSums, BlockGrads)> {
    // Fast-path trace of every ray; the tape only sees the frozen results.
    let mut frozen = model.freeze_geometry(shape, articulation)?;
    let hits: Vec<SurfaceHit> = pixels
        .iter()
        .map(|p| trace_first_intersection(&mut frozen, &p.ray, ctx.settings))
        .collect();
    drop(frozen);

    let tape = Tape::new();
    let b = model.bind_tape(&tape, shape, appearance, articulation)?;

    let mut sums = ChunkSums::default();
    let mut rgb_terms: Vec<Var> = Vec::new();
    let mut mask_terms: Vec<Var> = Vec::new();
    let mut eik_terms: Vec<Var> = Vec::with_capacity(eik_points.len());

    for (pixel, hit) in pixels.iter().zip(&hits) {
        let mut in_set = false;
        if hit.hit && pixel.occupied {
            if let Some(xh) = differentiable_hit(model, &tape, &b, &pixel.ray, hit)? {
                // RGB set: L1 colour error at the differentiable hit point,
                // shaded with the exact field normal.
                let (_, g) = model.sdf_jet_tape(&tape, &b, &xh)?;
                let norm = (&(&g[0].square() + &g[1].square()) + &g[2].square()).sqrt();
                let inv = norm.recip();
                let n = [&g[0] * &inv, &g[1] * &inv, &g[2] * &inv];
                let rgb = model.radiance_tape(&tape, &b, &xh, &n, pixel.ray.dir)?;
                let mut term = (&rgb[0] - pixel.rgb[0]).abs();
                term = &term + &(&rgb[1] - pixel.rgb[1]).abs();
                term = &term + &(&rgb[2] - pixel.rgb[2]).abs();
                sums.rgb += term.value();
                rgb_terms.push(term);
                sums.n_in += 1;
                in_set = true;
            }
        }
        if !in_set {
            // Outside set: cross-entropy on the soft occupancy at the
            // along-ray minimum.
            sums.n_out += 1;
            if pixel.ray.t_far <= pixel.ray.t_near {
                // The ray misses the scene bounds; its minimum is geometric
                // and carries no gradient.
                sums.mask_ce += binary_ce(pixel.occupied, hit.min_sdf, ctx.alpha);
                continue;
            }
            let xm = pixel.ray.at(hit.t_min_sdf);
            let x = [
                tape.constant(xm[0]),
                tape.constant(xm[1]),
                tape.constant(xm[2]),
            ];
            let m = model.sdf_tape(&tape, &b, &x)?;
            let ce = if pixel.occupied {
                (&m * ctx.alpha).softplus(1.0)
            } else {
                (&m * (-ctx.alpha)).softplus(1.0)
            };
            sums.mask_ce += ce.value();
            mask_terms.push(ce);
        }
    }

    for &p in eik_points {
        let x = [tape.constant(p[0]), tape.constant(p[1]), tape.constant(p[2])];
        let (_, g) = model.sdf_jet_tape(&tape, &b, &x)?;
        let sq = &(&g[0].square() + &g[1].square()) + &g[2].square();
        let term = if sq.value() > 0.0 {
            (&sq.sqrt() - 1.0).square()
        } else {
            // A vanished gradient contributes its worst-case penalty as a
            // constant; the square root has no finite slope there.
            tape.constant(1.0)
        };
        sums.eikonal += term.value();
        eik_terms.push(term);
    }

    let code_term = if ctx.include_code_prior {
        let mut parts: Vec<Var> = Vec::new();
        for range in [&b.shape, &b.appearance_code, &b.articulation] {
            for i in 0..range.len() {
                parts.push(range.get(i).square());
            }
        }
        let t = fold_sum(parts);
        sums.code = t.as_ref().map_or(0.0, Var::value);
        t
    } else {
        None
    };

    // Weighted chunk root. The stored sums above are the reported values;
    // the root only exists to drive the backward pass.
    let batch = ctx.batch_size.max(1) as f64;
    let mut root: Option<Var> = None;
    let mut push = |part: Option<Var>| {
        if let Some(p) = part {
            root = Some(match root.take() {
                Some(r) => &r + &p,
                None => p,
            });
        }
    };
    push(fold_sum(rgb_terms).map(|s| &s * (1.0 / batch)));
    push(fold_sum(mask_terms).map(|s| &s * (ctx.weights.rho / (ctx.alpha * batch))));
    if !eik_terms.is_empty() {
        let scale = ctx.weights.lambda / ctx.n_eikonal.max(1) as f64;
        push(fold_sum(eik_terms).map(|s| &s * scale));
    }
    push(code_term.map(|c| &c * ctx.weights.beta));

    let mut grads = BlockGrads::zeros(model);
    if let Some(root) = root {
        let g = root.backward();
        grads.geometry.copy_from_slice(g.wrt_range(&b.geometry));
        if let Some(d) = &b.deform {
            grads.deform.copy_from_slice(g.wrt_range(d));
        }
        grads.appearance.copy_from_slice(g.wrt_range(&b.appearance));
        grads.shape.copy_from_slice(g.wrt_range(&b.shape));
        grads
            .appearance_code
            .copy_from_slice(g.wrt_range(&b.appearance_code));
        grads
            .articulation
            .copy_from_slice(g.wrt_range(&b.articulation));
    }
    Ok((sums, grads))
}

/// Loss value and gradients for one mini-batch.
#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub breakdown: LossBreakdown,
    /// Gradients of `breakdown.total` for every block and code.
    pub grads: BlockGrads,
}

/// Evaluate the full objective on a pixel batch: trace each ray against the
/// current geometry, compose the four terms, and return gradients for all
/// parameter blocks and the bound code triple.
///
/// Pixels are processed in fixed chunks of [`CHUNK_PIXELS`], each on its own
/// tape, with eikonal samples split contiguously across chunks and the code
/// prior attached to the first chunk. Chunks may be evaluated on worker
/// threads, but the reduction always runs in chunk order, so the result is
/// identical for any thread count.
pub fn batch_loss_grads(
    model: &FieldModel,
    shape: &LatentCode,
    appearance: &LatentCode,
    articulation: &LatentCode,
    pixels: &[PixelSample],
    eik_points: &[Vec3],
    settings: &RenderSettings,
    weights: &LossWeights,
    alpha: f64,
) -> Result<BatchLoss> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "occupancy sharpness must be positive and finite, got {alpha}"
        )));
    }
    let n_chunks = pixels.len().div_ceil(CHUNK_PIXELS).max(1);
    let ctx = ChunkContext {
        settings,
        weights,
        alpha,
        batch_size: pixels.len(),
        n_eikonal: eik_points.len(),
        include_code_prior: true,
    };

    let results: Vec<Result<(ChunkSums, BlockGrads)>> = (0..n_chunks)
        .into_par_iter()
        .map(|i| {
            let px = &pixels[(i * CHUNK_PIXELS).min(pixels.len())
                ..((i + 1) * CHUNK_PIXELS).min(pixels.len())];
            let ek = &eik_points[i * eik_points.len() / n_chunks
                ..(i + 1) * eik_points.len() / n_chunks];
            let chunk_ctx = ChunkContext {
                include_code_prior: i == 0,
                ..ctx
            };
            chunk_loss_grads(
                model,
                shape,
                appearance,
                articulation,
                px,
                ek,
                &chunk_ctx,
            )
        })
        .collect();

    let mut sums = ChunkSums::default();
    let mut grads = BlockGrads::zeros(model);
    for res in results {
        let (s, g) = res?;
        sums.rgb += s.rgb;
        sums.mask_ce += s.mask_ce;
        sums.eikonal += s.eikonal;
        sums.code += s.code;
        sums.n_in += s.n_in;
        sums.n_out += s.n_out;
        grads.add(&g);
    }

    let batch = ctx.batch_size.max(1) as f64;
    let rgb = sums.rgb / batch;
    let mask = sums.mask_ce / (alpha * batch);
    let eikonal = if eik_points.is_empty() {
        0.0
    } else {
        sums.eikonal / eik_points.len() as f64
    };
    let breakdown = total_loss(rgb, mask, eikonal, sums.code, sums.n_in, sums.n_out, weights);
    Ok(BatchLoss { breakdown, grads })
}

#[cfg(test)]
mod tests;
