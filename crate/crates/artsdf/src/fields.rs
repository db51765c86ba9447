//! Latent-conditioned implicit fields: geometry, deformation, appearance.
//!
//! A [`FieldModel`] holds up to three networks:
//!
//! * **geometry** — scalar signed distance, conditioned on a shape code and
//!   (in variants without a deformation net) an articulation code;
//! * **deform** — optional articulation-conditioned warp `x' = x + D(x)`;
//!   the geometry net is then evaluated at `x'`, so articulation acts by
//!   bending space rather than by re-carving the surface;
//! * **appearance** — RGB surface radiance from position, normal, view
//!   direction, and an appearance code.
//!
//! The four [`Variant`]s toggle two independent axes: whether articulation
//! codes are shared across instances in the same articulation state, and
//! whether the deformation net exists.
//!
//! Evaluation comes in two flavors: a plain `f64` path ([`FrozenField`])
//! where the conditioning codes are folded into per-layer constants once per
//! batch, and a tape path ([`FieldModel::bind_tape`] and friends) recording
//! everything for reverse-mode gradients with respect to parameters and
//! codes. Spatial gradients are exact on both paths via forward-mode tangent
//! channels threaded through both networks.

use std::collections::BTreeMap;

use rand::Rng;

use crate::autodiff::encoding::{self, encoded_len};
use crate::autodiff::init;
use crate::autodiff::mlp::{
    self, Activation, FrozenSuffix, JetVec, MlpScratch, MlpSpec, TapeSeg,
};
use crate::autodiff::tape::{Tape, Var, VarRange};
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Model variant: articulation-code sharing x deformation field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Per-observation articulation codes, no deformation net.
    Base,
    /// Articulation codes shared across instances per state, no deformation.
    Art,
    /// Per-observation articulation codes driving a deformation net.
    Def,
    /// Shared articulation codes driving a deformation net.
    ArtDef,
}

impl Variant {
    pub fn has_deform(self) -> bool {
        matches!(self, Variant::Def | Variant::ArtDef)
    }

    /// Whether articulation codes are keyed by state alone (shared across
    /// instances) rather than per (instance, state) observation.
    pub fn shares_articulation(self) -> bool {
        matches!(self, Variant::Art | Variant::ArtDef)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Art => "art",
            Variant::Def => "def",
            Variant::ArtDef => "artdef",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        match s {
            "base" => Ok(Variant::Base),
            "art" => Ok(Variant::Art),
            "def" => Ok(Variant::Def),
            "artdef" => Ok(Variant::ArtDef),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant `{other}` (expected base, art, def, artdef)"
            ))),
        }
    }

    pub fn all() -> [Variant; 4] {
        [Variant::Base, Variant::Art, Variant::Def, Variant::ArtDef]
    }
}

/// One latent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode(pub Vec<f64>);

impl LatentCode {
    pub fn zeros(n: usize) -> LatentCode {
        LatentCode(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

/// All latent codes of a trained model, keyed by string ids.
///
/// Shape and appearance codes are keyed by instance id. Articulation codes
/// are keyed by [`CodeBook::articulation_key`]: the state id alone for
/// sharing variants, `instance/state` otherwise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CodeBook {
    pub shape: BTreeMap<String, LatentCode>,
    pub appearance: BTreeMap<String, LatentCode>,
    pub articulation: BTreeMap<String, LatentCode>,
}

impl CodeBook {
    pub fn articulation_key(variant: Variant, instance: &str, state: &str) -> String {
        if variant.shares_articulation() {
            state.to_string()
        } else {
            format!("{instance}/{state}")
        }
    }

    /// The (shape, appearance, articulation) codes for one observation.
    pub fn triplet(
        &self,
        variant: Variant,
        instance: &str,
        state: &str,
    ) -> Result<(&LatentCode, &LatentCode, &LatentCode)> {
        let missing = |table: &str, id: &str| Error::UnknownCode {
            table: table.to_string(),
            id: id.to_string(),
        };
        let shape = self
            .shape
            .get(instance)
            .ok_or_else(|| missing("shape", instance))?;
        let appearance = self
            .appearance
            .get(instance)
            .ok_or_else(|| missing("appearance", instance))?;
        let key = Self::articulation_key(variant, instance, state);
        let articulation = self
            .articulation
            .get(&key)
            .ok_or_else(|| missing("articulation", &key))?;
        Ok((shape, appearance, articulation))
    }
}

/// One object's (shape, appearance, articulation) code triple.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSet {
    pub shape: LatentCode,
    pub appearance: LatentCode,
    pub articulation: LatentCode,
}

impl CodeSet {
    /// Wrap the triple in a codebook under the given instance and state ids
    /// (keyed the way the variant keys articulation codes), for saving as a
    /// standalone codes file.
    pub fn to_codebook(&self, variant: Variant, instance: &str, state: &str) -> CodeBook {
        let mut book = CodeBook::default();
        book.shape.insert(instance.to_string(), self.shape.clone());
        book.appearance
            .insert(instance.to_string(), self.appearance.clone());
        book.articulation.insert(
            CodeBook::articulation_key(variant, instance, state),
            self.articulation.clone(),
        );
        book
    }

    /// Inverse of [`CodeSet::to_codebook`].
    pub fn from_codebook(
        book: &CodeBook,
        variant: Variant,
        instance: &str,
        state: &str,
    ) -> Result<CodeSet> {
        let (shape, appearance, articulation) = book.triplet(variant, instance, state)?;
        Ok(CodeSet {
            shape: shape.clone(),
            appearance: appearance.clone(),
            articulation: articulation.clone(),
        })
    }
}

/// One network: architecture plus flat parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetBlock {
    pub spec: MlpSpec,
    pub params: Vec<f64>,
}

/// Everything needed to build a fresh [`FieldModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub point_freqs: usize,
    pub view_freqs: usize,
    pub shape_dim: usize,
    pub appearance_dim: usize,
    pub articulation_dim: usize,
    pub geometry_hidden: Vec<usize>,
    pub geometry_skip: usize,
    pub deform_hidden: Vec<usize>,
    pub deform_skip: usize,
    pub appearance_hidden: Vec<usize>,
    /// Radius of the sphere the geometry net is initialized to.
    pub init_radius: f64,
}

impl ModelConfig {
    /// Small networks sized for CPU training on procedural scenes.
    pub fn desk(variant: Variant) -> ModelConfig {
        ModelConfig {
            variant,
            point_freqs: 6,
            view_freqs: 4,
            shape_dim: 256,
            appearance_dim: 256,
            articulation_dim: 8,
            geometry_hidden: vec![48, 48, 48, 48],
            geometry_skip: 2,
            deform_hidden: vec![48, 48, 48, 48],
            deform_skip: 2,
            appearance_hidden: vec![48, 48, 48],
            init_radius: 0.6,
        }
    }

    /// Full-scale networks (8x512 geometry/deform with a skip at 4, 4x512
    /// appearance). Far too slow to train in tests; used to pin down exact
    /// architecture and schedule arithmetic.
    pub fn paper(variant: Variant) -> ModelConfig {
        ModelConfig {
            variant,
            point_freqs: 6,
            view_freqs: 4,
            shape_dim: 256,
            appearance_dim: 256,
            articulation_dim: 8,
            geometry_hidden: vec![512; 8],
            geometry_skip: 4,
            deform_hidden: vec![512; 8],
            deform_skip: 4,
            appearance_hidden: vec![512; 4],
            init_radius: 1.0,
        }
    }

    fn geometry_spec(&self) -> MlpSpec {
        let arty = if self.variant.has_deform() {
            0
        } else {
            self.articulation_dim
        };
        MlpSpec {
            input_dim: encoded_len(3, self.point_freqs) + self.shape_dim + arty,
            hidden: self.geometry_hidden.clone(),
            output_dim: 1,
            hidden_activation: Activation::Softplus { beta: 100.0 },
            output_activation: Activation::Identity,
            skip_at: Some(self.geometry_skip),
        }
    }

    fn deform_spec(&self) -> MlpSpec {
        MlpSpec {
            input_dim: encoded_len(3, self.point_freqs) + self.shape_dim + self.articulation_dim,
            hidden: self.deform_hidden.clone(),
            output_dim: 3,
            hidden_activation: Activation::Softplus { beta: 100.0 },
            output_activation: Activation::Identity,
            skip_at: Some(self.deform_skip),
        }
    }

    fn appearance_spec(&self) -> MlpSpec {
        MlpSpec {
            input_dim: encoded_len(3, self.point_freqs)
                + 3
                + encoded_len(3, self.view_freqs)
                + self.appearance_dim,
            hidden: self.appearance_hidden.clone(),
            output_dim: 3,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Tanh,
            skip_at: None,
        }
    }
}

/// Latent-conditioned geometry + appearance model.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    pub variant: Variant,
    pub point_freqs: usize,
    pub view_freqs: usize,
    pub shape_dim: usize,
    pub appearance_dim: usize,
    pub articulation_dim: usize,
    pub geometry: NetBlock,
    pub deform: Option<NetBlock>,
    pub appearance: NetBlock,
}

impl FieldModel {
    /// Build and initialize a model: geometry starts as a sphere SDF of
    /// `cfg.init_radius`, the deformation net (if any) as the identity warp.
    pub fn init<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> Result<FieldModel> {
        let gspec = cfg.geometry_spec();
        let gparams = init::geometric_sdf_init(&gspec, cfg.point_freqs, cfg.init_radius, rng)?;
        let deform = if cfg.variant.has_deform() {
            let dspec = cfg.deform_spec();
            dspec.validate()?;
            let dparams = init::deform_init(&dspec, rng);
            Some(NetBlock {
                spec: dspec,
                params: dparams,
            })
        } else {
            None
        };
        let aspec = cfg.appearance_spec();
        aspec.validate()?;
        let aparams = init::standard_init(&aspec, rng);
        Ok(FieldModel {
            variant: cfg.variant,
            point_freqs: cfg.point_freqs,
            view_freqs: cfg.view_freqs,
            shape_dim: cfg.shape_dim,
            appearance_dim: cfg.appearance_dim,
            articulation_dim: cfg.articulation_dim,
            geometry: gspec_block(gspec, gparams),
            deform,
            appearance: NetBlock {
                spec: aspec,
                params: aparams,
            },
        })
    }

    pub fn param_count(&self) -> usize {
        self.geometry.params.len()
            + self.deform.as_ref().map_or(0, |d| d.params.len())
            + self.appearance.params.len()
    }

    fn check_codes(&self, shape: &LatentCode, articulation: &LatentCode) -> Result<()> {
        if shape.len() != self.shape_dim {
            return Err(Error::DimensionMismatch {
                context: "shape code".into(),
                expected: self.shape_dim,
                actual: shape.len(),
            });
        }
        if articulation.len() != self.articulation_dim {
            return Err(Error::DimensionMismatch {
                context: "articulation code".into(),
                expected: self.articulation_dim,
                actual: articulation.len(),
            });
        }
        Ok(())
    }

    /// Warp a point into the geometry net's canonical frame. Identity for
    /// variants without a deformation net.
    pub fn deform(&self, x: Vec3, shape: &LatentCode, articulation: &LatentCode) -> Result<Vec3> {
        let mut frozen = self.freeze_geometry(shape, articulation)?;
        Ok(frozen.warp(x))
    }

    /// Signed distance at `x` under the given codes.
    pub fn sdf(&self, x: Vec3, shape: &LatentCode, articulation: &LatentCode) -> Result<f64> {
        let mut frozen = self.freeze_geometry(shape, articulation)?;
        Ok(frozen.value(x))
    }

    /// Exact spatial gradient of the signed distance at `x`.
    pub fn sdf_gradient(
        &self,
        x: Vec3,
        shape: &LatentCode,
        articulation: &LatentCode,
    ) -> Result<Vec3> {
        let mut frozen = self.freeze_geometry(shape, articulation)?;
        Ok(frozen.value_and_grad(x).1)
    }

    /// Surface radiance in [0,1]^3 at a surface point with unit normal `n`
    /// seen from direction `v` (pointing from camera to surface).
    pub fn radiance(
        &self,
        x: Vec3,
        n: Vec3,
        v: Vec3,
        appearance: &LatentCode,
    ) -> Result<[f64; 3]> {
        if appearance.len() != self.appearance_dim {
            return Err(Error::DimensionMismatch {
                context: "appearance code".into(),
                expected: self.appearance_dim,
                actual: appearance.len(),
            });
        }
        let fs = mlp::freeze_suffix(&self.appearance.spec, &self.appearance.params, &appearance.0);
        let mut scratch = MlpScratch::default();
        let mut prefix = Vec::new();
        let mut enc = Vec::new();
        encoding::encode(&x, self.point_freqs, &mut enc);
        prefix.extend_from_slice(&enc);
        prefix.extend_from_slice(&n);
        encoding::encode(&v, self.view_freqs, &mut enc);
        prefix.extend_from_slice(&enc);
        let mut out = Vec::new();
        mlp::forward_prefix(
            &self.appearance.spec,
            &self.appearance.params,
            &fs,
            &prefix,
            &mut scratch,
            &mut out,
        );
        Ok([
            0.5 * (out[0] + 1.0),
            0.5 * (out[1] + 1.0),
            0.5 * (out[2] + 1.0),
        ])
    }

    /// Fold the geometry-side codes into per-layer constants for repeated
    /// point evaluation (the appearance net is not involved).
    pub fn freeze_geometry(
        &self,
        shape: &LatentCode,
        articulation: &LatentCode,
    ) -> Result<FrozenField<'_>> {
        self.check_codes(shape, articulation)?;
        let (geom_suffix, deform_fs) = if let Some(d) = &self.deform {
            let mut suffix = shape.0.clone();
            suffix.extend_from_slice(&articulation.0);
            let dfs = mlp::freeze_suffix(&d.spec, &d.params, &suffix);
            (shape.0.clone(), Some(dfs))
        } else {
            let mut suffix = shape.0.clone();
            suffix.extend_from_slice(&articulation.0);
            (suffix, None)
        };
        let geom_fs = mlp::freeze_suffix(&self.geometry.spec, &self.geometry.params, &geom_suffix);
        Ok(FrozenField {
            model: self,
            geom_fs,
            deform_fs,
            scratch: MlpScratch::default(),
            enc: Vec::new(),
            enc_tan: Default::default(),
            out: Vec::new(),
            out_tan: Default::default(),
            enc2: Vec::new(),
            enc2_tan: Default::default(),
        })
    }
}

fn gspec_block(spec: MlpSpec, params: Vec<f64>) -> NetBlock {
    NetBlock { spec, params }
}

/// Geometry-side evaluator with codes folded in; owns its scratch buffers so
/// evaluation needs `&mut self`. Clone one per worker thread for parallel use.
#[derive(Clone)]
pub struct FrozenField<'a> {
    model: &'a FieldModel,
    geom_fs: FrozenSuffix,
    deform_fs: Option<FrozenSuffix>,
    scratch: MlpScratch,
    enc: Vec<f64>,
    enc_tan: [Vec<f64>; 3],
    out: Vec<f64>,
    out_tan: [Vec<f64>; 3],
    enc2: Vec<f64>,
    enc2_tan: [Vec<f64>; 3],
}

const SEED_X: [f64; 3] = [1.0, 0.0, 0.0];
const SEED_Y: [f64; 3] = [0.0, 1.0, 0.0];
const SEED_Z: [f64; 3] = [0.0, 0.0, 1.0];

impl FrozenField<'_> {
    pub fn model(&self) -> &FieldModel {
        self.model
    }

    /// The warped point `x' = x + D(x)` (identity without a deformation net).
    pub fn warp(&mut self, x: Vec3) -> Vec3 {
        match (&self.model.deform, &self.deform_fs) {
            (Some(d), Some(dfs)) => {
                encoding::encode(&x, self.model.point_freqs, &mut self.enc);
                mlp::forward_prefix(
                    &d.spec,
                    &d.params,
                    dfs,
                    &self.enc,
                    &mut self.scratch,
                    &mut self.out,
                );
                [x[0] + self.out[0], x[1] + self.out[1], x[2] + self.out[2]]
            }
            _ => x,
        }
    }

    /// Signed distance at `x`.
    pub fn value(&mut self, x: Vec3) -> f64 {
        let xp = self.warp(x);
        encoding::encode(&xp, self.model.point_freqs, &mut self.enc);
        mlp::forward_prefix(
            &self.model.geometry.spec,
            &self.model.geometry.params,
            &self.geom_fs,
            &self.enc,
            &mut self.scratch,
            &mut self.out,
        );
        self.out[0]
    }

    /// Signed distance and its exact spatial gradient at `x`.
    pub fn value_and_grad(&mut self, x: Vec3) -> (f64, Vec3) {
        let model = self.model;
        // Tangent-carrying warp.
        let (xp, dxp) = match (&model.deform, &self.deform_fs) {
            (Some(d), Some(dfs)) => {
                let seed_vecs: [Vec<f64>; 3] =
                    [SEED_X.to_vec(), SEED_Y.to_vec(), SEED_Z.to_vec()];
                encoding::encode_jet(
                    &x,
                    &seed_vecs,
                    model.point_freqs,
                    &mut self.enc,
                    &mut self.enc_tan,
                );
                mlp::forward_prefix_jet(
                    &d.spec,
                    &d.params,
                    dfs,
                    &self.enc,
                    [&self.enc_tan[0], &self.enc_tan[1], &self.enc_tan[2]],
                    &mut self.scratch,
                    &mut self.out,
                    &mut self.out_tan,
                );
                let xp = [x[0] + self.out[0], x[1] + self.out[1], x[2] + self.out[2]];
                // d x'_i / d seed_j = delta_ij + dD_i/dx_j
                let mut dxp: [Vec<f64>; 3] = Default::default();
                for j in 0..3 {
                    dxp[j] = vec![
                        self.out_tan[j][0] + if j == 0 { 1.0 } else { 0.0 },
                        self.out_tan[j][1] + if j == 1 { 1.0 } else { 0.0 },
                        self.out_tan[j][2] + if j == 2 { 1.0 } else { 0.0 },
                    ];
                }
                (xp, dxp)
            }
            _ => (
                x,
                [SEED_X.to_vec(), SEED_Y.to_vec(), SEED_Z.to_vec()],
            ),
        };
        encoding::encode_jet(
            &xp,
            &dxp,
            model.point_freqs,
            &mut self.enc2,
            &mut self.enc2_tan,
        );
        mlp::forward_prefix_jet(
            &model.geometry.spec,
            &model.geometry.params,
            &self.geom_fs,
            &self.enc2,
            [&self.enc2_tan[0], &self.enc2_tan[1], &self.enc2_tan[2]],
            &mut self.scratch,
            &mut self.out,
            &mut self.out_tan,
        );
        (
            self.out[0],
            [self.out_tan[0][0], self.out_tan[1][0], self.out_tan[2][0]],
        )
    }
}

/// Tape-registered parameters and codes, in the fixed block order used by the
/// trainer's gradient reduction: geometry, deform, appearance, shape code,
/// appearance code, articulation code.
pub struct TapeBinding {
    pub geometry: VarRange,
    pub deform: Option<VarRange>,
    pub appearance: VarRange,
    pub shape: VarRange,
    pub appearance_code: VarRange,
    pub articulation: VarRange,
}

impl FieldModel {
    /// Register all parameters and one code triplet as tape leaves.
    pub fn bind_tape(
        &self,
        tape: &Tape,
        shape: &LatentCode,
        appearance: &LatentCode,
        articulation: &LatentCode,
    ) -> Result<TapeBinding> {
        self.check_codes(shape, articulation)?;
        if appearance.len() != self.appearance_dim {
            return Err(Error::DimensionMismatch {
                context: "appearance code".into(),
                expected: self.appearance_dim,
                actual: appearance.len(),
            });
        }
        Ok(TapeBinding {
            geometry: tape.leaves(&self.geometry.params),
            deform: self.deform.as_ref().map(|d| tape.leaves(&d.params)),
            appearance: tape.leaves(&self.appearance.params),
            shape: tape.leaves(&shape.0),
            appearance_code: tape.leaves(&appearance.0),
            articulation: tape.leaves(&articulation.0),
        })
    }

    /// Signed distance at a (possibly parameter-dependent) tape point.
    pub fn sdf_tape(&self, tape: &Tape, b: &TapeBinding, x: &[Var; 3]) -> Result<Var> {
        let xp = self.warp_tape(tape, b, x)?;
        let enc = encoding::encode_tape(tape, &xp, self.point_freqs);
        let segs: Vec<&VarRange> = if self.variant.has_deform() {
            vec![&enc, &b.shape]
        } else {
            vec![&enc, &b.shape, &b.articulation]
        };
        let out = mlp::forward_tape(tape, &self.geometry.spec, &b.geometry, &segs)?;
        out.scalar()
    }

    /// The warped tape point `x' = x + D(x)`.
    fn warp_tape(&self, tape: &Tape, b: &TapeBinding, x: &[Var; 3]) -> Result<[Var; 3]> {
        let (d, dparams) = match (&self.deform, &b.deform) {
            (Some(d), Some(p)) => (d, p),
            _ => return Ok(x.clone()),
        };
        let enc = encoding::encode_tape(tape, x, self.point_freqs);
        let out = mlp::forward_tape(
            tape,
            &d.spec,
            dparams,
            &[&enc, &b.shape, &b.articulation],
        )?;
        Ok([
            &x[0] + &out.vars[0],
            &x[1] + &out.vars[1],
            &x[2] + &out.vars[2],
        ])
    }

    /// Signed distance and exact spatial gradient at a tape point. The
    /// gradient components are tape variables, so losses may depend on them
    /// (eikonal penalty, shading normals).
    pub fn sdf_jet_tape(
        &self,
        tape: &Tape,
        b: &TapeBinding,
        x: &[Var; 3],
    ) -> Result<(Var, [Var; 3])> {
        let one = tape.constant(1.0);
        let zero = tape.constant(0.0);
        let seed = |j: usize| -> Vec<Var> {
            (0..3)
                .map(|i| if i == j { one.clone() } else { zero.clone() })
                .collect()
        };
        let mut x_tan = [seed(0), seed(1), seed(2)];
        let mut x_val: Vec<Var> = x.to_vec();

        if let (Some(d), Some(dparams)) = (&self.deform, &b.deform) {
            let (enc, enc_tan) = encoding::encode_jet_tape(tape, &x_val, &x_tan, self.point_freqs);
            let jet = mlp::forward_jet_tape(
                tape,
                &d.spec,
                dparams,
                &[
                    TapeSeg::Jet {
                        val: &enc,
                        tan: [&enc_tan[0], &enc_tan[1], &enc_tan[2]],
                    },
                    TapeSeg::Plain(&b.shape),
                    TapeSeg::Plain(&b.articulation),
                ],
            )?;
            let JetVec { val, tan } = jet;
            for i in 0..3 {
                x_val[i] = &x_val[i] + &val[i];
            }
            for j in 0..3 {
                for i in 0..3 {
                    x_tan[j][i] = &x_tan[j][i] + &tan[j][i];
                }
            }
        }

        let (enc, enc_tan) = encoding::encode_jet_tape(tape, &x_val, &x_tan, self.point_freqs);
        let mut segs = vec![TapeSeg::Jet {
            val: &enc,
            tan: [&enc_tan[0], &enc_tan[1], &enc_tan[2]],
        }];
        segs.push(TapeSeg::Plain(&b.shape));
        if !self.variant.has_deform() {
            segs.push(TapeSeg::Plain(&b.articulation));
        }
        let jet = mlp::forward_jet_tape(tape, &self.geometry.spec, &b.geometry, &segs)?;
        let f = jet.val.into_iter().next().unwrap();
        let g = [
            jet.tan[0][0].clone(),
            jet.tan[1][0].clone(),
            jet.tan[2][0].clone(),
        ];
        Ok((f, g))
    }

    /// Radiance at a tape surface point. `v` is constant per pixel.
    pub fn radiance_tape(
        &self,
        tape: &Tape,
        b: &TapeBinding,
        x: &[Var; 3],
        n: &[Var; 3],
        v: Vec3,
    ) -> Result<[Var; 3]> {
        let enc_x = encoding::encode_tape(tape, x, self.point_freqs);
        let n_block = encoding::contiguous(tape, n);
        let mut enc_v_plain = Vec::new();
        encoding::encode(&v, self.view_freqs, &mut enc_v_plain);
        let start = tape.len();
        for value in &enc_v_plain {
            tape.constant(*value);
        }
        let enc_v = tape.range_from_raw(start, enc_v_plain.len());
        let out = mlp::forward_tape(
            tape,
            &self.appearance.spec,
            &b.appearance,
            &[&enc_x, &n_block, &enc_v, &b.appearance_code],
        )?;
        Ok([
            0.5 * (&out.vars[0] + 1.0),
            0.5 * (&out.vars[1] + 1.0),
            0.5 * (&out.vars[2] + 1.0),
        ])
    }
}
