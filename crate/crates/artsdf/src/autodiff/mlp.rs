//! Multi-layer perceptrons over flat `f64` parameter vectors.
//!
//! One parameter layout (`[W0 row-major, b0, W1, b1, ...]`) is shared by four
//! evaluation paths:
//!
//! * [`forward_prefix`] — plain `f64` forward, with the trailing "suffix" part
//!   of the input (conditioning codes, which stay fixed across a batch of
//!   points) pre-folded into per-layer contributions by [`freeze_suffix`];
//! * [`forward_prefix_jet`] — same, but carrying three tangent channels so the
//!   spatial gradient of the output comes out exactly (forward mode);
//! * [`forward_tape`] — records the computation on a [`Tape`] for reverse-mode
//!   gradients with respect to parameters and codes;
//! * [`forward_jet_tape`] — tape recording of the tangent-carrying forward, so
//!   spatial gradients themselves are differentiable quantities.
//!
//! An optional skip connection re-injects the full network input at a chosen
//! hidden layer (concatenated to that layer's incoming activations).

use super::tape::{dot_f64, sigmoid_f64, softplus_f64, Tape, Var, VarRange, VarVec};
use crate::error::{Error, Result};

/// Pointwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Softplus { beta: f64 },
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Softplus { beta } => softplus_f64(z, beta),
        }
    }

    /// Value and derivative at `z`.
    pub fn apply_d(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Identity => (z, 1.0),
            Activation::Relu => (z.max(0.0), if z > 0.0 { 1.0 } else { 0.0 }),
            Activation::Tanh => {
                let t = z.tanh();
                (t, 1.0 - t * t)
            }
            Activation::Softplus { beta } => (softplus_f64(z, beta), sigmoid_f64(beta * z)),
        }
    }

    pub fn apply_var(self, z: &Var) -> Var {
        match self {
            Activation::Identity => z.clone(),
            Activation::Relu => z.relu(),
            Activation::Tanh => z.tanh(),
            Activation::Softplus { beta } => z.softplus(beta),
        }
    }

    /// Value and derivative at `z`, both as tape variables.
    pub fn apply_var_d(self, z: &Var) -> (Var, Var) {
        match self {
            Activation::Identity => (z.clone(), z.tape().constant(1.0)),
            Activation::Relu => {
                let v = z.relu();
                let d = z.tape().constant(if z.value() > 0.0 { 1.0 } else { 0.0 });
                (v, d)
            }
            Activation::Tanh => {
                let t = z.tanh();
                let d = 1.0 - &t * &t;
                (t, d)
            }
            Activation::Softplus { beta } => {
                let v = z.softplus(beta);
                let d = (z * beta).sigmoid();
                (v, d)
            }
        }
    }
}

/// Architecture of one network; parameters live in a flat `Vec<f64>`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub input_dim: usize,
    /// Hidden layer widths; may be empty (a single affine map).
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    /// Hidden layer whose input is `[previous activations, full network input]`.
    pub skip_at: Option<usize>,
}

/// Offsets of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub struct LayerInfo {
    pub w_off: usize,
    pub b_off: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    /// The full network input is concatenated after the incoming activations.
    pub skip: bool,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| Error::ShapeMismatch {
            context: "MlpSpec".into(),
            detail,
        };
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(bad("input_dim and output_dim must be positive".into()));
        }
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(bad("hidden widths must be positive".into()));
        }
        if let Some(k) = self.skip_at {
            if k == 0 || k >= self.hidden.len() {
                return Err(bad(format!(
                    "skip_at {k} out of range for {} hidden layers",
                    self.hidden.len()
                )));
            }
        }
        Ok(())
    }

    /// Per-layer dimensions and parameter offsets.
    pub fn layers(&self) -> Vec<LayerInfo> {
        let mut out = Vec::with_capacity(self.hidden.len() + 1);
        let mut off = 0;
        let widths: Vec<usize> = self
            .hidden
            .iter()
            .copied()
            .chain(std::iter::once(self.output_dim))
            .collect();
        for (l, &out_dim) in widths.iter().enumerate() {
            let skip = self.skip_at == Some(l);
            let in_dim = if l == 0 {
                self.input_dim
            } else {
                widths[l - 1] + if skip { self.input_dim } else { 0 }
            };
            out.push(LayerInfo {
                w_off: off,
                b_off: off + in_dim * out_dim,
                in_dim,
                out_dim,
                skip,
            });
            off += (in_dim + 1) * out_dim;
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers()
            .iter()
            .map(|l| (l.in_dim + 1) * l.out_dim)
            .sum()
    }

    fn is_output_layer(&self, l: usize) -> bool {
        l == self.hidden.len()
    }

    fn activation_of(&self, l: usize) -> Activation {
        if self.is_output_layer(l) {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }
}

/// Dense row-major batch of inputs or outputs (`shape = [rows, cols]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::ShapeMismatch {
                context: "Tensor::new".into(),
                detail: format!("shape {:?} implies {} values, got {}", shape, n, values.len()),
            });
        }
        Ok(Tensor { shape, values })
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Tensor> {
        Tensor::new(vec![rows, cols], values)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let cols = *self.shape.last().unwrap();
        &self.values[r * cols..(r + 1) * cols]
    }
}

/// Contribution of a frozen input suffix (conditioning codes) to every layer
/// that sees the network input.
#[derive(Debug, Clone)]
pub struct FrozenSuffix {
    pub suffix_len: usize,
    /// Per layer: `Some(v)` with `v[u]` = dot(suffix columns of row u, suffix),
    /// for layers whose input includes the network input.
    contrib: Vec<Option<Vec<f64>>>,
}

/// Fold the trailing `suffix` of the network input into per-layer constants.
pub fn freeze_suffix(spec: &MlpSpec, params: &[f64], suffix: &[f64]) -> FrozenSuffix {
    let prefix_len = spec.input_dim - suffix.len();
    let mut contrib = Vec::new();
    for (l, li) in spec.layers().iter().enumerate() {
        if suffix.is_empty() || !(l == 0 || li.skip) {
            contrib.push(None);
            continue;
        }
        // Suffix columns start after (incoming activations +) prefix.
        let col0 = li.in_dim - spec.input_dim + prefix_len;
        let mut v = Vec::with_capacity(li.out_dim);
        for u in 0..li.out_dim {
            let row = &params[li.w_off + u * li.in_dim..li.w_off + (u + 1) * li.in_dim];
            v.push(dot_f64(&row[col0..], suffix));
        }
        contrib.push(Some(v));
    }
    FrozenSuffix {
        suffix_len: suffix.len(),
        contrib,
    }
}

/// Reusable buffers for the plain/jet forward kernels.
#[derive(Default, Clone)]
pub struct MlpScratch {
    a: Vec<f64>,
    b: Vec<f64>,
    ta: [Vec<f64>; 3],
    tb: [Vec<f64>; 3],
}

/// Forward pass given the varying input `prefix`; the frozen suffix part was
/// folded in by [`freeze_suffix`]. Writes the output into `out`.
pub fn forward_prefix(
    spec: &MlpSpec,
    params: &[f64],
    fs: &FrozenSuffix,
    prefix: &[f64],
    scratch: &mut MlpScratch,
    out: &mut Vec<f64>,
) {
    debug_assert_eq!(prefix.len() + fs.suffix_len, spec.input_dim);
    let layers = spec.layers();
    let (cur, next) = (&mut scratch.a, &mut scratch.b);
    cur.clear();
    for (l, li) in layers.iter().enumerate() {
        next.clear();
        let cached = fs.contrib[l].as_deref();
        for u in 0..li.out_dim {
            let row = &params[li.w_off + u * li.in_dim..li.w_off + (u + 1) * li.in_dim];
            let mut z = params[li.b_off + u];
            if l == 0 {
                z += dot_f64(&row[..prefix.len()], prefix);
            } else if li.skip {
                let h = cur.len();
                z += dot_f64(&row[..h], cur) + dot_f64(&row[h..h + prefix.len()], prefix);
            } else {
                z += dot_f64(row, cur);
            }
            if let Some(c) = cached {
                z += c[u];
            }
            next.push(spec.activation_of(l).apply(z));
        }
        std::mem::swap(cur, next);
    }
    out.clear();
    out.extend_from_slice(&*cur);
}

/// Forward pass carrying three tangent channels over the prefix (the suffix
/// has zero tangent). `dprefix[j]` is the derivative of `prefix` along seed
/// direction `j`; on return `dout[j]` holds the output derivative.
#[allow(clippy::too_many_arguments)]
pub fn forward_prefix_jet(
    spec: &MlpSpec,
    params: &[f64],
    fs: &FrozenSuffix,
    prefix: &[f64],
    dprefix: [&[f64]; 3],
    scratch: &mut MlpScratch,
    out: &mut Vec<f64>,
    dout: &mut [Vec<f64>; 3],
) {
    debug_assert_eq!(prefix.len() + fs.suffix_len, spec.input_dim);
    let layers = spec.layers();
    let MlpScratch { a, b, ta, tb } = scratch;
    a.clear();
    for t in ta.iter_mut() {
        t.clear();
    }
    for (l, li) in layers.iter().enumerate() {
        b.clear();
        for t in tb.iter_mut() {
            t.clear();
        }
        let cached = fs.contrib[l].as_deref();
        let act = spec.activation_of(l);
        for u in 0..li.out_dim {
            let row = &params[li.w_off + u * li.in_dim..li.w_off + (u + 1) * li.in_dim];
            let mut z = params[li.b_off + u];
            let mut tz = [0.0f64; 3];
            if l == 0 {
                z += dot_f64(&row[..prefix.len()], prefix);
                for j in 0..3 {
                    tz[j] = dot_f64(&row[..prefix.len()], dprefix[j]);
                }
            } else if li.skip {
                let h = a.len();
                z += dot_f64(&row[..h], a) + dot_f64(&row[h..h + prefix.len()], prefix);
                for j in 0..3 {
                    tz[j] = dot_f64(&row[..h], &ta[j])
                        + dot_f64(&row[h..h + prefix.len()], dprefix[j]);
                }
            } else {
                z += dot_f64(row, a);
                for j in 0..3 {
                    tz[j] = dot_f64(row, &ta[j]);
                }
            }
            if let Some(c) = cached {
                z += c[u];
            }
            let (v, d) = act.apply_d(z);
            b.push(v);
            for j in 0..3 {
                tb[j].push(d * tz[j]);
            }
        }
        std::mem::swap(a, b);
        for j in 0..3 {
            std::mem::swap(&mut ta[j], &mut tb[j]);
        }
    }
    out.clear();
    out.extend_from_slice(&*a);
    for j in 0..3 {
        dout[j].clear();
        dout[j].extend_from_slice(&ta[j]);
    }
}

/// Batched forward pass over the rows of `input`.
pub fn mlp_forward(spec: &MlpSpec, params: &[f64], input: &Tensor) -> Result<Tensor> {
    spec.validate()?;
    if params.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            context: "mlp_forward params".into(),
            expected: spec.param_count(),
            actual: params.len(),
        });
    }
    let cols = *input.shape.last().ok_or_else(|| Error::ShapeMismatch {
        context: "mlp_forward".into(),
        detail: "input tensor has no shape".into(),
    })?;
    if cols != spec.input_dim {
        return Err(Error::DimensionMismatch {
            context: "mlp_forward input".into(),
            expected: spec.input_dim,
            actual: cols,
        });
    }
    let rows = input.values.len() / cols;
    let fs = freeze_suffix(spec, params, &[]);
    let mut scratch = MlpScratch::default();
    let mut out = Vec::new();
    let mut values = Vec::with_capacity(rows * spec.output_dim);
    for r in 0..rows {
        forward_prefix(spec, params, &fs, input.row(r), &mut scratch, &mut out);
        values.extend_from_slice(&out);
    }
    Tensor::matrix(rows, spec.output_dim, values)
}

/// One input segment for the tape forward paths. Segments are concatenated to
/// form the network input; `Jet` segments additionally carry three tangent
/// blocks (same length as the value block).
pub enum TapeSeg<'a> {
    Plain(&'a VarRange),
    Jet {
        val: &'a VarRange,
        tan: [&'a VarRange; 3],
    },
}

impl TapeSeg<'_> {
    fn val(&self) -> &VarRange {
        match self {
            TapeSeg::Plain(v) => v,
            TapeSeg::Jet { val, .. } => val,
        }
    }
}

/// Tangent-carrying tape output.
pub struct JetVec {
    pub val: Vec<Var>,
    pub tan: [Vec<Var>; 3],
}

fn check_tape_input(spec: &MlpSpec, params: &VarRange, total: usize) -> Result<()> {
    spec.validate()?;
    if total != spec.input_dim {
        return Err(Error::DimensionMismatch {
            context: "tape forward input".into(),
            expected: spec.input_dim,
            actual: total,
        });
    }
    if params.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            context: "tape forward params".into(),
            expected: spec.param_count(),
            actual: params.len(),
        });
    }
    Ok(())
}

/// Record the forward pass on the tape. `segments` concatenate to the network
/// input; gradients will flow to parameters and to every segment.
pub fn forward_tape(
    tape: &Tape,
    spec: &MlpSpec,
    params: &VarRange,
    segments: &[&VarRange],
) -> Result<VarVec> {
    let total: usize = segments.iter().map(|s| s.len()).sum();
    check_tape_input(spec, params, total)?;
    let mut cur: Option<VarRange> = None;
    for (l, li) in spec.layers().iter().enumerate() {
        let act = spec.activation_of(l);
        let mut outs = Vec::with_capacity(li.out_dim);
        for u in 0..li.out_dim {
            let row0 = li.w_off + u * li.in_dim;
            let mut col = 0usize;
            let mut z: Option<Var> = None;
            let add_part = |block: &VarRange, col: &mut usize, z: &mut Option<Var>| {
                let w = params.slice(row0 + *col, block.len());
                let d = tape.dot(block, &w);
                *col += block.len();
                *z = Some(match z.take() {
                    Some(acc) => acc + d,
                    None => d,
                });
            };
            if let Some(h) = &cur {
                add_part(h, &mut col, &mut z);
            }
            if l == 0 || li.skip {
                for seg in segments {
                    add_part(seg, &mut col, &mut z);
                }
            }
            debug_assert_eq!(col, li.in_dim);
            let z = z.unwrap() + params.get(li.b_off + u);
            outs.push(act.apply_var(&z));
        }
        cur = Some(super::encoding::contiguous(tape, &outs));
    }
    let cur = cur.unwrap();
    Ok(VarVec::new((0..cur.len()).map(|i| cur.get(i)).collect()))
}

/// Record the tangent-carrying forward pass on the tape. Spatial gradients of
/// the output come out as tape variables, so losses may depend on them.
pub fn forward_jet_tape(
    tape: &Tape,
    spec: &MlpSpec,
    params: &VarRange,
    segments: &[TapeSeg],
) -> Result<JetVec> {
    let total: usize = segments.iter().map(|s| s.val().len()).sum();
    check_tape_input(spec, params, total)?;
    let mut cur: Option<(VarRange, [VarRange; 3])> = None;
    for (l, li) in spec.layers().iter().enumerate() {
        let act = spec.activation_of(l);
        let mut vals = Vec::with_capacity(li.out_dim);
        let mut tans: [Vec<Var>; 3] = Default::default();
        for u in 0..li.out_dim {
            let row0 = li.w_off + u * li.in_dim;
            let mut col = 0usize;
            let mut z: Option<Var> = None;
            let mut tz: [Option<Var>; 3] = Default::default();
            let add = |acc: &mut Option<Var>, d: Var| {
                *acc = Some(match acc.take() {
                    Some(a) => a + d,
                    None => d,
                });
            };
            if let Some((h, th)) = &cur {
                let w = params.slice(row0 + col, h.len());
                add(&mut z, tape.dot(h, &w));
                for j in 0..3 {
                    add(&mut tz[j], tape.dot(&th[j], &w));
                }
                col += h.len();
            }
            if l == 0 || li.skip {
                for seg in segments {
                    let v = seg.val();
                    let w = params.slice(row0 + col, v.len());
                    add(&mut z, tape.dot(v, &w));
                    if let TapeSeg::Jet { tan, .. } = seg {
                        for j in 0..3 {
                            add(&mut tz[j], tape.dot(tan[j], &w));
                        }
                    }
                    col += v.len();
                }
            }
            debug_assert_eq!(col, li.in_dim);
            let z = z.unwrap() + params.get(li.b_off + u);
            let (v, d) = act.apply_var_d(&z);
            vals.push(v);
            for j in 0..3 {
                let t = match tz[j].take() {
                    Some(t) => &d * t,
                    None => tape.constant(0.0),
                };
                tans[j].push(t);
            }
        }
        let vr = super::encoding::contiguous(tape, &vals);
        let tr = tans.map(|t| super::encoding::contiguous(tape, &t));
        cur = Some((vr, tr));
    }
    let (vr, tr) = cur.unwrap();
    Ok(JetVec {
        val: (0..vr.len()).map(|i| vr.get(i)).collect(),
        tan: tr.map(|r| (0..r.len()).map(|i| r.get(i)).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_spec() -> MlpSpec {
        MlpSpec {
            input_dim: 5,
            hidden: vec![7, 6, 6],
            output_dim: 2,
            hidden_activation: Activation::Softplus { beta: 100.0 },
            output_activation: Activation::Identity,
            skip_at: Some(2),
        }
    }

    fn seeded_params(n: usize) -> Vec<f64> {
        // Deterministic, irregular values without pulling in an RNG.
        (0..n)
            .map(|i| ((i as f64 * 0.7311 + 0.13).sin()) * 0.5)
            .collect()
    }

    #[test]
    fn param_count_matches_layer_sums() {
        let spec = toy_spec();
        // L0: (5+1)*7 = 42; L1: (7+1)*6 = 48; L2 skip: (6+5+1)*6 = 72; out: (6+1)*2 = 14
        assert_eq!(spec.param_count(), 42 + 48 + 72 + 14);
        let affine = MlpSpec {
            input_dim: 3,
            hidden: vec![],
            output_dim: 1,
            hidden_activation: Activation::Identity,
            output_activation: Activation::Identity,
            skip_at: None,
        };
        assert_eq!(affine.param_count(), 4);
    }

    #[test]
    fn affine_net_with_no_hidden_layers() {
        let spec = MlpSpec {
            input_dim: 2,
            hidden: vec![],
            output_dim: 1,
            hidden_activation: Activation::Identity,
            output_activation: Activation::Identity,
            skip_at: None,
        };
        // y = 2x0 - 3x1 + 0.5
        let params = vec![2.0, -3.0, 0.5];
        let input = Tensor::matrix(1, 2, vec![1.5, 1.0]).unwrap();
        let out = mlp_forward(&spec, &params, &input).unwrap();
        assert!((out.values[0] - (3.0 - 3.0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors_are_reported() {
        let spec = toy_spec();
        let params = seeded_params(spec.param_count());
        let bad = Tensor::matrix(1, 4, vec![0.0; 4]).unwrap();
        assert!(matches!(
            mlp_forward(&spec, &params, &bad),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad_params = vec![0.0; 3];
        let ok_input = Tensor::matrix(1, 5, vec![0.0; 5]).unwrap();
        assert!(matches!(
            mlp_forward(&spec, &bad_params, &ok_input),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn skip_validation() {
        let mut spec = toy_spec();
        spec.skip_at = Some(0);
        assert!(spec.validate().is_err());
        spec.skip_at = Some(3);
        assert!(spec.validate().is_err());
        spec.skip_at = Some(2);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn frozen_suffix_matches_full_forward() {
        let spec = toy_spec();
        let params = seeded_params(spec.param_count());
        let full = [0.3, -0.2, 0.5, 0.8, -0.9];
        let (prefix, suffix) = full.split_at(2);

        let input = Tensor::matrix(1, 5, full.to_vec()).unwrap();
        let want = mlp_forward(&spec, &params, &input).unwrap();

        let fs = freeze_suffix(&spec, &params, suffix);
        let mut scratch = MlpScratch::default();
        let mut out = Vec::new();
        forward_prefix(&spec, &params, &fs, prefix, &mut scratch, &mut out);
        assert_eq!(out.len(), 2);
        for i in 0..2 {
            assert!(
                (out[i] - want.values[i]).abs() < 1e-14,
                "{} vs {}",
                out[i],
                want.values[i]
            );
        }
    }

    #[test]
    fn jet_forward_matches_finite_differences() {
        let spec = MlpSpec {
            input_dim: 5,
            hidden: vec![8, 8, 8],
            output_dim: 1,
            hidden_activation: Activation::Softplus { beta: 100.0 },
            output_activation: Activation::Identity,
            skip_at: Some(2),
        };
        let params = seeded_params(spec.param_count());
        let suffix = [0.4, -0.6];
        let prefix = [0.25, -0.15, 0.35];
        let fs = freeze_suffix(&spec, &params, &suffix);
        let mut scratch = MlpScratch::default();

        let seeds: [Vec<f64>; 3] = [
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let mut val = Vec::new();
        let mut tan: [Vec<f64>; 3] = Default::default();
        forward_prefix_jet(
            &spec,
            &params,
            &fs,
            &prefix,
            [&seeds[0], &seeds[1], &seeds[2]],
            &mut scratch,
            &mut val,
            &mut tan,
        );

        let f = |p: &[f64]| {
            let mut o = Vec::new();
            forward_prefix(&spec, &params, &fs, p, &mut MlpScratch::default(), &mut o);
            o[0]
        };
        assert!((val[0] - f(&prefix)).abs() < 1e-14);
        let h = 1e-6;
        for j in 0..3 {
            let mut pp = prefix;
            let mut pm = prefix;
            pp[j] += h;
            pm[j] -= h;
            let fd = (f(&pp) - f(&pm)) / (2.0 * h);
            assert!(
                (tan[j][0] - fd).abs() < 1e-6,
                "seed {j}: {} vs {}",
                tan[j][0],
                fd
            );
        }
    }

    #[test]
    fn tape_forward_matches_fast_path_and_gradients_check_out() {
        let spec = toy_spec();
        let params = seeded_params(spec.param_count());
        let input = [0.3, -0.2, 0.5, 0.8, -0.9];

        let tape = Tape::new();
        let pvars = tape.leaves(&params);
        let ivars = tape.leaves(&input);
        let out = forward_tape(&tape, &spec, &pvars, &[&ivars]).unwrap();
        assert_eq!(out.len(), 2);

        let fast = mlp_forward(&spec, &params, &Tensor::matrix(1, 5, input.to_vec()).unwrap())
            .unwrap();
        for i in 0..2 {
            assert!((out.vars[i].value() - fast.values[i]).abs() < 1e-13);
        }

        // Scalar root: sum of outputs; finite differences on a few parameters.
        let root = &out.vars[0] + &out.vars[1];
        let g = root.backward();
        let eval_sum = |p: &[f64]| {
            let t = mlp_forward(&spec, p, &Tensor::matrix(1, 5, input.to_vec()).unwrap()).unwrap();
            t.values[0] + t.values[1]
        };
        let h = 1e-6;
        for &pi in &[0usize, 17, 55, 101, spec.param_count() - 1] {
            let mut pp = params.clone();
            let mut pm = params.clone();
            pp[pi] += h;
            pm[pi] -= h;
            let fd = (eval_sum(&pp) - eval_sum(&pm)) / (2.0 * h);
            let got = g.wrt_range(&pvars)[pi];
            assert!((got - fd).abs() < 1e-6, "param {pi}: {got} vs {fd}");
        }
        // And a couple of input gradients.
        for ii in 0..5 {
            let mut ip = input;
            let mut im = input;
            ip[ii] += h;
            im[ii] -= h;
            let f = |x: &[f64]| {
                let t =
                    mlp_forward(&spec, &params, &Tensor::matrix(1, 5, x.to_vec()).unwrap())
                        .unwrap();
                t.values[0] + t.values[1]
            };
            let fd = (f(&ip) - f(&im)) / (2.0 * h);
            let got = g.wrt_range(&ivars)[ii];
            assert!((got - fd).abs() < 1e-6, "input {ii}: {got} vs {fd}");
        }
    }

    #[test]
    fn tape_forward_with_multiple_segments_matches_single_segment() {
        let spec = toy_spec();
        let params = seeded_params(spec.param_count());
        let input = [0.1, 0.9, -0.4, 0.2, 0.6];

        let t1 = Tape::new();
        let p1 = t1.leaves(&params);
        let i1 = t1.leaves(&input);
        let o1 = forward_tape(&t1, &spec, &p1, &[&i1]).unwrap();

        let t2 = Tape::new();
        let p2 = t2.leaves(&params);
        let a = t2.leaves(&input[..2]);
        let b = t2.leaves(&input[2..]);
        let o2 = forward_tape(&t2, &spec, &p2, &[&a, &b]).unwrap();

        // Segment boundaries change the summation order inside layer-0 dots,
        // so equality holds to rounding, not bitwise.
        for i in 0..2 {
            let (a, b) = (o1.vars[i].value(), o2.vars[i].value());
            assert!((a - b).abs() < 1e-13, "segmented input changed result: {a} vs {b}");
        }
    }

    #[test]
    fn jet_tape_matches_fast_jet_and_differentiates_gradients() {
        // Output: || spatial gradient ||^2 of a scalar net; check its gradient
        // w.r.t. parameters by finite differences of the fast jet path.
        let spec = MlpSpec {
            input_dim: 3,
            hidden: vec![6, 6],
            output_dim: 1,
            hidden_activation: Activation::Softplus { beta: 100.0 },
            output_activation: Activation::Identity,
            skip_at: Some(1),
        };
        let params = seeded_params(spec.param_count());
        let x = [0.2, -0.3, 0.5];

        let tape = Tape::new();
        let pvars = tape.leaves(&params);
        let xr = tape.leaves(&x);
        let one = tape.constant(1.0);
        let zero = tape.constant(0.0);
        let seed = |j: usize| -> Vec<Var> {
            (0..3)
                .map(|i| if i == j { one.clone() } else { zero.clone() })
                .collect()
        };
        let seeds = [seed(0), seed(1), seed(2)];
        let t0 = super::super::encoding::contiguous(&tape, &seeds[0]);
        let t1 = super::super::encoding::contiguous(&tape, &seeds[1]);
        let t2 = super::super::encoding::contiguous(&tape, &seeds[2]);
        let jet = forward_jet_tape(
            &tape,
            &spec,
            &pvars,
            &[TapeSeg::Jet {
                val: &xr,
                tan: [&t0, &t1, &t2],
            }],
        )
        .unwrap();

        // Compare value/tangents against the fast jet path.
        let fs = freeze_suffix(&spec, &params, &[]);
        let mut scratch = MlpScratch::default();
        let mut val = Vec::new();
        let mut tan: [Vec<f64>; 3] = Default::default();
        let e = [
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        forward_prefix_jet(
            &spec,
            &params,
            &fs,
            &x,
            [&e[0], &e[1], &e[2]],
            &mut scratch,
            &mut val,
            &mut tan,
        );
        assert!((jet.val[0].value() - val[0]).abs() < 1e-13);
        for j in 0..3 {
            assert!((jet.tan[j][0].value() - tan[j][0]).abs() < 1e-13);
        }

        // grad-norm-squared as the root.
        let gn = jet.tan[0][0].square() + jet.tan[1][0].square() + jet.tan[2][0].square();
        let g = gn.backward();

        let grad_norm_sq = |p: &[f64]| {
            let fs = freeze_suffix(&spec, p, &[]);
            let mut s = MlpScratch::default();
            let mut v = Vec::new();
            let mut t: [Vec<f64>; 3] = Default::default();
            forward_prefix_jet(&spec, p, &fs, &x, [&e[0], &e[1], &e[2]], &mut s, &mut v, &mut t);
            t[0][0] * t[0][0] + t[1][0] * t[1][0] + t[2][0] * t[2][0]
        };
        let h = 1e-6;
        for &pi in &[1usize, 23, 47, spec.param_count() - 2] {
            let mut pp = params.clone();
            let mut pm = params.clone();
            pp[pi] += h;
            pm[pi] -= h;
            let fd = (grad_norm_sq(&pp) - grad_norm_sq(&pm)) / (2.0 * h);
            let got = g.wrt_range(&pvars)[pi];
            assert!(
                (got - fd).abs() < 1e-5 * (1.0 + fd.abs()),
                "param {pi}: {got} vs {fd}"
            );
        }
    }
}
