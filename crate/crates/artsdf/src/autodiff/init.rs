//! Parameter initialization schemes.
//!
//! [`geometric_sdf_init`] starts a geometry network out as an approximate
//! signed distance field of a sphere: `f(x) ~ |x| - radius`, negative inside
//! and positive outside, regardless of the conditioning codes (whose first
//! layer and skip columns start at zero). A short calibration pass then
//! rescales the output layer so the zero crossing sits at `radius` exactly-ish
//! even for narrow desk-scale networks where the asymptotic arguments behind
//! the scheme are shaky.
//!
//! [`deform_init`] zeroes the final layer so a deformation field starts as the
//! identity warp, and [`standard_init`] covers appearance networks.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::encoding::{encode, encoded_len};
use super::mlp::{mlp_forward, MlpSpec, Tensor};
use crate::error::{Error, Result};

/// Initialize a scalar geometry network as an approximate sphere SDF.
///
/// `point_freqs` is the positional-encoding frequency count of the leading
/// point block; every input column beyond the raw 3 coordinates (encodings
/// and conditioning codes) starts with zero weight in the first and skip
/// layers, so the initial field is radially symmetric and code-independent.
pub fn geometric_sdf_init<R: Rng>(
    spec: &MlpSpec,
    point_freqs: usize,
    radius: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let enc_len = encoded_len(3, point_freqs);
    if spec.input_dim < enc_len {
        return Err(Error::ShapeMismatch {
            context: "geometric_sdf_init".into(),
            detail: format!(
                "input_dim {} smaller than encoded point length {}",
                spec.input_dim, enc_len
            ),
        });
    }
    if spec.output_dim != 1 {
        return Err(Error::ShapeMismatch {
            context: "geometric_sdf_init".into(),
            detail: format!("geometry net must have scalar output, got {}", spec.output_dim),
        });
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "geometric_sdf_init radius must be positive, got {radius}"
        )));
    }

    let layers = spec.layers();
    let n_layers = layers.len();
    let mut params = vec![0.0f64; spec.param_count()];
    for (l, li) in layers.iter().enumerate() {
        let is_last = l == n_layers - 1;
        if is_last {
            // Mean-positive weights plus a negative bias give the outward
            // linear growth and the negative interior.
            let dist = Normal::new((std::f64::consts::PI).sqrt() / (li.in_dim as f64).sqrt(), 1e-4)
                .unwrap();
            for w in 0..li.in_dim * li.out_dim {
                params[li.w_off + w] = dist.sample(rng);
            }
            params[li.b_off] = -radius;
        } else {
            let dist = Normal::new(0.0, (2.0f64).sqrt() / (li.out_dim as f64).sqrt()).unwrap();
            for w in 0..li.in_dim * li.out_dim {
                params[li.w_off + w] = dist.sample(rng);
            }
            // Biases stay zero.
            if l == 0 {
                // Keep only the raw-coordinate columns.
                for u in 0..li.out_dim {
                    for c in 3..li.in_dim {
                        params[li.w_off + u * li.in_dim + c] = 0.0;
                    }
                }
            } else if li.skip {
                // The re-injected input block sits after the incoming
                // activations; zero all of it except the raw coordinates.
                let inj0 = li.in_dim - spec.input_dim;
                for u in 0..li.out_dim {
                    for c in inj0 + 3..li.in_dim {
                        params[li.w_off + u * li.in_dim + c] = 0.0;
                    }
                }
            }
        }
    }
    calibrate_sphere(spec, point_freqs, radius, &mut params)?;
    Ok(params)
}

/// Rescale the output layer so `f(0) = -radius` and the mean of `f` on the
/// sphere of radius `2 * radius` is `+radius`.
fn calibrate_sphere(
    spec: &MlpSpec,
    point_freqs: usize,
    radius: f64,
    params: &mut [f64],
) -> Result<()> {
    let eval = |params: &[f64], x: [f64; 3]| -> f64 {
        let mut enc = Vec::new();
        encode(&x, point_freqs, &mut enc);
        enc.resize(spec.input_dim, 0.0); // zero codes
        let t = Tensor::matrix(1, spec.input_dim, enc).unwrap();
        mlp_forward(spec, params, &t).unwrap().values[0]
    };
    let dirs = probe_directions();
    let f0 = eval(params, [0.0; 3]);
    let mut f2 = 0.0;
    for d in &dirs {
        f2 += eval(params, [2.0 * radius * d[0], 2.0 * radius * d[1], 2.0 * radius * d[2]]);
    }
    f2 /= dirs.len() as f64;
    let span = f2 - f0;
    if !(span.is_finite() && span > 1e-9) {
        return Err(Error::Degenerate {
            context: "geometric_sdf_init".into(),
            detail: format!("probe span {span} is not positive"),
        });
    }
    let a = 2.0 * radius / span;
    let c = -radius - a * f0;
    let last = *spec.layers().last().unwrap();
    for w in 0..last.in_dim {
        params[last.w_off + w] *= a;
    }
    params[last.b_off] = a * params[last.b_off] + c;
    Ok(())
}

/// Fixed, roughly uniform probe directions (vertices + face/edge directions
/// of a cube, normalized).
fn probe_directions() -> Vec<[f64; 3]> {
    let mut dirs = Vec::new();
    for x in -1i32..=1 {
        for y in -1i32..=1 {
            for z in -1i32..=1 {
                if (x, y, z) == (0, 0, 0) {
                    continue;
                }
                let v = [x as f64, y as f64, z as f64];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                dirs.push([v[0] / n, v[1] / n, v[2] / n]);
            }
        }
    }
    dirs
}

/// Kaiming-style initialization for appearance networks: hidden weights
/// `N(0, sqrt(2/in))`, output weights `N(0, 1/sqrt(in))`, zero biases.
pub fn standard_init<R: Rng>(spec: &MlpSpec, rng: &mut R) -> Vec<f64> {
    let layers = spec.layers();
    let n_layers = layers.len();
    let mut params = vec![0.0f64; spec.param_count()];
    for (l, li) in layers.iter().enumerate() {
        let std = if l == n_layers - 1 {
            1.0 / (li.in_dim as f64).sqrt()
        } else {
            (2.0 / li.in_dim as f64).sqrt()
        };
        let dist = Normal::new(0.0, std).unwrap();
        for w in 0..li.in_dim * li.out_dim {
            params[li.w_off + w] = dist.sample(rng);
        }
    }
    params
}

/// Initialization for deformation networks: standard hidden layers, but the
/// final layer is exactly zero so the warp starts as the identity.
pub fn deform_init<R: Rng>(spec: &MlpSpec, rng: &mut R) -> Vec<f64> {
    let mut params = standard_init(spec, rng);
    let last = *spec.layers().last().unwrap();
    for w in 0..(last.in_dim + 1) * last.out_dim {
        params[last.w_off + w] = 0.0;
    }
    params
}
