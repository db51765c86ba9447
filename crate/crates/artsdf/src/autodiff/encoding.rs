//! Sinusoidal positional encoding of low-dimensional inputs.
//!
//! `encode` maps `x` to `[x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^(F-1) pi x),
//! cos(2^(F-1) pi x)]`, applied componentwise with all components of one
//! frequency grouped together. With `num_freqs = 0` the encoding is the
//! identity. The jet/tape variants propagate derivatives through the
//! sinusoids for gradient-based consumers.

use super::tape::{Tape, Var, VarRange};

/// Encoded length for a `dim`-dimensional input.
pub fn encoded_len(dim: usize, num_freqs: usize) -> usize {
    dim * (1 + 2 * num_freqs)
}

/// Encode a point. Output starts with `x` itself, then per frequency `k` a
/// sin block and a cos block over all components.
pub fn encode(x: &[f64], num_freqs: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(x);
    for k in 0..num_freqs {
        let w = std::f64::consts::PI * (1u64 << k) as f64;
        for &xi in x {
            out.push((w * xi).sin());
        }
        for &xi in x {
            out.push((w * xi).cos());
        }
    }
}

/// Encode a point together with tangents: given input tangents `dx[j][i]`
/// (derivative of component `i` along seed direction `j`), fills `dout` with
/// the tangents of the encoded vector.
pub fn encode_jet(
    x: &[f64],
    dx: &[Vec<f64>; 3],
    num_freqs: usize,
    out: &mut Vec<f64>,
    dout: &mut [Vec<f64>; 3],
) {
    out.clear();
    out.extend_from_slice(x);
    for j in 0..3 {
        dout[j].clear();
        dout[j].extend_from_slice(&dx[j]);
    }
    for k in 0..num_freqs {
        let w = std::f64::consts::PI * (1u64 << k) as f64;
        for (i, &xi) in x.iter().enumerate() {
            let (s, c) = (w * xi).sin_cos();
            out.push(s);
            for j in 0..3 {
                dout[j].push(w * c * dx[j][i]);
            }
        }
        for (i, &xi) in x.iter().enumerate() {
            let (s, c) = (w * xi).sin_cos();
            out.push(c);
            for j in 0..3 {
                dout[j].push(-w * s * dx[j][i]);
            }
        }
    }
}

/// Tape version of [`encode`]; returns one contiguous range.
pub fn encode_tape(tape: &Tape, x: &[Var], num_freqs: usize) -> VarRange {
    let mut entries: Vec<Var> = x.to_vec();
    for k in 0..num_freqs {
        let w = std::f64::consts::PI * (1u64 << k) as f64;
        for xi in x {
            entries.push((xi * w).sin());
        }
        for xi in x {
            entries.push((xi * w).cos());
        }
    }
    contiguous(tape, &entries)
}

/// Tape version of [`encode_jet`]. `x` carries values, `dx[j]` the tangent
/// variables along seed `j`. Returns `(values, tangents)`, each contiguous.
pub fn encode_jet_tape(
    tape: &Tape,
    x: &[Var],
    dx: &[Vec<Var>; 3],
    num_freqs: usize,
) -> (VarRange, [VarRange; 3]) {
    let mut vals: Vec<Var> = x.to_vec();
    let mut tans: [Vec<Var>; 3] = [dx[0].clone(), dx[1].clone(), dx[2].clone()];
    for k in 0..num_freqs {
        let w = std::f64::consts::PI * (1u64 << k) as f64;
        for (i, xi) in x.iter().enumerate() {
            let scaled = xi * w;
            let s = scaled.sin();
            let c = scaled.cos();
            vals.push(s);
            for j in 0..3 {
                tans[j].push(&c * w * &dx[j][i]);
            }
        }
        for (i, xi) in x.iter().enumerate() {
            let scaled = xi * w;
            let s = scaled.sin();
            let c = scaled.cos();
            vals.push(c);
            for j in 0..3 {
                tans[j].push(-(&s * w) * &dx[j][i]);
            }
        }
    }
    let v = contiguous(tape, &vals);
    let t = tans.map(|t| contiguous(tape, &t));
    (v, t)
}

/// Copy scattered variables into one contiguous block (needed before they can
/// participate in a bulk dot node).
pub fn contiguous(tape: &Tape, vars: &[Var]) -> VarRange {
    let start = tape.len();
    for v in vars {
        tape.copy(v);
    }
    tape.range_from_raw(start, vars.len())
}
