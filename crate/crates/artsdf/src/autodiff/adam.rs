//! Adam optimizer with per-block state, usable sparsely.
//!
//! Each parameter block (a network's weights, or one latent code) owns an
//! [`OptimState`] with its own step counter, so codes that are only touched
//! when their instance is sampled still get correct bias correction.

use crate::error::{Error, Result};

/// Adam moment decay rates and epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates and step count for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl OptimState {
    pub fn new(n: usize) -> OptimState {
        OptimState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One Adam update of `params` in place. `label` names the block in errors.
///
/// Rejects non-finite gradients before touching any state, so a failed step
/// leaves parameters and moments unchanged.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimState,
    hyper: &AdamHyper,
    lr: f64,
    label: &str,
) -> Result<()> {
    assert_eq!(params.len(), grads.len(), "adam_step: length mismatch");
    assert_eq!(params.len(), state.m.len(), "adam_step: state mismatch");
    if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient {
            block: label.to_string(),
            index,
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (hyper.beta1, hyper.beta2, hyper.eps);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    for i in 0..params.len() {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
        let mhat = state.m[i] / bc1;
        let vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_roughly_lr_in_sign_direction() {
        let mut p = vec![1.0];
        let mut st = OptimState::new(1);
        adam_step(&mut p, &[0.5], &mut st, &AdamHyper::default(), 0.1, "t").unwrap();
        // mhat = 0.5, vhat = 0.25, update = 0.1 * 0.5 / (0.5 + 1e-8)
        let expected = 1.0 - 0.1 * 0.5 / (0.25f64.sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.9).abs() < 1e-8);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn two_steps_match_hand_computation() {
        let h = AdamHyper::default();
        let mut p = vec![2.0];
        let mut st = OptimState::new(1);
        let g = 1.0;
        adam_step(&mut p, &[g], &mut st, &h, 0.01, "t").unwrap();
        adam_step(&mut p, &[g], &mut st, &h, 0.01, "t").unwrap();

        // By hand:
        let mut m = 0.0;
        let mut v = 0.0;
        let mut x = 2.0f64;
        for t in 1..=2 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mhat = m / (1.0 - 0.9f64.powi(t));
            let vhat = v / (1.0 - 0.999f64.powi(t));
            x -= 0.01 * mhat / (vhat.sqrt() + 1e-8);
        }
        assert!((p[0] - x).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_rejected_and_state_untouched() {
        let mut p = vec![1.0, 2.0];
        let mut st = OptimState::new(2);
        let err = adam_step(
            &mut p,
            &[0.1, f64::NAN],
            &mut st,
            &AdamHyper::default(),
            0.1,
            "geometry",
        )
        .unwrap_err();
        match err {
            Error::NonFiniteGradient { block, index } => {
                assert_eq!(block, "geometry");
                assert_eq!(index, 1);
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(st.step, 0);
        assert_eq!(st.m, vec![0.0, 0.0]);
    }

    #[test]
    fn sparse_blocks_keep_independent_step_counts() {
        let h = AdamHyper::default();
        let mut a = vec![0.0];
        let mut b = vec![0.0];
        let mut sa = OptimState::new(1);
        let mut sb = OptimState::new(1);
        for _ in 0..3 {
            adam_step(&mut a, &[1.0], &mut sa, &h, 0.1, "a").unwrap();
        }
        adam_step(&mut b, &[1.0], &mut sb, &h, 0.1, "b").unwrap();
        assert_eq!(sa.step, 3);
        assert_eq!(sb.step, 1);
        // First update of `b` matches first update of `a` exactly: same
        // bias-corrected state regardless of what other blocks did.
        let first_a = -0.1 * 1.0 / (1.0f64.sqrt() + 1e-8);
        assert!((b[0] - first_a).abs() < 1e-15);
    }
}
