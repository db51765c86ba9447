//! Finite-difference verification of analytic gradients.

/// Outcome of comparing an analytic gradient against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error over coordinates not flagged as kinks.
    pub max_rel_err: f64,
    /// Coordinate index attaining `max_rel_err`.
    pub worst_index: usize,
    /// Coordinates where forward and backward differences disagree strongly,
    /// indicating the function is not differentiable there (e.g. an `abs` or
    /// `min` switching branches inside the probe interval).
    pub kink_indices: Vec<usize>,
}

impl GradCheckReport {
    pub fn ok(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Compare `analytic` against central differences of `f` at `x`.
///
/// Relative error is `|a - fd| / max(1, |a|, |fd|)`. A coordinate is flagged
/// as a kink (and excluded from the maximum) when its one-sided differences
/// disagree by more than 10% of their magnitude scale; such coordinates say
/// nothing about gradient correctness either way.
pub fn grad_check(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    h: f64,
) -> GradCheckReport {
    assert_eq!(x.len(), analytic.len(), "grad_check: length mismatch");
    let mut probe = x.to_vec();
    let mut max_rel_err: f64 = 0.0;
    let mut worst_index = 0;
    let mut kink_indices = Vec::new();
    let f0 = f(x);
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];

        let central = (fp - fm) / (2.0 * h);
        let fwd = (fp - f0) / h;
        let bwd = (f0 - fm) / h;
        let scale = 1.0f64.max(fwd.abs()).max(bwd.abs());
        if (fwd - bwd).abs() > 0.1 * scale {
            kink_indices.push(i);
            continue;
        }
        let denom = 1.0f64.max(analytic[i].abs()).max(central.abs());
        let rel = (analytic[i] - central).abs() / denom;
        if rel > max_rel_err {
            max_rel_err = rel;
            worst_index = i;
        }
    }
    GradCheckReport {
        max_rel_err,
        worst_index,
        kink_indices,
    }
}
