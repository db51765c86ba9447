//! Reverse-mode automatic differentiation on a Wengert tape.
//!
//! The tape records every scalar operation as a node with precomputed local
//! partials; [`backward`] then runs one reverse sweep to produce gradients of
//! a scalar root with respect to every leaf. Two bulk node kinds keep network
//! evaluation cheap: [`Tape::dot`] records an entire inner product as a single
//! node (its partials are read back from the stored values during the reverse
//! sweep instead of being materialized per element), and [`Tape::sum_range`]
//! does the same for a contiguous sum.
//!
//! A `Tape` is single-threaded by construction (`Rc` + `RefCell`): parallel
//! callers build one tape per work chunk and merge gradients afterwards, which
//! keeps results bit-identical regardless of thread count.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};

#[derive(Clone, Copy)]
enum Node {
    /// Differentiable input; gradients accumulate here.
    Leaf,
    /// Recorded value with no gradient flow.
    Const,
    Unary {
        a: u32,
        da: f64,
    },
    Binary {
        a: u32,
        b: u32,
        da: f64,
        db: f64,
    },
    /// Inner product of two contiguous ranges of equal length.
    Dot {
        xs: u32,
        ws: u32,
        n: u32,
    },
    /// Sum of one contiguous range.
    SumRange {
        start: u32,
        n: u32,
    },
}

struct TapeInner {
    vals: Vec<f64>,
    nodes: Vec<Node>,
}

/// A growable record of scalar operations.
#[derive(Clone)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

/// Handle to one scalar on a tape.
#[derive(Clone)]
pub struct Var {
    tape: Tape,
    idx: u32,
}

impl std::fmt::Debug for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("idx", &self.idx)
            .field("value", &self.value())
            .finish()
    }
}

/// Handle to a contiguous block of scalars on a tape.
#[derive(Clone)]
pub struct VarRange {
    tape: Tape,
    start: u32,
    len: u32,
}

/// A small vector of tape variables (e.g. a network output).
#[derive(Clone)]
pub struct VarVec {
    pub vars: Vec<Var>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner {
                vals: Vec::new(),
                nodes: Vec::new(),
            })),
        }
    }

    /// Number of nodes recorded so far.
    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, val: f64, node: Node) -> u32 {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.nodes.len();
        assert!(idx < u32::MAX as usize, "tape overflow");
        inner.vals.push(val);
        inner.nodes.push(node);
        idx as u32
    }

    fn var(&self, idx: u32) -> Var {
        Var {
            tape: self.clone(),
            idx,
        }
    }

    /// Record a differentiable input.
    pub fn leaf(&self, v: f64) -> Var {
        let idx = self.push(v, Node::Leaf);
        self.var(idx)
    }

    /// Record a block of differentiable inputs as one contiguous range.
    pub fn leaves(&self, vs: &[f64]) -> VarRange {
        let start = self.len() as u32;
        {
            let mut inner = self.inner.borrow_mut();
            for &v in vs {
                inner.vals.push(v);
                inner.nodes.push(Node::Leaf);
            }
        }
        VarRange {
            tape: self.clone(),
            start,
            len: vs.len() as u32,
        }
    }

    /// Record a value that gradients do not flow through.
    pub fn constant(&self, v: f64) -> Var {
        let idx = self.push(v, Node::Const);
        self.var(idx)
    }

    /// Identity copy; used to lay values out contiguously for [`Tape::dot`].
    pub fn copy(&self, v: &Var) -> Var {
        self.assert_same(&v.tape);
        let val = v.value();
        let idx = self.push(val, Node::Unary { a: v.idx, da: 1.0 });
        self.var(idx)
    }

    /// Inner product of two equal-length contiguous ranges, as one node.
    pub fn dot(&self, xs: &VarRange, ws: &VarRange) -> Var {
        self.assert_same(&xs.tape);
        self.assert_same(&ws.tape);
        assert_eq!(xs.len, ws.len, "dot: range lengths differ");
        let val = {
            let inner = self.inner.borrow();
            let a = &inner.vals[xs.start as usize..(xs.start + xs.len) as usize];
            let b = &inner.vals[ws.start as usize..(ws.start + ws.len) as usize];
            dot_f64(a, b)
        };
        let idx = self.push(
            val,
            Node::Dot {
                xs: xs.start,
                ws: ws.start,
                n: xs.len,
            },
        );
        self.var(idx)
    }

    /// Sum of a contiguous range, as one node.
    pub fn sum_range(&self, r: &VarRange) -> Var {
        self.assert_same(&r.tape);
        let val = {
            let inner = self.inner.borrow();
            inner.vals[r.start as usize..(r.start + r.len) as usize]
                .iter()
                .sum()
        };
        let idx = self.push(
            val,
            Node::SumRange {
                start: r.start,
                n: r.len,
            },
        );
        self.var(idx)
    }

    fn assert_same(&self, other: &Tape) {
        assert!(
            Rc::ptr_eq(&self.inner, &other.inner),
            "variables belong to different tapes"
        );
    }

    /// Range over already-recorded nodes `[start, start + len)`.
    pub(crate) fn range_from_raw(&self, start: usize, len: usize) -> VarRange {
        assert!(start + len <= self.len(), "range extends past tape end");
        VarRange {
            tape: self.clone(),
            start: start as u32,
            len: len as u32,
        }
    }
}

/// Fixed 4-accumulator dot product. Both the tape and the plain-`f64`
/// evaluation paths use this one kernel so results never depend on which
/// path computed them.
pub fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..chunks {
        let i = 4 * c;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

impl Var {
    pub fn value(&self) -> f64 {
        self.tape.inner.borrow().vals[self.idx as usize]
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    fn unary(&self, val: f64, da: f64) -> Var {
        let idx = self.tape.push(val, Node::Unary { a: self.idx, da });
        self.tape.var(idx)
    }

    fn binary(&self, other: &Var, val: f64, da: f64, db: f64) -> Var {
        self.tape.assert_same(&other.tape);
        let idx = self.tape.push(
            val,
            Node::Binary {
                a: self.idx,
                b: other.idx,
                da,
                db,
            },
        );
        self.tape.var(idx)
    }

    pub fn sin(&self) -> Var {
        let v = self.value();
        self.unary(v.sin(), v.cos())
    }

    pub fn cos(&self) -> Var {
        let v = self.value();
        self.unary(v.cos(), -v.sin())
    }

    pub fn exp(&self) -> Var {
        let e = self.value().exp();
        self.unary(e, e)
    }

    pub fn ln(&self) -> Var {
        let v = self.value();
        self.unary(v.ln(), 1.0 / v)
    }

    pub fn sqrt(&self) -> Var {
        let s = self.value().sqrt();
        self.unary(s, 0.5 / s)
    }

    pub fn tanh(&self) -> Var {
        let t = self.value().tanh();
        self.unary(t, 1.0 - t * t)
    }

    /// |x|, with derivative 0 at the kink (a fixed subgradient choice).
    pub fn abs(&self) -> Var {
        let v = self.value();
        let da = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(v.abs(), da)
    }

    pub fn powi(&self, n: i32) -> Var {
        let v = self.value();
        self.unary(v.powi(n), n as f64 * v.powi(n - 1))
    }

    pub fn recip(&self) -> Var {
        let v = self.value();
        self.unary(1.0 / v, -1.0 / (v * v))
    }

    pub fn square(&self) -> Var {
        let v = self.value();
        self.unary(v * v, 2.0 * v)
    }

    /// max(x, 0), with derivative 0 at the kink.
    pub fn relu(&self) -> Var {
        let v = self.value();
        self.unary(v.max(0.0), if v > 0.0 { 1.0 } else { 0.0 })
    }

    /// Logistic sigmoid, numerically stable in both tails.
    pub fn sigmoid(&self) -> Var {
        let s = sigmoid_f64(self.value());
        self.unary(s, s * (1.0 - s))
    }

    /// `softplus(x) = ln(1 + exp(beta * x)) / beta`, stable for large |x|.
    pub fn softplus(&self, beta: f64) -> Var {
        let v = self.value();
        self.unary(softplus_f64(v, beta), sigmoid_f64(beta * v))
    }

    /// Elementwise minimum; ties take the left operand's gradient.
    pub fn min(&self, other: &Var) -> Var {
        let (a, b) = (self.value(), other.value());
        if a <= b {
            self.binary(other, a, 1.0, 0.0)
        } else {
            self.binary(other, b, 0.0, 1.0)
        }
    }

    /// Elementwise maximum; ties take the left operand's gradient.
    pub fn max(&self, other: &Var) -> Var {
        let (a, b) = (self.value(), other.value());
        if a >= b {
            self.binary(other, a, 1.0, 0.0)
        } else {
            self.binary(other, b, 0.0, 1.0)
        }
    }

    /// Run the reverse sweep with this variable as the (scalar) root.
    pub fn backward(&self) -> Gradients {
        let inner = self.tape.inner.borrow();
        let n = inner.nodes.len();
        let mut grads = vec![0.0f64; n];
        grads[self.idx as usize] = 1.0;
        for i in (0..=self.idx as usize).rev() {
            if let Node::Const = inner.nodes[i] {
                // Constants report zero gradient even when consumers wrote
                // partials into their slot.
                grads[i] = 0.0;
                continue;
            }
            let g = grads[i];
            if g == 0.0 {
                continue;
            }
            match inner.nodes[i] {
                Node::Leaf | Node::Const => {}
                Node::Unary { a, da } => grads[a as usize] += g * da,
                Node::Binary { a, b, da, db } => {
                    grads[a as usize] += g * da;
                    grads[b as usize] += g * db;
                }
                Node::Dot { xs, ws, n } => {
                    let (xs, ws, n) = (xs as usize, ws as usize, n as usize);
                    for k in 0..n {
                        grads[xs + k] += g * inner.vals[ws + k];
                    }
                    for k in 0..n {
                        grads[ws + k] += g * inner.vals[xs + k];
                    }
                }
                Node::SumRange { start, n } => {
                    let start = start as usize;
                    for k in 0..n as usize {
                        grads[start + k] += g;
                    }
                }
            }
        }
        Gradients { grads }
    }
}

impl VarRange {
    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> Var {
        assert!(i < self.len as usize, "range index out of bounds");
        self.tape.var(self.start + i as u32)
    }

    pub fn slice(&self, offset: usize, len: usize) -> VarRange {
        assert!(offset + len <= self.len as usize, "slice out of bounds");
        VarRange {
            tape: self.tape.clone(),
            start: self.start + offset as u32,
            len: len as u32,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let inner = self.tape.inner.borrow();
        inner.vals[self.start as usize..(self.start + self.len) as usize].to_vec()
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }
}

impl VarVec {
    pub fn new(vars: Vec<Var>) -> VarVec {
        VarVec { vars }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// The single element, or an error when this is not a scalar.
    pub fn scalar(&self) -> Result<Var> {
        if self.vars.len() == 1 {
            Ok(self.vars[0].clone())
        } else {
            Err(Error::NonScalarRoot {
                len: self.vars.len(),
            })
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.vars.iter().map(Var::value).collect()
    }
}

/// Gradients from one reverse sweep, indexed by tape position.
pub struct Gradients {
    grads: Vec<f64>,
}

impl Gradients {
    pub fn wrt(&self, v: &Var) -> f64 {
        self.grads[v.idx as usize]
    }

    pub fn wrt_range(&self, r: &VarRange) -> &[f64] {
        &self.grads[r.start as usize..(r.start + r.len) as usize]
    }
}

pub fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus_f64(x: f64, beta: f64) -> f64 {
    let z = beta * x;
    if z > 0.0 {
        x + (-z).exp().ln_1p() / beta
    } else {
        z.exp().ln_1p() / beta
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, |$a:ident, $b:ident| $val:expr, |$av:ident, $bv:ident| ($da:expr, $db:expr)) => {
        impl std::ops::$trait<&Var> for &Var {
            type Output = Var;
            fn $method(self, rhs: &Var) -> Var {
                let ($av, $bv) = (self.value(), rhs.value());
                let ($a, $b) = ($av, $bv);
                self.binary(rhs, $val, $da, $db)
            }
        }
        impl std::ops::$trait<Var> for Var {
            type Output = Var;
            fn $method(self, rhs: Var) -> Var {
                std::ops::$trait::$method(&self, &rhs)
            }
        }
        impl std::ops::$trait<&Var> for Var {
            type Output = Var;
            fn $method(self, rhs: &Var) -> Var {
                std::ops::$trait::$method(&self, rhs)
            }
        }
        impl std::ops::$trait<Var> for &Var {
            type Output = Var;
            fn $method(self, rhs: Var) -> Var {
                std::ops::$trait::$method(self, &rhs)
            }
        }
        impl std::ops::$trait<f64> for &Var {
            type Output = Var;
            fn $method(self, rhs: f64) -> Var {
                let c = self.tape.constant(rhs);
                std::ops::$trait::$method(self, &c)
            }
        }
        impl std::ops::$trait<f64> for Var {
            type Output = Var;
            fn $method(self, rhs: f64) -> Var {
                std::ops::$trait::$method(&self, rhs)
            }
        }
        impl std::ops::$trait<&Var> for f64 {
            type Output = Var;
            fn $method(self, rhs: &Var) -> Var {
                let c = rhs.tape.constant(self);
                std::ops::$trait::$method(&c, rhs)
            }
        }
        impl std::ops::$trait<Var> for f64 {
            type Output = Var;
            fn $method(self, rhs: Var) -> Var {
                std::ops::$trait::$method(self, &rhs)
            }
        }
    };
}

impl_binop!(Add, add, |a, b| a + b, |_av, _bv| (1.0, 1.0));
impl_binop!(Sub, sub, |a, b| a - b, |_av, _bv| (1.0, -1.0));
impl_binop!(Mul, mul, |a, b| a * b, |av, bv| (bv, av));
impl_binop!(Div, div, |a, b| a / b, |av, bv| (1.0 / bv, -av / (bv * bv)));

impl std::ops::Neg for &Var {
    type Output = Var;
    fn neg(self) -> Var {
        self.unary(-self.value(), -1.0)
    }
}

impl std::ops::Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn simple_chain_matches_finite_differences() {
        // g(x, y) = sin(x * y) + exp(x) / y
        let eval = |x: f64, y: f64| (x * y).sin() + x.exp() / y;
        let (x0, y0) = (0.7, -1.3);
        let tape = Tape::new();
        let x = tape.leaf(x0);
        let y = tape.leaf(y0);
        let out = (&x * &y).sin() + x.exp() / &y;
        assert!((out.value() - eval(x0, y0)).abs() < 1e-15);
        let g = out.backward();
        let h = 1e-6;
        let dx = central_diff(|x| eval(x, y0), x0, h);
        let dy = central_diff(|y| eval(x0, y), y0, h);
        assert!((g.wrt(&x) - dx).abs() < 1e-8, "{} vs {}", g.wrt(&x), dx);
        assert!((g.wrt(&y) - dy).abs() < 1e-8, "{} vs {}", g.wrt(&y), dy);
    }

    #[test]
    fn unary_function_derivatives_match_finite_differences() {
        type F = (
            fn(&Var) -> Var,
            fn(f64) -> f64,
            f64, // probe point
        );
        let cases: Vec<F> = vec![
            (|v| v.sin(), |x| x.sin(), 0.9),
            (|v| v.cos(), |x| x.cos(), -0.4),
            (|v| v.exp(), |x| x.exp(), 0.3),
            (|v| v.ln(), |x| x.ln(), 1.7),
            (|v| v.sqrt(), |x| x.sqrt(), 2.5),
            (|v| v.tanh(), |x| x.tanh(), 0.8),
            (|v| v.abs(), |x| x.abs(), -0.6),
            (|v| v.powi(3), |x| x.powi(3), 1.2),
            (|v| v.recip(), |x| 1.0 / x, 0.45),
            (|v| v.square(), |x| x * x, -1.1),
            (|v| v.sigmoid(), sigmoid_f64, 0.2),
            (|v| v.softplus(1.0), |x| softplus_f64(x, 1.0), -0.7),
            (|v| v.softplus(100.0), |x| softplus_f64(x, 100.0), 0.02),
        ];
        for (tape_fn, f64_fn, x0) in cases {
            let tape = Tape::new();
            let x = tape.leaf(x0);
            let out = tape_fn(&x);
            assert!((out.value() - f64_fn(x0)).abs() < 1e-14);
            let g = out.backward();
            let fd = central_diff(f64_fn, x0, 1e-6);
            assert!(
                (g.wrt(&x) - fd).abs() < 1e-6,
                "derivative mismatch at {x0}: {} vs {}",
                g.wrt(&x),
                fd
            );
        }
    }

    #[test]
    fn softplus_is_stable_far_from_zero() {
        let tape = Tape::new();
        let hi = tape.leaf(20.0);
        let lo = tape.leaf(-20.0);
        let a = hi.softplus(100.0);
        let b = lo.softplus(100.0);
        assert!((a.value() - 20.0).abs() < 1e-12);
        assert!(b.value() >= 0.0 && b.value() < 1e-12);
        assert!(a.value().is_finite() && b.value().is_finite());
        let g = a.backward();
        assert!((g.wrt(&hi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dot_node_matches_elementwise_product_sum() {
        let tape = Tape::new();
        let xs = tape.leaves(&[0.5, -1.0, 2.0, 0.25, 3.0]);
        let ws = tape.leaves(&[1.5, 0.5, -0.5, 4.0, -2.0]);
        let d = tape.dot(&xs, &ws);
        let expected: f64 = xs
            .values()
            .iter()
            .zip(ws.values().iter())
            .map(|(a, b)| a * b)
            .sum();
        assert!((d.value() - expected).abs() < 1e-15);
        let g = d.backward();
        // d(dot)/dx_i = w_i and vice versa
        for i in 0..5 {
            assert_eq!(g.wrt_range(&xs)[i], ws.values()[i]);
            assert_eq!(g.wrt_range(&ws)[i], xs.values()[i]);
        }
    }

    #[test]
    fn dot_gradients_propagate_through_downstream_ops() {
        // y = tanh(dot(x, w)); check dy/dw against finite differences.
        let x0 = [0.3, -0.2, 0.8];
        let w0 = [1.0, 0.5, -0.25];
        let f = |w: &[f64]| -> f64 { dot_f64(&x0, w).tanh() };
        let tape = Tape::new();
        let xs = tape.leaves(&x0);
        let ws = tape.leaves(&w0);
        let y = tape.dot(&xs, &ws).tanh();
        let g = y.backward();
        for i in 0..3 {
            let mut wp = w0;
            let mut wm = w0;
            wp[i] += 1e-6;
            wm[i] -= 1e-6;
            let fd = (f(&wp) - f(&wm)) / 2e-6;
            assert!((g.wrt_range(&ws)[i] - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn sum_range_gradient_is_one_per_element() {
        let tape = Tape::new();
        let xs = tape.leaves(&[1.0, 2.0, 3.0, 4.0]);
        let s = tape.sum_range(&xs);
        assert_eq!(s.value(), 10.0);
        let g = (s * 2.0).backward();
        for i in 0..4 {
            assert_eq!(g.wrt_range(&xs)[i], 2.0);
        }
    }

    #[test]
    fn constants_block_gradient_flow() {
        let tape = Tape::new();
        let x = tape.leaf(3.0);
        let c = tape.constant(x.value());
        let y = &x * &c; // y = 3x with c treated as a constant
        let g = y.backward();
        assert_eq!(g.wrt(&x), 3.0);
        assert_eq!(g.wrt(&c), 0.0);
    }

    #[test]
    fn fan_out_accumulates_gradients() {
        // y = x*x + x  =>  dy/dx = 2x + 1
        let tape = Tape::new();
        let x = tape.leaf(1.5);
        let y = &x * &x + &x;
        let g = y.backward();
        assert!((g.wrt(&x) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn min_max_pick_branch_gradients() {
        let tape = Tape::new();
        let a = tape.leaf(1.0);
        let b = tape.leaf(2.0);
        let lo = a.min(&b);
        let hi = a.max(&b);
        assert_eq!(lo.value(), 1.0);
        assert_eq!(hi.value(), 2.0);
        let g = lo.backward();
        assert_eq!((g.wrt(&a), g.wrt(&b)), (1.0, 0.0));
        let g = hi.backward();
        assert_eq!((g.wrt(&a), g.wrt(&b)), (0.0, 1.0));
        // Ties deterministically favor the left operand.
        let c = tape.leaf(5.0);
        let d = tape.leaf(5.0);
        let g = c.min(&d).backward();
        assert_eq!((g.wrt(&c), g.wrt(&d)), (1.0, 0.0));
    }

    #[test]
    fn scalar_root_contract() {
        let tape = Tape::new();
        let v = VarVec::new(vec![tape.leaf(1.0), tape.leaf(2.0)]);
        match v.scalar() {
            Err(Error::NonScalarRoot { len: 2 }) => {}
            other => panic!("expected NonScalarRoot, got {other:?}"),
        }
        let s = VarVec::new(vec![tape.leaf(7.0)]);
        assert_eq!(s.scalar().unwrap().value(), 7.0);
    }

    #[test]
    fn replay_is_bit_identical() {
        // Recording the same computation twice gives bit-identical values and
        // gradients.
        let run = || {
            let tape = Tape::new();
            let xs = tape.leaves(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
            let ws = tape.leaves(&[-0.3, 1.4, 0.9, -2.2, 0.05, 0.33, -0.8]);
            let y = (tape.dot(&xs, &ws) * 1.7).tanh().softplus(100.0);
            let g = y.backward();
            (y.value(), g.wrt_range(&ws).to_vec())
        };
        let (v1, g1) = run();
        let (v2, g2) = run();
        assert_eq!(v1.to_bits(), v2.to_bits());
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    #[should_panic(expected = "different tapes")]
    fn cross_tape_ops_panic() {
        let t1 = Tape::new();
        let t2 = Tape::new();
        let a = t1.leaf(1.0);
        let b = t2.leaf(2.0);
        let _ = a + b;
    }
}
