//! Reverse-mode scalar differentiation.
//!
//! A [`Tape`] records every scalar operation in creation order, so parents
//! always precede children and a single reverse sweep accumulates adjoints.
//! The primitive set is deliberately small; everything else the engine needs
//! (sigmoid, log-sum-exp, absolute value, soft aggregations) is composed from
//! it, which keeps every gradient checkable against finite differences.

mod adam;

pub use adam::Adam;

use std::sync::atomic::{AtomicU32, Ordering};

use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(0);

/// Handle to a node on a specific tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    index: u32,
}

impl Var {
    pub fn index(self) -> usize {
        self.index as usize
    }
}

/// Primitive operations. `Scale` carries its constant factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Neg,
    Exp,
    Log,
    Max0,
    Clamp01,
    Scale(f64),
}

impl Op {
    pub fn arity(self) -> usize {
        match self {
            Op::Add | Op::Sub | Op::Mul => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Constant,
    Param,
    Apply(Op),
}

#[derive(Clone, Debug)]
struct Node {
    value: f64,
    kind: Kind,
    parents: [u32; 2],
    partials: [f64; 2],
    arity: u8,
}

/// Append-only record of a forward computation.
#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
    params: Vec<Var>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Parameters in registration order.
    pub fn params(&self) -> &[Var] {
        &self.params
    }

    pub fn value(&self, v: Var) -> f64 {
        debug_assert_eq!(v.tape, self.id, "variable from another tape");
        self.nodes[v.index()].value
    }

    fn push(&mut self, value: f64, kind: Kind, parents: &[(Var, f64)]) -> Var {
        let mut p = [0u32; 2];
        let mut d = [0.0; 2];
        for (slot, (var, partial)) in parents.iter().enumerate() {
            p[slot] = var.index;
            d[slot] = *partial;
        }
        let index = self.nodes.len() as u32;
        self.nodes.push(Node {
            value,
            kind,
            parents: p,
            partials: d,
            arity: parents.len() as u8,
        });
        Var { tape: self.id, index }
    }

    fn owns(&self, v: Var) -> bool {
        v.tape == self.id && v.index() < self.nodes.len()
    }

    /// Constant leaf. Rejects NaN and infinities.
    pub fn lift(&mut self, value: f64) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { what: "lifted constant", value });
        }
        Ok(self.push(value, Kind::Constant, &[]))
    }

    /// Constant leaf for values the caller already knows are finite.
    pub fn constant(&mut self, value: f64) -> Var {
        debug_assert!(value.is_finite(), "non-finite constant {value}");
        self.push(value, Kind::Constant, &[])
    }

    /// Leaf registered for optimization.
    pub fn param(&mut self, value: f64) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { what: "parameter", value });
        }
        let v = self.push(value, Kind::Param, &[]);
        self.params.push(v);
        Ok(v)
    }

    pub fn is_param(&self, v: Var) -> bool {
        self.owns(v) && self.nodes[v.index()].kind == Kind::Param
    }

    /// Checked application of a primitive.
    pub fn apply(&mut self, op: Op, inputs: &[Var]) -> Result<Var> {
        if inputs.len() != op.arity() {
            return Err(Error::Arity {
                op: format!("{op:?}"),
                expected: op.arity(),
                got: inputs.len(),
            });
        }
        if let Some(bad) = inputs.iter().find(|v| !self.owns(**v)) {
            return Err(Error::ForeignVar(bad.index()));
        }
        if let (Op::Log, [x]) = (op, inputs) {
            let value = self.value(*x);
            if value <= 0.0 {
                return Err(Error::LogDomain(value));
            }
        }
        if let Op::Scale(c) = op {
            if !c.is_finite() {
                return Err(Error::NonFinite { what: "scale factor", value: c });
            }
        }
        let out = self.apply_unchecked(op, inputs);
        let value = self.value(out);
        if !value.is_finite() {
            return Err(Error::NonFinite { what: "operation result", value });
        }
        Ok(out)
    }

    fn apply_unchecked(&mut self, op: Op, inputs: &[Var]) -> Var {
        let x = self.value(inputs[0]);
        let kind = Kind::Apply(op);
        match op {
            Op::Add => {
                let y = self.value(inputs[1]);
                self.push(x + y, kind, &[(inputs[0], 1.0), (inputs[1], 1.0)])
            }
            Op::Sub => {
                let y = self.value(inputs[1]);
                self.push(x - y, kind, &[(inputs[0], 1.0), (inputs[1], -1.0)])
            }
            Op::Mul => {
                let y = self.value(inputs[1]);
                self.push(x * y, kind, &[(inputs[0], y), (inputs[1], x)])
            }
            Op::Neg => self.push(-x, kind, &[(inputs[0], -1.0)]),
            Op::Exp => {
                let e = x.exp();
                self.push(e, kind, &[(inputs[0], e)])
            }
            Op::Log => self.push(x.ln(), kind, &[(inputs[0], 1.0 / x)]),
            Op::Max0 => {
                let (v, d) = if x > 0.0 { (x, 1.0) } else { (0.0, 0.0) };
                self.push(v, kind, &[(inputs[0], d)])
            }
            Op::Clamp01 => {
                // the exact boundary counts as inside
                let (v, d) = if x < 0.0 {
                    (0.0, 0.0)
                } else if x > 1.0 {
                    (1.0, 0.0)
                } else {
                    (x, 1.0)
                };
                self.push(v, kind, &[(inputs[0], d)])
            }
            Op::Scale(c) => self.push(c * x, kind, &[(inputs[0], c)]),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.apply_unchecked(Op::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.apply_unchecked(Op::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.apply_unchecked(Op::Mul, &[a, b])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.apply_unchecked(Op::Neg, &[a])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.apply_unchecked(Op::Exp, &[a])
    }

    /// Natural log. Callers guarantee a positive argument; use [`Tape::apply`]
    /// when that is not known.
    pub fn ln(&mut self, a: Var) -> Var {
        debug_assert!(self.value(a) > 0.0, "log of {}", self.value(a));
        self.apply_unchecked(Op::Log, &[a])
    }

    pub fn max0(&mut self, a: Var) -> Var {
        self.apply_unchecked(Op::Max0, &[a])
    }

    pub fn clamp01(&mut self, a: Var) -> Var {
        self.apply_unchecked(Op::Clamp01, &[a])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.apply_unchecked(Op::Scale(c), &[a])
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let k = self.constant(c);
        self.add(a, k)
    }

    /// `c - a`
    pub fn rsub_const(&mut self, c: f64, a: Var) -> Var {
        let k = self.constant(c);
        self.sub(k, a)
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        match xs.split_first() {
            None => self.constant(0.0),
            Some((first, rest)) => rest.iter().fold(*first, |acc, x| self.add(acc, *x)),
        }
    }

    /// `min(1, a)` as `1 - max0(1 - a)`.
    pub fn min1(&mut self, a: Var) -> Var {
        let gap = self.rsub_const(1.0, a);
        let over = self.max0(gap);
        self.rsub_const(1.0, over)
    }

    /// `max(a, b)` as `a + max0(b - a)`.
    pub fn max(&mut self, a: Var, b: Var) -> Var {
        let d = self.sub(b, a);
        let h = self.max0(d);
        self.add(a, h)
    }

    /// `min(a, b)` as `a - max0(a - b)`.
    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let d = self.sub(a, b);
        let h = self.max0(d);
        self.sub(a, h)
    }

    /// `|a|` as `max0(a) + max0(-a)`; subgradient 0 at the kink.
    pub fn abs(&mut self, a: Var) -> Var {
        let p = self.max0(a);
        let n = self.neg(a);
        let q = self.max0(n);
        self.add(p, q)
    }

    /// Logistic sigmoid, composed so neither branch overflows.
    pub fn sigmoid(&mut self, a: Var) -> Var {
        if self.value(a) >= 0.0 {
            // exp(-log(1 + exp(-a)))
            let na = self.neg(a);
            let e = self.exp(na);
            let one_plus = self.add_const(e, 1.0);
            let l = self.ln(one_plus);
            let nl = self.neg(l);
            self.exp(nl)
        } else {
            // exp(a - log(1 + exp(a)))
            let e = self.exp(a);
            let one_plus = self.add_const(e, 1.0);
            let l = self.ln(one_plus);
            let d = self.sub(a, l);
            self.exp(d)
        }
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if !self.owns(root) {
            return Err(Error::ForeignVar(root.index()));
        }
        let mut adjoint = vec![0.0; root.index() + 1];
        adjoint[root.index()] = 1.0;
        for i in (0..=root.index()).rev() {
            let g = adjoint[i];
            if g == 0.0 {
                continue;
            }
            let node = &self.nodes[i];
            for slot in 0..node.arity as usize {
                adjoint[node.parents[slot] as usize] += g * node.partials[slot];
            }
        }
        Ok(Gradients { tape: self.id, adjoint })
    }
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    tape: u32,
    adjoint: Vec<f64>,
}

impl Gradients {
    /// d(root)/d(v); zero for nodes created after the root.
    pub fn wrt(&self, v: Var) -> f64 {
        debug_assert_eq!(v.tape, self.tape);
        self.adjoint.get(v.index()).copied().unwrap_or(0.0)
    }

    pub fn collect(&self, vars: &[Var]) -> Vec<f64> {
        vars.iter().map(|v| self.wrt(*v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn lift_keeps_value_and_rejects_nan() {
        let mut t = Tape::new();
        let v = t.lift(0.5).unwrap();
        assert_eq!(t.value(v), 0.5);
        assert!(!t.is_param(v));
        assert!(matches!(t.lift(f64::NAN), Err(Error::NonFinite { .. })));
        assert!(t.lift(f64::INFINITY).is_err());
    }

    #[test]
    fn param_is_registered() {
        let mut t = Tape::new();
        let p = t.param(-2.0).unwrap();
        assert!(t.is_param(p));
        assert_eq!(t.params(), &[p]);
    }

    #[test]
    fn mul_partials() {
        let mut t = Tape::new();
        let x = t.param(2.0).unwrap();
        let y = t.param(3.0).unwrap();
        let z = t.apply(Op::Mul, &[x, y]).unwrap();
        assert_eq!(t.value(z), 6.0);
        let g = t.backward(z).unwrap();
        assert_eq!(g.wrt(x), 3.0);
        assert_eq!(g.wrt(y), 2.0);
    }

    #[test]
    fn clamp01_saturates_with_zero_derivative() {
        let mut t = Tape::new();
        let x = t.param(1.3).unwrap();
        let c = t.apply(Op::Clamp01, &[x]).unwrap();
        assert_eq!(t.value(c), 1.0);
        assert_eq!(t.backward(c).unwrap().wrt(x), 0.0);

        let mut t = Tape::new();
        let x = t.param(1.0).unwrap();
        let c = t.clamp01(x);
        assert_eq!(t.backward(c).unwrap().wrt(x), 1.0, "boundary passes through");

        let mut t = Tape::new();
        let x = t.param(0.4).unwrap();
        let c = t.clamp01(x);
        assert_eq!(t.backward(c).unwrap().wrt(x), 1.0);
    }

    #[test]
    fn exp_log_round_trip() {
        let mut t = Tape::new();
        let x = t.param(0.7).unwrap();
        let l = t.apply(Op::Log, &[x]).unwrap();
        let e = t.apply(Op::Exp, &[l]).unwrap();
        assert!((t.value(e) - 0.7).abs() < 1e-12);
        assert!((t.backward(e).unwrap().wrt(x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn apply_errors() {
        let mut t = Tape::new();
        let x = t.lift(0.0).unwrap();
        let y = t.lift(-1.0).unwrap();
        assert!(matches!(t.apply(Op::Log, &[x]), Err(Error::LogDomain(_))));
        assert!(matches!(t.apply(Op::Log, &[y]), Err(Error::LogDomain(_))));
        assert!(matches!(t.apply(Op::Add, &[x]), Err(Error::Arity { .. })));
        assert!(matches!(t.apply(Op::Neg, &[x, y]), Err(Error::Arity { .. })));
        let mut other = Tape::new();
        let foreign = other.lift(1.0).unwrap();
        assert!(matches!(t.apply(Op::Neg, &[foreign]), Err(Error::ForeignVar(_))));
        assert!(t.backward(foreign).is_err());
    }

    #[test]
    fn constant_root_gives_zero_grads() {
        let mut t = Tape::new();
        let p = t.param(1.5).unwrap();
        let c = t.lift(4.0).unwrap();
        let g = t.backward(c).unwrap();
        assert_eq!(g.wrt(p), 0.0);
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // f = x*x + x  -> f' = 2x + 1
        let mut t = Tape::new();
        let x = t.param(1.25).unwrap();
        let sq = t.mul(x, x);
        let f = t.add(sq, x);
        assert_eq!(t.backward(f).unwrap().wrt(x), 3.5);
    }

    #[test]
    fn composites_match_finite_differences() {
        type Build = fn(&mut Tape, Var) -> Var;
        let cases: [(&str, Build, f64); 6] = [
            ("sigmoid+", |t, x| t.sigmoid(x), 0.8),
            ("sigmoid-", |t, x| t.sigmoid(x), -1.7),
            ("abs", |t, x| t.abs(x), -0.3),
            ("min1", |t, x| t.min1(x), 0.6),
            ("max", |t, x| {
                let c = t.constant(0.2);
                t.max(x, c)
            }, 0.5),
            ("min", |t, x| {
                let c = t.constant(0.2);
                t.min(x, c)
            }, 0.5),
        ];
        for (name, build, x0) in cases {
            let eval = |x: f64| {
                let mut t = Tape::new();
                let v = t.constant(x);
                let out = build(&mut t, v);
                t.value(out)
            };
            let mut t = Tape::new();
            let x = t.param(x0).unwrap();
            let out = build(&mut t, x);
            let analytic = t.backward(out).unwrap().wrt(x);
            let numeric = central_diff(eval, x0);
            assert!((analytic - numeric).abs() < 1e-7, "{name}: {analytic} vs {numeric}");
        }
    }

    #[test]
    fn sigmoid_extremes_are_finite() {
        let mut t = Tape::new();
        for x in [-700.0, -50.0, 0.0, 50.0, 700.0] {
            let v = t.constant(x);
            let s = t.sigmoid(v);
            let y = t.value(s);
            assert!(y.is_finite() && (0.0..=1.0).contains(&y), "{x} -> {y}");
        }
        let v = t.constant(-2.0);
        let s = t.sigmoid(v);
        assert!((t.value(s) - 0.11920292202211755).abs() < 1e-15);
    }

    #[test]
    fn evaluation_is_bit_deterministic() {
        let run = || {
            let mut t = Tape::new();
            let x = t.param(0.3).unwrap();
            let y = t.param(0.9).unwrap();
            let s = t.sigmoid(x);
            let m = t.mul(s, y);
            let e = t.exp(m);
            let out = t.ln(e);
            let g = t.backward(out).unwrap();
            (t.value(out).to_bits(), g.wrt(x).to_bits(), g.wrt(y).to_bits())
        };
        assert_eq!(run(), run());
    }
}
