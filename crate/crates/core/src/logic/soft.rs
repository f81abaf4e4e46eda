//! Temperature-controlled soft aggregations.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Aggregation temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftConfig {
    tau: f64,
}

impl SoftConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Config(format!("temperature must be finite and positive, got {tau}")));
        }
        Ok(SoftConfig { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl Default for SoftConfig {
    fn default() -> Self {
        SoftConfig { tau: 0.1 }
    }
}

/// `-τ log Σ exp(-x_i/τ)`, shifted by the minimum. Never exceeds `min(xs)`.
pub fn softmin(tape: &mut Tape, xs: &[Var], tau: f64) -> Result<Var> {
    if xs.is_empty() {
        return Err(Error::Empty("softmin"));
    }
    let m = xs.iter().map(|v| tape.value(*v)).fold(f64::INFINITY, f64::min);
    let shift = tape.constant(m);
    let terms: Vec<Var> = xs
        .iter()
        .map(|x| {
            let d = tape.sub(*x, shift);
            let s = tape.scale(d, -1.0 / tau);
            tape.exp(s)
        })
        .collect();
    let total = tape.sum(&terms);
    let lse = tape.ln(total);
    let spread = tape.scale(lse, tau);
    Ok(tape.sub(shift, spread))
}

/// `τ log Σ exp(x_i/τ)`, shifted by the maximum. Never below `max(xs)`.
pub fn softmax(tape: &mut Tape, xs: &[Var], tau: f64) -> Result<Var> {
    if xs.is_empty() {
        return Err(Error::Empty("softmax"));
    }
    let m = xs.iter().map(|v| tape.value(*v)).fold(f64::NEG_INFINITY, f64::max);
    let shift = tape.constant(m);
    let terms: Vec<Var> = xs
        .iter()
        .map(|x| {
            let d = tape.sub(*x, shift);
            let s = tape.scale(d, 1.0 / tau);
            tape.exp(s)
        })
        .collect();
    let total = tape.sum(&terms);
    let lse = tape.ln(total);
    let spread = tape.scale(lse, tau);
    Ok(tape.add(shift, spread))
}

/// Convex pooling `Σ w_i x_i` with `w = softmax(z/τ)`.
///
/// Evaluated as `min + Σ w_i (x_i - min)` so the result never drops below the
/// minimum; a rounding overshoot past the maximum is removed by a constant
/// shift that leaves the gradient untouched.
pub fn conv_pool(tape: &mut Tape, xs: &[Var], zs: &[Var], tau: f64) -> Result<Var> {
    if xs.is_empty() {
        return Err(Error::Empty("conv-pool"));
    }
    if xs.len() != zs.len() {
        return Err(Error::LengthMismatch { what: "conv-pool values/selectors", left: xs.len(), right: zs.len() });
    }
    let zmax = zs.iter().map(|v| tape.value(*v)).fold(f64::NEG_INFINITY, f64::max);
    let zshift = tape.constant(zmax);
    let logits: Vec<Var> = zs
        .iter()
        .map(|z| {
            let d = tape.sub(*z, zshift);
            tape.scale(d, 1.0 / tau)
        })
        .collect();
    let exps: Vec<Var> = logits.iter().map(|l| tape.exp(*l)).collect();
    let total = tape.sum(&exps);
    let log_total = tape.ln(total);

    let lo = xs.iter().map(|v| tape.value(*v)).fold(f64::INFINITY, f64::min);
    let hi = xs.iter().map(|v| tape.value(*v)).fold(f64::NEG_INFINITY, f64::max);
    let base = tape.constant(lo);
    let weighted: Vec<Var> = xs
        .iter()
        .zip(&logits)
        .map(|(x, l)| {
            let lw = tape.sub(*l, log_total);
            let w = tape.exp(lw);
            let d = tape.sub(*x, base);
            tape.mul(w, d)
        })
        .collect();
    let spread = tape.sum(&weighted);
    let out = tape.add(base, spread);
    let over = tape.value(out) - hi;
    if over > 0.0 {
        let c = tape.constant(over);
        return Ok(tape.sub(out, c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(tape: &mut Tape, xs: &[f64]) -> Vec<Var> {
        xs.iter().map(|x| tape.constant(*x)).collect()
    }

    #[test]
    fn temperature_validation() {
        assert!(SoftConfig::new(0.0).is_err());
        assert!(SoftConfig::new(-1.0).is_err());
        assert!(SoftConfig::new(f64::NAN).is_err());
        assert_eq!(SoftConfig::default().tau(), 0.1);
    }

    #[test]
    fn singletons_are_exact() {
        let mut t = Tape::new();
        let x = values(&mut t, &[0.5]);
        let m = softmin(&mut t, &x, 0.1).unwrap();
        assert_eq!(t.value(m), 0.5);
        let x = values(&mut t, &[0.3]);
        let m = softmax(&mut t, &x, 0.1).unwrap();
        assert_eq!(t.value(m), 0.3);
    }

    #[test]
    fn closed_forms() {
        let mut t = Tape::new();
        let x = values(&mut t, &[0.0, 1.0]);
        let m = softmin(&mut t, &x, 0.1).unwrap();
        let expected = -0.1 * (1.0 + (-10.0f64).exp()).ln();
        assert!((t.value(m) - expected).abs() < 1e-15);
        assert!((t.value(m) - -4.54e-6).abs() < 1e-8);

        let x = values(&mut t, &[0.0, 0.0]);
        let m = softmax(&mut t, &x, 0.1).unwrap();
        assert!((t.value(m) - 0.1 * 2f64.ln()).abs() < 1e-15);

        let x = values(&mut t, &[0.0, 1.0]);
        let p = conv_pool(&mut t, &x, &x, 0.1).unwrap();
        let e = 10f64.exp();
        assert!((t.value(p) - e / (1.0 + e)).abs() < 1e-15);
        assert!((t.value(p) - 0.99995).abs() < 1e-5);
    }

    #[test]
    fn conv_pool_of_constants() {
        let mut t = Tape::new();
        let x = values(&mut t, &[0.37; 5]);
        let z = values(&mut t, &[0.1, 0.9, -3.0, 0.0, 2.0]);
        let p = conv_pool(&mut t, &x, &z, 0.1).unwrap();
        assert_eq!(t.value(p), 0.37);
    }

    #[test]
    fn empty_and_mismatched() {
        let mut t = Tape::new();
        assert!(matches!(softmin(&mut t, &[], 0.1), Err(Error::Empty(_))));
        assert!(matches!(softmax(&mut t, &[], 0.1), Err(Error::Empty(_))));
        let x = values(&mut t, &[0.1, 0.2]);
        assert!(conv_pool(&mut t, &x, &x[..1], 0.1).is_err());
        assert!(conv_pool(&mut t, &[], &[], 0.1).is_err());
    }

    #[test]
    fn softmin_approaches_min_as_tau_shrinks() {
        let xs = [0.4, 0.2, 0.9, 0.21];
        let mut prev = f64::NEG_INFINITY;
        for tau in [1.0, 0.1, 0.01, 0.001, 1e-5] {
            let mut t = Tape::new();
            let x = values(&mut t, &xs);
            let m = softmin(&mut t, &x, tau).unwrap();
            let v = t.value(m);
            assert!(v <= 0.2 && v >= prev, "tau {tau}: {v}");
            prev = v;
        }
        assert!((prev - 0.2).abs() < 1e-4);
    }
}
