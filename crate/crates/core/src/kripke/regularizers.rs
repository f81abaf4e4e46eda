//! Relational-axiom regularizers over a materialized `Ã`.

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Reflexivity: `Σ_i (1 - Ã_ii)`.
pub fn reg_t(tape: &mut Tape, a: &Matrix<Var>) -> Var {
    let terms: Vec<Var> = (0..a.n()).map(|i| tape.rsub_const(1.0, *a.get(i, i))).collect();
    tape.sum(&terms)
}

/// Soft transitivity: `Σ_ij max0((Ã²)_ij - Ã_ij)` with the plain matrix product.
pub fn reg_4(tape: &mut Tape, a: &Matrix<Var>) -> Var {
    let n = a.n();
    let mut terms = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let paths: Vec<Var> = (0..n).map(|k| tape.mul(*a.get(i, k), *a.get(k, j))).collect();
            let sq = tape.sum(&paths);
            let gap = tape.sub(sq, *a.get(i, j));
            terms.push(tape.max0(gap));
        }
    }
    tape.sum(&terms)
}

/// Symmetry: `Σ_{i<j} |Ã_ij - Ã_ji|`.
pub fn reg_s(tape: &mut Tape, a: &Matrix<Var>) -> Var {
    let n = a.n();
    let mut terms = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = tape.sub(*a.get(i, j), *a.get(j, i));
            terms.push(tape.abs(d));
        }
    }
    tape.sum(&terms)
}

/// L1 norm of the (non-negative) entries.
pub fn sparsity(tape: &mut Tape, a: &Matrix<Var>) -> Var {
    tape.sum(a.as_slice())
}

/// Per-relation regularizer weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegWeights {
    #[serde(default)]
    pub reflexive: f64,
    #[serde(default)]
    pub transitive: f64,
    #[serde(default)]
    pub symmetric: f64,
    #[serde(default)]
    pub sparsity: f64,
}

impl RegWeights {
    pub fn is_zero(&self) -> bool {
        *self == RegWeights::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("reflexive", self.reflexive),
            ("transitive", self.transitive),
            ("symmetric", self.symmetric),
            ("sparsity", self.sparsity),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config(format!("regularizer weight `{name}` must be >= 0, got {w}")));
            }
        }
        Ok(())
    }
}

/// Unweighted regularizer values; terms with zero weight are skipped and
/// left as `None`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RegTerms {
    pub reflexive: Option<Var>,
    pub transitive: Option<Var>,
    pub symmetric: Option<Var>,
    pub sparsity: Option<Var>,
}

pub fn regularize(tape: &mut Tape, a: &Matrix<Var>, w: &RegWeights) -> RegTerms {
    RegTerms {
        reflexive: (w.reflexive > 0.0).then(|| reg_t(tape, a)),
        transitive: (w.transitive > 0.0).then(|| reg_4(tape, a)),
        symmetric: (w.symmetric > 0.0).then(|| reg_s(tape, a)),
        sparsity: (w.sparsity > 0.0).then(|| sparsity(tape, a)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_tape(m: &Matrix<f64>, f: fn(&mut Tape, &Matrix<Var>) -> Var) -> f64 {
        let mut tape = Tape::new();
        let vars = m.map(|&x| tape.constant(x));
        let out = f(&mut tape, &vars);
        tape.value(out)
    }

    #[test]
    fn reflexivity() {
        assert_eq!(on_tape(&Matrix::identity(4), reg_t), 0.0);
        assert_eq!(on_tape(&Matrix::filled(4, 0.0), reg_t), 4.0);
        let m = Matrix::from_rows(vec![vec![0.5, 0.3], vec![0.9, 0.75]]).unwrap();
        assert!((on_tape(&m, reg_t) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn transitivity() {
        assert_eq!(on_tape(&Matrix::identity(4), reg_4), 0.0);
        // a->b->c without a->c
        let chain = Matrix::from_rows(vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        assert_eq!(on_tape(&chain, reg_4), 1.0);
        assert_eq!(on_tape(&Matrix::filled(3, 1.0), reg_4), 18.0);
    }

    #[test]
    fn symmetry() {
        let sym = Matrix::from_rows(vec![vec![0.2, 0.7], vec![0.7, 0.1]]).unwrap();
        assert_eq!(on_tape(&sym, reg_s), 0.0);
        let skew = Matrix::from_rows(vec![
            vec![1.0, 0.9, 0.4],
            vec![0.1, 1.0, 0.3],
            vec![0.4, 0.3, 1.0],
        ])
        .unwrap();
        assert!((on_tape(&skew, reg_s) - 0.8).abs() < 1e-15);
        assert_eq!(on_tape(&Matrix::filled(1, 0.3), reg_s), 0.0);
    }
}
