//! Two-valued Kripke model checking, used as ground truth in tests.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kripke::{Form, Matrix};
use crate::logic::{Bounds, Expr};
use crate::model::{Model, Valuation};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrispOracle {
    n: usize,
    relations: HashMap<String, Matrix<bool>>,
    valuation: HashMap<String, Vec<bool>>,
}

impl CrispOracle {
    pub fn new(n: usize) -> Self {
        CrispOracle { n, ..Self::default() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn with_relation(mut self, name: &str, r: Matrix<bool>) -> Result<Self> {
        if r.n() != self.n {
            return Err(Error::Dimension { what: format!("relation `{name}`"), expected: self.n, got: r.n() });
        }
        self.relations.insert(name.into(), r);
        Ok(self)
    }

    pub fn with_atom(mut self, name: &str, truth: Vec<bool>) -> Result<Self> {
        if truth.len() != self.n {
            return Err(Error::Dimension { what: format!("valuation of `{name}`"), expected: self.n, got: truth.len() });
        }
        self.valuation.insert(name.into(), truth);
        Ok(self)
    }

    /// Crisp view of a model whose relations are fixed 0/1 matrices and whose
    /// propositions are point-valued 0/1.
    pub fn from_model(model: &Model) -> Result<Self> {
        let mut o = CrispOracle::new(model.n_states());
        for (_, name, a) in model.relations().iter() {
            match a.form() {
                Form::Fixed(_) if a.is_crisp() => {
                    let v = a.values();
                    o = o.with_relation(name, v.map(|x| *x == 1.0))?;
                }
                _ => return Err(Error::Config(format!("relation `{name}` is not crisp"))),
            }
        }
        for (id, name, v) in model.propositions() {
            let bounds = model.prop_bounds(id);
            let crisp = matches!(v, Valuation::Fixed(_))
                && bounds.iter().all(|b| b.lower == b.upper && (b.lower == 0.0 || b.lower == 1.0));
            if !crisp {
                return Err(Error::Config(format!("proposition `{name}` is not crisp")));
            }
            o = o.with_atom(name, bounds.iter().map(|b| b.lower == 1.0).collect())?;
        }
        Ok(o)
    }

    /// Classical satisfaction of `f` at `world`.
    pub fn crisp_check(&self, f: &Expr, world: usize) -> Result<bool> {
        if world >= self.n {
            return Err(Error::UnknownState(format!("#{world}")));
        }
        Ok(match f {
            Expr::Atom(p) => self.valuation.get(p).ok_or_else(|| Error::UnknownProposition(p.clone()))?[world],
            Expr::Not(x) => !self.crisp_check(x, world)?,
            Expr::And(a, b) => self.crisp_check(a, world)? & self.crisp_check(b, world)?,
            Expr::Or(a, b) => self.crisp_check(a, world)? | self.crisp_check(b, world)?,
            Expr::Implies(a, b) | Expr::ImpliesProd(a, b) => !self.crisp_check(a, world)? | self.crisp_check(b, world)?,
            Expr::Box(r, x) | Expr::Diamond(r, x) => {
                let rel = self.relations.get(r).ok_or_else(|| Error::UnknownRelation(r.clone()))?;
                let is_box = matches!(f, Expr::Box(..));
                let mut acc = is_box;
                for w2 in 0..self.n {
                    if *rel.get(world, w2) {
                        let v = self.crisp_check(x, w2)?;
                        acc = if is_box { acc & v } else { acc | v };
                    }
                }
                acc
            }
        })
    }

    /// Truth at every state as point bounds.
    pub fn truth(&self, f: &Expr) -> Result<Vec<Bounds<f64>>> {
        (0..self.n).map(|w| Ok(Bounds::point(if self.crisp_check(f, w)? { 1.0 } else { 0.0 }))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse;

    fn chain() -> CrispOracle {
        // 0 -> 1, 1 -> 2, 2 has no successors
        let r = Matrix::from_fn(3, |i, j| j == i + 1);
        CrispOracle::new(3)
            .with_relation("r", r)
            .unwrap()
            .with_atom("p", vec![false, true, false])
            .unwrap()
    }

    #[test]
    fn vacuous_box_and_existential_diamond() {
        let o = chain();
        assert!(o.crisp_check(&parse("(box r p)").unwrap(), 2).unwrap());
        assert!(!o.crisp_check(&parse("(diamond r p)").unwrap(), 2).unwrap());
        assert!(o.crisp_check(&parse("(diamond r p)").unwrap(), 0).unwrap());
        assert!(!o.crisp_check(&parse("(box r p)").unwrap(), 1).unwrap());
        assert!(o.crisp_check(&parse("(implies p (box r (not p)))").unwrap(), 1).unwrap());
    }

    #[test]
    fn unresolved_names() {
        let o = chain();
        assert!(matches!(o.crisp_check(&parse("q").unwrap(), 0), Err(Error::UnknownProposition(_))));
        assert!(matches!(o.crisp_check(&parse("(box s p)").unwrap(), 0), Err(Error::UnknownRelation(_))));
        assert!(o.crisp_check(&parse("p").unwrap(), 5).is_err());
    }
}
