//! Modal neurons and real-valued connectives over truth bounds.

use std::str::FromStr;

use super::soft::{conv_pool, softmax, softmin};
use super::Bounds;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Weighted necessity at one state.
///
/// `row` is `Ã_{w,·}` and `child` holds the subformula's bounds at every
/// state. Each term is the implication `(1 - Ã_{w,w'}) + truth`; the lower
/// bound is a softmin over them and the upper bound a convex pool whose
/// selector prefers the small terms. Clamping happens after aggregation.
pub fn box_bounds(tape: &mut Tape, child: &[Bounds<Var>], row: &[Var], tau: f64) -> Result<Bounds<Var>> {
    check_shape(child, row)?;
    let mut lower_terms = Vec::with_capacity(row.len());
    let mut upper_terms = Vec::with_capacity(row.len());
    let mut selectors = Vec::with_capacity(row.len());
    for (a, b) in row.iter().zip(child) {
        let miss = tape.rsub_const(1.0, *a);
        lower_terms.push(tape.add(miss, b.lower));
        let u = tape.add(miss, b.upper);
        upper_terms.push(u);
        selectors.push(tape.neg(u));
    }
    let lower = softmin(tape, &lower_terms, tau)?;
    let upper = conv_pool(tape, &upper_terms, &selectors, tau)?;
    Ok(Bounds { lower: tape.clamp01(lower), upper: tape.clamp01(upper) })
}

/// Weighted possibility at one state: terms `Ã_{w,w'} + truth - 1`, upper
/// bound by softmax, lower bound by a convex pool selecting large terms.
pub fn diamond_bounds(tape: &mut Tape, child: &[Bounds<Var>], row: &[Var], tau: f64) -> Result<Bounds<Var>> {
    check_shape(child, row)?;
    let mut lower_terms = Vec::with_capacity(row.len());
    let mut upper_terms = Vec::with_capacity(row.len());
    for (a, b) in row.iter().zip(child) {
        let l = tape.add(*a, b.lower);
        lower_terms.push(tape.add_const(l, -1.0));
        let u = tape.add(*a, b.upper);
        upper_terms.push(tape.add_const(u, -1.0));
    }
    let lower = conv_pool(tape, &lower_terms, &lower_terms, tau)?;
    let upper = softmax(tape, &upper_terms, tau)?;
    Ok(Bounds { lower: tape.clamp01(lower), upper: tape.clamp01(upper) })
}

fn check_shape(child: &[Bounds<Var>], row: &[Var]) -> Result<()> {
    if child.len() != row.len() {
        return Err(Error::Dimension {
            what: "accessibility row vs child bounds".into(),
            expected: row.len(),
            got: child.len(),
        });
    }
    Ok(())
}

/// Classical connectives. Conjunction, disjunction and implication are
/// Łukasiewicz; `ImpliesProd` is `1 - a + ab`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Connective {
    Not,
    And,
    Or,
    Implies,
    ImpliesProd,
}

impl FromStr for Connective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "not" => Connective::Not,
            "and" => Connective::And,
            "or" => Connective::Or,
            "implies" => Connective::Implies,
            "implies_prod" => Connective::ImpliesProd,
            other => return Err(Error::Config(format!("unknown connective `{other}`"))),
        })
    }
}

/// Bounds of `kind(a, b)`; `b` is ignored for `Not`.
pub fn eval_connective(tape: &mut Tape, kind: Connective, a: Bounds<Var>, b: Bounds<Var>) -> Bounds<Var> {
    match kind {
        Connective::Not => Bounds { lower: tape.rsub_const(1.0, a.upper), upper: tape.rsub_const(1.0, a.lower) },
        Connective::And => {
            let l = tape.add(a.lower, b.lower);
            let l = tape.add_const(l, -1.0);
            let u = tape.add(a.upper, b.upper);
            let u = tape.add_const(u, -1.0);
            Bounds { lower: tape.max0(l), upper: tape.max0(u) }
        }
        Connective::Or => {
            let l = tape.add(a.lower, b.lower);
            let u = tape.add(a.upper, b.upper);
            Bounds { lower: tape.min1(l), upper: tape.min1(u) }
        }
        Connective::Implies => {
            let l = tape.rsub_const(1.0, a.upper);
            let l = tape.add(l, b.lower);
            let u = tape.rsub_const(1.0, a.lower);
            let u = tape.add(u, b.upper);
            Bounds { lower: tape.min1(l), upper: tape.min1(u) }
        }
        Connective::ImpliesProd => {
            let lower = product_implication(tape, a.upper, b.lower);
            let upper = product_implication(tape, a.lower, b.upper);
            Bounds { lower, upper }
        }
    }
}

fn product_implication(tape: &mut Tape, a: Var, b: Var) -> Var {
    let ab = tape.mul(a, b);
    let na = tape.rsub_const(1.0, a);
    tape.add(na, ab)
}
