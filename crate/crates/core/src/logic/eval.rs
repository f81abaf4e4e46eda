//! Memoized upward evaluation over the formula DAG.

use super::arena::{FormulaArena, FormulaId, Modality, Node};
use super::neurons::{box_bounds, diamond_bounds, eval_connective, Connective};
use super::Bounds;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::kripke::Matrix;

/// Leaves of one forward evaluation: atom bounds per proposition and state,
/// and the materialized relation matrices indexed by `RelId`.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub atoms: Vec<Vec<Bounds<Var>>>,
    pub relations: Vec<Matrix<Var>>,
}

/// Bounds per (formula node, state); rows are absent for nodes not evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTable<T> {
    states: usize,
    rows: Vec<Option<Vec<Bounds<T>>>>,
}

impl<T: Copy> BoundsTable<T> {
    pub fn new(formulas: usize, states: usize) -> Self {
        BoundsTable { states, rows: vec![None; formulas] }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn formulas(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, id: FormulaId) -> Option<&[Bounds<T>]> {
        self.rows.get(id.0).and_then(|r| r.as_deref())
    }

    /// Bounds of an evaluated node. Panics if the node has no row.
    pub fn at(&self, id: FormulaId, state: usize) -> Bounds<T> {
        self.get(id).expect("formula not evaluated")[state]
    }

    pub fn set(&mut self, id: FormulaId, row: Vec<Bounds<T>>) {
        debug_assert_eq!(row.len(), self.states);
        self.rows[id.0] = Some(row);
    }

    pub fn set_at(&mut self, id: FormulaId, state: usize, b: Bounds<T>) {
        self.rows[id.0].as_mut().expect("formula not evaluated")[state] = b;
    }

    pub fn iter(&self) -> impl Iterator<Item = (FormulaId, &[Bounds<T>])> {
        self.rows.iter().enumerate().filter_map(|(i, r)| r.as_deref().map(|r| (FormulaId(i), r)))
    }

    pub fn map<U: Copy>(&self, mut f: impl FnMut(T) -> U) -> BoundsTable<U> {
        BoundsTable {
            states: self.states,
            rows: self
                .rows
                .iter()
                .map(|r| r.as_ref().map(|r| r.iter().map(|b| b.map(&mut f)).collect()))
                .collect(),
        }
    }
}

impl BoundsTable<f64> {
    /// Largest absolute change of any bound present in both tables.
    pub fn max_change(&self, other: &BoundsTable<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for (id, row) in self.iter() {
            if let Some(o) = other.get(id) {
                for (a, b) in row.iter().zip(o) {
                    worst = worst.max((a.lower - b.lower).abs()).max((a.upper - b.upper).abs());
                }
            }
        }
        worst
    }
}

impl BoundsTable<Var> {
    pub fn values(&self, tape: &Tape) -> BoundsTable<f64> {
        self.map(|v| tape.value(v))
    }
}

/// Evaluates every node reachable from `roots`, children first, each node
/// once per state.
///
/// With `prior`, every freshly computed bound is intersected with the stored
/// one (`L <- max(L_old, L_new)`, `U <- min(U_old, U_new)`) before parents
/// read it; `prior` must hold rows for the whole closure.
pub fn eval_upward(
    tape: &mut Tape,
    arena: &FormulaArena,
    inputs: &Inputs,
    roots: &[FormulaId],
    prior: Option<&BoundsTable<Var>>,
    tau: f64,
) -> Result<BoundsTable<Var>> {
    let states = inputs.relations.first().map(|m| m.n()).or_else(|| inputs.atoms.first().map(|a| a.len()));
    let states = states.ok_or(Error::Empty("model inputs"))?;
    let mut table = BoundsTable::new(arena.len(), states);
    for id in arena.closure(roots) {
        let mut row = match arena.node(id) {
            Node::Atom(p) => inputs
                .atoms
                .get(p.0)
                .ok_or_else(|| Error::UnknownProposition(format!("#{}", p.0)))?
                .clone(),
            Node::Not(f) => {
                let child = table.get(f).expect("child before parent");
                child.iter().map(|b| eval_connective(tape, Connective::Not, *b, *b)).collect()
            }
            Node::Binary(c, a, b) => {
                let (ra, rb) = (table.get(a).expect("child"), table.get(b).expect("child"));
                ra.iter().zip(rb).map(|(x, y)| eval_connective(tape, c, *x, *y)).collect()
            }
            Node::Modal(m, r, f) => {
                let rel = inputs.relations.get(r.0).ok_or_else(|| Error::UnknownRelation(format!("#{}", r.0)))?;
                if rel.n() != states {
                    return Err(Error::Dimension { what: "relation size".into(), expected: states, got: rel.n() });
                }
                let child = table.get(f).expect("child").to_vec();
                let mut out = Vec::with_capacity(states);
                for w in 0..states {
                    out.push(match m {
                        Modality::Box => box_bounds(tape, &child, rel.row(w), tau)?,
                        Modality::Diamond => diamond_bounds(tape, &child, rel.row(w), tau)?,
                    });
                }
                out
            }
        };
        if row.len() != states {
            return Err(Error::Dimension { what: "atom bounds".into(), expected: states, got: row.len() });
        }
        if let Some(old) = prior.and_then(|p| p.get(id)) {
            for (b, o) in row.iter_mut().zip(old) {
                *b = Bounds { lower: tape.max(o.lower, b.lower), upper: tape.min(o.upper, b.upper) };
            }
        }
        table.set(id, row);
    }
    Ok(table)
}
