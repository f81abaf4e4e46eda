//! Hash-consed formula DAG. Children are always interned before their
//! parents, so arena order is a valid evaluation order.

use std::collections::HashMap;

use super::neurons::Connective;
use super::syntax::Expr;
use crate::error::Result;
use crate::kripke::RelId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FormulaId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Box,
    Diamond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Atom(PropId),
    Not(FormulaId),
    Binary(Connective, FormulaId, FormulaId),
    Modal(Modality, RelId, FormulaId),
}

impl Node {
    pub fn children(&self) -> Vec<FormulaId> {
        match *self {
            Node::Atom(_) => vec![],
            Node::Not(f) | Node::Modal(_, _, f) => vec![f],
            Node::Binary(_, a, b) => vec![a, b],
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FormulaArena {
    nodes: Vec<Node>,
    index: HashMap<Node, FormulaId>,
}

impl FormulaArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: FormulaId) -> Node {
        self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = FormulaId> {
        (0..self.nodes.len()).map(FormulaId)
    }

    fn add(&mut self, node: Node) -> FormulaId {
        if let Some(id) = self.index.get(&node) {
            return *id;
        }
        let id = FormulaId(self.nodes.len());
        self.nodes.push(node);
        self.index.insert(node, id);
        id
    }

    /// Adds `expr` and all its subformulas, sharing structurally equal ones.
    pub fn intern(
        &mut self,
        expr: &Expr,
        prop: &impl Fn(&str) -> Result<PropId>,
        rel: &impl Fn(&str) -> Result<RelId>,
    ) -> Result<FormulaId> {
        let node = match expr {
            Expr::Atom(p) => Node::Atom(prop(p)?),
            Expr::Not(f) => Node::Not(self.intern(f, prop, rel)?),
            Expr::And(a, b) => self.binary(Connective::And, a, b, prop, rel)?,
            Expr::Or(a, b) => self.binary(Connective::Or, a, b, prop, rel)?,
            Expr::Implies(a, b) => self.binary(Connective::Implies, a, b, prop, rel)?,
            Expr::ImpliesProd(a, b) => self.binary(Connective::ImpliesProd, a, b, prop, rel)?,
            Expr::Box(r, f) => {
                let r = rel(r)?;
                Node::Modal(Modality::Box, r, self.intern(f, prop, rel)?)
            }
            Expr::Diamond(r, f) => {
                let r = rel(r)?;
                Node::Modal(Modality::Diamond, r, self.intern(f, prop, rel)?)
            }
        };
        Ok(self.add(node))
    }

    fn binary(
        &mut self,
        c: Connective,
        a: &Expr,
        b: &Expr,
        prop: &impl Fn(&str) -> Result<PropId>,
        rel: &impl Fn(&str) -> Result<RelId>,
    ) -> Result<Node> {
        let a = self.intern(a, prop, rel)?;
        let b = self.intern(b, prop, rel)?;
        Ok(Node::Binary(c, a, b))
    }

    /// Ids reachable from `roots`, in arena order.
    pub fn closure(&self, roots: &[FormulaId]) -> Vec<FormulaId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<FormulaId> = roots.to_vec();
        while let Some(id) = stack.pop() {
            if !std::mem::replace(&mut seen[id.0], true) {
                stack.extend(self.nodes[id.0].children());
            }
        }
        self.ids().filter(|id| seen[id.0]).collect()
    }
}
