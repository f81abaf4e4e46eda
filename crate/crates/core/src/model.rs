//! A complete MLNN: states, proposition valuations, named relations, and the
//! formula DAG evaluated over them.

use std::collections::HashMap;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::kripke::{Accessibility, RegWeights, RelId, RelationRegistry, StateSpace};
use crate::logic::{eval_upward, Bounds, BoundsTable, Expr, FormulaArena, FormulaId, Inputs, Modality, Node, PropId};

/// Truth values of one proposition at every state.
#[derive(Debug, Clone, PartialEq)]
pub enum Valuation {
    Fixed(Vec<Bounds<f64>>),
    /// Point-valued and trainable: `L = U = sigmoid(logit_s)`.
    Learnable(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct Model {
    states: StateSpace,
    props: Vec<(String, Valuation)>,
    prop_index: HashMap<String, PropId>,
    relations: RelationRegistry,
    reg: Vec<Option<RegWeights>>,
    arena: FormulaArena,
    named: Vec<(String, FormulaId)>,
    named_index: HashMap<String, FormulaId>,
}

/// Tape leaves for one forward evaluation.
#[derive(Debug, Clone)]
pub struct Forward {
    pub inputs: Inputs,
    /// Parameters in [`Model::params`] order.
    pub params: Vec<Var>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Model {
    pub fn new(states: StateSpace) -> Self {
        Model {
            states,
            props: Vec::new(),
            prop_index: HashMap::new(),
            relations: RelationRegistry::new(),
            reg: Vec::new(),
            arena: FormulaArena::new(),
            named: Vec::new(),
            named_index: HashMap::new(),
        }
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    fn insert_prop(&mut self, name: &str, v: Valuation) -> Result<PropId> {
        if self.prop_index.contains_key(name) {
            return Err(Error::Duplicate { kind: "proposition", name: name.into() });
        }
        let id = PropId(self.props.len());
        self.props.push((name.to_string(), v));
        self.prop_index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_proposition(&mut self, name: &str, bounds: Vec<Bounds<f64>>) -> Result<PropId> {
        self.check_len("proposition bounds", bounds.len())?;
        if let Some(b) = bounds.iter().find(|b| !b.is_valid()) {
            return Err(Error::Config(format!("bounds of `{name}` outside [0,1]: {b:?}")));
        }
        self.insert_prop(name, Valuation::Fixed(bounds))
    }

    pub fn add_learnable_proposition(&mut self, name: &str, logits: Vec<f64>) -> Result<PropId> {
        self.check_len("proposition logits", logits.len())?;
        if let Some(x) = logits.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "proposition logit", value: *x });
        }
        self.insert_prop(name, Valuation::Learnable(logits))
    }

    fn check_len(&self, what: &str, got: usize) -> Result<()> {
        if got != self.n_states() {
            return Err(Error::Dimension { what: what.into(), expected: self.n_states(), got });
        }
        Ok(())
    }

    pub fn proposition(&self, name: &str) -> Result<PropId> {
        self.prop_index.get(name).copied().ok_or_else(|| Error::UnknownProposition(name.into()))
    }

    pub fn propositions(&self) -> impl Iterator<Item = (PropId, &str, &Valuation)> {
        self.props.iter().enumerate().map(|(i, (n, v))| (PropId(i), n.as_str(), v))
    }

    pub fn prop_name(&self, id: PropId) -> &str {
        &self.props[id.0].0
    }

    /// Current numeric bounds of a proposition.
    pub fn prop_bounds(&self, id: PropId) -> Vec<Bounds<f64>> {
        match &self.props[id.0].1 {
            Valuation::Fixed(b) => b.clone(),
            Valuation::Learnable(l) => l.iter().map(|x| Bounds::point(sigmoid(*x))).collect(),
        }
    }

    pub fn add_relation(&mut self, name: &str, rel: Accessibility) -> Result<RelId> {
        self.check_len(&format!("relation `{name}`"), rel.n())?;
        let id = self.relations.insert(name, rel)?;
        self.reg.push(None);
        Ok(id)
    }

    pub fn relations(&self) -> &RelationRegistry {
        &self.relations
    }

    pub fn relation_mut(&mut self, id: RelId) -> &mut Accessibility {
        self.relations.get_mut(id)
    }

    /// Per-relation regularizer weights overriding the training default.
    pub fn set_reg(&mut self, id: RelId, w: RegWeights) -> Result<()> {
        w.validate()?;
        self.reg[id.0] = Some(w);
        Ok(())
    }

    pub fn reg(&self, id: RelId) -> Option<RegWeights> {
        self.reg[id.0]
    }

    pub fn arena(&self) -> &FormulaArena {
        &self.arena
    }

    /// Adds an anonymous formula to the DAG.
    pub fn intern(&mut self, expr: &Expr) -> Result<FormulaId> {
        let props = &self.prop_index;
        let rels = &self.relations;
        self.arena.intern(
            expr,
            &|p| props.get(p).copied().ok_or_else(|| Error::UnknownProposition(p.into())),
            &|r| rels.id(r),
        )
    }

    /// Adds a named formula; resolution errors name the formula.
    pub fn add_formula(&mut self, name: &str, expr: &Expr) -> Result<FormulaId> {
        if self.named_index.contains_key(name) {
            return Err(Error::Duplicate { kind: "formula", name: name.into() });
        }
        let id = self
            .intern(expr)
            .map_err(|e| Error::InFormula { formula: name.into(), source: Box::new(e) })?;
        self.named.push((name.to_string(), id));
        self.named_index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn formula(&self, name: &str) -> Result<FormulaId> {
        self.named_index.get(name).copied().ok_or_else(|| Error::UnknownFormula(name.into()))
    }

    pub fn named_formulas(&self) -> &[(String, FormulaId)] {
        &self.named
    }

    /// Canonical s-expression of a DAG node.
    pub fn describe(&self, id: FormulaId) -> String {
        match self.arena.node(id) {
            Node::Atom(p) => format!("(atom {})", self.prop_name(p)),
            Node::Not(f) => format!("(not {})", self.describe(f)),
            Node::Binary(c, a, b) => {
                let op = match c {
                    crate::logic::Connective::Not => "not",
                    crate::logic::Connective::And => "and",
                    crate::logic::Connective::Or => "or",
                    crate::logic::Connective::Implies => "implies",
                    crate::logic::Connective::ImpliesProd => "implies_prod",
                };
                format!("({op} {} {})", self.describe(a), self.describe(b))
            }
            Node::Modal(m, r, f) => {
                let op = if m == Modality::Box { "box" } else { "diamond" };
                format!("({op} {} {})", self.relations.name(r), self.describe(f))
            }
        }
    }

    /// Every node in the DAG.
    pub fn all_formulas(&self) -> Vec<FormulaId> {
        self.arena.ids().collect()
    }

    pub fn num_params(&self) -> usize {
        let rel: usize = self.relations.iter().map(|(_, _, a)| a.num_params()).sum();
        let props: usize = self
            .props
            .iter()
            .map(|(_, v)| match v {
                Valuation::Learnable(l) => l.len(),
                Valuation::Fixed(_) => 0,
            })
            .sum();
        rel + props
    }

    /// Relation parameters in registry order, then learnable proposition logits.
    pub fn params(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.relations.iter().flat_map(|(_, _, a)| a.params()).collect();
        for (_, v) in &self.props {
            if let Valuation::Learnable(l) = v {
                out.extend_from_slice(l);
            }
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::LengthMismatch { what: "model parameters", left: self.num_params(), right: values.len() });
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "parameter", value: *x });
        }
        let mut rest = values;
        for (_, a) in self.relations.iter_mut() {
            let (head, tail) = rest.split_at(a.num_params());
            a.set_params(head)?;
            rest = tail;
        }
        for (_, v) in &mut self.props {
            if let Valuation::Learnable(l) = v {
                let (head, tail) = rest.split_at(l.len());
                l.copy_from_slice(head);
                rest = tail;
            }
        }
        Ok(())
    }

    pub fn refresh_top_k(&mut self) -> Result<()> {
        for (_, a) in self.relations.iter_mut() {
            a.refresh_top_k()?;
        }
        Ok(())
    }

    /// Places all relations and proposition bounds on `tape`.
    pub fn forward(&self, tape: &mut Tape) -> Result<Forward> {
        let mut params = Vec::with_capacity(self.num_params());
        let mut relations = Vec::with_capacity(self.relations.len());
        for (_, _, a) in self.relations.iter() {
            let m = a.materialize(tape)?;
            params.extend(m.params);
            relations.push(m.entries);
        }
        let mut atoms = Vec::with_capacity(self.props.len());
        for (_, v) in &self.props {
            atoms.push(match v {
                Valuation::Fixed(b) => b.iter().map(|b| b.map(|x| tape.constant(x))).collect(),
                Valuation::Learnable(l) => l
                    .iter()
                    .map(|x| {
                        let p = tape.param(*x)?;
                        params.push(p);
                        Ok(Bounds::point(tape.sigmoid(p)))
                    })
                    .collect::<Result<Vec<_>>>()?,
            });
        }
        Ok(Forward { inputs: Inputs { atoms, relations }, params })
    }

    /// One upward evaluation of the whole DAG, without stored bounds.
    pub fn evaluate(&self, tau: f64) -> Result<BoundsTable<f64>> {
        let mut tape = Tape::new();
        let fwd = self.forward(&mut tape)?;
        let t = eval_upward(&mut tape, &self.arena, &fwd.inputs, &self.all_formulas(), None, tau)?;
        Ok(t.values(&tape))
    }
}
