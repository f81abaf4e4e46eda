//! Upward-downward fixed-point inference and the contradiction loss.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::logic::{eval_upward, Bounds, BoundsTable, Connective, FormulaId, Modality, Node};
use crate::model::{Forward, Model};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub max_iterations: usize,
    pub epsilon: f64,
    /// Links at or below this weight do not carry downward updates.
    pub theta: f64,
    pub tau: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { max_iterations: 100, epsilon: 1e-6, theta: 0.5, tau: 0.1 }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!("theta must lie in (0,1), got {}", self.theta)));
        }
        crate::logic::SoftConfig::new(self.tau)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateSel {
    All,
    One(usize),
}

impl StateSel {
    pub fn states(self, n: usize) -> std::ops::Range<usize> {
        match self {
            StateSel::All => 0..n,
            StateSel::One(s) => s..s + 1,
        }
    }
}

/// Asserted bounds `[lower, upper]` for a formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axiom {
    pub formula: FormulaId,
    pub states: StateSel,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AxiomSet {
    axioms: Vec<Axiom>,
}

impl AxiomSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, axiom: Axiom) -> Result<()> {
        if !(0.0..=1.0).contains(&axiom.lower) || !(0.0..=1.0).contains(&axiom.upper) {
            return Err(Error::Config(format!(
                "axiom bounds must lie in [0,1], got [{}, {}]",
                axiom.lower, axiom.upper
            )));
        }
        self.axioms.push(axiom);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Axiom> {
        self.axioms.iter()
    }

    pub fn len(&self) -> usize {
        self.axioms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axioms.is_empty()
    }

    pub fn formulas(&self) -> Vec<FormulaId> {
        self.axioms.iter().map(|a| a.formula).collect()
    }

    fn check(&self, model: &Model) -> Result<()> {
        for a in &self.axioms {
            if a.formula.0 >= model.arena().len() {
                return Err(Error::UnknownFormula(format!("#{}", a.formula.0)));
            }
            if let StateSel::One(s) = a.states {
                if s >= model.n_states() {
                    return Err(Error::UnknownState(format!("#{s}")));
                }
            }
        }
        Ok(())
    }
}

/// Starting store: atoms from the valuation, other nodes unknown, then the
/// axioms intersected in.
pub fn initial_store(tape: &mut Tape, model: &Model, fwd: &Forward, axioms: &AxiomSet) -> BoundsTable<Var> {
    let n = model.n_states();
    let mut store = BoundsTable::new(model.arena().len(), n);
    let (zero, one) = (tape.constant(0.0), tape.constant(1.0));
    for id in model.arena().ids() {
        let row = match model.arena().node(id) {
            Node::Atom(p) => fwd.inputs.atoms[p.0].clone(),
            _ => vec![Bounds::new(zero, one); n],
        };
        store.set(id, row);
    }
    for a in axioms.iter() {
        for s in a.states.states(n) {
            let b = store.at(a.formula, s);
            let l0 = tape.constant(a.lower);
            let u0 = tape.constant(a.upper);
            let b = Bounds::new(tape.max(b.lower, l0), tape.min(b.upper, u0));
            store.set_at(a.formula, s, b);
        }
    }
    store
}

/// Recomputes every node from its children and intersects with the store.
pub fn upward_pass(
    tape: &mut Tape,
    model: &Model,
    fwd: &Forward,
    store: &BoundsTable<Var>,
    tau: f64,
) -> Result<BoundsTable<Var>> {
    eval_upward(tape, model.arena(), &fwd.inputs, &model.all_formulas(), Some(store), tau)
}

fn raise(tape: &mut Tape, cur: Var, cand: Var) -> Var {
    let cand = tape.clamp01(cand);
    if tape.value(cand) > tape.value(cur) {
        cand
    } else {
        cur
    }
}

fn lower_to(tape: &mut Tape, cur: Var, cand: Var) -> Var {
    let cand = tape.clamp01(cand);
    if tape.value(cand) < tape.value(cur) {
        cand
    } else {
        cur
    }
}

/// Tightens children from their parents, visiting parents first. Never
/// loosens a bound. Product implication has no downward rule.
pub fn downward_pass(tape: &mut Tape, model: &Model, fwd: &Forward, store: &mut BoundsTable<Var>, theta: f64) {
    let n = model.n_states();
    for id in model.arena().ids().rev() {
        match model.arena().node(id) {
            Node::Atom(_) => {}
            Node::Not(f) => {
                for s in 0..n {
                    let p = store.at(id, s);
                    let c = store.at(f, s);
                    let l = tape.rsub_const(1.0, p.upper);
                    let u = tape.rsub_const(1.0, p.lower);
                    let b = Bounds::new(raise(tape, c.lower, l), lower_to(tape, c.upper, u));
                    store.set_at(f, s, b);
                }
            }
            Node::Binary(Connective::ImpliesProd, ..) => {}
            Node::Binary(Connective::Implies, a, b) => {
                for s in 0..n {
                    downward_implies(tape, store, id, a, b, s);
                }
            }
            Node::Binary(c, a, b) => {
                for s in 0..n {
                    downward_binary(tape, store, c, id, a, b, s);
                    if a != b {
                        downward_binary(tape, store, c, id, b, a, s);
                    }
                }
            }
            Node::Modal(m, r, f) => {
                let rel = &fwd.inputs.relations[r.0];
                for w in 0..n {
                    let p = store.at(id, w);
                    for w2 in 0..n {
                        let a = *rel.get(w, w2);
                        if tape.value(a) <= theta {
                            continue;
                        }
                        let c = store.at(f, w2);
                        // a partial link only passes on what survives the
                        // implication weighting: L_φ ≥ L_□ + Ã − 1, U_φ ≤ U_◇ + 1 − Ã
                        let b = match m {
                            Modality::Box => {
                                let t = tape.add(p.lower, a);
                                let cand = tape.add_const(t, -1.0);
                                Bounds::new(raise(tape, c.lower, cand), c.upper)
                            }
                            Modality::Diamond => {
                                let t = tape.sub(p.upper, a);
                                let cand = tape.add_const(t, 1.0);
                                Bounds::new(c.lower, lower_to(tape, c.upper, cand))
                            }
                        };
                        store.set_at(f, w2, b);
                    }
                }
            }
        }
    }
}

/// Inverse Łukasiewicz rules for operand `x` of the symmetric `parent = x ∘ y`.
fn downward_binary(
    tape: &mut Tape,
    store: &mut BoundsTable<Var>,
    c: Connective,
    parent: FormulaId,
    x: FormulaId,
    y: FormulaId,
    s: usize,
) {
    let p = store.at(parent, s);
    let (pl, pu) = (tape.value(p.lower), tape.value(p.upper));
    match c {
        Connective::And => {
            let (bx, by) = (store.at(x, s), store.at(y, s));
            let mut lx = bx.lower;
            if pl > 0.0 {
                let t = tape.sub(p.lower, by.upper);
                let cand = tape.add_const(t, 1.0);
                lx = raise(tape, lx, cand);
            }
            let t = tape.sub(p.upper, by.lower);
            let cand = tape.add_const(t, 1.0);
            let ux = lower_to(tape, bx.upper, cand);
            store.set_at(x, s, Bounds::new(lx, ux));
        }
        Connective::Or => {
            let (bx, by) = (store.at(x, s), store.at(y, s));
            let cand = tape.sub(p.lower, by.upper);
            let lx = raise(tape, bx.lower, cand);
            let mut ux = bx.upper;
            if pu < 1.0 {
                let cand = tape.sub(p.upper, by.lower);
                ux = lower_to(tape, ux, cand);
            }
            store.set_at(x, s, Bounds::new(lx, ux));
        }
        Connective::Not | Connective::Implies | Connective::ImpliesProd => {}
    }
}

fn downward_implies(tape: &mut Tape, store: &mut BoundsTable<Var>, parent: FormulaId, a: FormulaId, b: FormulaId, s: usize) {
    let p = store.at(parent, s);
    let pu = tape.value(p.upper);
    // consequent
    let (ba, bb) = (store.at(a, s), store.at(b, s));
    let t = tape.add(p.lower, ba.lower);
    let cand = tape.add_const(t, -1.0);
    let lb = raise(tape, bb.lower, cand);
    let mut ub = bb.upper;
    if pu < 1.0 {
        let t = tape.add(p.upper, ba.upper);
        let cand = tape.add_const(t, -1.0);
        ub = lower_to(tape, ub, cand);
    }
    store.set_at(b, s, Bounds::new(lb, ub));
    // antecedent
    let (ba, bb) = (store.at(a, s), store.at(b, s));
    let t = tape.sub(bb.upper, p.lower);
    let cand = tape.add_const(t, 1.0);
    let ua = lower_to(tape, ba.upper, cand);
    let mut la = ba.lower;
    if pu < 1.0 {
        let t = tape.sub(bb.lower, p.upper);
        let cand = tape.add_const(t, 1.0);
        la = raise(tape, la, cand);
    }
    store.set_at(a, s, Bounds::new(la, ua));
}

/// Outcome of [`run_to_fixpoint`].
#[derive(Debug, Clone)]
pub struct Fixpoint {
    pub bounds: BoundsTable<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest bound change in the final iteration.
    pub last_change: f64,
    /// Store after each iteration, when requested; entry 0 is the start.
    pub trace: Option<Vec<BoundsTable<f64>>>,
}

pub fn run_to_fixpoint(model: &Model, axioms: &AxiomSet, cfg: &InferenceConfig) -> Result<Fixpoint> {
    run_from(model, axioms, cfg, None, false)
}

/// Alternates upward and downward passes until no bound moves by `epsilon`
/// or the iteration cap is hit. Non-convergence is reported in the result.
pub fn run_from(
    model: &Model,
    axioms: &AxiomSet,
    cfg: &InferenceConfig,
    start: Option<&BoundsTable<f64>>,
    record_trace: bool,
) -> Result<Fixpoint> {
    cfg.validate()?;
    axioms.check(model)?;
    let mut prev: Option<BoundsTable<f64>> = start.cloned();
    let mut trace = record_trace.then(Vec::new);
    let mut out = Fixpoint {
        bounds: BoundsTable::new(0, 0),
        iterations: 0,
        converged: false,
        last_change: f64::INFINITY,
        trace: None,
    };
    for it in 1..=cfg.max_iterations {
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape)?;
        let store = match &prev {
            None => initial_store(&mut tape, model, &fwd, axioms),
            Some(p) => {
                let mut s = p.map(|x| tape.constant(x));
                reassert(&mut tape, &mut s, axioms);
                s
            }
        };
        let before = store.values(&tape);
        if let Some(t) = trace.as_mut() {
            if t.is_empty() {
                t.push(before.clone());
            }
        }
        let mut next = upward_pass(&mut tape, model, &fwd, &store, cfg.tau)?;
        downward_pass(&mut tape, model, &fwd, &mut next, cfg.theta);
        let after = next.values(&tape);
        let change = after.max_change(&before);
        if let Some(t) = trace.as_mut() {
            t.push(after.clone());
        }
        out.iterations = it;
        out.last_change = change;
        prev = Some(after);
        if change < cfg.epsilon {
            out.converged = true;
            break;
        }
    }
    out.bounds = prev.expect("at least one iteration");
    out.trace = trace;
    Ok(out)
}

fn reassert(tape: &mut Tape, store: &mut BoundsTable<Var>, axioms: &AxiomSet) {
    for a in axioms.iter() {
        for s in a.states.states(store.states()) {
            let b = store.at(a.formula, s);
            let l0 = tape.constant(a.lower);
            let u0 = tape.constant(a.upper);
            let b = Bounds::new(raise(tape, b.lower, l0), lower_to(tape, b.upper, u0));
            store.set_at(a.formula, s, b);
        }
    }
}

/// Differentiable fixpoint on a single tape, for training with the downward
/// pass in the loop. Returns the store and the iterations used.
pub fn fixpoint_on_tape(
    tape: &mut Tape,
    model: &Model,
    fwd: &Forward,
    axioms: &AxiomSet,
    cfg: &InferenceConfig,
) -> Result<(BoundsTable<Var>, usize)> {
    let mut store = initial_store(tape, model, fwd, axioms);
    for it in 1..=cfg.max_iterations {
        let before = store.values(tape);
        let mut next = upward_pass(tape, model, fwd, &store, cfg.tau)?;
        downward_pass(tape, model, fwd, &mut next, cfg.theta);
        let change = next.values(tape).max_change(&before);
        store = next;
        if change < cfg.epsilon {
            return Ok((store, it));
        }
    }
    Ok((store, cfg.max_iterations))
}

/// `Σ max0(L - U)` over every stored (node, state) plus, per axiom and
/// state, `max0(L0 - L) + max0(U - U0)`.
pub fn contradiction_loss(tape: &mut Tape, table: &BoundsTable<Var>, axioms: &AxiomSet) -> Var {
    let mut terms = Vec::new();
    for (_, row) in table.iter() {
        for b in row {
            if tape.value(b.lower) > tape.value(b.upper) {
                let d = tape.sub(b.lower, b.upper);
                terms.push(tape.max0(d));
            }
        }
    }
    for a in axioms.iter() {
        let Some(row) = table.get(a.formula) else { continue };
        for s in a.states.states(table.states()) {
            let b = row[s];
            let l = tape.rsub_const(a.lower, b.lower);
            terms.push(tape.max0(l));
            let u = tape.add_const(b.upper, -a.upper);
            terms.push(tape.max0(u));
        }
    }
    tape.sum(&terms)
}

/// Numeric counterpart of [`contradiction_loss`].
pub fn contradiction_value(table: &BoundsTable<f64>, axioms: &AxiomSet) -> f64 {
    let mut total = 0.0;
    for (_, row) in table.iter() {
        total += row.iter().map(|b| (b.lower - b.upper).max(0.0)).sum::<f64>();
    }
    for a in axioms.iter() {
        if let Some(row) = table.get(a.formula) {
            for s in a.states.states(table.states()) {
                total += (a.lower - row[s].lower).max(0.0) + (row[s].upper - a.upper).max(0.0);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kripke::{Accessibility, Matrix, StateSpace};
    use crate::logic::parse;

    fn model(rel: Matrix<f64>, p: &[Bounds<f64>]) -> Model {
        let names: Vec<String> = (0..p.len()).map(|i| format!("w{i}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut m = Model::new(StateSpace::worlds_only(&names).unwrap());
        m.add_proposition("p", p.to_vec()).unwrap();
        m.add_proposition("q", vec![Bounds::UNKNOWN; p.len()]).unwrap();
        m.add_relation("r", Accessibility::fixed_weighted(rel).unwrap()).unwrap();
        m
    }

    fn axiom(m: &mut Model, src: &str, state: usize, lower: f64, upper: f64) -> (FormulaId, AxiomSet) {
        let f = m.add_formula(src, &parse(src).unwrap()).unwrap();
        let mut ax = AxiomSet::new();
        ax.push(Axiom { formula: f, states: StateSel::One(state), lower, upper }).unwrap();
        (f, ax)
    }

    fn child_bounds(m: &Model, fx: &Fixpoint, src: &str) -> Vec<Bounds<f64>> {
        let id = m.arena().ids().find(|id| m.describe(*id) == src).unwrap();
        fx.bounds.get(id).unwrap().to_vec()
    }

    #[test]
    fn necessity_forces_successors() {
        let rel = Matrix::from_fn(3, |i, j| if i == 0 && j > 0 { 1.0 } else { 0.0 });
        let mut m = model(rel, &[Bounds::UNKNOWN; 3]);
        let (_, ax) = axiom(&mut m, "(box r q)", 0, 1.0, 1.0);
        let fx = run_to_fixpoint(&m, &ax, &InferenceConfig::default()).unwrap();
        assert!(fx.converged);
        let q = child_bounds(&m, &fx, "(atom q)");
        assert_eq!(q[1].lower, 1.0);
        assert_eq!(q[2].lower, 1.0);
        assert_eq!(q[0], Bounds::UNKNOWN);
    }

    #[test]
    fn impossibility_forces_falsity() {
        let rel = Matrix::from_fn(2, |_, _| 1.0);
        let mut m = model(rel, &[Bounds::UNKNOWN; 2]);
        let (_, ax) = axiom(&mut m, "(diamond r q)", 0, 0.0, 0.0);
        let fx = run_to_fixpoint(&m, &ax, &InferenceConfig::default()).unwrap();
        let q = child_bounds(&m, &fx, "(atom q)");
        assert!(q.iter().all(|b| b.upper == 0.0), "{q:?}");
    }

    #[test]
    fn weak_links_carry_nothing_down() {
        let rel = Matrix::filled(2, 0.3);
        let mut m = model(rel, &[Bounds::UNKNOWN; 2]);
        let (_, ax) = axiom(&mut m, "(box r q)", 0, 1.0, 1.0);
        let fx = run_to_fixpoint(&m, &ax, &InferenceConfig::default()).unwrap();
        let q = child_bounds(&m, &fx, "(atom q)");
        assert!(q.iter().all(|b| *b == Bounds::UNKNOWN));
    }

    #[test]
    fn partial_links_pass_on_discounted_bounds() {
        let rel = Matrix::from_rows(vec![vec![0.0, 0.8], vec![0.0, 0.0]]).unwrap();
        let mut m = model(rel, &[Bounds::UNKNOWN; 2]);
        let (_, ax) = axiom(&mut m, "(box r q)", 0, 1.0, 1.0);
        let fx = run_to_fixpoint(&m, &ax, &InferenceConfig::default()).unwrap();
        let q = child_bounds(&m, &fx, "(atom q)");
        assert!((q[1].lower - 0.8).abs() < 1e-12, "{q:?}");
    }

    #[test]
    fn self_loops_do_not_feed_back() {
        // a slightly leaky self link used to ratchet a false atom upwards
        let rel = Matrix::from_rows(vec![vec![0.99, 0.0], vec![0.0, 1.0]]).unwrap();
        let m0 = model(rel, &[Bounds::point(0.2), Bounds::point(1.0)]);
        let mut m = m0;
        m.add_formula("b", &parse("(box r p)").unwrap()).unwrap();
        let fx = run_to_fixpoint(&m, &AxiomSet::new(), &InferenceConfig::default()).unwrap();
        assert!(fx.converged && fx.iterations <= 3, "{} iterations", fx.iterations);
        let p = child_bounds(&m, &fx, "(atom p)");
        assert_eq!(p[0], Bounds::point(0.2));
    }

    #[test]
    fn modus_ponens() {
        let rel = Matrix::identity(1);
        let mut m = model(rel, &[Bounds::point(1.0)]);
        let (_, ax) = axiom(&mut m, "(implies p q)", 0, 1.0, 1.0);
        let fx = run_to_fixpoint(&m, &ax, &InferenceConfig::default()).unwrap();
        assert_eq!(child_bounds(&m, &fx, "(atom q)")[0], Bounds::point(1.0));
    }

    #[test]
    fn modus_tollens_and_conjunction_split() {
        let rel = Matrix::identity(1);
        let mut m = model(rel, &[Bounds::point(0.0)]);
        let (_, mut ax) = axiom(&mut m, "(implies q p)", 0, 1.0, 1.0);
        let f = m.add_formula("both", &parse("(and q q)").unwrap()).unwrap();
        ax.push(Axiom { formula: f, states: StateSel::All, lower: 0.0, upper: 1.0 }).unwrap();
        let fx = run_to_fixpoint(&m, &ax, &InferenceConfig::default()).unwrap();
        assert_eq!(child_bounds(&m, &fx, "(atom q)")[0], Bounds::point(0.0));
    }

    #[test]
    fn consistent_crisp_model_converges_fast() {
        let rel = Matrix::from_fn(3, |i, j| if j >= i { 1.0 } else { 0.0 });
        let mut m = model(rel, &[Bounds::point(1.0), Bounds::point(0.0), Bounds::point(1.0)]);
        let (_, ax) = axiom(&mut m, "(diamond r p)", 1, 1.0, 1.0);
        let fx = run_to_fixpoint(&m, &ax, &InferenceConfig { tau: 0.01, ..InferenceConfig::default() }).unwrap();
        assert!(fx.converged && fx.iterations <= 2);
        assert!(contradiction_value(&fx.bounds, &ax) < 1e-6);
    }

    #[test]
    fn rerun_is_stable() {
        let rel = Matrix::from_fn(3, |i, j| if (i + 1) % 3 == j { 1.0 } else { 0.2 });
        let mut m = model(rel, &[Bounds::new(0.2, 0.9), Bounds::point(0.7), Bounds::UNKNOWN]);
        let (_, ax) = axiom(&mut m, "(or (box r p) (diamond r q))", 2, 0.8, 1.0);
        let cfg = InferenceConfig::default();
        let fx = run_to_fixpoint(&m, &ax, &cfg).unwrap();
        assert!(fx.converged);
        let again = run_from(&m, &ax, &cfg, Some(&fx.bounds), false).unwrap();
        assert!(again.bounds.max_change(&fx.bounds) < cfg.epsilon);
    }

    #[test]
    fn contradiction_counts_gaps_and_hinges() {
        let rel = Matrix::identity(1);
        let mut m = model(rel, &[Bounds::point(0.25)]);
        let (f, ax) = axiom(&mut m, "p", 0, 1.0, 1.0);
        let mut table = BoundsTable::new(m.arena().len(), 1);
        table.set(f, vec![Bounds::new(0.75, 0.25)]);
        // gap 0.5, missing lower 0.25
        assert!((contradiction_value(&table, &ax) - 0.75).abs() < 1e-12);
        let mut tape = Tape::new();
        let t = table.map(|x| tape.constant(x));
        let v = contradiction_loss(&mut tape, &t, &ax);
        assert!((tape.value(v) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn axioms_are_validated() {
        let m = model(Matrix::identity(1), &[Bounds::point(1.0)]);
        let mut ax = AxiomSet::new();
        assert!(ax.push(Axiom { formula: FormulaId(0), states: StateSel::All, lower: 0.9, upper: 1.1 }).is_err());
        ax.push(Axiom { formula: FormulaId(40), states: StateSel::All, lower: 0.0, upper: 1.0 }).unwrap();
        assert!(run_to_fixpoint(&m, &ax, &InferenceConfig::default()).is_err());
        let bad = InferenceConfig { theta: 1.5, ..InferenceConfig::default() };
        assert!(run_to_fixpoint(&m, &AxiomSet::new(), &bad).is_err());
    }
}
