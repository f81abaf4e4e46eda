//! Built-in experiments: the epistemic toy, the trust ring, and Royal
//! Succession.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use super::oracle::CrispOracle;
use super::spec::{AxiomSpec, Built, FormulaSpec, InitSpec, ModelSpec, PropositionSpec, RelationKind, RelationSpec};
use crate::error::{Error, Result};
use crate::inference::{run_to_fixpoint, Fixpoint};
use crate::kripke::{Matrix, RegWeights};
use crate::learn::{evaluate_loss, structure_mse, train, LossParts, TrainHistory};
use crate::logic::{parse, Bounds, BoundsTable};

/// Trained model plus everything needed for export.
#[derive(Debug, Clone)]
pub struct Run {
    pub built: Built,
    pub history: TrainHistory,
    pub initial: LossParts<f64>,
    pub last: LossParts<f64>,
    /// Plain upward evaluation of the trained model.
    pub evaluation: BoundsTable<f64>,
    pub fixpoint: Fixpoint,
    pub seconds: f64,
}

/// Build, train (when there is anything to train), evaluate, and run the
/// fixpoint.
pub fn run_spec(spec: &ModelSpec) -> Result<Run> {
    let start = Instant::now();
    let mut built = spec.build()?;
    let cfg = built.train;
    let initial = evaluate_loss(&built.model, &built.axioms, &built.priors, &cfg)?;
    let history = if built.model.num_params() > 0 {
        train(&mut built.model, &built.axioms, &built.priors, &cfg)?
    } else {
        TrainHistory::default()
    };
    let last = evaluate_loss(&built.model, &built.axioms, &built.priors, &cfg)?;
    let evaluation = built.model.evaluate(cfg.inference.tau)?;
    let fixpoint = run_to_fixpoint(&built.model, &built.axioms, &cfg.inference)?;
    Ok(Run { built, history, initial, last, evaluation, fixpoint, seconds: start.elapsed().as_secs_f64() })
}

fn prop(name: &str, init: [f64; 2], states: &[(&str, [f64; 2])]) -> PropositionSpec {
    PropositionSpec {
        name: name.into(),
        init,
        states: states.iter().map(|(s, b)| (s.to_string(), *b)).collect(),
        learnable_logit: None,
    }
}

fn formula(name: &str, expr: &str) -> FormulaSpec {
    FormulaSpec { name: name.into(), expr: expr.into() }
}

fn axiom(formula: &str, state: &str, lower: f64, upper: f64) -> AxiomSpec {
    AxiomSpec { formula: formula.into(), state: state.into(), lower, upper }
}

const TRUE: [f64; 2] = [1.0, 1.0];
const FALSE: [f64; 2] = [0.0, 0.0];

// ---------------------------------------------------------------- toy

pub const TOY_WORLDS: [&str; 2] = ["A", "B"];
pub const TOY_TIMES: [&str; 3] = ["t0", "t1", "t2"];

/// Queries of the toy evaluation table: (formula name, state label).
pub const TOY_QUERIES: [(&str, &str); 7] = [
    ("possible_online", "A@t0"),
    ("knows_online", "A@t0"),
    ("always_online", "A@t0"),
    ("eventually_online", "A@t0"),
    ("always_online", "A@t2"),
    ("knows_always_online", "A@t0"),
    ("knows_online", "A@t1"),
];

/// Two agents over three time steps (states time-major: `A@t0, B@t0, A@t1,
/// ...`). `isOnline` fails at `A@t0` and `B@t1`. Time flows forward for both
/// agents; epistemic links may only join states at the same time and start
/// siloed. The single axiom asks agent A at t0 to consider an online state
/// possible.
pub fn epistemic_toy() -> ModelSpec {
    let mut s = ModelSpec::new(&TOY_WORLDS, Some(&TOY_TIMES));
    let n = TOY_WORLDS.len() * TOY_TIMES.len();
    let time = |i: usize| i / TOY_WORLDS.len();
    s.propositions.push(prop("isOnline", TRUE, &[("A@t0", FALSE), ("B@t1", FALSE)]));
    let temporal: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| if time(j) >= time(i) { 1.0 } else { 0.0 }).collect()).collect();
    s.relations.push(RelationSpec {
        name: "temporal".into(),
        kind: RelationKind::Fixed,
        init: InitSpec::Matrix(temporal),
        dim: None,
        mask: None,
        top_k: None,
        reg: None,
    });
    let same_time: Vec<Vec<u8>> = (0..n).map(|i| (0..n).map(|j| u8::from(time(i) == time(j))).collect()).collect();
    s.relations.push(RelationSpec {
        name: "epistemic".into(),
        kind: RelationKind::Logits,
        init: InitSpec::Constant { diagonal: 6.0, off_diagonal: -6.0 },
        dim: None,
        mask: Some(same_time),
        top_k: None,
        reg: None,
    });
    s.formulas = vec![
        formula("possible_online", "(diamond epistemic (atom isOnline))"),
        formula("knows_online", "(K (atom isOnline))"),
        formula("always_online", "(G (atom isOnline))"),
        formula("eventually_online", "(F (atom isOnline))"),
        formula("knows_always_online", "(K (G (atom isOnline)))"),
    ];
    s.axioms.push(axiom("possible_online", "A@t0", 1.0, 1.0));
    s.train.lr = 0.5;
    s.train.epochs = 32;
    s.train.beta = 1.0;
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct ToyReport {
    pub initial_contradiction: f64,
    pub final_contradiction: f64,
    pub a01: f64,
    pub a00: f64,
    /// Largest learned off-diagonal weight other than `Ã[0,1]`.
    pub max_other_off_diagonal: f64,
    pub queries: BTreeMap<String, [f64; 2]>,
    pub epistemic: Vec<Vec<f64>>,
    pub seconds: f64,
}

pub fn toy_report(run: &Run) -> Result<ToyReport> {
    let m = &run.built.model;
    let a = m.relations().by_name("epistemic")?.values();
    let n = a.n();
    let mut other: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && (i, j) != (0, 1) {
                other = other.max(*a.get(i, j));
            }
        }
    }
    let mut queries = BTreeMap::new();
    for (name, state) in TOY_QUERIES {
        let b = run.evaluation.at(m.formula(name)?, m.states().lookup(state)?);
        queries.insert(format!("{name}@{state}"), [b.lower, b.upper]);
    }
    Ok(ToyReport {
        initial_contradiction: run.initial.contradiction,
        final_contradiction: run.last.contradiction,
        a01: *a.get(0, 1),
        a00: *a.get(0, 0),
        max_other_off_diagonal: other,
        queries,
        epistemic: a.to_rows(),
        seconds: run.seconds,
    })
}

// ---------------------------------------------------------------- ring

/// Identity plus successor links.
pub fn ring_truth(n: usize) -> Matrix<f64> {
    Matrix::from_fn(n, |i, j| if j == i || j == (i + 1) % n { 1.0 } else { 0.0 })
}

fn agent(i: usize) -> String {
    format!("agent{i}")
}

/// `n` agents with one learnable trust relation. Agent `i` must find a
/// trusted source of `Beacon_i`, which only its successor holds, and must
/// agree with everyone it trusts on `Facts_i → Agreement_i`, which only its
/// predecessor violates. Seeded `N(0, 0.5²)` logits, top-k sparsified.
///
/// With `fixed_r`, the relation is instead frozen to seeded i.i.d.
/// uniform [0,1] weights.
pub fn ring(n: usize, k: usize, tau: f64, fixed_r: bool, seed: u64) -> Result<(ModelSpec, Matrix<f64>)> {
    if n < 3 {
        return Err(Error::Config(format!("ring needs at least 3 agents, got {n}")));
    }
    let names: Vec<String> = (0..n).map(agent).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut s = ModelSpec::new(&refs, None);
    for i in 0..n {
        let succ = agent((i + 1) % n);
        let pred = agent((i + n - 1) % n);
        s.propositions.push(prop(&format!("Beacon_{i}"), FALSE, &[(&succ, TRUE)]));
        s.propositions.push(prop(&format!("Facts_{i}"), TRUE, &[]));
        s.propositions.push(prop(&format!("Agreement_{i}"), TRUE, &[(&pred, FALSE)]));
    }
    s.relations.push(if fixed_r {
        RelationSpec {
            name: "trust".into(),
            kind: RelationKind::Fixed,
            init: InitSpec::Uniform { low: 0.0, high: 1.0 },
            dim: None,
            mask: None,
            top_k: None,
            reg: None,
        }
    } else {
        RelationSpec {
            name: "trust".into(),
            kind: RelationKind::Logits,
            init: InitSpec::Normal { mean: 0.0, std: 0.5 },
            dim: None,
            mask: None,
            top_k: Some(k),
            reg: Some(RegWeights { reflexive: 0.5, sparsity: 0.01, ..RegWeights::default() }),
        }
    });
    for i in 0..n {
        s.formulas.push(formula(
            &format!("consistency_{i}"),
            &format!("(box trust (implies (atom Facts_{i}) (atom Agreement_{i})))"),
        ));
        s.formulas.push(formula(&format!("expansion_{i}"), &format!("(diamond trust (atom Beacon_{i}))")));
        s.axioms.push(axiom(&format!("consistency_{i}"), &agent(i), 0.9, 1.0));
        s.axioms.push(axiom(&format!("expansion_{i}"), &agent(i), 0.9, 1.0));
    }
    s.train.lr = 0.05;
    s.train.epochs = if fixed_r { 1 } else { 300 };
    s.train.beta = 1.0;
    s.train.seed = seed;
    s.train.inference.tau = tau;
    Ok((s, ring_truth(n)))
}

#[derive(Debug, Clone, Serialize)]
pub struct RingReport {
    pub n: usize,
    pub k: Option<usize>,
    pub tau: f64,
    pub fixed_r: bool,
    pub mse: f64,
    pub contradiction: f64,
    pub a_succ: f64,
    pub a_skip: f64,
    pub seconds: f64,
}

pub fn ring_report(run: &Run, truth: &Matrix<f64>) -> Result<RingReport> {
    let rel = run.built.model.relations().by_name("trust")?;
    let a = rel.values();
    Ok(RingReport {
        n: a.n(),
        k: rel.top_k(),
        tau: run.built.train.inference.tau,
        fixed_r: !rel.is_learnable(),
        mse: structure_mse(&a, truth)?,
        contradiction: run.last.contradiction,
        a_succ: *a.get(0, 1),
        a_skip: *a.get(0, 2),
        seconds: run.seconds,
    })
}

// ---------------------------------------------------------------- royal

pub const ROYAL_WORLDS: [&str; 3] = ["present", "futureA", "futureB"];

/// Crown passes from monarch C to a child Y only if Y is alive in every
/// future the present can reach; W dies in `futureA`. Heirship starts
/// unknown and is settled by inference alone.
pub fn royal_succession() -> ModelSpec {
    let mut s = ModelSpec::new(&ROYAL_WORLDS, None);
    for p in ["isMonarch_C", "childOf_W", "childOf_H", "isAlive_H"] {
        s.propositions.push(prop(p, TRUE, &[]));
    }
    s.propositions.push(prop("isAlive_W", TRUE, &[("futureA", FALSE)]));
    for p in ["isHeir_W", "isHeir_H"] {
        s.propositions.push(prop(p, [0.0, 1.0], &[]));
    }
    s.relations.push(RelationSpec {
        name: "temporal".into(),
        kind: RelationKind::Fixed,
        init: InitSpec::Matrix(vec![vec![1.0, 1.0, 1.0], vec![0.0; 3], vec![0.0; 3]]),
        dim: None,
        mask: None,
        top_k: None,
        reg: None,
    });
    for y in ["W", "H"] {
        s.formulas.push(formula(
            &format!("succession_{y}"),
            &format!("(implies (and (atom isMonarch_C) (atom childOf_{y}) (box temporal (atom isAlive_{y}))) (atom isHeir_{y}))"),
        ));
        s.formulas.push(formula(
            &format!("necessity_{y}"),
            &format!("(implies (atom isHeir_{y}) (box temporal (atom isAlive_{y})))"),
        ));
        s.formulas.push(formula(&format!("always_alive_{y}"), &format!("(box temporal (atom isAlive_{y}))")));
        s.formulas.push(formula(&format!("heir_{y}"), &format!("(atom isHeir_{y})")));
    }
    for y in ["W", "H"] {
        s.axioms.push(axiom(&format!("succession_{y}"), "present", 1.0, 1.0));
        s.axioms.push(axiom(&format!("necessity_{y}"), "present", 1.0, 1.0));
    }
    // sharp enough that a box over three true successors reads as true
    s.train.inference.tau = 0.01;
    s
}

/// Heir assignments `(W, H)` at the present that satisfy every axiom in
/// the crisp model.
pub fn royal_oracle() -> Result<Vec<(bool, bool)>> {
    let spec = royal_succession();
    let temporal = Matrix::from_fn(3, |i, _| i == 0);
    let mut out = Vec::new();
    for w in [false, true] {
        for h in [false, true] {
            let mut o = CrispOracle::new(3).with_relation("temporal", temporal.clone())?;
            for p in ["isMonarch_C", "childOf_W", "childOf_H", "isAlive_H"] {
                o = o.with_atom(p, vec![true; 3])?;
            }
            o = o
                .with_atom("isAlive_W", vec![true, false, true])?
                .with_atom("isHeir_W", vec![w; 3])?
                .with_atom("isHeir_H", vec![h; 3])?;
            let mut ok = true;
            for a in &spec.axioms {
                let f = spec.formulas.iter().find(|f| f.name == a.formula).expect("axiom formula");
                ok &= o.crisp_check(&parse(&f.expr)?, 0)?;
            }
            if ok {
                out.push((w, h));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct RoyalReport {
    pub heir_w: Bounds<f64>,
    pub heir_h: Bounds<f64>,
    pub always_alive_w: Bounds<f64>,
    pub always_alive_h: Bounds<f64>,
    pub oracle_solutions: Vec<(bool, bool)>,
    pub verdict_w: bool,
    pub verdict_h: bool,
    pub oracle_agrees: bool,
    pub fixpoint_iterations: usize,
    pub converged: bool,
}

pub fn royal_report(run: &Run) -> Result<RoyalReport> {
    let m = &run.built.model;
    let at = |name: &str| -> Result<Bounds<f64>> { Ok(run.fixpoint.bounds.at(m.formula(name)?, 0)) };
    let (heir_w, heir_h) = (at("heir_W")?, at("heir_H")?);
    // a verdict needs the whole interval on one side
    let verdict_w = heir_w.lower >= 0.9;
    let verdict_h = heir_h.lower >= 0.9;
    let decided_w = verdict_w || heir_w.upper <= 0.1;
    let decided_h = verdict_h || heir_h.upper <= 0.1;
    let oracle_solutions = royal_oracle()?;
    let oracle_agrees = decided_w && decided_h && oracle_solutions == vec![(verdict_w, verdict_h)];
    Ok(RoyalReport {
        heir_w,
        heir_h,
        always_alive_w: at("always_alive_W")?,
        always_alive_h: at("always_alive_H")?,
        oracle_solutions,
        verdict_w,
        verdict_h,
        oracle_agrees,
        fixpoint_iterations: run.fixpoint.iterations,
        converged: run.fixpoint.converged,
    })
}
