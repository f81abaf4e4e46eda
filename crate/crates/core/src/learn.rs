//! Training objective and the epoch loop.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, Tape, Var};
use crate::error::{Error, Result};
use crate::inference::{contradiction_loss, fixpoint_on_tape, AxiomSet, InferenceConfig};
use crate::kripke::{regularize, Matrix, RegWeights, RelId};
use crate::logic::{eval_upward, FormulaId};
use crate::model::{Forward, Model};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the contradiction loss.
    pub beta: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Regularizer weights for relations without their own.
    pub reg: RegWeights,
    pub inference: InferenceConfig,
    /// Run the differentiable fixpoint instead of a single upward pass.
    pub downward_in_loop: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta: 1.0,
            lr: 0.01,
            epochs: 100,
            seed: 0,
            reg: RegWeights::default(),
            inference: InferenceConfig::default(),
            downward_in_loop: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        self.reg.validate()?;
        self.inference.validate()
    }
}

/// Squared-error pull of a formula's midpoint `(L+U)/2` toward `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior {
    pub formula: FormulaId,
    pub state: usize,
    pub target: f64,
    pub weight: f64,
}

/// Components of the total loss. Regularizers are weighted sums over
/// relations; `total = task + β·contradiction + Σ regularizers`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossParts<T> {
    pub total: T,
    pub task: T,
    pub contradiction: T,
    pub reg_t: T,
    pub reg_4: T,
    pub reg_s: T,
    pub sparsity: T,
}

impl LossParts<Var> {
    pub fn values(&self, tape: &Tape) -> LossParts<f64> {
        LossParts {
            total: tape.value(self.total),
            task: tape.value(self.task),
            contradiction: tape.value(self.contradiction),
            reg_t: tape.value(self.reg_t),
            reg_4: tape.value(self.reg_4),
            reg_s: tape.value(self.reg_s),
            sparsity: tape.value(self.sparsity),
        }
    }
}

/// Builds the full objective on `tape` from a fresh evaluation.
pub fn total_loss(
    tape: &mut Tape,
    model: &Model,
    fwd: &Forward,
    axioms: &AxiomSet,
    priors: &[Prior],
    cfg: &TrainConfig,
) -> Result<LossParts<Var>> {
    let table = if cfg.downward_in_loop {
        fixpoint_on_tape(tape, model, fwd, axioms, &cfg.inference)?.0
    } else {
        eval_upward(tape, model.arena(), &fwd.inputs, &model.all_formulas(), None, cfg.inference.tau)?
    };
    let contradiction = contradiction_loss(tape, &table, axioms);

    let mut task_terms = Vec::with_capacity(priors.len());
    for p in priors {
        let b = table.get(p.formula).ok_or_else(|| Error::UnknownFormula(format!("#{}", p.formula.0)))?;
        let b = b.get(p.state).ok_or_else(|| Error::UnknownState(format!("#{}", p.state)))?;
        let mid = tape.add(b.lower, b.upper);
        let mid = tape.scale(mid, 0.5);
        let d = tape.add_const(mid, -p.target);
        let sq = tape.mul(d, d);
        task_terms.push(tape.scale(sq, p.weight));
    }
    let task = tape.sum(&task_terms);

    let mut reg = [vec![], vec![], vec![], vec![]];
    for (id, _, a) in model.relations().iter() {
        if !a.is_learnable() {
            continue;
        }
        let w = model.reg(id).unwrap_or(cfg.reg);
        let terms = regularize(tape, &fwd.inputs.relations[id.0], &w);
        for (slot, (term, weight)) in [
            (terms.reflexive, w.reflexive),
            (terms.transitive, w.transitive),
            (terms.symmetric, w.symmetric),
            (terms.sparsity, w.sparsity),
        ]
        .into_iter()
        .enumerate()
        {
            if let Some(t) = term {
                reg[slot].push(tape.scale(t, weight));
            }
        }
    }
    let [rt, r4, rs, sp] = reg.map(|v| tape.sum(&v));

    let weighted = tape.scale(contradiction, cfg.beta);
    let total = tape.sum(&[task, weighted, rt, r4, rs, sp]);
    Ok(LossParts { total, task, contradiction, reg_t: rt, reg_4: r4, reg_s: rs, sparsity: sp })
}

/// Loss components of the current model without updating it.
pub fn evaluate_loss(model: &Model, axioms: &AxiomSet, priors: &[Prior], cfg: &TrainConfig) -> Result<LossParts<f64>> {
    let mut tape = Tape::new();
    let fwd = model.forward(&mut tape)?;
    Ok(total_loss(&mut tape, model, &fwd, axioms, priors, cfg)?.values(&tape))
}

/// A relation cell recorded every epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Watched {
    pub relation: RelId,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Losses at the start of the epoch, before the update.
    pub loss: LossParts<f64>,
    /// Watched entries after the update.
    pub watched: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub watched: Vec<Watched>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    /// `epoch,total,task,contradiction,reg_t,reg_4,reg_s,sparsity,<watched...>`
    pub fn to_csv(&self, model: &Model) -> String {
        let labels = model.states().labels();
        let mut out = String::from("epoch,total,task,contradiction,reg_t,reg_4,reg_s,sparsity");
        for w in &self.watched {
            let _ = write!(
                out,
                ",{}[{}->{}]",
                model.relations().name(w.relation),
                labels[w.from],
                labels[w.to]
            );
        }
        out.push('\n');
        for r in &self.epochs {
            let l = &r.loss;
            let _ = write!(out, "{}", r.epoch);
            for v in [l.total, l.task, l.contradiction, l.reg_t, l.reg_4, l.reg_s, l.sparsity].iter().chain(&r.watched) {
                let _ = write!(out, ",{}", crate::harness::fmt6(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Every cell of every learnable relation, or nothing above 32 states.
pub fn default_watch(model: &Model) -> Vec<Watched> {
    let n = model.n_states();
    if n > 32 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (id, _, a) in model.relations().iter() {
        if a.is_learnable() {
            for from in 0..n {
                for to in 0..n {
                    out.push(Watched { relation: id, from, to });
                }
            }
        }
    }
    out
}

fn snapshot(model: &Model, watched: &[Watched]) -> Vec<f64> {
    let mut cache: Vec<Option<Matrix<f64>>> = vec![None; model.relations().len()];
    watched
        .iter()
        .map(|w| {
            let m = cache[w.relation.0].get_or_insert_with(|| model.relations().get(w.relation).values());
            *m.get(w.from, w.to)
        })
        .collect()
}

/// Epochs of: refresh top-k masks, evaluate, backpropagate the total loss,
/// one Adam step over all parameters.
pub fn train(model: &mut Model, axioms: &AxiomSet, priors: &[Prior], cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    let mut history = TrainHistory { watched: default_watch(model), epochs: Vec::with_capacity(cfg.epochs) };
    let mut adam = Adam::new(cfg.lr, model.num_params());
    if model.num_params() == 0 && cfg.beta > 0.0 {
        let l = evaluate_loss(model, axioms, priors, cfg)?;
        if l.contradiction > 0.0 {
            return Err(Error::Config("model has no parameters but its axioms are unsatisfied".into()));
        }
    }
    for epoch in 1..=cfg.epochs {
        model.refresh_top_k()?;
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape)?;
        let parts = total_loss(&mut tape, model, &fwd, axioms, priors, cfg)?;
        let loss = parts.values(&tape);
        if !loss.total.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, detail: format!("{loss:?}") });
        }
        let grads = tape.backward(parts.total)?.collect(&fwd.params);
        if let Some(g) = grads.iter().find(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch, detail: format!("gradient {g}") });
        }
        let mut params = model.params();
        adam.step(&mut params, &grads)?;
        model.set_params(&params)?;
        history.epochs.push(EpochRecord { epoch, loss, watched: snapshot(model, &history.watched) });
    }
    model.refresh_top_k()?;
    Ok(history)
}

/// Mean squared difference over all cells.
pub fn structure_mse(a: &Matrix<f64>, truth: &Matrix<f64>) -> Result<f64> {
    if a.n() != truth.n() {
        return Err(Error::Dimension { what: "structure matrices".into(), expected: truth.n(), got: a.n() });
    }
    let n = a.as_slice().len();
    if n == 0 {
        return Err(Error::Empty("structure mse"));
    }
    let sse: f64 = a.as_slice().iter().zip(truth.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sse / n as f64)
}
