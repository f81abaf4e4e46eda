//! Declarative model files (`mlnn-spec/1`).

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{Axiom, AxiomSet, StateSel};
use crate::kripke::{Accessibility, Matrix, RegWeights, StateSpace};
use crate::learn::{Prior, TrainConfig};
use crate::logic::{parse, Bounds};
use crate::model::Model;

pub const SCHEMA: &str = "mlnn-spec/1";

/// Default embedding width for metric relations.
pub const DEFAULT_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub schema: String,
    pub worlds: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<String>>,
    pub propositions: Vec<PropositionSpec>,
    #[serde(default)]
    pub relations: Vec<RelationSpec>,
    #[serde(default)]
    pub formulas: Vec<FormulaSpec>,
    #[serde(default)]
    pub axioms: Vec<AxiomSpec>,
    #[serde(default)]
    pub priors: Vec<PriorSpec>,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropositionSpec {
    pub name: String,
    /// `[L, U]` at every state not listed in `states`.
    #[serde(default = "unknown_bounds")]
    pub init: [f64; 2],
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub states: BTreeMap<String, [f64; 2]>,
    /// Makes the proposition point-valued and trainable from this logit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learnable_logit: Option<f64>,
}

fn unknown_bounds() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Fixed,
    Logits,
    Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Explicit values: weights, logits, or `n x dim` embeddings.
    Matrix(Vec<Vec<f64>>),
    Constant { diagonal: f64, off_diagonal: f64 },
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationSpec {
    pub name: String,
    pub kind: RelationKind,
    pub init: InitSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// 0/1 matrix of statically allowed links.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg: Option<RegWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaSpec {
    pub name: String,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxiomSpec {
    pub formula: String,
    /// A state label, or `"all"`.
    pub state: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub formula: String,
    pub state: String,
    pub target: f64,
    #[serde(default = "unit")]
    pub weight: f64,
}

fn unit() -> f64 {
    1.0
}

/// A model ready to evaluate or train.
#[derive(Debug, Clone)]
pub struct Built {
    pub model: Model,
    pub axioms: AxiomSet,
    pub priors: Vec<Prior>,
    pub train: TrainConfig,
}

impl ModelSpec {
    pub fn new(worlds: &[&str], times: Option<&[&str]>) -> Self {
        ModelSpec {
            schema: SCHEMA.into(),
            worlds: worlds.iter().map(|s| s.to_string()).collect(),
            times: times.map(|t| t.iter().map(|s| s.to_string()).collect()),
            propositions: Vec::new(),
            relations: Vec::new(),
            formulas: Vec::new(),
            axioms: Vec::new(),
            priors: Vec::new(),
            train: TrainConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text)?;
        if spec.schema != SCHEMA {
            return Err(Error::Schema(format!("expected schema `{SCHEMA}`, found `{}`", spec.schema)));
        }
        Ok(spec)
    }

    /// Pretty JSON with a trailing newline; stable under load/save.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn state_space(&self) -> Result<StateSpace> {
        StateSpace::new(self.worlds.clone(), self.times.clone())
    }

    /// Resolves every name and samples initial parameters from `train.seed`.
    pub fn build(&self) -> Result<Built> {
        if self.schema != SCHEMA {
            return Err(Error::Schema(format!("expected schema `{SCHEMA}`, found `{}`", self.schema)));
        }
        self.train.validate()?;
        let states = self.state_space()?;
        let n = states.len();
        let mut model = Model::new(states.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(self.train.seed);

        for p in &self.propositions {
            let ctx = |e: Error| Error::Schema(format!("proposition `{}`: {e}", p.name));
            match p.learnable_logit {
                Some(logit) => {
                    model.add_learnable_proposition(&p.name, vec![logit; n]).map_err(ctx)?;
                }
                None => {
                    let mut row = vec![Bounds::new(p.init[0], p.init[1]); n];
                    for (label, b) in &p.states {
                        row[states.lookup(label).map_err(ctx)?] = Bounds::new(b[0], b[1]);
                    }
                    model.add_proposition(&p.name, row).map_err(ctx)?;
                }
            }
        }

        for r in &self.relations {
            let ctx = |e: Error| Error::Schema(format!("relation `{}`: {e}", r.name));
            let acc = build_relation(r, n, &mut rng).map_err(ctx)?;
            let id = model.add_relation(&r.name, acc).map_err(ctx)?;
            if let Some(w) = r.reg {
                model.set_reg(id, w).map_err(ctx)?;
            }
        }

        for f in &self.formulas {
            let expr = parse(&f.expr).map_err(|e| Error::InFormula { formula: f.name.clone(), source: Box::new(e) })?;
            model.add_formula(&f.name, &expr)?;
        }

        let mut axioms = AxiomSet::new();
        for a in &self.axioms {
            let formula = model.formula(&a.formula)?;
            let states = if a.state == "all" { StateSel::All } else { StateSel::One(states.lookup(&a.state)?) };
            axioms.push(Axiom { formula, states, lower: a.lower, upper: a.upper })?;
        }

        let mut priors = Vec::new();
        for p in &self.priors {
            if !(p.weight.is_finite() && p.weight >= 0.0 && p.target.is_finite()) {
                return Err(Error::Config(format!("prior on `{}` needs finite target and weight >= 0", p.formula)));
            }
            priors.push(Prior {
                formula: model.formula(&p.formula)?,
                state: states.lookup(&p.state)?,
                target: p.target,
                weight: p.weight,
            });
        }

        model.refresh_top_k()?;
        Ok(Built { model, axioms, priors, train: self.train })
    }
}

fn square(rows: &[Vec<f64>], n: usize) -> Result<Matrix<f64>> {
    let m = Matrix::from_rows(rows.to_vec())?;
    if m.n() != n {
        return Err(Error::Dimension { what: "relation matrix".into(), expected: n, got: m.n() });
    }
    Ok(m)
}

fn sample_square(init: &InitSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix<f64>> {
    Ok(match init {
        InitSpec::Matrix(rows) => square(rows, n)?,
        InitSpec::Constant { diagonal, off_diagonal } => {
            Matrix::from_fn(n, |i, j| if i == j { *diagonal } else { *off_diagonal })
        }
        InitSpec::Normal { mean, std } => {
            let d = Normal::new(*mean, *std).map_err(|e| Error::Config(format!("normal init: {e}")))?;
            let v: Vec<f64> = (0..n * n).map(|_| d.sample(rng)).collect();
            Matrix::from_fn(n, |i, j| v[i * n + j])
        }
        InitSpec::Uniform { low, high } => {
            if !(low < high) {
                return Err(Error::Config(format!("uniform init needs low < high, got [{low}, {high})")));
            }
            let v: Vec<f64> = (0..n * n).map(|_| rng.random_range(*low..*high)).collect();
            Matrix::from_fn(n, |i, j| v[i * n + j])
        }
    })
}

fn build_relation(r: &RelationSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Accessibility> {
    let mut acc = match r.kind {
        RelationKind::Fixed => {
            if matches!(r.init, InitSpec::Normal { .. }) {
                return Err(Error::Config("fixed relations cannot use a normal init".into()));
            }
            Accessibility::fixed_weighted(sample_square(&r.init, n, rng)?)?
        }
        RelationKind::Logits => Accessibility::logits(sample_square(&r.init, n, rng)?)?,
        RelationKind::Metric => {
            let dim = r.dim.unwrap_or(DEFAULT_DIM);
            let emb: Vec<f64> = match &r.init {
                InitSpec::Matrix(rows) => {
                    if rows.len() != n || rows.iter().any(|row| row.len() != dim) {
                        return Err(Error::Dimension { what: "embedding rows".into(), expected: n, got: rows.len() });
                    }
                    rows.concat()
                }
                InitSpec::Normal { mean, std } => {
                    let d = Normal::new(*mean, *std).map_err(|e| Error::Config(format!("normal init: {e}")))?;
                    (0..n * dim).map(|_| d.sample(rng)).collect()
                }
                InitSpec::Uniform { low, high } => {
                    if !(low < high) {
                        return Err(Error::Config(format!("uniform init needs low < high, got [{low}, {high})")));
                    }
                    (0..n * dim).map(|_| rng.random_range(*low..*high)).collect()
                }
                InitSpec::Constant { .. } => {
                    return Err(Error::Config("metric relations need matrix, normal or uniform init".into()))
                }
            };
            Accessibility::metric(n, dim, emb)?
        }
    };
    if let Some(rows) = &r.mask {
        let m = Matrix::from_rows(rows.clone())?;
        if let Some(bad) = m.as_slice().iter().find(|x| **x > 1) {
            return Err(Error::Config(format!("mask entries must be 0 or 1, got {bad}")));
        }
        acc = acc.with_mask(m.map(|x| *x == 1))?;
    }
    if let Some(k) = r.top_k {
        acc = acc.with_top_k(k)?;
    }
    Ok(acc)
}

pub fn load_model(path: &Path) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path)?;
    ModelSpec::from_json(&text)
}

pub fn save_model(spec: &ModelSpec, path: &Path) -> Result<()> {
    std::fs::write(path, spec.to_json()?)?;
    Ok(())
}
