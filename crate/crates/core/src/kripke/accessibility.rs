use std::collections::HashMap;

use super::Matrix;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// How the weighted relation is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Form {
    /// Frozen weights in [0,1]; crisp when every entry is 0 or 1.
    Fixed(Matrix<f64>),
    /// One logit per cell, `Ã_ij = sigmoid(logit_ij)`.
    Logits(Matrix<f64>),
    /// Per-state embeddings, `Ã_ij = sigmoid(h_i · h_j)`. Row-major `n x dim`.
    Metric { dim: usize, embeddings: Vec<f64> },
}

/// An accessibility relation over the state space, with optional static
/// mask and per-row top-k sparsification.
#[derive(Debug, Clone, PartialEq)]
pub struct Accessibility {
    n: usize,
    form: Form,
    mask: Option<Matrix<bool>>,
    top_k: Option<usize>,
    topk_mask: Option<Matrix<bool>>,
}

/// Relation entries on a tape plus the parameter leaves they depend on.
#[derive(Debug, Clone)]
pub struct Materialized {
    pub entries: Matrix<Var>,
    pub params: Vec<Var>,
}

impl Accessibility {
    pub fn fixed_crisp(r: &Matrix<bool>) -> Self {
        Accessibility::new(r.n(), Form::Fixed(r.map(|&b| if b { 1.0 } else { 0.0 })))
    }

    pub fn fixed_weighted(w: Matrix<f64>) -> Result<Self> {
        if let Some(bad) = w.as_slice().iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Config(format!("fixed relation weight {bad} outside [0,1]")));
        }
        Ok(Accessibility::new(w.n(), Form::Fixed(w)))
    }

    pub fn logits(logits: Matrix<f64>) -> Result<Self> {
        check_finite(logits.as_slice(), "logit")?;
        Ok(Accessibility::new(logits.n(), Form::Logits(logits)))
    }

    pub fn metric(n: usize, dim: usize, embeddings: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if embeddings.len() != n * dim {
            return Err(Error::Dimension {
                what: "metric embeddings".into(),
                expected: n * dim,
                got: embeddings.len(),
            });
        }
        check_finite(&embeddings, "embedding")?;
        Ok(Accessibility::new(n, Form::Metric { dim, embeddings }))
    }

    fn new(n: usize, form: Form) -> Self {
        Accessibility { n, form, mask: None, top_k: None, topk_mask: None }
    }

    pub fn with_mask(mut self, mask: Matrix<bool>) -> Result<Self> {
        if mask.n() != self.n {
            return Err(Error::Dimension {
                what: "accessibility mask".into(),
                expected: self.n,
                got: mask.n(),
            });
        }
        self.mask = Some(mask);
        Ok(self)
    }

    /// Enables per-row top-k sparsification. The mask is computed right away
    /// and again on every [`Accessibility::refresh_top_k`].
    pub fn with_top_k(mut self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n {
            return Err(Error::TopK { k, n: self.n });
        }
        self.top_k = Some(k);
        self.refresh_top_k()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn form(&self) -> &Form {
        &self.form
    }

    pub fn mask(&self) -> Option<&Matrix<bool>> {
        self.mask.as_ref()
    }

    pub fn top_k(&self) -> Option<usize> {
        self.top_k
    }

    pub fn is_learnable(&self) -> bool {
        !matches!(self.form, Form::Fixed(_))
    }

    pub fn is_crisp(&self) -> bool {
        match &self.form {
            Form::Fixed(w) => w.as_slice().iter().all(|&x| x == 0.0 || x == 1.0),
            _ => false,
        }
    }

    pub fn num_params(&self) -> usize {
        match &self.form {
            Form::Fixed(_) => 0,
            Form::Logits(l) => l.as_slice().len(),
            Form::Metric { embeddings, .. } => embeddings.len(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match &self.form {
            Form::Fixed(_) => Vec::new(),
            Form::Logits(l) => l.as_slice().to_vec(),
            Form::Metric { embeddings, .. } => embeddings.clone(),
        }
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::LengthMismatch {
                what: "relation parameters",
                left: self.num_params(),
                right: values.len(),
            });
        }
        check_finite(values, "parameter")?;
        match &mut self.form {
            Form::Fixed(_) => {}
            Form::Logits(l) => *l = Matrix { n: l.n(), data: values.to_vec() },
            Form::Metric { embeddings, .. } => embeddings.copy_from_slice(values),
        }
        Ok(())
    }

    /// Pre-sigmoid scores: the logits, or the embedding inner products.
    pub fn scores(&self) -> Matrix<f64> {
        match &self.form {
            Form::Fixed(w) => w.clone(),
            Form::Logits(l) => l.clone(),
            Form::Metric { dim, embeddings } => {
                let d = *dim;
                Matrix::from_fn(self.n, |i, j| {
                    (0..d).map(|k| embeddings[i * d + k] * embeddings[j * d + k]).sum()
                })
            }
        }
    }

    pub fn refresh_top_k(&mut self) -> Result<()> {
        if let Some(k) = self.top_k {
            let mut scores = self.scores();
            if let Some(m) = &self.mask {
                // statically excluded cells never win a slot
                for i in 0..self.n {
                    for j in 0..self.n {
                        if !m.get(i, j) && i != j {
                            scores.set(i, j, f64::NEG_INFINITY);
                        }
                    }
                }
            }
            self.topk_mask = Some(topk_mask(&scores, k)?);
        }
        Ok(())
    }

    /// Combined static and top-k mask, if any.
    pub fn effective_mask(&self) -> Option<Matrix<bool>> {
        match (&self.mask, &self.topk_mask) {
            (None, None) => None,
            (Some(m), None) | (None, Some(m)) => Some(m.clone()),
            (Some(a), Some(b)) => Some(Matrix::from_fn(self.n, |i, j| *a.get(i, j) && *b.get(i, j))),
        }
    }

    /// Builds `Ã` on the tape. Masked cells are constant zeros with no
    /// dependence on any parameter.
    pub fn materialize(&self, tape: &mut Tape) -> Result<Materialized> {
        let mask = self.effective_mask();
        let allowed = |i: usize, j: usize| mask.as_ref().is_none_or(|m| *m.get(i, j));
        let params: Vec<Var> = self
            .params()
            .into_iter()
            .map(|v| tape.param(v))
            .collect::<Result<_>>()?;
        let zero = tape.constant(0.0);
        let entries = match &self.form {
            Form::Fixed(w) => {
                Matrix::from_fn(self.n, |i, j| {
                    if allowed(i, j) {
                        tape.constant(*w.get(i, j))
                    } else {
                        zero
                    }
                })
            }
            Form::Logits(_) => Matrix::from_fn(self.n, |i, j| {
                if allowed(i, j) {
                    tape.sigmoid(params[i * self.n + j])
                } else {
                    zero
                }
            }),
            Form::Metric { dim, .. } => {
                let d = *dim;
                Matrix::from_fn(self.n, |i, j| {
                    if allowed(i, j) {
                        let prods: Vec<Var> =
                            (0..d).map(|k| tape.mul(params[i * d + k], params[j * d + k])).collect();
                        let dot = tape.sum(&prods);
                        tape.sigmoid(dot)
                    } else {
                        zero
                    }
                })
            }
        };
        Ok(Materialized { entries, params })
    }

    /// Numeric `Ã`.
    pub fn values(&self) -> Matrix<f64> {
        let mut tape = Tape::new();
        let m = self
            .materialize(&mut tape)
            .expect("stored parameters are finite by construction");
        m.entries.map(|v| tape.value(*v))
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().find(|x| !x.is_finite()) {
        Some(v) => Err(Error::NonFinite { what, value: *v }),
        None => Ok(()),
    }
}

/// Per-row mask keeping the `k` largest scores, ties to the lower column,
/// and always the diagonal.
pub fn topk_mask(scores: &Matrix<f64>, k: usize) -> Result<Matrix<bool>> {
    let n = scores.n();
    if k == 0 || k > n {
        return Err(Error::TopK { k, n });
    }
    let mut mask = Matrix::filled(n, false);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend(0..n);
        let row = scores.row(i);
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        for &j in order.iter().take(k) {
            mask.set(i, j, true);
        }
        mask.set(i, i, true);
    }
    Ok(mask)
}

/// Handle into a [`RelationRegistry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelId(pub usize);

/// Named accessibility relations.
#[derive(Debug, Clone, Default)]
pub struct RelationRegistry {
    names: Vec<String>,
    relations: Vec<Accessibility>,
    index: HashMap<String, RelId>,
}

impl RelationRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, rel: Accessibility) -> Result<RelId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Duplicate { kind: "relation", name });
        }
        let id = RelId(self.relations.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.relations.push(rel);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<RelId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn get(&self, id: RelId) -> &Accessibility {
        &self.relations[id.0]
    }

    pub fn get_mut(&mut self, id: RelId) -> &mut Accessibility {
        &mut self.relations[id.0]
    }

    pub fn by_name(&self, name: &str) -> Result<&Accessibility> {
        Ok(self.get(self.id(name)?))
    }

    pub fn name(&self, id: RelId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (RelId, &str, &Accessibility)> {
        self.relations
            .iter()
            .enumerate()
            .map(|(i, r)| (RelId(i), self.names[i].as_str(), r))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (RelId, &mut Accessibility)> {
        self.relations.iter_mut().enumerate().map(|(i, r)| (RelId(i), r))
    }
}
