//! Worlds, spacetime states, and accessibility relations.

mod accessibility;
mod regularizers;

pub use accessibility::{topk_mask, Accessibility, Form, Materialized, RelId, RelationRegistry};
pub use regularizers::{reg_4, reg_s, reg_t, regularize, sparsity, RegTerms, RegWeights};

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Clone> Matrix<T> {
    pub fn filled(n: usize, value: T) -> Self {
        Matrix { n, data: vec![value; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    what: "matrix row".into(),
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(Matrix { n, data })
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Matrix<U> {
        Matrix { n: self.n, data: self.data.iter().map(f).collect() }
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.n.max(1)).map(|c| c.to_vec()).collect()
    }
}

impl<T> Matrix<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl Matrix<f64> {
    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }
}

/// Worlds, optionally crossed with discrete time steps.
///
/// With time present the states are ordered time-major: state
/// `t * |W| + w` is world `w` at time `t`, labelled `"{world}@{time}"`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    worlds: Vec<String>,
    times: Option<Vec<String>>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl StateSpace {
    pub fn new(worlds: Vec<String>, times: Option<Vec<String>>) -> Result<Self> {
        if worlds.is_empty() {
            return Err(Error::Config("at least one world is required".into()));
        }
        if matches!(&times, Some(t) if t.is_empty()) {
            return Err(Error::Config("time list must be non-empty when given".into()));
        }
        let labels: Vec<String> = match &times {
            None => worlds.clone(),
            Some(ts) => ts
                .iter()
                .flat_map(|t| worlds.iter().map(move |w| format!("{w}@{t}")))
                .collect(),
        };
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Duplicate { kind: "state", name: l.clone() });
            }
        }
        Ok(StateSpace { worlds, times, labels, index })
    }

    pub fn worlds_only(worlds: &[&str]) -> Result<Self> {
        StateSpace::new(worlds.iter().map(|s| s.to_string()).collect(), None)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn worlds(&self) -> &[String] {
        &self.worlds
    }

    pub fn times(&self) -> Option<&[String]> {
        self.times.as_deref()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, s: usize) -> &str {
        &self.labels[s]
    }

    pub fn lookup(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }

    /// State index of world `w` at time `t` (time ignored when atemporal).
    pub fn state(&self, w: usize, t: usize) -> usize {
        match &self.times {
            None => w,
            Some(_) => t * self.worlds.len() + w,
        }
    }

    /// (world, time) indices of a state.
    pub fn coords(&self, s: usize) -> (usize, usize) {
        match &self.times {
            None => (s, 0),
            Some(_) => (s % self.worlds.len(), s / self.worlds.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacetime_is_time_major() {
        let s = StateSpace::new(
            vec!["A".into(), "B".into()],
            Some(vec!["t0".into(), "t1".into(), "t2".into()]),
        )
        .unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.label(1), "B@t0");
        assert_eq!(s.label(4), "A@t2");
        assert_eq!(s.state(1, 1), 3);
        assert_eq!(s.coords(5), (1, 2));
        assert_eq!(s.lookup("B@t1").unwrap(), 3);
        assert!(s.lookup("C@t0").is_err());
    }

    #[test]
    fn plain_worlds() {
        let s = StateSpace::worlds_only(&["x", "y", "z"]).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.state(2, 7), 2);
        assert!(StateSpace::worlds_only(&["x", "x"]).is_err());
        assert!(StateSpace::new(vec![], None).is_err());
    }

    #[test]
    fn matrix_rows() {
        let m = Matrix::from_rows(vec![vec![1, 2], vec![3, 4]]).unwrap();
        assert_eq!(m.row(1), &[3, 4]);
        assert_eq!(*m.get(0, 1), 2);
        assert!(Matrix::from_rows(vec![vec![1, 2], vec![3]]).is_err());
        assert_eq!(m.to_rows(), vec![vec![1, 2], vec![3, 4]]);
    }
}
