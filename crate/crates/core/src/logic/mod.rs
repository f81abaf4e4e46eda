//! Formulas, real-valued connectives, and the soft modal neurons.

mod arena;
mod eval;
mod neurons;
mod soft;
mod syntax;

pub use arena::{FormulaArena, FormulaId, Modality, Node, PropId};
pub use eval::{eval_upward, BoundsTable, Inputs};
pub use neurons::{box_bounds, diamond_bounds, eval_connective, Connective};
pub use soft::{conv_pool, softmax, softmin, SoftConfig};
pub use syntax::{parse, Expr, EPISTEMIC, TEMPORAL};

use serde::{Deserialize, Serialize};

/// A lower/upper truth-bound pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Copy> Bounds<T> {
    pub fn new(lower: T, upper: T) -> Self {
        Bounds { lower, upper }
    }

    pub fn point(v: T) -> Self {
        Bounds { lower: v, upper: v }
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> Bounds<U> {
        Bounds { lower: f(self.lower), upper: f(self.upper) }
    }
}

impl Bounds<f64> {
    pub const UNKNOWN: Bounds<f64> = Bounds { lower: 0.0, upper: 1.0 };

    pub fn is_contradictory(&self) -> bool {
        self.lower > self.upper
    }

    /// Both ends inside [0,1] and finite.
    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.lower) && (0.0..=1.0).contains(&self.upper)
    }
}
