//! Scenarios, model files, result export, and the crisp oracle.

mod format;
mod oracle;
mod results;
pub mod scenarios;
mod spec;

pub use format::fmt6;
pub use oracle::CrispOracle;
pub use results::{accessibility_csv, bounds_csv, save_results};
pub use scenarios::{run_spec, Run};
pub use spec::{
    load_model, save_model, AxiomSpec, Built, FormulaSpec, InitSpec, ModelSpec, PriorSpec, PropositionSpec,
    RelationKind, RelationSpec, DEFAULT_DIM, SCHEMA,
};
