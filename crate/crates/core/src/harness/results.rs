//! Result export: bounds, accessibility matrices, training history, summary.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::format::fmt6;
use crate::error::Result;
use crate::learn::TrainHistory;
use crate::logic::BoundsTable;
use crate::model::Model;

/// `formula,state,lower,upper` for every named formula, then every
/// proposition as `(atom p)`.
pub fn bounds_csv(model: &Model, bounds: &BoundsTable<f64>) -> String {
    let labels = model.states().labels();
    let mut out = String::from("formula,state,lower,upper\n");
    for (name, id) in model.named_formulas() {
        if let Some(row) = bounds.get(*id) {
            for (s, b) in row.iter().enumerate() {
                let _ = writeln!(out, "{name},{},{},{}", labels[s], fmt6(b.lower), fmt6(b.upper));
            }
        }
    }
    for (id, name, _) in model.propositions() {
        for (s, b) in model.prop_bounds(id).iter().enumerate() {
            let _ = writeln!(out, "(atom {name}),{},{},{}", labels[s], fmt6(b.lower), fmt6(b.upper));
        }
    }
    out
}

/// One block per relation: rows are source states, columns target states.
pub fn accessibility_csv(model: &Model) -> String {
    let labels = model.states().labels();
    let mut out = String::from("relation,from");
    for l in labels {
        let _ = write!(out, ",{l}");
    }
    out.push('\n');
    for (_, name, a) in model.relations().iter() {
        let v = a.values();
        for (i, l) in labels.iter().enumerate() {
            let _ = write!(out, "{name},{l}");
            for x in v.row(i) {
                let _ = write!(out, ",{}", fmt6(*x));
            }
            out.push('\n');
        }
    }
    out
}

/// Writes `bounds.csv`, `accessibility.csv`, `history.csv` and
/// `summary.json` into `dir`, creating it if needed.
pub fn save_results(
    dir: &Path,
    model: &Model,
    bounds: &BoundsTable<f64>,
    history: &TrainHistory,
    summary: &impl Serialize,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("bounds.csv"), bounds_csv(model, bounds))?;
    std::fs::write(dir.join("accessibility.csv"), accessibility_csv(model))?;
    std::fs::write(dir.join("history.csv"), history.to_csv(model))?;
    let mut s = serde_json::to_string_pretty(summary)?;
    s.push('\n');
    std::fs::write(dir.join("summary.json"), s)?;
    Ok(())
}
