//! Model files: round trips through disk and malformed inputs.

use mlnn::harness::scenarios::{epistemic_toy, ring, royal_succession};
use mlnn::harness::{load_model, save_model, ModelSpec, SCHEMA};
use mlnn::Error;

#[test]
fn scenarios_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let (ring_spec, _) = ring(6, 3, 0.1, false, 1).unwrap();
    for (i, spec) in [epistemic_toy(), royal_succession(), ring_spec].into_iter().enumerate() {
        let path = dir.path().join(format!("m{i}.json"));
        save_model(&spec, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, spec);
        let (a, b) = (spec.build().unwrap(), back.build().unwrap());
        assert_eq!(a.model.params(), b.model.params());
        let tau = a.train.inference.tau;
        let (ea, eb) = (a.model.evaluate(tau).unwrap(), b.model.evaluate(tau).unwrap());
        assert_eq!(ea.max_change(&eb), 0.0);
    }
}

#[test]
fn minimal_file_uses_defaults() {
    let text = format!(
        r#"{{"schema": "{SCHEMA}", "worlds": ["a", "b"],
            "propositions": [{{"name": "p", "states": {{"b": [1, 1]}}}}],
            "relations": [{{"name": "r", "kind": "fixed", "init": {{"matrix": [[0, 1], [0, 0]]}}}}],
            "formulas": [{{"name": "f", "expr": "(box r p)"}}]}}"#
    );
    let b = ModelSpec::from_json(&text).unwrap().build().unwrap();
    let t = b.model.evaluate(b.train.inference.tau).unwrap();
    let f = b.model.formula("f").unwrap();
    // two unit terms under softmin at the default temperature
    assert!((t.at(f, 0).lower - (1.0 - 0.1 * 2f64.ln())).abs() < 1e-9);
    assert_eq!(b.train.epochs, 100);
}

fn broken(edit: impl Fn(&mut ModelSpec)) -> Error {
    let mut s = royal_succession();
    edit(&mut s);
    s.build().unwrap_err()
}

#[test]
fn malformed_models_are_rejected() {
    let e = broken(|s| s.propositions[0].init = [0.5, 1.5]);
    assert!(e.to_string().contains("isMonarch_C"), "{e:?}");
    let e = broken(|s| s.propositions.push(s.propositions[0].clone()));
    assert!(e.to_string().contains("isMonarch_C"), "{e}");
    let e = broken(|s| s.formulas[0].expr = "(and p".into());
    assert!(e.to_string().contains("succession_W"), "{e}");
    let e = broken(|s| s.relations[0].init = mlnn::harness::InitSpec::Matrix(vec![vec![1.0; 2]; 2]));
    assert!(e.to_string().contains("temporal"), "{e}");
    assert!(matches!(broken(|s| s.axioms[0].formula = "missing".into()), Error::UnknownFormula(_)));
    assert!(broken(|s| s.train.lr = -1.0).to_string().contains("learning rate"));
}

#[test]
fn missing_and_garbled_files() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_model(&dir.path().join("nope.json")), Err(Error::Io(_))));
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{ not json").unwrap();
    assert!(matches!(load_model(&p), Err(Error::Json(_))));
}
