//! Shared generators and checkers for the integration suites.
#![allow(dead_code)]

use mlnn::autodiff::{Tape, Var};
use mlnn::harness::CrispOracle;
use mlnn::inference::{Axiom, AxiomSet, StateSel};
use mlnn::kripke::{Accessibility, Matrix, StateSpace};
use mlnn::logic::{Bounds, Expr};
use mlnn::Model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ATOMS: [&str; 3] = ["p", "q", "s"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn states(n: usize) -> StateSpace {
    let names: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    StateSpace::worlds_only(&names).unwrap()
}

/// Random formula over `ATOMS` and relation `r` with depth at most `depth`.
pub fn formula(rng: &mut impl Rng, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return Expr::atom(ATOMS[rng.random_range(0..ATOMS.len())]);
    }
    let sub = |rng: &mut _| formula(rng, depth - 1);
    match rng.random_range(0..7) {
        0 => Expr::not(sub(rng)),
        1 => Expr::and(sub(rng), sub(rng)),
        2 => Expr::or(sub(rng), sub(rng)),
        3 => Expr::implies(sub(rng), sub(rng)),
        4 => Expr::ImpliesProd(Box::new(sub(rng)), Box::new(sub(rng))),
        5 => Expr::boxed("r", sub(rng)),
        _ => Expr::diamond("r", sub(rng)),
    }
}

/// Crisp model on `n` states and the matching two-valued oracle.
pub fn crisp_model(rng: &mut impl Rng, n: usize) -> (Model, CrispOracle) {
    let density = rng.random_range(0.1..0.9);
    let r = Matrix::from_fn(n, |_, _| rng.random_bool(density));
    let mut m = Model::new(states(n));
    m.add_relation("r", Accessibility::fixed_crisp(&r)).unwrap();
    let mut o = CrispOracle::new(n).with_relation("r", r).unwrap();
    for a in ATOMS {
        let truth: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        m.add_proposition(a, truth.iter().map(|t| Bounds::point(f64::from(u8::from(*t)))).collect())
            .unwrap();
        o = o.with_atom(a, truth).unwrap();
    }
    (m, o)
}

fn interval(rng: &mut impl Rng) -> Bounds<f64> {
    match rng.random_range(0..4) {
        0 => Bounds::UNKNOWN,
        1 => Bounds::point(rng.random()),
        _ => {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            Bounds::new(a.min(b), a.max(b))
        }
    }
}

/// Weighted relation, interval valuations, a few random formulas.
pub fn soft_model(rng: &mut impl Rng, n: usize, formulas: usize) -> Model {
    let w = Matrix::from_fn(n, |_, _| if rng.random_bool(0.3) { 0.0 } else { rng.random() });
    let mut m = Model::new(states(n));
    m.add_relation("r", Accessibility::fixed_weighted(w).unwrap()).unwrap();
    for a in ATOMS {
        m.add_proposition(a, (0..n).map(|_| interval(rng)).collect()).unwrap();
    }
    for i in 0..formulas {
        let f = formula(rng, 3);
        m.add_formula(&format!("f{i}"), &f).unwrap();
    }
    m
}

/// One or two axioms on the model's named formulas.
pub fn axioms(rng: &mut impl Rng, m: &Model) -> AxiomSet {
    let mut ax = AxiomSet::new();
    let named = m.named_formulas();
    for _ in 0..rng.random_range(1..=2) {
        let (_, id) = &named[rng.random_range(0..named.len())];
        let states = if rng.random_bool(0.3) { StateSel::All } else { StateSel::One(rng.random_range(0..m.n_states())) };
        let (lower, upper) = if rng.random_bool(0.5) { (rng.random_range(0.5..1.0), 1.0) } else { (0.0, rng.random_range(0.0..0.5)) };
        ax.push(Axiom { formula: *id, states, lower, upper }).unwrap();
    }
    ax
}

/// Analytic and central-difference gradients of `f` at `x`, or `None` when
/// `x` sits on a kink (one-sided slopes disagree).
pub fn gradients(x: &[f64], h: f64, f: impl Fn(&mut Tape, &[Var]) -> Var) -> Option<(Vec<f64>, Vec<f64>)> {
    let value = |x: &[f64]| {
        let mut t = Tape::new();
        let vars: Vec<Var> = x.iter().map(|v| t.param(*v).unwrap()).collect();
        let out = f(&mut t, &vars);
        t.value(out)
    };
    let mut t = Tape::new();
    let vars: Vec<Var> = x.iter().map(|v| t.param(*v).unwrap()).collect();
    let out = f(&mut t, &vars);
    let analytic = t.backward(out).unwrap().collect(&vars);
    let f0 = t.value(out);
    let mut numeric = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        xp[i] += h;
        let mut xm = x.to_vec();
        xm[i] -= h;
        let (fp, fm) = (value(&xp), value(&xm));
        let (right, left) = ((fp - f0) / h, (f0 - fm) / h);
        if (right - left).abs() > 1e-3 * (1.0 + right.abs().max(left.abs())) {
            return None;
        }
        numeric.push((fp - fm) / (2.0 * h));
    }
    Some((analytic, numeric))
}

pub fn grad_close(a: f64, n: f64) -> bool {
    (a - n).abs() <= 1e-4 * a.abs().max(n.abs()) + 1e-8
}

/// Two-step path count never exceeds the direct link.
pub fn soft_transitive(r: &Matrix<bool>) -> bool {
    let n = r.n();
    (0..n).all(|i| {
        (0..n).all(|j| {
            let paths = (0..n).filter(|k| *r.get(i, *k) && *r.get(*k, j)).count();
            paths <= usize::from(*r.get(i, j))
        })
    })
}

pub fn reflexive(r: &Matrix<bool>) -> bool {
    (0..r.n()).all(|i| *r.get(i, i))
}

pub fn symmetric(r: &Matrix<bool>) -> bool {
    (0..r.n()).all(|i| (0..r.n()).all(|j| r.get(i, j) == r.get(j, i)))
}

pub fn transitive(r: &Matrix<bool>) -> bool {
    let n = r.n();
    (0..n).all(|i| (0..n).all(|j| (0..n).all(|k| !(*r.get(i, k) && *r.get(k, j)) || *r.get(i, j))))
}

/// Random crisp matrices, mixed with ones built to have each property.
pub fn crisp_matrices(rng: &mut impl Rng, count: usize, n: usize) -> Vec<Matrix<bool>> {
    (0..count)
        .map(|i| {
            let density = rng.random_range(0.05..0.95);
            let mut r = Matrix::from_fn(n, |_, _| rng.random_bool(density));
            match i % 4 {
                1 => (0..n).for_each(|k| r.set(k, k, true)),
                2 => {
                    for a in 0..n {
                        for b in 0..a {
                            let v = *r.get(a, b);
                            r.set(b, a, v);
                        }
                    }
                }
                3 => {
                    // a partial function with no two-step chains
                    r = Matrix::filled(n, false);
                    for a in 0..n {
                        if rng.random_bool(0.5) {
                            let b = rng.random_range(0..n);
                            if b != a && (0..n).all(|c| !*r.get(c, a)) && (0..n).all(|c| !*r.get(b, c)) {
                                r.set(a, b, true);
                            }
                        }
                    }
                }
                _ => {}
            }
            r
        })
        .collect()
}

pub fn lift(tape: &mut Tape, r: &Matrix<bool>) -> Matrix<Var> {
    r.map(|b| tape.constant(f64::from(u8::from(*b))))
}

/// Checks `points` differentiable points drawn by `sample`; returns how many
/// kinks were skipped.
pub fn fd_check(
    name: &str,
    seed: u64,
    points: usize,
    sample: impl Fn(&mut ChaCha8Rng) -> Vec<f64>,
    f: impl Fn(&mut Tape, &[Var]) -> Var,
) -> Result<usize, String> {
    let mut rng = rng(seed);
    let (mut accepted, mut tries) = (0, 0);
    while accepted < points {
        tries += 1;
        if tries > 20 * points {
            return Err(format!("{name}: too few differentiable points"));
        }
        let x = sample(&mut rng);
        let Some((a, n)) = gradients(&x, 1e-5, &f) else { continue };
        for (i, (ai, ni)) in a.iter().zip(&n).enumerate() {
            if !grad_close(*ai, *ni) {
                return Err(format!("{name} at {x:?}, input {i}: analytic {ai} vs numeric {ni}"));
            }
        }
        accepted += 1;
    }
    Ok(tries - accepted)
}

pub fn uniform(n: usize, lo: f64, hi: f64) -> impl Fn(&mut ChaCha8Rng) -> Vec<f64> {
    move |rng| (0..n).map(|_| rng.random_range(lo..hi)).collect()
}
