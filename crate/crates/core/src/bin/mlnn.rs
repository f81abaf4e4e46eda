use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use mlnn::harness::scenarios::{self, Run};
use mlnn::harness::{fmt6, load_model, run_spec, save_results, ModelSpec};
use mlnn::inference::{contradiction_value, run_to_fixpoint};
use mlnn::learn::TrainHistory;
use mlnn::logic::BoundsTable;
use mlnn::{Error, Model};

#[derive(Parser)]
#[command(name = "mlnn", version, about = "Modal logical neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run upward-downward inference on a model file.
    Infer {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the learnable parts of a model file, then run inference.
    Train {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a built-in experiment.
    Scenario {
        name: ScenarioName,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
        /// Freeze the ring's relation to random weights.
        #[arg(long)]
        fixed_r: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a model file without running it.
    Check { model: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioName {
    Royal,
    Toy,
    Ring,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::NonFiniteLoss { .. }) => Failure::Runtime(e),
            _ => Failure::Input(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(anyhow::Error::new(e))
    }
}

fn load(path: &Path) -> anyhow::Result<ModelSpec> {
    load_model(path).with_context(|| format!("loading {}", path.display()))
}

fn print_bounds(model: &Model, bounds: &BoundsTable<f64>) {
    let labels = model.states().labels();
    for (name, id) in model.named_formulas() {
        let cells: Vec<String> = bounds
            .get(*id)
            .unwrap_or_default()
            .iter()
            .enumerate()
            .map(|(s, b)| format!("{}=[{}, {}]", labels[s], fmt6(b.lower), fmt6(b.upper)))
            .collect();
        println!("{name}: {}", cells.join(" "));
    }
}

fn print_run(run: &Run) {
    println!(
        "training loss: initial contradiction {} -> final {} (total {})",
        fmt6(run.initial.contradiction),
        fmt6(run.last.contradiction),
        fmt6(run.last.total)
    );
    println!(
        "fixpoint: {} iteration(s), {}; contradiction {}",
        run.fixpoint.iterations,
        if run.fixpoint.converged { "converged" } else { "not converged" },
        fmt6(contradiction_value(&run.fixpoint.bounds, &run.built.axioms))
    );
}

fn export(out: &Option<PathBuf>, run: &Run, summary: &serde_json::Value) -> anyhow::Result<()> {
    if let Some(dir) = out {
        save_results(dir, &run.built.model, &run.fixpoint.bounds, &run.history, summary)
            .with_context(|| format!("writing results to {}", dir.display()))?;
        println!("results written to {}", dir.display());
    }
    Ok(())
}

fn run_summary(run: &Run) -> serde_json::Value {
    json!({
        "initial_loss": run.initial,
        "final_loss": run.last,
        "epochs": run.history.epochs.len(),
        "fixpoint_iterations": run.fixpoint.iterations,
        "converged": run.fixpoint.converged,
        "seconds": run.seconds,
    })
}

fn execute(cmd: Command) -> Result<bool, Failure> {
    match cmd {
        Command::Check { model } => {
            let spec = load(&model)?;
            let b = spec.build()?;
            println!(
                "ok: {} states, {} propositions, {} relations, {} formulas, {} axioms, {} parameters",
                b.model.n_states(),
                b.model.propositions().count(),
                b.model.relations().len(),
                b.model.named_formulas().len(),
                b.axioms.len(),
                b.model.num_params()
            );
            Ok(true)
        }
        Command::Infer { model, out } => {
            let spec = load(&model)?;
            let b = spec.build()?;
            let fix = run_to_fixpoint(&b.model, &b.axioms, &b.train.inference)?;
            print_bounds(&b.model, &fix.bounds);
            let contradiction = contradiction_value(&fix.bounds, &b.axioms);
            println!(
                "fixpoint: {} iteration(s), {}; contradiction {}",
                fix.iterations,
                if fix.converged { "converged" } else { "not converged" },
                fmt6(contradiction)
            );
            if let Some(dir) = &out {
                let summary = json!({
                    "fixpoint_iterations": fix.iterations,
                    "converged": fix.converged,
                    "contradiction": contradiction,
                });
                save_results(dir, &b.model, &fix.bounds, &TrainHistory::default(), &summary)
                    .map_err(|e| Failure::Input(e.into()))?;
            }
            Ok(fix.converged)
        }
        Command::Train { model, out, seed } => {
            let mut spec = load(&model)?;
            if let Some(s) = seed {
                spec.train.seed = s;
            }
            let run = run_spec(&spec)?;
            print_bounds(&run.built.model, &run.fixpoint.bounds);
            print_run(&run);
            export(&out, &run, &run_summary(&run))?;
            Ok(run.fixpoint.converged)
        }
        Command::Scenario { name, n, k, tau, fixed_r, seed, out } => {
            let (run, report) = match name {
                ScenarioName::Toy => {
                    let mut spec = scenarios::epistemic_toy();
                    spec.train.seed = seed;
                    let run = run_spec(&spec)?;
                    let r = scenarios::toy_report(&run)?;
                    println!("A[0,1] = {}  A[0,0] = {}  max other off-diagonal = {}", fmt6(r.a01), fmt6(r.a00), fmt6(r.max_other_off_diagonal));
                    for (q, b) in &r.queries {
                        println!("{q}: [{}, {}]", fmt6(b[0]), fmt6(b[1]));
                    }
                    (run, serde_json::to_value(&r).map_err(Error::from)?)
                }
                ScenarioName::Ring => {
                    let (spec, truth) = scenarios::ring(n, k, tau, fixed_r, seed)?;
                    let run = run_spec(&spec)?;
                    let r = scenarios::ring_report(&run, &truth)?;
                    println!(
                        "ring n={} k={} tau={}{}: structure MSE {}  contradiction {}  A[0->1] {}  A[0->2] {}",
                        r.n,
                        r.k.map_or("-".into(), |k| k.to_string()),
                        fmt6(r.tau),
                        if r.fixed_r { " (fixed R)" } else { "" },
                        fmt6(r.mse),
                        fmt6(r.contradiction),
                        fmt6(r.a_succ),
                        fmt6(r.a_skip)
                    );
                    (run, serde_json::to_value(&r).map_err(Error::from)?)
                }
                ScenarioName::Royal => {
                    let mut spec = scenarios::royal_succession();
                    spec.train.seed = seed;
                    let run = run_spec(&spec)?;
                    let r = scenarios::royal_report(&run)?;
                    println!("isHeir(W) = [{}, {}]", fmt6(r.heir_w.lower), fmt6(r.heir_w.upper));
                    println!("isHeir(H) = [{}, {}]", fmt6(r.heir_h.lower), fmt6(r.heir_h.upper));
                    println!("box isAlive(W) = [{}, {}]", fmt6(r.always_alive_w.lower), fmt6(r.always_alive_w.upper));
                    println!("box isAlive(H) = [{}, {}]", fmt6(r.always_alive_h.lower), fmt6(r.always_alive_h.upper));
                    println!("crisp oracle agrees: {}", r.oracle_agrees);
                    (run, serde_json::to_value(&r).map_err(Error::from)?)
                }
            };
            print_run(&run);
            let mut summary = run_summary(&run);
            summary["scenario"] = report;
            export(&out, &run, &summary)?;
            Ok(run.fixpoint.converged)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
