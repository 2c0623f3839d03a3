use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dshadow::harness::{run, RunOptions, Scenario, Task, MANIFEST};
use dshadow::Error;

/// Shadowing, dichotomy and characteristic-root experiments for linear
/// delay difference equations.
#[derive(Parser)]
#[command(name = "dshadow", version)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw; overrides params.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Unit-circle tolerance (tail tolerance for perron); overrides params.tol.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Full-size verification.
    #[arg(long, global = true)]
    full: bool,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Iterate the system from params.initial.
    Simulate,
    /// Eigenvalues of the lift, or characteristic roots of a kernel.
    Spectrum,
    /// Detect and verify an exponential dichotomy.
    Dichotomy,
    /// Shadow a pseudo-orbit, or measure the shadowing modulus.
    Shadow,
    /// Bounded solution of a forced system.
    Perron,
    /// Linear growth under resonant forcing.
    Resonate,
    /// Run the property suites.
    VerifyAll {
        /// all, or a comma-separated list of suites.
        #[arg(long)]
        suite: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("DSHADOW_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let (task, suite) = match cli.verb {
        Verb::Simulate => (Task::Simulate, None),
        Verb::Spectrum => (Task::Spectrum, None),
        Verb::Dichotomy => (Task::Dichotomy, None),
        Verb::Shadow => (Task::Shadow, None),
        Verb::Perron => (Task::Perron, None),
        Verb::Resonate => (Task::Resonate, None),
        Verb::VerifyAll { suite } => (Task::VerifyAll, suite),
    };
    let scenario = match (&cli.config, task) {
        (Some(path), _) => match std::fs::read_to_string(path) {
            Ok(text) => Scenario::from_str(&text),
            Err(e) => Err(Error::Validation(vec![format!("cannot read {}: {e}", path.display())])),
        },
        (None, Task::VerifyAll) => Ok(Scenario::bare(Task::VerifyAll)),
        (None, _) => Err(Error::Validation(vec![format!("{task} needs --config <path>")])),
    };
    let opts = RunOptions { seed: cli.seed, out: cli.out, tol: cli.tol, full: cli.full, suite };
    match scenario.and_then(|s| run(&s, task, &opts)) {
        Ok(rec) => {
            if task == Task::VerifyAll {
                print_summary(&rec.output_dir);
            }
            println!("{} {}: {}", rec.task, if rec.passed { "ok" } else { "FAILED" }, rec.output_dir.join(MANIFEST).display());
            if rec.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Error::Validation(list)) => {
            eprintln!("validation failed:");
            for e in list {
                eprintln!("  {e}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn print_summary(dir: &std::path::Path) {
    let Ok(text) = std::fs::read_to_string(dir.join("summary.json")) else { return };
    let Ok(doc) = serde_json::from_str::<serde_json::Value>(&text) else { return };
    for suite in doc["suites"].as_array().into_iter().flatten() {
        let name = suite["suite"].as_str().unwrap_or("?");
        for c in suite["checks"].as_array().into_iter().flatten() {
            println!(
                "{:<5} {name}/{} max residual {:.3e} (threshold {:.1e})",
                if c["passed"].as_bool() == Some(true) { "pass" } else { "FAIL" },
                c["name"].as_str().unwrap_or("?"),
                c["max_residual"].as_f64().unwrap_or(f64::NAN),
                c["threshold"].as_f64().unwrap_or(f64::NAN),
            );
        }
        if let Some(e) = suite["error"].as_str() {
            println!("FAIL  {name}: {e}");
        }
    }
}
