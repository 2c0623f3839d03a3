//! Scenario runner: validates a scenario, dispatches it to the owning
//! module and persists the results with a run manifest.
//!
//! Results are assembled in memory, written to a sibling temporary
//! directory and renamed into place, so a failed run leaves nothing behind.

mod scenario;
mod suites;

pub use scenario::{ForcingSpec, Model, Params, Scenario, Task, SCHEMA_VERSION};
pub use suites::{scripted_hyperbolic, verify_all, Check, Selector, Suite, SuiteReport, Summary};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::dichotomy::{detect, verify_dichotomy, DetectOptions, DEFAULT_CIRCLE_TOL, DEFAULT_VERIFY_HORIZON};
use crate::error::{Error, Result};
use crate::finite_delay::{defect, simulate_forced, ForcingSequence, Orbit};
use crate::phase_space::{HistorySegment, Segment};
use crate::shadowing::{perron_solve, perron_solve_tol, shadow, shadowing_modulus};
use crate::volterra::{
    find_roots, resonant_forcing, spectral_decomposition, volterra_step_forced, DecompositionOptions, RootOptions,
};

pub const MANIFEST: &str = "manifest.json";

/// Command-line overrides of scenario parameters.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub full: bool,
    pub suite: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: u64,
    pub name: String,
    pub task: String,
    /// SHA-256 of the input echo and the effective overrides.
    pub scenario_hash: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub version: String,
    pub seed: u64,
    pub input: Value,
    pub overrides: Value,
    /// File names relative to `output_dir`.
    pub results: Vec<String>,
    pub output_dir: PathBuf,
    pub duration_secs: f64,
    /// False when a `verify-all` suite failed.
    pub passed: bool,
}

struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    passed: bool,
}

impl Outputs {
    fn new() -> Self {
        Outputs { files: Vec::new(), passed: true }
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(v)?;
        bytes.push(b'\n');
        self.files.push((name.into(), bytes));
        Ok(())
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut bytes = Vec::new();
        write(&mut bytes)?;
        self.files.push((name.into(), bytes));
        Ok(())
    }
}

/// Validates and runs `task` on `scenario`, writing results and a
/// [`RunRecord`] manifest into the output directory.
///
/// Validation problems come back as [`Error::Validation`]; failures inside a
/// module are wrapped with the module name.
pub fn run(scenario: &Scenario, task: Task, opts: &RunOptions) -> Result<RunRecord> {
    scenario.validate(task)?;
    let suite = opts.suite.as_ref().or(scenario.params.suite.as_ref());
    let selector: Selector = match suite {
        Some(s) => s.parse().map_err(|e| Error::Validation(vec![format!("suite: {e}")]))?,
        None => Selector::default(),
    };
    if let Some(t) = opts.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Validation(vec![format!("--tol must be a positive number, got {t}")]));
        }
    }
    let out_dir = opts
        .out
        .clone()
        .or_else(|| scenario.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("dshadow-out").join(task.as_str()));
    check_target(&out_dir)?;

    let seed = opts.seed.or(scenario.params.seed).unwrap_or(0);
    let tol = opts.tol.or(scenario.params.tol);
    let full = opts.full || scenario.params.full.unwrap_or(false);
    let overrides = json!({"seed": seed, "tol": tol, "full": full, "suite": suite});

    let started = Instant::now();
    let outputs = execute(scenario, task, seed, tol, full, &selector)?;
    let duration_secs = started.elapsed().as_secs_f64();

    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&scenario.source)?);
    hasher.update(task.as_str().as_bytes());
    hasher.update(serde_json::to_vec(&overrides)?);
    let record = RunRecord {
        schema: SCHEMA_VERSION,
        name: scenario.name.clone(),
        task: task.as_str().into(),
        scenario_hash: hex::encode(hasher.finalize()),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        input: scenario.source.clone(),
        overrides,
        results: outputs.files.iter().map(|(n, _)| n.clone()).collect(),
        output_dir: out_dir.clone(),
        duration_secs,
        passed: outputs.passed,
    };
    persist(&out_dir, &outputs.files, &record)?;
    Ok(record)
}

fn check_target(dir: &Path) -> Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    if !dir.is_dir() {
        return Err(Error::Validation(vec![format!("output path {} is not a directory", dir.display())]));
    }
    let empty = fs::read_dir(dir)?.next().is_none();
    if empty || dir.join(MANIFEST).is_file() {
        Ok(())
    } else {
        Err(Error::Validation(vec![format!(
            "output directory {} exists and does not hold a previous run",
            dir.display()
        )]))
    }
}

fn persist(dir: &Path, files: &[(String, Vec<u8>)], record: &RunRecord) -> Result<()> {
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let leaf = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let tmp = parent.join(format!(".{leaf}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    let write = || -> Result<()> {
        fs::create_dir(&tmp)?;
        for (name, bytes) in files {
            fs::write(tmp.join(name), bytes)?;
        }
        let mut manifest = serde_json::to_vec_pretty(record)?;
        manifest.push(b'\n');
        fs::write(tmp.join(MANIFEST), manifest)?;
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        fs::rename(&tmp, dir)?;
        Ok(())
    };
    let res = write();
    if res.is_err() && tmp.exists() {
        let _ = fs::remove_dir_all(&tmp);
    }
    res
}

fn execute(
    scenario: &Scenario,
    task: Task,
    seed: u64,
    tol: Option<f64>,
    full: bool,
    selector: &Selector,
) -> Result<Outputs> {
    let p = &scenario.params;
    let mut out = Outputs::new();
    let circle_tol = tol.unwrap_or(DEFAULT_CIRCLE_TOL);
    match (task, &scenario.model) {
        (Task::VerifyAll, _) => {
            let summary = verify_all(selector, seed, full);
            out.passed = summary.passed;
            out.json("summary.json", &summary)?;
            out.csv("residuals.csv", |w| write_residuals(w, &summary))?;
        }
        (Task::Simulate, Some(Model::System(sys))) => {
            let steps = p.steps.unwrap_or(0);
            let phi0 = Segment::new(p.initial.clone().unwrap_or_default())?;
            let z = forcing_for(p.forcing.as_ref(), sys.dim(), steps)?;
            let orbit = simulate_forced(sys, &phi0, &z).map_err(|e| e.in_module("finite_delay"))?;
            out.csv("orbit.csv", |w| orbit.write_csv(w))?;
            out.json("simulate.json", &json!({"steps": steps, "sup_norm": orbit.sup_norm()}))?;
        }
        (Task::Simulate, Some(Model::Kernel(k))) => {
            let steps = p.steps.unwrap_or(0);
            let mut init = p.initial.clone().unwrap_or_default();
            init.reverse();
            let mut h = HistorySegment::new(k.gamma(), init).map_err(|e| e.in_module("phase_space"))?;
            let depth0 = h.depth();
            let z = forcing_for(p.forcing.as_ref(), k.dim(), steps)?;
            for n in 0..steps {
                h = volterra_step_forced(k, &h, &z.at(n)).map_err(|e| e.in_module("volterra"))?;
            }
            let mut values = h.values().to_vec();
            values.reverse();
            let orbit = Orbit::from_values(depth0, values)?;
            out.csv("orbit.csv", |w| orbit.write_csv(w))?;
            out.json(
                "simulate.json",
                &json!({"steps": steps, "sup_norm": orbit.sup_norm(), "tail_bound": h.tail_bound}),
            )?;
        }
        (Task::Spectrum, Some(Model::System(sys))) => {
            let opts = DetectOptions { tol: circle_tol, ..DetectOptions::default() };
            let (report, _) = detect(sys, &opts).map_err(|e| e.in_module("dichotomy"))?;
            out.json("spectrum.json", &report)?;
        }
        (Task::Spectrum, Some(Model::Kernel(k))) => {
            let spec = find_roots(k, &root_options(p, circle_tol)).map_err(|e| e.in_module("volterra"))?;
            out.json("spectrum.json", &spec)?;
        }
        (Task::Dichotomy, Some(Model::System(sys))) => {
            let opts = DetectOptions { tol: circle_tol, horizon: p.horizon.unwrap_or(DEFAULT_VERIFY_HORIZON) };
            let (report, data) = detect(sys, &opts).map_err(|e| e.in_module("dichotomy"))?;
            let verification = match &data {
                Some(d) => Some(verify_dichotomy(sys, d, opts.horizon, full).map_err(|e| e.in_module("dichotomy"))?),
                None => None,
            };
            out.json("dichotomy.json", &json!({"report": report, "dichotomy": data, "verification": verification}))?;
        }
        (Task::Perron, Some(Model::System(sys))) => {
            let data = hyperbolic(sys, circle_tol)?;
            let window = p.window.unwrap_or(1);
            let spec = p.forcing.as_ref().expect("validated");
            let z = forcing_for(Some(spec), sys.dim(), spec.len())?;
            let horizon = p.horizon.unwrap_or(window.max(z.len()));
            let sol = match tol {
                Some(t) => perron_solve_tol(sys, &data, &z, window, horizon, t),
                None => perron_solve(sys, &data, &z, window, horizon),
            }
            .map_err(|e| e.in_module("shadowing"))?;
            out.csv("perron.csv", |w| sol.orbit.write_csv(w))?;
            out.json(
                "perron.json",
                &json!({
                    "window": window,
                    "horizon": sol.horizon,
                    "sup_norm": sol.sup_norm,
                    "control_ratio": sol.control_ratio,
                    "truncation_tail_bound": sol.truncation_tail_bound,
                    "step_residual": sol.step_residual,
                    "D": data.d_const,
                    "lambda": data.lambda,
                    "K_D": data.shadowing_constant(),
                }),
            )?;
        }
        (Task::Shadow, Some(Model::System(sys))) => {
            let data = hyperbolic(sys, circle_tol)?;
            if let Some(y) = &p.pseudo_orbit {
                let y = defect(sys, y.clone()).map_err(|e| e.in_module("finite_delay"))?;
                let window = y.orbit.last_time();
                let res = shadow(sys, &data, &y, p.horizon.unwrap_or(window).max(window))
                    .map_err(|e| e.in_module("shadowing"))?;
                out.csv("shadow.csv", |w| res.write_csv(w))?;
                out.json(
                    "shadow.json",
                    &json!({
                        "delta": res.delta,
                        "sup_error": res.sup_error,
                        "pointwise_error": res.pointwise_error,
                        "shadowing_constant": res.shadowing_constant,
                        "theoretical_bound": res.theoretical_bound,
                        "within_bound": res.within_bound(),
                        "step_residual": res.step_residual,
                    }),
                )?;
            } else {
                let trials = p.trials.unwrap_or(100);
                let window = p.window.unwrap_or(60);
                let stats = p
                    .delta
                    .iter()
                    .map(|&d| shadowing_modulus(sys, &data, trials, d, window, seed))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| e.in_module("shadowing"))?;
                out.json("modulus.json", &json!({"seed": seed, "stats": stats}))?;
            }
        }
        (Task::Resonate, Some(Model::Kernel(k))) => {
            let steps = p.steps.unwrap_or(10_000);
            let spec = find_roots(k, &root_options(p, circle_tol)).map_err(|e| e.in_module("volterra"))?;
            let Some(root) = spec.on_circle().next() else {
                return Err(Error::arg(format!(
                    "kernel is hyperbolic (closest root is {:e} from the unit circle), no resonance exists",
                    spec.min_distance_to_unit_circle
                ))
                .in_module("volterra"));
            };
            let dopts = DecompositionOptions { allow_fallback: p.allow_fallback.unwrap_or(false), circle_tol };
            let dec = spectral_decomposition(k, &spec, &dopts).map_err(|e| e.in_module("volterra"))?;
            let rep = resonant_forcing(&dec, root.value, steps, circle_tol).map_err(|e| e.in_module("volterra"))?;
            out.csv("growth.csv", |w| rep.write_csv(w))?;
            out.json("resonance.json", &json!({"growth": rep, "decomposition": dec}))?;
        }
        (Task::Resonate, Some(Model::System(sys))) => {
            let steps = p.steps.unwrap_or(10_000);
            let rep = crate::shadowing::resonance_probe(sys, steps, circle_tol).map_err(|e| e.in_module("shadowing"))?;
            out.json("resonance.json", &json!({"probe": rep, "relative_residual": rep.relative_residual()}))?;
        }
        (t, m) => {
            let what = match m {
                Some(Model::System(_)) => "a finite-delay system",
                Some(Model::Kernel(_)) => "a kernel",
                None => "no model",
            };
            return Err(Error::Validation(vec![format!("task \"{t}\" cannot run on {what}")]));
        }
    }
    Ok(out)
}

fn root_options(p: &Params, circle_tol: f64) -> RootOptions {
    let d = RootOptions::default();
    RootOptions { inner: p.inner, outer: p.outer, grid: p.grid.unwrap_or(d.grid), circle_tol, ..d }
}

fn forcing_for(spec: Option<&ForcingSpec>, dim: usize, steps: usize) -> Result<ForcingSequence> {
    let mut values = spec.map(ForcingSpec::values).unwrap_or_default();
    values.truncate(steps);
    values.resize(steps, crate::linalg::CVec::zeros(dim));
    if values.is_empty() {
        return Ok(ForcingSequence::zeros(dim, 0));
    }
    ForcingSequence::new(values)
}

fn hyperbolic(sys: &crate::finite_delay::FiniteDelaySystem, tol: f64) -> Result<crate::dichotomy::DichotomyData> {
    let opts = DetectOptions { tol, ..DetectOptions::default() };
    let (report, data) = detect(sys, &opts).map_err(|e| e.in_module("dichotomy"))?;
    data.ok_or_else(|| {
        Error::State(format!(
            "system is not hyperbolic (an eigenvalue is within {:e} of the unit circle)",
            report.min_distance_to_unit_circle
        ))
        .in_module("dichotomy")
    })
}

fn write_residuals(w: &mut Vec<u8>, summary: &Summary) -> Result<()> {
    use crate::io::{csv_writer, fmt_num, write_row};
    let mut out = csv_writer(w);
    write_row(&mut out, &["suite", "check", "max_residual", "threshold", "samples", "passed"].map(String::from))?;
    for s in &summary.suites {
        for c in &s.checks {
            write_row(
                &mut out,
                &[
                    s.suite.clone(),
                    c.name.clone(),
                    fmt_num(c.max_residual),
                    fmt_num(c.threshold),
                    c.samples.to_string(),
                    c.passed.to_string(),
                ],
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn scenario(doc: Value) -> Scenario {
        Scenario::from_json(&doc).unwrap()
    }

    #[test]
    fn fibonacci_orbit_file() {
        let dir = tempfile::tempdir().unwrap();
        let s = scenario(json!({
            "schema": 1,
            "system": {"d": 1, "r": 1, "kind": "autonomous", "matrices": {"A": [[[1]], [[1]]]}},
            "params": {"steps": 10, "initial": [[0], [1]]}
        }));
        let out = dir.path().join("fib");
        let rec = run(&s, Task::Simulate, &RunOptions { out: Some(out.clone()), ..Default::default() }).unwrap();
        assert_eq!(rec.results, vec!["orbit.csv", "simulate.json"]);
        let text = fs::read_to_string(out.join("orbit.csv")).unwrap();
        let last = text.lines().last().unwrap();
        assert!(last.starts_with("10,8.9000000000000000e1,"), "{last}");
        assert!(out.join(MANIFEST).is_file());
    }

    #[test]
    fn failure_leaves_no_directory() {
        let dir = tempfile::tempdir().unwrap();
        let s = scenario(json!({
            "schema": 1,
            "system": {"d": 1, "r": 0, "kind": "autonomous", "matrices": {"A": [[[1]]]}},
            "params": {"window": 5, "forcing": [1, 1]}
        }));
        let out = dir.path().join("p");
        let err = run(&s, Task::Perron, &RunOptions { out: Some(out.clone()), ..Default::default() }).unwrap_err();
        assert!(!err.is_validation());
        assert!(!out.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn refuses_foreign_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("keep.txt"), "x").unwrap();
        let s = Scenario::bare(Task::VerifyAll);
        let opts = RunOptions { out: Some(dir.path().to_path_buf()), suite: Some("dichotomy".into()), ..Default::default() };
        assert!(run(&s, Task::VerifyAll, &opts).unwrap_err().is_validation());
        assert!(dir.path().join("keep.txt").exists());
    }
}
