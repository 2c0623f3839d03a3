//! Scenario documents: parsing and task-specific validation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::finite_delay::FiniteDelaySystem;
use crate::linalg::CVec;
use crate::serde_util::{vec_from, ComplexRepr};
use crate::volterra::VolterraKernel;

use super::suites::Selector;

pub const SCHEMA_VERSION: u64 = 1;

const MAX_STEPS: usize = 10_000_000;
const MAX_TRIALS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Simulate,
    Spectrum,
    Dichotomy,
    Shadow,
    Perron,
    Resonate,
    VerifyAll,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Simulate,
        Task::Spectrum,
        Task::Dichotomy,
        Task::Shadow,
        Task::Perron,
        Task::Resonate,
        Task::VerifyAll,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Spectrum => "spectrum",
            Task::Dichotomy => "dichotomy",
            Task::Shadow => "shadow",
            Task::Perron => "perron",
            Task::Resonate => "resonate",
            Task::VerifyAll => "verify-all",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task \"{s}\""))
    }
}

/// The system a scenario is about.
#[derive(Debug, Clone)]
pub enum Model {
    System(FiniteDelaySystem),
    Kernel(VolterraKernel),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::System(s) => s.dim(),
            Model::Kernel(k) => k.dim(),
        }
    }
}

/// External forcing as written in a scenario.
#[derive(Debug, Clone)]
pub enum ForcingSpec {
    Values(Vec<CVec>),
    Constant { value: CVec, len: usize },
}

impl ForcingSpec {
    pub fn dim(&self) -> Option<usize> {
        match self {
            ForcingSpec::Values(v) => v.first().map(|x| x.len()),
            ForcingSpec::Constant { value, .. } => Some(value.len()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ForcingSpec::Values(v) => v.len(),
            ForcingSpec::Constant { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Vec<CVec> {
        match self {
            ForcingSpec::Values(v) => v.clone(),
            ForcingSpec::Constant { value, len } => vec![value.clone(); *len],
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Params {
    pub steps: Option<usize>,
    pub horizon: Option<usize>,
    pub window: Option<usize>,
    pub delta: Vec<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub full: Option<bool>,
    /// Initial values, oldest first.
    pub initial: Option<Vec<CVec>>,
    pub forcing: Option<ForcingSpec>,
    /// Explicit pseudo-orbit on `n = -r, ..., N`.
    pub pseudo_orbit: Option<Vec<CVec>>,
    pub suite: Option<String>,
    pub grid: Option<usize>,
    pub inner: Option<f64>,
    pub outer: Option<f64>,
    pub allow_fallback: Option<bool>,
}

const PARAM_KEYS: [&str; 16] = [
    "steps",
    "horizon",
    "window",
    "delta",
    "trials",
    "seed",
    "tol",
    "full",
    "initial",
    "forcing",
    "pseudo_orbit",
    "suite",
    "grid",
    "inner",
    "outer",
    "allow_fallback",
];

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub task: Option<Task>,
    pub model: Option<Model>,
    pub params: Params,
    pub output_dir: Option<PathBuf>,
    /// The document as read, echoed into the run record.
    pub source: Value,
}

impl Scenario {
    /// A scenario without a model, as used by `verify-all` without a config.
    pub fn bare(task: Task) -> Self {
        let source = serde_json::json!({
            "schema": SCHEMA_VERSION,
            "name": task.as_str(),
            "task": task.as_str(),
            "params": {},
        });
        Scenario {
            name: task.as_str().into(),
            task: Some(task),
            model: None,
            params: Params::default(),
            output_dir: None,
            source,
        }
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| Error::Validation(vec![format!("config is not valid JSON: {e}")]))?;
        Self::from_json(&doc)
    }

    /// Parses a scenario, collecting every problem before failing.
    pub fn from_json(doc: &Value) -> Result<Self> {
        let Some(obj) = doc.as_object() else {
            return Err(Error::Validation(vec!["scenario must be a JSON object".into()]));
        };
        let mut errs = Vec::new();
        for key in obj.keys() {
            if !["schema", "name", "task", "system", "kernel", "params", "output_dir"].contains(&key.as_str()) {
                errs.push(format!("unknown field \"{key}\""));
            }
        }
        match obj.get("schema") {
            None => errs.push("missing field \"schema\"".into()),
            Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
            Some(v) => errs.push(format!("field \"schema\" must be {SCHEMA_VERSION}, got {v}")),
        }
        let name = match obj.get("name") {
            None => "scenario".to_string(),
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(_) => {
                errs.push("field \"name\" must be a non-empty string".into());
                String::new()
            }
        };
        let task = match obj.get("task") {
            None => None,
            Some(Value::String(s)) => match s.parse::<Task>() {
                Ok(t) => Some(t),
                Err(e) => {
                    errs.push(format!("field \"task\": {e}"));
                    None
                }
            },
            Some(_) => {
                errs.push("field \"task\" must be a string".into());
                None
            }
        };
        let model = match (obj.get("system"), obj.get("kernel")) {
            (Some(_), Some(_)) => {
                errs.push("give either \"system\" or \"kernel\", not both".into());
                None
            }
            (Some(s), None) => prefixed(FiniteDelaySystem::from_json(s), "system", &mut errs).map(Model::System),
            (None, Some(k)) => prefixed(VolterraKernel::from_json(k), "kernel", &mut errs).map(Model::Kernel),
            (None, None) => None,
        };
        let empty = Map::new();
        let params_obj = match obj.get("params") {
            None => &empty,
            Some(Value::Object(m)) => m,
            Some(_) => {
                errs.push("field \"params\" must be an object".into());
                &empty
            }
        };
        let params = parse_params(params_obj, &mut errs);
        let output_dir = match obj.get("output_dir") {
            None => None,
            Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
            Some(_) => {
                errs.push("field \"output_dir\" must be a non-empty string".into());
                None
            }
        };
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        Ok(Scenario { name, task, model, params, output_dir, source: doc.clone() })
    }

    /// Checks that `task` can run on this scenario. Every problem is listed.
    pub fn validate(&self, task: Task) -> Result<()> {
        let mut errs = Vec::new();
        if let Some(t) = self.task {
            if t != task {
                errs.push(format!("scenario task is \"{t}\" but \"{task}\" was requested"));
            }
        }
        let p = &self.params;
        let needs_model = task != Task::VerifyAll;
        if needs_model && self.model.is_none() {
            errs.push(format!("task \"{task}\" needs a \"system\" or \"kernel\""));
        }
        let system = match &self.model {
            Some(Model::System(s)) => Some(s),
            _ => None,
        };
        if matches!(task, Task::Dichotomy | Task::Perron | Task::Shadow) {
            if let Some(Model::Kernel(_)) = &self.model {
                errs.push(format!("task \"{task}\" needs a finite-delay \"system\", got a \"kernel\""));
            }
        }
        let dim = self.model.as_ref().map(Model::dim);
        let check_vectors = |key: &str, vs: &[CVec], errs: &mut Vec<String>| {
            if let Some(d) = dim {
                for (i, v) in vs.iter().enumerate() {
                    if v.len() != d {
                        errs.push(format!("params.{key}[{i}] has length {}, expected d = {d}", v.len()));
                    }
                }
            }
        };
        match task {
            Task::Simulate => {
                if p.steps.is_none() {
                    errs.push("task \"simulate\" needs params.steps".into());
                }
                match &p.initial {
                    None => errs.push("task \"simulate\" needs params.initial".into()),
                    Some(init) => {
                        check_vectors("initial", init, &mut errs);
                        match &self.model {
                            Some(Model::System(s)) if init.len() != s.delay() + 1 => errs.push(format!(
                                "params.initial has {} values, expected r+1 = {}",
                                init.len(),
                                s.delay() + 1
                            )),
                            Some(Model::Kernel(k)) if init.len() < k.reach() + 1 => errs.push(format!(
                                "params.initial has {} values, the kernel needs at least {}",
                                init.len(),
                                k.reach() + 1
                            )),
                            _ => {}
                        }
                    }
                }
                if let Some(f) = &p.forcing {
                    if let Some(Model::System(_)) | Some(Model::Kernel(_)) = &self.model {
                        if let (Some(fd), Some(d)) = (f.dim(), dim) {
                            if fd != d {
                                errs.push(format!("params.forcing has dimension {fd}, expected d = {d}"));
                            }
                        }
                    }
                }
            }
            Task::Perron => {
                match &p.forcing {
                    None => errs.push("task \"perron\" needs params.forcing".into()),
                    Some(f) => {
                        if let (Some(fd), Some(d)) = (f.dim(), dim) {
                            if fd != d {
                                errs.push(format!("params.forcing has dimension {fd}, expected d = {d}"));
                            }
                        }
                    }
                }
                if p.window.is_none() {
                    errs.push("task \"perron\" needs params.window".into());
                }
                if let (Some(w), Some(h)) = (p.window, p.horizon) {
                    if h < w {
                        errs.push(format!("params.horizon = {h} is smaller than params.window = {w}"));
                    }
                }
            }
            Task::Shadow => match (&p.pseudo_orbit, p.delta.is_empty()) {
                (Some(_), false) => errs.push("give either params.pseudo_orbit or params.delta, not both".into()),
                (None, true) => errs.push("task \"shadow\" needs params.pseudo_orbit or params.delta".into()),
                (Some(y), true) => {
                    check_vectors("pseudo_orbit", y, &mut errs);
                    if let Some(s) = system {
                        if y.len() < s.delay() + 2 {
                            errs.push(format!(
                                "params.pseudo_orbit has {} values, at least r+2 = {} are needed",
                                y.len(),
                                s.delay() + 2
                            ));
                        }
                    }
                }
                (None, false) => {}
            },
            Task::VerifyAll => {
                if let Some(s) = &p.suite {
                    if let Err(e) = s.parse::<Selector>() {
                        errs.push(format!("params.suite: {e}"));
                    }
                }
            }
            Task::Spectrum | Task::Dichotomy | Task::Resonate => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

fn prefixed<T>(res: Result<T>, what: &str, errs: &mut Vec<String>) -> Option<T> {
    match res {
        Ok(x) => Some(x),
        Err(Error::Validation(list)) => {
            errs.extend(list.into_iter().map(|e| format!("{what}: {e}")));
            None
        }
        Err(e) => {
            errs.push(format!("{what}: {e}"));
            None
        }
    }
}

struct Reader<'a> {
    obj: &'a Map<String, Value>,
    errs: &'a mut Vec<String>,
}

impl Reader<'_> {
    fn count(&mut self, key: &str, min: usize, max: usize) -> Option<usize> {
        let v = self.obj.get(key)?;
        match v.as_u64() {
            Some(x) if (min as u64..=max as u64).contains(&x) => Some(x as usize),
            _ => {
                self.errs.push(format!("params.{key} must be an integer in [{min}, {max}], got {v}"));
                None
            }
        }
    }

    fn positive(&mut self, key: &str) -> Option<f64> {
        let v = self.obj.get(key)?;
        match v.as_f64() {
            Some(x) if x > 0.0 && x.is_finite() => Some(x),
            _ => {
                self.errs.push(format!("params.{key} must be a positive number, got {v}"));
                None
            }
        }
    }

    fn flag(&mut self, key: &str) -> Option<bool> {
        let v = self.obj.get(key)?;
        let b = v.as_bool();
        if b.is_none() {
            self.errs.push(format!("params.{key} must be true or false, got {v}"));
        }
        b
    }

    fn vectors(&mut self, key: &str) -> Option<Vec<CVec>> {
        let v = self.obj.get(key)?;
        match parse_vectors(v) {
            Ok(list) if !list.is_empty() => Some(list),
            Ok(_) => {
                self.errs.push(format!("params.{key} must not be empty"));
                None
            }
            Err(e) => {
                self.errs.push(format!("params.{key}: {e}"));
                None
            }
        }
    }
}

/// A list of vectors; a bare number stands for a vector of length one.
fn parse_vectors(v: &Value) -> std::result::Result<Vec<CVec>, String> {
    let Some(items) = v.as_array() else {
        return Err("expected a list of vectors".into());
    };
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        out.push(parse_vector(item).map_err(|e| format!("entry {i}: {e}"))?);
    }
    let d = out.first().map_or(0, |x: &CVec| x.len());
    if out.iter().any(|x| x.len() != d) {
        return Err("vectors have different lengths".into());
    }
    Ok(out)
}

fn parse_vector(v: &Value) -> std::result::Result<CVec, String> {
    if let Ok(z) = serde_json::from_value::<ComplexRepr>(v.clone()) {
        if !v.is_array() {
            return Ok(vec_from(&[z]));
        }
    }
    let raw: Vec<ComplexRepr> =
        serde_json::from_value(v.clone()).map_err(|_| format!("expected a vector of numbers or [re, im] pairs, got {v}"))?;
    if raw.is_empty() {
        return Err("empty vector".into());
    }
    let out = vec_from(&raw);
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err("non-finite entry".into());
    }
    Ok(out)
}

fn parse_params(obj: &Map<String, Value>, errs: &mut Vec<String>) -> Params {
    for key in obj.keys() {
        if !PARAM_KEYS.contains(&key.as_str()) {
            errs.push(format!("unknown parameter \"params.{key}\""));
        }
    }
    let mut rd = Reader { obj, errs };
    let mut p = Params {
        steps: rd.count("steps", 1, MAX_STEPS),
        horizon: rd.count("horizon", 1, MAX_STEPS),
        window: rd.count("window", 1, MAX_STEPS),
        trials: rd.count("trials", 1, MAX_TRIALS),
        grid: rd.count("grid", 8, 1 << 16),
        tol: rd.positive("tol"),
        inner: rd.positive("inner"),
        outer: rd.positive("outer"),
        full: rd.flag("full"),
        allow_fallback: rd.flag("allow_fallback"),
        initial: rd.vectors("initial"),
        pseudo_orbit: rd.vectors("pseudo_orbit"),
        ..Params::default()
    };
    if let Some(v) = obj.get("seed") {
        match v.as_u64() {
            Some(s) => p.seed = Some(s),
            None => errs.push(format!("params.seed must be a nonnegative integer, got {v}")),
        }
    }
    if let Some(v) = obj.get("delta") {
        let list: Vec<&Value> = match v {
            Value::Array(a) => a.iter().collect(),
            other => vec![other],
        };
        let parsed: Vec<Option<f64>> =
            list.iter().map(|x| x.as_f64().filter(|d| *d > 0.0 && d.is_finite())).collect();
        if list.is_empty() || parsed.iter().any(Option::is_none) {
            errs.push(format!("params.delta must be a positive number or a list of them, got {v}"));
        } else {
            p.delta = parsed.into_iter().flatten().collect();
        }
    }
    if let Some(v) = obj.get("suite") {
        match v.as_str() {
            Some(s) => p.suite = Some(s.to_string()),
            None => errs.push(format!("params.suite must be a string, got {v}")),
        }
    }
    if let (Some(i), Some(o)) = (p.inner, p.outer) {
        if i >= o {
            errs.push(format!("params.inner = {i} must be smaller than params.outer = {o}"));
        }
    }
    if let Some(v) = obj.get("forcing") {
        p.forcing = match v {
            Value::Object(m) => {
                let value = m.get("constant").map(parse_vector);
                let len = m.get("length").and_then(Value::as_u64);
                match (value, len) {
                    (Some(Ok(value)), Some(len)) if len as usize <= MAX_STEPS => {
                        Some(ForcingSpec::Constant { value, len: len as usize })
                    }
                    (Some(Err(e)), _) => {
                        errs.push(format!("params.forcing.constant: {e}"));
                        None
                    }
                    _ => {
                        errs.push(
                            "params.forcing must be a list of vectors or {\"constant\": vector, \"length\": integer}"
                                .into(),
                        );
                        None
                    }
                }
            }
            other => match parse_vectors(other) {
                Ok(list) => Some(ForcingSpec::Values(list)),
                Err(e) => {
                    errs.push(format!("params.forcing: {e}"));
                    None
                }
            },
        };
    }
    p
}
