//! Linear delay difference systems `x(n+1) = sum_{j=0}^{r} A_j(n) x(n-j)`.
//!
//! A system acts on segments of length `r + 1`; the lifted form is the block
//! companion matrix on `C^{d(r+1)}` whose first block row holds the
//! coefficients and whose remaining block rows shift the history.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::{csv_writer, fmt_num, write_row};
use crate::linalg::{block_operator_norm, identity, spectral_norm, CMat, CVec, C64};
use crate::phase_space::Segment;
use crate::serde_util::{mat_from, mat_rows, ComplexRepr};

/// How the coefficients depend on time.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    /// `A_j(n) = A_j` for all `n`.
    Autonomous(Vec<CMat>),
    /// `A_j(n) = table[n mod p][j]`.
    Periodic(Vec<Vec<CMat>>),
    /// `A_j(n) = table[n][j]` for `n < table.len()`, undefined beyond.
    Tabulated(Vec<Vec<CMat>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemKind {
    Autonomous,
    Periodic { period: usize },
    Tabulated { horizon: usize },
}

#[derive(Debug, Clone)]
pub struct FiniteDelaySystem {
    dim: usize,
    delay: usize,
    coeffs: Coefficients,
    bound_k: f64,
    verify_growth: bool,
}

impl FiniteDelaySystem {
    pub fn new(coeffs: Coefficients) -> Result<Self> {
        let rows: Vec<&Vec<CMat>> = match &coeffs {
            Coefficients::Autonomous(a) => vec![a],
            Coefficients::Periodic(t) | Coefficients::Tabulated(t) => t.iter().collect(),
        };
        let Some(first) = rows.first() else {
            return Err(Error::arg("coefficient table is empty"));
        };
        let Some(a0) = first.first() else {
            return Err(Error::arg("at least one coefficient matrix A_0 is required"));
        };
        let dim = a0.nrows();
        let delay = first.len() - 1;
        if dim == 0 {
            return Err(Error::arg("dimension d must be positive"));
        }
        let mut max_norm: f64 = 0.0;
        for (n, row) in rows.iter().enumerate() {
            if row.len() != delay + 1 {
                return Err(Error::dims(format!(
                    "time {n} has {} coefficient matrices, expected r+1 = {}",
                    row.len(),
                    delay + 1
                )));
            }
            for (j, a) in row.iter().enumerate() {
                if a.nrows() != dim || a.ncols() != dim {
                    return Err(Error::dims(format!(
                        "A_{j}({n}) is {}x{}, expected {dim}x{dim}",
                        a.nrows(),
                        a.ncols()
                    )));
                }
                if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::arg(format!("A_{j}({n}) has non-finite entries")));
                }
                max_norm = max_norm.max(spectral_norm(a));
            }
        }
        Ok(FiniteDelaySystem {
            dim,
            delay,
            coeffs,
            bound_k: max_norm.max(1.0),
            verify_growth: false,
        })
    }

    pub fn autonomous(mats: Vec<CMat>) -> Result<Self> {
        Self::new(Coefficients::Autonomous(mats))
    }

    pub fn periodic(table: Vec<Vec<CMat>>) -> Result<Self> {
        Self::new(Coefficients::Periodic(table))
    }

    pub fn tabulated(table: Vec<Vec<CMat>>) -> Result<Self> {
        Self::new(Coefficients::Tabulated(table))
    }

    /// Scalar autonomous system with real coefficients `a_0, ..., a_r`.
    pub fn scalar(coeffs: &[f64]) -> Result<Self> {
        Self::autonomous(
            coeffs
                .iter()
                .map(|&a| CMat::from_element(1, 1, C64::new(a, 0.0)))
                .collect(),
        )
    }

    /// Scalar `p`-periodic system with `r = 0` and values `a(0), ..., a(p-1)`.
    pub fn scalar_periodic(values: &[f64]) -> Result<Self> {
        Self::periodic(
            values
                .iter()
                .map(|&a| vec![CMat::from_element(1, 1, C64::new(a, 0.0))])
                .collect(),
        )
    }

    /// Replaces the computed bound by a user-declared `K`; it must dominate
    /// every coefficient norm and be at least 1.
    pub fn with_bound(mut self, k: f64) -> Result<Self> {
        if !(k >= 1.0) {
            return Err(Error::arg(format!("bound K must be >= 1, got {k}")));
        }
        if k < self.bound_k * (1.0 - 1e-12) {
            return Err(Error::arg(format!(
                "declared K = {k} is below the largest coefficient norm {}",
                self.bound_k
            )));
        }
        self.bound_k = k.max(self.bound_k);
        Ok(self)
    }

    /// Enables the growth-bound check inside [`transition_matrix`].
    pub fn with_growth_check(mut self, on: bool) -> Self {
        self.verify_growth = on;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    /// Size `d(r+1)` of the lifted phase space.
    pub fn lift_dim(&self) -> usize {
        self.dim * (self.delay + 1)
    }

    pub fn bound_k(&self) -> f64 {
        self.bound_k
    }

    /// `M = (r+1) K`, a bound on the functional norms.
    pub fn functional_bound(&self) -> f64 {
        (self.delay as f64 + 1.0) * self.bound_k
    }

    /// `omega = log(M (1+r))`.
    pub fn omega(&self) -> f64 {
        (self.functional_bound() * (1.0 + self.delay as f64)).ln()
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn kind(&self) -> SystemKind {
        match &self.coeffs {
            Coefficients::Autonomous(_) => SystemKind::Autonomous,
            Coefficients::Periodic(t) => SystemKind::Periodic { period: t.len() },
            Coefficients::Tabulated(t) => SystemKind::Tabulated { horizon: t.len() },
        }
    }

    /// `A_j(n)`.
    pub fn coeff(&self, n: usize, j: usize) -> Result<&CMat> {
        if j > self.delay {
            return Err(Error::arg(format!("lag {j} exceeds the delay r = {}", self.delay)));
        }
        match &self.coeffs {
            Coefficients::Autonomous(a) => Ok(&a[j]),
            Coefficients::Periodic(t) => Ok(&t[n % t.len()][j]),
            Coefficients::Tabulated(t) => t.get(n).map(|row| &row[j]).ok_or_else(|| {
                Error::arg(format!(
                    "time {n} is beyond the tabulated horizon {}",
                    t.len()
                ))
            }),
        }
    }

    /// Lifted one-step matrix (block companion form) at time `n`.
    pub fn step_matrix(&self, n: usize) -> Result<CMat> {
        let d = self.dim;
        let size = self.lift_dim();
        let mut s = CMat::zeros(size, size);
        for j in 0..=self.delay {
            s.view_mut((0, j * d), (d, d)).copy_from(self.coeff(n, j)?);
        }
        for k in 1..=self.delay {
            s.view_mut((k * d, (k - 1) * d), (d, d)).copy_from(&identity(d));
        }
        Ok(s)
    }

    fn check_segment(&self, phi: &Segment) -> Result<()> {
        if phi.delay() != self.delay || phi.dim() != self.dim {
            return Err(Error::dims(format!(
                "segment has (r={}, d={}), system has (r={}, d={})",
                phi.delay(),
                phi.dim(),
                self.delay,
                self.dim
            )));
        }
        Ok(())
    }

    /// Parses the JSON system document, listing every offending field.
    pub fn from_json(doc: &Value) -> Result<Self> {
        parse_system(doc)
    }

    pub fn to_json(&self) -> Value {
        let mats = |row: &Vec<CMat>| row.iter().map(mat_rows).collect::<Vec<_>>();
        let (kind, period, a) = match &self.coeffs {
            Coefficients::Autonomous(a) => ("autonomous", None, serde_json::json!(mats(a))),
            Coefficients::Periodic(t) => (
                "periodic",
                Some(t.len()),
                serde_json::json!(t.iter().map(mats).collect::<Vec<_>>()),
            ),
            Coefficients::Tabulated(t) => (
                "tabulated",
                None,
                serde_json::json!(t.iter().map(mats).collect::<Vec<_>>()),
            ),
        };
        let mut v = serde_json::json!({
            "d": self.dim,
            "r": self.delay,
            "kind": kind,
            "matrices": { "A": a },
            "K": self.bound_k,
        });
        if let Some(p) = period {
            v["period"] = serde_json::json!(p);
        }
        v
    }
}

/// `L_n(phi) = sum_j A_j(n) phi(-j)`.
pub fn apply_functional(sys: &FiniteDelaySystem, n: usize, phi: &Segment) -> Result<CVec> {
    sys.check_segment(phi)?;
    let mut out = CVec::zeros(sys.dim);
    for j in 0..=sys.delay {
        out += sys.coeff(n, j)? * phi.at(-(j as isize));
    }
    Ok(out)
}

/// The segment at time `n + 1` given the segment `phi` at time `n`.
pub fn step_segment(sys: &FiniteDelaySystem, n: usize, phi: &Segment) -> Result<Segment> {
    let head = apply_functional(sys, n, phi)?;
    Ok(Segment::from_fn(sys.delay, sys.dim, |theta| {
        if theta == 0 {
            head.clone()
        } else {
            phi.at(theta + 1).clone()
        }
    }))
}

/// Matrix of the solution operator `T(n, m)` on the lift.
pub fn transition_matrix(sys: &FiniteDelaySystem, n: usize, m: usize) -> Result<CMat> {
    if n < m {
        return Err(Error::arg(format!("transition T({n}, {m}) needs n >= m")));
    }
    let mut t = identity(sys.lift_dim());
    for k in m..n {
        t = sys.step_matrix(k)? * t;
    }
    if sys.verify_growth {
        let norm = block_operator_norm(&t, sys.dim);
        let bound = (sys.omega() * (n - m) as f64).exp();
        if norm > bound * (1.0 + 1e-10) {
            return Err(Error::numeric(format!(
                "|T({n},{m})| = {norm:e} exceeds the growth bound {bound:e}"
            )));
        }
    }
    Ok(t)
}

/// A solution or pseudo-solution sampled at `n = -r, ..., N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    delay: usize,
    dim: usize,
    // values[k] holds n = k - delay
    values: Vec<CVec>,
}

impl Orbit {
    /// Orbit from values ordered `n = -r, ..., N`.
    pub fn from_values(delay: usize, values: Vec<CVec>) -> Result<Self> {
        if values.len() < delay + 1 {
            return Err(Error::arg(format!(
                "orbit needs at least r+1 = {} values, got {}",
                delay + 1,
                values.len()
            )));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::dims("orbit values have inconsistent dimensions"));
        }
        Ok(Orbit { delay, dim, values })
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Last time index `N`.
    pub fn last_time(&self) -> usize {
        self.values.len() - 1 - self.delay
    }

    /// `x(n)` for `-r <= n <= N`.
    pub fn at(&self, n: isize) -> &CVec {
        &self.values[(n + self.delay as isize) as usize]
    }

    /// Values ordered `n = -r, ..., N`.
    pub fn values(&self) -> &[CVec] {
        &self.values
    }

    /// The segment `x_n`, `0 <= n <= N`.
    pub fn segment(&self, n: usize) -> Segment {
        Segment::from_fn(self.delay, self.dim, |theta| self.at(n as isize + theta).clone())
    }

    /// `sup_n |x(n)|` over all stored times.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Pointwise difference of two orbits of the same shape.
    pub fn sub(&self, other: &Orbit) -> Result<Orbit> {
        if self.delay != other.delay || self.values.len() != other.values.len() || self.dim != other.dim {
            return Err(Error::dims("orbits have different shapes"));
        }
        Ok(Orbit {
            delay: self.delay,
            dim: self.dim,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// CSV with columns `n, re(x_1), im(x_1), ...`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv_writer(w);
        let mut header = vec!["n".to_string()];
        for i in 1..=self.dim {
            header.push(format!("re(x_{i})"));
            header.push(format!("im(x_{i})"));
        }
        write_row(&mut out, &header)?;
        for (k, v) in self.values.iter().enumerate() {
            let mut row = vec![(k as isize - self.delay as isize).to_string()];
            for z in v.iter() {
                row.push(fmt_num(z.re));
                row.push(fmt_num(z.im));
            }
            write_row(&mut out, &row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Additive forcing `z(0), ..., z(N)`, zero beyond its range.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSequence {
    dim: usize,
    values: Vec<CVec>,
    sup_norm: f64,
}

impl ForcingSequence {
    pub fn new(values: Vec<CVec>) -> Result<Self> {
        let Some(first) = values.first() else {
            return Err(Error::arg("forcing sequence is empty"));
        };
        let dim = first.len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::dims("forcing values have inconsistent dimensions"));
        }
        let sup_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(ForcingSequence { dim, values, sup_norm })
    }

    pub fn constant(value: CVec, len: usize) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn zeros(dim: usize, len: usize) -> Self {
        ForcingSequence { dim, values: vec![CVec::zeros(dim); len], sup_norm: 0.0 }
    }

    pub fn from_fn(dim: usize, len: usize, f: impl FnMut(usize) -> CVec) -> Result<Self> {
        let values: Vec<CVec> = (0..len).map(f).collect();
        if values.is_empty() {
            return Ok(Self::zeros(dim, 0));
        }
        Self::new(values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[CVec] {
        &self.values
    }

    /// `z(n)` with zero extension.
    pub fn at(&self, n: usize) -> CVec {
        self.values.get(n).cloned().unwrap_or_else(|| CVec::zeros(self.dim))
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn add(&self, other: &ForcingSequence) -> Result<ForcingSequence> {
        if self.dim != other.dim {
            return Err(Error::dims("forcing dimensions differ"));
        }
        let len = self.len().max(other.len());
        Self::from_fn(self.dim, len, |n| self.at(n) + other.at(n))
    }
}

/// Solution from `x_0 = phi0` over `steps` steps.
pub fn simulate(sys: &FiniteDelaySystem, phi0: &Segment, steps: usize) -> Result<Orbit> {
    simulate_forced(sys, phi0, &ForcingSequence::zeros(sys.dim, steps))
}

/// Solution of `x(n+1) = L_n(x_n) + z(n)` from `x_0 = phi0`, one step per
/// forcing value.
pub fn simulate_forced(
    sys: &FiniteDelaySystem,
    phi0: &Segment,
    z: &ForcingSequence,
) -> Result<Orbit> {
    sys.check_segment(phi0)?;
    if !z.is_empty() && z.dim() != sys.dim {
        return Err(Error::dims(format!(
            "forcing dimension {} differs from system dimension {}",
            z.dim(),
            sys.dim
        )));
    }
    let r = sys.delay;
    let mut values: Vec<CVec> = phi0.values().to_vec();
    values.reserve(z.len());
    for n in 0..z.len() {
        let base = values.len() - 1; // index of x(n)
        let mut next = z.at(n);
        for j in 0..=r {
            next += sys.coeff(n, j)? * &values[base - j];
        }
        values.push(next);
    }
    Orbit::from_values(r, values)
}

/// A sequence together with its exact one-step defect against the system.
#[derive(Debug, Clone)]
pub struct PseudoOrbit {
    pub orbit: Orbit,
    /// `|y(n+1) - L_n(y_n)|` for `0 <= n < N`.
    pub residuals: Vec<f64>,
    pub defect_bound: f64,
}

impl PseudoOrbit {
    /// The defect sequence `y(n+1) - L_n(y_n)` as a forcing.
    pub fn defects(&self, sys: &FiniteDelaySystem) -> Result<ForcingSequence> {
        defect_sequence(sys, &self.orbit)
    }
}

fn defect_sequence(sys: &FiniteDelaySystem, y: &Orbit) -> Result<ForcingSequence> {
    let n_last = y.last_time();
    let dim = sys.dim;
    let mut out = Vec::with_capacity(n_last);
    for n in 0..n_last {
        let mut z = y.at(n as isize + 1).clone();
        for j in 0..=sys.delay {
            z -= sys.coeff(n, j)? * y.at(n as isize - j as isize);
        }
        out.push(z);
    }
    if out.is_empty() {
        return Ok(ForcingSequence::zeros(dim, 0));
    }
    ForcingSequence::new(out)
}

/// Measures the defect of `y`, given as values at `n = -r, ..., N`.
pub fn defect(sys: &FiniteDelaySystem, y: Vec<CVec>) -> Result<PseudoOrbit> {
    if y.len() < sys.delay + 2 {
        return Err(Error::arg(format!(
            "a pseudo-orbit needs at least r+2 = {} values, got {}",
            sys.delay + 2,
            y.len()
        )));
    }
    if y.iter().any(|v| v.len() != sys.dim) {
        return Err(Error::dims("pseudo-orbit values do not match the system dimension"));
    }
    let orbit = Orbit::from_values(sys.delay, y)?;
    let defects = defect_sequence(sys, &orbit)?;
    let residuals: Vec<f64> = defects.values().iter().map(|v| v.norm()).collect();
    let defect_bound = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(PseudoOrbit { orbit, residuals, defect_bound })
}

fn parse_system(doc: &Value) -> Result<FiniteDelaySystem> {
    let mut errs = Vec::new();
    let get_usize = |key: &str, errs: &mut Vec<String>| -> Option<usize> {
        match doc.get(key) {
            None => {
                errs.push(format!("missing field \"{key}\""));
                None
            }
            Some(v) => match v.as_u64() {
                Some(x) => Some(x as usize),
                None => {
                    errs.push(format!("field \"{key}\" must be a nonnegative integer"));
                    None
                }
            },
        }
    };
    if !doc.is_object() {
        return Err(Error::Validation(vec!["system must be a JSON object".into()]));
    }
    let d = get_usize("d", &mut errs);
    let r = get_usize("r", &mut errs);
    if d == Some(0) {
        errs.push("field \"d\" must be positive".into());
    }
    let kind = match doc.get("kind").and_then(Value::as_str) {
        Some(k @ ("autonomous" | "periodic" | "tabulated")) => Some(k.to_string()),
        Some(other) => {
            errs.push(format!(
                "field \"kind\" must be autonomous, periodic or tabulated, got \"{other}\""
            ));
            None
        }
        None => {
            errs.push("missing field \"kind\"".into());
            None
        }
    };
    let bound = match doc.get("K") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_f64() {
            Some(k) => Some(k),
            None => {
                errs.push("field \"K\" must be a number".into());
                None
            }
        },
    };
    let a = doc.get("matrices").and_then(|m| m.get("A"));
    if a.is_none() {
        errs.push("missing field \"matrices.A\"".into());
    }
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let (d, r, kind, a) = (d.unwrap(), r.unwrap(), kind.unwrap(), a.unwrap());

    let parse_row = |v: &Value, ctx: &str, errs: &mut Vec<String>| -> Option<Vec<CMat>> {
        let raw: Vec<Vec<Vec<ComplexRepr>>> = match serde_json::from_value(v.clone()) {
            Ok(x) => x,
            Err(e) => {
                errs.push(format!("{ctx}: expected a list of matrices ({e})"));
                return None;
            }
        };
        if raw.len() != r + 1 {
            errs.push(format!("{ctx}: expected r+1 = {} matrices, got {}", r + 1, raw.len()));
            return None;
        }
        let mut out = Vec::new();
        for (j, m) in raw.iter().enumerate() {
            match mat_from(m) {
                Ok(mat) if mat.nrows() == d && mat.ncols() == d => out.push(mat),
                Ok(mat) => {
                    errs.push(format!(
                        "{ctx}[{j}]: matrix is {}x{}, expected {d}x{d}",
                        mat.nrows(),
                        mat.ncols()
                    ));
                }
                Err(e) => errs.push(format!("{ctx}[{j}]: {e}")),
            }
        }
        (out.len() == r + 1).then_some(out)
    };

    let coeffs = if kind == "autonomous" {
        parse_row(a, "matrices.A", &mut errs).map(Coefficients::Autonomous)
    } else {
        let rows = a.as_array().cloned().unwrap_or_default();
        if rows.is_empty() {
            errs.push("matrices.A: expected a non-empty list of per-time coefficient lists".into());
        }
        let table: Vec<Option<Vec<CMat>>> = rows
            .iter()
            .enumerate()
            .map(|(n, row)| parse_row(row, &format!("matrices.A[{n}]"), &mut errs))
            .collect();
        if kind == "periodic" {
            match doc.get("period").and_then(Value::as_u64) {
                Some(p) if p as usize == rows.len() && p > 0 => {}
                Some(p) => errs.push(format!(
                    "field \"period\" = {p} does not match the {} tabulated phases",
                    rows.len()
                )),
                None if doc.get("period").is_some() => {
                    errs.push("field \"period\" must be a positive integer".into())
                }
                None => {}
            }
        }
        if table.iter().all(Option::is_some) && !table.is_empty() {
            let t: Vec<Vec<CMat>> = table.into_iter().map(Option::unwrap).collect();
            Some(if kind == "periodic" {
                Coefficients::Periodic(t)
            } else {
                Coefficients::Tabulated(t)
            })
        } else {
            None
        }
    };
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let sys = FiniteDelaySystem::new(coeffs.expect("validated"))?;
    match bound {
        Some(k) => sys.with_bound(k).map_err(|e| Error::Validation(vec![format!("field \"K\": {e}")])),
        None => Ok(sys),
    }
}
