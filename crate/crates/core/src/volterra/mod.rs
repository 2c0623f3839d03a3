//! Volterra convolution systems `x(n+1) = sum_{j>=0} A(j) x(n-j)` with
//! exponentially decaying kernels.
//!
//! Histories live in the weighted space with norm
//! `sup_theta |phi(theta)| e^{gamma theta}`; the kernel must satisfy
//! `sum_j |A(j)| e^{gamma j} < infinity`, which is checked on construction.

mod dynamics;
mod roots;
mod spectral;

pub use dynamics::{
    adjoint_step, bilinear, bilinear_constant, bilinear_matrix, volterra_step, volterra_step_forced,
};
pub use roots::{find_roots, Root, RootOptions, Spectrum};
pub use spectral::{
    coordinate_dynamics, project_cu, resonant_forcing, spectral_decomposition, voc_simulate,
    DecompositionOptions, GrowthReport, SpectralDecomposition, VocResult,
};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{identity, spectral_norm, CMat, C64};
use crate::serde_util::{mat_from, mat_rows, pair, ComplexRepr};

/// Cut-off for the weighted tail of a geometric kernel, relative to its
/// weighted sum.
const REACH_TOL: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelTerms {
    /// `A(0), ..., A(J)`, zero beyond `J` up to a declared weighted tail.
    Finite { terms: Vec<CMat>, declared_tail: f64 },
    /// `A(j) = C rho^j`.
    Geometric { c: CMat, rho: C64 },
}

#[derive(Debug, Clone)]
pub struct VolterraKernel {
    dim: usize,
    gamma: f64,
    gamma_tilde: f64,
    terms: KernelTerms,
    weighted_sum: f64,
    reach: usize,
}

impl VolterraKernel {
    /// Finitely supported kernel `A(0..=J)`.
    pub fn finite(gamma: f64, terms: Vec<CMat>) -> Result<Self> {
        Self::finite_with_tail(gamma, terms, 0.0)
    }

    /// Finitely stored kernel whose remaining terms satisfy
    /// `sum_{j>J} |A(j)| e^{gamma j} <= declared_tail`. Dynamics use the
    /// stored terms only and carry the tail in their error bounds.
    pub fn finite_with_tail(gamma: f64, terms: Vec<CMat>, declared_tail: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let Some(first) = terms.first() else {
            return Err(Error::arg("a finite kernel needs at least A(0)"));
        };
        let dim = first.nrows();
        if dim == 0 {
            return Err(Error::arg("kernel dimension must be positive"));
        }
        if let Some(j) = terms.iter().position(|a| a.nrows() != dim || a.ncols() != dim) {
            return Err(Error::dims(format!("A({j}) is not {dim}x{dim}")));
        }
        if terms.iter().any(|a| a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(Error::arg("kernel terms must be finite"));
        }
        if !(declared_tail >= 0.0 && declared_tail.is_finite()) {
            return Err(Error::arg("declared tail must be finite and nonnegative"));
        }
        let weighted_sum = terms
            .iter()
            .enumerate()
            .map(|(j, a)| spectral_norm(a) * (gamma * j as f64).exp())
            .sum::<f64>()
            + declared_tail;
        if !weighted_sum.is_finite() {
            return Err(Error::arg("weighted kernel sum overflows"));
        }
        let reach = terms.len() - 1;
        Ok(VolterraKernel {
            dim,
            gamma,
            gamma_tilde: gamma / 2.0,
            terms: KernelTerms::Finite { terms, declared_tail },
            weighted_sum,
            reach,
        })
    }

    /// Geometric kernel `A(j) = C rho^j`, admissible when `|rho| e^gamma < 1`.
    pub fn geometric(gamma: f64, c: CMat, rho: C64) -> Result<Self> {
        check_gamma(gamma)?;
        let dim = c.nrows();
        if dim == 0 || c.ncols() != dim {
            return Err(Error::dims("C must be a nonempty square matrix"));
        }
        let q = rho.norm() * gamma.exp();
        if !(q < 1.0) {
            return Err(Error::arg(format!(
                "geometric kernel needs |rho| e^gamma < 1, got {q}"
            )));
        }
        let cn = spectral_norm(&c);
        let weighted_sum = cn / (1.0 - q);
        let target = REACH_TOL * weighted_sum.max(1.0);
        let mut reach = 0;
        if cn > 0.0 && q > 0.0 {
            // smallest J with |C| q^{J+1} / (1 - q) <= target
            let j = ((target * (1.0 - q) / cn).ln() / q.ln()).ceil() - 1.0;
            reach = j.max(0.0) as usize;
        }
        Ok(VolterraKernel {
            dim,
            gamma,
            gamma_tilde: gamma / 2.0,
            terms: KernelTerms::Geometric { c, rho },
            weighted_sum,
            reach,
        })
    }

    /// Scalar finite kernel from real terms.
    pub fn scalar(gamma: f64, terms: &[f64]) -> Result<Self> {
        Self::finite(gamma, terms.iter().map(|&a| CMat::from_element(1, 1, C64::new(a, 0.0))).collect())
    }

    /// Sets the adjoint decay rate, `0 < gamma_tilde < gamma`.
    pub fn with_gamma_tilde(mut self, gamma_tilde: f64) -> Result<Self> {
        if !(gamma_tilde > 0.0 && gamma_tilde < self.gamma) {
            return Err(Error::arg(format!(
                "adjoint rate must lie in (0, {}), got {gamma_tilde}",
                self.gamma
            )));
        }
        self.gamma_tilde = gamma_tilde;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_tilde(&self) -> f64 {
        self.gamma_tilde
    }

    pub fn terms(&self) -> &KernelTerms {
        &self.terms
    }

    /// `sum_j |A(j)| e^{gamma j}`.
    pub fn weighted_sum(&self) -> f64 {
        self.weighted_sum
    }

    /// Number of terms summed by the dynamics: `J` for finite kernels, the
    /// cut-off below which the weighted tail is negligible for geometric ones.
    pub fn reach(&self) -> usize {
        self.reach
    }

    pub fn term(&self, j: usize) -> CMat {
        match &self.terms {
            KernelTerms::Finite { terms, .. } => {
                terms.get(j).cloned().unwrap_or_else(|| CMat::zeros(self.dim, self.dim))
            }
            KernelTerms::Geometric { c, rho } => c * rho.powi(j as i32),
        }
    }

    /// `sum_{j>h} |A(j)| e^{gamma j}`.
    pub fn weighted_tail(&self, h: usize) -> f64 {
        match &self.terms {
            KernelTerms::Finite { terms, declared_tail } => {
                terms
                    .iter()
                    .enumerate()
                    .skip(h + 1)
                    .map(|(j, a)| spectral_norm(a) * (self.gamma * j as f64).exp())
                    .sum::<f64>()
                    + declared_tail
            }
            KernelTerms::Geometric { c, rho } => {
                let q = rho.norm() * self.gamma.exp();
                spectral_norm(c) * q.powi(h as i32 + 1) / (1.0 - q)
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.terms {
            KernelTerms::Finite { .. } => "finite",
            KernelTerms::Geometric { .. } => "geometric",
        }
    }

    pub fn from_json(doc: &Value) -> Result<Self> {
        parse_kernel(doc)
    }

    pub fn to_json(&self) -> Value {
        let terms = match &self.terms {
            KernelTerms::Finite { terms, .. } => json!(terms.iter().map(mat_rows).collect::<Vec<_>>()),
            KernelTerms::Geometric { c, rho } => json!({"C": mat_rows(c), "rho": pair(*rho)}),
        };
        let mut doc = json!({
            "d": self.dim,
            "gamma": self.gamma,
            "gamma_tilde": self.gamma_tilde,
            "type": self.kind_name(),
            "terms": terms,
        });
        if let KernelTerms::Finite { declared_tail, .. } = &self.terms {
            if *declared_tail > 0.0 {
                doc["tail_bound"] = json!(declared_tail);
            }
        }
        doc
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("decay rate gamma must be positive, got {gamma}")))
    }
}

/// `Delta(lambda)`, its derivative, and a bound on the neglected tail.
#[derive(Debug, Clone)]
pub struct CharEval {
    pub delta: CMat,
    pub derivative: CMat,
    pub tail_bound: f64,
}

/// `Delta(lambda) = lambda E - sum_j lambda^{-j} A(j)` for `|lambda| > e^{-gamma}`.
pub fn char_matrix(k: &VolterraKernel, lam: C64) -> Result<CMat> {
    Ok(char_eval(k, lam)?.delta)
}

pub fn char_eval(k: &VolterraKernel, lam: C64) -> Result<CharEval> {
    let floor = (-k.gamma).exp();
    if !(lam.norm() > floor) {
        return Err(Error::Domain(format!(
            "|lambda| = {} must exceed e^(-gamma) = {floor}",
            lam.norm()
        )));
    }
    let e = identity(k.dim);
    match &k.terms {
        KernelTerms::Finite { terms, declared_tail } => {
            let mu = lam.inv();
            let mut sum = CMat::zeros(k.dim, k.dim);
            let mut dsum = CMat::zeros(k.dim, k.dim);
            for (j, a) in terms.iter().enumerate().rev() {
                sum = sum * mu + a;
                if j > 0 {
                    dsum += a * (mu.powi(j as i32 + 1) * j as f64);
                }
            }
            let ratio = floor / lam.norm();
            let tail_bound = declared_tail * ratio.powi(terms.len() as i32);
            Ok(CharEval { delta: &e * lam - sum, derivative: e + dsum, tail_bound })
        }
        KernelTerms::Geometric { c, rho } => {
            let gap = lam - rho;
            Ok(CharEval {
                delta: &e * lam - c * (lam / gap),
                derivative: e + c * (rho / (gap * gap)),
                tail_bound: 0.0,
            })
        }
    }
}

pub fn char_det(k: &VolterraKernel, lam: C64) -> Result<C64> {
    Ok(char_matrix(k, lam)?.determinant())
}

fn parse_matrix(v: &Value, d: usize, ctx: &str, errs: &mut Vec<String>) -> Option<CMat> {
    if d == 1 {
        if let Ok(z) = serde_json::from_value::<ComplexRepr>(v.clone()) {
            return Some(CMat::from_element(1, 1, z.into()));
        }
    }
    let raw: Vec<Vec<ComplexRepr>> = match serde_json::from_value(v.clone()) {
        Ok(x) => x,
        Err(_) => {
            errs.push(format!("{ctx}: expected a {d}x{d} matrix"));
            return None;
        }
    };
    match mat_from(&raw) {
        Ok(m) if m.nrows() == d && m.ncols() == d => Some(m),
        Ok(m) => {
            errs.push(format!("{ctx}: matrix is {}x{}, expected {d}x{d}", m.nrows(), m.ncols()));
            None
        }
        Err(e) => {
            errs.push(format!("{ctx}: {e}"));
            None
        }
    }
}

fn parse_kernel(doc: &Value) -> Result<VolterraKernel> {
    let mut errs = Vec::new();
    if !doc.is_object() {
        return Err(Error::Validation(vec!["kernel must be a JSON object".into()]));
    }
    let d = match doc.get("d").map(Value::as_u64) {
        None => {
            errs.push("missing field \"d\"".into());
            None
        }
        Some(Some(d)) if d > 0 => Some(d as usize),
        Some(_) => {
            errs.push("field \"d\" must be a positive integer".into());
            None
        }
    };
    let gamma = match doc.get("gamma").map(Value::as_f64) {
        None => {
            errs.push("missing field \"gamma\"".into());
            None
        }
        Some(Some(g)) if g > 0.0 && g.is_finite() => Some(g),
        Some(_) => {
            errs.push("field \"gamma\" must be a positive number".into());
            None
        }
    };
    let kind = match doc.get("type").and_then(Value::as_str) {
        Some(t @ ("finite" | "geometric")) => Some(t),
        Some(t) => {
            errs.push(format!("field \"type\" must be finite or geometric, got \"{t}\""));
            None
        }
        None => {
            errs.push("missing field \"type\"".into());
            None
        }
    };
    let gamma_tilde = match doc.get("gamma_tilde") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_f64() {
            Some(g) => Some(g),
            None => {
                errs.push("field \"gamma_tilde\" must be a number".into());
                None
            }
        },
    };
    let terms = doc.get("terms");
    if terms.is_none() {
        errs.push("missing field \"terms\"".into());
    }
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let (d, gamma, kind, terms) = (d.unwrap(), gamma.unwrap(), kind.unwrap(), terms.unwrap());

    let kernel = if kind == "finite" {
        let Some(list) = terms.as_array().filter(|l| !l.is_empty()) else {
            return Err(Error::Validation(vec!["terms: expected a non-empty list of matrices".into()]));
        };
        let mats: Vec<Option<CMat>> = list
            .iter()
            .enumerate()
            .map(|(j, v)| parse_matrix(v, d, &format!("terms[{j}]"), &mut errs))
            .collect();
        let tail = match doc.get("tail_bound") {
            None | Some(Value::Null) => 0.0,
            Some(v) => v.as_f64().unwrap_or_else(|| {
                errs.push("field \"tail_bound\" must be a number".into());
                0.0
            }),
        };
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        VolterraKernel::finite_with_tail(gamma, mats.into_iter().map(Option::unwrap).collect(), tail)
    } else {
        let c = terms.get("C").map(|v| parse_matrix(v, d, "terms.C", &mut errs));
        if c.is_none() {
            errs.push("missing field \"terms.C\"".into());
        }
        let rho = match terms.get("rho").map(|v| serde_json::from_value::<ComplexRepr>(v.clone())) {
            Some(Ok(z)) => Some(C64::from(z)),
            Some(Err(_)) => {
                errs.push("field \"terms.rho\" must be a number or [re, im]".into());
                None
            }
            None => {
                errs.push("missing field \"terms.rho\"".into());
                None
            }
        };
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        VolterraKernel::geometric(gamma, c.flatten().expect("validated"), rho.expect("validated"))
    };
    let kernel = kernel.map_err(|e| Error::Validation(vec![e.to_string()]))?;
    match gamma_tilde {
        Some(g) => kernel.with_gamma_tilde(g).map_err(|e| Error::Validation(vec![e.to_string()])),
        None => Ok(kernel),
    }
}
