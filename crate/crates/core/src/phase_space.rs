//! Segments of solutions: the finite history block used by finite-delay
//! systems, the exponentially weighted history used by Volterra systems, and
//! the row-vector histories of the adjoint equation.
//!
//! All public accessors are indexed by the history offset `theta <= 0` (or
//! `zeta >= 0` for adjoint histories), never by storage position.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{CRow, CVec, C64};
use crate::serde_util::{vec_from, vec_pairs, ComplexRepr};

/// An element of the finite-delay phase space: values at `theta = -r..=0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    delay: usize,
    dim: usize,
    // values[k] holds theta = k - delay
    values: Vec<CVec>,
}

impl Segment {
    /// Builds a segment from values ordered `theta = -r, ..., 0`.
    pub fn new(values: Vec<CVec>) -> Result<Self> {
        let Some(first) = values.first() else {
            return Err(Error::arg("a segment needs at least one value"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::arg("segment values must have positive dimension"));
        }
        if let Some(bad) = values.iter().position(|v| v.len() != dim) {
            return Err(Error::dims(format!(
                "segment entry {bad} has dimension {}, expected {dim}",
                values[bad].len()
            )));
        }
        Ok(Segment { delay: values.len() - 1, dim, values })
    }

    pub fn zeros(delay: usize, dim: usize) -> Self {
        Segment { delay, dim, values: vec![CVec::zeros(dim); delay + 1] }
    }

    pub fn from_fn(delay: usize, dim: usize, mut f: impl FnMut(isize) -> CVec) -> Self {
        let values = (0..=delay)
            .map(|k| {
                let v = f(k as isize - delay as isize);
                assert_eq!(v.len(), dim, "segment generator returned wrong dimension");
                v
            })
            .collect();
        Segment { delay, dim, values }
    }

    /// Scalar segment from values ordered `theta = -r, ..., 0`.
    pub fn scalar(values: &[C64]) -> Result<Self> {
        Segment::new(values.iter().map(|&z| CVec::from_element(1, z)).collect())
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at `theta`, `-r <= theta <= 0`.
    pub fn at(&self, theta: isize) -> &CVec {
        self.get(theta)
            .unwrap_or_else(|| panic!("theta {theta} outside [-{}, 0]", self.delay))
    }

    pub fn get(&self, theta: isize) -> Option<&CVec> {
        if theta > 0 || theta < -(self.delay as isize) {
            return None;
        }
        self.values.get((theta + self.delay as isize) as usize)
    }

    /// Values ordered `theta = -r, ..., 0`.
    pub fn values(&self) -> &[CVec] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        segment_norm(self)
    }

    pub fn scaled(&self, alpha: C64) -> Segment {
        Segment {
            delay: self.delay,
            dim: self.dim,
            values: self.values.iter().map(|v| v * alpha).collect(),
        }
    }

    pub fn add(&self, other: &Segment) -> Result<Segment> {
        self.check_shape(other)?;
        Ok(Segment {
            delay: self.delay,
            dim: self.dim,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Segment) -> Result<Segment> {
        self.add(&other.scaled(C64::new(-1.0, 0.0)))
    }

    pub fn check_shape(&self, other: &Segment) -> Result<()> {
        if self.delay != other.delay || self.dim != other.dim {
            return Err(Error::dims(format!(
                "segments of shape (r={}, d={}) and (r={}, d={})",
                self.delay, self.dim, other.delay, other.dim
            )));
        }
        Ok(())
    }

    /// Lifted coordinates in `C^{d(r+1)}`: block `k` holds `theta = -k`.
    pub fn to_lift(&self) -> CVec {
        let mut out = CVec::zeros(self.dim * (self.delay + 1));
        for k in 0..=self.delay {
            out.rows_mut(k * self.dim, self.dim)
                .copy_from(self.at(-(k as isize)));
        }
        out
    }

    pub fn from_lift(delay: usize, dim: usize, lift: &CVec) -> Result<Segment> {
        if lift.len() != dim * (delay + 1) {
            return Err(Error::dims(format!(
                "lifted vector of length {} for r={delay}, d={dim}",
                lift.len()
            )));
        }
        Ok(Segment::from_fn(delay, dim, |theta| {
            let k = (-theta) as usize;
            lift.rows(k * dim, dim).clone_owned()
        }))
    }
}

/// Sup over `theta` of the Euclidean norm of the segment values.
pub fn segment_norm(s: &Segment) -> f64 {
    s.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

impl Serialize for Segment {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.iter().map(vec_pairs).collect::<Vec<_>>().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Segment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<Vec<ComplexRepr>>::deserialize(d)?;
        Segment::new(raw.iter().map(|v| vec_from(v)).collect()).map_err(D::Error::custom)
    }
}

/// A truncated history in the weighted phase space of a Volterra system.
///
/// Stored values cover `theta = -H..=0`; everything deeper is zero. The
/// `tail_bound` field carries an upper bound for the weighted-norm error a
/// consumer inherits from truncating the history or the kernel upstream.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    gamma: f64,
    dim: usize,
    // values[k] holds theta = -k
    values: Vec<CVec>,
    pub tail_bound: f64,
}

impl HistorySegment {
    /// Builds a history from values ordered `theta = 0, -1, ..., -H`.
    pub fn new(gamma: f64, values: Vec<CVec>) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::arg(format!("decay rate gamma must be positive, got {gamma}")));
        }
        let Some(first) = values.first() else {
            return Err(Error::arg("a history needs at least the value at theta = 0"));
        };
        let dim = first.len();
        if let Some(bad) = values.iter().position(|v| v.len() != dim) {
            return Err(Error::dims(format!(
                "history entry at theta=-{bad} has dimension {}, expected {dim}",
                values[bad].len()
            )));
        }
        Ok(HistorySegment { gamma, dim, values, tail_bound: 0.0 })
    }

    pub fn zeros(gamma: f64, dim: usize, depth: usize) -> Self {
        HistorySegment { gamma, dim, values: vec![CVec::zeros(dim); depth + 1], tail_bound: 0.0 }
    }

    pub fn from_fn(gamma: f64, dim: usize, depth: usize, mut f: impl FnMut(isize) -> CVec) -> Self {
        let values = (0..=depth)
            .map(|k| {
                let v = f(-(k as isize));
                assert_eq!(v.len(), dim, "history generator returned wrong dimension");
                v
            })
            .collect();
        HistorySegment { gamma, dim, values, tail_bound: 0.0 }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Truncation depth `H`.
    pub fn depth(&self) -> usize {
        self.values.len() - 1
    }

    /// Stored value at `theta`, `None` in the zero tail.
    pub fn get(&self, theta: isize) -> Option<&CVec> {
        if theta > 0 {
            return None;
        }
        self.values.get((-theta) as usize)
    }

    /// Value at `theta` with zero extension.
    pub fn value(&self, theta: isize) -> CVec {
        self.get(theta).cloned().unwrap_or_else(|| CVec::zeros(self.dim))
    }

    /// Values ordered `theta = 0, -1, ..., -H`.
    pub fn values(&self) -> &[CVec] {
        &self.values
    }

    pub(crate) fn from_parts(gamma: f64, dim: usize, values: Vec<CVec>, tail_bound: f64) -> Self {
        HistorySegment { gamma, dim, values, tail_bound }
    }

    pub fn weighted_norm(&self) -> f64 {
        weighted_norm(self)
    }

    /// Same history stored to a larger depth (zero padded); never truncates.
    pub fn deepened(&self, depth: usize) -> HistorySegment {
        let mut out = self.clone();
        while out.values.len() < depth + 1 {
            out.values.push(CVec::zeros(self.dim));
        }
        out
    }

    pub fn scaled(&self, alpha: C64) -> HistorySegment {
        HistorySegment {
            gamma: self.gamma,
            dim: self.dim,
            values: self.values.iter().map(|v| v * alpha).collect(),
            tail_bound: self.tail_bound * alpha.norm(),
        }
    }

    /// Sum with zero extension of the shallower operand.
    pub fn add(&self, other: &HistorySegment) -> Result<HistorySegment> {
        if self.dim != other.dim {
            return Err(Error::dims(format!("histories of dimension {} and {}", self.dim, other.dim)));
        }
        let depth = self.depth().max(other.depth());
        let values = (0..=depth)
            .map(|k| {
                let t = -(k as isize);
                self.value(t) + other.value(t)
            })
            .collect();
        Ok(HistorySegment {
            gamma: self.gamma,
            dim: self.dim,
            values,
            tail_bound: self.tail_bound + other.tail_bound,
        })
    }

    pub fn sub(&self, other: &HistorySegment) -> Result<HistorySegment> {
        self.add(&other.scaled(C64::new(-1.0, 0.0)))
    }
}

/// `sup_theta |phi(theta)| e^{gamma theta}` over the stored entries.
pub fn weighted_norm(s: &HistorySegment) -> f64 {
    s.values
        .iter()
        .enumerate()
        .map(|(k, v)| v.norm() * (-s.gamma * k as f64).exp())
        .fold(0.0, f64::max)
}

/// Embeds `x` as the history equal to `x` at `theta = 0` and zero elsewhere.
pub fn gamma_embed(x: &CVec, gamma: f64, depth: usize) -> Result<HistorySegment> {
    let mut h = HistorySegment::new(gamma, vec![x.clone()])?;
    h = h.deepened(depth);
    Ok(h)
}

/// A truncated row-vector history for the adjoint equation, `zeta = 0..=H`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSegment {
    gamma_tilde: f64,
    dim: usize,
    values: Vec<CRow>,
}

impl AdjointSegment {
    /// Builds an adjoint history from values ordered `zeta = 0, 1, ..., H`.
    pub fn new(gamma_tilde: f64, values: Vec<CRow>) -> Result<Self> {
        if !(gamma_tilde > 0.0 && gamma_tilde.is_finite()) {
            return Err(Error::arg(format!(
                "adjoint decay rate must be positive, got {gamma_tilde}"
            )));
        }
        let Some(first) = values.first() else {
            return Err(Error::arg("an adjoint history needs at least the value at zeta = 0"));
        };
        let dim = first.len();
        if let Some(bad) = values.iter().position(|v| v.len() != dim) {
            return Err(Error::dims(format!(
                "adjoint entry at zeta={bad} has dimension {}, expected {dim}",
                values[bad].len()
            )));
        }
        Ok(AdjointSegment { gamma_tilde, dim, values })
    }

    pub fn zeros(gamma_tilde: f64, dim: usize, depth: usize) -> Self {
        AdjointSegment { gamma_tilde, dim, values: vec![CRow::zeros(dim); depth + 1] }
    }

    pub fn from_fn(
        gamma_tilde: f64,
        dim: usize,
        depth: usize,
        mut f: impl FnMut(usize) -> CRow,
    ) -> Self {
        let values = (0..=depth)
            .map(|z| {
                let v = f(z);
                assert_eq!(v.len(), dim, "adjoint generator returned wrong dimension");
                v
            })
            .collect();
        AdjointSegment { gamma_tilde, dim, values }
    }

    pub fn gamma_tilde(&self) -> f64 {
        self.gamma_tilde
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, zeta: usize) -> Option<&CRow> {
        self.values.get(zeta)
    }

    pub fn value(&self, zeta: usize) -> CRow {
        self.get(zeta).cloned().unwrap_or_else(|| CRow::zeros(self.dim))
    }

    pub fn values(&self) -> &[CRow] {
        &self.values
    }

    pub(crate) fn from_parts(gamma_tilde: f64, dim: usize, values: Vec<CRow>) -> Self {
        AdjointSegment { gamma_tilde, dim, values }
    }

    /// `sup_zeta |psi(zeta)| e^{-gamma_tilde zeta}` over stored entries.
    pub fn weighted_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(z, v)| v.norm() * (-self.gamma_tilde * z as f64).exp())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, alpha: C64) -> AdjointSegment {
        AdjointSegment {
            gamma_tilde: self.gamma_tilde,
            dim: self.dim,
            values: self.values.iter().map(|v| v * alpha).collect(),
        }
    }
}
