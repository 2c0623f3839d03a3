//! Characteristic roots in an annulus by the argument principle.
//!
//! Winding numbers of `det Delta` are tracked along sampled contours, with
//! adaptive bisection wherever the argument turns too fast. The annulus is
//! split into sectors until each holds a single root (or a cluster that has
//! shrunk below resolution), and each is polished by Newton's method on
//! `det Delta`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{char_det, char_eval, VolterraKernel};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::serde_util::complex;

const START_ANGLE: f64 = 0.318_309_886_183_790_7;
const MAX_BISECT: usize = 48;
const MAX_SAMPLES: usize = 1 << 16;
const JITTER: [f64; 5] = [0.0137, -0.0291, 0.0419, -0.0573, 0.0661];

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Defaults to `max(1.05 e^{-gamma}, 1e-3)`.
    pub inner: Option<f64>,
    /// Defaults to `1 + weighted_sum`.
    pub outer: Option<f64>,
    /// Initial samples per contour.
    pub grid: usize,
    /// Required `|det Delta|` at each polished root.
    pub tol: f64,
    pub circle_tol: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions { inner: None, outer: None, grid: 64, tol: 1e-10, circle_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Root {
    #[serde(with = "complex")]
    pub value: C64,
    pub modulus: f64,
    pub multiplicity: usize,
    /// `|det Delta(lambda)|` after polishing.
    pub residual: f64,
    pub on_circle: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub roots: Vec<Root>,
    pub annulus: (f64, f64),
    /// Roots with `|lambda| >= 1 - circle_tol`.
    pub cu_roots: Vec<Root>,
    /// Total count from the winding numbers of the bounding circles.
    pub winding_total: usize,
    /// The same count on a four times finer base grid.
    pub winding_refined: usize,
    pub circle_tol: f64,
    pub min_distance_to_unit_circle: f64,
    pub hyperbolic: bool,
}

impl Spectrum {
    pub fn on_circle(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter().filter(|r| r.on_circle)
    }
}

#[derive(Debug, Clone, Copy)]
struct Sector {
    r1: f64,
    r2: f64,
    a1: f64,
    a2: f64,
}

impl Sector {
    fn center(&self) -> C64 {
        C64::from_polar(0.5 * (self.r1 + self.r2), 0.5 * (self.a1 + self.a2))
    }

    fn arc_width(&self) -> f64 {
        0.5 * (self.r1 + self.r2) * (self.a2 - self.a1)
    }

    fn is_compact(&self) -> bool {
        self.a2 - self.a1 <= PI / 4.0 && self.r2 - self.r1 <= 0.5 * self.r1.max(0.1)
    }

    fn contains(&self, z: C64, margin: f64) -> bool {
        let m = z.norm();
        if m < self.r1 * (1.0 - margin) || m > self.r2 * (1.0 + margin) {
            return false;
        }
        let width = self.a2 - self.a1;
        let mut a = z.arg();
        while a < self.a1 - margin * width {
            a += 2.0 * PI;
        }
        a <= self.a2 + margin * width
    }

    fn split(&self, frac: f64) -> (Sector, Sector) {
        if self.arc_width() >= self.r2 - self.r1 {
            let a = self.a1 + frac * (self.a2 - self.a1);
            (Sector { a2: a, ..*self }, Sector { a1: a, ..*self })
        } else {
            let r = self.r1 + frac * (self.r2 - self.r1);
            (Sector { r2: r, ..*self }, Sector { r1: r, ..*self })
        }
    }

    fn diameter(&self) -> f64 {
        (self.r2 - self.r1).max(self.r2 * (self.a2 - self.a1).min(2.0))
    }
}

struct Finder<'a> {
    k: &'a VolterraKernel,
    grid: usize,
}

impl Finder<'_> {
    fn f(&self, z: C64) -> Result<C64> {
        let v = char_det(self.k, z)?;
        if v == C64::new(0.0, 0.0) || !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::numeric(format!("det Delta vanishes or overflows on the contour at {z}")));
        }
        Ok(v)
    }

    fn arg_change(
        &self,
        path: &dyn Fn(f64) -> C64,
        (t0, f0): (f64, C64),
        (t1, f1): (f64, C64),
        depth: usize,
    ) -> Result<f64> {
        let d = (f1 / f0).arg();
        if d.abs() <= PI / 4.0 {
            return Ok(d);
        }
        if depth >= MAX_BISECT {
            return Err(Error::numeric("argument of det Delta not resolved; use a finer grid"));
        }
        let tm = 0.5 * (t0 + t1);
        let fm = self.f(path(tm))?;
        Ok(self.arg_change(path, (t0, f0), (tm, fm), depth + 1)?
            + self.arg_change(path, (tm, fm), (t1, f1), depth + 1)?)
    }

    /// Total argument change along `path` on `[0, 1]`, in turns.
    fn turns(&self, path: &dyn Fn(f64) -> C64, samples: usize) -> Result<f64> {
        let mut total = 0.0;
        let mut prev = (0.0, self.f(path(0.0))?);
        for i in 1..=samples {
            let t = i as f64 / samples as f64;
            let cur = (t, self.f(path(t))?);
            total += self.arg_change(path, prev, cur, 0)?;
            prev = cur;
        }
        Ok(total / (2.0 * PI))
    }

    fn sector_turns(&self, s: &Sector, samples: usize) -> Result<f64> {
        let n = (samples / 4).max(8);
        let Sector { r1, r2, a1, a2 } = *s;
        let outer = move |t: f64| C64::from_polar(r2, a1 + (a2 - a1) * t);
        let down = move |t: f64| C64::from_polar(r2 + (r1 - r2) * t, a2);
        let inner = move |t: f64| C64::from_polar(r1, a2 + (a1 - a2) * t);
        let up = move |t: f64| C64::from_polar(r1 + (r2 - r1) * t, a1);
        Ok(self.turns(&outer, n)? + self.turns(&down, n)? + self.turns(&inner, n)? + self.turns(&up, n)?)
    }

    /// Number of roots inside `s`, stable under doubling of the grid.
    fn count(&self, s: &Sector) -> Result<usize> {
        let mut samples = self.grid;
        let mut last = to_count(self.sector_turns(s, samples)?)?;
        while samples < MAX_SAMPLES {
            samples *= 2;
            let next = to_count(self.sector_turns(s, samples)?)?;
            if next == last {
                return Ok(next);
            }
            last = next;
        }
        Err(Error::numeric("winding count unstable under refinement; use a finer grid"))
    }

    fn disk_count(&self, z: C64, radius: f64) -> Option<usize> {
        let path = move |t: f64| z + C64::from_polar(radius, START_ANGLE + 2.0 * PI * t);
        let a = to_count(self.turns(&path, self.grid).ok()?).ok()?;
        let b = to_count(self.turns(&path, 2 * self.grid).ok()?).ok()?;
        (a == b).then_some(a)
    }

    fn isolate(&self, s: Sector, m: usize, depth: usize, out: &mut Vec<(C64, usize)>) -> Result<()> {
        if m == 0 {
            return Ok(());
        }
        let tiny = s.diameter() < 1e-9 * s.r2.max(1.0);
        if tiny || depth > 200 {
            out.push((s.center(), m));
            return Ok(());
        }
        if s.is_compact() {
            if let Ok(z) = polish(self.k, s.center(), m) {
                if s.contains(z, 1e-9) && (m == 1 || self.disk_count(z, 1e-4 * z.norm()) == Some(m)) {
                    out.push((z, m));
                    return Ok(());
                }
            }
        }
        for (attempt, jitter) in JITTER.iter().enumerate() {
            let frac = 0.5 + jitter * if depth % 2 == 0 { 1.0 } else { -1.0 };
            let (a, b) = s.split(frac);
            let (ca, cb) = rayon::join(|| self.count(&a), || self.count(&b));
            match (ca, cb) {
                (Ok(ma), Ok(mb)) if ma + mb == m => {
                    self.isolate(a, ma, depth + 1, out)?;
                    return self.isolate(b, mb, depth + 1, out);
                }
                _ if attempt + 1 < JITTER.len() => continue,
                (Err(e), _) | (_, Err(e)) => return Err(e),
                _ => {}
            }
        }
        Err(Error::numeric("could not separate roots between sub-contours; use a finer grid"))
    }
}

fn to_count(turns: f64) -> Result<usize> {
    let n = turns.round();
    if (turns - n).abs() > 1e-6 || n < 0.0 {
        return Err(Error::numeric(format!("non-integer or negative winding {turns}")));
    }
    Ok(n as usize)
}

/// Newton's method on `det Delta` for a root of multiplicity `m`.
fn polish(k: &VolterraKernel, start: C64, m: usize) -> Result<C64> {
    let mut lam = start;
    for _ in 0..200 {
        let ev = char_eval(k, lam)?;
        let Some(inv) = ev.delta.clone().try_inverse() else {
            return Ok(lam);
        };
        let tr = (inv * &ev.derivative).trace();
        if tr == C64::new(0.0, 0.0) || !tr.re.is_finite() || !tr.im.is_finite() {
            return Ok(lam);
        }
        let step = C64::new(m as f64, 0.0) / tr;
        lam -= step;
        if step.norm() <= 4.0 * f64::EPSILON * lam.norm().max(1.0) {
            return Ok(lam);
        }
    }
    Ok(lam)
}

/// Characteristic roots in the annulus with multiplicities.
pub fn find_roots(k: &VolterraKernel, opts: &RootOptions) -> Result<Spectrum> {
    let floor = (-k.gamma()).exp();
    let inner = opts.inner.unwrap_or((1.05 * floor).max(1e-3));
    let outer = opts.outer.unwrap_or(1.0 + k.weighted_sum());
    if !(inner > floor) {
        return Err(Error::Domain(format!(
            "inner radius {inner} must exceed e^(-gamma) = {floor}"
        )));
    }
    if !(outer > inner) {
        return Err(Error::arg(format!("outer radius {outer} must exceed inner radius {inner}")));
    }
    if opts.grid < 8 {
        return Err(Error::arg("contour grid needs at least 8 samples"));
    }
    let finder = Finder { k, grid: opts.grid };
    let circle = |r: f64| move |t: f64| C64::from_polar(r, START_ANGLE + 2.0 * PI * t);
    let total = |samples: usize| -> Result<usize> {
        let wo = finder.turns(&circle(outer), samples)?;
        let wi = finder.turns(&circle(inner), samples)?;
        to_count(wo - wi)
    };
    let winding_total = {
        let mut samples = opts.grid;
        let mut last = total(samples)?;
        loop {
            samples *= 2;
            if samples > MAX_SAMPLES {
                return Err(Error::numeric("winding count unstable under refinement; use a finer grid"));
            }
            let next = total(samples)?;
            if next == last {
                break next;
            }
            last = next;
        }
    };
    let winding_refined = total(4 * opts.grid)?;
    if winding_refined != winding_total {
        return Err(Error::numeric(format!(
            "winding count {winding_total} changes to {winding_refined} on a finer grid; use a finer grid"
        )));
    }

    let annulus = Sector { r1: inner, r2: outer, a1: START_ANGLE, a2: START_ANGLE + 2.0 * PI };
    let mut found = Vec::new();
    finder.isolate(annulus, winding_total, 0, &mut found)?;

    let mut roots = Vec::with_capacity(found.len());
    for (start, m) in found {
        let z = polish(k, start, m)?;
        let residual = char_det(k, z)?.norm();
        if !(residual <= opts.tol) {
            return Err(Error::numeric(format!(
                "root near {z} polished only to |det Delta| = {residual:e} > {:e}",
                opts.tol
            )));
        }
        roots.push(Root {
            value: z,
            modulus: z.norm(),
            multiplicity: m,
            residual,
            on_circle: (z.norm() - 1.0).abs() <= opts.circle_tol,
        });
    }
    roots.sort_by(|a, b| a.modulus.total_cmp(&b.modulus).then(a.value.arg().total_cmp(&b.value.arg())));
    let cu_roots: Vec<Root> =
        roots.iter().filter(|r| r.modulus >= 1.0 - opts.circle_tol).cloned().collect();
    let min_distance_to_unit_circle =
        roots.iter().map(|r| (r.modulus - 1.0).abs()).fold(f64::INFINITY, f64::min);
    Ok(Spectrum {
        hyperbolic: !roots.iter().any(|r| r.on_circle),
        roots,
        annulus: (inner, outer),
        cu_roots,
        winding_total,
        winding_refined,
        circle_tol: opts.circle_tol,
        min_distance_to_unit_circle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues, r, real_matrix, CMat};

    #[test]
    fn scalar_examples() {
        let k = VolterraKernel::scalar(2.0, &[0.5]).unwrap();
        let s = find_roots(&k, &RootOptions::default()).unwrap();
        assert_eq!(s.roots.len(), 1);
        assert!((s.roots[0].value - r(0.5)).norm() < 1e-12);
        assert!(!s.roots[0].on_circle && s.cu_roots.is_empty());

        let one = VolterraKernel::scalar(1.0, &[1.0]).unwrap();
        let s = find_roots(&one, &RootOptions::default()).unwrap();
        assert_eq!(s.roots[0].value, r(1.0));
        assert!(s.roots[0].on_circle && !s.hyperbolic);
    }

    #[test]
    fn geometric_root() {
        let k = VolterraKernel::geometric(2f64.ln(), real_matrix(1, 1, &[0.5]), r(0.25)).unwrap();
        let s = find_roots(&k, &RootOptions::default()).unwrap();
        assert_eq!(s.winding_total, 1);
        assert!((s.roots[0].value - r(0.75)).norm() < 1e-10);
        assert!(s.roots[0].residual <= 1e-10);
    }

    #[test]
    fn matches_companion_eigenvalues() {
        // x(n+1) = 0.2 x(n) + 0.9 x(n-1) - 0.4 x(n-2)
        let k = VolterraKernel::scalar(3.0, &[0.2, 0.9, -0.4]).unwrap();
        let s = find_roots(&k, &RootOptions::default()).unwrap();
        let comp = real_matrix(3, 3, &[0.2, 0.9, -0.4, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let eig = eigenvalues(&comp).unwrap();
        assert_eq!(s.winding_total, 3);
        for e in eig {
            assert!(s.roots.iter().any(|r| (r.value - e).norm() < 1e-10), "missing {e}");
        }
    }

    #[test]
    fn double_root() {
        // (l - 1.5)^2 = l^2 - 3 l + 2.25, i.e. A(0) = 3, A(1) = -2.25
        let k = VolterraKernel::finite(3.0, vec![CMat::from_element(1, 1, r(3.0)), CMat::from_element(1, 1, r(-2.25))])
            .unwrap();
        let s = find_roots(&k, &RootOptions::default()).unwrap();
        assert_eq!(s.roots.len(), 1);
        assert_eq!(s.roots[0].multiplicity, 2);
        assert!((s.roots[0].value - r(1.5)).norm() < 1e-6);
    }
}
