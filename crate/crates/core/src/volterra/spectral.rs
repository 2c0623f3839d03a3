//! Center-unstable spectral data, the variation-of-constants formula, the
//! reduced coordinate equation and resonant forcing.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::dynamics::{bilinear_matrix, check_history, volterra_step, volterra_step_forced};
use super::{char_matrix, Spectrum, VolterraKernel};
use crate::error::{Error, Result};
use crate::finite_delay::ForcingSequence;
use crate::io::{csv_writer, fmt_num, write_row};
use crate::linalg::{
    condition_number, eigenvalues, identity, inverse, left_null_vector, right_null_vector, CMat,
    CVec, SpectralSplit, C64,
};
use crate::phase_space::{gamma_embed, HistorySegment};
use crate::serde_util::{cmat, complex, complex_vec};
use crate::shadowing::fit_line;

#[derive(Debug, Clone, Copy)]
pub struct DecompositionOptions {
    /// Use the companion truncation when a center-unstable root is multiple.
    pub allow_fallback: bool,
    pub circle_tol: f64,
}

impl Default for DecompositionOptions {
    fn default() -> Self {
        DecompositionOptions { allow_fallback: false, circle_tol: 1e-8 }
    }
}

/// `Phi(theta) = Phi(0) B^theta` and `Psi(zeta) = B^{-zeta} Psi(0)` with
/// `<Psi, Phi> = E`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pub s: usize,
    pub dim: usize,
    #[serde(rename = "B", with = "cmat")]
    pub b: CMat,
    #[serde(rename = "Phi0", with = "cmat")]
    pub phi0: CMat,
    #[serde(rename = "Psi0", with = "cmat")]
    pub psi0: CMat,
    #[serde(with = "complex_vec")]
    pub eigenvalues: Vec<C64>,
    pub method: String,
    /// `max |<Psi, Phi> - E|`.
    pub normalization_residual: f64,
    /// Distance between the spectrum of `B` and the center-unstable roots.
    pub spectrum_residual: f64,
    /// `|sum_j A(j) Phi(-j) - Phi(0) B|`.
    pub invariance_residual: f64,
    /// `|sum_j Psi(j) A(j) - B Psi(0)|`.
    pub adjoint_residual: f64,
    /// Weighted kernel mass ignored by a companion truncation.
    pub truncation_residual: f64,
}

impl SpectralDecomposition {
    fn empty(dim: usize) -> Self {
        SpectralDecomposition {
            s: 0,
            dim,
            b: CMat::zeros(0, 0),
            phi0: CMat::zeros(dim, 0),
            psi0: CMat::zeros(0, dim),
            eigenvalues: Vec::new(),
            method: "empty".into(),
            normalization_residual: 0.0,
            spectrum_residual: 0.0,
            invariance_residual: 0.0,
            adjoint_residual: 0.0,
            truncation_residual: 0.0,
        }
    }

    /// `B^{-k}` for `k = 0..=n`.
    pub fn inverse_powers(&self, n: usize) -> Result<Vec<CMat>> {
        let mut out = vec![identity(self.s)];
        if n == 0 {
            return Ok(out);
        }
        let inv = inverse(&self.b)?;
        for _ in 0..n {
            let next = out.last().unwrap() * &inv;
            out.push(next);
        }
        Ok(out)
    }

    /// `Phi(-k)` for `k = 0..=depth`.
    pub fn phi_values(&self, depth: usize) -> Result<Vec<CMat>> {
        Ok(self.inverse_powers(depth)?.iter().map(|p| &self.phi0 * p).collect())
    }

    /// `Psi(zeta)` for `zeta = 0..=depth`.
    pub fn psi_values(&self, depth: usize) -> Result<Vec<CMat>> {
        Ok(self.inverse_powers(depth)?.iter().map(|p| p * &self.psi0).collect())
    }

    /// Column `i` of `Phi` as a history of the given depth.
    pub fn phi_history(&self, i: usize, gamma: f64, depth: usize) -> Result<HistorySegment> {
        let vals = self.phi_values(depth)?;
        HistorySegment::new(gamma, vals.iter().map(|m| m.column(i).clone_owned()).collect())
    }

    /// `<Psi, Phi>`.
    pub fn gram(&self, k: &VolterraKernel) -> Result<CMat> {
        gram(k, &self.phi0, &self.psi0, &self.b)
    }
}

fn gram(k: &VolterraKernel, phi0: &CMat, psi0: &CMat, b: &CMat) -> Result<CMat> {
    let reach = k.reach();
    let mut pows = vec![identity(b.nrows())];
    if reach > 0 {
        let inv = inverse(b)?;
        for _ in 0..reach {
            let next = pows.last().unwrap() * &inv;
            pows.push(next);
        }
    }
    Ok(bilinear_matrix(k, |z| &pows[z] * psi0, |t| phi0 * &pows[(-t) as usize]))
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Distance between two multisets of complex numbers of the same size,
/// matched greedily.
fn match_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for &x in a {
        let (idx, d) = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, &y)| (i, (x - y).norm()))
            .fold((usize::MAX, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
        used[idx] = true;
        worst = worst.max(d);
    }
    worst
}

/// Builds `Phi`, `Psi` and `B` for the center-unstable roots of `spectrum`.
pub fn spectral_decomposition(
    k: &VolterraKernel,
    spectrum: &Spectrum,
    opts: &DecompositionOptions,
) -> Result<SpectralDecomposition> {
    let d = k.dim();
    let cu: Vec<_> = spectrum.roots.iter().filter(|r| r.modulus >= 1.0 - opts.circle_tol).collect();
    if cu.is_empty() {
        return Ok(SpectralDecomposition::empty(d));
    }
    let targets: Vec<C64> = cu.iter().flat_map(|r| std::iter::repeat_n(r.value, r.multiplicity)).collect();
    let multiple = cu.iter().any(|r| r.multiplicity > 1);
    let (b, phi0, raw_psi0, method, truncation_residual) = if !multiple {
        let s = cu.len();
        let mut phi0 = CMat::zeros(d, s);
        let mut psi0 = CMat::zeros(s, d);
        for (i, r) in cu.iter().enumerate() {
            let delta = char_matrix(k, r.value)?;
            let (v, _) = right_null_vector(&delta);
            let (w, _) = left_null_vector(&delta);
            phi0.set_column(i, &v);
            psi0.set_row(i, &w);
        }
        let b = CMat::from_diagonal(&CVec::from_vec(cu.iter().map(|r| r.value).collect()));
        (b, phi0, psi0, "simple-roots", 0.0)
    } else if opts.allow_fallback {
        let (b, phi0, psi0) = companion_fallback(k, opts.circle_tol, targets.len())?;
        (b, phi0, psi0, "companion-truncation", k.weighted_tail(k.reach()))
    } else {
        return Err(Error::Unsupported(
            "multiple center-unstable roots need the companion-truncation fallback".into(),
        ));
    };

    let g = gram(k, &phi0, &raw_psi0, &b)?;
    let cond = condition_number(&g);
    if !(cond < 1e12) {
        return Err(Error::numeric(format!(
            "<Psi, Phi> is singular (condition {cond:e}); the root pairing failed"
        )));
    }
    let psi0 = inverse(&g)? * raw_psi0;
    let s = b.nrows();
    let mut dec = SpectralDecomposition {
        s,
        dim: d,
        eigenvalues: eigenvalues(&b)?,
        b,
        phi0,
        psi0,
        method: method.into(),
        normalization_residual: 0.0,
        spectrum_residual: 0.0,
        invariance_residual: 0.0,
        adjoint_residual: 0.0,
        truncation_residual,
    };
    dec.normalization_residual = max_abs(&(dec.gram(k)? - identity(s)));
    dec.spectrum_residual = match_distance(&dec.eigenvalues, &targets);
    let reach = k.reach();
    let phis = dec.phi_values(reach)?;
    let psis = dec.psi_values(reach)?;
    let mut head = CMat::zeros(d, s);
    let mut adj = CMat::zeros(s, d);
    for j in 0..=reach {
        let a = k.term(j);
        head += &a * &phis[j];
        adj += &psis[j] * &a;
    }
    dec.invariance_residual = max_abs(&(head - &dec.phi0 * &dec.b));
    dec.adjoint_residual = max_abs(&(adj - &dec.b * &dec.psi0));
    Ok(dec)
}

/// Center-unstable data from an ordered Schur form of the companion matrix
/// of the kernel cut at its reach.
fn companion_fallback(k: &VolterraKernel, circle_tol: f64, expect: usize) -> Result<(CMat, CMat, CMat)> {
    let d = k.dim();
    let h = k.reach();
    let n = d * (h + 1);
    let mut comp = CMat::zeros(n, n);
    for j in 0..=h {
        comp.view_mut((0, j * d), (d, d)).copy_from(&k.term(j));
    }
    for i in 0..h {
        comp.view_mut(((i + 1) * d, i * d), (d, d)).copy_from(&identity(d));
    }
    let split = SpectralSplit::new(&comp, |z| z.norm() >= 1.0 - circle_tol)?;
    let s = split.selected;
    if s != expect {
        return Err(Error::numeric(format!(
            "companion truncation has {s} center-unstable eigenvalues, the contour count is {expect}"
        )));
    }
    let b = split.t.view((0, 0), (s, s)).clone_owned();
    let phi0 = split.q.view((0, 0), (d, s)).clone_owned();

    // Psi(0) solves sum_j B^{-j} X A(j) = B X; in column-major vec form
    // (sum_j A(j)^T kron B^{-j} - E kron B) vec X = 0
    let inv = inverse(&b)?;
    let mut pow = identity(s);
    let mut lin = -identity(d).kronecker(&b);
    for j in 0..=h {
        lin += k.term(j).transpose().kronecker(&pow);
        pow = &pow * &inv;
    }
    let svd = lin.svd(false, true);
    let vt = svd.v_t.expect("requested V^H");
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut x = CMat::zeros(s, d);
    let mut found = 0;
    for (i, &sv) in svd.singular_values.iter().enumerate() {
        if sv <= 1e-8 * top {
            let coeff = C64::new((1.0 + found as f64).cos(), (2.0 + found as f64).sin());
            let v = vt.row(i).adjoint();
            for col in 0..d {
                for row in 0..s {
                    x[(row, col)] += coeff * v[row + col * s];
                }
            }
            found += 1;
        }
    }
    if found == 0 {
        return Err(Error::numeric("no adjoint center-unstable solution found in the truncation"));
    }
    Ok((b, phi0, x))
}

/// Coordinates `<Psi, phi>` and the projection `Phi <Psi, phi>` at the depth of `phi`.
pub fn project_cu(
    dec: &SpectralDecomposition,
    k: &VolterraKernel,
    phi: &HistorySegment,
) -> Result<(CVec, HistorySegment)> {
    check_history(k, phi)?;
    if dec.dim != k.dim() {
        return Err(Error::dims("decomposition and kernel dimensions differ"));
    }
    let depth = phi.depth();
    if dec.s == 0 {
        return Ok((CVec::zeros(0), HistorySegment::zeros(phi.gamma(), k.dim(), depth)));
    }
    let psis = dec.psi_values(k.reach())?;
    let coords = bilinear_matrix(
        k,
        |z| psis[z].clone(),
        |t| CMat::from_column_slice(k.dim(), 1, phi.value(t).as_slice()),
    )
    .column(0)
    .clone_owned();
    let phis = dec.phi_values(depth)?;
    let values = phis.iter().map(|m| m * &coords).collect();
    Ok((coords, HistorySegment::new(phi.gamma(), values)?))
}

/// Segments of a forced solution computed by the recursion and by the
/// variation-of-constants sum.
#[derive(Debug, Clone)]
pub struct VocResult {
    pub direct: Vec<HistorySegment>,
    pub voc: Vec<HistorySegment>,
    /// `max_n |direct_n - voc_n| / max(1, |direct_n|)` in the weighted norm.
    pub cross_residual: f64,
}

/// `x_n = T(n) phi0 + sum_{j<n} T(n-1-j) Gamma p(j)` next to the forced recursion.
pub fn voc_simulate(
    k: &VolterraKernel,
    phi0: &HistorySegment,
    p: &ForcingSequence,
    steps: usize,
) -> Result<VocResult> {
    check_history(k, phi0)?;
    if !p.is_empty() && p.dim() != k.dim() {
        return Err(Error::dims("forcing dimension differs from kernel dimension"));
    }
    let mut direct = vec![phi0.clone()];
    for n in 0..steps {
        let next = volterra_step_forced(k, &direct[n], &p.at(n))?;
        direct.push(next);
    }

    let mut voc: Vec<HistorySegment> = Vec::with_capacity(steps + 1);
    let mut free = phi0.clone();
    for _ in 0..=steps {
        voc.push(free.clone());
        free = volterra_step(k, &free)?;
    }
    for j in 0..steps {
        let pj = p.at(j);
        if pj.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            continue;
        }
        let mut g = gamma_embed(&pj, k.gamma(), k.reach())?;
        for n in j + 1..=steps {
            voc[n] = voc[n].add(&g)?;
            if n < steps {
                g = volterra_step(k, &g)?;
            }
        }
    }
    let cross_residual = direct
        .iter()
        .zip(&voc)
        .map(|(a, b)| Ok(a.sub(b)?.weighted_norm() / a.weighted_norm().max(1.0)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(VocResult { direct, voc, cross_residual })
}

/// `z(n+1) = B z(n) + Psi(0) p(n)` for `n < steps`.
pub fn coordinate_dynamics(
    dec: &SpectralDecomposition,
    p: &ForcingSequence,
    z0: &CVec,
    steps: usize,
) -> Result<Vec<CVec>> {
    if z0.len() != dec.s {
        return Err(Error::dims(format!("z0 has length {}, expected {}", z0.len(), dec.s)));
    }
    if !p.is_empty() && p.dim() != dec.dim {
        return Err(Error::dims("forcing dimension differs from kernel dimension"));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(z0.clone());
    for n in 0..steps {
        let next = &dec.b * &out[n] + &dec.psi0 * p.at(n);
        out.push(next);
    }
    Ok(out)
}

/// Linear growth `u(n) = lambda^n c n` of the resonant coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    #[serde(with = "complex")]
    pub lambda: C64,
    /// `|v Psi(0)|^2`.
    pub c: f64,
    pub steps: usize,
    pub slope: f64,
    pub intercept: f64,
    /// `max_n | |u(n)| - (intercept + slope n) |`.
    pub fit_residual: f64,
    /// `max_{n>=1} |u(n) - lambda^n c n| / (c n)`.
    pub max_relative_deviation: f64,
    #[serde(skip)]
    pub u_abs: Vec<f64>,
}

impl GrowthReport {
    /// CSV with columns `n, |u(n)|, c n`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv_writer(w);
        write_row(&mut out, &["n".into(), "abs_u".into(), "c_n".into()])?;
        for (n, u) in self.u_abs.iter().enumerate() {
            write_row(&mut out, &[n.to_string(), fmt_num(*u), fmt_num(self.c * n as f64)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Drives the reduced equation with `p(n) = lambda^{n+1} (v Psi(0))^*`,
/// `v` a left eigenvector of `B` for the unit-circle root `lambda`.
pub fn resonant_forcing(
    dec: &SpectralDecomposition,
    lam0: C64,
    steps: usize,
    circle_tol: f64,
) -> Result<GrowthReport> {
    if ((lam0.norm()) - 1.0).abs() > circle_tol {
        return Err(Error::arg(format!("|lambda| = {} is not on the unit circle", lam0.norm())));
    }
    if !dec.eigenvalues.iter().any(|e| (e - lam0).norm() <= 1e-8 * lam0.norm().max(1.0)) {
        return Err(Error::arg(format!("{lam0} is not a center-unstable root of the decomposition")));
    }
    let s = dec.s;
    let (v, _) = left_null_vector(&(&dec.b - identity(s) * lam0));
    let v_psi = &v * &dec.psi0;
    let c = v_psi.norm_squared();
    if !(c > 1e-14) {
        return Err(Error::numeric(format!(
            "v Psi(0) vanishes (|v Psi(0)|^2 = {c:e}), the decomposition is inconsistent"
        )));
    }
    let w: CVec = v_psi.adjoint();
    let mut z = CVec::zeros(s);
    let mut power = lam0;
    let mut lam_n = C64::new(1.0, 0.0);
    let mut u_abs = Vec::with_capacity(steps + 1);
    let mut dev: f64 = 0.0;
    u_abs.push(0.0);
    for n in 0..steps {
        z = &dec.b * z + &dec.psi0 * (&w * power);
        power *= lam0;
        lam_n *= lam0;
        let u = (&v * &z)[(0, 0)];
        let m = (n + 1) as f64;
        dev = dev.max((u - lam_n * (c * m)).norm() / (c * m));
        u_abs.push(u.norm());
    }
    let (intercept, slope, fit_residual) = fit_line(&u_abs);
    Ok(GrowthReport {
        lambda: lam0,
        c,
        steps,
        slope,
        intercept,
        fit_residual,
        max_relative_deviation: dev,
        u_abs,
    })
}
