//! Bounded solutions of forced equations and shadowing of pseudo-orbits.
//!
//! [`perron_solve`] evaluates the Green's function of a detected dichotomy:
//! the stable part of the solution is summed forward from zero and the
//! unstable part backward from the horizon, each by its own stable
//! recursion. [`shadow`] subtracts that bounded solution, driven by the
//! defect, from a pseudo-orbit and so returns a true orbit nearby.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dichotomy::DichotomyData;
use crate::error::{Error, Result};
use crate::finite_delay::{
    defect, simulate_forced, FiniteDelaySystem, ForcingSequence, Orbit, PseudoOrbit, SystemKind,
};
use crate::io::{csv_writer, fmt_num, write_row};
use crate::linalg::{block_norm, inverse, left_null_vector, CMat, CVec, C64};
use crate::phase_space::Segment;
use crate::serde_util::complex;

#[derive(Debug, Clone)]
pub struct PerronSolution {
    /// `x(n)` for `n = -r, ..., N`.
    pub orbit: Orbit,
    pub sup_norm: f64,
    /// `sup |x| / sup |z|`, zero for zero forcing.
    pub control_ratio: f64,
    /// Bound on the error caused by cutting the backward sum at the horizon.
    pub truncation_tail_bound: f64,
    /// `max_n |x(n+1) - L_n(x_n) - z(n)|` over the window.
    pub step_residual: f64,
    pub horizon: usize,
}

fn check_pair(sys: &FiniteDelaySystem, dicho: &DichotomyData) -> Result<()> {
    if dicho.lift_dim != sys.lift_dim() || dicho.dim != sys.dim() {
        return Err(Error::dims(format!(
            "dichotomy is for lift size {}, system has {}",
            dicho.lift_dim,
            sys.lift_dim()
        )));
    }
    if !(dicho.lambda > 0.0) || !dicho.d_const.is_finite() {
        return Err(Error::State("dichotomy data is not hyperbolic".into()));
    }
    let period_ok = match sys.kind() {
        SystemKind::Autonomous => true,
        SystemKind::Periodic { period } => period % dicho.period == 0 || dicho.period % period == 0,
        SystemKind::Tabulated { .. } => false,
    };
    if !period_ok {
        return Err(Error::State(format!(
            "dichotomy period {} does not match the system",
            dicho.period
        )));
    }
    Ok(())
}

/// `D e^{-lambda (H - N)} sup|z| / (1 - e^{-lambda})`.
pub fn tail_bound(dicho: &DichotomyData, window: usize, horizon: usize, sup_z: f64) -> f64 {
    let q = (-dicho.lambda).exp();
    dicho.d_const * (-dicho.lambda * horizon.saturating_sub(window) as f64).exp() * sup_z / (1.0 - q)
}

/// Smallest horizon whose tail bound is at most `tol`.
pub fn required_horizon(dicho: &DichotomyData, window: usize, sup_z: f64, tol: f64) -> usize {
    let at_window = tail_bound(dicho, window, window, sup_z);
    if at_window <= tol {
        return window;
    }
    window + ((at_window / tol).ln() / dicho.lambda).ceil() as usize
}

fn lift_forcing(lift: usize, z: &CVec) -> CVec {
    let mut v = CVec::zeros(lift);
    v.rows_mut(0, z.len()).copy_from(z);
    v
}

/// The bounded solution of `x(n+1) = L_n(x_n) + z(n)` with `x_0` in the
/// unstable subspace, reported on `n = -r, ..., window`.
///
/// The backward sum is cut at `horizon`; this is exact when `z` vanishes
/// beyond the horizon, otherwise the truncation bound is recorded.
pub fn perron_solve(
    sys: &FiniteDelaySystem,
    dicho: &DichotomyData,
    z: &ForcingSequence,
    window: usize,
    horizon: usize,
) -> Result<PerronSolution> {
    check_pair(sys, dicho)?;
    if !z.is_empty() && z.dim() != sys.dim() {
        return Err(Error::dims(format!(
            "forcing dimension {} differs from system dimension {}",
            z.dim(),
            sys.dim()
        )));
    }
    let horizon = horizon.max(window);
    let lift = sys.lift_dim();
    let d = sys.dim();
    let r = sys.delay();
    let zero = CVec::zeros(d);
    let forcing = |n: usize| if n < z.len() { z.values()[n].clone() } else { zero.clone() };

    let mut states: Vec<CVec> = Vec::with_capacity(window + 1);
    let mut s = CVec::zeros(lift);
    states.push(s.clone());
    for n in 0..window {
        s = dicho.projection(n + 1) * (sys.step_matrix(n)? * &s + lift_forcing(lift, &forcing(n)));
        states.push(s.clone());
    }

    let k = dicho.unstable_dim();
    if k > 0 {
        let mut g_inv = Vec::with_capacity(dicho.period);
        for q in 0..dicho.period {
            let g = dicho.unstable_basis(q + 1).adjoint() * sys.step_matrix(q)? * dicho.unstable_basis(q);
            g_inv.push(inverse(&g)?);
        }
        let start = horizon.min(z.len());
        let mut c = CVec::zeros(k);
        for n in (0..start).rev() {
            let qz = dicho.complement(n + 1) * lift_forcing(lift, &forcing(n));
            c = &g_inv[n % dicho.period] * (c - dicho.unstable_basis(n + 1).adjoint() * qz);
            if n <= window {
                states[n] += dicho.unstable_basis(n) * &c;
            }
        }
    }

    let mut values = Vec::with_capacity(window + r + 1);
    for kk in (0..=r).rev() {
        values.push(states[0].rows(kk * d, d).clone_owned());
    }
    for x in states.iter().skip(1) {
        values.push(x.rows(0, d).clone_owned());
    }
    let orbit = Orbit::from_values(r, values)?;
    let step_residual = forced_residual(sys, &orbit, &forcing)?;
    let sup_norm = orbit.sup_norm();
    let control_ratio = if z.sup_norm() > 0.0 { sup_norm / z.sup_norm() } else { 0.0 };
    let truncation_tail_bound =
        if z.len() <= horizon { 0.0 } else { tail_bound(dicho, window, horizon, z.sup_norm()) };
    Ok(PerronSolution { orbit, sup_norm, control_ratio, truncation_tail_bound, step_residual, horizon })
}

/// As [`perron_solve`], failing when the truncation bound exceeds `tol`.
pub fn perron_solve_tol(
    sys: &FiniteDelaySystem,
    dicho: &DichotomyData,
    z: &ForcingSequence,
    window: usize,
    horizon: usize,
    tol: f64,
) -> Result<PerronSolution> {
    let sol = perron_solve(sys, dicho, z, window, horizon)?;
    if sol.truncation_tail_bound > tol {
        return Err(Error::HorizonTooSmall {
            have: sol.horizon,
            required: required_horizon(dicho, window, z.sup_norm(), tol).max(z.len().min(sol.horizon + 1)),
            tol,
        });
    }
    Ok(sol)
}

fn forced_residual(
    sys: &FiniteDelaySystem,
    x: &Orbit,
    forcing: &impl Fn(usize) -> CVec,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 0..x.last_time() {
        let mut e = x.at(n as isize + 1) - forcing(n);
        for j in 0..=sys.delay() {
            e -= sys.coeff(n, j)? * x.at(n as isize - j as isize);
        }
        worst = worst.max(e.norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct ShadowResult {
    pub pseudo_orbit: Orbit,
    pub true_orbit: Orbit,
    /// `sup_{n >= 0} |x_n - y_n|` in the segment norm.
    pub sup_error: f64,
    /// `sup_{n >= 0} |x(n) - y(n)|`.
    pub pointwise_error: f64,
    /// Segment distances `|x_n - y_n|` for `n = 0, ..., N`.
    pub distances: Vec<f64>,
    pub delta: f64,
    pub shadowing_constant: f64,
    /// `K_D * delta`.
    pub theoretical_bound: f64,
    /// `max_n |x(n+1) - L_n(x_n)|`.
    pub step_residual: f64,
}

impl ShadowResult {
    pub fn within_bound(&self) -> bool {
        self.sup_error <= self.theoretical_bound * (1.0 + 1e-6)
    }

    /// CSV with columns `n`, the parts of `y(n)` and `x(n)`, and the segment
    /// distance (empty before time 0).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv_writer(w);
        let d = self.true_orbit.dim();
        let mut header = vec!["n".to_string()];
        for name in ["y", "x"] {
            for i in 1..=d {
                header.push(format!("re({name}_{i})"));
                header.push(format!("im({name}_{i})"));
            }
        }
        header.push("dist".into());
        write_row(&mut out, &header)?;
        let r = self.true_orbit.delay() as isize;
        for n in -r..=self.true_orbit.last_time() as isize {
            let mut row = vec![n.to_string()];
            for orbit in [&self.pseudo_orbit, &self.true_orbit] {
                for z in orbit.at(n).iter() {
                    row.push(fmt_num(z.re));
                    row.push(fmt_num(z.im));
                }
            }
            row.push(if n >= 0 { fmt_num(self.distances[n as usize]) } else { String::new() });
            write_row(&mut out, &row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// True orbit within `K_D * delta` of the pseudo-orbit `y` (given on
/// `n = -r, ..., N`), where `delta` is its defect bound.
pub fn shadow(
    sys: &FiniteDelaySystem,
    dicho: &DichotomyData,
    y: &PseudoOrbit,
    horizon: usize,
) -> Result<ShadowResult> {
    let window = y.orbit.last_time();
    let z = y.defects(sys)?;
    let w = perron_solve(sys, dicho, &z, window, horizon)?;
    let true_orbit = y.orbit.sub(&w.orbit)?;
    let r = sys.delay() as isize;
    let distances: Vec<f64> = (0..=window as isize)
        .map(|n| (n - r..=n).map(|m| w.orbit.at(m).norm()).fold(0.0, f64::max))
        .collect();
    let sup_error = distances.iter().cloned().fold(0.0, f64::max);
    let pointwise_error = (0..=window as isize).map(|n| w.orbit.at(n).norm()).fold(0.0, f64::max);
    let step_residual = forced_residual(sys, &true_orbit, &|_| CVec::zeros(sys.dim()))?;
    let k_d = dicho.shadowing_constant();
    Ok(ShadowResult {
        pseudo_orbit: y.orbit.clone(),
        true_orbit,
        sup_error,
        pointwise_error,
        distances,
        delta: y.defect_bound,
        shadowing_constant: k_d,
        theoretical_bound: k_d * y.defect_bound,
        step_residual,
    })
}

/// Generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> CVec {
    CVec::from_fn(len, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

/// A pseudo-orbit on `n = -r, ..., window` whose defect has norm exactly
/// `delta` at every step (up to rounding).
///
/// It is a bounded true orbit started in the stable subspace plus the
/// bounded response to defects of random direction.
pub fn random_pseudo_orbit(
    sys: &FiniteDelaySystem,
    dicho: &DichotomyData,
    delta: f64,
    window: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PseudoOrbit> {
    if window < 1 {
        return Err(Error::arg("pseudo-orbit window must be at least 1"));
    }
    let d = sys.dim();
    let r = sys.delay();
    let lift = sys.lift_dim();
    let mut x = dicho.projection(0) * gaussian_vec(rng, lift);
    let scale = block_norm(&x, d);
    if scale > 0.0 {
        x /= C64::new(scale, 0.0);
    }
    let mut values: Vec<CVec> = (0..=r).rev().map(|k| x.rows(k * d, d).clone_owned()).collect();
    for n in 0..window {
        x = dicho.projection(n + 1) * (sys.step_matrix(n)? * &x);
        values.push(x.rows(0, d).clone_owned());
    }

    let defects = ForcingSequence::from_fn(d, window, |_| loop {
        let u = gaussian_vec(rng, d);
        let norm = u.norm();
        if norm > 1e-12 {
            break u * C64::new(delta / norm, 0.0);
        }
    })?;
    let w = perron_solve(sys, dicho, &defects, window, window)?;
    let y: Vec<CVec> = values.iter().zip(w.orbit.values()).map(|(a, b)| a + b).collect();
    defect(sys, y)
}

/// Empirical shadowing modulus over random pseudo-orbits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusStats {
    pub delta: f64,
    pub trials: usize,
    pub window: usize,
    pub eps_max: f64,
    pub eps_mean: f64,
    pub eps_pointwise_max: f64,
    #[serde(rename = "K_D")]
    pub k_d: f64,
    /// `eps_max / delta`, zero when `delta = 0`.
    pub ratio: f64,
    pub bound_violations: usize,
    pub max_step_residual: f64,
}

/// Shadows `trials` random pseudo-orbits with defect exactly `delta` on
/// `n = -r, ..., window`. Trial `i` draws from stream `i` of `seed`, so the
/// result does not depend on scheduling.
pub fn shadowing_modulus(
    sys: &FiniteDelaySystem,
    dicho: &DichotomyData,
    trials: usize,
    delta: f64,
    window: usize,
    seed: u64,
) -> Result<ModulusStats> {
    if trials == 0 {
        return Err(Error::arg("at least one trial is required"));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::arg(format!("delta must be finite and nonnegative, got {delta}")));
    }
    let results: Vec<ShadowResult> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let y = random_pseudo_orbit(sys, dicho, delta, window, &mut rng)?;
            shadow(sys, dicho, &y, window)
        })
        .collect::<Result<_>>()?;
    let eps_max = results.iter().map(|s| s.sup_error).fold(0.0, f64::max);
    let eps_mean = results.iter().map(|s| s.sup_error).sum::<f64>() / trials as f64;
    let k_d = dicho.shadowing_constant();
    let bound = k_d * delta;
    Ok(ModulusStats {
        delta,
        trials,
        window,
        eps_max,
        eps_mean,
        eps_pointwise_max: results.iter().map(|s| s.pointwise_error).fold(0.0, f64::max),
        k_d,
        ratio: if delta > 0.0 { eps_max / delta } else { 0.0 },
        bound_violations: results.iter().filter(|s| s.sup_error > bound * (1.0 + 1e-6)).count(),
        max_step_residual: results.iter().map(|s| s.step_residual).fold(0.0, f64::max),
    })
}

/// Linear growth of the eigen-coordinate under resonant forcing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceReport {
    #[serde(with = "complex")]
    pub eigenvalue: C64,
    pub c_pred: f64,
    pub slope: f64,
    pub intercept: f64,
    /// `max_n | |u(n)| - (intercept + slope n) |`.
    pub max_residual: f64,
    pub steps: usize,
}

impl ResonanceReport {
    pub fn relative_residual(&self) -> f64 {
        self.max_residual / (self.c_pred * self.steps.max(1) as f64)
    }
}

/// Least-squares line `a + b t` through `(t, v)`.
pub fn fit_line(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let mean_t = (n - 1.0) / 2.0;
    let mean_v = v.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, &y) in v.iter().enumerate() {
        let dt = t as f64 - mean_t;
        sxy += dt * (y - mean_v);
        sxx += dt * dt;
    }
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = mean_v - b * mean_t;
    let res = v.iter().enumerate().map(|(t, &y)| (y - a - b * t as f64).abs()).fold(0.0, f64::max);
    (a, b, res)
}

/// Forces an autonomous system with a unit-circle eigenvalue `mu` by
/// `p(n) = mu^{n+1} w`, `w` aligned with the left eigenvector, and fits the
/// modulus of the eigen-coordinate by a line.
pub fn resonance_probe(sys: &FiniteDelaySystem, steps: usize, tol: f64) -> Result<ResonanceReport> {
    if sys.kind() != SystemKind::Autonomous {
        return Err(Error::arg("resonance probe needs an autonomous system"));
    }
    if steps < 2 {
        return Err(Error::arg("resonance probe needs at least 2 steps"));
    }
    let s = sys.step_matrix(0)?;
    let eigs = crate::linalg::eigenvalues(&s)?;
    let mu = eigs
        .iter()
        .cloned()
        .min_by(|a, b| (a.norm() - 1.0).abs().total_cmp(&(b.norm() - 1.0).abs()))
        .ok_or_else(|| Error::arg("empty system"))?;
    if (mu.norm() - 1.0).abs() > tol {
        return Err(Error::arg(format!(
            "no eigenvalue within {tol:e} of the unit circle (closest modulus {})",
            mu.norm()
        )));
    }
    let d = sys.dim();
    let shifted = &s - CMat::identity(s.nrows(), s.ncols()) * mu;
    let (ell, _) = left_null_vector(&shifted);
    let ell0 = ell.columns(0, d).clone_owned();
    let c_pred = ell0.norm();
    let w: CVec = ell0.adjoint() / C64::new(c_pred, 0.0);
    let mut power = mu;
    let p = ForcingSequence::from_fn(d, steps, |_| {
        let v = &w * power;
        power *= mu;
        v
    })?;
    let orbit = simulate_forced(sys, &Segment::zeros(sys.delay(), d), &p)?;
    let u: Vec<f64> = (0..=steps).map(|n| (&ell * orbit.segment(n).to_lift())[(0, 0)].norm()).collect();
    let (intercept, slope, max_residual) = fit_line(&u);
    Ok(ResonanceReport { eigenvalue: mu, c_pred, slope, intercept, max_residual, steps })
}
