//! Exponential dichotomies on the lifted phase space.
//!
//! Autonomous and periodic systems are handled through the spectrum of the
//! (monodromy) lift: the dichotomy projection at phase `q` is the spectral
//! projector of `T(q+p, q)` onto the part of the spectrum inside the unit
//! disk. The constants `(D, lambda)` are fitted against sampled norms of the
//! solution operator; they are verified over a finite horizon, never proven.
//!
//! All operator norms here are the block row-sum norm of
//! [`crate::linalg::block_operator_norm`], which is exactly the induced
//! segment norm for scalar systems and an upper bound otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_delay::{transition_matrix, FiniteDelaySystem, SystemKind};
use crate::linalg::{
    block_norm, block_operator_norm, condition_number, identity, inverse, CMat, C64,
    SpectralSplit,
};
use crate::serde_util::{cmats, complex};

pub const DEFAULT_CIRCLE_TOL: f64 = 1e-8;
pub const DEFAULT_VERIFY_HORIZON: usize = 60;

/// Largest decay rate offered to the fit; keeps `e^{lambda k}` finite.
const LAMBDA_CAP: f64 = 20.0;

#[derive(Debug, Clone, Copy)]
pub struct DetectOptions {
    /// An eigenvalue with `||mu| - 1| <= tol` counts as lying on the unit circle.
    pub tol: f64,
    /// Horizon over which `(D, lambda)` are fitted.
    pub horizon: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions { tol: DEFAULT_CIRCLE_TOL, horizon: DEFAULT_VERIFY_HORIZON }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EigenEntry {
    #[serde(with = "complex")]
    pub value: C64,
    pub modulus: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralGapReport {
    pub eigenvalues: Vec<EigenEntry>,
    pub min_distance_to_unit_circle: f64,
    pub hyperbolic: bool,
    pub stable_count: usize,
    pub unstable_count: usize,
    pub tolerance: f64,
}

impl SpectralGapReport {
    pub fn from_eigenvalues(eigs: &[C64], tol: f64) -> Self {
        let mut entries: Vec<EigenEntry> = Vec::new();
        for &z in eigs {
            let scale = z.norm().max(1.0);
            match entries.iter_mut().find(|e| (e.value - z).norm() <= 1e-6 * scale) {
                Some(e) => e.multiplicity += 1,
                None => entries.push(EigenEntry { value: z, modulus: z.norm(), multiplicity: 1 }),
            }
        }
        entries.sort_by(|a, b| {
            a.modulus
                .total_cmp(&b.modulus)
                .then(a.value.arg().total_cmp(&b.value.arg()))
        });
        let min_distance_to_unit_circle = eigs
            .iter()
            .map(|z| (z.norm() - 1.0).abs())
            .fold(f64::INFINITY, f64::min);
        let hyperbolic = min_distance_to_unit_circle > tol;
        let stable_count = eigs.iter().filter(|z| z.norm() < 1.0 - tol).count();
        let unstable_count = eigs.iter().filter(|z| z.norm() > 1.0 + tol).count();
        SpectralGapReport {
            eigenvalues: entries,
            min_distance_to_unit_circle,
            hyperbolic,
            stable_count,
            unstable_count,
            tolerance: tol,
        }
    }
}

/// Projections, bases and fitted constants of a detected dichotomy.
///
/// For a `p`-periodic system every per-time quantity is stored for the
/// phases `0..p` and looked up modulo `p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyData {
    pub dim: usize,
    pub lift_dim: usize,
    pub period: usize,
    #[serde(with = "cmats")]
    pub projections: Vec<CMat>,
    /// Orthonormal bases of `range(P_q)`.
    #[serde(with = "cmats")]
    pub stable_bases: Vec<CMat>,
    /// Orthonormal bases of `ker(P_q)`.
    #[serde(with = "cmats")]
    pub unstable_bases: Vec<CMat>,
    #[serde(rename = "D")]
    pub d_const: f64,
    pub lambda: f64,
    /// Per-step exponential gap of the monodromy spectrum (capped).
    pub spectral_gap: f64,
    /// `sup_n |P_n|`.
    pub projection_sup: f64,
    /// Horizon over which `(D, lambda)` were validated.
    pub fitted_horizon: usize,
    pub status: String,
}

impl DichotomyData {
    pub fn projection(&self, n: usize) -> &CMat {
        &self.projections[n % self.period]
    }

    pub fn complement(&self, n: usize) -> CMat {
        identity(self.lift_dim) - self.projection(n)
    }

    pub fn stable_basis(&self, n: usize) -> &CMat {
        &self.stable_bases[n % self.period]
    }

    pub fn unstable_basis(&self, n: usize) -> &CMat {
        &self.unstable_bases[n % self.period]
    }

    pub fn stable_dim(&self) -> usize {
        self.stable_bases[0].ncols()
    }

    pub fn unstable_dim(&self) -> usize {
        self.unstable_bases[0].ncols()
    }

    /// `K_D = D (1 + e^{-lambda}) / (1 - e^{-lambda})`, the Green's function
    /// summation constant bounding bounded solutions by the forcing.
    pub fn shadowing_constant(&self) -> f64 {
        let q = (-self.lambda).exp();
        self.d_const * (1.0 + q) / (1.0 - q)
    }
}

/// Detects an exponential dichotomy of an autonomous system from the
/// spectrum of its lift.
pub fn detect_autonomous(
    sys: &FiniteDelaySystem,
    opts: &DetectOptions,
) -> Result<(SpectralGapReport, Option<DichotomyData>)> {
    if sys.kind() != SystemKind::Autonomous {
        return Err(Error::arg("detect_autonomous needs an autonomous system"));
    }
    detect_with_period(sys, 1, opts)
}

/// Detects an exponential dichotomy of a periodic system from the spectrum
/// of its monodromy matrix `T(p, 0)`.
pub fn detect_periodic(
    sys: &FiniteDelaySystem,
    opts: &DetectOptions,
) -> Result<(SpectralGapReport, Option<DichotomyData>)> {
    match sys.kind() {
        SystemKind::Periodic { period } => detect_with_period(sys, period, opts),
        SystemKind::Autonomous => detect_with_period(sys, 1, opts),
        SystemKind::Tabulated { .. } => Err(Error::arg("detect_periodic needs a periodic system")),
    }
}

/// Dispatches on the system kind. Tabulated systems are refused with
/// finite-time singular value diagnostics.
pub fn detect(
    sys: &FiniteDelaySystem,
    opts: &DetectOptions,
) -> Result<(SpectralGapReport, Option<DichotomyData>)> {
    match sys.kind() {
        SystemKind::Autonomous => detect_autonomous(sys, opts),
        SystemKind::Periodic { .. } => detect_periodic(sys, opts),
        SystemKind::Tabulated { horizon } => {
            let diag = finite_time_diagnostics(sys, horizon)?;
            Err(Error::Unsupported(format!(
                "no dichotomy detection for tabulated coefficients; finite-time exponents over {} steps: {:?} (largest gap {:.4} after index {})",
                diag.horizon, diag.exponents, diag.largest_gap, diag.gap_index
            )))
        }
    }
}

fn detect_with_period(
    sys: &FiniteDelaySystem,
    period: usize,
    opts: &DetectOptions,
) -> Result<(SpectralGapReport, Option<DichotomyData>)> {
    let monodromy: Vec<CMat> = (0..period)
        .map(|q| transition_matrix(sys, q + period, q))
        .collect::<Result<_>>()?;
    let split0 = SpectralSplit::new(&monodromy[0], |z| z.norm() < 1.0)?;
    let report = SpectralGapReport::from_eigenvalues(&split0.eigenvalues, opts.tol);
    if !report.hyperbolic {
        return Ok((report, None));
    }

    let mut splits = vec![split0];
    for m in monodromy.iter().skip(1) {
        splits.push(SpectralSplit::new(m, |z| z.norm() < 1.0)?);
    }
    let rank = splits[0].selected;
    if let Some(q) = splits.iter().position(|s| s.selected != rank) {
        return Err(Error::numeric(format!(
            "stable rank changes between phase 0 ({rank}) and phase {q} ({})",
            splits[q].selected
        )));
    }

    // unstable transport between consecutive phases must be invertible
    for q in 0..period {
        let u_now = &splits[q].complement_basis;
        let u_next = &splits[(q + 1) % period].complement_basis;
        if u_now.ncols() == 0 {
            continue;
        }
        let g = u_next.adjoint() * sys.step_matrix(q)? * u_now;
        let cond = condition_number(&g);
        if !(cond < 1e12) {
            return Err(Error::numeric(format!(
                "unstable transport at phase {q} is not invertible (condition {cond:e}); \
                 the circle tolerance may be too small or the system degenerate"
            )));
        }
    }

    let d = sys.dim();
    let gap = split_gap(&splits[0].eigenvalues, period);
    let projection_sup = splits
        .iter()
        .map(|s| block_operator_norm(&s.projector, d))
        .fold(0.0, f64::max);
    let mut data = DichotomyData {
        dim: d,
        lift_dim: sys.lift_dim(),
        period,
        projections: splits.iter().map(|s| s.projector.clone()).collect(),
        stable_bases: splits.iter().map(|s| s.selected_basis.clone()).collect(),
        unstable_bases: splits.iter().map(|s| s.complement_basis.clone()).collect(),
        d_const: 1.0,
        lambda: gap.min(LAMBDA_CAP),
        spectral_gap: gap.min(LAMBDA_CAP),
        projection_sup,
        fitted_horizon: opts.horizon,
        status: String::new(),
    };
    let report_fit = verify_dichotomy(sys, &data, opts.horizon.max(2), false)?;
    data.d_const = report_fit.fitted_d;
    data.lambda = report_fit.fitted_lambda;
    data.status = format!("fitted and verified over horizon {} (not certified)", opts.horizon);
    Ok((report, Some(data)))
}

fn split_gap(eigs: &[C64], period: usize) -> f64 {
    eigs.iter()
        .map(|z| {
            let m = z.norm();
            if m == 0.0 {
                f64::INFINITY
            } else {
                m.ln().abs() / period as f64
            }
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairResidual {
    pub m: usize,
    pub n: usize,
    pub commutation: f64,
    pub stable_norm: f64,
    pub unstable_norm: f64,
    pub stable_residual: f64,
    pub unstable_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub horizon: usize,
    /// `max |P_n T(n,m) - T(n,m) P_m| / max(1, |T(n,m)|)`.
    pub commutation_residual: f64,
    /// `max |P_n^2 - P_n|`.
    pub idempotence_residual: f64,
    /// `max(0, |T(n,m) P_m| - D e^{-lambda (n-m)})` with the candidate constants.
    pub stable_residual: f64,
    /// `max(0, |T(m,n) Q_n| - D e^{-lambda (n-m)})` for the backward transport.
    pub unstable_residual: f64,
    /// Condition number of the stacked stable/unstable bases, worst phase.
    pub complementarity_condition: f64,
    /// Smallest constants on the lambda grid validating every sample.
    pub fitted_d: f64,
    pub fitted_lambda: f64,
    pub lambda_grid: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairResidual>>,
}

struct Sample {
    k: usize,
    n: usize,
    log_stable: f64,
    log_unstable: f64,
}

/// Checks the dichotomy estimates of `cand` on all pairs
/// `0 <= m <= n <= horizon` and fits `(D, lambda)`.
pub fn verify_dichotomy(
    sys: &FiniteDelaySystem,
    cand: &DichotomyData,
    horizon: usize,
    full: bool,
) -> Result<VerificationReport> {
    if horizon < 1 {
        return Err(Error::arg("verification horizon must be at least 1"));
    }
    if cand.lift_dim != sys.lift_dim() {
        return Err(Error::dims(format!(
            "dichotomy lift size {} differs from system lift size {}",
            cand.lift_dim,
            sys.lift_dim()
        )));
    }
    let d = sys.dim();
    let steps: Vec<CMat> = (0..horizon).map(|n| sys.step_matrix(n)).collect::<Result<_>>()?;
    let id = identity(cand.lift_dim);

    let mut idempotence: f64 = 0.0;
    let mut complementarity: f64 = 1.0;
    for q in 0..cand.period {
        let p = &cand.projections[q];
        idempotence = idempotence.max(block_operator_norm(&(p * p - p), d));
        let mut stacked = CMat::zeros(cand.lift_dim, cand.lift_dim);
        let ks = cand.stable_bases[q].ncols();
        let ku = cand.unstable_bases[q].ncols();
        if ks + ku != cand.lift_dim {
            return Err(Error::numeric(format!(
                "stable ({ks}) and unstable ({ku}) bases do not span the lift ({})",
                cand.lift_dim
            )));
        }
        stacked.columns_mut(0, ks).copy_from(&cand.stable_bases[q]);
        stacked.columns_mut(ks, ku).copy_from(&cand.unstable_bases[q]);
        complementarity = complementarity.max(condition_number(&stacked));
    }

    let mut samples = Vec::new();
    let mut commutation: f64 = 0.0;
    let mut stable_res: f64 = 0.0;
    let mut unstable_res: f64 = 0.0;
    let mut pairs = full.then(Vec::new);
    for m in 0..=horizon {
        let p_m = cand.projection(m);
        let u_m = cand.unstable_basis(m);
        let mut t = id.clone();
        let mut w = p_m.clone();
        let mut y = u_m.clone();
        for n in m..=horizon {
            if n > m {
                let s = &steps[n - 1];
                t = s * &t;
                w = cand.projection(n) * (s * &w);
                y = s * &y;
            }
            let p_n = cand.projection(n);
            let t_norm = block_operator_norm(&t, d);
            let comm = block_operator_norm(&(p_n * &t - &t * p_m), d) / t_norm.max(1.0);
            commutation = commutation.max(comm);

            let stable_norm = block_operator_norm(&w, d);
            let unstable_norm = if y.ncols() == 0 {
                0.0
            } else {
                let u_n = cand.unstable_basis(n);
                let g = u_n.adjoint() * &y;
                let g_inv = inverse(&g)?;
                let back = u_m * g_inv * u_n.adjoint() * (&id - p_n);
                block_operator_norm(&back, d)
            };
            let k = n - m;
            let envelope = cand.d_const * (-cand.lambda * k as f64).exp();
            let sr = (stable_norm - envelope).max(0.0);
            let ur = (unstable_norm - envelope).max(0.0);
            stable_res = stable_res.max(sr);
            unstable_res = unstable_res.max(ur);
            samples.push(Sample {
                k,
                n,
                log_stable: stable_norm.ln(),
                log_unstable: unstable_norm.ln(),
            });
            if let Some(p) = pairs.as_mut() {
                p.push(PairResidual {
                    m,
                    n,
                    commutation: comm,
                    stable_norm,
                    unstable_norm,
                    stable_residual: sr,
                    unstable_residual: ur,
                });
            }
        }
    }

    let (fitted_d, fitted_lambda, grid) = fit_constants(&samples, cand.spectral_gap, horizon);
    Ok(VerificationReport {
        horizon,
        commutation_residual: commutation,
        idempotence_residual: idempotence,
        stable_residual: stable_res,
        unstable_residual: unstable_res,
        complementarity_condition: complementarity,
        fitted_d,
        fitted_lambda,
        lambda_grid: grid,
        pairs,
    })
}

/// Chooses the largest `lambda` on a log-grid in `(0, gap]` whose smallest
/// valid `D` does not grow between the first half of the horizon and the
/// whole horizon, then reports that `D`.
fn fit_constants(samples: &[Sample], gap: f64, horizon: usize) -> (f64, f64, Vec<(f64, f64)>) {
    let top = if gap.is_finite() && gap > 0.0 { gap.min(LAMBDA_CAP) } else { LAMBDA_CAP };
    let mut grid: Vec<f64> = (0..=32)
        .map(|k| top * 10f64.powf(-(k as f64) / 8.0))
        .chain((1..=32).map(|k| top * (1.0 - 10f64.powf(-(k as f64) / 8.0))))
        .filter(|&l| l > 0.0)
        .collect();
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs());

    let half = horizon / 2;
    let log_d = |lambda: f64, only_half: bool| -> f64 {
        samples
            .iter()
            .filter(|s| !only_half || s.n <= half)
            .map(|s| s.log_stable.max(s.log_unstable) + lambda * s.k as f64)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut curve = Vec::with_capacity(grid.len());
    let mut chosen: Option<(f64, f64)> = None;
    for &lambda in &grid {
        let full = log_d(lambda, false);
        let early = log_d(lambda, true);
        let d = full.exp();
        curve.push((lambda, d));
        if chosen.is_none() && full <= early + 1e-6 && d.is_finite() {
            chosen = Some((d, lambda));
        }
    }
    let (d, lambda) = chosen.unwrap_or_else(|| {
        let l = *grid.last().unwrap();
        (log_d(l, false).exp(), l)
    });
    (d.max(f64::MIN_POSITIVE), lambda, curve)
}

/// Basis of the stable subspace at time `m` and the largest observed ratio
/// `|T(n,m) phi| / |phi|` over `m <= n <= m + horizon` for basis vectors.
#[derive(Debug, Clone)]
pub struct StableSubspace {
    pub basis: CMat,
    pub max_ratio: f64,
    pub d_const: f64,
}

pub fn stable_subspace(
    sys: &FiniteDelaySystem,
    m: usize,
    horizon: usize,
    tol: f64,
) -> Result<StableSubspace> {
    let opts = DetectOptions { tol, ..Default::default() };
    let (report, data) = detect(sys, &opts)?;
    let data = data.ok_or_else(|| {
        Error::State(format!(
            "system is not hyperbolic (distance to the unit circle {:e})",
            report.min_distance_to_unit_circle
        ))
    })?;
    let basis = data.stable_basis(m).clone();
    let d = sys.dim();
    let mut max_ratio: f64 = 0.0;
    for col in 0..basis.ncols() {
        let v0 = basis.column(col).clone_owned();
        let base = block_norm(&v0, d);
        let mut v = v0;
        for n in m..m + horizon {
            v = data.projection(n + 1) * (sys.step_matrix(n)? * v);
            max_ratio = max_ratio.max(block_norm(&v, d) / base);
        }
    }
    if max_ratio > data.d_const * (1.0 + 1e-9) {
        return Err(Error::numeric(format!(
            "stable vectors grow by {max_ratio:e} > D = {:e}",
            data.d_const
        )));
    }
    Ok(StableSubspace { basis, max_ratio, d_const: data.d_const })
}

/// Finite-time singular value growth of `T(horizon, 0)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteTimeDiagnostics {
    pub horizon: usize,
    pub singular_values: Vec<f64>,
    /// `ln(sigma_i) / horizon`, descending.
    pub exponents: Vec<f64>,
    pub largest_gap: f64,
    pub gap_index: usize,
}

pub fn finite_time_diagnostics(sys: &FiniteDelaySystem, horizon: usize) -> Result<FiniteTimeDiagnostics> {
    let t = transition_matrix(sys, horizon, 0)?;
    let mut sv: Vec<f64> = t.svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let exponents: Vec<f64> = sv.iter().map(|s| s.ln() / horizon.max(1) as f64).collect();
    let (gap_index, largest_gap) = exponents
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i, w[0] - w[1]))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    Ok(FiniteTimeDiagnostics { horizon, singular_values: sv, exponents, largest_gap, gap_index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{r, real_matrix};

    fn scalar_data(p: f64, d: f64, lambda: f64) -> DichotomyData {
        let proj = CMat::from_element(1, 1, r(p));
        let (sb, ub) = if p == 1.0 {
            (CMat::from_element(1, 1, r(1.0)), CMat::zeros(1, 0))
        } else {
            (CMat::zeros(1, 0), CMat::from_element(1, 1, r(1.0)))
        };
        DichotomyData {
            dim: 1,
            lift_dim: 1,
            period: 1,
            projections: vec![proj],
            stable_bases: vec![sb],
            unstable_bases: vec![ub],
            d_const: d,
            lambda,
            spectral_gap: lambda,
            projection_sup: p,
            fitted_horizon: 0,
            status: String::new(),
        }
    }

    #[test]
    fn scalar_unstable() {
        let sys = FiniteDelaySystem::scalar(&[2.0]).unwrap();
        let (rep, data) = detect_autonomous(&sys, &DetectOptions::default()).unwrap();
        assert!(rep.hyperbolic);
        assert_eq!((rep.stable_count, rep.unstable_count), (0, 1));
        let data = data.unwrap();
        assert_eq!(data.projection(3)[(0, 0)], r(0.0));
        assert!((data.lambda - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn scalar_on_circle_is_rejected() {
        let sys = FiniteDelaySystem::scalar(&[1.0]).unwrap();
        let (rep, data) = detect_autonomous(&sys, &DetectOptions::default()).unwrap();
        assert!(!rep.hyperbolic && data.is_none());
        let sys = FiniteDelaySystem::scalar_periodic(&[2.0, 0.5]).unwrap();
        let (rep, data) = detect_periodic(&sys, &DetectOptions::default()).unwrap();
        assert!(!rep.hyperbolic && data.is_none());
    }

    #[test]
    fn fibonacci_split() {
        let sys = FiniteDelaySystem::scalar(&[1.0, 1.0]).unwrap();
        let (rep, data) = detect_autonomous(&sys, &DetectOptions::default()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert_eq!((rep.stable_count, rep.unstable_count), (1, 1));
        let mods: Vec<f64> = rep.eigenvalues.iter().map(|e| e.modulus).collect();
        assert!((mods[0] - 1.0 / phi).abs() < 1e-12 && (mods[1] - phi).abs() < 1e-12);
        let data = data.unwrap();
        assert!(data.lambda <= phi.ln() + 1e-12 && data.lambda >= 0.9 * phi.ln());
        // stable direction is the eigenvector of (1 - sqrt 5)/2: (mu, 1)
        let v = data.stable_basis(0).column(0).clone_owned();
        let mu = (1.0 - 5f64.sqrt()) / 2.0;
        assert!((v[0] / v[1] - r(mu)).norm() < 1e-12);
    }

    #[test]
    fn periodic_monodromy() {
        let sys = FiniteDelaySystem::scalar_periodic(&[3.0, 1.0 / 6.0]).unwrap();
        let (rep, data) = detect_periodic(&sys, &DetectOptions::default()).unwrap();
        assert!(rep.hyperbolic);
        assert!((rep.eigenvalues[0].value - r(0.5)).norm() < 1e-14);
        let data = data.unwrap();
        assert_eq!(data.period, 2);
        let rep = verify_dichotomy(&sys, &data, 40, false).unwrap();
        assert!(rep.stable_residual <= 1e-12 && rep.commutation_residual <= 1e-12);
    }

    #[test]
    fn period_one_reduces_to_autonomous() {
        let per = FiniteDelaySystem::periodic(vec![vec![
            real_matrix(1, 1, &[1.0]),
            real_matrix(1, 1, &[1.0]),
        ]])
        .unwrap();
        let aut = FiniteDelaySystem::scalar(&[1.0, 1.0]).unwrap();
        let opts = DetectOptions::default();
        let (_, a) = detect_periodic(&per, &opts).unwrap();
        let (_, b) = detect_autonomous(&aut, &opts).unwrap();
        let (a, b) = (a.unwrap(), b.unwrap());
        assert!((&a.projections[0] - &b.projections[0]).norm() < 1e-14);
        assert_eq!(a.lambda, b.lambda);
        assert_eq!(a.d_const, b.d_const);
    }

    #[test]
    fn exact_scalar_estimates_have_zero_residual() {
        let sys = FiniteDelaySystem::scalar(&[0.5]).unwrap();
        let rep = verify_dichotomy(&sys, &scalar_data(1.0, 1.0, 2f64.ln()), 30, false).unwrap();
        assert!(rep.stable_residual <= 1e-15 && rep.unstable_residual == 0.0);
        let sys = FiniteDelaySystem::scalar(&[2.0]).unwrap();
        let rep = verify_dichotomy(&sys, &scalar_data(0.0, 1.0, 2f64.ln()), 30, false).unwrap();
        assert!(rep.unstable_residual <= 1e-15 && rep.stable_residual == 0.0);
    }

    #[test]
    fn swapped_projection_is_caught() {
        let sys = FiniteDelaySystem::scalar(&[2.0]).unwrap();
        let rep = verify_dichotomy(&sys, &scalar_data(1.0, 1.0, 2f64.ln()), 20, true).unwrap();
        assert!(rep.stable_residual > 1e5);
        let pairs = rep.pairs.unwrap();
        let p = pairs.iter().find(|p| p.m == 0 && p.n == 10).unwrap();
        assert!((p.stable_norm - 1024.0).abs() < 1e-9);
    }

    #[test]
    fn stable_subspace_dimensions() {
        let half = FiniteDelaySystem::scalar(&[0.5]).unwrap();
        assert_eq!(stable_subspace(&half, 0, 50, 1e-8).unwrap().basis.ncols(), 1);
        let two = FiniteDelaySystem::scalar(&[2.0]).unwrap();
        assert_eq!(stable_subspace(&two, 3, 50, 1e-8).unwrap().basis.ncols(), 0);
        let one = FiniteDelaySystem::scalar(&[1.0]).unwrap();
        assert!(matches!(stable_subspace(&one, 0, 10, 1e-8), Err(Error::State(_))));
    }

    #[test]
    fn tabulated_is_refused_with_diagnostics() {
        let sys = FiniteDelaySystem::tabulated(vec![vec![real_matrix(1, 1, &[2.0])]; 5]).unwrap();
        match detect(&sys, &DetectOptions::default()) {
            Err(Error::Unsupported(msg)) => assert!(msg.contains("exponents")),
            other => panic!("unexpected {other:?}"),
        }
        let diag = finite_time_diagnostics(&sys, 5).unwrap();
        assert!((diag.exponents[0] - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn shadowing_constant_formula() {
        let data = scalar_data(0.0, 1.0, 2f64.ln());
        assert!((data.shadowing_constant() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn dichotomy_json() {
        let sys = FiniteDelaySystem::scalar(&[1.0, 1.0]).unwrap();
        let (_, data) = detect_autonomous(&sys, &DetectOptions::default()).unwrap();
        let js = serde_json::to_value(data.unwrap()).unwrap();
        assert!(js.get("D").is_some() && js.get("projections").is_some());
        let back: DichotomyData = serde_json::from_value(js).unwrap();
        assert_eq!(back.lift_dim, 2);
    }
}
