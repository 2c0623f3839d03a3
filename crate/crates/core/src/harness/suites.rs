//! Property suites behind `verify-all`.
//!
//! Every suite draws its randomness from `seed` through per-sample streams,
//! so reports do not depend on thread scheduling.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::dichotomy::{detect, verify_dichotomy, DetectOptions, DichotomyData};
use crate::error::{Error, Result};
use crate::finite_delay::{transition_matrix, FiniteDelaySystem, ForcingSequence};
use crate::linalg::{block_operator_norm, max_abs_diff, real_matrix, spectral_norm, CMat, CRow, CVec, C64};
use crate::phase_space::{AdjointSegment, HistorySegment};
use crate::shadowing::{resonance_probe, shadowing_modulus, trial_rng};
use crate::volterra::{
    adjoint_step, bilinear, bilinear_constant, coordinate_dynamics, find_roots, project_cu, resonant_forcing,
    spectral_decomposition, voc_simulate, volterra_step, DecompositionOptions, RootOptions, VolterraKernel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Semigroup,
    Dichotomy,
    Shadowing,
    Resonance,
    Volterra,
    Duality,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Semigroup, Suite::Dichotomy, Suite::Shadowing, Suite::Resonance, Suite::Volterra, Suite::Duality];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Semigroup => "semigroup",
            Suite::Dichotomy => "dichotomy",
            Suite::Shadowing => "shadowing",
            Suite::Resonance => "resonance",
            Suite::Volterra => "volterra",
            Suite::Duality => "duality",
        }
    }

    fn id(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `all`, or a comma-separated list of suite names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector(pub Vec<Suite>);

impl Default for Selector {
    fn default() -> Self {
        Selector(Suite::ALL.to_vec())
    }
}

impl FromStr for Selector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim) {
            if part == "all" {
                out.extend(Suite::ALL);
                continue;
            }
            match Suite::ALL.iter().find(|x| x.as_str() == part) {
                Some(x) => out.push(*x),
                None => {
                    let names: Vec<_> = Suite::ALL.iter().map(|x| x.as_str()).collect();
                    return Err(format!("unknown suite \"{part}\", expected all or one of {}", names.join(", ")));
                }
            }
        }
        out.sort();
        out.dedup();
        Ok(Selector(out))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    /// Largest observed residual, or `0`/`1` for yes/no checks.
    pub max_residual: f64,
    pub threshold: f64,
    pub samples: usize,
    pub passed: bool,
}

impl Check {
    fn residual(name: impl Into<String>, max_residual: f64, threshold: f64, samples: usize) -> Self {
        Check { name: name.into(), max_residual, threshold, samples, passed: max_residual <= threshold }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::residual(name, if ok { 0.0 } else { 1.0 }, 0.0, 1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Set when the suite aborted before finishing its checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SuiteReport {
    fn new(suite: Suite, checks: Vec<Check>) -> Self {
        SuiteReport { suite: suite.as_str().into(), passed: checks.iter().all(|c| c.passed), checks, error: None }
    }

    fn failed(suite: Suite, err: &Error) -> Self {
        SuiteReport { suite: suite.as_str().into(), passed: false, checks: Vec::new(), error: Some(err.to_string()) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub full: bool,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

/// Runs the selected suites. `full` multiplies the random sample counts by 5.
pub fn verify_all(selector: &Selector, seed: u64, full: bool) -> Summary {
    let scale = if full { 5 } else { 1 };
    let suites: Vec<SuiteReport> = selector
        .0
        .iter()
        .map(|&s| {
            let res = match s {
                Suite::Semigroup => semigroup(seed, scale),
                Suite::Dichotomy => dichotomy(),
                Suite::Shadowing => shadowing(seed, scale),
                Suite::Resonance => resonance(),
                Suite::Volterra => volterra(seed, scale),
                Suite::Duality => duality(seed, scale),
            };
            res.unwrap_or_else(|e| SuiteReport::failed(s, &e))
        })
        .collect();
    Summary { seed, full, passed: suites.iter().all(|s| s.passed), suites }
}

fn rng_for(seed: u64, suite: Suite, sample: u64) -> ChaCha8Rng {
    trial_rng(seed, (suite.id() << 40) | sample)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> CMat {
    CMat::from_fn(rows, cols, |_, _| C64::new(scale * normal(rng), 0.0))
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> CVec {
    CVec::from_fn(len, |_, _| C64::new(normal(rng), normal(rng)))
}

fn random_row(rng: &mut ChaCha8Rng, len: usize) -> CRow {
    CRow::from_fn(len, |_, _| C64::new(normal(rng), normal(rng)))
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

fn semigroup(seed: u64, scale: usize) -> Result<SuiteReport> {
    const HORIZON: usize = 40;
    const TRIPLES: usize = 20;
    let count = 200 * scale;
    let per_system: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, Suite::Semigroup, i as u64);
            let d = rng.random_range(1..=4usize);
            let r = rng.random_range(0..=3usize);
            let s = 1.0 / ((d * (r + 1)) as f64).sqrt();
            let table: Vec<Vec<CMat>> =
                (0..HORIZON).map(|_| (0..=r).map(|_| random_matrix(&mut rng, d, d, s)).collect()).collect();
            let sys = FiniteDelaySystem::tabulated(table)?;
            let (mut comp, mut growth) = (0.0f64, 0.0f64);
            for _ in 0..TRIPLES {
                let mut t = [0; 3].map(|_| rng.random_range(0..=HORIZON));
                t.sort_unstable();
                let [m, k, n] = t;
                let t_nm = transition_matrix(&sys, n, m)?;
                let t_nk = transition_matrix(&sys, n, k)?;
                let t_km = transition_matrix(&sys, k, m)?;
                let size = (spectral_norm(&t_nk) * spectral_norm(&t_km)).max(1.0);
                comp = comp.max(max_abs_diff(&t_nm, &(&t_nk * &t_km)) / size);
                let bound = (sys.omega() * (n - m) as f64).exp();
                growth = growth.max((block_operator_norm(&t_nm, d) / bound - 1.0).max(0.0));
            }
            Ok((comp, growth))
        })
        .collect::<Result<_>>()?;
    Ok(SuiteReport::new(
        Suite::Semigroup,
        vec![
            Check::residual("composition", max_of(per_system.iter().map(|x| x.0)), 1e-10, count * TRIPLES),
            Check::residual("growth_bound", max_of(per_system.iter().map(|x| x.1)), 1e-10, count * TRIPLES),
        ],
    ))
}

fn fibonacci() -> Result<FiniteDelaySystem> {
    FiniteDelaySystem::scalar(&[1.0, 1.0])
}

fn dichotomy() -> Result<SuiteReport> {
    let opts = DetectOptions::default();
    let mut checks = Vec::new();
    let (rep, data) = detect(&fibonacci()?, &opts)?;
    checks.push(Check::flag("fibonacci_hyperbolic", rep.hyperbolic && data.is_some()));
    checks.push(Check::flag("fibonacci_split_1_1", rep.stable_count == 1 && rep.unstable_count == 1));
    if let Some(data) = data {
        let ln_phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        let outside = (0.9 * ln_phi - data.lambda).max(data.lambda - ln_phi).max(0.0);
        checks.push(Check::residual("fibonacci_lambda_range", outside, 0.0, 1));
        let v = verify_dichotomy(&fibonacci()?, &data, 60, false)?;
        checks.push(Check::residual("fibonacci_commutation", v.commutation_residual, 1e-9, 1));
        checks.push(Check::residual("fibonacci_idempotence", v.idempotence_residual, 1e-9, 1));
        checks.push(Check::residual("fibonacci_stable_estimate", v.stable_residual, 1e-9, 1));
        checks.push(Check::residual("fibonacci_unstable_estimate", v.unstable_residual, 1e-9, 1));
    }
    let periodic = FiniteDelaySystem::scalar_periodic(&[3.0, 1.0 / 6.0])?;
    let (rep, data) = detect(&periodic, &opts)?;
    checks.push(Check::flag("periodic_3_sixth_hyperbolic", rep.hyperbolic));
    if let Some(data) = data {
        let v = verify_dichotomy(&periodic, &data, 60, false)?;
        let worst = v.commutation_residual.max(v.idempotence_residual).max(v.stable_residual).max(v.unstable_residual);
        checks.push(Check::residual("periodic_3_sixth_residuals", worst, 1e-9, 1));
    }
    for (name, sys) in [
        ("scalar_1_rejected", FiniteDelaySystem::scalar(&[1.0])?),
        ("periodic_2_half_rejected", FiniteDelaySystem::scalar_periodic(&[2.0, 0.5])?),
    ] {
        let (rep, data) = detect(&sys, &opts)?;
        checks.push(Check::flag(name, !rep.hyperbolic && data.is_none()));
    }
    Ok(SuiteReport::new(Suite::Dichotomy, checks))
}

/// The hyperbolic systems the shadowing suite runs on.
pub fn scripted_hyperbolic() -> Result<Vec<(&'static str, FiniteDelaySystem)>> {
    Ok(vec![
        ("scalar_2", FiniteDelaySystem::scalar(&[2.0])?),
        ("scalar_half", FiniteDelaySystem::scalar(&[0.5])?),
        ("diag_2_half", FiniteDelaySystem::autonomous(vec![real_matrix(2, 2, &[2.0, 0.0, 0.0, 0.5])])?),
        ("fibonacci", fibonacci()?),
    ])
}

fn hyperbolic_data(sys: &FiniteDelaySystem) -> Result<DichotomyData> {
    detect(sys, &DetectOptions::default())?
        .1
        .ok_or_else(|| Error::State("scripted system was not detected as hyperbolic".into()))
}

fn shadowing(seed: u64, scale: usize) -> Result<SuiteReport> {
    const WINDOW: usize = 60;
    let trials = 100 * scale;
    let deltas = [1e-2, 1e-3, 1e-4];
    let mut checks = Vec::new();
    for (i, (name, sys)) in scripted_hyperbolic()?.into_iter().enumerate() {
        let data = hyperbolic_data(&sys)?;
        let sys_seed = seed.wrapping_add((Suite::Shadowing.id() << 40) | i as u64);
        let stats = deltas
            .iter()
            .map(|&delta| shadowing_modulus(&sys, &data, trials, delta, WINDOW, sys_seed))
            .collect::<Result<Vec<_>>>()?;
        let samples = trials * deltas.len();
        checks.push(Check::residual(
            format!("{name}_step_residual"),
            max_of(stats.iter().map(|s| s.max_step_residual)),
            1e-10,
            samples,
        ));
        checks.push(Check::residual(
            format!("{name}_error_over_bound"),
            max_of(stats.iter().map(|s| s.eps_max / (s.k_d * s.delta))),
            1.0,
            samples,
        ));
        let ratios: Vec<f64> = stats.iter().map(|s| s.ratio).collect();
        let hi = max_of(ratios.iter().cloned());
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(Check::residual(format!("{name}_ratio_spread"), (hi - lo) / hi, 0.05, deltas.len()));
    }
    Ok(SuiteReport::new(Suite::Shadowing, checks))
}

fn resonance() -> Result<SuiteReport> {
    const STEPS: usize = 10_000;
    let mut checks = Vec::new();
    for (name, a) in [("kernel_plus_1", 1.0), ("kernel_minus_1", -1.0)] {
        let k = VolterraKernel::scalar(1.0, &[a])?;
        let spec = find_roots(&k, &RootOptions::default())?;
        let dec = spectral_decomposition(&k, &spec, &DecompositionOptions::default())?;
        let root = spec
            .on_circle()
            .next()
            .ok_or_else(|| Error::State(format!("{name}: no root on the unit circle")))?;
        let rep = resonant_forcing(&dec, root.value, STEPS, 1e-8)?;
        checks.push(Check::residual(format!("{name}_c"), (rep.c - 1.0).abs(), 1e-9, 1));
        checks.push(Check::residual(format!("{name}_slope"), (rep.slope - rep.c).abs() / rep.c, 0.01, 1));
        checks.push(Check::residual(format!("{name}_fit"), rep.fit_residual / (rep.c * STEPS as f64), 1e-6, STEPS));
    }
    for (name, a) in [("kernel_half_rejected", 0.5), ("kernel_2_rejected", 2.0)] {
        let k = VolterraKernel::scalar(1.0, &[a])?;
        let spec = find_roots(&k, &RootOptions::default())?;
        let dec = spectral_decomposition(&k, &spec, &DecompositionOptions::default())?;
        let rejected = spec.on_circle().next().is_none()
            && resonant_forcing(&dec, C64::new(1.0, 0.0), STEPS, 1e-8).is_err()
            && resonant_forcing(&dec, C64::new(a, 0.0), STEPS, 1e-8).is_err();
        checks.push(Check::flag(name, rejected));
    }
    for (name, a) in [("delay_plus_1", 1.0), ("delay_minus_1", -1.0)] {
        let rep = resonance_probe(&FiniteDelaySystem::scalar(&[a])?, STEPS, 1e-8)?;
        checks.push(Check::residual(format!("{name}_slope"), (rep.slope - rep.c_pred).abs() / rep.c_pred, 0.01, 1));
        checks.push(Check::residual(format!("{name}_fit"), rep.relative_residual(), 1e-6, STEPS));
    }
    let hyperbolic = FiniteDelaySystem::scalar(&[0.5])?;
    checks.push(Check::flag("delay_half_rejected", resonance_probe(&hyperbolic, STEPS, 1e-8).is_err()));
    Ok(SuiteReport::new(Suite::Resonance, checks))
}

fn random_kernel(rng: &mut ChaCha8Rng, gamma: f64, max_dim: usize, max_reach: usize, scale: f64) -> Result<VolterraKernel> {
    let d = rng.random_range(1..=max_dim);
    let reach = rng.random_range(0..=max_reach);
    let s = scale / (d as f64).sqrt();
    let terms = (0..=reach).map(|_| random_matrix(rng, d, d, s)).collect();
    VolterraKernel::finite(gamma, terms)
}

fn volterra(seed: u64, scale: usize) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let geo = VolterraKernel::geometric(2f64.ln(), CMat::from_element(1, 1, C64::new(0.5, 0.0)), C64::new(0.25, 0.0))?;
    let spec = find_roots(&geo, &RootOptions::default())?;
    checks.push(Check::flag("geometric_single_root", spec.roots.len() == 1 && spec.roots[0].multiplicity == 1));
    if let Some(root) = spec.roots.first() {
        checks.push(Check::residual("geometric_root_value", (root.value - C64::new(0.75, 0.0)).norm(), 1e-10, 1));
        checks.push(Check::residual("geometric_det", root.residual, 1e-10, 1));
    }
    checks.push(Check::flag("geometric_winding_stable", spec.winding_total == spec.winding_refined));

    const STEPS: usize = 50;
    let voc_count = 20 * scale;
    let voc = (0..voc_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, Suite::Volterra, i as u64);
            let k = random_kernel(&mut rng, 1.0, 3, 5, 0.4)?;
            let d = k.dim();
            let phi0 = HistorySegment::from_fn(1.0, d, k.reach() + 5, |_| random_vector(&mut rng, d));
            let p = ForcingSequence::from_fn(d, STEPS, |_| random_vector(&mut rng, d))?;
            Ok(voc_simulate(&k, &phi0, &p, STEPS)?.cross_residual)
        })
        .collect::<Result<Vec<f64>>>()?;
    checks.push(Check::residual("voc_vs_recursion", max_of(voc), 1e-9, voc_count * STEPS));

    let coord_count = 20 * scale;
    let coords = (0..coord_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, Suite::Volterra, (1 << 20) | i as u64);
            let k = random_kernel(&mut rng, 1.0, 2, 3, 0.8)?;
            let Ok(spec) = find_roots(&k, &RootOptions::default()) else { return Ok(None) };
            let Ok(dec) = spectral_decomposition(&k, &spec, &DecompositionOptions::default()) else {
                return Ok(None);
            };
            if dec.s == 0 {
                return Ok(None);
            }
            let d = k.dim();
            let phi0 = HistorySegment::from_fn(1.0, d, k.reach() + 5, |_| random_vector(&mut rng, d));
            let p = ForcingSequence::from_fn(d, STEPS, |_| random_vector(&mut rng, d))?;
            let run = voc_simulate(&k, &phi0, &p, STEPS)?;
            let (z0, _) = project_cu(&dec, &k, &phi0)?;
            let z = coordinate_dynamics(&dec, &p, &z0, STEPS)?;
            let mut worst: f64 = 0.0;
            for (seg, zn) in run.direct.iter().zip(&z) {
                let (c, _) = project_cu(&dec, &k, seg)?;
                worst = worst.max((c - zn).norm() / zn.norm().max(1.0));
            }
            Ok(Some(worst))
        })
        .collect::<Result<Vec<Option<f64>>>>()?;
    let used: Vec<f64> = coords.into_iter().flatten().collect();
    checks.push(Check::flag("coordinate_cases_available", !used.is_empty()));
    checks.push(Check::residual("coordinates_vs_projection", max_of(used.iter().cloned()), 1e-7, used.len() * STEPS));
    Ok(SuiteReport::new(Suite::Volterra, checks))
}

fn duality(seed: u64, scale: usize) -> Result<SuiteReport> {
    let count = 500 * scale;
    let gamma = 0.5;
    let per_pair = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, Suite::Duality, i as u64);
            let k = random_kernel(&mut rng, gamma, 3, 5, 0.5)?;
            let d = k.dim();
            let depth = k.reach() + 30;
            let psi = AdjointSegment::from_fn(k.gamma_tilde(), d, depth, |_| random_row(&mut rng, d));
            let phi = HistorySegment::from_fn(gamma, d, depth, |_| random_vector(&mut rng, d));
            let left = bilinear(&k, &adjoint_step(&k, &psi)?, &phi)?;
            let right = bilinear(&k, &psi, &volterra_step(&k, &phi)?)?;
            let size = psi.weighted_norm() * phi.weighted_norm();
            let dual = (left - right).norm() / (1.0 + size);
            let bound = bilinear(&k, &psi, &phi)?.norm() / (bilinear_constant(&k) * size);
            Ok((dual, bound))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    Ok(SuiteReport::new(
        Suite::Duality,
        vec![
            Check::residual("duality", max_of(per_pair.iter().map(|x| x.0)), 1e-9, count),
            Check::residual("bilinear_bound_ratio", max_of(per_pair.iter().map(|x| x.1)), 1.0 + 1e-12, count),
        ],
    ))
}
