//! Acceptance criteria, each checked against an oracle written here rather
//! than against the library's own bookkeeping. Prints one line per
//! criterion and exits nonzero if any fails.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use dshadow::dichotomy::{detect, verify_dichotomy, DetectOptions, DichotomyData};
use dshadow::finite_delay::{transition_matrix, FiniteDelaySystem, ForcingSequence, Orbit};
use dshadow::linalg::{CMat, CRow, CVec, C64};
use dshadow::phase_space::{AdjointSegment, HistorySegment};
use dshadow::shadowing::{random_pseudo_orbit, resonance_probe, shadow, trial_rng};
use dshadow::volterra::{
    adjoint_step, bilinear, coordinate_dynamics, find_roots, project_cu, resonant_forcing, spectral_decomposition,
    voc_simulate, volterra_step, DecompositionOptions, RootOptions, VolterraKernel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { failures: Vec::new(), notes: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Upper bound on the operator norm in the segment norm: max over block
/// rows of the summed block 2-norms (exact for d = 1).
fn block_row_norm(t: &CMat, d: usize) -> f64 {
    let blocks = t.nrows() / d;
    (0..blocks)
        .map(|i| (0..blocks).map(|j| spectral_norm(&t.view((i * d, j * d), (d, d)).clone_owned())).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Column `c` of `T(n, m)`: start from the unit lift vector at time `m` and
/// iterate the recursion directly.
fn transition_by_recursion(table: &[Vec<CMat>], d: usize, r: usize, n: usize, m: usize) -> CMat {
    let lift = d * (r + 1);
    let mut out = CMat::zeros(lift, lift);
    for col in 0..lift {
        // hist[k] = x(m - r + k)
        let mut hist: Vec<CVec> = vec![CVec::zeros(d); r + 1];
        let (block, comp) = (col / d, col % d);
        hist[r - block][comp] = c(1.0);
        for t in m..n {
            let mut next = CVec::zeros(d);
            for j in 0..=r {
                next += &table[t][j] * &hist[hist.len() - 1 - j];
            }
            hist.push(next);
        }
        let top = hist.len() - 1;
        for k in 0..=r {
            out.view_mut((k * d, col), (d, 1)).copy_from(&hist[top - k]);
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    const SYSTEMS: usize = 200;
    const HORIZON: usize = 40;
    let (mut worst_oracle, mut worst_comp, mut worst_growth): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..SYSTEMS {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let d = rng.random_range(1..=4usize);
        let r = rng.random_range(0..=3usize);
        let s = 1.2 / ((d * (r + 1)) as f64).sqrt();
        let table: Vec<Vec<CMat>> = (0..HORIZON)
            .map(|_| (0..=r).map(|_| CMat::from_fn(d, d, |_, _| c(s * normal(&mut rng)))).collect())
            .collect();
        let sys = FiniteDelaySystem::tabulated(table.clone()).unwrap();
        let k = table.iter().flatten().map(spectral_norm).fold(1.0, f64::max);
        let omega = (((r + 1) as f64) * k * (1.0 + r as f64)).ln();
        o.require((omega - sys.omega()).abs() <= 1e-12 * omega.abs().max(1.0), format!("omega mismatch for system {i}"));
        for _ in 0..10 {
            let mut t = [0usize; 3].map(|_| rng.random_range(0..=HORIZON));
            t.sort_unstable();
            let [m, kk, n] = t;
            let t_nm = transition_matrix(&sys, n, m).unwrap();
            let oracle = transition_by_recursion(&table, d, r, n, m);
            let scale = spectral_norm(&oracle).max(1.0);
            worst_oracle = worst_oracle.max((&t_nm - &oracle).camax() / scale);
            let t_nk = transition_matrix(&sys, n, kk).unwrap();
            let t_km = transition_matrix(&sys, kk, m).unwrap();
            let size = (spectral_norm(&t_nk) * spectral_norm(&t_km)).max(1.0);
            worst_comp = worst_comp.max((&t_nm - &t_nk * &t_km).camax() / size);
            let bound = (omega * (n - m) as f64).exp();
            worst_growth = worst_growth.max((block_row_norm(&oracle, d) / bound - 1.0).max(0.0));
        }
    }
    o.require(worst_oracle <= 1e-10, format!("T(n,m) vs recursion {worst_oracle:.2e}"));
    o.require(worst_comp <= 1e-10, format!("composition residual {worst_comp:.2e}"));
    o.require(worst_growth <= 1e-10, format!("growth bound exceeded by {worst_growth:.2e}"));
    o.note(format!(
        "{SYSTEMS} systems, composition {worst_comp:.1e}, vs recursion {worst_oracle:.1e}, growth excess {worst_growth:.1e}"
    ));
    o
}

fn fibonacci() -> FiniteDelaySystem {
    FiniteDelaySystem::scalar(&[1.0, 1.0]).unwrap()
}

/// Stable spectral projection of the symmetric companion `[[1,1],[1,0]]`.
fn fibonacci_projection() -> CMat {
    let psi = (1.0 - 5f64.sqrt()) / 2.0;
    let v = CVec::from_vec(vec![c(psi), c(1.0)]);
    &v * v.transpose() / c(psi * psi + 1.0)
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let opts = DetectOptions::default();
    let sys = fibonacci();
    let (rep, data) = detect(&sys, &opts).unwrap();
    o.require(rep.hyperbolic, "fibonacci not hyperbolic");
    o.require(rep.stable_count == 1 && rep.unstable_count == 1, "fibonacci split is not 1/1");
    let ln_phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    if let Some(data) = data {
        o.require(
            data.lambda >= 0.9 * ln_phi && data.lambda <= ln_phi,
            format!("lambda {} outside [0.9, 1] ln(phi)", data.lambda),
        );
        let p_err = (data.projection(0) - fibonacci_projection()).camax();
        o.require(p_err <= 1e-9, format!("projection differs from closed form by {p_err:.2e}"));
        let v = verify_dichotomy(&sys, &data, 60, false).unwrap();
        for (name, val) in [
            ("commutation", v.commutation_residual),
            ("idempotence", v.idempotence_residual),
            ("stable estimate", v.stable_residual),
            ("unstable estimate", v.unstable_residual),
        ] {
            o.require(val <= 1e-9, format!("{name} residual {val:.2e}"));
        }
        // S^k P = psi^k P and S^{-k} Q = phi^{-k} Q
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let p = fibonacci_projection();
        let q = CMat::identity(2, 2) - &p;
        let (p_norm, q_norm) = (block_row_norm(&p, 1), block_row_norm(&q, 1));
        let mut worst: f64 = f64::NEG_INFINITY;
        for k in 0..=60 {
            let allowed = data.d_const * (-data.lambda * k as f64).exp();
            let decay = phi.powi(-k);
            worst = worst.max(p_norm * decay - allowed).max(q_norm * decay - allowed);
        }
        o.require(worst <= 1e-9, format!("closed-form estimate excess {worst:.2e}"));
        o.note(format!("lambda/ln(phi) = {:.4}, D = {:.4}", data.lambda / ln_phi, data.d_const));
    } else {
        o.require(false, "no dichotomy data for fibonacci");
    }
    for (name, sys) in [
        ("a=1", FiniteDelaySystem::scalar(&[1.0]).unwrap()),
        ("period-2 (2, 1/2)", FiniteDelaySystem::scalar_periodic(&[2.0, 0.5]).unwrap()),
    ] {
        let (rep, data) = detect(&sys, &opts).unwrap();
        o.require(!rep.hyperbolic && data.is_none(), format!("{name} not rejected"));
    }
    o
}

struct Scripted {
    name: &'static str,
    sys: FiniteDelaySystem,
    coeffs: Vec<CMat>,
    projection: CMat,
}

fn scripted() -> Vec<Scripted> {
    let m1 = |x: f64| CMat::from_element(1, 1, c(x));
    let diag = CMat::from_row_slice(2, 2, &[c(2.0), c(0.0), c(0.0), c(0.5)]);
    vec![
        Scripted { name: "a=2", sys: FiniteDelaySystem::scalar(&[2.0]).unwrap(), coeffs: vec![m1(2.0)], projection: m1(0.0) },
        Scripted { name: "a=1/2", sys: FiniteDelaySystem::scalar(&[0.5]).unwrap(), coeffs: vec![m1(0.5)], projection: m1(1.0) },
        Scripted {
            name: "diag(2,1/2)",
            sys: FiniteDelaySystem::autonomous(vec![diag.clone()]).unwrap(),
            coeffs: vec![diag],
            projection: CMat::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)]),
        },
        Scripted { name: "fibonacci", sys: fibonacci(), coeffs: vec![m1(1.0), m1(1.0)], projection: fibonacci_projection() },
    ]
}

/// Dense least-squares solve of the boundary-value problem
/// `x(n+1) = sum_j A_j x(n-j)` for `n < N`, `P x_0 = P y_0`, `Q x_N = Q y_N`.
fn bvp_oracle(coeffs: &[CMat], p: &CMat, y: &Orbit) -> Vec<CVec> {
    let d = coeffs[0].nrows();
    let r = coeffs.len() - 1;
    let n_last = y.last_time();
    let cols = d * (n_last + r + 1);
    let lift = d * (r + 1);
    let rows = d * n_last + 2 * lift;
    let col = |n: isize| ((n + r as isize) as usize) * d;
    let mut a = CMat::zeros(rows, cols);
    let mut b = CVec::zeros(rows);
    for n in 0..n_last {
        let row = n * d;
        for i in 0..d {
            a[(row + i, col(n as isize + 1) + i)] += c(1.0);
        }
        for (j, aj) in coeffs.iter().enumerate() {
            let at = col(n as isize - j as isize);
            for i in 0..d {
                for k in 0..d {
                    a[(row + i, at + k)] -= aj[(i, k)];
                }
            }
        }
    }
    let q = CMat::identity(lift, lift) - p;
    for (which, proj, time) in [(0, p, 0isize), (1, &q, n_last as isize)] {
        let row0 = d * n_last + which * lift;
        let mut y_lift = CVec::zeros(lift);
        for k in 0..=r {
            y_lift.rows_mut(k * d, d).copy_from(y.at(time - k as isize));
        }
        let rhs = proj * y_lift;
        for i in 0..lift {
            b[row0 + i] = rhs[i];
            for k in 0..=r {
                for jj in 0..d {
                    a[(row0 + i, col(time - k as isize) + jj)] = proj[(i, k * d + jj)];
                }
            }
        }
    }
    let x = a.svd(true, true).solve(&b, 1e-13).unwrap();
    (0..=(n_last + r)).map(|k| x.rows(k * d, d).clone_owned()).collect()
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    const WINDOW: usize = 60;
    const TRIALS: u64 = 100;
    let deltas = [1e-2, 1e-3, 1e-4];
    for (si, s) in scripted().into_iter().enumerate() {
        let data: DichotomyData = detect(&s.sys, &DetectOptions::default()).unwrap().1.unwrap();
        let k_d = data.shadowing_constant();
        let (mut worst_step, mut worst_ratio_to_bound, mut worst_oracle): (f64, f64, f64) = (0.0, 0.0, 0.0);
        let mut ratios = Vec::new();
        for &delta in &deltas {
            let mut ratio: f64 = 0.0;
            for t in 0..TRIALS {
                let mut rng = trial_rng(77 + si as u64, t);
                let y = random_pseudo_orbit(&s.sys, &data, delta, WINDOW, &mut rng).unwrap();
                o.require(
                    (y.defect_bound - delta).abs() <= 1e-9 * delta,
                    format!("{}: generated defect {} for delta {delta}", s.name, y.defect_bound),
                );
                let res = shadow(&s.sys, &data, &y, WINDOW).unwrap();
                let x = res.true_orbit.values();
                // step residual measured here, not taken from the result
                let r = s.coeffs.len() - 1;
                for k in r..x.len() - 1 {
                    let mut e = x[k + 1].clone();
                    for (j, aj) in s.coeffs.iter().enumerate() {
                        e -= aj * &x[k - j];
                    }
                    worst_step = worst_step.max(e.norm());
                }
                let sup = (0..x.len()).map(|k| (&x[k] - &y.orbit.values()[k]).norm()).fold(0.0, f64::max);
                worst_ratio_to_bound = worst_ratio_to_bound.max(sup / (k_d * delta));
                ratio = ratio.max(sup / delta);
                let oracle = bvp_oracle(&s.coeffs, &s.projection, &y.orbit);
                for (a, b) in x.iter().zip(&oracle) {
                    worst_oracle = worst_oracle.max((a - b).norm());
                }
            }
            ratios.push(ratio);
        }
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        o.require(worst_step <= 1e-10, format!("{}: step residual {worst_step:.2e}", s.name));
        o.require(worst_ratio_to_bound <= 1.0, format!("{}: sup error / (K_D delta) = {worst_ratio_to_bound:.3}", s.name));
        o.require(worst_oracle <= 1e-8, format!("{}: boundary-value oracle gap {worst_oracle:.2e}", s.name));
        o.require((hi - lo) / hi <= 0.05, format!("{}: ratio spread {:.3}", s.name, (hi - lo) / hi));
        o.note(format!("{} eps/(K_D delta) <= {worst_ratio_to_bound:.3}, oracle gap {worst_oracle:.1e}", s.name));
    }
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    const STEPS: usize = 10_000;
    for a in [1.0, -1.0] {
        let k = VolterraKernel::scalar(1.0, &[a]).unwrap();
        let spec = find_roots(&k, &RootOptions::default()).unwrap();
        let dec = spectral_decomposition(&k, &spec, &DecompositionOptions::default()).unwrap();
        let root = spec.on_circle().next().map(|r| r.value);
        o.require(root.map_or(false, |z| (z - c(a)).norm() <= 1e-10), format!("A(0)={a}: root {root:?}"));
        let rep = resonant_forcing(&dec, c(a), STEPS, 1e-8).unwrap();
        // x(n+1) = a x(n) + a^{n+1}, x(0) = 0 gives x(n) = n a^n
        let mut x = c(0.0);
        let mut power = c(a);
        let mut oracle_gap: f64 = 0.0;
        for n in 0..STEPS {
            x = c(a) * x + power;
            power *= c(a);
            oracle_gap = oracle_gap.max((rep.u_abs[n + 1] - x.norm()).abs() / (n + 1) as f64);
        }
        let cn = rep.c * STEPS as f64;
        o.require((rep.c - 1.0).abs() <= 1e-9, format!("A(0)={a}: c = {}", rep.c));
        o.require((rep.slope - 1.0).abs() <= 0.01, format!("A(0)={a}: slope {}", rep.slope));
        o.require(rep.fit_residual <= 1e-6 * cn, format!("A(0)={a}: fit residual {:.2e}", rep.fit_residual));
        o.require(oracle_gap <= 1e-9, format!("A(0)={a}: recursion gap {oracle_gap:.2e}"));
        o.note(format!("A(0)={a} slope {:.12}", rep.slope));
    }
    for a in [0.5, 2.0] {
        let k = VolterraKernel::scalar(1.0, &[a]).unwrap();
        let spec = find_roots(&k, &RootOptions::default()).unwrap();
        let dec = spectral_decomposition(&k, &spec, &DecompositionOptions::default()).unwrap();
        o.require(spec.on_circle().next().is_none(), format!("A(0)={a}: unit root reported"));
        for lam in [c(1.0), c(a)] {
            o.require(resonant_forcing(&dec, lam, STEPS, 1e-8).is_err(), format!("A(0)={a}: forcing at {lam} accepted"));
        }
    }
    let probe = resonance_probe(&FiniteDelaySystem::scalar(&[-1.0]).unwrap(), STEPS, 1e-8).unwrap();
    o.require((probe.slope - probe.c_pred).abs() <= 0.01 * probe.c_pred, "delay probe slope");
    o.require(resonance_probe(&FiniteDelaySystem::scalar(&[0.5]).unwrap(), STEPS, 1e-8).is_err(), "delay probe accepted a=1/2");
    o
}

fn oracle_step(terms: &[CMat], hist: &[CVec]) -> CVec {
    // hist[k] = phi(-k)
    let mut out = CVec::zeros(terms[0].nrows());
    for (j, a) in terms.iter().enumerate() {
        if j < hist.len() {
            out += a * &hist[j];
        }
    }
    out
}

fn oracle_bilinear(terms: &[CMat], psi: &[CRow], phi: &[CVec]) -> C64 {
    let mut s = (&psi[0] * &phi[0])[(0, 0)];
    for j in 1..terms.len() {
        for zeta in 0..j {
            s += (&psi[zeta + 1] * &terms[j] * &phi[j - zeta])[(0, 0)];
        }
    }
    s
}

fn random_terms(rng: &mut ChaCha8Rng, d: usize, reach: usize, scale: f64) -> Vec<CMat> {
    (0..=reach).map(|_| CMat::from_fn(d, d, |_, _| c(scale * normal(rng)))).collect()
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    let geo = VolterraKernel::geometric(2f64.ln(), CMat::from_element(1, 1, c(0.5)), c(0.25)).unwrap();
    let spec = find_roots(&geo, &RootOptions::default()).unwrap();
    o.require(spec.roots.len() == 1, format!("{} roots for the geometric kernel", spec.roots.len()));
    if let Some(root) = spec.roots.first() {
        o.require((root.value - c(0.75)).norm() <= 1e-10, format!("root {}", root.value));
        o.require(root.residual <= 1e-10, format!("|det| {:.2e}", root.residual));
    }
    o.require(spec.winding_total == spec.winding_refined, "winding count changes under refinement");
    let finer = find_roots(&geo, &RootOptions { grid: 256, ..RootOptions::default() }).unwrap();
    o.require(finer.winding_total == spec.winding_total, "winding count depends on the base grid");

    // duality on 500 random pairs, with the pairing and both steps also written out by hand
    let (mut worst_dual, mut worst_form): (f64, f64) = (0.0, 0.0);
    for i in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + i);
        let d = rng.random_range(1..=3usize);
        let reach = rng.random_range(0..=5usize);
        let terms = random_terms(&mut rng, d, reach, 0.5);
        let k = VolterraKernel::finite(0.5, terms.clone()).unwrap();
        let depth = reach + 30;
        let psi: Vec<CRow> = (0..=depth).map(|_| CRow::from_fn(d, |_, _| C64::new(normal(&mut rng), normal(&mut rng)))).collect();
        let phi: Vec<CVec> = (0..=depth).map(|_| CVec::from_fn(d, |_, _| C64::new(normal(&mut rng), normal(&mut rng)))).collect();
        let psi_seg = AdjointSegment::new(k.gamma_tilde(), psi.clone()).unwrap();
        let phi_seg = HistorySegment::new(0.5, phi.clone()).unwrap();
        let size = 1.0 + psi_seg.weighted_norm() * phi_seg.weighted_norm();

        let lib = bilinear(&k, &adjoint_step(&k, &psi_seg).unwrap(), &phi_seg).unwrap()
            - bilinear(&k, &psi_seg, &volterra_step(&k, &phi_seg).unwrap()).unwrap();
        worst_dual = worst_dual.max(lib.norm() / size);

        let mut t_phi = vec![oracle_step(&terms, &phi)];
        t_phi.extend(phi.iter().cloned());
        let mut head = CRow::zeros(d);
        for (j, a) in terms.iter().enumerate() {
            head += &psi[j] * a;
        }
        let mut t_psi = vec![head];
        t_psi.extend(psi.iter().cloned());
        let by_hand = oracle_bilinear(&terms, &t_psi, &phi) - oracle_bilinear(&terms, &psi, &t_phi);
        worst_dual = worst_dual.max(by_hand.norm() / size);
        let form_gap = (bilinear(&k, &psi_seg, &phi_seg).unwrap() - oracle_bilinear(&terms, &psi, &phi)).norm();
        worst_form = worst_form.max(form_gap / size);
    }
    o.require(worst_dual <= 1e-9, format!("duality residual {worst_dual:.2e}"));
    o.require(worst_form <= 1e-12, format!("bilinear form differs from the double sum by {worst_form:.2e}"));

    // variation of constants against a hand-written forced recursion
    let mut worst_voc: f64 = 0.0;
    for i in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + i);
        let d = rng.random_range(1..=3usize);
        let reach = rng.random_range(0..=4usize);
        let terms = random_terms(&mut rng, d, reach, 0.4 / (d as f64).sqrt());
        let k = VolterraKernel::finite(1.0, terms.clone()).unwrap();
        let depth = reach + 3;
        let init: Vec<CVec> = (0..=depth).map(|_| CVec::from_fn(d, |_, _| c(normal(&mut rng)))).collect();
        let p: Vec<CVec> = (0..50).map(|_| CVec::from_fn(d, |_, _| c(normal(&mut rng)))).collect();
        let res = voc_simulate(
            &k,
            &HistorySegment::new(1.0, init.clone()).unwrap(),
            &ForcingSequence::new(p.clone()).unwrap(),
            50,
        )
        .unwrap();
        worst_voc = worst_voc.max(res.cross_residual);
        let mut hist = init;
        for n in 0..50 {
            let next = oracle_step(&terms, &hist) + &p[n];
            hist.insert(0, next);
            let got = res.voc[n + 1].value(0);
            worst_voc = worst_voc.max((&got - &hist[0]).norm() / hist[0].norm().max(1.0));
        }
    }
    o.require(worst_voc <= 1e-9, format!("VOC residual {worst_voc:.2e}"));

    // coordinates of the projected segments follow z(n+1) = B z(n) + Psi(0) p(n)
    let kernels = vec![
        VolterraKernel::scalar(1.0, &[0.5, 0.5]).unwrap(),
        VolterraKernel::scalar(1.0, &[1.5, -0.2, 0.1]).unwrap(),
        VolterraKernel::finite(
            1.0,
            vec![
                CMat::from_row_slice(2, 2, &[c(1.2), c(0.3), c(0.0), c(0.4)]),
                CMat::from_row_slice(2, 2, &[c(0.1), c(0.0), c(0.2), c(0.1)]),
            ],
        )
        .unwrap(),
    ];
    let mut worst_coord: f64 = 0.0;
    for (i, k) in kernels.iter().enumerate() {
        let spec = find_roots(k, &RootOptions::default()).unwrap();
        let dec = spectral_decomposition(k, &spec, &DecompositionOptions::default()).unwrap();
        o.require(dec.s > 0, format!("kernel {i} has no center-unstable part"));
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + i as u64);
        let d = k.dim();
        let phi0 = HistorySegment::from_fn(1.0, d, k.reach() + 4, |_| CVec::from_fn(d, |_, _| c(normal(&mut rng))));
        let p = ForcingSequence::from_fn(d, 50, |_| CVec::from_fn(d, |_, _| c(normal(&mut rng)))).unwrap();
        let run = voc_simulate(k, &phi0, &p, 50).unwrap();
        let (z0, _) = project_cu(&dec, k, &phi0).unwrap();
        let z = coordinate_dynamics(&dec, &p, &z0, 50).unwrap();
        for (seg, zn) in run.direct.iter().zip(&z) {
            let (coords, _) = project_cu(&dec, k, seg).unwrap();
            worst_coord = worst_coord.max((coords - zn).norm() / zn.norm().max(1.0));
        }
    }
    o.require(worst_coord <= 1e-7, format!("coordinate consistency {worst_coord:.2e}"));
    o.note(format!("duality {worst_dual:.1e}, VOC {worst_voc:.1e}, coordinates {worst_coord:.1e}"));
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    let mut times = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}"));
        let start = Instant::now();
        let status = Command::new(env!("CARGO_BIN_EXE_dshadow"))
            .args(["verify-all", "--seed", "42", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        times.push(start.elapsed());
        o.require(status.status.success(), format!("verify-all run {i} exited with {:?}", status.status.code()));
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        let files: Vec<String> =
            manifest["results"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
        runs.push(files.iter().map(|f| (f.clone(), fs::read(out.join(f)).unwrap())).collect::<Vec<_>>());
    }
    o.require(!runs[0].is_empty() && runs[0] == runs[1], "result files differ between runs");
    let total: Duration = times.iter().sum();
    o.require(total <= Duration::from_secs(600), format!("two runs took {total:?}"));
    o.note(format!("{} files identical, runs {:.1?} and {:.1?}", runs[0].len(), times[0], times[1]));
    o
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, u64); 6] = [
        ("semigroup and growth", criterion_1, 10),
        ("dichotomy detection", criterion_2, 10),
        ("perron and shadowing", criterion_3, 60),
        ("resonance", criterion_4, 5),
        ("volterra spectral", criterion_5, 60),
        ("determinism", criterion_6, 600),
    ];
    let mut all_ok = true;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        outcome.require(elapsed <= Duration::from_secs(*budget), format!("took {elapsed:.1?}, budget {budget}s"));
        let ok = outcome.failures.is_empty();
        all_ok &= ok;
        println!(
            "criterion {} {:<22} {} ({:.2?}) {}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            elapsed,
            outcome.notes.join("; ")
        );
        for f in &outcome.failures {
            println!("    {f}");
        }
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
