use crate::error::{Error, Result};
use crate::linalg::{CMat, CRow, CVec, C64};
use crate::phase_space::{AdjointSegment, HistorySegment};

use super::VolterraKernel;

pub(super) fn check_history(k: &VolterraKernel, h: &HistorySegment) -> Result<()> {
    if h.dim() != k.dim() {
        return Err(Error::dims(format!("history dimension {} vs kernel {}", h.dim(), k.dim())));
    }
    if (h.gamma() - k.gamma()).abs() > 1e-12 * k.gamma() {
        return Err(Error::arg(format!(
            "history weight {} differs from kernel decay rate {}",
            h.gamma(),
            k.gamma()
        )));
    }
    if h.depth() < k.reach() {
        return Err(Error::DepthInsufficient { have: h.depth(), required: k.reach() });
    }
    Ok(())
}

fn check_adjoint(k: &VolterraKernel, psi: &AdjointSegment) -> Result<()> {
    if psi.dim() != k.dim() {
        return Err(Error::dims(format!("adjoint dimension {} vs kernel {}", psi.dim(), k.dim())));
    }
    if psi.depth() < k.reach() {
        return Err(Error::DepthInsufficient { have: psi.depth(), required: k.reach() });
    }
    Ok(())
}

/// One step of the solution operator: the new head is
/// `sum_j A(j) phi(-j)`, every other entry shifts one place back.
/// The stored depth grows by one.
pub fn volterra_step(k: &VolterraKernel, h: &HistorySegment) -> Result<HistorySegment> {
    volterra_step_forced(k, h, &CVec::zeros(k.dim()))
}

/// As [`volterra_step`] with `p` added to the new head.
pub fn volterra_step_forced(k: &VolterraKernel, h: &HistorySegment, p: &CVec) -> Result<HistorySegment> {
    check_history(k, h)?;
    if p.len() != k.dim() {
        return Err(Error::dims("forcing dimension differs from kernel dimension"));
    }
    let depth = h.depth();
    let top = match k.terms() {
        super::KernelTerms::Finite { terms, .. } => (terms.len() - 1).min(depth),
        super::KernelTerms::Geometric { .. } => depth,
    };
    let mut head = p.clone();
    for (j, v) in h.values().iter().enumerate().take(top + 1) {
        head += k.term(j) * v;
    }
    let mut values = Vec::with_capacity(depth + 2);
    values.push(head);
    values.extend(h.values().iter().cloned());
    let tail_bound = k.weighted_sum().max(1.0) * h.tail_bound + k.weighted_tail(depth) * h.weighted_norm();
    Ok(HistorySegment::from_parts(h.gamma(), k.dim(), values, tail_bound))
}

/// One step of the formal adjoint: new head `sum_j psi(j) A(j)`, every
/// other entry shifts one place forward.
pub fn adjoint_step(k: &VolterraKernel, psi: &AdjointSegment) -> Result<AdjointSegment> {
    check_adjoint(k, psi)?;
    let depth = psi.depth();
    let top = match k.terms() {
        super::KernelTerms::Finite { terms, .. } => (terms.len() - 1).min(depth),
        super::KernelTerms::Geometric { .. } => depth,
    };
    let mut head = CRow::zeros(k.dim());
    for (j, v) in psi.values().iter().enumerate().take(top + 1) {
        head += v * k.term(j);
    }
    let mut values = Vec::with_capacity(depth + 2);
    values.push(head);
    values.extend(psi.values().iter().cloned());
    Ok(AdjointSegment::from_parts(psi.gamma_tilde(), k.dim(), values))
}

/// `<Psi, Phi> = Psi(0) Phi(0) + sum_{j>=1} sum_{zeta<j} Psi(zeta+1) A(j) Phi(zeta-j)`
/// for matrix-valued histories, summed over `j <= reach`.
pub fn bilinear_matrix(
    k: &VolterraKernel,
    psi: impl Fn(usize) -> CMat,
    phi: impl Fn(isize) -> CMat,
) -> CMat {
    let reach = k.reach();
    let psis: Vec<CMat> = (0..=reach).map(&psi).collect();
    let phis: Vec<CMat> = (0..=reach).map(|m| phi(-(m as isize))).collect();
    let mut out = &psis[0] * &phis[0];
    for j in 1..=reach {
        let a = k.term(j);
        if a.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            continue;
        }
        for zeta in 0..j {
            out += &psis[zeta + 1] * &a * &phis[j - zeta];
        }
    }
    out
}

/// The duality pairing of an adjoint history with a history.
pub fn bilinear(k: &VolterraKernel, psi: &AdjointSegment, phi: &HistorySegment) -> Result<C64> {
    check_history(k, phi)?;
    check_adjoint(k, psi)?;
    let m = bilinear_matrix(
        k,
        |z| CMat::from_row_slice(1, k.dim(), psi.value(z).as_slice()),
        |t| CMat::from_column_slice(k.dim(), 1, phi.value(t).as_slice()),
    );
    Ok(m[(0, 0)])
}

/// `K_b` with `|<psi, phi>| <= K_b |psi| |phi|`:
/// `1 + sum_j |A(j)| sum_{zeta<j} e^{gamma_tilde (zeta+1) + gamma (j - zeta)}`.
pub fn bilinear_constant(k: &VolterraKernel) -> f64 {
    let (g, gt) = (k.gamma(), k.gamma_tilde());
    let ratio = (gt - g).exp();
    let inner = |j: usize| -> f64 {
        // sum_{zeta<j} e^{gt(zeta+1) + g(j-zeta)} = e^{gt + g j} (1 - ratio^j) / (1 - ratio)
        (gt + g * j as f64).exp() * (1.0 - ratio.powi(j as i32)) / (1.0 - ratio)
    };
    let mut total = 1.0;
    for j in 1..=k.reach() {
        total += crate::linalg::spectral_norm(&k.term(j)) * inner(j);
    }
    // terms beyond the reach: inner(j) <= e^{gt + g j} / (1 - ratio)
    total + k.weighted_tail(k.reach()) * gt.exp() / (1.0 - ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{r, real_vector};
    use crate::phase_space::gamma_embed;

    #[test]
    fn step_examples() {
        let k = VolterraKernel::scalar(1.0, &[2.0]).unwrap();
        let z = volterra_step(&k, &HistorySegment::zeros(1.0, 1, 3)).unwrap();
        assert!(z.values().iter().all(|v| v.norm() == 0.0));
        let h = gamma_embed(&real_vector(&[1.0]), 1.0, 0).unwrap();
        let s = volterra_step(&k, &h).unwrap();
        assert_eq!(s.value(0)[0], r(2.0));
        assert_eq!(s.value(-1)[0], r(1.0));
    }

    #[test]
    fn depth_is_checked() {
        let k = VolterraKernel::scalar(1.0, &[0.5, 0.1, 0.1]).unwrap();
        match volterra_step(&k, &HistorySegment::zeros(1.0, 1, 1)) {
            Err(Error::DepthInsufficient { have: 1, required: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn adjoint_examples() {
        let k = VolterraKernel::scalar(1.0, &[0.7]).unwrap();
        let psi = AdjointSegment::new(0.5, vec![CRow::from_element(1, r(1.0)), CRow::zeros(1)]).unwrap();
        let s = adjoint_step(&k, &psi).unwrap();
        assert_eq!(s.value(0)[0], r(0.7));
        assert_eq!(s.value(1)[0], r(1.0));
    }

    #[test]
    fn bilinear_examples() {
        let b = 0.3;
        let k = VolterraKernel::scalar(1.0, &[0.0, b]).unwrap();
        let psi = AdjointSegment::new(0.5, vec![CRow::from_element(1, r(2.0)), CRow::from_element(1, r(5.0))]).unwrap();
        let phi = HistorySegment::new(1.0, vec![real_vector(&[3.0]), real_vector(&[7.0])]).unwrap();
        let v = bilinear(&k, &psi, &phi).unwrap();
        assert!((v - r(2.0 * 3.0 + 5.0 * b * 7.0)).norm() < 1e-15);
        let gx = gamma_embed(&real_vector(&[4.0]), 1.0, 1).unwrap();
        assert!((bilinear(&k, &psi, &gx).unwrap() - r(8.0)).norm() < 1e-15);
    }

    #[test]
    fn eigenfunction_is_scaled() {
        // A(0) = 0.5, A(1) = 0.5: roots of l^2 - 0.5 l - 0.5 are 1 and -1/2
        let k = VolterraKernel::scalar(1.0, &[0.5, 0.5]).unwrap();
        let lam = r(-0.5);
        let phi = HistorySegment::from_fn(1.0, 1, 5, |t| CVec::from_element(1, lam.powi(t as i32)));
        let mut h = phi.clone();
        for _ in 0..4 {
            h = volterra_step(&k, &h).unwrap();
        }
        for m in 0..=5 {
            let t = -(m as isize);
            assert!((h.value(t) - phi.value(t) * lam.powi(4)).norm() < 1e-12);
        }
        let psi = AdjointSegment::from_fn(0.5, 1, 5, |z| CRow::from_element(1, lam.powi(-(z as i32))));
        let s = adjoint_step(&k, &psi).unwrap();
        for z in 0..=5 {
            assert!((s.value(z) - psi.value(z) * lam).norm() < 1e-12);
        }
    }
}
