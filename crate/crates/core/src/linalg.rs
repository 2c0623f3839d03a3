//! Dense complex linear algebra shared by the finite-delay and Volterra halves.
//!
//! Everything here works on `nalgebra` dynamic matrices over `Complex64`.
//! The one non-trivial piece is [`SpectralSplit`], an ordered complex Schur
//! decomposition that separates a selected part of the spectrum and returns
//! the associated spectral projector.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type CRow = RowDVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Real scalar as a complex number.
#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|&x| r(x)))
}

pub fn real_vector(data: &[f64]) -> CVec {
    CVec::from_iterator(data.len(), data.iter().map(|&x| r(x)))
}

/// Euclidean norm on C^d.
#[inline]
pub fn vec_norm(v: &CVec) -> f64 {
    v.norm()
}

/// Largest singular value, i.e. the operator norm induced by the Euclidean norm.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Sup-of-blocks norm of a lifted vector made of consecutive `d`-blocks.
pub fn block_norm(v: &CVec, d: usize) -> f64 {
    debug_assert_eq!(v.len() % d, 0);
    (0..v.len() / d)
        .map(|b| v.rows(b * d, d).norm())
        .fold(0.0, f64::max)
}

/// Block row-sum norm `max_i sum_k |M_ik|_2` for `d`-blocks.
///
/// Dominates the operator norm induced by [`block_norm`] and coincides with it
/// when `d == 1`. It is submultiplicative.
pub fn block_operator_norm(m: &CMat, d: usize) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let rb = m.nrows() / d;
    let cb = m.ncols() / d;
    let mut best: f64 = 0.0;
    for i in 0..rb {
        let mut row = 0.0;
        for k in 0..cb {
            let blk = m.view((i * d, k * d), (d, d)).clone_owned();
            row += if d == 1 { blk[(0, 0)].norm() } else { spectral_norm(&blk) };
        }
        best = best.max(row);
    }
    best
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Integer power, negative exponents use `inv`.
pub fn mat_pow(m: &CMat, inv: Option<&CMat>, exp: i64) -> CMat {
    let base = if exp < 0 {
        inv.expect("inverse needed for negative power").clone()
    } else {
        m.clone()
    };
    let mut e = exp.unsigned_abs();
    let mut acc = identity(m.nrows());
    let mut b = base;
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &b;
        }
        b = &b * &b;
        e >>= 1;
    }
    acc
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::numeric(format!("singular {}x{} matrix", m.nrows(), m.ncols())))
}

/// Ratio of extreme singular values; `inf` for rank-deficient input.
pub fn condition_number(m: &CMat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Orthonormal basis of the column space of a full-column-rank matrix.
pub fn orthonormalize(m: &CMat) -> CMat {
    if m.ncols() == 0 {
        return m.clone();
    }
    m.clone().qr().q()
}

/// Right null vector (unit norm) for the smallest singular value, and that value.
pub fn right_null_vector(m: &CMat) -> (CVec, f64) {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^H");
    let (idx, sigma) = argmin(svd.singular_values.as_slice());
    let v = vt.row(idx).adjoint();
    (v, sigma)
}

/// Left null vector `w` with `w m ~ 0` (unit norm), and the smallest singular value.
pub fn left_null_vector(m: &CMat) -> (CRow, f64) {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let (idx, sigma) = argmin(svd.singular_values.as_slice());
    (u.column(idx).adjoint(), sigma)
}

/// The `k` right singular vectors of the smallest singular values.
pub fn null_space(m: &CMat, k: usize) -> (CMat, Vec<f64>) {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let n = m.ncols();
    let mut basis = CMat::zeros(n, k);
    let mut sig = Vec::with_capacity(k);
    for (col, &i) in order.iter().take(k).enumerate() {
        basis.set_column(col, &vt.row(i).adjoint());
        sig.push(svd.singular_values[i]);
    }
    (basis, sig)
}

fn argmin(xs: &[f64]) -> (usize, f64) {
    xs.iter()
        .cloned()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, x)| if x < acc.1 { (i, x) } else { acc })
}

/// Complex Schur form `m = Q T Q^H` with `T` upper triangular.
pub fn schur(m: &CMat) -> Result<(CMat, CMat)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((m.clone(), m.clone()));
    }
    let scale = m.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
    let schur = nalgebra::Schur::try_new(m.clone(), f64::EPSILON * scale, 1000 * n)
        .ok_or_else(|| {
            Error::numeric(format!(
                "Schur iteration did not converge (size {n}, condition estimate {:.3e})",
                condition_number(m)
            ))
        })?;
    let (q, mut t) = schur.unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = ZERO;
        }
    }
    Ok((q, t))
}

pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let (_, t) = schur(m)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Reorders a complex Schur form so that the diagonal entries flagged by
/// `select` come first. Returns the number of selected entries.
pub fn reorder_schur(q: &mut CMat, t: &mut CMat, select: impl Fn(C64) -> bool) -> usize {
    let n = t.nrows();
    let mut placed = 0;
    for k in 0..n {
        if !select(t[(k, k)]) {
            continue;
        }
        // bubble entry k up to position `placed`
        let mut pos = k;
        while pos > placed {
            swap_adjacent(q, t, pos - 1);
            pos -= 1;
        }
        placed += 1;
    }
    placed
}

/// Swaps diagonal entries `k` and `k+1` of an upper triangular `t` with a
/// Givens rotation, updating `q` so that `Q T Q^H` is unchanged.
fn swap_adjacent(q: &mut CMat, t: &mut CMat, k: usize) {
    let n = t.nrows();
    let a = t[(k, k)];
    let b = t[(k + 1, k + 1)];
    let off = t[(k, k + 1)];
    let x0 = off;
    let x1 = b - a;
    let h = (x0.norm_sqr() + x1.norm_sqr()).sqrt();
    if h == 0.0 {
        return;
    }
    let cs = x0 / h;
    let sn = x1 / h;
    // G = [[cs, -conj(sn)], [sn, conj(cs)]]
    let g00 = cs;
    let g01 = -sn.conj();
    let g10 = sn;
    let g11 = cs.conj();
    for j in 0..n {
        let u = t[(k, j)];
        let v = t[(k + 1, j)];
        t[(k, j)] = g00.conj() * u + g10.conj() * v;
        t[(k + 1, j)] = g01.conj() * u + g11.conj() * v;
    }
    for i in 0..n {
        let u = t[(i, k)];
        let v = t[(i, k + 1)];
        t[(i, k)] = u * g00 + v * g10;
        t[(i, k + 1)] = u * g01 + v * g11;
        let u = q[(i, k)];
        let v = q[(i, k + 1)];
        q[(i, k)] = u * g00 + v * g10;
        q[(i, k + 1)] = u * g01 + v * g11;
    }
    t[(k + 1, k)] = ZERO;
}

/// Solves `T11 X - X T22 = C` for upper triangular `T11`, `T22` with
/// disjoint spectra.
pub fn triangular_sylvester(t11: &CMat, t22: &CMat, rhs: &CMat) -> Result<CMat> {
    let k = t11.nrows();
    let m = t22.nrows();
    let mut x = CMat::zeros(k, m);
    for j in 0..m {
        let mut col: CVec = rhs.column(j).clone_owned();
        for i in 0..j {
            let coef = t22[(i, j)];
            if coef != ZERO {
                col += x.column(i) * coef;
            }
        }
        let mu = t22[(j, j)];
        for i in (0..k).rev() {
            let mut s = col[i];
            for l in (i + 1)..k {
                s -= t11[(i, l)] * x[(l, j)];
            }
            let piv = t11[(i, i)] - mu;
            if piv.norm() < 1e-300 {
                return Err(Error::numeric(
                    "Sylvester equation is singular: the two spectral sets touch",
                ));
            }
            x[(i, j)] = s / piv;
        }
    }
    Ok(x)
}

/// Ordered Schur split of a square matrix into a selected invariant subspace
/// and its spectral complement.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    /// Number of selected eigenvalues (with multiplicity).
    pub selected: usize,
    /// Eigenvalues in the reordered sequence, selected ones first.
    pub eigenvalues: Vec<C64>,
    /// Spectral projector onto the selected invariant subspace along the complement.
    pub projector: CMat,
    /// Orthonormal basis of the selected invariant subspace.
    pub selected_basis: CMat,
    /// Orthonormal basis of the complementary invariant subspace (kernel of the projector).
    pub complement_basis: CMat,
    /// Schur vectors and triangular factor after reordering.
    pub q: CMat,
    pub t: CMat,
}

impl SpectralSplit {
    pub fn new(m: &CMat, select: impl Fn(C64) -> bool) -> Result<Self> {
        let n = m.nrows();
        let (mut q, mut t) = schur(m)?;
        let k = reorder_schur(&mut q, &mut t, &select);
        let t11 = t.view((0, 0), (k, k)).clone_owned();
        let t12 = t.view((0, k), (k, n - k)).clone_owned();
        let t22 = t.view((k, k), (n - k, n - k)).clone_owned();
        let x = triangular_sylvester(&t11, &t22, &t12)?;
        let mut p_schur = CMat::zeros(n, n);
        for i in 0..k {
            p_schur[(i, i)] = ONE;
        }
        p_schur.view_mut((0, k), (k, n - k)).copy_from(&x);
        let projector = &q * p_schur * q.adjoint();
        let selected_basis = q.columns(0, k).clone_owned();
        let mut comp = CMat::zeros(n, n - k);
        comp.view_mut((0, 0), (k, n - k)).copy_from(&(-&x));
        for i in 0..(n - k) {
            comp[(k + i, i)] = ONE;
        }
        let complement_basis = orthonormalize(&(&q * comp));
        let eigenvalues = (0..n).map(|i| t[(i, i)]).collect();
        Ok(SpectralSplit {
            selected: k,
            eigenvalues,
            projector,
            selected_basis,
            complement_basis,
            q,
            t,
        })
    }
}

/// Minimum-norm least-squares solve of `a x = b` via SVD.
pub fn lstsq(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.ncols() == 0 {
        return Ok(CMat::zeros(0, b.ncols()));
    }
    let svd = a.clone().svd(true, true);
    let tol = f64::EPSILON * a.nrows().max(a.ncols()) as f64
        * svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.solve(b, tol).map_err(|e| Error::numeric(e.to_string()))
}
