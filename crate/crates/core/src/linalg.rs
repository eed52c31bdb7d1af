//! Dense complex-matrix kernels.
//!
//! Thin wrappers over nalgebra that pin down the conventions the rest of the
//! crate relies on: singular values and eigenvalues sorted in descending
//! order, a QR factor with a nonnegative real diagonal, and explicit
//! tolerance checks for Hermitian and PSD inputs.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

#[allow(non_camel_case_types)]
pub type c64 = Complex<f64>;
pub type CMatrix = DMatrix<c64>;
pub type CVector = DVector<c64>;

/// Numerical tolerances shared by the whole crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative reconstruction residual expected of a factorization.
    pub factorization: f64,
    /// Relative residual used by property checks (e.g. `B (A + rI) B^H = I`).
    pub property: f64,
    /// PSD / trace-budget slack for transmit covariances.
    pub psd: f64,
    /// Smallest eigenvalue accepted before a matrix is declared singular.
    pub singular: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        factorization: 1e-10,
        property: 1e-8,
        psd: 1e-9,
        singular: 1e-12,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

pub fn c(re: f64, im: f64) -> c64 {
    Complex::new(re, im)
}

pub fn re(x: f64) -> c64 {
    Complex::new(x, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Builds a matrix from real row-major entries.
pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    assert_eq!(entries.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| re(entries[i * cols + j]))
}

pub fn diag_real(d: &[f64]) -> CMatrix {
    let n = d.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { re(d[i]) } else { c64::default() })
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn ensure_finite(a: &CMatrix, what: &str) -> Result<()> {
    if is_finite(a) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what}: non-finite entry")))
    }
}

pub fn frobenius_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Real part of the trace.
pub fn trace_re(a: &CMatrix) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

/// `v v^H`.
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Rotates `v` so that its first entry with non-negligible magnitude is real
/// and positive.
pub fn normalize_phase(v: &mut CVector) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(lead) = v.iter().find(|z| z.norm() > 1e-12 * scale).copied() {
        let phase = lead.conj() / lead.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

/// Thin singular value decomposition `A = U diag(sigma) V^H`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        let s = diag_real(&self.sigma);
        &self.u * s * self.v.adjoint()
    }
}

pub fn svd(a: &CMatrix) -> Result<Svd> {
    ensure_finite(a, "svd")?;
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::invalid("svd: empty matrix"));
    }
    let dec = a.clone().svd(true, true);
    let u = dec.u.expect("requested U");
    let v_t = dec.v_t.expect("requested V^H");
    let k = dec.singular_values.len();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| dec.singular_values[j].total_cmp(&dec.singular_values[i]));

    let sigma = order.iter().map(|&i| dec.singular_values[i]).collect();
    let u = CMatrix::from_fn(u.nrows(), k, |r, c| u[(r, order[c])]);
    let v = CMatrix::from_fn(v_t.ncols(), k, |r, c| v_t[(order[c], r)].conj());
    Ok(Svd { u, sigma, v })
}

/// Singular values padded with zeros to `cols` entries, together with a full
/// `cols x cols` unitary matrix of right singular vectors.
///
/// When `A` is wide the trailing columns span its null space.
pub fn right_singular_basis(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let (rows, cols) = a.shape();
    let padded;
    let src = if rows < cols {
        padded = CMatrix::from_fn(cols, cols, |i, j| if i < rows { a[(i, j)] } else { c64::default() });
        &padded
    } else {
        a
    };
    let dec = svd(src)?;
    Ok((dec.sigma, dec.v))
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> Result<f64> {
    Ok(svd(a)?.sigma[0])
}

#[derive(Debug, Clone)]
pub struct Eigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, column `k` pairs with `values[k]`.
    pub vectors: CMatrix,
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
///
/// The input is symmetrized before factoring.
pub fn hermitian_eig(a: &CMatrix) -> Result<Eigen> {
    ensure_finite(a, "hermitian_eig")?;
    if !a.is_square() {
        return Err(Error::invalid("hermitian_eig: matrix not square"));
    }
    let n = a.nrows();
    let norm = frobenius_sq(a).sqrt();
    let skew = frobenius_sq(&(a - a.adjoint())).sqrt() * 0.5;
    if skew > Tolerances::DEFAULT.factorization * norm.max(f64::MIN_POSITIVE) && skew > 0.0 {
        return Err(Error::invalid(format!(
            "hermitian_eig: matrix not Hermitian (skew part {skew:e})"
        )));
    }
    Ok(hermitian_eig_unchecked(&hermitian_part(a), n))
}

pub(crate) fn hermitian_eig_unchecked(a: &CMatrix, n: usize) -> Eigen {
    let dec = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| dec.eigenvalues[j].total_cmp(&dec.eigenvalues[i]));
    let values = order.iter().map(|&i| dec.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| dec.eigenvectors[(r, order[c])]);
    Eigen { values, vectors }
}

/// Thin QR decomposition with `R` carrying a nonnegative real diagonal.
#[derive(Debug, Clone)]
pub struct Qr {
    pub q: CMatrix,
    pub r: CMatrix,
}

pub fn qrd(a: &CMatrix) -> Result<Qr> {
    ensure_finite(a, "qrd")?;
    let (rows, cols) = a.shape();
    if rows < cols || cols == 0 {
        return Err(Error::invalid(format!(
            "qrd: need rows >= cols >= 1, got {rows}x{cols}"
        )));
    }
    let dec = a.clone().qr();
    let mut q = dec.q();
    let mut r = dec.r();
    for k in 0..cols {
        let d = r[(k, k)];
        let mag = d.norm();
        if mag > 0.0 {
            let phase = d / mag;
            r.row_mut(k).iter_mut().for_each(|z| *z *= phase.conj());
            q.column_mut(k).iter_mut().for_each(|z| *z *= phase);
            r[(k, k)] = re(mag);
        }
    }
    let largest = (0..cols).map(|k| r[(k, k)].re).fold(0.0, f64::max);
    let threshold = 1e-12 * largest.max(f64::MIN_POSITIVE);
    let rank = (0..cols).filter(|&k| r[(k, k)].re > threshold).count();
    if rank < cols {
        return Err(Error::RankDeficient { rank, expected: cols });
    }
    Ok(Qr { q, r })
}

/// `(A + ridge I)^{-1/2}` for Hermitian PSD `A`.
pub fn inv_sqrt_psd(a: &CMatrix, ridge: f64) -> Result<CMatrix> {
    let eig = hermitian_eig(a)?;
    let min = eig.values.last().copied().unwrap_or(0.0) + ridge;
    if min < Tolerances::DEFAULT.singular {
        return Err(Error::Singular { min_eigenvalue: min });
    }
    let scales: Vec<f64> = eig.values.iter().map(|&l| 1.0 / (l + ridge).sqrt()).collect();
    Ok(scaled_projector(&eig.vectors, &scales))
}

/// `(A + ridge I)^{1/2}` for Hermitian PSD `A`; negative rounding noise is clipped.
pub fn sqrt_psd(a: &CMatrix, ridge: f64) -> Result<CMatrix> {
    let eig = hermitian_eig(a)?;
    let scales: Vec<f64> = eig.values.iter().map(|&l| (l + ridge).max(0.0).sqrt()).collect();
    Ok(scaled_projector(&eig.vectors, &scales))
}

/// `U diag(d) U^H`.
pub fn scaled_projector(u: &CMatrix, d: &[f64]) -> CMatrix {
    let mut ud = u.clone();
    for (k, &s) in d.iter().enumerate() {
        ud.column_mut(k).iter_mut().for_each(|z| *z *= s);
    }
    ud * u.adjoint()
}

/// True iff `A` is Hermitian and has no eigenvalue below `-tol`, both measured
/// relative to `max(1, |A|_F)`.
pub fn is_psd(a: &CMatrix, tol: f64) -> bool {
    if !a.is_square() || !is_finite(a) {
        return false;
    }
    let scale = frobenius_sq(a).sqrt().max(1.0);
    let skew = frobenius_sq(&(a - a.adjoint())).sqrt() * 0.5;
    if skew > tol * scale {
        return false;
    }
    let eig = hermitian_eig_unchecked(&hermitian_part(a), a.nrows());
    eig.values.last().is_none_or(|&l| l >= -tol * scale)
}

/// `log2 det(A)` for Hermitian positive-definite `A`, via Cholesky.
pub fn log2_det_hpd(a: &CMatrix) -> Result<f64> {
    let n = a.nrows();
    let chol = hermitian_part(a).cholesky().ok_or(Error::Singular {
        min_eigenvalue: f64::NAN,
    })?;
    let l = chol.l_dirty();
    Ok((0..n).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0 / std::f64::consts::LN_2)
}

/// Inverse of a square matrix through its QR factors; errors when singular.
pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .try_inverse()
        .filter(is_finite)
        .ok_or(Error::Singular { min_eigenvalue: 0.0 })
}

/// Column `k` as an owned vector.
pub fn column(a: &CMatrix, k: usize) -> CVector {
    a.column(k).into_owned()
}

/// Vertical stack `[top; bottom]`.
pub fn vstack(blocks: &[&CMatrix]) -> CMatrix {
    let cols = blocks[0].ncols();
    assert!(blocks.iter().all(|b| b.ncols() == cols), "vstack: column mismatch");
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        out.view_mut((offset, 0), b.shape()).copy_from(*b);
        offset += b.nrows();
    }
    out
}
