//! Dense complex Hermitian linear algebra and matrix functional calculus.
//!
//! Everything downstream (spectral calculus for `log ρ`, `e^{-At}`, PSD
//! certificates for Γ₂ − λΓ blocks, Choi operators, Gram matrices) reduces to
//! the handful of primitives in this module. Double precision throughout; the
//! eigensolver is nalgebra's Hermitian decomposition wrapped behind our own
//! matrix type and residual checks.

use crate::error::{Error, Result};
use crate::tol::Tolerances;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        CMatrix {
            rows,
            cols,
            data: data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn diag(entries: &[Complex64]) -> Self {
        let n = entries.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn has_nan(&self) -> bool {
        self.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Transpose without conjugation (realizes the opposite algebra).
    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matrix product shape mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Kronecker product.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Unnormalized matrix trace.
    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Hermiticity residual `max |H_ij - conj(H_ji)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(H + H*)/2`.
    pub fn symmetrized(&self) -> CMatrix {
        let adj = self.adjoint();
        self.add(&adj).scale(Complex64::new(0.5, 0.0))
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Spectral data of a Hermitian matrix: ascending real eigenvalues and a
/// unitary matrix of column eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    /// Rebuild `U diag(f(λ)) U*`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.eigenvalues.len();
        let u = &self.eigenvectors;
        let mut out = CMatrix::zeros(n, n);
        for k in 0..n {
            let fv = f(self.eigenvalues[k]);
            if fv == 0.0 {
                continue;
            }
            for i in 0..n {
                let uik = u[(i, k)] * fv;
                for j in 0..n {
                    out[(i, j)] += uik * u[(j, k)].conj();
                }
            }
        }
        out
    }

    /// Reconstruct the original matrix.
    pub fn reconstruct(&self) -> CMatrix {
        self.apply(|x| x)
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input is symmetrized before decomposing; inputs whose hermiticity
/// residual exceeds `tol.herm` relative to the matrix scale are rejected.
/// Eigenvalues come back ascending and the reconstruction residual is
/// verified against `tol.recon · (1 + ‖H‖)`.
pub fn hermitian_eig(h: &CMatrix, tol: &Tolerances) -> Result<HermitianEig> {
    if !h.is_square() {
        return Err(Error::Dimension(format!(
            "hermitian_eig needs a square matrix, got {}x{}",
            h.rows, h.cols
        )));
    }
    if h.has_nan() {
        return Err(Error::InvalidInput("matrix contains NaN/Inf".into()));
    }
    let scale = 1.0 + h.max_abs();
    let res = h.hermiticity_residual();
    if res > tol.herm * scale {
        return Err(Error::NotHermitian(res));
    }
    let sym = h.symmetrized();
    let na = sym.to_nalgebra();
    let eig = nalgebra::SymmetricEigen::try_new(na, f64::EPSILON, 0).ok_or(Error::EigFailed)?;

    let n = h.rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, col)] = eig.eigenvectors[(i, k)];
        }
    }
    let out = HermitianEig {
        eigenvalues,
        eigenvectors,
    };
    let recon_res = operator_norm_bound(&out.reconstruct().sub(&sym));
    if recon_res > tol.recon * (1.0 + operator_norm_bound(&sym)) {
        return Err(Error::Internal(format!(
            "eigendecomposition reconstruction residual {recon_res:.3e} too large"
        )));
    }
    Ok(out)
}

/// Frobenius norm as a cheap upper bound on the operator norm for residual checks.
fn operator_norm_bound(m: &CMatrix) -> f64 {
    m.frobenius_norm()
}

/// Apply a real scalar function to a Hermitian matrix by spectral calculus.
///
/// Fails with a domain error carrying the offending eigenvalue when `f`
/// returns a non-finite value on the spectrum.
pub fn matrix_func(h: &CMatrix, f: impl Fn(f64) -> f64, func_name: &'static str, tol: &Tolerances) -> Result<CMatrix> {
    let eig = hermitian_eig(h, tol)?;
    for &ev in &eig.eigenvalues {
        if !f(ev).is_finite() {
            return Err(Error::FunctionDomain {
                func: func_name,
                value: ev,
            });
        }
    }
    Ok(eig.apply(f))
}

/// Smallest eigenvalue of a Hermitian matrix. The caller interprets
/// `H ⪰ 0` as `psd_min_eig(H) ≥ -tol.psd`.
pub fn psd_min_eig(h: &CMatrix, tol: &Tolerances) -> Result<f64> {
    let eig = hermitian_eig(h, tol)?;
    Ok(eig.eigenvalues.first().copied().unwrap_or(0.0))
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> Result<f64> {
    if m.has_nan() {
        return Err(Error::InvalidInput("matrix contains NaN/Inf".into()));
    }
    if m.rows == 0 || m.cols == 0 {
        return Ok(0.0);
    }
    // singular values via the Hermitian M*M
    let mm = m.adjoint().mul(m);
    let eig = hermitian_eig(&mm, &Tolerances::default())?;
    let top = eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    Ok(top.sqrt())
}

/// Logarithmic mean of two positive numbers:
/// `∫₀¹ p^{1-s} q^s ds = (p - q)/(log p - log q)`, with the limit value `p`
/// when the relative difference falls below `tol.log_mean_switch`.
pub fn log_mean(p: f64, q: f64, tol: &Tolerances) -> Result<f64> {
    if p <= 0.0 || q <= 0.0 || !p.is_finite() || !q.is_finite() {
        return Err(Error::Domain(format!(
            "logarithmic mean needs strictly positive entries, got ({p}, {q})"
        )));
    }
    let diff = p - q;
    if diff.abs() <= tol.log_mean_switch * p.max(q) {
        return Ok(0.5 * (p + q));
    }
    // log(p) - log(q) via log1p of the relative difference for stability
    let denom = (diff / q).ln_1p();
    Ok(diff / denom)
}

/// Matrix of logarithmic means `(i, j) ↦ ∫₀¹ p_i^{1-s} q_j^s ds`.
pub fn log_mean_weights(p: &[f64], q: &[f64], tol: &Tolerances) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(p.len());
    for &pi in p {
        let mut row = Vec::with_capacity(q.len());
        for &qj in q {
            row.push(log_mean(pi, qj, tol)?);
        }
        out.push(row);
    }
    Ok(out)
}
