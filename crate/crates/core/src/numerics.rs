//! Dense complex linear-algebra primitives used by the solver.
//!
//! Matrices are `nalgebra` dense matrices over `Complex<f64>`. This module
//! adds the handful of operations the beamforming solver needs on top of
//! them: a checked Hermitian eigendecomposition, the largest eigenvalue,
//! column-stacking `vec`/`unvec`, and the Hadamard product.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
pub use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative tolerance on `‖A − Aᴴ‖_F / ‖A‖_F` accepted as "Hermitian".
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Full eigendecomposition `A = U diag(λ) Uᴴ` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Real eigenvalues, sorted ascending.
    pub eigenvalues: DVector<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `U diag(λ) Uᴴ`.
    pub fn reconstruct(&self) -> CMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::from(self.eigenvalues[j]);
        }
        scaled * u.adjoint()
    }
}

pub fn frobenius_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest entry magnitude, `max_ij |A_ij|`.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn all_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `‖A − Aᴴ‖_F`.
pub fn hermitian_residual(a: &CMatrix) -> f64 {
    frobenius_sq(&(a - a.adjoint())).sqrt()
}

fn check_hermitian(a: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !all_finite(a) {
        return Err(Error::Contract("matrix has non-finite entries".into()));
    }
    let norm = frobenius_sq(a).sqrt();
    let resid = hermitian_residual(a);
    if resid > HERMITIAN_TOL * norm {
        return Err(Error::Contract(format!(
            "matrix is not Hermitian: ‖A − Aᴴ‖_F = {resid:e}, ‖A‖_F = {norm:e}"
        )));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized as
/// `(A + Aᴴ)/2` before factoring.
pub fn hermitian_eig(a: &CMatrix) -> Result<HermitianEig> {
    check_hermitian(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEig {
            eigenvalues: DVector::zeros(0),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest algebraic eigenvalue of a Hermitian matrix.
pub fn max_eigenvalue(a: &CMatrix) -> Result<f64> {
    if a.nrows() == 0 {
        check_hermitian(a)?;
        return Ok(0.0);
    }
    check_hermitian(a)?;
    let sym = (a + a.adjoint()).scale(0.5);
    Ok(sym.symmetric_eigenvalues().max())
}

/// Largest eigenvalue of a real symmetric matrix.
pub fn max_eigenvalue_real(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let sym = (a + a.transpose()).scale(0.5);
    Ok(SymmetricEigen::new(sym).eigenvalues.max())
}

/// Column-stacking vectorization.
pub fn vec(a: &CMatrix) -> CVector {
    // nalgebra stores matrices column-major, so the storage order is
    // already the column stack.
    CVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "cannot reshape a vector of length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Element-wise product `A ⊙ B`.
pub fn hadamard(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "hadamard of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.component_mul(b))
}

/// `exp(j·arg(z))` with `arg(0) := 0`.
pub fn unit_phase(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 || !r.is_finite() {
        Complex64::new(1.0, 0.0)
    } else {
        z / r
    }
}

/// `diag(φ)`.
pub fn diag(v: &CVector) -> CMatrix {
    CMatrix::from_diagonal(v)
}

/// `Re Tr(Aᴴ B)`, the real inner product on complex matrices.
pub fn re_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}
