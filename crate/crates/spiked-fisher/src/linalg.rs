//! Dense symmetric linear algebra behind the sampling harness.
//!
//! Wraps nalgebra's factorizations with the error contract of this crate and
//! the symmetrized product forms the harness needs: every spectrum handed out
//! is real, sorted descending, and comes from an explicitly symmetrized
//! matrix. A failed Cholesky stands in for the condition estimate; with valid
//! dimensions it only fires on numerically rank-deficient draws.

use crate::error::{Error, Result};
use nalgebra::{Complex, DMatrix};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex<f64>>;

/// Eigenvalues of the symmetric part of `m`, descending.
pub fn sym_eigenvalues_desc(m: &RMat) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Config(format!(
            "eigenvalue input must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    if ev.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalRank("non-finite eigenvalue".into()));
    }
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Eigenvalues of the Hermitian part of `m`, descending.
///
/// Realified: the Hermitian H = A + iB maps to the symmetric 2x2 block matrix
/// [[A, -B], [B, A]] whose spectrum is that of H with every eigenvalue
/// doubled, so every second sorted value is returned.
pub fn herm_eigenvalues_desc(m: &CMat) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Config(format!(
            "eigenvalue input must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let p = m.nrows();
    let herm = {
        let mut h = m.clone();
        for i in 0..p {
            for j in 0..p {
                h[(i, j)] = (m[(i, j)] + m[(j, i)].conj()) * Complex::new(0.5, 0.0);
            }
        }
        h
    };
    let mut big = RMat::zeros(2 * p, 2 * p);
    for i in 0..p {
        for j in 0..p {
            let z = herm[(i, j)];
            big[(i, j)] = z.re;
            big[(i + p, j + p)] = z.re;
            big[(i, j + p)] = -z.im;
            big[(i + p, j)] = z.im;
        }
    }
    let all = sym_eigenvalues_desc(&big)?;
    Ok(all.into_iter().step_by(2).collect())
}

/// Two-sided whitening L^-1 * sym * L^-T where `spd` = L L^T.
///
/// The result has the spectrum of spd^-1 * sym for symmetric `sym`.
pub fn whiten(spd: &RMat, sym: &RMat) -> Result<RMat> {
    let chol = nalgebra::Cholesky::new(spd.clone())
        .ok_or_else(|| Error::NumericalRank("Cholesky failed: matrix not positive definite".into()))?;
    let l = chol.l();
    let half = l
        .solve_lower_triangular(sym)
        .ok_or_else(|| Error::NumericalRank("singular triangular factor".into()))?;
    let full = l
        .solve_lower_triangular(&half.transpose())
        .ok_or_else(|| Error::NumericalRank("singular triangular factor".into()))?;
    Ok(full)
}

/// Complex counterpart of [`whiten`]: L^-1 * herm * L^-* for `spd` = L L^*.
pub fn whiten_complex(spd: &CMat, herm: &CMat) -> Result<CMat> {
    let chol = nalgebra::Cholesky::new(spd.clone())
        .ok_or_else(|| Error::NumericalRank("Cholesky failed: matrix not positive definite".into()))?;
    let l = chol.l();
    let half = l
        .solve_lower_triangular(herm)
        .ok_or_else(|| Error::NumericalRank("singular triangular factor".into()))?;
    let full = l
        .solve_lower_triangular(&half.adjoint())
        .ok_or_else(|| Error::NumericalRank("singular triangular factor".into()))?;
    Ok(full)
}

/// L^-1 * b for `spd` = L L^T; the Gram matrix of the result has the spectrum
/// of b^T * spd^-1 * b.
pub fn half_whiten(spd: &RMat, b: &RMat) -> Result<RMat> {
    let chol = nalgebra::Cholesky::new(spd.clone())
        .ok_or_else(|| Error::NumericalRank("Cholesky failed: matrix not positive definite".into()))?;
    chol.l()
        .solve_lower_triangular(b)
        .ok_or_else(|| Error::NumericalRank("singular triangular factor".into()))
}

/// Complex counterpart of [`half_whiten`].
pub fn half_whiten_complex(spd: &CMat, b: &CMat) -> Result<CMat> {
    let chol = nalgebra::Cholesky::new(spd.clone())
        .ok_or_else(|| Error::NumericalRank("Cholesky failed: matrix not positive definite".into()))?;
    chol.l()
        .solve_lower_triangular(b)
        .ok_or_else(|| Error::NumericalRank("singular triangular factor".into()))
}
