//! Small dense complex linear algebra used throughout the solvers.
//!
//! Everything here works on `nalgebra` dynamic matrices over `Complex<f64>`.
//! Hermitian positive-definite systems go through a Cholesky factorization;
//! nothing in the solver paths forms an explicit inverse.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Condition number above which a real power-allocation system is rejected.
pub const MAX_CONDITION: f64 = 1e12;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// `m += w * x x^H`
pub fn add_outer(m: &mut CMatrix, x: &CVector, w: f64) {
    let n = x.len();
    for j in 0..n {
        let xj = x[j].conj() * w;
        for i in 0..n {
            m[(i, j)] += x[i] * xj;
        }
    }
}

/// `x^H y`
pub fn inner(x: &CVector, y: &CVector) -> C64 {
    x.dotc(y)
}

/// Real part of `x^H A x` for Hermitian `A`.
pub fn quad_form(a: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(a * x)).re
}

pub fn norm_sqr(x: &CVector) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn normalize(x: &CVector) -> Option<CVector> {
    let n = x.norm();
    if n > 0.0 && n.is_finite() {
        Some(x.unscale(n))
    } else {
        None
    }
}

/// Cholesky factorization of a Hermitian positive-definite matrix.
pub fn cholesky(a: CMatrix) -> Option<Cholesky<C64, Dyn>> {
    Cholesky::new(a)
}

/// Solves `A x = b` for Hermitian positive-definite `A`.
pub fn hpd_solve(a: CMatrix, b: &CVector) -> Option<CVector> {
    let chol = cholesky(a)?;
    Some(chol.solve(b))
}

/// Natural log-determinant of a Hermitian positive-definite matrix.
pub fn hpd_logdet(a: CMatrix) -> Option<f64> {
    let chol = cholesky(a)?;
    let l = chol.l_dirty();
    Some((0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let h = hermitian_part(a);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigen-decomposition of a Hermitian matrix with eigenpairs in ascending order.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, Vec<CVector>) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (values, vectors)
}

/// Spectral norm of a Hermitian matrix (largest absolute eigenvalue).
pub fn hermitian_norm(a: &CMatrix) -> f64 {
    hermitian_eigenvalues(a)
        .into_iter()
        .fold(0.0, |acc, e| acc.max(e.abs()))
}

fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).unscale(2.0)
}

/// Singular values (descending) and the matching right singular vectors.
pub fn right_singular(a: &CMatrix) -> (Vec<f64>, Vec<CVector>) {
    // Right singular vectors of A are the eigenvectors of A^H A.
    let gram = a.adjoint() * a;
    let (values, vectors) = hermitian_eigen(&gram);
    values
        .into_iter()
        .zip(vectors)
        .rev()
        .map(|(v, x)| (v.max(0.0).sqrt(), x))
        .unzip()
}

/// Left singular vectors of `A` (descending singular value order).
pub fn left_singular_vectors(a: &CMatrix) -> Vec<CVector> {
    let gram = a * a.adjoint();
    let (_, vectors) = hermitian_eigen(&gram);
    vectors.into_iter().rev().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum RealSolveError {
    Singular,
    IllConditioned(f64),
}

/// Solves a square real system with an explicit conditioning check.
pub fn solve_real(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, RealSolveError> {
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(RealSolveError::Singular);
    }
    let sv = a.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin == 0.0 || smax == 0.0 {
        return Err(RealSolveError::Singular);
    }
    let cond = smax / smin;
    if cond > MAX_CONDITION {
        return Err(RealSolveError::IllConditioned(cond));
    }
    a.lu().solve(b).ok_or(RealSolveError::Singular)
}
