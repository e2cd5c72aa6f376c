//! Small dense complex linear algebra helpers on top of `nalgebra`.
//!
//! Every matrix in this crate is at most a handful of levels wide, so all
//! routines favour clarity over blocking or reuse of workspaces.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `e^{i x}`.
#[inline]
pub fn cis(x: f64) -> Complex64 {
    let (s, c) = x.sin_cos();
    Complex64::new(c, s)
}

pub fn zeros(n: usize) -> CMatrix {
    CMatrix::zeros(n, n)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(c)
}

/// Largest entrywise modulus of `m - m^†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.nrows() {
        for k in j..m.ncols() {
            worst = worst.max((m[(j, k)] - m[(k, j)].conj()).norm());
        }
    }
    worst
}

/// Largest entrywise modulus of `u^† u - I`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    let n = u.nrows();
    (prod - identity(n)).iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Spectral (operator 2-) norm.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0f64, |acc, &s| acc.max(s))
}

/// Spectral norm of a Hermitian matrix via its eigenvalues.
pub fn hermitian_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().fold(0.0f64, |acc, &e| acc.max(e.abs()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `exp(-i * tau * H)` for Hermitian `H`, through its eigendecomposition.
///
/// The Hermitian part `(H + H^†)/2` is what gets diagonalised, so a tiny
/// antihermitian defect cannot break unitarity of the result.
pub fn expm_hermitian(h: &CMatrix, tau: f64) -> CMatrix {
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let v = &eig.eigenvectors;
    let phases = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&e| cis(-tau * e)));
    let mut scaled = v.clone();
    for (mut col, ph) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= *ph;
    }
    scaled * v.adjoint()
}

/// `exp(i X)` for Hermitian `X`.
pub fn expi(x: &CMatrix) -> CMatrix {
    expm_hermitian(x, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = zeros(n);
        for j in 0..n {
            m[(j, j)] = c(rng.gen_range(-2.0..2.0));
            for k in j + 1..n {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[(j, k)] = z;
                m[(k, j)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn expm_is_unitary_and_matches_series() {
        let h = random_hermitian(4, 3);
        let u = expm_hermitian(&h, 0.3);
        assert!(unitarity_defect(&u) < 1e-13);

        // Taylor series of exp(-i 0.3 H) as an independent route.
        let a = h.map(|z| z * Complex64::new(0.0, -0.3));
        let mut term = identity(4);
        let mut sum = identity(4);
        for k in 1..40 {
            term = &term * &a / c(k as f64);
            sum += &term;
        }
        assert!(max_abs_diff(&u, &sum) < 1e-13);
    }

    #[test]
    fn norms_agree_on_hermitian_input() {
        let h = random_hermitian(5, 11);
        assert!((op_norm(&h) - hermitian_norm(&h)).abs() < 1e-12);
    }
}
