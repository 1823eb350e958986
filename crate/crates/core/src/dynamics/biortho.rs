//! Biorthogonal eigensystems of non-Hermitian matrices.
//!
//! Right eigenvectors come from back-substitution on the complex Schur form.
//! Left eigenvectors are the rows of the inverse right-eigenvector matrix, so
//! `⟨v^L(j), v^R(k)⟩ = δ_jk` holds by construction, degenerate clusters
//! included.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Relative size below which a Schur denominator counts as a degeneracy.
const DEGENERATE_REL: f64 = 1e-12;
/// Reciprocal condition of the normalized eigenvector matrix below which
/// the input is treated as defective.
const DEFECTIVE_RCOND: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct BiorthoDecomp {
    pub eigenvalues: Vec<Complex64>,
    /// Columns are unit-norm right eigenvectors.
    pub right: DMatrix<Complex64>,
    /// Columns are left eigenvectors, `left.adjoint() * right = I`.
    pub left: DMatrix<Complex64>,
}

impl BiorthoDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ_k λ_k v^R(k) v^L(k)†`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.eigenvalues.clone()));
        &self.right * lam * self.left.adjoint()
    }

    /// Largest `|⟨v^L(j), v^R(k)⟩ - δ_jk|`.
    pub fn biorthogonality_error(&self) -> f64 {
        let g = self.left.adjoint() * &self.right;
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                let want = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((g[(j, k)] - want).norm());
            }
        }
        worst
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max)
    }
}

pub fn biortho_decompose(matrix: &DMatrix<Complex64>) -> Result<BiorthoDecomp> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return invalid("eigendecomposition needs a non-empty square matrix");
    }
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let scale = matrix.norm().max(f64::MIN_POSITIVE);
    let schur = Schur::try_new(matrix.clone(), 1e-15 * scale, 10_000)
        .ok_or_else(|| Error::Accuracy("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let eigenvalues: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();

    let smin = DEGENERATE_REL * scale;
    let mut x = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        x[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut num = Complex64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                num += t[(i, j)] * x[(j, k)];
            }
            let den = t[(i, i)] - t[(k, k)];
            x[(i, k)] = if den.norm() > smin {
                -num / den
            } else if num.norm() <= smin {
                // decoupled degenerate pair
                Complex64::new(0.0, 0.0)
            } else {
                -num / Complex64::new(smin, 0.0)
            };
        }
    }
    let mut right = q * x;
    for k in 0..n {
        let nrm = right.column(k).norm();
        right.column_mut(k).unscale_mut(nrm);
    }

    let sv = right.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smallest = sv.min();
    if !(smallest > DEFECTIVE_RCOND * smax) {
        return Err(Error::Defective { clustered: clustered_eigenvalues(&eigenvalues, scale) });
    }
    let inv = right
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Defective { clustered: clustered_eigenvalues(&eigenvalues, scale) })?;
    let left = inv.adjoint();
    Ok(BiorthoDecomp { eigenvalues, right, left })
}

fn clustered_eigenvalues(ev: &[Complex64], scale: f64) -> Vec<(f64, f64)> {
    let tol = 1e-6 * scale;
    let mut out = Vec::new();
    for (i, a) in ev.iter().enumerate() {
        if ev.iter().enumerate().any(|(j, b)| j != i && (a - b).norm() < tol) {
            out.push((a.re, a.im));
        }
    }
    if out.is_empty() {
        out = ev.iter().map(|z| (z.re, z.im)).collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn jordan_block_is_defective() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        match biortho_decompose(&m) {
            Err(Error::Defective { clustered }) => {
                assert_eq!(clustered.len(), 2);
                assert!(clustered.iter().all(|&(re, im)| (re - 1.0).abs() < 1e-9 && im.abs() < 1e-9));
            }
            other => panic!("expected defective error, got {other:?}"),
        }
    }

    #[test]
    fn hermitian_has_real_spectrum_and_equal_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(8, &mut rng);
        let h = &a + a.adjoint();
        let d = biortho_decompose(&h).unwrap();
        for (k, l) in d.eigenvalues.iter().enumerate() {
            assert!(l.im.abs() < 1e-12);
            let overlap = (d.left.column(k).adjoint() * d.right.column(k))[(0, 0)];
            assert!((overlap - 1.0).norm() < 1e-10);
            assert!((d.left.column(k).norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_matrix(20, &mut rng);
            let d = biortho_decompose(&m).unwrap();
            assert!(d.biorthogonality_error() < 1e-10);
            let res = (d.reconstruct() - &m).norm() / m.norm();
            assert!(res < 1e-10, "residual {res}");
        }
    }

    #[test]
    fn exact_degeneracy_diagonalizable() {
        // 3-fold degenerate shell plus one other level, rotated by a unitary
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(4, &mut rng);
        let u = (a.clone() + a.adjoint()).symmetric_eigen().eigenvectors;
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(0.5, -1.0),
            c(0.5, -1.0),
            c(0.5, -1.0),
            c(2.0, -0.3),
        ]));
        let m = &u * diag * u.adjoint();
        let d = biortho_decompose(&m).unwrap();
        assert!((d.reconstruct() - &m).norm() < 1e-12);
        assert!(d.biorthogonality_error() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(biortho_decompose(&DMatrix::<Complex64>::zeros(2, 3)).is_err());
        let mut m = DMatrix::<Complex64>::identity(2, 2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(biortho_decompose(&m).is_err());
    }
}
