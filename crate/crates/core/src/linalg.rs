//! Dense symmetric / SPD kernels shared by all samplers.
//!
//! Matrices are small (p up to ~100) and stored densely in `nalgebra::DMatrix`.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};

use crate::error::{Error, Result};

/// Symmetric positive-definite matrix. Construction verifies exact symmetry and
/// runs a Cholesky factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    inner: DMatrix<f64>,
}

impl SpdMatrix {
    /// Wraps `m` after mirroring its lower triangle into the upper one and
    /// checking positive definiteness.
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        mirror_lower(&mut m);
        cholesky(&m)?;
        Ok(SpdMatrix { inner: m })
    }

    pub fn identity(p: usize) -> Self {
        SpdMatrix {
            inner: DMatrix::identity(p, p),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn cholesky(&self) -> Result<DMatrix<f64>> {
        cholesky(&self.inner)
    }

    pub fn log_det(&self) -> Result<f64> {
        log_det(&self.inner)
    }

    pub fn inverse(&self) -> Result<SpdMatrix> {
        spd_inverse(&self.inner).map(|inner| SpdMatrix { inner })
    }
}

/// Copies the lower triangle into the upper triangle.
pub fn mirror_lower(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in 0..i {
            m[(j, i)] = m[(i, j)];
        }
    }
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m.is_square() && (0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = m`. Only the lower
/// triangle of `m` is read.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = m.nrows();
    if m.ncols() != p {
        return Err(Error::Dimension(format!(
            "cholesky needs a square matrix, got {}x{}",
            p,
            m.ncols()
        )));
    }
    let mut l = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let mut diag = m[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..p {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L x = b` in place for lower-triangular `L`.
pub fn forward_substitute(l: &DMatrix<f64>, b: &mut [f64]) {
    let p = l.nrows();
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular `L`.
pub fn back_substitute_transpose(l: &DMatrix<f64>, b: &mut [f64]) {
    let p = l.nrows();
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in (i + 1)..p {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `m x = b` given the Cholesky factor of `m`.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    forward_substitute(l, &mut x);
    back_substitute_transpose(l, &mut x);
    x
}

pub fn log_det(m: &DMatrix<f64>) -> Result<f64> {
    let l = cholesky(m)?;
    Ok(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Inverse of an SPD matrix through its Cholesky factor; the result is exactly
/// symmetric.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = cholesky(m)?;
    Ok(inverse_from_cholesky(&l))
}

pub fn inverse_from_cholesky(l: &DMatrix<f64>) -> DMatrix<f64> {
    let p = l.nrows();
    let mut inv = DMatrix::<f64>::zeros(p, p);
    let mut col = vec![0.0; p];
    for j in 0..p {
        col.iter_mut().for_each(|c| *c = 0.0);
        col[j] = 1.0;
        forward_substitute(l, &mut col);
        back_substitute_transpose(l, &mut col);
        for i in j..p {
            inv[(i, j)] = col[i];
        }
    }
    mirror_lower(&mut inv);
    inv
}

/// Smallest and largest eigenvalue of a symmetric matrix (full symmetric
/// eigensolve).
pub fn extremal_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (f64::NAN, f64::NAN);
    }
    let eig = SymmetricEigen::new(m.clone());
    eig.eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Schur decomposition of `Ω` around a vertex pair `e = (i, j)`:
/// `Ω_ee = A + B` with `B = Ω_{e,R} Ω_{R,R}⁻¹ Ω_{R,e}` and
/// `A = L diag(d1, d2) Lᵀ`, `L = [[1, 0], [l21, 1]]`.
///
/// Position 1 of the 2x2 blocks refers to `i`, position 2 to `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDecomposition {
    pub i: usize,
    pub j: usize,
    pub a: Matrix2<f64>,
    pub b: Matrix2<f64>,
    pub d1: f64,
    pub d2: f64,
    pub l21: f64,
}

impl BlockDecomposition {
    /// Builds the LDLᵀ factorization of `a`.
    pub fn from_parts(i: usize, j: usize, a: Matrix2<f64>, b: Matrix2<f64>) -> Result<Self> {
        let d1 = a[(0, 0)];
        if !(d1 > 0.0) {
            return Err(Error::NotPositiveDefinite {
                pivot: 0,
                value: d1,
            });
        }
        let l21 = a[(1, 0)] / d1;
        let d2 = a[(1, 1)] - l21 * a[(1, 0)];
        if !(d2 > 0.0) {
            return Err(Error::NotPositiveDefinite {
                pivot: 1,
                value: d2,
            });
        }
        Ok(BlockDecomposition {
            i,
            j,
            a,
            b,
            d1,
            d2,
            l21,
        })
    }

    /// `Ω_ee` entries `(ω_ii, ω_ij, ω_jj)` recomposed from `(d1, d2, l21)` and `B`.
    pub fn omega_entries(b: &Matrix2<f64>, d1: f64, d2: f64, l21: f64) -> (f64, f64, f64) {
        (
            d1 + b[(0, 0)],
            d1 * l21 + b[(1, 0)],
            d1 * l21 * l21 + d2 + b[(1, 1)],
        )
    }
}

/// Reference Schur block through a fresh Cholesky solve of `Ω_{R,R}`.
pub fn schur_block(omega: &DMatrix<f64>, i: usize, j: usize) -> Result<BlockDecomposition> {
    let p = omega.nrows();
    if i == j || i >= p || j >= p {
        return Err(Error::Domain(format!(
            "invalid vertex pair ({i}, {j}) for dimension {p}"
        )));
    }
    let rest: Vec<usize> = (0..p).filter(|&k| k != i && k != j).collect();
    let omega_ee = Matrix2::new(omega[(i, i)], omega[(i, j)], omega[(j, i)], omega[(j, j)]);
    let mut b = Matrix2::zeros();
    if !rest.is_empty() {
        let r = rest.len();
        let sub = DMatrix::from_fn(r, r, |a, c| omega[(rest[a], rest[c])]);
        let l = cholesky(&sub)?;
        let mut zi: Vec<f64> = rest.iter().map(|&k| omega[(k, i)]).collect();
        let mut zj: Vec<f64> = rest.iter().map(|&k| omega[(k, j)]).collect();
        forward_substitute(&l, &mut zi);
        forward_substitute(&l, &mut zj);
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let b11 = dot(&zi, &zi);
        let b21 = dot(&zi, &zj);
        let b22 = dot(&zj, &zj);
        b = Matrix2::new(b11, b21, b21, b22);
    }
    BlockDecomposition::from_parts(i, j, omega_ee - b, b)
}

/// Frobenius norm of `a - b` divided by the Frobenius norm of `b`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(l, DMatrix::identity(3, 3));
    }

    #[test]
    fn cholesky_two_by_two() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 5.0]);
        let l = cholesky(&m).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]);
        assert_eq!(l, expected);
        assert_relative_eq!(&l * l.transpose(), m, epsilon = 1e-14);
    }

    #[test]
    fn cholesky_indefinite_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            cholesky(&m),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
        assert!(SpdMatrix::new(m).is_err());
    }

    #[test]
    fn schur_identity() {
        let bd = schur_block(&DMatrix::identity(3, 3), 0, 1).unwrap();
        assert_eq!(bd.b, Matrix2::zeros());
        assert_eq!(bd.a, Matrix2::identity());
        assert_eq!((bd.d1, bd.d2, bd.l21), (1.0, 1.0, 0.0));
    }

    #[test]
    fn schur_empty_complement() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 2.0]);
        let bd = schur_block(&m, 0, 1).unwrap();
        assert_eq!(bd.b, Matrix2::zeros());
        assert_eq!(bd.a, Matrix2::new(3.0, -1.0, -1.0, 2.0));
    }

    #[test]
    fn schur_tridiagonal() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
        let bd = schur_block(&m, 0, 1).unwrap();
        assert_relative_eq!(bd.b, Matrix2::new(0.0, 0.0, 0.0, 0.5), epsilon = 1e-15);
        assert_relative_eq!(bd.a, Matrix2::new(2.0, 1.0, 1.0, 1.5), epsilon = 1e-15);
        let (wii, wij, wjj) = BlockDecomposition::omega_entries(&bd.b, bd.d1, bd.d2, bd.l21);
        assert_relative_eq!(wii, 2.0, epsilon = 1e-15);
        assert_relative_eq!(wij, 1.0, epsilon = 1e-15);
        assert_relative_eq!(wjj, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn eigen_examples() {
        assert_eq!(extremal_eigenvalues(&DMatrix::identity(4, 4)), (1.0, 1.0));
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (lo, hi) = extremal_eigenvalues(&w);
        assert_relative_eq!(lo, -1.0, epsilon = 1e-12);
        assert_relative_eq!(hi, 1.0, epsilon = 1e-12);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 5.0]));
        assert_eq!(extremal_eigenvalues(&d), (2.0, 5.0));
    }

    #[test]
    fn log_det_examples() {
        assert_eq!(log_det(&DMatrix::identity(5, 5)).unwrap(), 0.0);
        let two = DMatrix::identity(2, 2) * 2.0;
        assert_relative_eq!(log_det(&two).unwrap(), 2.0 * 2f64.ln(), epsilon = 1e-14);
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 5.0]);
        assert_relative_eq!(log_det(&m).unwrap(), 16f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn inverse_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let inv = spd_inverse(&m).unwrap();
        assert!(is_symmetric(&inv));
        assert_relative_eq!(&m * inv, DMatrix::identity(3, 3), epsilon = 1e-13);
    }
}
