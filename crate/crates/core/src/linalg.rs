//! Small dense complex matrices and a Hermitian eigensolver.
//!
//! Everything in this crate lives in dimensions 2–16, so a hand-rolled
//! row-major matrix plus a cyclic Jacobi diagonalizer beats pulling in a
//! general linear-algebra stack. The Jacobi sweep drives the off-diagonal
//! Frobenius norm below `1e-12` times the matrix scale, which leaves
//! eigenpair residuals far inside the `1e-9 * ||H||` contract used by the
//! spectrum code.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance used when validating Hermitian inputs.
pub const HERMITICITY_TOL: f64 = 1e-9;
/// Tolerance used when validating unitary inputs.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Off-diagonal convergence target of the Jacobi sweep, relative to scale.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    /// Zero matrix of size `n`.
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds an `n x n` matrix from an entry function `(row, col) -> value`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn diagonal(entries: &[Complex64]) -> Self {
        let mut m = CMatrix::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMatrix {
        CMatrix::from_fn(self.n, |r, c| self[(c, r)].conj())
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n, "matrix dimensions must agree");
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self[(r, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.n, v.len());
        (0..self.n)
            .map(|r| (0..self.n).map(|c| self[(r, c)] * v[c]).sum())
            .collect()
    }

    /// Column `c` as a vector.
    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.n).map(|r| self[(r, c)]).collect()
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest deviation from Hermiticity, `max_ij |A_ij - conj(A_ji)|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for r in 0..self.n {
            for c in r..self.n {
                dev = dev.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        dev
    }

    /// Largest deviation of `U^dag U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = self.dagger().mul(self);
        let mut dev: f64 = 0.0;
        for r in 0..self.n {
            for c in 0..self.n {
                let want = if r == c { 1.0 } else { 0.0 };
                dev = dev.max((p[(r, c)] - Complex64::new(want, 0.0)).norm());
            }
        }
        dev
    }

    /// Errors unless the matrix is Hermitian within `tol` (absolute, scaled
    /// by the Frobenius norm for matrices larger than unit scale).
    pub fn require_hermitian(&self, tol: f64) -> Result<()> {
        let scale = self.frobenius_norm().max(1.0);
        let dev = self.hermiticity_deviation();
        if dev > tol * scale {
            return Err(Error::NotHermitian { max_dev: dev });
        }
        Ok(())
    }

    /// Errors unless the matrix is unitary within `tol`.
    pub fn require_unitary(&self, tol: f64) -> Result<()> {
        let dev = self.unitarity_deviation();
        if dev > tol {
            return Err(Error::NotUnitary { max_dev: dev });
        }
        Ok(())
    }

    /// True when every off-diagonal entry is negligible.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        for r in 0..self.n {
            for c in 0..self.n {
                if r != c && self[(r, c)].norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for r in 0..self.n {
            for c in 0..self.n {
                if r != c {
                    s += self[(r, c)].norm_sqr();
                }
            }
        }
        s.sqrt()
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order together with the matching
    /// orthonormal eigenvectors (as matrix columns). The rotation for pivot
    /// `(p, q)` first absorbs the phase of `A_pq` and then applies the real
    /// Jacobi angle, so the update stays exactly unitary.
    pub fn hermitian_eigen(&self) -> Result<HermitianEigen> {
        self.require_hermitian(HERMITICITY_TOL)?;
        let n = self.n;
        let mut a = self.clone();
        let mut v = CMatrix::identity(n);
        let scale = self.frobenius_norm().max(1.0);

        for _sweep in 0..JACOBI_MAX_SWEEPS {
            if a.off_diagonal_norm() <= JACOBI_TOL * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let r = apq.norm();
                    if r <= JACOBI_TOL * scale / (n as f64) {
                        continue;
                    }
                    let phi = apq.arg();
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let theta = 0.5 * (2.0 * r).atan2(app - aqq);
                    let (s, c) = theta.sin_cos();
                    let e_phi = Complex64::from_polar(1.0, phi);
                    // G differs from the identity only in the (p,q) plane:
                    //   G_pp = c*e^{i phi}   G_pq = -s*e^{i phi}
                    //   G_qp = s             G_qq = c
                    let g_pp = e_phi * c;
                    let g_pq = -e_phi * s;
                    let g_qp = Complex64::new(s, 0.0);
                    let g_qq = Complex64::new(c, 0.0);

                    // A <- G^dag A G: columns first, then rows.
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * g_pp + akq * g_qp;
                        a[(k, q)] = akp * g_pq + akq * g_qq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                        a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                    }
                    a[(p, q)] = Complex64::new(0.0, 0.0);
                    a[(q, p)] = Complex64::new(0.0, 0.0);

                    // V <- V G accumulates the eigenvectors.
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * g_pp + vkq * g_qp;
                        v[(k, q)] = vkp * g_pq + vkq * g_qq;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
        let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
        let vectors = CMatrix::from_fn(n, |r, c| v[(r, order[c])]);
        Ok(HermitianEigen { values, vectors })
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.n + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.n + c]
    }
}

/// Result of [`CMatrix::hermitian_eigen`]: ascending eigenvalues and the
/// matching eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Kronecker product `a (x) b`; index `(i_a * dim_b + i_b)`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (na, nb) = (a.dim(), b.dim());
    CMatrix::from_fn(na * nb, |r, c| a[(r / nb, c / nb)] * b[(r % nb, c % nb)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = crate::rng::stream(seed);
        let mut m = CMatrix::zeros(n);
        for r in 0..n {
            m[(r, r)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            for c in (r + 1)..n {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[(r, c)] = z;
                m[(c, r)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn identity_eigen() {
        let eig = CMatrix::identity(16).hermitian_eigen().unwrap();
        for v in &eig.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!(eig.vectors.unitarity_deviation() < 1e-12);
    }

    #[test]
    fn diagonal_eigen_sorted() {
        let entries: Vec<Complex64> = (1..=16).map(|k| Complex64::new(k as f64, 0.0)).collect();
        let eig = CMatrix::diagonal(&entries).hermitian_eigen().unwrap();
        for (i, v) in eig.values.iter().enumerate() {
            assert!((v - (i as f64 + 1.0)).abs() < 1e-14);
            assert!((eig.vectors[(i, i)].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_hermitian_residuals() {
        for seed in 0..8 {
            let h = random_hermitian(16, seed);
            let scale = h.frobenius_norm();
            let eig = h.hermitian_eigen().unwrap();
            assert!(eig.vectors.unitarity_deviation() < 1e-10);
            for k in 0..16 {
                let v = eig.vectors.column(k);
                let hv = h.mul_vec(&v);
                let resid: f64 = hv
                    .iter()
                    .zip(&v)
                    .map(|(hv_i, v_i)| (hv_i - v_i * eig.values[k]).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(
                    resid <= 1e-9 * scale,
                    "residual {resid:.3e} vs scale {scale:.3e} (seed {seed})"
                );
            }
            // ascending order
            for w in eig.values.windows(2) {
                assert!(w[0] <= w[1] + 1e-12);
            }
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = CMatrix::identity(4);
        m[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(matches!(
            m.hermitian_eigen(),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let a = CMatrix::from_fn(2, |r, c| Complex64::new((2 * r + c) as f64, 0.0));
        let b = CMatrix::identity(3);
        let k = kron(&a, &b);
        assert_eq!(k.dim(), 6);
        assert_eq!(k[(0, 3)], a[(0, 1)]);
        assert_eq!(k[(4, 4)], a[(1, 1)]);
        assert_eq!(k[(4, 3)], Complex64::new(0.0, 0.0));
    }
}
