//! Dense complex linear algebra on `d x d` operators.
//!
//! Everything here is a pure function of its inputs. Matrices are nalgebra
//! `DMatrix<Complex64>`; vectorization is column stacking throughout the
//! crate, so `vec(A X B) = (B^T (x) A) vec(X)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol::tolerances;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> CMatrix {
    let d = values.len();
    CMatrix::from_fn(d, d, |i, j| if i == j { re(values[i]) } else { C64::new(0.0, 0.0) })
}

/// Build a complex matrix from real row-major entries.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| re(rows[i][j]))
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * re(0.5)
}

/// Largest entrywise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Outer product `|z><x|`.
pub fn outer(z: &CVector, x: &CVector) -> CMatrix {
    z * x.adjoint()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec_of(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`].
pub fn unvec(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

pub(crate) fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).iter().sum()
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m)[0]
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 2 {
        let a = m[(0, 0)].re;
        let b = m[(1, 1)].re;
        let off = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
        let mid = 0.5 * (a + b);
        let rad = (0.25 * (a - b) * (a - b) + off.norm_sqr()).sqrt();
        return vec![mid - rad, mid + rad];
    }
    let mut v: Vec<f64> = SymmetricEigen::new(hermitize(m)).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn hermitian_trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|x| x.abs()).sum()
}

/// Trace distance `||a - b||_1` between two Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    hermitian_trace_norm(&(a - b))
}

/// Rebuild `V diag(f(lambda)) V^dagger` from a Hermitian eigen-decomposition.
pub fn spectral_map(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let d = vectors.nrows();
    let mut out = CMatrix::zeros(d, d);
    for (k, &lam) in values.iter().enumerate() {
        let w = f(lam);
        if w == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        out += (v * v.adjoint()) * re(w);
    }
    out
}

/// Hermitian PSD square root.
///
/// Eigenvalues below the PSD tolerance are set to zero before the root;
/// anything below `-tol_psd` is an error.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    ensure_square(m)?;
    let tol = tolerances().psd;
    let (values, vectors) = hermitian_eigen(m);
    if let Some(&min) = values.first() {
        if min < -tol {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    Ok(spectral_map(&values, &vectors, |x| if x < tol { 0.0 } else { x.sqrt() }))
}

/// A Hermitian, positive semi-definite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::MatrixRows", into = "crate::io::MatrixRows")]
pub struct DensityMatrix(CMatrix);

impl TryFrom<CMatrix> for DensityMatrix {
    type Error = Error;
    fn try_from(m: CMatrix) -> Result<Self> {
        DensityMatrix::new(m)
    }
}

impl TryFrom<crate::io::MatrixRows> for DensityMatrix {
    type Error = Error;
    fn try_from(rows: crate::io::MatrixRows) -> Result<Self> {
        let d = rows.len();
        DensityMatrix::new(crate::io::rows_to_matrix(&rows, d)?)
    }
}

impl From<DensityMatrix> for crate::io::MatrixRows {
    fn from(rho: DensityMatrix) -> Self {
        crate::io::matrix_to_rows(&rho.0)
    }
}

impl From<DensityMatrix> for CMatrix {
    fn from(rho: DensityMatrix) -> CMatrix {
        rho.0
    }
}

impl DensityMatrix {
    /// Validate `m` against the Hermitian, PSD and trace tolerances.
    pub fn new(m: CMatrix) -> Result<Self> {
        let d = ensure_square(&m)?;
        if d == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        let tol = tolerances();
        let herm = max_abs(&(&m - m.adjoint()));
        if herm > tol.herm {
            return Err(Error::NotHermitian { residual: herm });
        }
        let tr = trace(&m);
        if (tr - re(1.0)).norm() > tol.tr {
            return Err(Error::BadTrace { trace: tr.re });
        }
        let min = hermitian_eigenvalues(&m)[0];
        if min < -tol.psd {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(Self(m))
    }

    /// Hermitize, clamp slightly negative eigenvalues and rescale to unit trace.
    ///
    /// Used after every update step. Fails if the input has an eigenvalue
    /// below `-tol_psd * trace` or a non-positive trace.
    pub fn normalize(m: &CMatrix) -> Result<Self> {
        ensure_square(m)?;
        let h = hermitize(m);
        let tr = trace(&h).re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::BadTrace { trace: tr });
        }
        let h = h / re(tr);
        let tol = tolerances().psd;
        let values = hermitian_eigenvalues(&h);
        if values[0] >= 0.0 {
            return Ok(Self(h));
        }
        if values[0] < -tol {
            return Err(Error::NotPsd { min_eigenvalue: values[0] });
        }
        let (values, vectors) = hermitian_eigen(&h);
        let clamped = spectral_map(&values, &vectors, |x| x.max(0.0));
        let tr = trace(&clamped).re;
        Ok(Self(clamped / re(tr)))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(identity(d) / re(d as f64))
    }

    /// `|e_k><e_k|` in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = re(1.0);
        Self(m)
    }

    /// Diagonal state from a probability vector.
    pub fn diagonal(p: &[f64]) -> Result<Self> {
        Self::new(diag(p))
    }

    /// Pure state `|x><x|` from a nonzero vector (normalized internally).
    pub fn pure(x: &CVector) -> Result<Self> {
        let n = x.norm();
        if n == 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let x = x / re(n);
        Ok(Self(outer(&x, &x)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn purity(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `tr(A rho)`.
    pub fn expectation(&self, a: &CMatrix) -> C64 {
        (a * &self.0).trace()
    }

    /// Convex combination `sum_k w_k rho_k`, renormalized.
    pub fn mixture<'a>(parts: impl IntoIterator<Item = (f64, &'a DensityMatrix)>) -> Result<Self> {
        let mut acc: Option<CMatrix> = None;
        for (w, rho) in parts {
            let term = rho.matrix() * re(w);
            acc = Some(match acc {
                None => term,
                Some(a) => a + term,
            });
        }
        let acc = acc.ok_or_else(|| Error::InvalidMeasure("empty mixture".into()))?;
        Self::normalize(&acc)
    }
}

/// Uhlmann fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`, clamped to `[0, 1]`.
///
/// Evaluated as the squared trace norm of `sqrt(rho) sqrt(sigma)`, whose
/// singular values are the square roots of the spectrum of
/// `sqrt(rho) sigma sqrt(rho)`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    let a = psd_sqrt(rho.matrix())?;
    let b = psd_sqrt(sigma.matrix())?;
    let s = trace_norm(&(a * b));
    Ok((s * s).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_unit_vector, seeded};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn norms_of_identity_and_zero() {
        for d in 1..5 {
            assert!(close(trace_norm(&identity(d)), d as f64, 1e-12));
            assert!(close(op_norm(&identity(d)), 1.0, 1e-12));
        }
        assert_eq!(trace_norm(&CMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn norms_of_real_diagonal() {
        // singular values of diag(3, -4) are |3| and |-4|
        let m = diag(&[3.0, -4.0]);
        assert!(close(trace_norm(&m), 7.0, 1e-12));
        assert!(close(op_norm(&m), 4.0, 1e-12));
        assert!(close(hermitian_trace_norm(&m), 7.0, 1e-12));
    }

    #[test]
    fn op_norm_of_unit_outer_product() {
        let mut rng = seeded(3);
        let z = random_unit_vector(3, &mut rng);
        let x = random_unit_vector(3, &mut rng);
        assert!(close(op_norm(&outer(&z, &x)), 1.0, 1e-12));
    }

    #[test]
    fn sqrt_of_diagonal() {
        let r = psd_sqrt(&diag(&[4.0, 9.0])).unwrap();
        assert!(max_abs(&(r - diag(&[2.0, 3.0]))) < 1e-12);
        let r = psd_sqrt(&identity(3)).unwrap();
        assert!(max_abs(&(r - identity(3))) < 1e-12);
    }

    #[test]
    fn sqrt_rejects_negative_matrix() {
        assert!(matches!(psd_sqrt(&diag(&[1.0, -0.1])), Err(Error::NotPsd { .. })));
        // within tolerance is clamped
        assert!(psd_sqrt(&diag(&[1.0, -1e-12])).is_ok());
    }

    #[test]
    fn fidelity_basic_cases() {
        let mut rng = seeded(11);
        let rho = random_density(3, &mut rng);
        assert!(close(fidelity(&rho, &rho).unwrap(), 1.0, 1e-10));
        let f = fidelity(&DensityMatrix::basis(2, 0), &DensityMatrix::basis(2, 1)).unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn fidelity_of_commuting_states_matches_classical_formula() {
        let (p, q) = (0.3_f64, 0.6_f64);
        let expected = ((p * q).sqrt() + ((1.0 - p) * (1.0 - q)).sqrt()).powi(2);
        let rho = DensityMatrix::diagonal(&[p, 1.0 - p]).unwrap();
        let sigma = DensityMatrix::diagonal(&[q, 1.0 - q]).unwrap();
        assert!(close(fidelity(&rho, &sigma).unwrap(), expected, 1e-12));
    }

    #[test]
    fn density_validation() {
        assert!(matches!(DensityMatrix::new(diag(&[0.5, 0.4])), Err(Error::BadTrace { .. })));
        assert!(matches!(DensityMatrix::new(diag(&[1.2, -0.2])), Err(Error::NotPsd { .. })));
        let mut m = diag(&[0.5, 0.5]);
        m[(0, 1)] = re(0.1);
        assert!(matches!(DensityMatrix::new(m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn vec_unvec_is_column_stacking() {
        let m = CMatrix::from_fn(2, 2, |i, j| c(i as f64, j as f64));
        let v = vec_of(&m);
        assert_eq!(v[1], m[(1, 0)]);
        assert_eq!(unvec(&v, 2), m);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn norm_sandwich(seed in any::<u64>(), d in 1usize..5) {
            let mut rng = seeded(seed);
            let m = crate::random::ginibre(d, d, &mut rng);
            let (t, o) = (trace_norm(&m), op_norm(&m));
            prop_assert!(o <= t + 1e-12);
            prop_assert!(t <= d as f64 * o + 1e-12);
        }

        #[test]
        fn fidelity_is_symmetric(seed in any::<u64>(), d in 2usize..4) {
            let mut rng = seeded(seed);
            let a = random_density(d, &mut rng);
            let b = random_density(d, &mut rng);
            let f1 = fidelity(&a, &b).unwrap();
            let f2 = fidelity(&b, &a).unwrap();
            prop_assert!((f1 - f2).abs() <= 1e-10);
            prop_assert!((0.0..=1.0).contains(&f1));
        }

        #[test]
        fn fidelity_of_pure_states_is_overlap(seed in any::<u64>(), d in 2usize..5) {
            let mut rng = seeded(seed);
            let x = random_unit_vector(d, &mut rng);
            let y = random_unit_vector(d, &mut rng);
            let overlap = x.dotc(&y).norm_sqr();
            let f = fidelity(&DensityMatrix::pure(&x).unwrap(), &DensityMatrix::pure(&y).unwrap()).unwrap();
            prop_assert!((f - overlap).abs() <= 1e-8);
        }

        #[test]
        fn sqrt_reconstructs_psd(seed in any::<u64>(), d in 1usize..6) {
            let mut rng = seeded(seed);
            let a = crate::random::ginibre(d, d, &mut rng);
            let m = &a * a.adjoint();
            let r = psd_sqrt(&m).unwrap();
            prop_assert!(op_norm(&(&r * &r - &m)) <= 1e-8);
            prop_assert!(max_abs(&(&r - r.adjoint())) <= 1e-12);
        }
    }
}
