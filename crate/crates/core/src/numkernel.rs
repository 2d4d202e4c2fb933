//! Dense complex linear-algebra kernels.
//!
//! Thin wrappers around nalgebra's complex decompositions with the accuracy
//! contracts the physics solver and the subspace estimators rely on:
//! economy SVD with descending singular values, general eigendecomposition,
//! Moore-Penrose pseudoinverse, and the constrained null-space solve used
//! for Lindbladian steady states.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative singular-value threshold for all rank decisions.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Economy-size singular value decomposition, `m = U diag(s) V^H`.
#[derive(Debug, Clone)]
pub struct SvdDecomp {
    /// Left singular vectors, `rows x min(rows, cols)`, orthonormal columns.
    pub u: CMat,
    /// Singular values, descending.
    pub singular_values: Vec<f64>,
    /// Right singular vectors, `cols x min(rows, cols)` (V, not V^H).
    pub v: CMat,
}

impl SvdDecomp {
    /// Reassemble `U diag(s) V^H`.
    pub fn reconstruct(&self) -> CMat {
        let s = DVector::from_iterator(
            self.singular_values.len(),
            self.singular_values.iter().map(|&x| Complex64::new(x, 0.0)),
        );
        &self.u * CMat::from_diagonal(&s) * self.v.adjoint()
    }

    /// Number of singular values above `RANK_REL_TOL * s_max`.
    pub fn rank(&self) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .filter(|&&s| s > RANK_REL_TOL * smax)
            .count()
    }
}

/// General (non-Hermitian) eigendecomposition.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    /// Eigenvalues, in no particular order.
    pub values: CVec,
    /// Unit-norm eigenvectors, one column per eigenvalue.
    pub vectors: CMat,
}

fn check_finite(m: &CMat, op: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::invalid(format!("{op}: zero-sized matrix")));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid(format!("{op}: non-finite entry")));
    }
    Ok(())
}

/// Economy SVD with singular values sorted descending.
pub fn svd(m: &CMat) -> Result<SvdDecomp> {
    check_finite(m, "svd")?;
    let decomp = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("svd did not converge".into()))?;
    let u = decomp.u.expect("u requested");
    let v_t = decomp.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..decomp.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        decomp.singular_values[b]
            .partial_cmp(&decomp.singular_values[a])
            .expect("singular values are finite")
    });
    let singular_values: Vec<f64> = order.iter().map(|&i| decomp.singular_values[i]).collect();
    let u = CMat::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let v_herm = v_t.adjoint();
    let v = CMat::from_columns(&order.iter().map(|&i| v_herm.column(i)).collect::<Vec<_>>());
    Ok(SvdDecomp {
        u,
        singular_values,
        v,
    })
}

/// Eigenvalues and unit-norm eigenvectors of a square complex matrix.
///
/// Eigenvalues come from the Schur form; each eigenvector is the smallest
/// right singular vector of `m - lambda I`.
pub fn eig_general(m: &CMat) -> Result<EigDecomp> {
    check_finite(m, "eig_general")?;
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::invalid(format!(
            "eig_general: matrix is {}x{}, must be square",
            n,
            m.ncols()
        )));
    }
    let schur = m
        .clone()
        .try_schur(f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("schur iteration did not converge".into()))?;
    let values = schur
        .eigenvalues()
        .ok_or_else(|| Error::NumericalFailure("schur form not triangular".into()))?;
    let mut vectors = CMat::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        let shifted = m - CMat::identity(n, n) * lambda;
        let dec = svd(&shifted)?;
        // smallest singular value is last after descending sort
        let v = dec.v.column(n - 1).into_owned();
        vectors.set_column(k, &v);
    }
    Ok(EigDecomp {
        values: values.column(0).into_owned(),
        vectors,
    })
}

/// Moore-Penrose pseudoinverse via the economy SVD.
pub fn pinv(m: &CMat) -> Result<CMat> {
    let dec = svd(m)?;
    let smax = dec.singular_values.first().copied().unwrap_or(0.0);
    let tol = RANK_REL_TOL * smax;
    let sinv = DVector::from_iterator(
        dec.singular_values.len(),
        dec.singular_values
            .iter()
            .map(|&s| Complex64::new(if s > tol { 1.0 / s } else { 0.0 }, 0.0)),
    );
    Ok(&dec.v * CMat::from_diagonal(&sinv) * dec.u.adjoint())
}

/// Minimum-norm least-squares solution of `a x = b` via the SVD.
pub fn lstsq(a: &CMat, b: &CVec) -> Result<CVec> {
    if a.nrows() != b.len() {
        return Err(Error::invalid(format!(
            "lstsq: {} rows vs rhs length {}",
            a.nrows(),
            b.len()
        )));
    }
    Ok(pinv(a)? * b)
}

/// Steady-state solve for a vectorized Lindbladian superoperator.
///
/// `l` must be n^2 x n^2. The trace constraint is appended as an extra row
/// and the stacked system solved in the least-squares sense; the result is
/// renormalized to unit trace. Errors if the null space of `l` is not
/// one-dimensional at the `RANK_REL_TOL` threshold.
pub fn solve_steady_null(l: &CMat) -> Result<CVec> {
    check_finite(l, "solve_steady_null")?;
    let n2 = l.ncols();
    if l.nrows() != n2 {
        return Err(Error::invalid("solve_steady_null: matrix must be square"));
    }
    let n = (n2 as f64).sqrt().round() as usize;
    if n * n != n2 {
        return Err(Error::invalid(
            "solve_steady_null: dimension is not a perfect square",
        ));
    }

    let dec = svd(l)?;
    let smax = dec.singular_values[0];
    let null_dim = dec
        .singular_values
        .iter()
        .filter(|&&s| s <= RANK_REL_TOL * smax)
        .count();
    if null_dim != 1 {
        return Err(Error::DegenerateSystem(format!(
            "null space dimension {null_dim}, expected 1"
        )));
    }

    // Stack the trace row (column-major vec: diagonal entries at i*n + i).
    let mut stacked = CMat::zeros(n2 + 1, n2);
    stacked.view_mut((0, 0), (n2, n2)).copy_from(l);
    for i in 0..n {
        stacked[(n2, i * n + i)] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = CVec::zeros(n2 + 1);
    rhs[n2] = Complex64::new(1.0, 0.0);
    let mut x = lstsq(&stacked, &rhs)?;

    let trace: Complex64 = (0..n).map(|i| x[i * n + i]).sum();
    if trace.norm() < 1e-8 {
        return Err(Error::DegenerateSystem(
            "null vector has vanishing trace".into(),
        ));
    }
    x /= trace;
    Ok(x)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    check_finite(m, "hermitian_eigenvalues")?;
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("hermitian_eigenvalues: non-square"));
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(vals)
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn rand_cmat(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn svd_identity_has_unit_singular_values() {
        let dec = svd(&CMat::identity(4, 4)).unwrap();
        for s in &dec.singular_values {
            assert_abs_diff_eq!(*s, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn svd_rank_one_outer_product() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut u = rand_cmat(&mut rng, 5, 1);
        let mut v = rand_cmat(&mut rng, 3, 1);
        u /= Complex64::new(u.norm(), 0.0);
        v /= Complex64::new(v.norm(), 0.0);
        let m = &u * v.adjoint();
        let dec = svd(&m).unwrap();
        assert_abs_diff_eq!(dec.singular_values[0], 1.0, epsilon = 1e-12);
        for s in &dec.singular_values[1..] {
            assert_abs_diff_eq!(*s, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn svd_reconstructs_random_6x4() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let m = rand_cmat(&mut rng, 6, 4);
        let dec = svd(&m).unwrap();
        let resid = (&m - dec.reconstruct()).norm() / m.norm();
        assert!(resid <= 1e-10, "residual {resid}");
        // orthonormal columns
        let eye = CMat::identity(4, 4);
        assert!((dec.u.adjoint() * &dec.u - &eye).norm() <= 1e-12);
        assert!((dec.v.adjoint() * &dec.v - &eye).norm() <= 1e-12);
        // descending
        for w in dec.singular_values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn svd_reconstructs_up_to_64x64() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for &(r, c) in &[(64usize, 64usize), (64, 17), (17, 64)] {
            let m = rand_cmat(&mut rng, r, c);
            let dec = svd(&m).unwrap();
            let resid = (&m - dec.reconstruct()).norm() / m.norm();
            assert!(resid <= 1e-10, "{r}x{c} residual {resid}");
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut m = CMat::identity(2, 2);
        m[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(svd(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn eig_diagonal_matrix() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 3.0),
        ]));
        let dec = eig_general(&m).unwrap();
        let mut got: Vec<Complex64> = dec.values.iter().copied().collect();
        got.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((got[0] - Complex64::new(0.0, 3.0)).norm() < 1e-12);
        assert!((got[1] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn eig_symmetric_swap() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let dec = eig_general(&m).unwrap();
        let mut re: Vec<f64> = dec.values.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(re[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(re[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_residual_on_random_5x5() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let m = rand_cmat(&mut rng, 5, 5);
        let dec = eig_general(&m).unwrap();
        let mnorm = m.norm();
        for k in 0..5 {
            let v = dec.vectors.column(k);
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
            let resid = (&m * v - v * dec.values[k]).norm();
            assert!(resid <= 1e-9 * mnorm, "eigenpair {k} residual {resid}");
        }
    }

    #[test]
    fn eig_rejects_non_square() {
        let m = CMat::zeros(2, 3);
        assert!(matches!(eig_general(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn pinv_identity_and_zero() {
        let id = CMat::identity(3, 3);
        assert!((pinv(&id).unwrap() - &id).norm() < 1e-12);
        let z = CMat::zeros(4, 2);
        let p = pinv(&z).unwrap();
        assert_eq!(p.shape(), (2, 4));
        assert!(p.norm() == 0.0);
    }

    #[test]
    fn pinv_full_column_rank_left_inverse() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let m = rand_cmat(&mut rng, 9, 3);
        let p = pinv(&m).unwrap();
        let resid = (p * &m - CMat::identity(3, 3)).norm();
        assert!(resid <= 1e-10, "residual {resid}");
    }

    fn check_moore_penrose(m: &CMat) {
        let p = pinv(m).unwrap();
        let scale = m.norm().max(1.0);
        assert!((m * &p * m - m).norm() <= 1e-9 * scale);
        assert!((&p * m * &p - &p).norm() <= 1e-9 * scale);
        let mp = m * &p;
        assert!((&mp - mp.adjoint()).norm() <= 1e-9);
        let pm = &p * m;
        assert!((&pm - pm.adjoint()).norm() <= 1e-9);
    }

    #[test]
    fn pinv_moore_penrose_identities() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        // full rank
        check_moore_penrose(&rand_cmat(&mut rng, 6, 4));
        // rank deficient: product of thin factors
        let a = rand_cmat(&mut rng, 6, 2);
        let b = rand_cmat(&mut rng, 2, 5);
        check_moore_penrose(&(a * b));
    }

    #[test]
    fn steady_null_two_level_no_drive() {
        // d rho / dt with H = 0 and decay gamma |1><2|: unique steady state
        // is the ground state.
        let gamma = 2.0;
        let n = 2;
        let mut c = CMat::zeros(n, n);
        c[(0, 1)] = Complex64::new(gamma.sqrt(), 0.0);
        let id = CMat::identity(n, n);
        let chc = c.adjoint() * &c;
        let l = kron(&c.map(|z| z.conj()), &c)
            - (kron(&id, &chc) + kron(&chc.transpose(), &id)) * Complex64::new(0.5, 0.0);
        let x = solve_steady_null(&l).unwrap();
        // rho = |1><1|
        assert_abs_diff_eq!(x[0].re, 1.0, epsilon = 1e-12);
        assert!(x[3].norm() < 1e-12);
    }

    #[test]
    fn steady_null_rejects_degenerate() {
        // zero superoperator: every state is steady
        let l = CMat::zeros(4, 4);
        assert!(matches!(
            solve_steady_null(&l),
            Err(Error::DegenerateSystem(_))
        ));
    }

    #[test]
    fn hermitian_eigenvalues_ascending() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let a = rand_cmat(&mut rng, 4, 4);
        let h = &a + a.adjoint();
        let vals = hermitian_eigenvalues(&h).unwrap();
        for w in vals.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let tr: f64 = (0..4).map(|i| h[(i, i)].re).sum();
        assert_abs_diff_eq!(vals.iter().sum::<f64>(), tr, epsilon = 1e-10);
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = CMat::from_row_slice(
            1,
            2,
            &[Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0)],
        );
        let b = CMat::identity(2, 2);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (2, 4));
        assert_eq!(k[(0, 0)], Complex64::new(2.0, 0.0));
        assert_eq!(k[(1, 3)], Complex64::new(0.0, 1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prop_svd_reconstructs(seed in 0u64..1000, r in 1usize..16, c in 1usize..16) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let m = rand_cmat(&mut rng, r, c);
            let dec = svd(&m).unwrap();
            let denom = m.norm().max(1e-300);
            prop_assert!((&m - dec.reconstruct()).norm() / denom <= 1e-10);
        }

        #[test]
        fn prop_eig_residual(seed in 0u64..1000, n in 2usize..8) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let m = rand_cmat(&mut rng, n, n);
            let dec = eig_general(&m).unwrap();
            let mnorm = m.norm();
            for k in 0..n {
                let v = dec.vectors.column(k);
                prop_assert!((&m * v - v * dec.values[k]).norm() <= 1e-9 * mnorm);
            }
        }
    }
}
