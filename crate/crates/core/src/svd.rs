//! Orthogonal coefficient basis from the SVD of the design matrix.
//!
//! Writing `X = U D V^T` and rotating the coefficients to `z = V^T beta`
//! decouples the Gaussian part of the posterior coordinate-wise, which is
//! what makes the analytic marginalization in [`crate::marginal`] O(k) per
//! evaluation. Only `V`, the singular values, and the rotated projection
//! `w = V^T X^T y` are retained; `U` never appears in the pipeline.
//!
//! `V` is always the full `k x k` orthogonal matrix. When `n < k` the thin
//! factorization leaves the null space of `X` unrepresented, so the basis
//! is completed with an orthonormal basis of the orthogonal complement and
//! the missing singular values are stored as exact zeros. Those structural
//! zeros are load-bearing: the marginal model recognizes prior-only
//! coordinates by `lambda[i] == 0` with `w[i] == 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::RegressionData;
use crate::scalar::Scalar;

/// Iteration budget for the SVD. Generous for every size this crate
/// targets; hitting it is surfaced as [`Error::SvdFailed`].
pub const MAX_SVD_ITERATIONS: usize = 100_000;

/// SVD-derived quantities the rest of the pipeline consumes.
///
/// Built by [`factorize`]; the fields satisfy, up to floating-point
/// rounding:
///
/// - `v` is `k x k` orthogonal, each column signed so that its
///   largest-magnitude entry (first such index on ties) is positive,
/// - `lambda` is descending and nonnegative with exactly
///   `k - min(n, k)` trailing structural zeros,
/// - `w = v^T x^T y`, exactly zero in the structural-zero coordinates,
/// - `yty = y^T y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdBasis<T: Scalar> {
    /// Right singular vectors, full `k x k`.
    pub v: DMatrix<T>,
    /// Singular values of `X`, zero-padded to length `k`.
    pub lambda: DVector<T>,
    /// Rotated projection `V^T X^T y`, length `k`.
    pub w: DVector<T>,
    /// Squared norm of the response.
    pub yty: T,
    /// Number of observations.
    pub n: usize,
    /// Number of coefficients.
    pub k: usize,
}

/// Factorizes the design matrix and assembles the basis.
///
/// Validates the data, so callers holding a raw [`RegressionData`] do not
/// need a separate `validate` call.
pub fn factorize<T: Scalar>(data: &RegressionData<T>) -> Result<SvdBasis<T>> {
    data.validate()?;
    let (n, k) = data.x.shape();
    let r = n.min(k);

    let eps = T::default_epsilon() * T::lit(5.0);
    let svd = data
        .x
        .clone()
        .try_svd(false, true, eps, MAX_SVD_ITERATIONS)
        .ok_or(Error::SvdFailed { max_iterations: MAX_SVD_ITERATIONS })?;
    let v_t = svd.v_t.expect("v_t was requested");
    let sv = svd.singular_values;

    // The backend sorts descending already; sorting again costs nothing and
    // makes the ordering invariant independent of the backend. The sort is
    // stable, so structural zeros appended below stay behind any computed
    // zero singular values.
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).expect("finite singular values"));

    let mut v = DMatrix::<T>::zeros(k, k);
    let mut lambda = DVector::<T>::zeros(k);
    for (pos, &idx) in order.iter().enumerate() {
        lambda[pos] = sv[idx];
        v.column_mut(pos).copy_from(&v_t.row(idx).transpose());
    }

    if r < k {
        complete_basis(&mut v, r);
    }
    enforce_sign_convention(&mut v);

    let xty = data.x.tr_mul(&data.y);
    let mut w = v.tr_mul(&xty);
    // Structural zeros: these coordinates span the null space of X, where
    // the projection vanishes identically. Storing the exact zero (rather
    // than the O(eps) residual of the product above) is what lets the
    // marginal model treat them as pure prior coordinates.
    for j in r..k {
        w[j] = T::zero();
    }

    Ok(SvdBasis { v, lambda, w, yty: data.y.dot(&data.y), n, k })
}

/// Rotates coefficients into the decoupled basis, `z = V^T beta`.
pub fn to_z<T: Scalar>(basis: &SvdBasis<T>, beta: &DVector<T>) -> Result<DVector<T>> {
    if beta.len() != basis.k {
        return Err(Error::Validation(format!(
            "beta length {} does not match basis dimension {}",
            beta.len(),
            basis.k
        )));
    }
    Ok(basis.v.tr_mul(beta))
}

/// Rotates decoupled coordinates back, `beta = V z`.
pub fn from_z<T: Scalar>(basis: &SvdBasis<T>, z: &DVector<T>) -> Result<DVector<T>> {
    if z.len() != basis.k {
        return Err(Error::Validation(format!(
            "z length {} does not match basis dimension {}",
            z.len(),
            basis.k
        )));
    }
    Ok(&basis.v * z)
}

/// Fills columns `r..k` of `v` with an orthonormal basis of the orthogonal
/// complement of the leading `r` columns.
///
/// The complement is extracted from a column-pivoted QR of the projector
/// `I - V_r V_r^T`, which is deterministic and keeps the completion
/// orthogonal to the computed singular vectors to machine precision.
fn complete_basis<T: Scalar>(v: &mut DMatrix<T>, r: usize) {
    let k = v.nrows();
    let vr = v.columns(0, r).clone_owned();
    let projector = DMatrix::<T>::identity(k, k) - &vr * vr.transpose();
    let q = projector.col_piv_qr().q();
    v.columns_mut(r, k - r).copy_from(&q.columns(0, k - r));
}

/// Flips each column of `v` so its largest-magnitude entry is positive,
/// taking the first index on magnitude ties.
///
/// Sign-normalizing here (and recomputing `w` afterwards) removes the sign
/// ambiguity of singular vectors, so identical inputs produce bitwise
/// identical bases regardless of backend sign choices.
fn enforce_sign_convention<T: Scalar>(v: &mut DMatrix<T>) {
    for j in 0..v.ncols() {
        let mut lead = 0;
        let mut lead_abs = T::zero();
        for i in 0..v.nrows() {
            let a = v[(i, j)].abs();
            if a > lead_abs {
                lead_abs = a;
                lead = i;
            }
        }
        if v[(lead, j)] < T::zero() {
            v.column_mut(j).neg_mut();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_synthetic;
    use approx::assert_relative_eq;

    /// Orthogonality and reconstruction slack for f64 factorizations.
    const ORTHO_TOL: f64 = 1e-12;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Left singular vectors recovered column-wise as `X v_j / lambda_j`.
    /// Independent of the factorization path that produced `v`.
    fn recover_u(x: &DMatrix<f64>, basis: &SvdBasis<f64>) -> DMatrix<f64> {
        let r = basis.n.min(basis.k);
        let mut u = DMatrix::zeros(basis.n, r);
        for j in 0..r {
            if basis.lambda[j] > 0.0 {
                let col = x * basis.v.column(j) / basis.lambda[j];
                u.column_mut(j).copy_from(&col);
            }
        }
        u
    }

    #[test]
    fn identity_design_is_recovered_exactly() {
        let data = RegressionData::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![3.0, 4.0]),
        )
        .unwrap();
        let basis = factorize(&data).unwrap();
        assert_eq!(basis.lambda, DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!(basis.v, DMatrix::identity(2, 2));
        assert_eq!(basis.w, DVector::from_vec(vec![3.0, 4.0]));
        assert_eq!(basis.yty, 25.0);
    }

    #[test]
    fn scalar_design() {
        let data = RegressionData::new(
            DMatrix::from_element(1, 1, 3.0),
            DVector::from_element(1, 2.0),
        )
        .unwrap();
        let basis = factorize(&data).unwrap();
        assert_relative_eq!(basis.lambda[0], 3.0, max_relative = 1e-15);
        assert_relative_eq!(basis.w[0], 6.0, max_relative = 1e-15);
    }

    #[test]
    fn wide_design_pads_structural_zeros() {
        let data = RegressionData::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, 5.0),
        )
        .unwrap();
        let basis = factorize(&data).unwrap();
        assert_relative_eq!(basis.lambda[0], 2.0_f64.sqrt(), max_relative = 1e-15);
        assert_eq!(basis.lambda[1], 0.0);
        assert_relative_eq!(basis.w[0], 5.0 * 2.0_f64.sqrt(), max_relative = 1e-14);
        assert_eq!(basis.w[1], 0.0);
        // Completion column spans the null space of X and obeys the sign
        // convention: magnitudes tie, so the first entry must be positive.
        assert!(basis.v[(0, 1)] > 0.0);
        assert_relative_eq!(basis.v[(0, 1)], -basis.v[(1, 1)], max_relative = 1e-14);
    }

    #[test]
    fn columns_obey_sign_convention() {
        let (data, _) = generate_synthetic::<f64>(30, 7, 11);
        let basis = factorize(&data).unwrap();
        for j in 0..basis.k {
            let col = basis.v.column(j);
            let lead = col.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(col.iter().any(|&v| v.abs() == lead && v > 0.0));
        }
    }

    #[test]
    fn v_is_orthogonal_and_x_is_reconstructed() {
        for &(n, k, seed) in &[(20usize, 5usize, 2u64), (5, 9, 3), (40, 40, 4)] {
            let (data, _) = generate_synthetic::<f64>(n, k, seed);
            let basis = factorize(&data).unwrap();

            let gram = basis.v.tr_mul(&basis.v) - DMatrix::identity(k, k);
            assert!(max_abs(&gram) < ORTHO_TOL, "({n},{k}) gram {}", max_abs(&gram));

            let u = recover_u(&data.x, &basis);
            let r = n.min(k);
            let mut rec = DMatrix::zeros(n, k);
            for j in 0..r {
                rec += u.column(j) * basis.v.column(j).transpose() * basis.lambda[j];
            }
            let scale = max_abs(&data.x) * n.max(k) as f64;
            assert!(
                max_abs(&(rec - &data.x)) < 1e-10 * scale,
                "({n},{k}) reconstruction"
            );
        }
    }

    #[test]
    fn w_matches_projection_identity() {
        // w = D U^T y coordinate-wise, with U recovered independently.
        let (data, _) = generate_synthetic::<f64>(25, 6, 7);
        let basis = factorize(&data).unwrap();
        let u = recover_u(&data.x, &basis);
        let uty = u.tr_mul(&data.y);
        for j in 0..basis.k.min(basis.n) {
            assert_relative_eq!(
                basis.w[j],
                basis.lambda[j] * uty[j],
                epsilon = 1e-12,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn null_space_projection_is_small_before_zeroing() {
        // In the n < k case the zero is structural, but the same near-zero
        // property must hold for computed null directions of a rank
        // deficient square design.
        let x = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let y = DVector::from_vec(vec![1.0, -1.0]);
        let data = RegressionData::new(x, y).unwrap();
        let basis = factorize(&data).unwrap();
        assert!(basis.lambda[1].abs() < 1e-14);
        let bound = 1e-10 * 4.0 * data.y.norm();
        assert!(basis.w[1].abs() < bound, "w[1] = {}", basis.w[1]);
    }

    #[test]
    fn rotation_round_trips() {
        let (data, _) = generate_synthetic::<f64>(12, 8, 5);
        let basis = factorize(&data).unwrap();
        let beta = DVector::from_fn(8, |i, _| (i as f64 - 3.5) * 0.25);
        let z = to_z(&basis, &beta).unwrap();
        let back = from_z(&basis, &z).unwrap();
        assert_relative_eq!(back, beta, epsilon = 1e-13);

        let short = DVector::zeros(3);
        assert!(to_z(&basis, &short).is_err());
        assert!(from_z(&basis, &short).is_err());
    }

    #[test]
    fn factorization_is_deterministic() {
        let (data, _) = generate_synthetic::<f64>(15, 20, 6);
        let a = factorize(&data).unwrap();
        let b = factorize(&data).unwrap();
        assert_eq!(a.v, b.v);
        assert_eq!(a.lambda, b.lambda);
        assert_eq!(a.w, b.w);
    }

    #[test]
    fn f32_factorization_holds_looser_bounds() {
        let (data, _) = generate_synthetic::<f32>(10, 4, 8);
        let basis = factorize(&data).unwrap();
        let gram = basis.v.tr_mul(&basis.v) - DMatrix::identity(4, 4);
        let worst = gram.iter().fold(0.0f32, |a, v| a.max(v.abs()));
        assert!(worst < 1e-5);
    }
}
