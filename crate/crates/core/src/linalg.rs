//! Small dense linear-algebra kernels: Householder least squares and a cyclic
//! Jacobi eigensolver for symmetric matrices.
//!
//! Both are deterministic: identical inputs produce bit-identical outputs,
//! which the persistence and report layers rely on. Problem sizes in this
//! crate stay in the low thousands, so dense O(n^3) methods are fine.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{lit, Scalar};

/// Least-squares solution of `X b = y` with the pieces regression layers need.
#[derive(Clone, Debug)]
pub struct LeastSquares<T> {
    pub coefficients: Vec<T>,
    pub fitted: Vec<T>,
    pub residuals: Vec<T>,
    /// `(X'X)^-1`, for covariance estimators.
    pub xtx_inverse: Matrix<T>,
}

/// Solves `min ||X b - y||_2` by Householder QR.
///
/// Errors with [`Error::RankDeficient`] when a pivot collapses and
/// [`Error::TooFewRows`] when `n < k`.
pub fn least_squares<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<LeastSquares<T>> {
    let n = x.rows();
    let k = x.cols();
    assert_eq!(y.len(), n, "design matrix and response length differ");
    if n < k {
        return Err(Error::TooFewRows { needed: k, got: n });
    }

    let mut a = x.clone();
    let mut qty: Vec<T> = y.to_vec();

    for j in 0..k {
        // Householder vector for column j below the diagonal.
        let mut sigma2 = T::zero();
        for r in j..n {
            sigma2 += a[(r, j)] * a[(r, j)];
        }
        let sigma = sigma2.sqrt();
        if sigma == T::zero() {
            return Err(Error::RankDeficient);
        }
        let x0 = a[(j, j)];
        let alpha = if x0 > T::zero() { -sigma } else { sigma };
        let v0 = x0 - alpha;
        // ||v||^2 = 2 sigma (sigma + |x0|), computed directly for stability.
        let vnorm2 = v0 * v0 + (sigma2 - x0 * x0);
        if vnorm2 == T::zero() {
            return Err(Error::RankDeficient);
        }

        a[(j, j)] = v0;
        let two = lit::<T>(2.0);
        // Apply H = I - 2 v v'/(v'v) to the trailing columns and to y.
        for col in (j + 1)..k {
            let mut dot = T::zero();
            for r in j..n {
                dot += a[(r, j)] * a[(r, col)];
            }
            let scale = two * dot / vnorm2;
            for r in j..n {
                let vr = a[(r, j)];
                a[(r, col)] = a[(r, col)] - scale * vr;
            }
        }
        let mut dot = T::zero();
        for r in j..n {
            dot += a[(r, j)] * qty[r];
        }
        let scale = two * dot / vnorm2;
        for r in j..n {
            let vr = a[(r, j)];
            qty[r] = qty[r] - scale * vr;
        }

        a[(j, j)] = alpha;
        for r in (j + 1)..n {
            a[(r, j)] = T::zero();
        }
    }

    // Rank test on the diagonal of R.
    let mut r_max = T::zero();
    for j in 0..k {
        r_max = r_max.max(a[(j, j)].abs());
    }
    let tol = T::epsilon() * lit::<T>(n.max(k) as f64) * r_max;
    for j in 0..k {
        if a[(j, j)].abs() <= tol {
            return Err(Error::RankDeficient);
        }
    }

    // Back substitution R beta = (Q'y)[0..k].
    let mut beta = vec![T::zero(); k];
    for j in (0..k).rev() {
        let mut s = qty[j];
        for c in (j + 1)..k {
            s = s - a[(j, c)] * beta[c];
        }
        beta[j] = s / a[(j, j)];
    }

    // (X'X)^-1 = R^-1 R^-T from the inverse of the triangular factor.
    let rinv = upper_triangular_inverse(&a, k);
    let xtx_inverse = Matrix::from_fn(k, k, |i, j| {
        let mut s = T::zero();
        for c in i.max(j)..k {
            s += rinv[(i, c)] * rinv[(j, c)];
        }
        s
    });

    let mut fitted = vec![T::zero(); n];
    for r in 0..n {
        let mut s = T::zero();
        for c in 0..k {
            s += x[(r, c)] * beta[c];
        }
        fitted[r] = s;
    }
    let residuals = y
        .iter()
        .zip(fitted.iter())
        .map(|(yi, fi)| *yi - *fi)
        .collect();

    Ok(LeastSquares {
        coefficients: beta,
        fitted,
        residuals,
        xtx_inverse,
    })
}

fn upper_triangular_inverse<T: Scalar>(r: &Matrix<T>, k: usize) -> Matrix<T> {
    let mut inv = Matrix::filled(k, k, T::zero());
    for j in (0..k).rev() {
        inv[(j, j)] = T::one() / r[(j, j)];
        for i in (0..j).rev() {
            let mut s = T::zero();
            for c in (i + 1)..=j {
                s += r[(i, c)] * inv[(c, j)];
            }
            inv[(i, j)] = -s / r[(i, i)];
        }
    }
    inv
}

/// Eigen decomposition of a symmetric matrix, eigenvalues sorted descending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    /// Column `j` is the eigenvector for `values[j]`.
    pub vectors: Matrix<T>,
}

const MAX_JACOBI_SWEEPS: usize = 64;

/// Cyclic Jacobi eigensolver. The input must be symmetric; only the upper
/// triangle is trusted.
pub fn symmetric_eigen<T: Scalar>(m: &Matrix<T>) -> Result<SymmetricEigen<T>> {
    let n = m.rows();
    assert_eq!(n, m.cols(), "symmetric_eigen requires a square matrix");
    let mut a = Matrix::from_fn(n, n, |i, j| if i <= j { m[(i, j)] } else { m[(j, i)] });
    let mut v = Matrix::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() });

    if n > 1 {
        let mut frob = T::zero();
        for i in 0..n {
            for j in 0..n {
                frob += a[(i, j)] * a[(i, j)];
            }
        }
        let frob = frob.sqrt();
        let tol = T::epsilon() * frob.max(T::one());

        let mut converged = frob == T::zero();
        let mut sweeps = 0;
        while !converged {
            if sweeps >= MAX_JACOBI_SWEEPS {
                return Err(Error::EigenFailed { sweeps });
            }
            sweeps += 1;
            let mut off = T::zero();
            for p in 0..n - 1 {
                for q in p + 1..n {
                    off = off.max(a[(p, q)].abs());
                    if a[(p, q)].abs() <= tol {
                        continue;
                    }
                    let (c, s) = rotation(a[(p, p)], a[(q, q)], a[(p, q)]);
                    apply_rotation(&mut a, &mut v, p, q, c, s);
                }
            }
            converged = off <= tol;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(j, j)]
            .partial_cmp(&a[(i, i)])
            .expect("eigenvalues are finite")
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

fn rotation<T: Scalar>(app: T, aqq: T, apq: T) -> (T, T) {
    let theta = (aqq - app) / (lit::<T>(2.0) * apq);
    let t = if theta >= T::zero() {
        T::one() / (theta + (T::one() + theta * theta).sqrt())
    } else {
        -T::one() / (-theta + (T::one() + theta * theta).sqrt())
    };
    let c = T::one() / (T::one() + t * t).sqrt();
    (c, t * c)
}

fn apply_rotation<T: Scalar>(
    a: &mut Matrix<T>,
    v: &mut Matrix<T>,
    p: usize,
    q: usize,
    c: T,
    s: T,
) {
    let n = a.rows();
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = c * aip - s * aiq;
        a[(i, q)] = s * aip + c * aiq;
    }
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = c * apj - s * aqj;
        a[(q, j)] = s * apj + c * aqj;
    }
    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = c * vip - s * viq;
        v[(i, q)] = s * vip + c * viq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_fit_is_recovered() {
        // y = 2 + 3x, no noise.
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let design = Matrix::from_fn(10, 2, |r, c| if c == 0 { 1.0 } else { xs[r] });
        let y: Vec<f64> = xs.iter().map(|x| 2.0 + 3.0 * x).collect();
        let fit = least_squares(&design, &y).unwrap();
        assert_relative_eq!(fit.coefficients[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.coefficients[1], 3.0, epsilon = 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn xtx_inverse_matches_direct_inverse() {
        let design = Matrix::from_rows(&[
            vec![1.0, 2.0],
            vec![1.0, 3.0],
            vec![1.0, 5.0],
            vec![1.0, 7.0],
        ]);
        let y = vec![1.0, 2.0, 2.0, 4.0];
        let fit = least_squares(&design, &y).unwrap();
        // X'X = [[4, 17], [17, 87]]; inverse = 1/59 [[87, -17], [-17, 4]].
        let det = 4.0 * 87.0 - 17.0 * 17.0;
        assert_relative_eq!(fit.xtx_inverse[(0, 0)], 87.0 / det, epsilon = 1e-12);
        assert_relative_eq!(fit.xtx_inverse[(0, 1)], -17.0 / det, epsilon = 1e-12);
        assert_relative_eq!(fit.xtx_inverse[(1, 1)], 4.0 / det, epsilon = 1e-12);
    }

    #[test]
    fn collinear_design_is_rejected() {
        // Second column is exactly twice the first.
        let design = Matrix::from_fn(6, 2, |r, c| {
            let base = r as f64 + 1.0;
            if c == 0 {
                base
            } else {
                2.0 * base
            }
        });
        let y = vec![1.0; 6];
        assert!(matches!(
            least_squares(&design, &y),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // Symmetric matrix with eigenvalues 3 and 1 (vectors along (1,1), (1,-1)).
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let eig = symmetric_eigen(&m).unwrap();
        assert_relative_eq!(eig.values[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(eig.values[1], 1.0, epsilon = 1e-12);
        let v0: (f64, f64) = (eig.vectors[(0, 0)], eig.vectors[(1, 0)]);
        assert_relative_eq!(v0.0.abs(), v0.1.abs(), epsilon = 1e-12);
    }

    #[test]
    fn jacobi_handles_diagonal_and_empty() {
        let m = Matrix::from_rows(&[vec![5.0, 0.0], vec![0.0, -1.0]]);
        let eig = symmetric_eigen(&m).unwrap();
        assert_eq!(eig.values, vec![5.0, -1.0]);
        let empty: Matrix<f64> = Matrix::filled(0, 0, 0.0);
        assert!(symmetric_eigen(&empty).unwrap().values.is_empty());
    }
}
