use super::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// Largest accepted condition estimate of the normal matrix in [`least_squares`].
pub const MAX_CONDITION: f64 = 1e12;

/// Eigen-decomposition of a small symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector of `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations on a row-major `n × n` symmetric matrix.
pub fn symmetric_eigen(n: usize, a: &[f64]) -> SymmetricEigen {
    assert_eq!(a.len(), n * n);
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq == 0.0 {
                    continue;
                }
                // Off-diagonal entries this small no longer move any eigenvalue.
                if apq.abs() <= 1e-3 * f64::EPSILON * (app.abs() * aqq.abs()).sqrt()
                    || apq.abs() < 1e-300
                {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    SymmetricEigen {
        values: order.iter().map(|&k| a[k * n + k]).collect(),
        vectors: order
            .iter()
            .map(|&k| (0..n).map(|i| v[i * n + k]).collect())
            .collect(),
    }
}

/// Unit right singular vector of the smallest singular value, together with
/// all singular values in ascending order.
pub fn smallest_right_singular(a: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.cols();
    let eig = symmetric_eigen(n, &a.gram());
    let sigmas = eig.values.iter().map(|l| l.max(0.0).sqrt()).collect();
    let mut v = eig.vectors[0].clone();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    // Sign convention: last clearly nonzero entry positive.
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if let Some(last) = v.iter().rev().find(|x| x.abs() > 1e-12 * scale) {
        if *last < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    (v, sigmas)
}

/// Unit vector minimizing `‖A v‖₂` for a matrix with four columns.
pub fn nullspace_min(a: &DenseMatrix) -> Result<[f64; 4]> {
    if a.cols() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "null-space solve expects 4 columns, got {}",
            a.cols()
        )));
    }
    if a.rows() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "null-space solve expects at least 2 rows, got {}",
            a.rows()
        )));
    }
    let (v, _) = smallest_right_singular(a);
    Ok([v[0], v[1], v[2], v[3]])
}

/// Gaussian elimination with partial pivoting on a row-major `n × n` system.
/// Returns `None` when a pivot vanishes.
pub fn solve_dense(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= m[col * n + k] * x[k];
        }
        x[col] = s / m[col * n + col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// `argmin_s ‖J s + r‖₂` through the normal equations.
pub fn least_squares(j: &DenseMatrix, r: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (j.rows(), j.cols());
    if r.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "residual of length {} for {m} rows",
            r.len()
        )));
    }
    if m < n {
        return Err(Error::DimensionMismatch(format!(
            "underdetermined system ({m} rows, {n} unknowns)"
        )));
    }
    let g = j.gram();
    let eig = symmetric_eigen(n, &g);
    let (lo, hi) = (eig.values[0], eig.values[n - 1]);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let mut rhs = vec![0.0; n];
    for (i, ri) in r.iter().enumerate().take(m) {
        for (acc, a) in rhs.iter_mut().zip(j.row(i)) {
            *acc -= a * ri;
        }
    }
    cholesky_solve(n, &g, &rhs).ok_or(Error::Singular { condition })
}

fn cholesky_solve(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..=i {
            let s = a[i * n + k] - (0..k).map(|p| l[i * n + p] * l[k * n + p]).sum::<f64>();
            if i == k {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + k] = s / l[k * n + k];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|p| l[i * n + p] * y[p]).sum::<f64>()) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|p| l[p * n + i] * x[p]).sum::<f64>()) / l[i * n + i];
    }
    Some(x)
}
