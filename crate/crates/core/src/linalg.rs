//! Small dense linear-algebra kernels.
//!
//! Everything here targets the low-dimensional matrices that show up in the
//! samplers (covariance factors, Gaussian conditionals, trace covariances):
//! a few tens of rows, occasionally a couple of thousand for the
//! data-augmentation baseline. Plain O(d^3) algorithms are the right tool at
//! that scale.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.ncols(),
        });
    }
    let mut l = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::Numerical(format!(
                        "cholesky pivot {s:.3e} at row {i}: matrix not positive definite"
                    )));
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solves L x = b for lower-triangular L.
pub fn solve_lower(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let d = b.len();
    let mut x = b.clone();
    for i in 0..d {
        for j in 0..i {
            let v = l[[i, j]] * x[j];
            x[i] -= v;
        }
        x[i] /= l[[i, i]];
    }
    x
}

/// Solves L^T x = b given the lower-triangular L (back-substitution).
pub fn solve_lower_transpose(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let d = b.len();
    let mut x = b.clone();
    for i in (0..d).rev() {
        for j in (i + 1)..d {
            let v = l[[j, i]] * x[j];
            x[i] -= v;
        }
        x[i] /= l[[i, i]];
    }
    x
}

/// Solves A x = b where A = L L^T.
pub fn chol_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// log |det A| for A = L L^T.
pub fn chol_logdet(l: &Array2<f64>) -> f64 {
    (0..l.nrows()).map(|i| l[[i, i]].ln()).sum::<f64>() * 2.0
}

/// Inverse and log |det| of a general square matrix via Gauss-Jordan with
/// partial pivoting. Fails on (numerically) singular input.
pub fn invert(a: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.ncols(),
        });
    }
    let mut work = a.clone();
    let mut inv = Array2::<f64>::eye(d);
    let mut log_abs_det = 0.0;
    for col in 0..d {
        let mut pivot_row = col;
        let mut pivot_val = work[[col, col]].abs();
        for r in (col + 1)..d {
            let v = work[[r, col]].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val < 1e-300 || !pivot_val.is_finite() {
            return Err(Error::Numerical(format!(
                "singular matrix: pivot {pivot_val:.3e} in column {col}"
            )));
        }
        if pivot_row != col {
            for c in 0..d {
                work.swap([col, c], [pivot_row, c]);
                inv.swap([col, c], [pivot_row, c]);
            }
        }
        let p = work[[col, col]];
        log_abs_det += p.abs().ln();
        for c in 0..d {
            work[[col, c]] /= p;
            inv[[col, c]] /= p;
        }
        for r in 0..d {
            if r == col {
                continue;
            }
            let f = work[[r, col]];
            if f == 0.0 {
                continue;
            }
            for c in 0..d {
                let w = work[[col, c]] * f;
                work[[r, c]] -= w;
                let v = inv[[col, c]] * f;
                inv[[r, c]] -= v;
            }
        }
    }
    Ok((inv, log_abs_det))
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns of the second array.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.ncols(),
        });
    }
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(d);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vecs = Array2::<f64>::zeros((d, d));
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..d {
            vecs[[r, new_col]] = v[[r, old_col]];
        }
    }
    Ok((vals, vecs))
}
