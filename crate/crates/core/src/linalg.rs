//! Rank-thresholded SVD and minimum-norm least squares.
//!
//! QR comes from `nalgebra`; the SVD is a QR-preconditioned one-sided Jacobi
//! iteration. Order-2 [`DenseTensor`]s are column-major, which is nalgebra's
//! native storage, so conversion is a copy of the data slice.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Truncated singular value decomposition `U diag(s) V^T`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// rows x kept, orthonormal columns.
    pub u: DenseTensor,
    /// Non-increasing, length kept.
    pub s: Vec<f64>,
    /// cols x kept, orthonormal columns.
    pub v: DenseTensor,
    pub kept: usize,
}

impl SvdResult {
    /// `U diag(s) V^T` as a rows x cols matrix.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        let rows = self.u.rows();
        let cols = self.v.rows();
        let mut out = vec![0.0; rows * cols];
        for t in 0..self.kept {
            let u = &self.u.data()[t * rows..(t + 1) * rows];
            let v = &self.v.data()[t * cols..(t + 1) * cols];
            for (c, &vc) in v.iter().enumerate() {
                let w = self.s[t] * vc;
                for (o, &ur) in out[c * rows..(c + 1) * rows].iter_mut().zip(u) {
                    *o += ur * w;
                }
            }
        }
        DenseTensor::matrix(rows, cols, out)
    }
}

fn to_nalgebra(m: &DenseTensor) -> Result<DMatrix<f64>> {
    if m.order() != 2 {
        return Err(Error::Shape(format!(
            "expected a matrix, got order {}",
            m.order()
        )));
    }
    Ok(DMatrix::from_column_slice(m.rows(), m.cols(), m.data()))
}

struct FullSvd {
    u: DMatrix<f64>,
    s: Vec<f64>,
    v_t: DMatrix<f64>,
    /// Column/row positions of the singular values in non-increasing order.
    order: Vec<usize>,
}

fn full_svd(a: DMatrix<f64>) -> Result<FullSvd> {
    let (m, n) = a.shape();
    if m < n {
        let t = full_svd(a.transpose())?;
        return Ok(FullSvd {
            u: t.v_t.transpose(),
            s: t.s,
            v_t: t.u.transpose(),
            order: t.order,
        });
    }
    // Tall or square: reduce to the n x n triangular factor first.
    let (q, r) = if m > n {
        let qr = a.qr();
        (Some(qr.q()), qr.r())
    } else {
        (None, a)
    };
    let (u_r, s, v) = jacobi_svd(r)?;
    let u = match q {
        Some(q) => q * u_r,
        None => u_r,
    };
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    Ok(FullSvd {
        u,
        s,
        v_t: v.transpose(),
        order,
    })
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// One-sided Jacobi SVD of a square matrix: plane rotations orthogonalize the
/// columns of `w` while `v` accumulates them, so `a = w v^T` with the column
/// norms of `w` as singular values.
fn jacobi_svd(mut w: DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let n = w.ncols();
    let mut v = DMatrix::<f64>::identity(n, n);
    // Columns at this size are rounding noise and count as zero.
    let floor = (f64::EPSILON * w.norm()).powi(2);
    let tol = f64::EPSILON * (w.nrows() as f64).sqrt();
    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if alpha <= floor
                    || beta <= floor
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + zeta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Numerical("Jacobi SVD did not converge".into()));
    }
    let s: Vec<f64> = (0..n)
        .map(|j| {
            let norm2 = w.column(j).norm_squared();
            if norm2 <= floor {
                0.0
            } else {
                norm2.sqrt()
            }
        })
        .collect();
    for (j, &sj) in s.iter().enumerate() {
        if sj > 0.0 {
            w.column_mut(j).unscale_mut(sj);
        }
    }
    complete_basis(&mut w, &s);
    Ok((w, s, v))
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}

/// Replaces the columns belonging to zero singular values by unit vectors
/// orthogonal to every other column.
fn complete_basis(u: &mut DMatrix<f64>, s: &[f64]) {
    let n = u.nrows();
    let mut candidate = 0;
    for j in 0..s.len() {
        if s[j] > 0.0 {
            continue;
        }
        while candidate < n {
            let mut x = DVector::<f64>::zeros(n);
            x[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for k in 0..s.len() {
                    if k != j {
                        let proj = u.column(k).dot(&x);
                        x.axpy(-proj, &u.column(k), 1.0);
                    }
                }
            }
            let norm = x.norm();
            if norm > 0.5 {
                u.set_column(j, &(x / norm));
                break;
            }
        }
    }
}

/// Keeps the `min(max_rank, rows, cols)` leading singular triplets.
pub fn truncated_svd(m: &DenseTensor, max_rank: usize) -> Result<SvdResult> {
    if max_rank == 0 {
        return Err(Error::InvalidArgument("max_rank must be at least 1".into()));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("SVD input"));
    }
    let a = to_nalgebra(m)?;
    let (rows, cols) = a.shape();
    let kept = max_rank.min(rows).min(cols);
    let svd = full_svd(a)?;

    let mut u = Vec::with_capacity(rows * kept);
    let mut v = Vec::with_capacity(cols * kept);
    let mut s = Vec::with_capacity(kept);
    for &t in &svd.order[..kept] {
        s.push(svd.s[t]);
        u.extend(svd.u.column(t).iter());
        v.extend(svd.v_t.row(t).iter());
    }
    Ok(SvdResult {
        u: DenseTensor::matrix(rows, kept, u)?,
        s,
        v: DenseTensor::matrix(cols, kept, v)?,
        kept,
    })
}

/// Least-squares solution of `a x = b`.
///
/// With `ridge == 0` this is the minimum-norm minimizer, discarding singular
/// values below `max(m, p) * eps * s_1`. With `ridge > 0` it returns
/// `(a^T a + ridge I)^{-1} a^T b`, computed from the stacked system
/// `[a; sqrt(ridge) I] x = [b; 0]`.
pub fn lstsq_minnorm(a: &DenseTensor, b: &[f64], ridge: f64) -> Result<Vec<f64>> {
    if a.order() != 2 {
        return Err(Error::Shape(format!(
            "least squares needs a matrix, got order {}",
            a.order()
        )));
    }
    lstsq_raw(a.data(), a.rows(), a.cols(), b, ridge)
}

/// [`lstsq_minnorm`] on a column-major `m x p` slice; `m` may be zero.
pub(crate) fn lstsq_raw(a: &[f64], m: usize, p: usize, b: &[f64], ridge: f64) -> Result<Vec<f64>> {
    if a.len() != m * p || b.len() != m {
        return Err(Error::Shape(format!(
            "least squares with a {m}x{p} system and a right-hand side of length {}",
            b.len()
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {ridge}")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares system"));
    }
    if m == 0 {
        return Ok(vec![0.0; p]);
    }

    if ridge > 0.0 {
        let root = ridge.sqrt();
        let stacked = DMatrix::from_fn(m + p, p, |r, c| {
            if r < m {
                a[r + c * m]
            } else if r - m == c {
                root
            } else {
                0.0
            }
        });
        let mut rhs = DVector::zeros(m + p);
        rhs.rows_mut(0, m).copy_from_slice(b);
        return qr_solve(stacked, rhs)
            .ok_or_else(|| Error::Numerical("ridge system is singular".into()));
    }

    let mat = DMatrix::from_column_slice(m, p, a);
    let rhs = DVector::from_column_slice(b);
    if m >= p {
        if let Some(x) = qr_solve(mat.clone(), rhs.clone()) {
            return Ok(x);
        }
    }
    pinv_solve(mat, &rhs)
}

/// Householder QR solve for tall systems. Returns `None` when the triangular
/// factor looks rank deficient, so the caller can fall back to the SVD.
fn qr_solve(a: DMatrix<f64>, mut b: DVector<f64>) -> Option<Vec<f64>> {
    let p = a.ncols();
    let qr = a.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
    let largest = diag.iter().cloned().fold(0.0, f64::max);
    let smallest = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(largest > 0.0) || smallest <= f64::EPSILON.sqrt() * largest {
        return None;
    }
    qr.q_tr_mul(&mut b);
    let head = b.rows(0, p).into_owned();
    let x = r.solve_upper_triangular(&head)?;
    Some(x.iter().copied().collect())
}

fn pinv_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<Vec<f64>> {
    let (m, p) = a.shape();
    let svd = full_svd(a)?;
    let mut x = vec![0.0; p];
    let Some(&top) = svd.order.first() else {
        return Ok(x);
    };
    let cutoff = m.max(p) as f64 * f64::EPSILON * svd.s[top];
    for &t in &svd.order {
        let sigma = svd.s[t];
        if !(sigma > cutoff) {
            break;
        }
        let coeff = svd.u.column(t).dot(b) / sigma;
        for (xi, &vi) in x.iter_mut().zip(svd.v_t.row(t).iter()) {
            *xi += coeff * vi;
        }
    }
    Ok(x)
}

/// Thin QR: `a = q r` with `q` m x k orthonormal and `r` k x p upper
/// triangular, `k = min(m, p)`.
pub fn thin_qr(a: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    if !a.is_finite() {
        return Err(Error::NonFinite("QR input"));
    }
    let mat = to_nalgebra(a)?;
    let (m, p) = mat.shape();
    let k = m.min(p);
    let qr = mat.qr();
    let q = qr.q();
    let r = qr.r();
    Ok((
        DenseTensor::matrix(m, k, q.as_slice().to_vec())?,
        DenseTensor::matrix(k, p, r.as_slice().to_vec())?,
    ))
}
