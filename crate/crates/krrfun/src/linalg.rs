//! Dense symmetric positive definite linear algebra.
//!
//! A blocked right-looking Cholesky backed by GEMM (`ndarray::linalg`) does
//! the heavy lifting; everything downstream (solves, inverse quadratic forms,
//! the diagonal of the inverse) reuses that one factorization. A cyclic
//! Jacobi eigensolver covers the small symmetric eigenproblems.

use crate::scalar::Real;
use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

/// Block size for the Cholesky and inverse-diagonal kernels.
const NB: usize = 128;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not positive definite (pivot {pivot} has reduced value {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is numerically singular")]
    Singular,
}

/// Lower Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct SpdFactor<R> {
    l: Array2<R>,
}

impl<R: Real> SpdFactor<R> {
    /// Factor `a` in place. Fails with the pivot index on the first
    /// non-positive (or non-finite) reduced diagonal entry.
    pub fn new(mut a: Array2<R>) -> Result<Self, LinalgError> {
        let (rows, cols) = a.dim();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        let n = rows;
        let mut k = 0;
        while k < n {
            let kb = NB.min(n - k);
            // Unblocked factorization of the diagonal block (columns < k were
            // already folded in by earlier trailing updates).
            for j in k..k + kb {
                let mut d = a[[j, j]];
                for s in k..j {
                    let v = a[[j, s]];
                    d = d - v * v;
                }
                if !(d > R::zero() && d.is_finite()) {
                    return Err(LinalgError::NotPositiveDefinite {
                        pivot: j,
                        value: d.as_f64(),
                    });
                }
                let ljj = d.sqrt();
                a[[j, j]] = ljj;
                for i in j + 1..k + kb {
                    let mut v = a[[i, j]];
                    for s in k..j {
                        v = v - a[[i, s]] * a[[j, s]];
                    }
                    a[[i, j]] = v / ljj;
                }
            }
            // Panel: rows below the block solve X L11^T = B, row by row
            // (rows are contiguous in memory).
            for i in k + kb..n {
                for j in k..k + kb {
                    let mut v = a[[i, j]];
                    for s in k..j {
                        v = v - a[[i, s]] * a[[j, s]];
                    }
                    a[[i, j]] = v / a[[j, j]];
                }
            }
            // Trailing update A22 -= P P^T, done per column block so only the
            // lower trapezoid is touched.
            if k + kb < n {
                let panel = a.slice(s![k + kb.., k..k + kb]).to_owned();
                let mut c0 = k + kb;
                while c0 < n {
                    let c1 = (c0 + NB).min(n);
                    let pa = panel.slice(s![c0 - (k + kb).., ..]);
                    let pb = panel.slice(s![c0 - (k + kb)..c1 - (k + kb), ..]);
                    let mut c = a.slice_mut(s![c0.., c0..c1]);
                    general_mat_mul(-R::one(), &pa, &pb.t(), R::one(), &mut c);
                    c0 = c1;
                }
            }
            k += kb;
        }
        for i in 0..n {
            for j in i + 1..n {
                a[[i, j]] = R::zero();
            }
        }
        Ok(Self { l: a })
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    /// The lower-triangular factor.
    pub fn lower(&self) -> ArrayView2<'_, R> {
        self.l.view()
    }

    /// In-place forward substitution `L x = b`.
    fn forward(&self, x: &mut Array1<R>) {
        let n = self.n();
        for i in 0..n {
            let dot = self.l.slice(s![i, 0..i]).dot(&x.slice(s![0..i]));
            x[i] = (x[i] - dot) / self.l[[i, i]];
        }
    }

    /// In-place back substitution `L^T x = b`, organized around contiguous
    /// rows of `L`.
    fn backward(&self, x: &mut Array1<R>) {
        let n = self.n();
        for i in (0..n).rev() {
            x[i] = x[i] / self.l[[i, i]];
            let xi = x[i];
            let lrow = self.l.slice(s![i, 0..i]);
            let mut head = x.slice_mut(s![0..i]);
            head.scaled_add(-xi, &lrow);
        }
    }

    /// `A^{-1} b`.
    pub fn solve_vec(&self, b: ArrayView1<R>) -> Array1<R> {
        assert_eq!(b.len(), self.n(), "right-hand side length mismatch");
        let mut x = b.to_owned();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    /// `A^{-1} B`, column by column.
    pub fn solve_mat(&self, b: ArrayView2<R>) -> Array2<R> {
        assert_eq!(b.nrows(), self.n(), "right-hand side row count mismatch");
        let mut out = Array2::zeros(b.dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve_vec(col));
        }
        out
    }

    /// `g^T A^{-1} h`, via half-solves so it is exact for `g = h`.
    pub fn quad_form_inv(&self, g: ArrayView1<R>, h: ArrayView1<R>) -> R {
        let mut wg = g.to_owned();
        self.forward(&mut wg);
        let mut wh = h.to_owned();
        self.forward(&mut wh);
        wg.dot(&wh)
    }

    /// `g^T A^{-2} g = ||A^{-1} g||^2`.
    pub fn quad_form_inv_sq(&self, g: ArrayView1<R>) -> R {
        let v = self.solve_vec(g);
        v.dot(&v)
    }

    /// Diagonal of `A^{-1}`, without forming the full inverse.
    ///
    /// Since `A^{-1} = L^{-T} L^{-1}`, entry `i` is the squared norm of
    /// column `i` of `L^{-1}`. Columns are materialized a block at a time by
    /// blocked forward substitution (GEMM for the off-diagonal updates) and
    /// discarded after their norms are accumulated.
    pub fn inv_diag(&self) -> Array1<R> {
        let n = self.n();
        let mut diag = Array1::zeros(n);
        let mut j0 = 0;
        while j0 < n {
            let jb = NB.min(n - j0);
            let m = n - j0;
            // w = L[j0.., j0..]^{-1} E, where E is the identity block.
            let mut w = Array2::<R>::zeros((m, jb));
            for t in 0..jb {
                w[[t, t]] = R::one();
            }
            let mut i0 = 0;
            while i0 < m {
                let ib = NB.min(m - i0);
                if i0 > 0 {
                    let lblock = self.l.slice(s![j0 + i0..j0 + i0 + ib, j0..j0 + i0]);
                    let (solved, mut cur) = w.view_mut().split_at(ndarray::Axis(0), i0);
                    let mut cur = cur.slice_mut(s![0..ib, ..]);
                    general_mat_mul(-R::one(), &lblock, &solved.view(), R::one(), &mut cur);
                }
                for t in 0..ib {
                    let row = j0 + i0 + t;
                    for s in 0..t {
                        let lv = self.l[[row, j0 + i0 + s]];
                        if lv != R::zero() {
                            for c in 0..jb {
                                let ws = w[[i0 + s, c]];
                                w[[i0 + t, c]] = w[[i0 + t, c]] - lv * ws;
                            }
                        }
                    }
                    let d = self.l[[row, row]];
                    for c in 0..jb {
                        w[[i0 + t, c]] = w[[i0 + t, c]] / d;
                    }
                }
                i0 += ib;
            }
            for t in 0..jb {
                let col = w.column(t);
                diag[j0 + t] = col.dot(&col);
            }
            j0 += jb;
        }
        diag
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns. Intended for the small matrices that arise here (covariances,
/// Hessians, PSD checks), not for large n.
pub fn sym_eigen<R: Real>(a: ArrayView2<R>) -> (Array1<R>, Array2<R>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.to_owned();
    let mut v: Array2<R> = Array2::eye(n);
    let frob = m.iter().map(|&x| x * x).sum::<R>().sqrt();
    let tol = R::of(1e-15) * frob.max(R::one());
    for _sweep in 0..64 {
        let mut off = R::zero();
        for i in 0..n {
            for j in 0..i {
                off = off + m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == R::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (R::of(2.0) * apq);
                let t = {
                    let denom = theta.abs() + (theta * theta + R::one()).sqrt();
                    if theta >= R::zero() {
                        R::one() / denom
                    } else {
                        -R::one() / denom
                    }
                };
                let c = R::one() / (t * t + R::one()).sqrt();
                let s = t * c;
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                m[[p, p]] = app - t * apq;
                m[[q, q]] = aqq + t * apq;
                m[[p, q]] = R::zero();
                m[[q, p]] = R::zero();
                for k in 0..n {
                    if k != p && k != q {
                        let akp = m[[k, p]];
                        let akq = m[[k, q]];
                        m[[k, p]] = c * akp - s * akq;
                        m[[p, k]] = m[[k, p]];
                        m[[k, q]] = s * akp + c * akq;
                        m[[q, k]] = m[[k, q]];
                    }
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).expect("finite eigenvalues"));
    let mut vals = Array1::zeros(n);
    let mut vecs = Array2::zeros((n, n));
    for (pos, &idx) in order.iter().enumerate() {
        vals[pos] = m[[idx, idx]];
        vecs.column_mut(pos).assign(&v.column(idx));
    }
    (vals, vecs)
}

/// `A^{-1/2}` of a symmetric positive definite matrix via its
/// eigendecomposition. Fails if the smallest eigenvalue is at or below
/// `1e-12` times the largest (or the largest is not positive).
pub fn sym_inv_sqrt<R: Real>(a: ArrayView2<R>) -> Result<Array2<R>, LinalgError> {
    let n = a.nrows();
    let (vals, vecs) = sym_eigen(a);
    let max = vals[n - 1];
    if !(max > R::zero()) || vals[0] <= R::of(1e-12) * max {
        return Err(LinalgError::Singular);
    }
    let mut out = Array2::zeros((n, n));
    for k in 0..n {
        let w = R::one() / vals[k].sqrt();
        let col = vecs.column(k);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] = out[[i, j]] + w * col[i] * col[j];
            }
        }
    }
    Ok(out)
}
