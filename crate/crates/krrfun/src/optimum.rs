//! Plug-in estimation of the minimizer of the regression function, with a
//! linearized sandwich confidence interval per coordinate.

use ndarray::{Array1, Array2, ArrayView1};
use thiserror::Error;

use crate::domain::Rect;
use crate::functional::{cov_matrix, Functional, FunctionalError};
use crate::kernel::KernelError;
use crate::krr::{KrrError, KrrFit};
use crate::linalg::{sym_eigen, sym_inv_sqrt};
use crate::scalar::Real;
use crate::special::normal_quantile;

/// Relative eigenvalue threshold below which a Hessian counts as singular.
const SINGULAR_RTOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum OptimumError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Krr(#[from] KrrError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error("search box dimension {box_dim} does not match fit dimension {fit_dim}")]
    DimMismatch { box_dim: usize, fit_dim: usize },
    #[error("grid_per_axis must be at least 16, got {0}")]
    GridTooCoarse(usize),
    #[error("estimated Hessian is numerically singular")]
    SingularHessian,
    #[error("estimated gradient covariance is not positive definite")]
    SingularCovariance,
    #[error("confidence level must lie strictly inside (0, 1)")]
    InvalidLevel,
}

/// Minimizer estimate together with the plug-in Hessian and gradient
/// covariance needed for the sandwich interval.
#[derive(Clone, Debug)]
pub struct OptimumResult<R> {
    pub x_min_hat: Vec<R>,
    pub f_min_hat: R,
    pub hessian_hat: Array2<R>,
    pub cov_hat: Array2<R>,
    pub n_grid: usize,
    pub newton_iters: usize,
    /// False when Newton refinement was skipped because the Hessian at the
    /// grid minimizer was singular.
    pub refined: bool,
}

/// Sensible scan density: dense in 1-d, coarser when the grid is squared.
pub fn default_grid_per_axis(dim: usize) -> usize {
    if dim == 1 {
        512
    } else {
        64
    }
}

pub const DEFAULT_NEWTON_ITERS: usize = 8;

/// Symmetric inverse via Jacobi eigendecomposition; `None` when the matrix
/// is singular in the `SINGULAR_RTOL` sense.
fn sym_inv<R: Real>(a: &Array2<R>) -> Option<Array2<R>> {
    let d = a.nrows();
    let (vals, vecs) = sym_eigen(a.view());
    let max = vals.iter().fold(R::zero(), |m, v| m.max(v.abs()));
    if max <= R::zero() {
        return None;
    }
    let mut inv = Array2::zeros((d, d));
    for k in 0..d {
        if vals[k].abs() <= R::of(SINGULAR_RTOL) * max {
            return None;
        }
        let col = vecs.column(k);
        for i in 0..d {
            for j in 0..d {
                inv[[i, j]] = inv[[i, j]] + col[i] * col[j] / vals[k];
            }
        }
    }
    Some(inv)
}

/// Plug-in Hessian of the fitted function at `x`, symmetrized.
pub fn hessian_hat<R: Real>(fit: &KrrFit<R>, x: ArrayView1<R>) -> Result<Array2<R>, OptimumError> {
    let d = fit.dim();
    let mut h = Array2::zeros((d, d));
    for i in 0..d {
        for j in i..d {
            let mut alpha = vec![0u32; d];
            alpha[i] += 1;
            alpha[j] += 1;
            let v = fit.predict_deriv(&alpha, x)?;
            h[[i, j]] = v;
            h[[j, i]] = v;
        }
    }
    Ok(h)
}

/// Covariance of the gradient estimate at `x`: the functional covariance of
/// the `d` first-derivative functionals under noise variance `sigma2`.
pub fn optimum_cov<R: Real>(
    fit: &KrrFit<R>,
    x: ArrayView1<R>,
    sigma2: R,
) -> Result<Array2<R>, OptimumError> {
    let d = fit.dim();
    let mut bound = Vec::with_capacity(d);
    for i in 0..d {
        let mut alpha = vec![0u32; d];
        alpha[i] = 1;
        let f = Functional::deriv(alpha, x.to_vec());
        bound.push(f.bind(fit.kernel(), fit.design())?);
    }
    Ok(cov_matrix(fit, &bound, sigma2))
}

/// Grid scan followed by box-projected Newton refinement with step halving.
/// Returns the minimizer, its fitted value, and whether refinement ran.
pub fn find_min<R: Real>(
    fit: &KrrFit<R>,
    rect: &Rect<R>,
    grid_per_axis: usize,
    newton_iters: usize,
) -> Result<(Vec<R>, R, bool), OptimumError> {
    if rect.dim() != fit.dim() {
        return Err(OptimumError::DimMismatch {
            box_dim: rect.dim(),
            fit_dim: fit.dim(),
        });
    }
    if grid_per_axis < 16 {
        return Err(OptimumError::GridTooCoarse(grid_per_axis));
    }
    let d = rect.dim();
    let g = grid_per_axis;
    let total = g.pow(d as u32);

    // Lexicographic scan, first axis most significant; ties keep the
    // earliest point, so constant surfaces resolve to the smallest corner.
    let axis = |j: usize, t: usize| -> R {
        rect.lo()[j]
            + (rect.hi()[j] - rect.lo()[j]) * R::of_usize(t) / R::of_usize(g - 1)
    };
    let mut best_x = vec![R::zero(); d];
    let mut best_f = R::infinity();
    let mut x = vec![R::zero(); d];
    for idx in 0..total {
        let mut rem = idx;
        for j in (0..d).rev() {
            x[j] = axis(j, rem % g);
            rem /= g;
        }
        let f = fit.predict(ArrayView1::from(&x[..]));
        if f < best_f {
            best_f = f;
            best_x.copy_from_slice(&x);
        }
    }

    // Newton refinement; a singular Hessian at the start skips it.
    let mut refined = false;
    let mut cur_x = best_x.clone();
    let mut cur_f = best_f;
    for iter in 0..newton_iters {
        let h = hessian_hat(fit, ArrayView1::from(&cur_x[..]))?;
        let hinv = match sym_inv(&h) {
            Some(m) => m,
            None => break,
        };
        if iter == 0 {
            refined = true;
        }
        let mut grad = Array1::zeros(d);
        for i in 0..d {
            let mut alpha = vec![0u32; d];
            alpha[i] = 1;
            grad[i] = fit.predict_deriv(&alpha, ArrayView1::from(&cur_x[..]))?;
        }
        let mut step: Array1<R> = hinv.dot(&grad);
        if step.iter().any(|v| !v.is_finite()) {
            break;
        }
        // Halve until the fitted value strictly decreases (at most 20 times).
        let mut accepted = false;
        for _ in 0..=20 {
            let cand: Vec<R> = (0..d).map(|j| cur_x[j] - step[j]).collect();
            let cand = rect.clamp(&cand);
            let f = fit.predict(ArrayView1::from(&cand[..]));
            if f < cur_f {
                let moved = cand
                    .iter()
                    .zip(&cur_x)
                    .fold(R::zero(), |m, (a, b)| m.max((*a - *b).abs()));
                cur_x = cand;
                cur_f = f;
                accepted = true;
                if moved <= R::of(1e-14) {
                    return Ok((cur_x, cur_f, refined));
                }
                break;
            }
            step.mapv_inplace(|v| v * R::of(0.5));
        }
        if !accepted {
            break;
        }
    }
    Ok((cur_x, cur_f, refined))
}

/// Full minimizer workflow: search, then plug-in Hessian and gradient
/// covariance (with `sigma2 = fit.sigma2_hat()`) at the estimate.
pub fn estimate_optimum<R: Real>(
    fit: &KrrFit<R>,
    rect: &Rect<R>,
    grid_per_axis: usize,
    newton_iters: usize,
) -> Result<OptimumResult<R>, OptimumError> {
    let (x_min_hat, f_min_hat, refined) = find_min(fit, rect, grid_per_axis, newton_iters)?;
    let xv = ArrayView1::from(&x_min_hat[..]);
    let hessian = hessian_hat(fit, xv)?;
    let cov = optimum_cov(fit, xv, fit.sigma2_hat())?;
    Ok(OptimumResult {
        x_min_hat,
        f_min_hat,
        hessian_hat: hessian,
        cov_hat: cov,
        n_grid: grid_per_axis,
        newton_iters,
        refined,
    })
}

/// Per-coordinate sandwich interval `x_i ± z sqrt(S_ii)` with
/// `S = H^{-1} C H^{-1}`.
pub fn optimum_ci<R: Real>(
    result: &OptimumResult<R>,
    level: R,
) -> Result<Vec<(R, R)>, OptimumError> {
    if !(level > R::zero() && level < R::one()) {
        return Err(OptimumError::InvalidLevel);
    }
    let hinv = sym_inv(&result.hessian_hat).ok_or(OptimumError::SingularHessian)?;
    let sandwich = hinv.dot(&result.cov_hat).dot(&hinv);
    let z = normal_quantile((R::one() + level) * R::of(0.5));
    Ok((0..result.x_min_hat.len())
        .map(|i| {
            let hw = z * sandwich[[i, i]].max(R::zero()).sqrt();
            (result.x_min_hat[i] - hw, result.x_min_hat[i] + hw)
        })
        .collect())
}

/// CLT diagnostic `COV^{-1/2} H (x_hat - x_true)`; approximately standard
/// normal per coordinate when the model assumptions hold.
pub fn standardized_optimum_stat<R: Real>(
    result: &OptimumResult<R>,
    x_true: &[R],
) -> Result<Vec<R>, OptimumError> {
    let d = result.x_min_hat.len();
    assert_eq!(x_true.len(), d, "x_true dimension mismatch");
    let root = sym_inv_sqrt(result.cov_hat.view()).map_err(|_| OptimumError::SingularCovariance)?;
    let diff = Array1::from_iter((0..d).map(|i| result.x_min_hat[i] - x_true[i]));
    Ok(root.dot(&result.hessian_hat.dot(&diff)).to_vec())
}
