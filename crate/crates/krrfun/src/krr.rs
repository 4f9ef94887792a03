//! Kernel ridge regression: fitting, prediction, the noise-variance
//! estimator, and leave-one-out hyperparameter selection.
//!
//! A fit solves `(K + lambda n I) alpha = y` once by Cholesky and keeps the
//! factor around; every downstream quantity (predictions, functional
//! variances, leverages) reuses it. Residuals come from the exact identity
//! `y_i - fhat(x_i) = lambda n alpha_i`, so fitted values are never formed by
//! a second kernel pass.

use crate::kernel::{KernelError, MaternKernel};
use crate::linalg::{LinalgError, SpdFactor};
use crate::scalar::Real;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KrrError {
    #[error("dataset must contain at least one observation")]
    EmptyData,
    #[error("design has {got} columns, expected {expected}")]
    DimMismatch { got: usize, expected: usize },
    #[error("dataset contains non-finite values")]
    NonFiniteData,
    #[error("ridge parameter lambda must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("leave-one-out leverage degenerates at observation {index} (1 - H_ii <= 1e-12)")]
    DegenerateLeverage { index: usize },
    #[error("no hyperparameter candidate produced a finite cross-validation score")]
    NoViableCandidate,
}

/// Observations `(x_i, y_i)` with `x_i` the rows of an `n x d` design.
#[derive(Debug, Clone)]
pub struct Dataset<R> {
    xs: Array2<R>,
    ys: Array1<R>,
}

impl<R: Real> Dataset<R> {
    pub fn new(xs: Array2<R>, ys: Array1<R>) -> Result<Self, KrrError> {
        if xs.nrows() == 0 || xs.ncols() == 0 {
            return Err(KrrError::EmptyData);
        }
        if xs.nrows() != ys.len() {
            return Err(KrrError::DimMismatch { got: ys.len(), expected: xs.nrows() });
        }
        if xs.iter().any(|v| !v.is_finite()) || ys.iter().any(|v| !v.is_finite()) {
            return Err(KrrError::NonFiniteData);
        }
        Ok(Self { xs, ys })
    }

    pub fn n(&self) -> usize {
        self.xs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.xs.ncols()
    }

    pub fn xs(&self) -> ArrayView2<'_, R> {
        self.xs.view()
    }

    pub fn ys(&self) -> ArrayView1<'_, R> {
        self.ys.view()
    }

    /// Same design, negated responses (used to turn maximization into
    /// minimization).
    pub fn negated(&self) -> Self {
        Self { xs: self.xs.clone(), ys: self.ys.mapv(|v| -v) }
    }
}

/// A fitted kernel ridge regressor.
#[derive(Debug, Clone)]
pub struct KrrFit<R> {
    kernel: MaternKernel<R>,
    xs: Array2<R>,
    ys: Array1<R>,
    factor: SpdFactor<R>,
    alpha: Array1<R>,
    lambda: R,
    sigma2_hat: R,
}

impl<R: Real> KrrFit<R> {
    /// Fit with an explicit `lambda`, forming the kernel matrix internally.
    pub fn fit(data: &Dataset<R>, kernel: MaternKernel<R>, lambda: R) -> Result<Self, KrrError> {
        if kernel.dim() != data.dim() {
            return Err(KrrError::DimMismatch { got: data.dim(), expected: kernel.dim() });
        }
        let gram = kernel.gram(data.xs());
        Self::fit_with_gram(data, kernel, lambda, &gram)
    }

    /// Fit reusing a precomputed kernel matrix (the matrix depends only on
    /// the design and `phi`, so sweeps over `lambda` can share it).
    pub fn fit_with_gram(
        data: &Dataset<R>,
        kernel: MaternKernel<R>,
        lambda: R,
        gram: &Array2<R>,
    ) -> Result<Self, KrrError> {
        if kernel.dim() != data.dim() {
            return Err(KrrError::DimMismatch { got: data.dim(), expected: kernel.dim() });
        }
        if !(lambda > R::zero() && lambda.is_finite()) {
            return Err(KrrError::InvalidLambda(lambda.as_f64()));
        }
        let n = data.n();
        assert_eq!(gram.nrows(), n, "kernel matrix size mismatch");
        let lam_n = lambda * R::of_usize(n);
        let mut a = gram.clone();
        for i in 0..n {
            a[[i, i]] = a[[i, i]] + lam_n;
        }
        let factor = SpdFactor::new(a)?;
        let alpha = factor.solve_vec(data.ys());
        // sigma2_hat = mean squared residual; residual_i = lambda n alpha_i.
        let ss = alpha.iter().map(|&v| v * v).sum::<R>();
        let sigma2_hat = lam_n * lam_n * ss / R::of_usize(n);
        Ok(Self {
            kernel,
            xs: data.xs.clone(),
            ys: data.ys.clone(),
            factor,
            alpha,
            lambda,
            sigma2_hat,
        })
    }

    pub fn n(&self) -> usize {
        self.xs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.xs.ncols()
    }

    pub fn kernel(&self) -> &MaternKernel<R> {
        &self.kernel
    }

    pub fn lambda(&self) -> R {
        self.lambda
    }

    /// The absolute ridge `lambda * n` added to the kernel matrix diagonal.
    pub fn lambda_n(&self) -> R {
        self.lambda * R::of_usize(self.n())
    }

    /// Estimated noise variance `mean((y_i - fhat(x_i))^2)`.
    pub fn sigma2_hat(&self) -> R {
        self.sigma2_hat
    }

    /// Representer coefficients `alpha = (K + lambda n I)^{-1} y`.
    pub fn coefficients(&self) -> ArrayView1<'_, R> {
        self.alpha.view()
    }

    pub fn design(&self) -> ArrayView2<'_, R> {
        self.xs.view()
    }

    pub fn responses(&self) -> ArrayView1<'_, R> {
        self.ys.view()
    }

    pub fn factor(&self) -> &SpdFactor<R> {
        &self.factor
    }

    /// `fhat(x) = sum_i alpha_i K(x, x_i)`.
    pub fn predict(&self, x: ArrayView1<R>) -> R {
        self.kernel.column(x, self.xs.view()).dot(&self.alpha)
    }

    /// `D^alpha fhat(x)`, differentiating the kernel expansion term by term.
    pub fn predict_deriv(&self, alpha_idx: &[u32], x: ArrayView1<R>) -> Result<R, KernelError> {
        let col = self.kernel.deriv_column(alpha_idx, x, self.xs.view())?;
        Ok(col.dot(&self.alpha))
    }

    /// Fitted values at the design points, via the residual identity.
    pub fn fitted_values(&self) -> Array1<R> {
        let lam_n = self.lambda_n();
        let mut out = self.ys.clone();
        for (o, &a) in out.iter_mut().zip(self.alpha.iter()) {
            *o = *o - lam_n * a;
        }
        out
    }

    /// Leave-one-out cross-validation score
    /// `mean((y_i - fhat_{-i}(x_i))^2) = mean((alpha_i / (A^{-1})_ii)^2)`.
    ///
    /// Fails with [`KrrError::DegenerateLeverage`] when some
    /// `1 - H_ii = lambda n (A^{-1})_ii` falls at or below `1e-12`.
    pub fn loocv_score(&self) -> Result<R, KrrError> {
        let inv_diag = self.factor.inv_diag();
        let lam_n = self.lambda_n();
        let thresh = R::of(1e-12);
        let mut acc = R::zero();
        for (i, (&a, &d)) in self.alpha.iter().zip(inv_diag.iter()).enumerate() {
            if lam_n * d <= thresh {
                return Err(KrrError::DegenerateLeverage { index: i });
            }
            let r = a / d;
            acc = acc + r * r;
        }
        Ok(acc / R::of_usize(self.n()))
    }
}

/// Candidate grid for hyperparameter selection. `lambda = mult / n` for each
/// multiplier, crossed with each `phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid<R> {
    pub phis: Vec<R>,
    pub lambda_mults: Vec<R>,
}

impl<R: Real> Default for HyperGrid<R> {
    fn default() -> Self {
        Self {
            phis: [0.5, 1.0, 2.0, 4.0, 8.0].iter().map(|&v| R::of(v)).collect(),
            lambda_mults: [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0]
                .iter()
                .map(|&v| R::of(v))
                .collect(),
        }
    }
}

/// Pick `(phi, lambda)` on the grid by leave-one-out cross-validation and
/// return the refitted model.
///
/// Candidates that fail to factor or whose leverage degenerates are skipped.
/// Ties are broken toward smaller `lambda`, then smaller `phi`.
pub fn select_hyperparams<R: Real>(
    data: &Dataset<R>,
    nu: f64,
    grid: &HyperGrid<R>,
) -> Result<KrrFit<R>, KrrError> {
    if grid.phis.is_empty() || grid.lambda_mults.is_empty() {
        return Err(KrrError::NoViableCandidate);
    }
    let n = R::of_usize(data.n());
    let mut scores = vec![vec![None; grid.lambda_mults.len()]; grid.phis.len()];
    for (pi, &phi) in grid.phis.iter().enumerate() {
        let kernel = MaternKernel::new(nu, phi, data.dim())?;
        let gram = kernel.gram(data.xs());
        for (li, &mult) in grid.lambda_mults.iter().enumerate() {
            let lambda = mult / n;
            let fit = match KrrFit::fit_with_gram(data, kernel.clone(), lambda, &gram) {
                Ok(f) => f,
                Err(KrrError::Linalg(_)) => continue,
                Err(e) => return Err(e),
            };
            match fit.loocv_score() {
                Ok(s) if s.is_finite() => scores[pi][li] = Some(s),
                Ok(_) | Err(KrrError::DegenerateLeverage { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    // Scan lambda-major, phi-minor, keeping strictly better scores, so ties
    // resolve to the smallest lambda and then the smallest phi.
    let mut best: Option<(R, usize, usize)> = None;
    for (li, _) in grid.lambda_mults.iter().enumerate() {
        for (pi, _) in grid.phis.iter().enumerate() {
            if let Some(s) = scores[pi][li] {
                if best.is_none_or(|(bs, _, _)| s < bs) {
                    best = Some((s, pi, li));
                }
            }
        }
    }
    let (_, pi, li) = best.ok_or(KrrError::NoViableCandidate)?;
    let kernel = MaternKernel::new(nu, grid.phis[pi], data.dim())?;
    let lambda = grid.lambda_mults[li] / n;
    KrrFit::fit(data, kernel, lambda)
}
