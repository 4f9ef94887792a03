//! Linear functionals of the regression function: estimates, exact
//! finite-sample variances, confidence intervals, and bias diagnostics.
//!
//! A functional `L` (point evaluation, derivative evaluation, or an L2 inner
//! product discretized by Gauss-Legendre quadrature) is bound to a kernel and
//! design, which materializes the weight vector `g(X) = [L K(., x_i)]`. For
//! a ridge fit with `A = K + lambda n I`:
//!
//! - estimate: `L(fhat) = g(X)^T alpha`
//! - variance: `Var = sigma^2 g(X)^T A^{-2} g(X)`, exact at finite n
//! - worst-case bias over the unit RKHS ball: `||ghat - g||_H` with
//!   `ghat = K(., X) A^{-1} g(X)`
//!
//! The same machinery applied to a noiseless fit of a known kernel expansion
//! gives the exact bias through two independent computational routes, which
//! the test suite pits against each other.

use crate::domain::Rect;
use crate::kernel::{multi_index_order, KernelError, MaternKernel, MultiIndex};
use crate::krr::{KrrError, KrrFit};
use crate::linalg::{LinalgError, SpdFactor};
use crate::quadrature::tensor_rule;
use crate::scalar::Real;
use crate::special::normal_quantile;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// A scalar field used as the weight in an L2 inner-product functional.
pub type ScalarField<R> = Arc<dyn Fn(&[R]) -> R + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunctionalError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("confidence level must be strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
    #[error(
        "worst-case bias needs ||g||_H, unavailable for an order-{order} \
         derivative functional under nu = {nu}"
    )]
    WorstCaseUnavailable { order: u32, nu: f64 },
    #[error("worst-case bias radicand is {0}, beyond the roundoff clamp")]
    NumericalBreakdown(f64),
    #[error("functional dimension {got} does not match kernel dimension {expected}")]
    DimMismatch { got: usize, expected: usize },
}

/// Specification of a linear functional, before it is bound to a kernel and
/// design.
#[derive(Clone)]
pub enum Functional<R> {
    /// `L(f) = f(x0)`.
    Point { x0: Vec<R> },
    /// `L(f) = D^alpha f(x0)`, `1 <= |alpha| <= 2`.
    Deriv { alpha: MultiIndex, x0: Vec<R> },
    /// `L(f) = integral of f(s) h(s) ds` over `rect`, discretized by a
    /// tensor Gauss-Legendre rule with `quad_order` nodes per axis. All
    /// downstream identities are exact for the discretized functional.
    L2 { h: ScalarField<R>, rect: Rect<R>, quad_order: usize },
}

impl<R> fmt::Debug for Functional<R>
where
    R: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Point { x0 } => f.debug_struct("Point").field("x0", x0).finish(),
            Functional::Deriv { alpha, x0 } => f
                .debug_struct("Deriv")
                .field("alpha", alpha)
                .field("x0", x0)
                .finish(),
            Functional::L2 { rect, quad_order, .. } => f
                .debug_struct("L2")
                .field("rect", rect)
                .field("quad_order", quad_order)
                .finish(),
        }
    }
}

impl<R: Real> Functional<R> {
    pub fn point(x0: Vec<R>) -> Self {
        Functional::Point { x0 }
    }

    pub fn deriv(alpha: MultiIndex, x0: Vec<R>) -> Self {
        Functional::Deriv { alpha, x0 }
    }

    pub fn l2(h: ScalarField<R>, rect: Rect<R>, quad_order: usize) -> Self {
        assert!(quad_order >= 1, "quadrature order must be at least 1");
        Functional::L2 { h, rect, quad_order }
    }

    pub fn dim(&self) -> usize {
        match self {
            Functional::Point { x0 } => x0.len(),
            Functional::Deriv { x0, .. } => x0.len(),
            Functional::L2 { rect, .. } => rect.dim(),
        }
    }

    /// Materialize the weight vector `g(X)` for a kernel and design.
    pub fn bind(
        &self,
        kernel: &MaternKernel<R>,
        xs: ArrayView2<R>,
    ) -> Result<BoundFunctional<R>, FunctionalError> {
        if self.dim() != kernel.dim() {
            return Err(FunctionalError::DimMismatch {
                got: self.dim(),
                expected: kernel.dim(),
            });
        }
        match self {
            Functional::Point { x0 } => {
                let x0 = Array1::from_vec(x0.clone());
                let weights = kernel.column(x0.view(), xs);
                Ok(BoundFunctional {
                    weights,
                    rkhs_norm_sq: Some(R::one()),
                    applied: AppliedForm::Point { x0 },
                })
            }
            Functional::Deriv { alpha, x0 } => {
                let x0a = Array1::from_vec(x0.clone());
                let weights = kernel.deriv_column(alpha, x0a.view(), xs)?;
                // ||g||_H^2 = D^alpha_x D^alpha_y K(x0, x0); available only
                // when the doubled order stays within kernel smoothness.
                let rkhs_norm_sq = kernel
                    .cross_deriv(alpha, alpha, x0a.view(), x0a.view())
                    .ok();
                Ok(BoundFunctional {
                    weights,
                    rkhs_norm_sq,
                    applied: AppliedForm::Deriv { alpha: alpha.clone(), x0: x0a },
                })
            }
            Functional::L2 { h, rect, quad_order } => {
                let (nodes, w) = tensor_rule(rect, *quad_order);
                let q = nodes.nrows();
                let mut wh = Array1::zeros(q);
                for i in 0..q {
                    let s = nodes.row(i);
                    wh[i] = w[i] * h(s.as_slice().expect("contiguous node row"));
                }
                let n = xs.nrows();
                let mut weights = Array1::zeros(n);
                for j in 0..n {
                    let mut acc = R::zero();
                    for i in 0..q {
                        acc = acc + wh[i] * kernel.eval(nodes.row(i), xs.row(j));
                    }
                    weights[j] = acc;
                }
                let mut norm = R::zero();
                for i in 0..q {
                    norm = norm + wh[i] * wh[i]; // diagonal: K(s_i, s_i) = 1
                    for j in 0..i {
                        let kij = kernel.eval(nodes.row(i), nodes.row(j));
                        norm = norm + R::of(2.0) * wh[i] * wh[j] * kij;
                    }
                }
                Ok(BoundFunctional {
                    weights,
                    rkhs_norm_sq: Some(norm),
                    applied: AppliedForm::Quadrature { nodes, wh },
                })
            }
        }
    }
}

/// How to apply the functional to an arbitrary (true) function; kept so
/// oracles and simulations can evaluate `L(f)` for known `f`.
#[derive(Debug, Clone)]
pub enum AppliedForm<R> {
    Point { x0: Array1<R> },
    Deriv { alpha: MultiIndex, x0: Array1<R> },
    /// `L(f) = sum_q wh_q f(s_q)` over quadrature nodes `s_q`.
    Quadrature { nodes: Array2<R>, wh: Array1<R> },
}

/// A functional bound to a kernel and design: the weight vector plus what is
/// needed for bias analysis.
#[derive(Debug, Clone)]
pub struct BoundFunctional<R> {
    weights: Array1<R>,
    rkhs_norm_sq: Option<R>,
    applied: AppliedForm<R>,
}

impl<R: Real> BoundFunctional<R> {
    /// `g(X)`, the representer evaluated (or differentiated) at the design.
    pub fn weights(&self) -> ArrayView1<'_, R> {
        self.weights.view()
    }

    /// `||g||_H^2` when the kernel is smooth enough to provide it.
    pub fn rkhs_norm_sq(&self) -> Option<R> {
        self.rkhs_norm_sq
    }

    pub fn applied(&self) -> &AppliedForm<R> {
        &self.applied
    }

    /// `L(fhat) = g(X)^T alpha`.
    pub fn estimate(&self, fit: &KrrFit<R>) -> R {
        self.weights.dot(&fit.coefficients())
    }

    /// Exact sampling variance `sigma2 * g(X)^T (K + lambda n I)^{-2} g(X)`.
    pub fn var_exact(&self, fit: &KrrFit<R>, sigma2: R) -> R {
        sigma2 * fit.factor().quad_form_inv_sq(self.weights.view())
    }

    /// Variance with the fit's plug-in noise estimate.
    pub fn var_hat(&self, fit: &KrrFit<R>) -> R {
        self.var_exact(fit, fit.sigma2_hat())
    }

    /// Two-sided normal confidence interval with plug-in variance.
    pub fn confidence_interval(
        &self,
        fit: &KrrFit<R>,
        level: R,
    ) -> Result<(R, R), FunctionalError> {
        let hw = self.ci_halfwidth(self.var_hat(fit), level)?;
        let est = self.estimate(fit);
        Ok((est - hw, est + hw))
    }

    /// `z_{(1+level)/2} * sqrt(variance)`.
    pub fn ci_halfwidth(&self, variance: R, level: R) -> Result<R, FunctionalError> {
        if !(level > R::zero() && level < R::one()) {
            return Err(FunctionalError::InvalidLevel(level.as_f64()));
        }
        let z = normal_quantile((R::one() + level) / R::of(2.0));
        Ok(z * variance.max(R::zero()).sqrt())
    }

    /// Apply `L` to a known kernel expansion.
    pub fn apply_to_expansion(&self, f: &KernelExpansion<R>) -> Result<R, FunctionalError> {
        match &self.applied {
            AppliedForm::Point { x0 } => Ok(f.eval(x0.view())),
            AppliedForm::Deriv { alpha, x0 } => Ok(f.deriv(alpha, x0.view())?),
            AppliedForm::Quadrature { nodes, wh } => {
                let mut acc = R::zero();
                for (i, &w) in wh.iter().enumerate() {
                    acc = acc + w * f.eval(nodes.row(i));
                }
                Ok(acc)
            }
        }
    }
}

/// Joint covariance `sigma2 * G^T A^{-2} G` of several functional estimates
/// under one fit. This is the single covariance path; the optimum module
/// routes its gradient covariances through here too.
pub fn cov_matrix<R: Real>(
    fit: &KrrFit<R>,
    functionals: &[BoundFunctional<R>],
    sigma2: R,
) -> Array2<R> {
    let m = functionals.len();
    let vs: Vec<Array1<R>> = functionals
        .iter()
        .map(|f| fit.factor().solve_vec(f.weights()))
        .collect();
    let mut cov = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..=i {
            let v = sigma2 * vs[i].dot(&vs[j]);
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    cov
}

/// Relative gap between the two variance routes (with `sigma2 = 1`):
/// `g^T A^{-2} g` against `n^{-1} lambda^{-2} ||ghat - g||_n^2`, where the
/// second route evaluates `ghat - g` at the design through an explicit
/// kernel-matrix product rather than the algebraic shortcut.
pub fn var_identity_check<R: Real>(fit: &KrrFit<R>, f: &BoundFunctional<R>) -> R {
    let lhs = fit.factor().quad_form_inv_sq(f.weights());
    let u = fit.factor().solve_vec(f.weights());
    let gram = fit.kernel().gram(fit.design());
    let ku = gram.dot(&u);
    let n = R::of_usize(fit.n());
    let lam = fit.lambda();
    let mut ss = R::zero();
    for i in 0..fit.n() {
        let d = ku[i] - f.weights()[i];
        ss = ss + d * d;
    }
    let empirical_norm_sq = ss / n;
    let rhs = empirical_norm_sq / (n * lam * lam);
    (lhs - rhs).abs() / lhs.abs().max(R::of(1e-300))
}

/// Ridge regression of a noiseless function: the machinery behind exact bias
/// computations and worst-case bias bounds.
#[derive(Debug, Clone)]
pub struct NoiselessKrr<R> {
    kernel: MaternKernel<R>,
    xs: Array2<R>,
    gram: Array2<R>,
    factor: SpdFactor<R>,
    lambda: R,
}

impl<R: Real> NoiselessKrr<R> {
    pub fn new(kernel: MaternKernel<R>, xs: Array2<R>, lambda: R) -> Result<Self, KrrError> {
        let gram = kernel.gram(xs.view());
        Self::with_gram(kernel, xs, gram, lambda)
    }

    /// Construct from a precomputed kernel matrix (shared across a lambda
    /// sweep on a fixed design).
    pub fn with_gram(
        kernel: MaternKernel<R>,
        xs: Array2<R>,
        gram: Array2<R>,
        lambda: R,
    ) -> Result<Self, KrrError> {
        if kernel.dim() != xs.ncols() {
            return Err(KrrError::DimMismatch { got: xs.ncols(), expected: kernel.dim() });
        }
        if !(lambda > R::zero() && lambda.is_finite()) {
            return Err(KrrError::InvalidLambda(lambda.as_f64()));
        }
        let n = xs.nrows();
        let lam_n = lambda * R::of_usize(n);
        let mut a = gram.clone();
        for i in 0..n {
            a[[i, i]] = a[[i, i]] + lam_n;
        }
        let factor = SpdFactor::new(a)?;
        Ok(Self { kernel, xs, gram, factor, lambda })
    }

    pub fn kernel(&self) -> &MaternKernel<R> {
        &self.kernel
    }

    pub fn design(&self) -> ArrayView2<'_, R> {
        self.xs.view()
    }

    pub fn factor(&self) -> &SpdFactor<R> {
        &self.factor
    }

    pub fn lambda(&self) -> R {
        self.lambda
    }

    pub fn lambda_n(&self) -> R {
        self.lambda * R::of_usize(self.xs.nrows())
    }

    /// `u = A^{-1} g(X)`, the coefficients of the estimated representer
    /// `ghat = sum_i u_i K(., x_i)`.
    pub fn representer_coeffs(&self, f: &BoundFunctional<R>) -> Array1<R> {
        self.factor.solve_vec(f.weights())
    }

    /// `(ghat - g)` evaluated at the design points, through the explicit
    /// kernel-matrix product. Algebraically this equals `-lambda n u`.
    pub fn representer_gap_at_design(&self, f: &BoundFunctional<R>) -> Array1<R> {
        let u = self.representer_coeffs(f);
        let ku = self.gram.dot(&u);
        &ku - &f.weights()
    }

    /// Worst-case absolute bias of the functional estimate over the unit
    /// RKHS ball: `||ghat - g||_H = sqrt(||g||^2 - 2 u^T g(X) + u^T K u)`.
    pub fn worst_case_bias(&self, f: &BoundFunctional<R>) -> Result<R, FunctionalError> {
        let norm_sq = f.rkhs_norm_sq().ok_or_else(|| {
            let order = match f.applied() {
                AppliedForm::Deriv { alpha, .. } => multi_index_order(alpha),
                _ => 0,
            };
            FunctionalError::WorstCaseUnavailable { order, nu: self.kernel.nu() }
        })?;
        let u = self.representer_coeffs(f);
        let ku = self.gram.dot(&u);
        let radicand = norm_sq - R::of(2.0) * u.dot(&f.weights()) + u.dot(&ku);
        let clamp = R::of(-1e-10) * norm_sq.max(R::one());
        if radicand < clamp {
            return Err(FunctionalError::NumericalBreakdown(radicand.as_f64()));
        }
        Ok(radicand.max(R::zero()).sqrt())
    }
}

/// A function in the RKHS given explicitly as `f = sum_j c_j K(., t_j)`.
/// Bias oracles are exact for these.
#[derive(Debug, Clone)]
pub struct KernelExpansion<R> {
    kernel: MaternKernel<R>,
    centers: Array2<R>,
    coeffs: Array1<R>,
}

impl<R: Real> KernelExpansion<R> {
    pub fn new(kernel: MaternKernel<R>, centers: Array2<R>, coeffs: Array1<R>) -> Self {
        assert_eq!(centers.nrows(), coeffs.len(), "one coefficient per center");
        assert_eq!(centers.ncols(), kernel.dim(), "center dimension mismatch");
        Self { kernel, centers, coeffs }
    }

    pub fn eval(&self, x: ArrayView1<R>) -> R {
        self.kernel.column(x, self.centers.view()).dot(&self.coeffs)
    }

    pub fn deriv(&self, alpha: &[u32], x: ArrayView1<R>) -> Result<R, KernelError> {
        let col = self.kernel.deriv_column(alpha, x, self.centers.view())?;
        Ok(col.dot(&self.coeffs))
    }

    pub fn values_at(&self, xs: ArrayView2<R>) -> Array1<R> {
        let mut out = Array1::zeros(xs.nrows());
        for i in 0..xs.nrows() {
            out[i] = self.eval(xs.row(i));
        }
        out
    }

    pub fn rkhs_norm_sq(&self) -> R {
        let k = self.kernel.gram(self.centers.view());
        self.coeffs.dot(&k.dot(&self.coeffs))
    }
}

/// Exact bias of the functional estimate for a known RKHS function, computed
/// by two independent routes:
///
/// 1. `E[L(fhat)] - L(f) = g(X)^T A^{-1} f(X) - L(f)` (a solve against the
///    function values), and
/// 2. `<f, ghat - g>_H = sum_j c_j ghat(t_j) - L(f)` (a solve against the
///    functional weights, evaluated at the expansion centers).
pub fn bias_oracle<R: Real>(
    nk: &NoiselessKrr<R>,
    f: &KernelExpansion<R>,
    functional: &BoundFunctional<R>,
) -> Result<(R, R), FunctionalError> {
    let true_val = functional.apply_to_expansion(f)?;
    let fvals = f.values_at(nk.design());
    let af = nk.factor().solve_vec(fvals.view());
    let route1 = functional.weights().dot(&af) - true_val;
    let u = nk.representer_coeffs(functional);
    let mut ghat_dot = R::zero();
    for (j, &c) in f.coeffs.iter().enumerate() {
        let ghat_tj = nk.kernel().column(f.centers.row(j), nk.design()).dot(&u);
        ghat_dot = ghat_dot + c * ghat_tj;
    }
    let route2 = ghat_dot - true_val;
    Ok((route1, route2))
}
