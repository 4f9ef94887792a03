//! Matern correlation kernels on `R^d`, with analytic derivatives up to
//! second order in each argument.
//!
//! The kernel is `K(x, y) = M(z)` with `z = 2 sqrt(nu) * phi * ||x - y||` and
//! `M(z) = 2^(1-nu)/Gamma(nu) * z^nu * K_nu(z)`, normalized so `M(0) = 1`.
//! Smoothness `nu` is restricted to the half-integer ladder
//! `{1/2, 1, 3/2, 2, 5/2, 3, 7/2}`: half-integer orders reduce to
//! polynomial-times-exponential closed forms, integer orders go through the
//! modified Bessel recurrence with a series branch near `z = 0`.

use crate::bessel;
use crate::scalar::Real;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

/// Below this `z` the integer-order radial profile switches to its truncated
/// log-series; the Bessel recurrence loses digits to cancellation there.
const Z_SERIES: f64 = 1e-4;

/// A derivative multi-index over coordinates; `alpha[i]` is the order in `x_i`.
pub type MultiIndex = Vec<u32>;

/// Total order `|alpha|` of a multi-index.
pub fn multi_index_order(alpha: &[u32]) -> u32 {
    alpha.iter().sum()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("unsupported smoothness nu = {0}; supported: 0.5, 1, 1.5, 2, 2.5, 3, 3.5")]
    UnsupportedNu(f64),
    #[error("inverse length-scale phi must be positive and finite, got {0}")]
    InvalidPhi(f64),
    #[error("kernel dimension must be at least 1")]
    ZeroDim,
    #[error("multi-index has {got} entries, kernel dimension is {dim}")]
    DimMismatch { got: usize, dim: usize },
    #[error("total derivative order {0} exceeds the supported maximum of 2")]
    UnsupportedOrder(u32),
    #[error("derivative order {order} requires nu >= {min_nu}, kernel has nu = {nu}")]
    InsufficientSmoothness { order: u32, nu: f64, min_nu: f64 },
}

/// Radial profile and the combinations of its derivatives the chain rule
/// needs. `g1 = M'(z)/z` and `m2_minus_g1 = M''(z) - g1(z)` are computed via
/// cancellation-free identities rather than by subtracting.
#[derive(Debug, Clone, Copy)]
struct RadialParts<R> {
    g1: R,
    m2_minus_g1: R,
}

/// Isotropic Matern kernel with unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct MaternKernel<R> {
    twice_nu: u32,
    phi: R,
    dim: usize,
    /// Radial scale `a = 2 sqrt(nu) * phi`, so `z = a * r`.
    a: R,
}

impl<R: Real> MaternKernel<R> {
    pub fn new(nu: f64, phi: R, dim: usize) -> Result<Self, KernelError> {
        let doubled = 2.0 * nu;
        let rounded = doubled.round();
        if !(doubled.is_finite() && (doubled - rounded).abs() < 1e-12) {
            return Err(KernelError::UnsupportedNu(nu));
        }
        let twice_nu = rounded as i64;
        if !(1..=7).contains(&twice_nu) {
            return Err(KernelError::UnsupportedNu(nu));
        }
        if !(phi.is_finite() && phi > R::zero()) {
            return Err(KernelError::InvalidPhi(phi.as_f64()));
        }
        if dim == 0 {
            return Err(KernelError::ZeroDim);
        }
        let twice_nu = twice_nu as u32;
        let nu_exact = R::of(twice_nu as f64 / 2.0);
        let a = R::of(2.0) * nu_exact.sqrt() * phi;
        Ok(Self { twice_nu, phi, dim, a })
    }

    pub fn nu(&self) -> f64 {
        self.twice_nu as f64 / 2.0
    }

    pub fn phi(&self) -> R {
        self.phi
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sobolev smoothness `m = nu + d/2` of the native space.
    pub fn sobolev_order(&self) -> f64 {
        self.nu() + self.dim as f64 / 2.0
    }

    fn check_smoothness(&self, order: u32) -> Result<(), KernelError> {
        if order > 2 {
            return Err(KernelError::UnsupportedOrder(order));
        }
        // order 1 needs nu >= 1, order 2 needs nu >= 2 on the ladder
        // (2 covers nu in {2, 5/2, 3, 7/2}; 3/2 is C^1 but not C^2 enough
        // for second derivatives to live in the native space pairing).
        let min_twice = match order {
            0 => 0,
            1 => 2,
            _ => 4,
        };
        if self.twice_nu < min_twice {
            return Err(KernelError::InsufficientSmoothness {
                order,
                nu: self.nu(),
                min_nu: min_twice as f64 / 2.0,
            });
        }
        Ok(())
    }

    /// `d^order/dr^order K(x, y)` as a function of `r = ||x - y||`.
    pub fn radial(&self, r: R, order: u32) -> Result<R, KernelError> {
        self.check_smoothness(order)?;
        assert!(r >= R::zero() && r.is_finite(), "radius must be finite and nonnegative");
        let z = self.a * r;
        Ok(match order {
            0 => self.m0(z),
            1 => {
                // Phi'(r) = a M'(z) = a^2 r g1(z); exactly zero at r = 0
                // (early return keeps nu = 1, whose g1 ~ log z, NaN-free).
                if r == R::zero() {
                    return Ok(R::zero());
                }
                self.a * self.a * r * self.parts(z).g1
            }
            _ => {
                let p = self.parts(z);
                self.a * self.a * (p.m2_minus_g1 + p.g1)
            }
        })
    }

    /// `M(z)`, the unit-normalized radial profile.
    fn m0(&self, z: R) -> R {
        debug_assert!(z >= R::zero());
        match self.twice_nu {
            1 => (-z).exp(),
            3 => (R::one() + z) * (-z).exp(),
            5 => (R::one() + z + z * z / R::of(3.0)) * (-z).exp(),
            7 => {
                let z2 = z * z;
                (R::one() + z + R::of(0.4) * z2 + z2 * z / R::of(15.0)) * (-z).exp()
            }
            2 => {
                if z.as_f64() < Z_SERIES {
                    // z K_1(z) = 1 + z^2/2 (ln(z/2) + gamma - 1/2) + O(z^4 log z)
                    if z == R::zero() {
                        return R::one();
                    }
                    let l = self.log_term(z);
                    R::one() + z * z / R::of(2.0) * (l - R::of(0.5))
                } else {
                    z * bessel::k0_to_k3(z)[1]
                }
            }
            4 => {
                if z.as_f64() < Z_SERIES {
                    if z == R::zero() {
                        return R::one();
                    }
                    let l = self.log_term(z);
                    let z2 = z * z;
                    R::one() - z2 / R::of(4.0) - z2 * z2 / R::of(16.0) * (l - R::of(0.75))
                } else {
                    z * z / R::of(2.0) * bessel::k0_to_k3(z)[2]
                }
            }
            6 => {
                if z.as_f64() < Z_SERIES {
                    let z2 = z * z;
                    R::one() - z2 / R::of(8.0) + z2 * z2 / R::of(64.0)
                } else {
                    let z3 = z * z * z;
                    z3 / R::of(8.0) * bessel::k0_to_k3(z)[3]
                }
            }
            _ => unreachable!("twice_nu validated in new()"),
        }
    }

    /// `ln(z/2) + gamma`, shared by the integer-order series.
    fn log_term(&self, z: R) -> R {
        (z / R::of(2.0)).ln() + R::of(bessel::EULER_MASCHERONI)
    }

    /// `g1(0) = M''(0) = -1/(2(nu - 1))`; finite only for nu > 1.
    fn g1_at_zero(&self) -> R {
        debug_assert!(self.twice_nu >= 4);
        -R::one() / (R::of(2.0) * (R::of(self.nu()) - R::one()))
    }

    /// `g1(z) = M'(z)/z` and `M''(z) - g1(z)`, via identities that avoid the
    /// subtraction `M'' - M'/z` (both reduce to single Bessel terms).
    fn parts(&self, z: R) -> RadialParts<R> {
        debug_assert!(self.twice_nu >= 2, "derivatives gated by check_smoothness");
        let e = (-z).exp();
        match self.twice_nu {
            3 => RadialParts { g1: -e, m2_minus_g1: z * e },
            5 => {
                let third = R::of(3.0);
                RadialParts {
                    g1: -(R::one() + z) / third * e,
                    m2_minus_g1: z * z / third * e,
                }
            }
            7 => {
                let fifteen = R::of(15.0);
                RadialParts {
                    g1: -(R::of(3.0) + R::of(3.0) * z + z * z) / fifteen * e,
                    m2_minus_g1: z * z * (R::one() + z) / fifteen * e,
                }
            }
            2 => {
                // nu = 1: g1 = -K_0(z); m2 - g1 = z K_1(z).
                if z.as_f64() < Z_SERIES {
                    if z == R::zero() {
                        // g1 diverges like log z; callers multiply it by u_i = 0
                        // for first derivatives and reject order 2 at nu = 1,
                        // so this branch is never reached through public paths.
                        return RadialParts { g1: R::neg_infinity(), m2_minus_g1: R::one() };
                    }
                    let l = self.log_term(z);
                    let z2 = z * z;
                    RadialParts {
                        g1: l + z2 / R::of(4.0) * (l - R::one()),
                        m2_minus_g1: R::one() + z2 / R::of(2.0) * (l - R::of(0.5)),
                    }
                } else {
                    let ks = bessel::k0_to_k3(z);
                    RadialParts { g1: -ks[0], m2_minus_g1: z * ks[1] }
                }
            }
            4 => {
                // nu = 2: g1 = -z K_1(z)/2; m2 - g1 = z^2 K_0(z)/2.
                if z.as_f64() < Z_SERIES {
                    if z == R::zero() {
                        return RadialParts { g1: self.g1_at_zero(), m2_minus_g1: R::zero() };
                    }
                    let l = self.log_term(z);
                    let z2 = z * z;
                    RadialParts {
                        g1: -R::of(0.5) - z2 / R::of(8.0) * (R::of(2.0) * l - R::one()),
                        m2_minus_g1: -z2 / R::of(2.0) * l,
                    }
                } else {
                    let ks = bessel::k0_to_k3(z);
                    let z2 = z * z;
                    RadialParts {
                        g1: -z * ks[1] / R::of(2.0),
                        m2_minus_g1: z2 * ks[0] / R::of(2.0),
                    }
                }
            }
            6 => {
                // nu = 3: g1 = -z^2 K_2(z)/8; m2 - g1 = z^3 K_1(z)/8.
                if z.as_f64() < Z_SERIES {
                    let z2 = z * z;
                    RadialParts {
                        g1: -R::of(0.25) + z2 / R::of(16.0),
                        m2_minus_g1: z2 / R::of(8.0),
                    }
                } else {
                    let ks = bessel::k0_to_k3(z);
                    let z2 = z * z;
                    RadialParts {
                        g1: -z2 * ks[2] / R::of(8.0),
                        m2_minus_g1: z2 * z * ks[1] / R::of(8.0),
                    }
                }
            }
            _ => unreachable!("twice_nu validated in new()"),
        }
    }

    fn check_dim(&self, alpha: &[u32]) -> Result<(), KernelError> {
        if alpha.len() != self.dim {
            return Err(KernelError::DimMismatch { got: alpha.len(), dim: self.dim });
        }
        Ok(())
    }

    fn dist(&self, x: ArrayView1<R>, y: ArrayView1<R>) -> R {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        assert_eq!(y.len(), self.dim, "point dimension mismatch");
        let mut s = R::zero();
        for i in 0..self.dim {
            let d = x[i] - y[i];
            s = s + d * d;
        }
        s.sqrt()
    }

    /// `K(x, y)`; exactly 1 when `x == y`.
    pub fn eval(&self, x: ArrayView1<R>, y: ArrayView1<R>) -> R {
        let r = self.dist(x, y);
        if r == R::zero() {
            return R::one();
        }
        self.m0(self.a * r)
    }

    /// `D^alpha_x K(x, y)`: the partial derivative in the first argument.
    ///
    /// Requires `|alpha| <= 2`, `nu >= 1` for first and `nu >= 2` for second
    /// derivatives.
    pub fn deriv(&self, alpha: &[u32], x: ArrayView1<R>, y: ArrayView1<R>) -> Result<R, KernelError> {
        self.check_dim(alpha)?;
        let order = multi_index_order(alpha);
        self.check_smoothness(order)?;
        if order == 0 {
            return Ok(self.eval(x, y));
        }
        let r = self.dist(x, y);
        let a2 = self.a * self.a;
        match order {
            1 => {
                let i = alpha.iter().position(|&k| k == 1).expect("order-1 index");
                if r == R::zero() {
                    return Ok(R::zero());
                }
                let g1 = self.parts(self.a * r).g1;
                Ok(a2 * g1 * (x[i] - y[i]))
            }
            _ => {
                // order == 2: either alpha = 2 e_i or alpha = e_i + e_j.
                let (i, j) = second_order_indices(alpha);
                if r == R::zero() {
                    return Ok(if i == j { a2 * self.g1_at_zero() } else { R::zero() });
                }
                let p = self.parts(self.a * r);
                let ui = x[i] - y[i];
                let uj = x[j] - y[j];
                let mut v = p.m2_minus_g1 * ui * uj / (r * r);
                if i == j {
                    v = v + p.g1;
                }
                Ok(a2 * v)
            }
        }
    }

    /// `D^alpha_x D^beta_y K(x, y)`, with `|alpha| + |beta| <= 2`.
    ///
    /// Uses `D^alpha_x D^beta_y K = (-1)^|beta| D^(alpha+beta)_x K` for
    /// isotropic kernels.
    pub fn cross_deriv(
        &self,
        alpha: &[u32],
        beta: &[u32],
        x: ArrayView1<R>,
        y: ArrayView1<R>,
    ) -> Result<R, KernelError> {
        self.check_dim(alpha)?;
        self.check_dim(beta)?;
        let total: MultiIndex = alpha.iter().zip(beta).map(|(&a, &b)| a + b).collect();
        let v = self.deriv(&total, x, y)?;
        Ok(if multi_index_order(beta) % 2 == 1 { -v } else { v })
    }

    /// Kernel matrix of the rows of `xs`: symmetric with an exact unit diagonal.
    pub fn gram(&self, xs: ArrayView2<R>) -> Array2<R> {
        let n = xs.nrows();
        assert_eq!(xs.ncols(), self.dim, "design dimension mismatch");
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            k[[i, i]] = R::one();
            for j in 0..i {
                let v = self.eval(xs.row(i), xs.row(j));
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        k
    }

    /// `[K(x, xs_1), ..., K(x, xs_n)]` for a single evaluation point.
    pub fn column(&self, x: ArrayView1<R>, xs: ArrayView2<R>) -> Array1<R> {
        let n = xs.nrows();
        let mut out = Array1::zeros(n);
        for i in 0..n {
            out[i] = self.eval(x, xs.row(i));
        }
        out
    }

    /// `[D^alpha_x K(x, xs_1), ..., D^alpha_x K(x, xs_n)]`: derivatives in the
    /// evaluation point `x`.
    pub fn deriv_column(
        &self,
        alpha: &[u32],
        x: ArrayView1<R>,
        xs: ArrayView2<R>,
    ) -> Result<Array1<R>, KernelError> {
        self.check_dim(alpha)?;
        self.check_smoothness(multi_index_order(alpha))?;
        let n = xs.nrows();
        let mut out = Array1::zeros(n);
        for i in 0..n {
            out[i] = self.deriv(alpha, x, xs.row(i))?;
        }
        Ok(out)
    }
}

/// Coordinates `(i, j)` with `i <= j` of an order-2 multi-index.
fn second_order_indices(alpha: &[u32]) -> (usize, usize) {
    let mut found = Vec::with_capacity(2);
    for (i, &k) in alpha.iter().enumerate() {
        for _ in 0..k {
            found.push(i);
        }
    }
    debug_assert_eq!(found.len(), 2);
    (found[0], found[1])
}
