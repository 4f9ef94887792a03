//! Modified Bessel functions of the second kind, `K_u`, for the orders the
//! Matern kernel needs.
//!
//! Strategy: a Temme-style series for `z <= 2`, Steed's continued fraction
//! (Thompson & Barnett) for `z > 2`, both for the base pair `(K_u, K_{u+1})`
//! with `0 <= u <= 1/2`; integer and half-integer orders above that come from
//! the stable upward recurrence `K_{j+1} = K_{j-1} + (2j/z) K_j`.

use crate::scalar::Real;
use crate::special::ln_gamma;

pub(crate) const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;
const MAX_ITER: usize = 500;

/// `(K_u(z), K_{u+1}(z))` for `0 <= u <= 1/2`, `z > 0`.
pub(crate) fn k_pair<R: Real>(u: R, z: R) -> (R, R) {
    debug_assert!(u >= R::zero() && u <= R::of(0.5));
    debug_assert!(z > R::zero());
    if z <= R::of(2.0) {
        temme_series(u, z)
    } else {
        steed_cf2(u, z)
    }
}

/// `[K_0(z), K_1(z), K_2(z), K_3(z)]` by upward recurrence (allocation-free;
/// this covers every integer order the Matern kernel needs).
pub(crate) fn k0_to_k3<R: Real>(z: R) -> [R; 4] {
    let (k0, k1) = k_pair(R::zero(), z);
    let k2 = k0 + R::of(2.0) / z * k1;
    let k3 = k1 + R::of(4.0) / z * k2;
    [k0, k1, k2, k3]
}

/// `[K_0(z), K_1(z), ..., K_nmax(z)]` by upward recurrence.
#[allow(dead_code)]
pub(crate) fn k_integer_orders<R: Real>(nmax: usize, z: R) -> Vec<R> {
    let (k0, k1) = k_pair(R::zero(), z);
    let mut ks = Vec::with_capacity(nmax + 1);
    ks.push(k0);
    if nmax >= 1 {
        ks.push(k1);
    }
    for j in 1..nmax {
        let jf = R::of_usize(j);
        let next = ks[j - 1] + R::of(2.0) * jf / z * ks[j];
        ks.push(next);
    }
    ks
}

/// Temme's series for the pair `(K_u, K_{u+1})`; rapid convergence for
/// `z <= 2`.
fn temme_series<R: Real>(u: R, z: R) -> (R, R) {
    let one = R::one();
    let half = R::of(0.5);
    let eps = R::epsilon();
    let pi = R::of(std::f64::consts::PI);

    let gp = ln_gamma(one + u).exp() - one;
    let gm = ln_gamma(one - u).exp() - one;

    let a = (z * half).ln();
    let b = (u * a).exp();
    let sigma = -a * u;
    let c = if u.abs() < eps + eps {
        one
    } else {
        (pi * u).sin() / (pi * u)
    };
    let d = if sigma.abs() < eps {
        one
    } else {
        sigma.sinh() / sigma
    };
    let gamma1 = if u.abs() < eps {
        -R::of(EULER_MASCHERONI)
    } else {
        half / u * (gp - gm) * c
    };
    let gamma2 = (R::of(2.0) + gp + gm) * c * half;

    let mut p = (gp + one) / (R::of(2.0) * b);
    let mut q = (gm + one) * b * half;
    let mut f = (sigma.cosh() * gamma1 - d * a * gamma2) / c;
    let mut h = p;
    let mut coef = one;
    let mut sum = coef * f;
    let mut sum1 = coef * h;

    for k in 1..MAX_ITER {
        let kf = R::of_usize(k);
        f = (kf * f + p + q) / (kf * kf - u * u);
        p = p / (kf - u);
        q = q / (kf + u);
        h = p - kf * f;
        coef = coef * (z * z / (R::of(4.0) * kf));
        sum = sum + coef * f;
        sum1 = sum1 + coef * h;
        if (coef * f).abs() < sum.abs() * eps {
            break;
        }
    }
    (sum, R::of(2.0) * sum1 / z)
}

/// Steed's continued fraction for the pair `(K_u, K_{u+1})`, valid for
/// `z > 1`; see Thompson & Barnett (1987).
fn steed_cf2<R: Real>(u: R, z: R) -> (R, R) {
    let one = R::one();
    let eps = R::epsilon();

    let mut a = u * u - R::of(0.25);
    let mut b = R::of(2.0) * (z + one);
    let mut d = one / b;
    let mut delta = d;
    let mut f = d;
    let mut prev = R::zero();
    let mut cur = one;
    let mut q = -a;
    let mut c = -a;
    let mut s = one + q * delta;

    for k in 2..MAX_ITER {
        let kf = R::of_usize(k);
        a = a - R::of(2.0) * (kf - one);
        b = b + R::of(2.0);
        d = one / (b + a * d);
        delta = delta * (b * d - one);
        f = f + delta;

        let t = (prev - (b - R::of(2.0)) * cur) / a;
        prev = cur;
        cur = t;
        c = c * (-a / kf);
        q = q + c * t;
        s = s + q * delta;

        if (q * delta).abs() < s.abs() * eps * R::of(0.5) {
            break;
        }
    }

    let half_pi = R::of(std::f64::consts::FRAC_PI_2);
    let ku = (half_pi / z).sqrt() * (-z).exp() / s;
    let ku1 = ku * (R::of(0.5) + u + z + (u * u - R::of(0.25)) * f) / z;
    (ku, ku1)
}
