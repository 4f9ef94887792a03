//! Gauss-Legendre quadrature and its tensor-product extension to boxes.

use ndarray::{Array1, Array2};

use crate::domain::Rect;
use crate::scalar::Real;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre<R: Real>(n: usize) -> (Vec<R>, Vec<R>) {
    assert!(n >= 1, "quadrature order must be at least 1");
    let mut nodes = vec![R::zero(); n];
    let mut weights = vec![R::zero(); n];
    let nf = R::of_usize(n);
    let pi = R::of(std::f64::consts::PI);
    let tol = R::epsilon() * R::of(4.0);

    for i in 0..n.div_ceil(2) {
        let mut x = (pi * (R::of_usize(i) + R::of(0.75)) / (nf + R::of(0.5))).cos();
        let mut dp;
        loop {
            // Evaluate P_n and its derivative at x via the recurrence.
            let mut p0 = R::one();
            let mut p1 = R::zero();
            for j in 0..n {
                let jf = R::of_usize(j);
                let p2 = p1;
                p1 = p0;
                p0 = ((R::of(2.0) * jf + R::one()) * x * p1 - jf * p2) / (jf + R::one());
            }
            dp = nf * (x * p0 - p1) / (x * x - R::one());
            let dx = p0 / dp;
            x = x - dx;
            if dx.abs() <= tol {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = R::of(2.0) / ((R::one() - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }

    (nodes, weights)
}

/// Tensor-product Gauss-Legendre rule over a box: returns the node matrix
/// (`order^d` rows, `d` columns) and the weight vector. Intended for low
/// dimension (`d <= 2`); the node count grows as `order^d`.
pub fn tensor_rule<R: Real>(rect: &Rect<R>, order: usize) -> (Array2<R>, Array1<R>) {
    let d = rect.dim();
    assert!(d <= 2, "tensor quadrature supported for d <= 2");
    let (xi, wi) = gauss_legendre::<R>(order);
    let half = R::of(0.5);

    // Per-axis affine map onto [lo, hi].
    let mut axis_nodes = Vec::with_capacity(d);
    let mut axis_weights = Vec::with_capacity(d);
    for k in 0..d {
        let (a, b) = (rect.lo()[k], rect.hi()[k]);
        let mid = (a + b) * half;
        let rad = (b - a) * half;
        axis_nodes.push(xi.iter().map(|t| mid + rad * *t).collect::<Vec<_>>());
        axis_weights.push(wi.iter().map(|w| *w * rad).collect::<Vec<_>>());
    }

    let total = order.pow(d as u32);
    let mut nodes = Array2::zeros((total, d));
    let mut weights = Array1::zeros(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut w = R::one();
        for k in 0..d {
            let j = rem % order;
            rem /= order;
            nodes[[idx, k]] = axis_nodes[k][j];
            w = w * axis_weights[k][j];
        }
        weights[idx] = w;
    }
    (nodes, weights)
}
