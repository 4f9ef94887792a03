use krrfun::{Dataset64, Functional64, KrrFit64, MaternKernel64};
use ndarray::{Array1, Array2};

fn main() {
    let n = 200;
    let xs = Array2::from_shape_fn((n, 1), |(i, _)| (i as f64 + 0.5) / n as f64);
    let ys = Array1::from_shape_fn(n, |i| {
        let x = xs[[i, 0]];
        (x - 0.3) * (x - 0.3)
    });
    let data = Dataset64::new(xs, ys).unwrap();

    let kernel = MaternKernel64::new(2.5, 1.0, 1).unwrap();
    let fit = KrrFit64::fit(&data, kernel, 1e-4).unwrap();

    let slope = Functional64::deriv(vec![1], vec![0.5])
        .bind(fit.kernel(), fit.design())
        .unwrap();
    let estimate = slope.estimate(&fit);
    let (lo, hi) = slope.confidence_interval(&fit, 0.95).unwrap();
    println!("f'(0.5) = {estimate:.4}, 95% CI [{lo:.4}, {hi:.4}]");
}
