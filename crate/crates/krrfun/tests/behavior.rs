//! Replication-level behavior checks: hyperparameter selection stays off the
//! grid edges, the noise estimate tracks the truth at scale, and interval
//! widths shrink as the sample grows.

use krrfun::krr::{select_hyperparams, Dataset, HyperGrid, KrrFit};
use krrfun::optimum::{estimate_optimum, optimum_ci, DEFAULT_NEWTON_ITERS};
use krrfun::testbed::{gen_design, DesignFamily, NoiseSpec, TestFunction};
use krrfun::{Functional, MaternKernel};
use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn f1_data(n: usize, sigma: f64, seed: u64) -> Dataset<f64> {
    let f = TestFunction::F1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = gen_design(DesignFamily::IidUniform, n, &f.domain(), &mut rng).unwrap();
    let noise = NoiseSpec::gaussian(sigma).sample(n, &mut rng).unwrap();
    let ys = Array1::from_shape_fn(n, |i| f.eval(xs[[i, 0]]) + noise[i]);
    Dataset::new(xs, ys).unwrap()
}

/// Cross-validation should not pin lambda to a grid endpoint on data it can
/// actually fit; require an interior pick in at least 80% of 50 seeded runs.
#[test]
fn cv_selection_stays_off_grid_edges() {
    let grid = HyperGrid::<f64>::default();
    let lo = grid.lambda_mults[0];
    let hi = *grid.lambda_mults.last().unwrap();
    let mut interior = 0;
    for rep in 0..50u64 {
        let data = f1_data(300, 0.5, 9_000 + rep);
        let fit = select_hyperparams(&data, 3.0, &grid).unwrap();
        let mult = fit.lambda() * 300.0;
        if (mult - lo).abs() > 1e-9 && (mult - hi).abs() > 1e-9 {
            interior += 1;
        }
    }
    assert!(interior >= 40, "interior selections: {interior}/50");
}

/// With lambda = 1/n the residual-based noise estimate is consistent; at
/// n = 2000 its median over 20 replications lands within 15% of the truth.
#[test]
fn sigma2_hat_tracks_truth_at_scale() {
    let sigma2 = 0.25;
    let vals: Vec<f64> = (0..20u64)
        .map(|rep| {
            let data = f1_data(2000, 0.5, 11_000 + rep);
            let kernel = MaternKernel::new(3.0, 4.0, 1).unwrap();
            KrrFit::fit(&data, kernel, 1.0 / 2000.0).unwrap().sigma2_hat()
        })
        .collect();
    let med = median(vals);
    assert!(
        (med - sigma2).abs() <= 0.15 * sigma2,
        "median sigma2_hat {med} vs true {sigma2}"
    );
}

/// Point-evaluation interval widths shrink with n under the lambda = c/n rule.
#[test]
fn point_ci_width_shrinks_with_n() {
    let widths = |n: usize, base: u64| -> Vec<f64> {
        (0..20u64)
            .map(|rep| {
                let data = f1_data(n, 0.5, base + rep);
                let kernel = MaternKernel::new(3.0, 2.0, 1).unwrap();
                let fit = KrrFit::fit(&data, kernel, 1.0 / n as f64).unwrap();
                let bound = Functional::point(vec![0.5])
                    .bind(fit.kernel(), fit.design())
                    .unwrap();
                let (l, h) = bound.confidence_interval(&fit, 0.95).unwrap();
                h - l
            })
            .collect()
    };
    let w250 = median(widths(250, 13_000));
    let w1000 = median(widths(1000, 14_000));
    assert!(
        w1000 < w250,
        "median width did not shrink: n=250 {w250}, n=1000 {w1000}"
    );
}

/// The sandwich interval for the minimizer also tightens as n grows.
#[test]
fn sandwich_ci_width_shrinks_with_n() {
    let widths = |n: usize, base: u64| -> Vec<f64> {
        (0..20u64)
            .map(|rep| {
                let data = f1_data(n, 0.5, base + rep);
                let kernel = MaternKernel::new(3.0, 2.0, 1).unwrap();
                let fit = KrrFit::fit(&data, kernel, 2.0 / n as f64).unwrap();
                let dom = TestFunction::F1.domain();
                let res = estimate_optimum(&fit, &dom, 512, DEFAULT_NEWTON_ITERS).unwrap();
                let ci = optimum_ci(&res, 0.95).unwrap();
                ci[0].1 - ci[0].0
            })
            .collect()
    };
    let w250 = median(widths(250, 15_000));
    let w1000 = median(widths(1000, 16_000));
    assert!(
        w1000 < w250,
        "median sandwich width did not shrink: n=250 {w250}, n=1000 {w1000}"
    );
}
