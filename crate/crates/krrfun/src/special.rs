//! Scalar special functions: log-gamma, the standard normal CDF and its
//! inverse, and least-squares helpers shared across the crate.

use crate::scalar::Real;

/// Lanczos coefficients (g = 7, n = 9).
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments.
///
/// Lanczos approximation with reflection for `x < 0.5`; relative accuracy is
/// about 1e-13 over the range used here.
pub fn ln_gamma<R: Real>(x: R) -> R {
    assert!(x > R::zero(), "ln_gamma requires a positive argument");
    let xf = x.as_f64();
    R::of(ln_gamma_f64(xf))
}

fn ln_gamma_f64(x: f64) -> f64 {
    if x < 0.5 {
        // Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma_f64(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Complementary error function, fractional error below 1.2e-7 everywhere
/// (Chebyshev fit from the usual numerical recipes).
pub fn erfc<R: Real>(x: R) -> R {
    let xf = x.as_f64();
    let z = xf.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    R::of(if xf >= 0.0 { ans } else { 2.0 - ans })
}

/// Standard normal CDF.
pub fn normal_cdf<R: Real>(x: R) -> R {
    let half = R::of(0.5);
    half * erfc(-x / R::of(std::f64::consts::SQRT_2))
}

// Rational-approximation coefficients for the normal quantile (Acklam).
const QA: [f64; 6] = [
    -39.696_830_286_653_76,
    220.946_098_424_520_5,
    -275.928_510_446_968_7,
    138.357_751_867_269,
    -30.664_798_066_147_16,
    2.506_628_277_459_239,
];
const QB: [f64; 5] = [
    -54.476_098_798_224_06,
    161.585_836_858_040_9,
    -155.698_979_859_886_6,
    66.801_311_887_719_72,
    -13.280_681_552_885_72,
];
const QC: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -0.322_396_458_041_136_5,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const QD: [f64; 4] = [
    7.784_695_709_041_462e-3,
    0.322_467_129_070_039_8,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const Q_LOW: f64 = 0.02425;

/// Standard normal quantile `Phi^{-1}(p)` for `p` in (0, 1).
///
/// Rational approximation with absolute error below 1.2e-9, well inside the
/// 1e-8 the confidence-interval layer needs.
pub fn normal_quantile<R: Real>(p: R) -> R {
    let pf = p.as_f64();
    assert!(
        pf > 0.0 && pf < 1.0,
        "normal_quantile requires p in (0, 1), got {pf}"
    );
    R::of(normal_quantile_f64(pf))
}

fn normal_quantile_f64(p: f64) -> f64 {
    if p < Q_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((QC[0] * q + QC[1]) * q + QC[2]) * q + QC[3]) * q + QC[4]) * q + QC[5])
            / ((((QD[0] * q + QD[1]) * q + QD[2]) * q + QD[3]) * q + 1.0)
    } else if p <= 1.0 - Q_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((QA[0] * r + QA[1]) * r + QA[2]) * r + QA[3]) * r + QA[4]) * r + QA[5]) * q
            / (((((QB[0] * r + QB[1]) * r + QB[2]) * r + QB[3]) * r + QB[4]) * r + 1.0)
    } else {
        -normal_quantile_f64(1.0 - p)
    }
}

/// Ordinary least squares of `y` on `x` (with intercept): returns
/// `(slope, intercept, r_squared)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len(), "linear_fit: mismatched lengths");
    assert!(x.len() >= 2, "linear_fit needs at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    assert!(sxx > 0.0, "linear_fit: degenerate abscissae");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
