//! One-dimensional benchmark functions with analytic derivatives and
//! registered extrema, plus seeded generators for designs and noise.

use std::sync::LazyLock;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Rect;
use crate::special::ln_gamma;

#[derive(Debug, Error)]
pub enum TestbedError {
    #[error("sigma must be finite and nonnegative, got {0}")]
    InvalidSigma(f64),
    #[error("jittered grid in dimension {dim} needs n = k^{dim} for integer k, got n = {n}")]
    GridSize { n: usize, dim: usize },
    #[error("design must contain at least one point")]
    EmptyDesign,
    #[error("unknown test function id {0:?}")]
    UnknownFunction(String),
}

/// Beta(a, b) density at `x`; zero outside `[0, 1]`.
pub fn beta_pdf(a: f64, b: f64, x: f64) -> f64 {
    assert!(
        a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
        "beta_pdf: shape parameters must be positive and finite"
    );
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    let ln_norm = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    // powf handles the endpoints (0^0 = 1), so a = 1 and b = 1 stay exact.
    x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0) * (-ln_norm).exp()
}

fn beta_d1(a: f64, b: f64, x: f64) -> f64 {
    // Zero at and outside the endpoints; exact for the shapes used below
    // (a >= 4, b >= 5), where the density vanishes to second order.
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    beta_pdf(a, b, x) * ((a - 1.0) / x - (b - 1.0) / (1.0 - x))
}

fn beta_d2(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let s = (a - 1.0) / x - (b - 1.0) / (1.0 - x);
    beta_pdf(a, b, x) * (s * s - (a - 1.0) / (x * x) - (b - 1.0) / ((1.0 - x) * (1.0 - x)))
}

fn beta_deriv(order: u32) -> fn(f64, f64, f64) -> f64 {
    match order {
        0 => beta_pdf,
        1 => beta_d1,
        2 => beta_d2,
        _ => unreachable!("derivative order capped at 2"),
    }
}

/// Whether a registered extremum is a minimum or a maximum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Min,
    Max,
}

/// A catalogued interior extremum of a benchmark function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremum {
    pub x_star: f64,
    pub f_star: f64,
    pub kind: ExtremumKind,
    /// Absolute uncertainty of the tabulated `x_star`.
    pub tolerance: f64,
}

/// The benchmark regression functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    F1,
    F2,
    F3,
    F4,
    F5,
}

const EXTREMA_CSV: &str = include_str!("../data/extrema.csv");

static EXTREMA: LazyLock<Vec<(TestFunction, Extremum)>> = LazyLock::new(|| {
    let mut rows = Vec::new();
    let mut lines = EXTREMA_CSV.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().expect("extrema table has a header");
    assert_eq!(header, "id,x_star,f_star,kind,tolerance");
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5, "bad extrema row: {line}");
        let f = TestFunction::from_id(fields[0]).expect("extrema row names a known function");
        let kind = match fields[3] {
            "min" => ExtremumKind::Min,
            "max" => ExtremumKind::Max,
            other => panic!("bad extremum kind {other:?}"),
        };
        let parse = |s: &str| s.parse::<f64>().expect("numeric extrema field");
        rows.push((
            f,
            Extremum {
                x_star: parse(fields[1]),
                f_star: parse(fields[2]),
                kind,
                tolerance: parse(fields[4]),
            },
        ));
    }
    rows
});

impl TestFunction {
    pub const ALL: [TestFunction; 5] = [
        TestFunction::F1,
        TestFunction::F2,
        TestFunction::F3,
        TestFunction::F4,
        TestFunction::F5,
    ];

    pub fn id(self) -> &'static str {
        match self {
            TestFunction::F1 => "f1",
            TestFunction::F2 => "f2",
            TestFunction::F3 => "f3",
            TestFunction::F4 => "f4",
            TestFunction::F5 => "f5",
        }
    }

    pub fn from_id(id: &str) -> Result<Self, TestbedError> {
        Self::ALL
            .into_iter()
            .find(|f| f.id() == id)
            .ok_or_else(|| TestbedError::UnknownFunction(id.to_owned()))
    }

    /// Domain on which the function is defined and sampled.
    pub fn domain(self) -> Rect<f64> {
        match self {
            TestFunction::F5 => Rect::new(vec![-1.0], vec![1.0]),
            _ => Rect::unit(1),
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        self.deriv(x, 0)
    }

    /// Analytic derivative of the given order (0, 1, or 2).
    pub fn deriv(self, x: f64, order: u32) -> f64 {
        use std::f64::consts::PI;
        assert!(order <= 2, "derivative order capped at 2");
        let bd = beta_deriv(order);
        match self {
            TestFunction::F1 => 1.8 * (bd(10.0, 5.0, x) + bd(7.0, 7.0, x) + bd(5.0, 10.0, x)),
            TestFunction::F2 => 2.4 * bd(30.0, 17.0, x) + 2.8 * bd(4.0, 11.0, x),
            TestFunction::F3 => {
                let s = 32.0 * PI * x - 4.0 * PI / 3.0;
                let trig = match order {
                    0 => {
                        8.0 * s.sin()
                            - 6.0 * (16.0 * PI * x).cos()
                            - 0.2 * (64.0 * PI * x).cos()
                    }
                    1 => {
                        256.0 * PI * s.cos()
                            + 96.0 * PI * (16.0 * PI * x).sin()
                            + 12.8 * PI * (64.0 * PI * x).sin()
                    }
                    _ => {
                        -8192.0 * PI * PI * s.sin()
                            + 1536.0 * PI * PI * (16.0 * PI * x).cos()
                            + 819.2 * PI * PI * (64.0 * PI * x).cos()
                    }
                };
                1.4 * bd(15.0, 30.0, x) + trig
            }
            TestFunction::F4 => {
                let u = 1.0 - 2.0 * x;
                let e = (-2.0 * u * u).exp();
                match order {
                    0 => 5.0 * e * u,
                    1 => -10.0 * e * (1.0 - 4.0 * u * u),
                    _ => -80.0 * u * e * (3.0 - 4.0 * u * u),
                }
            }
            TestFunction::F5 => {
                let t = 8.5 * x;
                match order {
                    0 => t.sin() + t.cos() + (2.0 + x).ln(),
                    1 => 8.5 * (t.cos() - t.sin()) + 1.0 / (2.0 + x),
                    _ => -72.25 * (t.sin() + t.cos()) - 1.0 / ((2.0 + x) * (2.0 + x)),
                }
            }
        }
    }

    /// The catalogued global extremum on `domain()`.
    pub fn registered_extremum(self) -> Extremum {
        EXTREMA
            .iter()
            .find(|(f, _)| *f == self)
            .map(|(_, e)| *e)
            .expect("every function has a registered extremum")
    }
}

/// Noise distribution families for simulated observations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    /// Student t with 3 degrees of freedom, rescaled so the standard
    /// deviation equals `sigma`.
    StudentT3,
}

/// Additive noise specification; `sigma` is always the standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Self {
        NoiseSpec {
            family: NoiseFamily::Gaussian,
            sigma,
        }
    }

    pub fn student_t3(sigma: f64) -> Self {
        NoiseSpec {
            family: NoiseFamily::StudentT3,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<(), TestbedError> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(TestbedError::InvalidSigma(self.sigma));
        }
        Ok(())
    }

    /// Draws `n` noise values. The t3 variant uses one numerator and three
    /// denominator normals per draw, scaled by `sigma / sqrt(3)` so its
    /// standard deviation matches the Gaussian case.
    pub fn sample<G: Rng>(&self, n: usize, rng: &mut G) -> Result<Vec<f64>, TestbedError> {
        self.validate()?;
        let mut out = Vec::with_capacity(n);
        match self.family {
            NoiseFamily::Gaussian => {
                for _ in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(self.sigma * z);
                }
            }
            NoiseFamily::StudentT3 => {
                let scale = self.sigma / 3f64.sqrt();
                for _ in 0..n {
                    let z0: f64 = rng.sample(StandardNormal);
                    let mut chi2 = 0.0;
                    for _ in 0..3 {
                        let z: f64 = rng.sample(StandardNormal);
                        chi2 += z * z;
                    }
                    out.push(scale * z0 / (chi2 / 3.0).sqrt());
                }
            }
        }
        Ok(out)
    }
}

/// Design (covariate) generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignFamily {
    IidUniform,
    /// Tensor grid with each point jittered by up to a quarter cell per
    /// axis, keeping the fill-to-separation ratio bounded.
    JitteredGrid,
}

/// Draws an `n x d` design over `rect`. Points are generated row by row,
/// coordinate by coordinate, so the stream layout is stable.
pub fn gen_design<G: Rng>(
    family: DesignFamily,
    n: usize,
    rect: &Rect<f64>,
    rng: &mut G,
) -> Result<Array2<f64>, TestbedError> {
    if n == 0 {
        return Err(TestbedError::EmptyDesign);
    }
    let d = rect.dim();
    let mut xs = Array2::zeros((n, d));
    match family {
        DesignFamily::IidUniform => {
            for i in 0..n {
                for j in 0..d {
                    let u: f64 = rng.random();
                    xs[[i, j]] = rect.lo()[j] + (rect.hi()[j] - rect.lo()[j]) * u;
                }
            }
        }
        DesignFamily::JitteredGrid => {
            let k = side_length(n, d).ok_or(TestbedError::GridSize { n, dim: d })?;
            for i in 0..n {
                // Lexicographic cell index, first axis most significant.
                let mut rem = i;
                let mut cells = vec![0usize; d];
                for j in (0..d).rev() {
                    cells[j] = rem % k;
                    rem /= k;
                }
                for j in 0..d {
                    let cell = (rect.hi()[j] - rect.lo()[j]) / k as f64;
                    let u: f64 = rng.random();
                    let jitter = (u - 0.5) * 0.5;
                    xs[[i, j]] = rect.lo()[j] + (cells[j] as f64 + 0.5 + jitter) * cell;
                }
            }
        }
    }
    Ok(xs)
}

fn side_length(n: usize, d: usize) -> Option<usize> {
    if d == 1 {
        return Some(n);
    }
    let guess = (n as f64).powf(1.0 / d as f64).round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|&k| k >= 1 && k.pow(d as u32) == n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const RTOL: f64 = 1e-11;

    fn assert_rel(got: f64, want: f64, tol: f64) {
        let scale = want.abs().max(1.0);
        assert!(
            (got - want).abs() <= tol * scale,
            "got {got}, want {want} (rel {})",
            (got - want).abs() / scale
        );
    }

    #[test]
    fn beta_pdf_hand_values() {
        assert_rel(beta_pdf(2.0, 2.0, 0.5), 1.5, 1e-13);
        assert_rel(beta_pdf(10.0, 5.0, 0.5), 1.221923828125, 1e-13);
        assert_rel(beta_pdf(7.0, 7.0, 0.5), 2.9326171875, 1e-13);
        // Uniform special case, endpoints included (powf(0, 0) = 1); only
        // ln_gamma rounding remains.
        for x in [0.0, 0.25, 1.0] {
            assert_rel(beta_pdf(1.0, 1.0, x), 1.0, 1e-14);
        }
        assert_eq!(beta_pdf(3.0, 4.0, -0.1), 0.0);
        assert_eq!(beta_pdf(3.0, 4.0, 1.7), 0.0);
        assert_eq!(beta_pdf(10.0, 5.0, 0.0), 0.0);
        assert_eq!(beta_pdf(10.0, 5.0, 1.0), 0.0);
    }

    #[test]
    fn frozen_values_and_derivatives() {
        // 40-digit reference evaluations of the closed-form expressions.
        let f1 = TestFunction::F1;
        assert_rel(f1.eval(0.3), 7.8289912737036, RTOL);
        assert_rel(f1.eval(0.5), 9.67763671875, RTOL);
        assert_rel(f1.deriv(0.3, 1), 26.065600745184, RTOL);
        assert_rel(f1.deriv(0.3, 2), -231.70545910512, RTOL);
        assert_rel(f1.deriv(0.62, 1), -9.88936508743327691, RTOL);
        assert_rel(f1.deriv(0.62, 2), -153.593090801825709, RTOL);

        assert_rel(TestFunction::F2.eval(0.25), 9.8647224215817083, RTOL);

        let f3 = TestFunction::F3;
        assert_rel(f3.eval(0.1), -5.16752439178989161, RTOL);
        assert_rel(f3.deriv(0.3, 1), 730.731194441864248, RTOL);
        assert_rel(f3.deriv(0.3, 2), -80282.8245925618068, RTOL);
        assert_rel(f3.deriv(0.62, 1), -126.007966993651793, RTOL);
        assert_rel(f3.deriv(0.62, 2), -61808.0349355536307, RTOL);

        let f4 = TestFunction::F4;
        assert_rel(f4.eval(0.2), 1.46025676787991495, RTOL);
        assert_eq!(f4.eval(0.5), 0.0);
        assert_rel(f4.deriv(0.3, 1), -2.61413653346528733, RTOL);
        assert_rel(f4.deriv(0.3, 2), -54.8387752798051386, RTOL);
        assert_rel(f4.deriv(0.62, 1), -6.85858198992820354, RTOL);
        assert_rel(f4.deriv(0.62, 2), 47.3900923392228337, RTOL);

        let f5 = TestFunction::F5;
        assert_rel(f5.eval(0.25), 1.13498367133047575, RTOL);
        assert_rel(f5.eval(0.0), 1.0 + std::f64::consts::LN_2, 1e-14);
        assert_rel(f5.deriv(0.3, 1), -11.36098403863078, RTOL);
        assert_rel(f5.deriv(0.3, 2), 19.4896834223907394, RTOL);
        assert_rel(f5.deriv(0.62, 1), 12.091978885609124, RTOL);
        assert_rel(f5.deriv(0.62, 2), 22.9281586765679524, RTOL);
    }

    #[test]
    fn quadrature_integrals_match() {
        // 64-node Gauss-Legendre is exact for the degree-13 beta polynomial.
        let (nodes, weights) = gauss_legendre::<f64>(64);
        let integrate = |f: &dyn Fn(f64) -> f64| -> f64 {
            nodes
                .iter()
                .zip(&weights)
                .map(|(t, w)| 0.5 * w * f(0.5 * (t + 1.0)))
                .sum()
        };
        assert_rel(integrate(&|x| beta_pdf(10.0, 5.0, x)), 1.0, 1e-10);
        assert_rel(integrate(&|x| TestFunction::F1.eval(x)), 5.4, 1e-10);
        assert!(integrate(&|x| TestFunction::F4.eval(x)).abs() <= 1e-10);
    }

    #[test]
    fn registered_extrema_are_interior_critical_points() {
        for f in TestFunction::ALL {
            let e = f.registered_extremum();
            let dom = f.domain();
            let (lo, hi) = (dom.lo()[0], dom.hi()[0]);
            let margin = 1e-3 * (hi - lo);
            assert!(e.x_star >= lo + margin && e.x_star <= hi - margin, "{f:?}");
            assert!(f.deriv(e.x_star, 1).abs() <= 1e-8, "{f:?} gradient");
            assert_rel(f.eval(e.x_star), e.f_star, 1e-12);
            let curv = f.deriv(e.x_star, 2);
            match e.kind {
                ExtremumKind::Max => assert!(curv < 0.0, "{f:?} curvature"),
                ExtremumKind::Min => assert!(curv > 0.0, "{f:?} curvature"),
            }
            assert!(e.tolerance > 0.0);
        }
    }

    #[test]
    fn grid_scan_and_bisection_recover_extrema() {
        // Independent route to x_star: dense scan, then bisect f' in the
        // bracketing cells.
        for f in TestFunction::ALL {
            let e = f.registered_extremum();
            let dom = f.domain();
            let (lo, hi) = (dom.lo()[0], dom.hi()[0]);
            let cells = 1usize << 20;
            let h = (hi - lo) / cells as f64;
            let sign = match e.kind {
                ExtremumKind::Max => 1.0,
                ExtremumKind::Min => -1.0,
            };
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 0..=cells {
                let x = lo + i as f64 * h;
                let v = sign * f.eval(x);
                if v > best.0 {
                    best = (v, x);
                }
            }
            let (mut a, mut b) = (best.1 - h, best.1 + h);
            let da = f.deriv(a, 1);
            assert!(da * f.deriv(b, 1) < 0.0, "{f:?} bracket");
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if f.deriv(m, 1) * da > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            assert!(
                (0.5 * (a + b) - e.x_star).abs() <= 1e-6,
                "{f:?}: scan {} vs table {}",
                0.5 * (a + b),
                e.x_star
            );
        }
    }

    #[test]
    fn noise_moments_at_one_million_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let sigma = 5.0;

        let g = NoiseSpec::gaussian(sigma).sample(n, &mut rng).unwrap();
        let mean = g.iter().sum::<f64>() / n as f64;
        let sd = (g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        assert!(mean.abs() <= 0.01 * sigma, "gaussian mean {mean}");
        assert!((4.95..=5.05).contains(&sd), "gaussian sd {sd}");

        let t = NoiseSpec::student_t3(sigma).sample(n, &mut rng).unwrap();
        let mean = t.iter().sum::<f64>() / n as f64;
        let sd = (t.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        assert!(mean.abs() <= 0.01 * sigma, "t3 mean {mean}");
        assert!((4.9..=5.1).contains(&sd), "t3 sd {sd}");

        let z = NoiseSpec::gaussian(0.0).sample(100, &mut rng).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
        assert!(NoiseSpec::gaussian(-1.0).sample(1, &mut rng).is_err());
        assert!(NoiseSpec::gaussian(f64::NAN).sample(1, &mut rng).is_err());
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let rect = Rect::new(vec![0.0, 2.0], vec![1.0, 5.0]);
        let mut r1 = ChaCha8Rng::seed_from_u64(42);
        let mut r2 = ChaCha8Rng::seed_from_u64(42);
        let a = gen_design(DesignFamily::IidUniform, 50, &rect, &mut r1).unwrap();
        let b = gen_design(DesignFamily::IidUniform, 50, &rect, &mut r2).unwrap();
        assert_eq!(a, b);
        for row in a.rows() {
            assert!(rect.contains(row.as_slice().unwrap()));
        }

        let mut r3 = ChaCha8Rng::seed_from_u64(42);
        r3.set_stream(1);
        let c = gen_design(DesignFamily::IidUniform, 50, &rect, &mut r3).unwrap();
        assert_ne!(a, c);

        let mut r4 = ChaCha8Rng::seed_from_u64(9);
        let n1 = NoiseSpec::student_t3(1.0).sample(20, &mut r4).unwrap();
        let mut r5 = ChaCha8Rng::seed_from_u64(9);
        let n2 = NoiseSpec::student_t3(1.0).sample(20, &mut r5).unwrap();
        assert_eq!(n1, n2);
    }

    #[test]
    fn jittered_grid_shapes_and_errors() {
        let rect = Rect::<f64>::unit(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = gen_design(DesignFamily::JitteredGrid, 49, &rect, &mut rng).unwrap();
        assert_eq!(xs.shape(), &[49, 2]);
        for row in xs.rows() {
            assert!(rect.contains(row.as_slice().unwrap()));
        }
        let err = gen_design(DesignFamily::JitteredGrid, 50, &rect, &mut rng);
        assert!(matches!(err, Err(TestbedError::GridSize { n: 50, dim: 2 })));
        let err = gen_design(DesignFamily::IidUniform, 0, &rect, &mut rng);
        assert!(matches!(err, Err(TestbedError::EmptyDesign)));
    }

    #[test]
    fn jittered_grid_is_quasi_uniform() {
        let rect = Rect::<f64>::unit(1);
        for (n, seed) in [(100usize, 11u64), (1000, 12)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs = gen_design(DesignFamily::JitteredGrid, n, &rect, &mut rng).unwrap();
            let mut pts: Vec<f64> = xs.column(0).to_vec();
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let sep = pts.windows(2).map(|w| w[1] - w[0]).fold(f64::MAX, f64::min);
            let max_gap = pts.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            let fill = (max_gap / 2.0).max(pts[0]).max(1.0 - pts[n - 1]);
            assert!(fill / sep <= 4.0, "n = {n}: fill/sep = {}", fill / sep);
        }
    }

    #[test]
    fn serde_names_are_stable() {
        let f: TestFunction = serde_json::from_str("\"f3\"").unwrap();
        assert_eq!(f, TestFunction::F3);
        assert_eq!(serde_json::to_string(&TestFunction::F5).unwrap(), "\"f5\"");
        let spec: NoiseSpec =
            serde_json::from_str(r#"{"family":"student_t3","sigma":1.5}"#).unwrap();
        assert_eq!(spec, NoiseSpec::student_t3(1.5));
        assert!(serde_json::from_str::<NoiseSpec>(
            r#"{"family":"gaussian","sigma":1.0,"df":3}"#
        )
        .is_err());
        let d: DesignFamily = serde_json::from_str("\"jittered_grid\"").unwrap();
        assert_eq!(d, DesignFamily::JitteredGrid);
        assert!(TestFunction::from_id("f9").is_err());
    }
}
