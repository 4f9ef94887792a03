//! Replication engine and summary statistics for the simulation studies:
//! coverage probabilities, Q-Q data, Kolmogorov-Smirnov statistics, empirical
//! rate fits, and uniform-error measurements.

use ndarray::{Array1, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Rect;
use crate::functional::Functional;
use crate::kernel::MaternKernel;
use crate::krr::{select_hyperparams, Dataset, HyperGrid, KrrFit};
use crate::optimum::{
    default_grid_per_axis, estimate_optimum, optimum_ci, standardized_optimum_stat,
    DEFAULT_NEWTON_ITERS,
};
use crate::special::{linear_fit, normal_cdf, normal_quantile};
use crate::testbed::{gen_design, DesignFamily, ExtremumKind, NoiseSpec, TestFunction};

#[derive(Debug, Error)]
pub enum SimlabError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("all {0} replications failed")]
    AllReplicationsFailed(usize),
    #[error("empty record batch")]
    EmptyBatch,
    #[error("sample of size {0} is too small (need at least 20)")]
    TinySample(usize),
    #[error("rate fit needs at least 3 strictly positive (x, y) pairs")]
    BadRateInput,
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Rule mapping sample size to the ridge penalty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaRule {
    Fixed { value: f64 },
    OverN { c: f64 },
    LogOverN { c: f64 },
}

impl LambdaRule {
    pub fn lambda(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            LambdaRule::Fixed { value } => value,
            LambdaRule::OverN { c } => c / nf,
            LambdaRule::LogOverN { c } => c * nf.ln() / nf,
        }
    }
}

/// Either a pinned kernel with the scenario's lambda rule, or leave-one-out
/// selection over a grid (which then also picks lambda).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelChoice {
    Fixed {
        nu: f64,
        phi: f64,
    },
    CvGrid {
        nu: f64,
        phis: Vec<f64>,
        lambda_mults: Vec<f64>,
    },
}

/// What each replication estimates and covers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    Point { x0: Vec<f64> },
    Deriv { alpha: Vec<u32>, x0: Vec<f64> },
    Optimum,
}

/// A complete replication study description; `base_seed` plus the
/// replication index fully determine every draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub test_function: TestFunction,
    pub design: DesignFamily,
    pub noise: NoiseSpec,
    pub n: usize,
    pub replications: usize,
    pub lambda_rule: LambdaRule,
    pub kernel: KernelChoice,
    pub target: Target,
    pub level: f64,
    pub base_seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimlabError> {
        let err = |m: &str| Err(SimlabError::InvalidScenario(m.to_owned()));
        if self.n == 0 {
            return err("n must be at least 1");
        }
        if self.replications == 0 {
            return err("replications must be at least 1");
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return err("level must lie in (0, 1)");
        }
        if self.noise.validate().is_err() {
            return err("noise sigma must be finite and nonnegative");
        }
        let dom = self.test_function.domain();
        match &self.target {
            Target::Point { x0 } | Target::Deriv { x0, .. } => {
                if x0.len() != dom.dim() || !dom.contains(x0) {
                    return err("target point must lie in the test function's domain");
                }
                if let Target::Deriv { alpha, .. } = &self.target {
                    if alpha.len() != dom.dim() {
                        return err("derivative multi-index must match the domain dimension");
                    }
                }
            }
            Target::Optimum => {}
        }
        Ok(())
    }

    /// The true value the replication CIs are judged against.
    pub fn truth(&self) -> f64 {
        match &self.target {
            Target::Point { x0 } => self.test_function.eval(x0[0]),
            Target::Deriv { alpha, x0 } => self.test_function.deriv(x0[0], alpha[0]),
            Target::Optimum => self.test_function.registered_extremum().x_star,
        }
    }
}

/// One replication's outcome. Failed replications carry a message and `None`
/// in every numeric field, so batches never abort.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: u64,
    pub seed: u64,
    pub estimate: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub covered: Option<bool>,
    pub standardized_stat: Option<f64>,
    pub selected_phi: Option<f64>,
    pub selected_lambda: Option<f64>,
    pub failure: Option<String>,
}

impl ReplicationRecord {
    pub const CSV_HEADER: &'static str =
        "rep,seed,estimate,ci_lo,ci_hi,covered,standardized_stat,selected_phi,selected_lambda,failure";

    fn failed(rep: u64, seed: u64, message: String) -> Self {
        ReplicationRecord {
            rep,
            seed,
            estimate: None,
            ci_lo: None,
            ci_hi: None,
            covered: None,
            standardized_stat: None,
            selected_phi: None,
            selected_lambda: None,
            failure: Some(message),
        }
    }

    /// Stable CSV row; numbers use shortest round-trip formatting, absent
    /// fields are empty.
    pub fn to_csv_row(&self) -> String {
        let num = |v: &Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let cov = match self.covered {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.rep,
            self.seed,
            num(&self.estimate),
            num(&self.ci_lo),
            num(&self.ci_hi),
            cov,
            num(&self.standardized_stat),
            num(&self.selected_phi),
            num(&self.selected_lambda),
            self.failure.as_deref().unwrap_or("")
        )
    }
}

fn run_one(sc: &Scenario, truth: f64, rep: u64) -> ReplicationRecord {
    // Substream discipline: one ChaCha stream per replication; the design is
    // drawn first, then the noise.
    let mut rng = ChaCha8Rng::seed_from_u64(sc.base_seed);
    rng.set_stream(rep);
    let seed = sc.base_seed;
    let fail = |m: String| ReplicationRecord::failed(rep, seed, m);

    let f = sc.test_function;
    let dom = f.domain();
    let xs = match gen_design(sc.design, sc.n, &dom, &mut rng) {
        Ok(xs) => xs,
        Err(e) => return fail(e.to_string()),
    };
    let eps = match sc.noise.sample(sc.n, &mut rng) {
        Ok(e) => e,
        Err(e) => return fail(e.to_string()),
    };
    let negate = matches!(sc.target, Target::Optimum)
        && f.registered_extremum().kind == ExtremumKind::Max;
    let ys = Array1::from_shape_fn(sc.n, |i| {
        let v = f.eval(xs[[i, 0]]) + eps[i];
        if negate {
            -v
        } else {
            v
        }
    });
    let data = match Dataset::new(xs, ys) {
        Ok(d) => d,
        Err(e) => return fail(e.to_string()),
    };

    let fit = match &sc.kernel {
        KernelChoice::Fixed { nu, phi } => MaternKernel::new(*nu, *phi, dom.dim())
            .map_err(|e| e.to_string())
            .and_then(|k| {
                KrrFit::fit(&data, k, sc.lambda_rule.lambda(sc.n)).map_err(|e| e.to_string())
            }),
        KernelChoice::CvGrid {
            nu,
            phis,
            lambda_mults,
        } => {
            let grid = HyperGrid {
                phis: phis.clone(),
                lambda_mults: lambda_mults.clone(),
            };
            select_hyperparams(&data, *nu, &grid).map_err(|e| e.to_string())
        }
    };
    let fit = match fit {
        Ok(f) => f,
        Err(m) => return fail(m),
    };
    let selected_phi = Some(fit.kernel().phi());
    let selected_lambda = Some(fit.lambda());

    match &sc.target {
        Target::Point { .. } | Target::Deriv { .. } => {
            let functional = match &sc.target {
                Target::Point { x0 } => Functional::point(x0.clone()),
                Target::Deriv { alpha, x0 } => Functional::deriv(alpha.clone(), x0.clone()),
                Target::Optimum => unreachable!(),
            };
            let bound = match functional.bind(fit.kernel(), fit.design()) {
                Ok(b) => b,
                Err(e) => return fail(e.to_string()),
            };
            let estimate = bound.estimate(&fit);
            let (lo, hi) = match bound.confidence_interval(&fit, sc.level) {
                Ok(ci) => ci,
                Err(e) => return fail(e.to_string()),
            };
            // Known-sigma variance term (estimate minus its conditional
            // mean, standardized); exactly standard normal under Gaussian
            // noise.
            let stat = if sc.noise.sigma > 0.0 {
                let v = fit.factor().solve_vec(bound.weights());
                let den = sc.noise.sigma * v.dot(&v).sqrt();
                if den > 0.0 {
                    let num: f64 = v
                        .iter()
                        .zip(&eps)
                        .map(|(vi, ei)| vi * if negate { -ei } else { *ei })
                        .sum();
                    Some(num / den)
                } else {
                    None
                }
            } else {
                None
            };
            ReplicationRecord {
                rep,
                seed,
                estimate: Some(estimate),
                ci_lo: Some(lo),
                ci_hi: Some(hi),
                covered: Some(lo <= truth && truth <= hi),
                standardized_stat: stat,
                selected_phi,
                selected_lambda,
                failure: None,
            }
        }
        Target::Optimum => {
            let grid = default_grid_per_axis(dom.dim());
            let res = match estimate_optimum(&fit, &dom, grid, DEFAULT_NEWTON_ITERS) {
                Ok(r) => r,
                Err(e) => return fail(e.to_string()),
            };
            let ci = match optimum_ci(&res, sc.level) {
                Ok(ci) => ci,
                Err(e) => return fail(e.to_string()),
            };
            let stat = standardized_optimum_stat(&res, &[truth]).ok().map(|s| s[0]);
            let (lo, hi) = ci[0];
            ReplicationRecord {
                rep,
                seed,
                estimate: Some(res.x_min_hat[0]),
                ci_lo: Some(lo),
                ci_hi: Some(hi),
                covered: Some(lo <= truth && truth <= hi),
                standardized_stat: stat,
                selected_phi,
                selected_lambda,
                failure: None,
            }
        }
    }
}

/// Runs every replication of the scenario on `workers` threads. Records come
/// back in replication order and are identical for any worker count.
pub fn run_scenario(sc: &Scenario, workers: usize) -> Result<Vec<ReplicationRecord>, SimlabError> {
    sc.validate()?;
    let truth = sc.truth();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimlabError::Pool(e.to_string()))?;
    Ok(pool.install(|| {
        (0..sc.replications as u64)
            .into_par_iter()
            .map(|rep| run_one(sc, truth, rep))
            .collect()
    }))
}

fn successes(records: &[ReplicationRecord]) -> Result<Vec<&ReplicationRecord>, SimlabError> {
    if records.is_empty() {
        return Err(SimlabError::EmptyBatch);
    }
    let ok: Vec<&ReplicationRecord> = records.iter().filter(|r| r.failure.is_none()).collect();
    if ok.is_empty() {
        return Err(SimlabError::AllReplicationsFailed(records.len()));
    }
    Ok(ok)
}

/// Proportion of successful replications whose CI covered the truth.
pub fn coverage(records: &[ReplicationRecord]) -> Result<f64, SimlabError> {
    let ok = successes(records)?;
    let hits = ok.iter().filter(|r| r.covered == Some(true)).count();
    Ok(hits as f64 / ok.len() as f64)
}

/// Mean CI width over successful replications.
pub fn mean_ci_width(records: &[ReplicationRecord]) -> Result<f64, SimlabError> {
    let ok = successes(records)?;
    let total: f64 = ok
        .iter()
        .map(|r| r.ci_hi.unwrap_or(f64::NAN) - r.ci_lo.unwrap_or(f64::NAN))
        .sum();
    Ok(total / ok.len() as f64)
}

/// Fraction of replications that failed.
pub fn failure_rate(records: &[ReplicationRecord]) -> Result<f64, SimlabError> {
    if records.is_empty() {
        return Err(SimlabError::EmptyBatch);
    }
    let failed = records.iter().filter(|r| r.failure.is_some()).count();
    Ok(failed as f64 / records.len() as f64)
}

/// Normal Q-Q pairs: `(quantile at (i - 0.5)/N, i-th order statistic)`.
pub fn qq_data(stats: &[f64]) -> Result<Vec<(f64, f64)>, SimlabError> {
    if stats.len() < 20 {
        return Err(SimlabError::TinySample(stats.len()));
    }
    let mut sorted = stats.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (normal_quantile((i as f64 + 0.5) / n), v))
        .collect())
}

/// Kolmogorov-Smirnov distance between the sample and the standard normal.
pub fn ks_statistic(sample: &[f64]) -> Result<f64, SimlabError> {
    if sample.len() < 20 {
        return Err(SimlabError::TinySample(sample.len()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let n = sorted.len() as f64;
    let mut ks = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let phi = normal_cdf(x);
        ks = ks
            .max((phi - i as f64 / n).abs())
            .max(((i as f64 + 1.0) / n - phi).abs());
    }
    Ok(ks)
}

/// Least squares of `log y` on `log x`, for empirical convergence rates.
/// Returns `(slope, intercept, r_squared)`.
pub fn rate_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64), SimlabError> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(SimlabError::BadRateInput);
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(SimlabError::BadRateInput);
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly))
}

/// Max absolute deviation of the fitted derivative from the truth over a
/// dense grid on `rect`.
pub fn uniform_error(
    fit: &KrrFit<f64>,
    truth: &dyn Fn(&[f64]) -> f64,
    alpha: &[u32],
    rect: &Rect<f64>,
    grid_per_axis: usize,
) -> f64 {
    let d = rect.dim();
    let g = grid_per_axis.max(2);
    let total = g.pow(d as u32);
    let order: u32 = alpha.iter().sum();
    let mut worst = 0.0f64;
    let mut x = vec![0.0; d];
    for idx in 0..total {
        let mut rem = idx;
        for j in (0..d).rev() {
            let t = rem % g;
            rem /= g;
            x[j] = rect.lo()[j] + (rect.hi()[j] - rect.lo()[j]) * t as f64 / (g - 1) as f64;
        }
        let xv = ArrayView1::from(&x[..]);
        let fitted = if order == 0 {
            fit.predict(xv)
        } else {
            fit.predict_deriv(alpha, xv).expect("derivative available")
        };
        worst = worst.max((fitted - truth(&x)).abs());
    }
    worst
}

/// Deterministic quasi-uniform design and exact functional variance for a
/// ladder of penalties; no response or selection involved, isolating the
/// variance scaling in lambda.
pub fn var_vs_lambda(
    n: usize,
    nu: f64,
    phi: f64,
    x0: f64,
    lambdas: &[f64],
    seed: u64,
) -> Vec<(f64, f64)> {
    let rect = Rect::unit(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = gen_design(DesignFamily::JitteredGrid, n, &rect, &mut rng).expect("design");
    let kernel = MaternKernel::new(nu, phi, 1).expect("kernel");
    let gram = kernel.gram(xs.view());
    let data = Dataset::new(xs, Array1::zeros(n)).expect("data");
    lambdas
        .iter()
        .map(|&lambda| {
            let fit = KrrFit::fit_with_gram(&data, kernel.clone(), lambda, &gram)
                .expect("factorization");
            let bound = Functional::point(vec![x0])
                .bind(fit.kernel(), fit.design())
                .expect("bind");
            (lambda, bound.var_exact(&fit, 1.0))
        })
        .collect()
}

/// Worst-case bias of a point functional across a penalty ladder, on a
/// deterministic quasi-uniform design.
pub fn wcb_vs_lambda(
    n: usize,
    nu: f64,
    phi: f64,
    x0: f64,
    lambdas: &[f64],
    seed: u64,
) -> Vec<(f64, f64)> {
    use crate::functional::NoiselessKrr;
    let rect = Rect::unit(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = gen_design(DesignFamily::JitteredGrid, n, &rect, &mut rng).expect("design");
    let kernel = MaternKernel::new(nu, phi, 1).expect("kernel");
    let gram = kernel.gram(xs.view());
    lambdas
        .iter()
        .map(|&lambda| {
            let nk = NoiselessKrr::with_gram(kernel.clone(), xs.clone(), gram.clone(), lambda)
                .expect("factorization");
            let bound = Functional::point(vec![x0])
                .bind(nk.kernel(), nk.design())
                .expect("bind");
            (lambda, nk.worst_case_bias(&bound).expect("worst-case bias"))
        })
        .collect()
}

/// Median sup-norm error of the fit over `reps` noisy replications per
/// sample size, with the penalty tied to n by `rule` and the kernel pinned.
pub fn uniform_error_experiment(
    f: TestFunction,
    sigma: f64,
    nu: f64,
    phi: f64,
    ns: &[usize],
    rule: LambdaRule,
    reps: usize,
    grid_per_axis: usize,
    base_seed: u64,
) -> Vec<(f64, f64)> {
    let dom = f.domain();
    let kernel = MaternKernel::new(nu, phi, 1).expect("kernel");
    let noise = NoiseSpec::gaussian(sigma);
    ns.iter()
        .map(|&n| {
            let mut errs: Vec<f64> = (0..reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(n as u64));
                    rng.set_stream(rep);
                    let xs = gen_design(DesignFamily::IidUniform, n, &dom, &mut rng)
                        .expect("design");
                    let eps = noise.sample(n, &mut rng).expect("noise");
                    let ys = Array1::from_shape_fn(n, |i| f.eval(xs[[i, 0]]) + eps[i]);
                    let data = Dataset::new(xs, ys).expect("data");
                    let fit =
                        KrrFit::fit(&data, kernel.clone(), rule.lambda(n)).expect("fit");
                    uniform_error(&fit, &|x| f.eval(x[0]), &[0], &dom, grid_per_axis)
                })
                .collect();
            errs.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
            let mid = errs.len() / 2;
            let median = if errs.len() % 2 == 1 {
                errs[mid]
            } else {
                0.5 * (errs[mid - 1] + errs[mid])
            };
            (n as f64, median)
        })
        .collect()
}
