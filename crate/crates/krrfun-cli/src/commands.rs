//! Implementations of the six subcommands.

use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, ArrayView2};
use serde_json::json;

use krrfun::domain::Rect;
use krrfun::functional::{Functional, ScalarField};
use krrfun::krr::{select_hyperparams, Dataset, HyperGrid, KrrError, KrrFit};
use krrfun::optimum::{
    default_grid_per_axis, estimate_optimum, optimum_ci, OptimumError, DEFAULT_NEWTON_ITERS,
};
use krrfun::simlab::{
    coverage, failure_rate, ks_statistic, mean_ci_width, qq_data, rate_fit, run_scenario,
    uniform_error_experiment, var_vs_lambda, wcb_vs_lambda, KernelChoice, LambdaRule,
    ReplicationRecord, Scenario, SimlabError,
};
use krrfun::MaternKernel;

use crate::config::{
    FitConfig, FunctionalKind, FunctionalSpec, InferConfig, OptimumConfig, RatesConfig,
    SimulateConfig,
};
use crate::csvio::{fmt_f64, interp, read_h_table, read_xy, write_csv};
use crate::model::ModelCache;
use crate::CliError;

fn krr_numerical(e: KrrError) -> CliError {
    CliError::Numerical(e.to_string())
}

fn simlab_error(e: SimlabError) -> CliError {
    match e {
        SimlabError::InvalidScenario(_) | SimlabError::TinySample(_) => {
            CliError::Config(e.to_string())
        }
        _ => CliError::Numerical(e.to_string()),
    }
}

fn optimum_error(e: OptimumError) -> CliError {
    match e {
        OptimumError::DimMismatch { .. }
        | OptimumError::GridTooCoarse(_)
        | OptimumError::InvalidLevel => CliError::Config(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

/// Fit a model from a kernel choice and optional lambda rule (fixed kernels
/// need the rule; CV grids carry their own lambda candidates).
fn build_fit(
    data: &Dataset<f64>,
    kernel: &KernelChoice,
    lambda: Option<&LambdaRule>,
) -> Result<KrrFit<f64>, CliError> {
    match kernel {
        KernelChoice::Fixed { nu, phi } => {
            let rule = lambda.ok_or_else(|| {
                CliError::Config("a lambda rule is required with a fixed kernel".to_string())
            })?;
            let k = MaternKernel::new(*nu, *phi, data.dim())
                .map_err(|e| CliError::Config(e.to_string()))?;
            KrrFit::fit(data, k, rule.lambda(data.n())).map_err(krr_numerical)
        }
        KernelChoice::CvGrid {
            nu,
            phis,
            lambda_mults,
        } => {
            if lambda.is_some() {
                return Err(CliError::Config(
                    "lambda must be omitted with a cv_grid kernel (the grid supplies it)"
                        .to_string(),
                ));
            }
            let grid = HyperGrid {
                phis: phis.clone(),
                lambda_mults: lambda_mults.clone(),
            };
            select_hyperparams(data, *nu, &grid).map_err(krr_numerical)
        }
    }
}

fn bounding_box(xs: ArrayView2<f64>) -> (Vec<f64>, Vec<f64>) {
    let d = xs.ncols();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in xs.rows() {
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    (lo, hi)
}

pub fn cmd_fit(cfg: &FitConfig, out_dir: &Path) -> Result<(), CliError> {
    let (xs, ys) = read_xy(Path::new(&cfg.data))?;
    let data = Dataset::new(xs, ys).map_err(|e| CliError::Data(e.to_string()))?;
    let fit = build_fit(&data, &cfg.kernel, cfg.lambda.as_ref())?;
    let loocv = match fit.loocv_score() {
        Ok(s) => fmt_f64(s),
        Err(_) => "unavailable".to_string(),
    };
    println!("n={}", fit.n());
    println!("d={}", fit.dim());
    println!("nu={}", fmt_f64(fit.kernel().nu()));
    println!("phi={}", fmt_f64(fit.kernel().phi()));
    println!("lambda={}", fmt_f64(fit.lambda()));
    println!("sigma2_hat={}", fmt_f64(fit.sigma2_hat()));
    println!("loocv={loocv}");
    if let Some(cache_name) = &cfg.cache_out {
        let path = out_dir.join(cache_name);
        ModelCache::from_fit(&fit).save(&path)?;
        println!("cache={}", path.display());
    }
    Ok(())
}

/// Build the functional described by a spec; for L2 the integration domain is
/// the abscissa range of the weight table.
fn build_functional(spec: &FunctionalSpec, dim: usize) -> Result<Functional<f64>, CliError> {
    if !(spec.level > 0.0 && spec.level < 1.0) {
        return Err(CliError::Config(format!(
            "level must lie in (0, 1), got {}",
            spec.level
        )));
    }
    match spec.kind {
        FunctionalKind::Point => {
            let x0 = spec
                .x0
                .clone()
                .ok_or_else(|| CliError::Config("point functional requires x0".to_string()))?;
            Ok(Functional::point(x0))
        }
        FunctionalKind::Deriv => {
            let x0 = spec
                .x0
                .clone()
                .ok_or_else(|| CliError::Config("deriv functional requires x0".to_string()))?;
            let alpha = spec
                .alpha
                .clone()
                .ok_or_else(|| CliError::Config("deriv functional requires alpha".to_string()))?;
            if alpha.len() != x0.len() {
                return Err(CliError::Config(format!(
                    "alpha has {} entries but x0 has {}",
                    alpha.len(),
                    x0.len()
                )));
            }
            Ok(Functional::deriv(alpha, x0))
        }
        FunctionalKind::L2 => {
            if dim != 1 {
                return Err(CliError::Config(
                    "tabulated l2 functionals support one feature column only".to_string(),
                ));
            }
            let h_ref = spec
                .h
                .as_deref()
                .ok_or_else(|| CliError::Config("l2 functional requires h".to_string()))?;
            let table_path = h_ref.strip_prefix("table:").ok_or_else(|| {
                CliError::Config(format!("h must use the form table:<path>, got {h_ref:?}"))
            })?;
            let table = read_h_table(Path::new(table_path))?;
            let rect = Rect::new(vec![table[0].0], vec![table[table.len() - 1].0]);
            let table = Arc::new(table);
            let h: ScalarField<f64> = Arc::new(move |s: &[f64]| interp(&table, s[0]));
            Ok(Functional::l2(h, rect, spec.quad_order))
        }
    }
}

pub fn cmd_infer(cfg: &InferConfig, out_dir: &Path) -> Result<(), CliError> {
    if cfg.functionals.is_empty() {
        return Err(CliError::Config("functionals must be non-empty".to_string()));
    }
    enum Source {
        Fit(KrrFit<f64>),
        Cache {
            system: krrfun::functional::NoiselessKrr<f64>,
            coeffs: Array1<f64>,
            sigma2: f64,
        },
    }
    let source = match (&cfg.data, &cfg.model) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either data or model, not both".to_string(),
            ))
        }
        (None, None) => {
            return Err(CliError::Config(
                "one of data or model is required".to_string(),
            ))
        }
        (Some(data_path), None) => {
            let kernel = cfg.kernel.as_ref().ok_or_else(|| {
                CliError::Config("kernel is required when fitting from data".to_string())
            })?;
            let (xs, ys) = read_xy(Path::new(data_path))?;
            let data = Dataset::new(xs, ys).map_err(|e| CliError::Data(e.to_string()))?;
            Source::Fit(build_fit(&data, kernel, cfg.lambda.as_ref())?)
        }
        (None, Some(model_path)) => {
            if cfg.kernel.is_some() || cfg.lambda.is_some() {
                return Err(CliError::Config(
                    "kernel and lambda come from the model cache; omit them".to_string(),
                ));
            }
            let cache = ModelCache::load(Path::new(model_path))?;
            let coeffs = cache.coeffs_array();
            let sigma2 = cache.sigma2_hat;
            Source::Cache {
                system: cache.system()?,
                coeffs,
                sigma2,
            }
        }
    };
    let (kernel, design) = match &source {
        Source::Fit(fit) => (fit.kernel().clone(), fit.design()),
        Source::Cache { system, .. } => (system.kernel().clone(), system.design()),
    };
    let (lo, hi) = bounding_box(design);
    let mut rows = Vec::new();
    for spec in &cfg.functionals {
        let functional = build_functional(spec, design.ncols())?;
        if let Some(x0) = &spec.x0 {
            let inside = x0.len() == lo.len()
                && x0
                    .iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .all(|(v, (l, h))| v >= l && v <= h);
            if !inside {
                eprintln!(
                    "warning: x0 {:?} lies outside the data bounding box; the interval is extrapolating",
                    x0
                );
            }
        }
        let bound = functional
            .bind(&kernel, design)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let (estimate, var_hat) = match &source {
            Source::Fit(fit) => (bound.estimate(fit), bound.var_hat(fit)),
            Source::Cache {
                system,
                coeffs,
                sigma2,
            } => {
                let estimate = bound.weights().dot(coeffs);
                let var = *sigma2 * system.factor().quad_form_inv_sq(bound.weights());
                (estimate, var)
            }
        };
        let half = bound
            .ci_halfwidth(var_hat, spec.level)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let kind = match spec.kind {
            FunctionalKind::Point => "point",
            FunctionalKind::Deriv => "deriv",
            FunctionalKind::L2 => "l2",
        };
        rows.push(format!(
            "{kind},{},{},{},{}",
            fmt_f64(estimate),
            fmt_f64(var_hat),
            fmt_f64(estimate - half),
            fmt_f64(estimate + half)
        ));
    }
    let path = out_dir.join("estimates.csv");
    write_csv(&path, &[], "kind,estimate,var_hat,lo,hi", &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_optimum(cfg: &OptimumConfig, out_dir: &Path) -> Result<(), CliError> {
    let (xs, ys) = read_xy(Path::new(&cfg.data))?;
    let data = Dataset::new(xs, ys).map_err(|e| CliError::Data(e.to_string()))?;
    let data = if cfg.maximize { data.negated() } else { data };
    let fit = build_fit(&data, &cfg.kernel, cfg.lambda.as_ref())?;
    let d = fit.dim();

    let rect = match &cfg.search_box {
        Some(axes) => {
            if axes.len() != d {
                return Err(CliError::Config(format!(
                    "search_box has {} axes but the data has {d}",
                    axes.len()
                )));
            }
            if axes.iter().any(|[lo, hi]| !(lo < hi)) {
                return Err(CliError::Config(
                    "each search_box axis needs lo < hi".to_string(),
                ));
            }
            Rect::new(
                axes.iter().map(|a| a[0]).collect(),
                axes.iter().map(|a| a[1]).collect(),
            )
        }
        None => {
            let (lo, hi) = bounding_box(fit.design());
            if lo.iter().zip(hi.iter()).any(|(l, h)| !(l < h)) {
                return Err(CliError::Config(
                    "data bounding box is degenerate; give search_box explicitly".to_string(),
                ));
            }
            let shrunk_lo: Vec<f64> = lo
                .iter()
                .zip(hi.iter())
                .map(|(l, h)| l + 0.01 * (h - l))
                .collect();
            let shrunk_hi: Vec<f64> = lo
                .iter()
                .zip(hi.iter())
                .map(|(l, h)| h - 0.01 * (h - l))
                .collect();
            Rect::new(shrunk_lo, shrunk_hi)
        }
    };

    let grid = cfg.grid_per_axis.unwrap_or_else(|| default_grid_per_axis(d));
    let result =
        estimate_optimum(&fit, &rect, grid, DEFAULT_NEWTON_ITERS).map_err(optimum_error)?;
    // The plug-in CI is only meaningful at a locally convex interior optimum;
    // a Hessian that is not positive definite (flat fits, boundary artifacts,
    // constant responses) is surfaced as a numerical failure.
    let (eigs, _) = krrfun::linalg::sym_eigen(result.hessian_hat.view());
    let max_abs = eigs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if eigs.iter().any(|&v| v <= 1e-10 * max_abs) {
        return Err(CliError::Numerical(
            "singular Hessian: the fitted surface is not locally convex at the estimated optimum"
                .to_string(),
        ));
    }
    let ci = optimum_ci(&result, cfg.level).map_err(optimum_error)?;

    let sign = if cfg.maximize { -1.0 } else { 1.0 };
    let f_hat = sign * result.f_min_hat;
    let hessian: Vec<Vec<f64>> = result
        .hessian_hat
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&v| sign * v).collect())
        .collect();
    let cov: Vec<Vec<f64>> = result
        .cov_hat
        .rows()
        .into_iter()
        .map(|r| r.to_vec())
        .collect();
    let report = json!({
        "x_hat": result.x_min_hat,
        "f_hat": f_hat,
        "maximize": cfg.maximize,
        "level": cfg.level,
        "ci": ci.iter().map(|&(lo, hi)| vec![lo, hi]).collect::<Vec<_>>(),
        "hessian": hessian,
        "cov": cov,
        "refined": result.refined,
        "n_grid": result.n_grid,
        "newton_iters": result.newton_iters,
    });
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Data(format!("cannot serialize report: {e}")))?;
    println!("{text}");
    let json_path = out_dir.join("optimum.json");
    std::fs::write(&json_path, &text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", json_path.display())))?;

    let rows: Vec<String> = (0..d)
        .map(|i| {
            format!(
                "{i},{},{},{}",
                fmt_f64(result.x_min_hat[i]),
                fmt_f64(ci[i].0),
                fmt_f64(ci[i].1)
            )
        })
        .collect();
    write_csv(
        &out_dir.join("optimum.csv"),
        &[],
        "axis,x_hat,ci_lo,ci_hi",
        &rows,
    )?;
    Ok(())
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

fn scenario_hash(sc: &Scenario) -> Result<String, CliError> {
    let canonical = serde_json::to_string(sc)
        .map_err(|e| CliError::Config(format!("cannot serialize scenario: {e}")))?;
    Ok(format!("{:016x}", fnv1a64(canonical.as_bytes())))
}

fn run_records(
    mut sc: Scenario,
    seed: Option<u64>,
    workers: usize,
) -> Result<(Scenario, Vec<ReplicationRecord>), CliError> {
    if let Some(s) = seed {
        sc.base_seed = s;
    }
    let records = run_scenario(&sc, workers).map_err(simlab_error)?;
    Ok((sc, records))
}

pub fn cmd_simulate(
    cfg: &SimulateConfig,
    seed: Option<u64>,
    workers: usize,
    out_dir: &Path,
) -> Result<(), CliError> {
    let (sc, records) = run_records(cfg.scenario.clone(), seed, workers)?;
    let cp = coverage(&records).map_err(simlab_error)?;
    let width = mean_ci_width(&records).map_err(simlab_error)?;
    let fr = failure_rate(&records).map_err(simlab_error)?;
    let noise = match sc.noise.family {
        krrfun::testbed::NoiseFamily::Gaussian => "gaussian",
        krrfun::testbed::NoiseFamily::StudentT3 => "student_t3",
    };
    let report_row = format!(
        "{},{},{},{noise},{},{},{}",
        scenario_hash(&sc)?,
        sc.n,
        fmt_f64(sc.noise.sigma),
        fmt_f64(cp),
        fmt_f64(width),
        fmt_f64(fr)
    );
    write_csv(
        &out_dir.join("report.csv"),
        &[],
        "scenario_hash,n,sigma,noise,cp,mean_width,failure_rate",
        &[report_row],
    )?;
    let rows: Vec<String> = records.iter().map(|r| r.to_csv_row()).collect();
    write_csv(
        &out_dir.join("records.csv"),
        &[],
        ReplicationRecord::CSV_HEADER,
        &rows,
    )?;
    println!(
        "cp={} mean_width={} failure_rate={}",
        fmt_f64(cp),
        fmt_f64(width),
        fmt_f64(fr)
    );
    Ok(())
}

pub fn cmd_rates(cfg: &RatesConfig, seed: Option<u64>, out_dir: &Path) -> Result<(), CliError> {
    let (name, points) = match cfg {
        RatesConfig::VarVsLambda {
            n,
            nu,
            phi,
            x0,
            lambdas,
            seed: cfg_seed,
        } => (
            "var_vs_lambda",
            var_vs_lambda(*n, *nu, *phi, *x0, lambdas, seed.unwrap_or(*cfg_seed)),
        ),
        RatesConfig::WcbVsLambda {
            n,
            nu,
            phi,
            x0,
            lambdas,
            seed: cfg_seed,
        } => (
            "wcb_vs_lambda",
            wcb_vs_lambda(*n, *nu, *phi, *x0, lambdas, seed.unwrap_or(*cfg_seed)),
        ),
        RatesConfig::UniformError {
            test_function,
            sigma,
            nu,
            phi,
            ns,
            lambda,
            reps,
            grid_per_axis,
            seed: cfg_seed,
        } => (
            "uniform_error",
            uniform_error_experiment(
                *test_function,
                *sigma,
                *nu,
                *phi,
                ns,
                *lambda,
                *reps,
                *grid_per_axis,
                seed.unwrap_or(*cfg_seed),
            ),
        ),
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().cloned().unzip();
    let (slope, intercept, r2) = rate_fit(&xs, &ys).map_err(simlab_error)?;
    let comments = vec![format!(
        "experiment={name} slope={} intercept={} r2={}",
        fmt_f64(slope),
        fmt_f64(intercept),
        fmt_f64(r2)
    )];
    let rows: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{},{}", fmt_f64(x), fmt_f64(y)))
        .collect();
    write_csv(&out_dir.join("rates.csv"), &comments, "x,y", &rows)?;
    println!("slope={} r2={}", fmt_f64(slope), fmt_f64(r2));
    Ok(())
}

pub fn cmd_qq(
    cfg: &SimulateConfig,
    seed: Option<u64>,
    workers: usize,
    out_dir: &Path,
) -> Result<(), CliError> {
    let (_, records) = run_records(cfg.scenario.clone(), seed, workers)?;
    let stats: Vec<f64> = records
        .iter()
        .filter_map(|r| r.standardized_stat)
        .collect();
    let pairs = qq_data(&stats).map_err(simlab_error)?;
    let ks = ks_statistic(&stats).map_err(simlab_error)?;
    let comments = vec![format!("ks={}", fmt_f64(ks))];
    let rows: Vec<String> = pairs
        .iter()
        .map(|&(t, e)| format!("{},{}", fmt_f64(t), fmt_f64(e)))
        .collect();
    write_csv(
        &out_dir.join("qq.csv"),
        &comments,
        "theoretical,empirical",
        &rows,
    )?;
    println!("ks={}", fmt_f64(ks));
    Ok(())
}
