//! End-to-end tests of the `krrfun` binary: happy paths, exit codes, and the
//! documented closed-form examples.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_krrfun")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, content: &str) {
    fs::write(dir.join(name), content).unwrap();
}

fn quad_csv(n: usize) -> String {
    let mut s = String::from("x,y\n");
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        let y = (x - 0.3) * (x - 0.3);
        s.push_str(&format!("{x},{y}\n"));
    }
    s
}

fn f4(x: f64) -> f64 {
    let u = 1.0 - 2.0 * x;
    5.0 * (-2.0 * u * u).exp() * u
}

#[test]
fn fit_one_row_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "one.csv", "x,y\n0.5,3.0\n");
    write(
        dir.path(),
        "fit.json",
        r#"{"data":"one.csv","kernel":{"mode":"fixed","nu":2.5,"phi":1.0},"lambda":{"rule":"fixed","value":1.0},"cache_out":"model.json"}"#,
    );
    let out = run_in(dir.path(), &["fit", "--config", "fit.json"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    // n=1, K=1, lambda=1: alpha = y/2, sigma2_hat = y^2/4
    assert!(text.contains("n=1"), "{text}");
    assert!(text.contains("sigma2_hat=2.2499999999999996"), "{text}");
    let rerun = run_in(dir.path(), &["fit", "--config", "fit.json"]);
    assert_eq!(text, stdout_of(&rerun), "fit must be deterministic");
    assert!(dir.path().join("model.json").exists());
}

#[test]
fn empty_csv_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "empty.csv", "x,y\n");
    write(
        dir.path(),
        "fit.json",
        r#"{"data":"empty.csv","kernel":{"mode":"fixed","nu":2.5,"phi":1.0},"lambda":{"rule":"fixed","value":1.0}}"#,
    );
    let out = run_in(dir.path(), &["fit", "--config", "fit.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_of(&out).contains("no data rows"), "{}", stderr_of(&out));
}

#[test]
fn malformed_cell_reports_one_based_line() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.csv", "x,y\n0.1,1.0\noops,2.0\n");
    write(
        dir.path(),
        "fit.json",
        r#"{"data":"bad.csv","kernel":{"mode":"fixed","nu":2.5,"phi":1.0},"lambda":{"rule":"fixed","value":1.0}}"#,
    );
    let out = run_in(dir.path(), &["fit", "--config", "fit.json"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_of(&out);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("oops"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected_with_pointer() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data.csv", "x,y\n0.5,1.0\n");
    write(
        dir.path(),
        "fit.json",
        r#"{"data":"data.csv","kernel":{"mode":"fixed","nu":2.5,"phi":1.0},"lambda":{"rule":"fixed","value":1.0},"typo_field":true}"#,
    );
    let out = run_in(dir.path(), &["fit", "--config", "fit.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("/typo_field"), "{err}");
    assert!(err.contains("unknown field"), "{err}");

    write(
        dir.path(),
        "nested.json",
        r#"{"data":"data.csv","kernel":{"mode":"fixed","nu":2.5,"phi":1.0,"extra":1},"lambda":{"rule":"fixed","value":1.0}}"#,
    );
    let out = run_in(dir.path(), &["fit", "--config", "nested.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("/kernel"), "{}", stderr_of(&out));
}

#[test]
fn missing_config_flag_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["fit"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--config"), "{}", stderr_of(&out));
}

#[test]
fn deriv_with_zero_alpha_equals_point() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "quad.csv", &quad_csv(150));
    write(
        dir.path(),
        "infer.json",
        r#"{"data":"quad.csv","kernel":{"mode":"fixed","nu":3.0,"phi":1.0},"lambda":{"rule":"fixed","value":0.00001},"functionals":[{"kind":"point","x0":[0.4]},{"kind":"deriv","x0":[0.4],"alpha":[0]}]}"#,
    );
    let out = run_in(dir.path(), &["infer", "--config", "infer.json"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let csv = fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    let strip_kind = |r: &str| r.splitn(2, ',').nth(1).unwrap().to_string();
    assert_eq!(strip_kind(rows[0]), strip_kind(rows[1]));
}

#[test]
fn l2_with_unit_weight_matches_riemann_integral() {
    let dir = tempfile::tempdir().unwrap();
    let n = 500;
    let mut data = String::from("x,y\n");
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        data.push_str(&format!("{x},{}\n", f4(x)));
    }
    write(dir.path(), "f4.csv", &data);
    write(dir.path(), "h.csv", "x,h\n0.0,1.0\n1.0,1.0\n");
    write(
        dir.path(),
        "infer.json",
        r#"{"data":"f4.csv","kernel":{"mode":"fixed","nu":3.0,"phi":1.0},"lambda":{"rule":"fixed","value":0.000001},"functionals":[{"kind":"l2","h":"table:h.csv","quad_order":200}]}"#,
    );
    let out = run_in(dir.path(), &["infer", "--config", "infer.json"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let csv = fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    let estimate: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    let m = 1_000_000;
    let oracle: f64 = (0..m).map(|i| f4((i as f64 + 0.5) / m as f64)).sum::<f64>() / m as f64;
    assert!(
        (estimate - oracle).abs() <= 1e-2,
        "estimate {estimate} vs oracle {oracle}"
    );
}

#[test]
fn infer_outside_bounding_box_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "quad.csv", &quad_csv(100));
    write(
        dir.path(),
        "infer.json",
        r#"{"data":"quad.csv","kernel":{"mode":"fixed","nu":3.0,"phi":1.0},"lambda":{"rule":"fixed","value":0.0001},"functionals":[{"kind":"point","x0":[2.0]}]}"#,
    );
    let out = run_in(dir.path(), &["infer", "--config", "infer.json"]);
    assert!(out.status.success());
    assert!(stderr_of(&out).contains("warning"), "{}", stderr_of(&out));
}

#[test]
fn cached_model_reproduces_predictions() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "quad.csv", &quad_csv(120));
    write(
        dir.path(),
        "fit.json",
        r#"{"data":"quad.csv","kernel":{"mode":"fixed","nu":2.5,"phi":1.5},"lambda":{"rule":"over_n","c":0.5},"cache_out":"model.json"}"#,
    );
    assert!(run_in(dir.path(), &["fit", "--config", "fit.json"]).status.success());
    let functionals = r#"[{"kind":"point","x0":[0.21]},{"kind":"point","x0":[0.5]},{"kind":"point","x0":[0.83]},{"kind":"deriv","x0":[0.4],"alpha":[1]}]"#;
    write(
        dir.path(),
        "from_data.json",
        &format!(
            r#"{{"data":"quad.csv","kernel":{{"mode":"fixed","nu":2.5,"phi":1.5}},"lambda":{{"rule":"over_n","c":0.5}},"functionals":{functionals}}}"#
        ),
    );
    write(
        dir.path(),
        "from_model.json",
        &format!(r#"{{"model":"model.json","functionals":{functionals}}}"#),
    );
    assert!(run_in(
        dir.path(),
        &["infer", "--config", "from_data.json", "--out", "a"]
    )
    .status
    .success());
    assert!(run_in(
        dir.path(),
        &["infer", "--config", "from_model.json", "--out", "b"]
    )
    .status
    .success());
    let a = fs::read_to_string(dir.path().join("a/estimates.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("b/estimates.csv")).unwrap();
    for (ra, rb) in a.lines().skip(1).zip(b.lines().skip(1)) {
        let va: f64 = ra.split(',').nth(1).unwrap().parse().unwrap();
        let vb: f64 = rb.split(',').nth(1).unwrap().parse().unwrap();
        assert!(
            (va - vb).abs() <= 1e-12 * va.abs().max(1.0),
            "cache round trip: {va} vs {vb}"
        );
    }
}

#[test]
fn optimum_recovers_quadratic_minimum_and_negation_swaps() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "quad.csv", &quad_csv(200));
    let neg: String = {
        let mut s = String::from("x,y\n");
        for i in 0..200 {
            let x = (i as f64 + 0.5) / 200.0;
            s.push_str(&format!("{x},{}\n", -(x - 0.3) * (x - 0.3)));
        }
        s
    };
    write(dir.path(), "quadneg.csv", &neg);
    write(
        dir.path(),
        "min.json",
        r#"{"data":"quad.csv","kernel":{"mode":"fixed","nu":3.0,"phi":1.0},"lambda":{"rule":"fixed","value":0.00001}}"#,
    );
    write(
        dir.path(),
        "max.json",
        r#"{"data":"quadneg.csv","kernel":{"mode":"fixed","nu":3.0,"phi":1.0},"lambda":{"rule":"fixed","value":0.00001},"maximize":true}"#,
    );
    let out = run_in(dir.path(), &["optimum", "--config", "min.json", "--out", "lo"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("lo/optimum.json")).unwrap())
            .unwrap();
    let x_hat = report["x_hat"][0].as_f64().unwrap();
    assert!((x_hat - 0.3).abs() <= 2e-3, "x_hat {x_hat}");
    let (lo, hi) = (
        report["ci"][0][0].as_f64().unwrap(),
        report["ci"][0][1].as_f64().unwrap(),
    );
    assert!(lo < x_hat && x_hat < hi);

    let out = run_in(dir.path(), &["optimum", "--config", "max.json", "--out", "hi"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let max_report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("hi/optimum.json")).unwrap())
            .unwrap();
    assert_eq!(report["x_hat"], max_report["x_hat"]);
    assert_eq!(report["ci"], max_report["ci"]);
    assert_eq!(report["cov"], max_report["cov"]);
    let f_min = report["f_hat"].as_f64().unwrap();
    let f_max = max_report["f_hat"].as_f64().unwrap();
    assert!((f_min + f_max).abs() <= 1e-15);
    let h_min = report["hessian"][0][0].as_f64().unwrap();
    let h_max = max_report["hessian"][0][0].as_f64().unwrap();
    assert!((h_min + h_max).abs() <= 1e-15);
}

#[test]
fn constant_response_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = String::from("x,y\n");
    for i in 0..60 {
        s.push_str(&format!("{},2.0\n", (i as f64 + 0.5) / 60.0));
    }
    write(dir.path(), "const.csv", &s);
    write(
        dir.path(),
        "opt.json",
        r#"{"data":"const.csv","kernel":{"mode":"fixed","nu":3.0,"phi":1.0},"lambda":{"rule":"fixed","value":0.001}}"#,
    );
    let out = run_in(dir.path(), &["optimum", "--config", "opt.json"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr_of(&out));
    assert!(
        stderr_of(&out).to_lowercase().contains("hessian"),
        "{}",
        stderr_of(&out)
    );
}

#[test]
fn rates_report_carries_slope_and_good_fit() {
    let dir = tempfile::tempdir().unwrap();
    let lambdas: Vec<f64> = (0..8).map(|i| 1e-4 * 10f64.powf(2.0 * i as f64 / 7.0)).collect();
    write(
        dir.path(),
        "rates.json",
        &format!(
            r#"{{"experiment":"var_vs_lambda","n":2000,"nu":3.0,"phi":1.0,"x0":0.5,"lambdas":{},"seed":20260814}}"#,
            serde_json::to_string(&lambdas).unwrap()
        ),
    );
    let out = run_in(dir.path(), &["rates", "--config", "rates.json"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let csv = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let comment = csv.lines().next().unwrap();
    assert!(comment.starts_with("# experiment=var_vs_lambda"), "{comment}");
    assert!(comment.contains("slope="), "{comment}");
    let r2: f64 = comment
        .split("r2=")
        .nth(1)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(r2 >= 0.98, "r2 {r2}");
    assert_eq!(csv.lines().nth(1).unwrap(), "x,y");
    assert_eq!(csv.lines().count(), 2 + lambdas.len());
}

#[test]
fn qq_emits_monotone_columns_with_ks_comment() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "qq.json",
        r#"{"scenario":{"test_function":"f1","design":"iid_uniform","noise":{"family":"gaussian","sigma":0.5},"n":64,"replications":60,"lambda_rule":{"rule":"over_n","c":1.0},"kernel":{"mode":"fixed","nu":2.5,"phi":2.0},"target":{"kind":"point","x0":[0.5]},"level":0.95,"base_seed":7}}"#,
    );
    let out = run_in(dir.path(), &["qq", "--config", "qq.json"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let csv = fs::read_to_string(dir.path().join("qq.csv")).unwrap();
    let mut lines = csv.lines();
    let ks_line = lines.next().unwrap();
    assert!(ks_line.starts_with("# ks="), "{ks_line}");
    let ks: f64 = ks_line.trim_start_matches("# ks=").parse().unwrap();
    assert!(ks > 0.0 && ks < 1.0);
    assert_eq!(lines.next().unwrap(), "theoretical,empirical");
    let pairs: Vec<(f64, f64)> = lines
        .map(|l| {
            let mut it = l.split(',');
            (
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
            )
        })
        .collect();
    assert_eq!(pairs.len(), 60);
    assert!(pairs.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
}

#[test]
fn seed_flag_overrides_scenario_seed() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "sim.json",
        r#"{"scenario":{"test_function":"f1","design":"iid_uniform","noise":{"family":"gaussian","sigma":0.5},"n":32,"replications":30,"lambda_rule":{"rule":"over_n","c":1.0},"kernel":{"mode":"fixed","nu":2.5,"phi":2.0},"target":{"kind":"point","x0":[0.5]},"level":0.95,"base_seed":1}}"#,
    );
    assert!(run_in(dir.path(), &["simulate", "--config", "sim.json", "--out", "a"])
        .status
        .success());
    assert!(run_in(
        dir.path(),
        &["simulate", "--config", "sim.json", "--seed", "99", "--out", "b"]
    )
    .status
    .success());
    let a = fs::read_to_string(dir.path().join("a/records.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("b/records.csv")).unwrap();
    assert_ne!(a, b, "overriding the seed must change the records");
}
