use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn expsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expsum")).args(args).output().expect("run expsum")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Data rows of a CSV (after `#` lines and the column header), split on commas.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(text: &str, name: &str) -> Vec<String> {
    let header: Vec<&str> = text.lines().find(|l| !l.starts_with('#')).unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows(text).into_iter().map(|r| r[i].clone()).collect()
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn gauss_spectrum_is_unimodular() {
    let o = expsum(&["gauss", "--p", "7"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let abs = column(&text, "abs");
    assert_eq!(abs.len(), 6);
    for a in &abs[1..] {
        assert!((f(a) - 1.0).abs() < 1e-12);
    }
    // Trivial character: -g(psi, chi_0)/sqrt(7) = 1/sqrt(7).
    assert!((f(&abs[0]) - 1.0 / 7f64.sqrt()).abs() < 1e-12);
}

#[test]
fn raw_kloosterman_at_three() {
    let o = expsum(&["kloosterman", "--p", "3", "--n", "2", "--raw"]);
    assert_eq!(code(&o), 0);
    let re: Vec<f64> = column(&stdout(&o), "re").iter().map(|s| f(s)).collect();
    assert_eq!(re.len(), 2);
    assert!((re[0] + 1.0).abs() < 1e-12 && (re[1] - 2.0).abs() < 1e-12, "{re:?}");
}

#[test]
fn exit_codes() {
    assert_eq!(code(&expsum(&["rudnick", "--p", "2"])), 2);
    assert_eq!(code(&expsum(&["rudnick", "--p", "2", "--k", "3"])), 2);
    assert_eq!(code(&expsum(&["gauss"])), 2);
    assert_eq!(code(&expsum(&["gauss", "--p", "9"])), 2);
    assert_eq!(code(&expsum(&["equidist", "--kernel", "bogus", "--p", "7"])), 2);
    assert_eq!(code(&expsum(&["kloosterman", "--p", "1000003", "--path", "naive"])), 3);
    assert_eq!(code(&expsum(&["kloosterman", "--p", "7", "--psi", "0"])), 2);
    assert_eq!(code(&expsum(&["equidist", "--input", "/nonexistent/file.csv"])), 2);
}

#[test]
fn field_descriptor() {
    let o = expsum(&["field", "--p", "3", "--k", "2", "--json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["p"], 3);
    assert_eq!(v["modulus"], serde_json::json!([1, 0, 1]));
    let table = stdout(&expsum(&["field", "--p", "7", "--table"]));
    let elements = column(&table, "element");
    assert_eq!(elements, ["1", "3", "2", "6", "4", "5"]);
}

#[test]
fn kl2_equidist_report() {
    let o = expsum(&["equidist", "--kernel", "kl2", "--p", "10007", "--measure", "sato-tate", "--moments", "8", "--ks"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["kernel", "q", "count", "weyl", "moments", "ks", "violations"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["kernel"], "kl2");
    assert_eq!(v["q"], 10007);
    assert_eq!(v["count"], 10006);
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
    assert_eq!(v["moments"].as_array().unwrap().len(), 8);
    for row in v["weyl"].as_array().unwrap() {
        assert!(row["formula"].is_string() && row["bound"].is_number());
    }
    assert!(v["ks"]["statistic"].as_f64().unwrap() < 0.05);
}

#[test]
fn moment_threshold_flags_violations() {
    let o = expsum(&["equidist", "--kernel", "kl2", "--p", "101", "--moment-tol", "1e-9"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(!v["violations"].as_array().unwrap().is_empty());
}

#[test]
fn haar_samples_feed_equidist() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = expsum(&["haar-sample", "--group", "su2", "--samples", "20000", "--seed", "5", "--out", out]);
    assert_eq!(code(&o), 0);
    let file = dir.path().join("haar_su2.csv");
    assert!(fs::read_to_string(&file).unwrap().starts_with("# group=su2 samples=20000 seed=5"));
    let o = expsum(&["equidist", "--input", file.to_str().unwrap(), "--measure", "semicircle", "--hist", "40", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("haar_su2_report.json")).unwrap()).unwrap();
    assert_eq!(report["count"], 20000);
    assert!(report["ks"]["statistic"].as_f64().unwrap() < 0.02);
    let hist = fs::read_to_string(dir.path().join("haar_su2_hist.csv")).unwrap();
    assert_eq!(rows(&hist).len(), 40);
    let mass: f64 = rows(&hist).iter().map(|r| f(&r[4]) * (f(&r[1]) - f(&r[0]))).sum();
    assert!((mass - 1.0).abs() < 1e-9);
    assert!(dir.path().join("haar_su2_report.csv").exists());
}

#[test]
fn mellin_of_written_trace_matches() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&expsum(&["evans", "--p", "31", "--out", out])), 0);
    let trace = dir.path().join("evans_q31_trace.csv");
    let direct = fs::read_to_string(dir.path().join("evans_q31_spectrum.csv")).unwrap();
    let o = expsum(&["mellin", "--input", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), direct);
    let naive = stdout(&expsum(&["mellin", "--input", trace.to_str().unwrap(), "--naive"]));
    for (a, b) in column(&naive, "re").iter().zip(column(&direct, "re")) {
        assert!((f(a) - f(&b)).abs() < 1e-12);
    }
}

#[test]
fn single_thread_runs_are_byte_identical() {
    for args in [
        vec!["--threads", "1", "haar-sample", "--group", "uspn:2", "--samples", "500", "--seed", "9"],
        vec!["--threads", "1", "kloosterman", "--p", "9", "--k", "1", "--n", "3"],
        vec!["--threads", "1", "equidist", "--kernel", "kl3", "--p", "101", "--haar-samples", "5000"],
    ] {
        let a = expsum(&args);
        let b = expsum(&args);
        assert_eq!(a.stdout, b.stdout);
        assert!(!a.stdout.is_empty() || code(&a) != 0);
    }
}

fn sweep(dir: &Path, extra: &[&str]) -> (i32, String) {
    let out = dir.to_str().unwrap();
    let mut args = vec!["sweep", "--out", out];
    args.extend_from_slice(extra);
    let o = expsum(&args);
    let name = fs::read_dir(dir).unwrap().filter_map(|e| e.ok()).map(|e| e.path()).find(|p| {
        p.file_name().unwrap().to_str().unwrap().starts_with("sweep_")
    });
    (code(&o), name.map(|p| fs::read_to_string(p).unwrap()).unwrap_or_default())
}

#[test]
fn vertical_gauss_sweep_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let (c, text) = sweep(dir.path(), &["--mode", "vertical", "--p", "3", "--kmax", "6", "--kernel", "gauss"]);
    assert_eq!(c, 0, "{text}");
    let q: Vec<u64> = column(&text, "q").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(q, [3, 9, 27, 81, 243, 729]);
    for ((q, n), bound) in q.iter().zip(column(&text, "max_weyl_order")).zip(column(&text, "weyl_bound")) {
        let n: f64 = n.parse().unwrap();
        let expected = (2.0 * n + 1.0) / (*q as f64).sqrt();
        assert!((f(&bound) - expected).abs() <= 1e-15 * expected, "q = {q}");
    }
    let trend = column(&text, "ks_trend");
    assert_eq!(trend[0], "");
    assert!(trend[1..].iter().all(|t| ["up", "down", "flat"].contains(&t.as_str())));
}

#[test]
fn horizontal_evans_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let (c, text) = sweep(dir.path(), &["--mode", "horizontal", "--from", "5", "--to", "200", "--kernel", "evans"]);
    assert_eq!(c, 0, "{text}");
    let p: Vec<u64> = column(&text, "p").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(p.len(), 44);
    assert_eq!((p[0], *p.last().unwrap()), (5, 199));
    assert!(column(&text, "max_abs").iter().all(|m| f(m) <= 2.0 + 1e-9));
    assert!(column(&text, "status").iter().all(|s| s == "ok"));
}

#[test]
fn sweep_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sweep(dir.path(), &["--mode", "horizontal", "--from", "24", "--to", "28"]).0, 2);
    assert_eq!(sweep(dir.path(), &["--mode", "horizontal", "--from", "2", "--to", "50", "--kernel", "rudnick"]).0, 2);
    assert_eq!(sweep(dir.path(), &["--mode", "vertical", "--p", "4", "--kmax", "3"]).0, 2);
    assert_eq!(sweep(dir.path(), &["--mode", "vertical", "--p", "5", "--kmax", "1"]).0, 2);
}

#[test]
fn ramify_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("evans.json");
    fs::write(
        &path,
        r#"{"name":"evans","rank":1,"swan0":1,"swan_inf":1,"finite_points":[],"genus":0,"slopes":[["0",1],["inf",1]]}"#,
    )
    .unwrap();
    let o = expsum(&["ramify", "--profile", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["euler_char"], 2);
    assert_eq!(v["tannakian_dim"], 2);
    assert_eq!(v["bad_char_bound"], 2);
    assert_eq!(v["deligne_constant"], 2);

    let v: Value = serde_json::from_str(&stdout(&expsum(&["ramify", "--name", "kloosterman(3)", "--json"]))).unwrap();
    assert_eq!(v["deligne_constant"], "1/3");
    assert_eq!(v["bad_char_bound"], 6);
    assert_eq!(code(&expsum(&["ramify", "--name", "salie"])), 2);
    fs::write(&path, r#"{"name":"x","rank":1,"swan0":0,"swan_inf":0,"finite_points":[["1",3,0]]}"#).unwrap();
    assert_eq!(code(&expsum(&["ramify", "--profile", path.to_str().unwrap()])), 2);
}
