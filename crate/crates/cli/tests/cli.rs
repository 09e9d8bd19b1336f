//! Golden-file tests for every subcommand, plus exit codes, determinism and the manifest.
//!
//! Set `CARNOT_BLESS=1` to rewrite the golden files from the current binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_carnot");
const REL_TOL: f64 = 1e-10;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn blessing() -> bool {
    std::env::var_os("CARNOT_BLESS").is_some()
}

/// Runs the binary with a private manifest file inside `dir`.
fn carnot(dir: &Path, args: &[&str]) -> Output {
    let manifest = dir.join("manifest.jsonl");
    Command::new(BIN)
        .arg("--manifest")
        .arg(&manifest)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok_stdout(out: &Output) -> String {
    assert!(out.status.success(), "exit {:?}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1e-300)
}

fn json_matches(a: &Value, b: &Value, path: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if close(x, y) {
                Ok(())
            } else {
                Err(format!("{path}: {x} vs {y}"))
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                return Err(format!("{path}: length {} vs {}", x.len(), y.len()));
            }
            x.iter().zip(y).enumerate().try_for_each(|(i, (p, q))| json_matches(p, q, &format!("{path}[{i}]")))
        }
        (Value::Object(x), Value::Object(y)) => {
            let kx: Vec<&String> = x.keys().collect();
            let ky: Vec<&String> = y.keys().collect();
            if kx != ky {
                return Err(format!("{path}: keys {kx:?} vs {ky:?}"));
            }
            x.iter().try_for_each(|(k, v)| json_matches(v, &y[k], &format!("{path}.{k}")))
        }
        _ if a == b => Ok(()),
        _ => Err(format!("{path}: {a} vs {b}")),
    }
}

fn check_json_golden(name: &str, actual: &Value) {
    let path = golden_path(name);
    if blessing() {
        std::fs::write(&path, serde_json::to_string_pretty(actual).unwrap() + "\n").unwrap();
        return;
    }
    let text = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    let expected: Value = serde_json::from_str(&text).unwrap();
    if let Err(e) = json_matches(actual, &expected, "$") {
        panic!("{name} differs from golden: {e}");
    }
}

fn check_text_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if blessing() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    let (al, el): (Vec<&str>, Vec<&str>) = (actual.lines().collect(), expected.lines().collect());
    assert_eq!(al.len(), el.len(), "{name}: line count");
    for (i, (a, e)) in al.iter().zip(&el).enumerate() {
        let (af, ef): (Vec<&str>, Vec<&str>) = (a.split([',', ' ']).collect(), e.split([',', ' ']).collect());
        assert_eq!(af.len(), ef.len(), "{name} line {}: {a} vs {e}", i + 1);
        for (x, y) in af.iter().zip(&ef) {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(x), Ok(y)) => assert!(close(x, y), "{name} line {}: {x} vs {y}", i + 1),
                _ => assert_eq!(x, y, "{name} line {}", i + 1),
            }
        }
    }
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_str(&ok_stdout(out)).expect("stdout is JSON")
}

/// Drops run-dependent fields (paths, timings, float residuals) from a JSON report.
fn normalize(mut v: Value) -> Value {
    fn strip(v: &mut Value) {
        match v {
            Value::Object(map) => {
                for key in ["seconds", "residual", "detail", "data", "out"] {
                    map.remove(key);
                }
                map.values_mut().for_each(strip);
            }
            Value::Array(items) => items.iter_mut().for_each(strip),
            _ => {}
        }
    }
    strip(&mut v);
    v
}

#[test]
fn group_describe_golden() {
    let dir = tempfile::tempdir().unwrap();
    check_json_golden("group_describe_h1.json", &stdout_json(&carnot(dir.path(), &["group", "describe", "--lambda", "-2.5"])));
    let h2 = data("h2.json");
    check_json_golden("group_describe_h2.json", &stdout_json(&carnot(dir.path(), &["--spec", &h2, "group", "describe"])));
}

#[test]
fn psi_subcommands_golden() {
    let dir = tempfile::tempdir().unwrap();
    let cp = data("compound_poisson.json");
    let gd = data("gaussian_drift.json");
    let eval = carnot(dir.path(), &["--psi", &cp, "psi", "eval", "--lambda", "0.5", "--lambda", "-2"]);
    check_json_golden("psi_eval.json", &stdout_json(&eval));
    let psit = carnot(dir.path(), &["--psi", &gd, "psi", "psit", "--lambda", "1", "--t", "0.5"]);
    check_json_golden("psi_psit.json", &stdout_json(&psit));
    let limit = carnot(dir.path(), &["--psi", &cp, "psi", "limit", "--lambda", "1.5"]);
    check_json_golden("psi_limit.json", &stdout_json(&limit));
}

#[test]
fn psi_eval_without_exponent_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&carnot(dir.path(), &["psi", "eval", "--lambda", "3"]));
    assert_eq!(v["values"][0]["value"], serde_json::json!([0.0, 0.0]));
}

#[test]
fn spectrum_subcommands_golden() {
    let dir = tempfile::tempdir().unwrap();
    let delta = carnot(dir.path(), &["spectrum", "delta", "--samples", "6", "--seed", "3"]);
    check_json_golden("spectrum_delta.json", &stdout_json(&delta));
    let gd = data("gaussian_drift.json");
    let ou = carnot(dir.path(), &["--psi", &gd, "spectrum", "ou", "--degree", "2"]);
    let v = stdout_json(&ou);
    let mults: Vec<(u64, u64)> = v["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["algebraic_multiplicity"].as_u64().unwrap(), e["geometric_multiplicity"].as_u64().unwrap()))
        .collect();
    assert_eq!(mults, vec![(1, 1), (2, 2), (4, 4)]);
    check_json_golden("spectrum_ou.json", &v);
}

#[test]
fn kernel_hat_golden() {
    let dir = tempfile::tempdir().unwrap();
    let cp = data("compound_poisson.json");
    let heat = carnot(dir.path(), &["kernel", "hat", "--t", "0.7", "--z", "0.1,-0.4", "--lambda", "1.2"]);
    check_json_golden("kernel_hat_heat.json", &stdout_json(&heat));
    let inv = carnot(dir.path(), &["--psi", &cp, "kernel", "hat", "--invariant", "--z", "0.3,0.2", "--lambda", "-0.8"]);
    check_json_golden("kernel_hat_invariant.json", &stdout_json(&inv));
}

#[test]
fn kernel_invert_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = carnot(dir.path(), &["kernel", "invert", "--t", "0.5", "--grid", "h:-2:2:5,v:-3:3:7", "--out", "q.csv", "--gnuplot"]);
    let info = stdout_json(&out);
    assert_eq!(info["points"], 175);
    check_text_golden("kernel_invert.csv", &std::fs::read_to_string(dir.path().join("q.csv")).unwrap());
    check_text_golden("kernel_invert.dat", &std::fs::read_to_string(dir.path().join("q.dat")).unwrap());
    let cp = data("compound_poisson.json");
    let ou = carnot(dir.path(), &["--psi", &cp, "kernel", "invert", "--ou", "--t", "1", "--grid", "h1:0:0:1,h2:0:1:3,v:-2:2:5", "--out", "ou.csv"]);
    ok_stdout(&ou);
    check_text_golden("kernel_invert_ou.csv", &std::fs::read_to_string(dir.path().join("ou.csv")).unwrap());
}

#[test]
fn simulate_and_estimate_golden() {
    let dir = tempfile::tempdir().unwrap();
    let cp = data("compound_poisson.json");
    let base = ["--psi", cp.as_str(), "simulate"];
    let levy = [&base[..], &["levy", "--paths", "100", "--steps", "64", "--seed", "5", "--out", "levy.csv"]].concat();
    ok_stdout(&carnot(dir.path(), &levy));
    let levy_csv = std::fs::read_to_string(dir.path().join("levy.csv")).unwrap();
    check_text_golden("simulate_levy.csv", &levy_csv);
    let ou = [&base[..], &["ou", "--t", "2", "--paths", "100", "--steps", "32", "--x0", "1,-1,0.5", "--out", "ou.csv"]].concat();
    ok_stdout(&carnot(dir.path(), &ou));
    check_text_golden("simulate_ou.csv", &std::fs::read_to_string(dir.path().join("ou.csv")).unwrap());

    let est = carnot(
        dir.path(),
        &["--psi", &cp, "estimate", "charfn", "--samples", "levy.csv", "--lambda", "0.5", "--lambda", "1", "--against", "levy"],
    );
    let v = stdout_json(&est);
    assert!(v["max_z"].as_f64().unwrap() < 4.0);
    check_json_golden("estimate_charfn.json", &v);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["simulate", "levy", "--paths", "400", "--steps", "128", "--seed", "11", "--out", out];
    ok_stdout(&carnot(dir.path(), &args("a.csv")));
    ok_stdout(&carnot(dir.path(), &args("b.csv")));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    let grid = |out: &'static str| ["kernel", "invert", "--grid", "h:-1:1:3,v:-1:1:3", "--out", out];
    ok_stdout(&carnot(dir.path(), &grid("a_q.csv")));
    ok_stdout(&carnot(dir.path(), &grid("b_q.csv")));
    assert_eq!(std::fs::read(dir.path().join("a_q.csv")).unwrap(), std::fs::read(dir.path().join("b_q.csv")).unwrap());

    // manifests agree once timestamps and timings are removed
    ok_stdout(&carnot(dir.path(), &["verify", "eigen", "--degree", "3"]));
    ok_stdout(&carnot(dir.path(), &["verify", "eigen", "--degree", "3"]));
    let text = std::fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    let strip = |v: &Value| {
        let mut v = v.clone();
        let map = v.as_object_mut().unwrap();
        map.remove("started_unix");
        map.remove("wall_time_s");
        normalize(v)
    };
    assert_eq!(strip(&lines[0]), strip(&lines[1]));
}

fn verify_golden(name: &str, args: &[&str]) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let out = carnot(dir.path(), args);
    let v = stdout_json(&out);
    assert_eq!(v["pass"], true, "{name}: {v}");
    check_json_golden(name, &normalize(v.clone()));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
    let line: Value = serde_json::from_str(manifest.lines().next().unwrap()).unwrap();
    assert_eq!(line["exit_code"], 0);
    assert_eq!(line["checks"].as_array().unwrap().len(), v["checks"].as_array().unwrap().len());
    assert_eq!(line["config_hashes"]["group"].as_str().unwrap().len(), 64);
    v
}

#[test]
fn verify_eigen_golden() {
    let v = verify_golden("verify_eigen.json", &["verify", "eigen", "--degree", "4"]);
    let mults: Vec<u64> =
        v["checks"][0]["data"]["multiplicities"].as_array().unwrap().iter().map(|m| m["algebraic"].as_u64().unwrap()).collect();
    assert_eq!(mults, vec![1, 2, 4, 6, 9]);
}

#[test]
fn verify_marginal_golden() {
    let gd = data("gaussian_drift.json");
    verify_golden("verify_marginal.json", &["--psi", &gd, "verify", "marginal", "--t", "0.8"]);
}

#[test]
fn verify_semigroup_golden() {
    verify_golden("verify_semigroup.json", &["verify", "semigroup", "--profile", "quick"]);
}

#[test]
fn verify_intertwine_golden() {
    let cp = data("compound_poisson.json");
    for pair in ["gamma", "lp", "tbk", "mbeta"] {
        let v = verify_golden(&format!("verify_intertwine_{pair}.json"), &["--psi", &cp, "verify", "intertwine", "--pair", pair, "--t", "0.5"]);
        for r in v["checks"][0]["data"]["reports"].as_array().unwrap() {
            assert!(r["residual"].as_f64().unwrap() < r["tolerance"].as_f64().unwrap());
        }
    }
}

#[test]
fn verify_coeigen_golden() {
    verify_golden("verify_coeigen.json", &["verify", "coeigen", "--beta", "1", "--t", "0.25"]);
}

#[test]
fn verify_plancherel_golden() {
    let v = verify_golden("verify_plancherel.json", &["verify", "plancherel", "--test", "gaussian", "--N", "32"]);
    let global = &v["checks"][0]["data"]["global"];
    assert!(global["relative_error"].as_f64().unwrap() < 1e-3);
    assert!(global["l2_norm_sq"].as_f64().unwrap() > 0.0 && global["plancherel_integral"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_all_quick_profile() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = carnot(dir.path(), &["verify", "all", "--profile", "quick", "--artifacts", "art"]);
    let elapsed = start.elapsed();
    let v = stdout_json(&out);
    assert!(elapsed.as_secs_f64() < 60.0, "quick profile took {elapsed:?}");
    assert_eq!(v["pass"], true);
    check_json_golden("verify_all_quick.json", &normalize(v));
    for f in ["marginal_density.csv", "mc_charfn.csv", "stationary_charfn.csv"] {
        assert!(dir.path().join("art").join(f).exists(), "artifact {f}");
    }
    let manifest = std::fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
    let line: Value = serde_json::from_str(manifest.trim()).unwrap();
    assert_eq!(line["seed"], 7);
    assert!(line["command"].as_array().unwrap().iter().any(|a| a == "all"));
}

#[test]
fn stable_exponent_skips_polynomial_checks() {
    let dir = tempfile::tempdir().unwrap();
    let st = data("stable.json");
    let v = stdout_json(&carnot(dir.path(), &["--psi", &st, "verify", "all", "--profile", "quick"]));
    let status = |name: &str| {
        v["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()["status"].as_str().unwrap().to_string()
    };
    assert_eq!(status("eigen ladder"), "skipped: no moments");
    assert_eq!(status("semigroup law on polynomials"), "skipped: no moments");
    for kernel_or_mc in ["marginal identity", "semigroup law on heat kernels", "MC vs kernel", "stationary law"] {
        assert_eq!(status(kernel_or_mc), "pass", "{kernel_or_mc}");
    }
    check_json_golden("verify_all_stable.json", &normalize(v));
}

#[test]
fn invalid_specification_exits_two_and_names_the_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = carnot(dir.path(), &["--spec", &data("not_skew.json"), "verify", "all"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("A_1") && err.contains("skew"), "{err}");
    assert!(!dir.path().join("manifest.jsonl").exists());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(carnot(dir.path(), &["psi", "eval"]).status.code(), Some(2));
    assert_eq!(carnot(dir.path(), &["psi", "eval", "--lambda", "1,2"]).status.code(), Some(2));
    assert_eq!(carnot(dir.path(), &["verify", "intertwine", "--pair", "sigma"]).status.code(), Some(2));
    assert_eq!(carnot(dir.path(), &["--psi", "missing.json", "group", "describe"]).status.code(), Some(2));
    let out = Command::new(BIN).env("CARNOT_THREADS", "0").args(["group", "describe"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_check_exits_one_with_its_name() {
    let dir = tempfile::tempdir().unwrap();
    // two Hermite functions per axis cannot resolve the test Gaussians
    let out = carnot(dir.path(), &["verify", "plancherel", "--N", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("plancherel"));
    let line: Value = serde_json::from_str(std::fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(line["exit_code"], 1);
}

#[test]
fn thread_cap_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .env("CARNOT_THREADS", "2")
        .args(["--manifest"])
        .arg(dir.path().join("m.jsonl"))
        .args(["verify", "eigen", "--degree", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
}
