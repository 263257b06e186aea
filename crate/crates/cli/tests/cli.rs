use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sml"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn small_config(n_iters: usize, algorithms: &[(&str, f64)], noise_var: f64) -> String {
    let mut s = format!(
        "schema_version = 1\nm = 10\nk = 2\nn_iters = {n_iters}\nn_realizations = 20\n\
         noise_var = {noise_var:e}\nplant_seed = 0\nsignal_seed = 1\n"
    );
    for (kind, mu) in algorithms {
        s.push_str(&format!("\n[[algorithm]]\nkind = \"{kind}\"\nmu = {mu}\n"));
    }
    s
}

fn read_manifest(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn k2_config_writes_7000_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_dir().join("sml_k2.toml");
    let out = sml(&[
        "--out",
        tmp.path().to_str().unwrap(),
        "run",
        cfg.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = fs::read_to_string(tmp.path().join("run_emse_0_sml-lms.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iter,emse_linear,emse_db"));
    assert_eq!(lines.count(), 7000);

    let m = read_manifest(&tmp.path().join("run_manifest.json"));
    assert_eq!(
        m["csv_files"],
        serde_json::json!(["run_emse_0_sml-lms.csv"])
    );
    assert_eq!(
        m["config"].as_str().unwrap(),
        fs::read_to_string(&cfg).unwrap()
    );
    assert_eq!(m["config_sha"].as_str().unwrap().len(), 64);
    assert_eq!(m["divergence_count"], 0);
    assert_eq!(m["seeds"]["plant_seed"], 0);
    assert!(m["algorithms"][0]["steady_state_emse_db"].as_f64().unwrap() < -35.0);
}

#[test]
fn zero_iterations_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        &small_config(0, &[("sml-lms", 0.004)], 1e-3),
    );
    let out = sml(&[
        "--out",
        tmp.path().to_str().unwrap(),
        "run",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_iters"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let body = small_config(100, &[("sml-lms", 0.004)], 1e-3).replacen(
        "schema_version = 1\n",
        "schema_version = 1\nstep = 0.1\n",
        1,
    );
    let cfg = write_config(tmp.path(), "bad.toml", &body);
    let out = sml(&[
        "--out",
        tmp.path().to_str().unwrap(),
        "run",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sml(&[
        "--out",
        tmp.path().to_str().unwrap(),
        "run",
        "/nonexistent/config.toml",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn serial_rerun_is_identical_and_matches_parallel() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &small_config(500, &[("sml-lms", 0.004)], 1e-3),
    );
    let mut csvs = Vec::new();
    for (i, serial) in [true, true, false].into_iter().enumerate() {
        let dir = tmp.path().join(format!("o{i}"));
        let mut args = vec!["--out", dir.to_str().unwrap()];
        if serial {
            args.push("--serial");
        }
        args.extend(["run", cfg.to_str().unwrap()]);
        assert!(sml(&args).status.success());
        csvs.push(fs::read(dir.join("run_emse_0_sml-lms.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);
}

#[test]
fn seed_override_changes_signals_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &small_config(300, &[("sml-lms", 0.004)], 1e-3),
    );
    let run = |dir: &str, extra: &[&str]| {
        let d = tmp.path().join(dir);
        let mut args = vec!["--out", d.to_str().unwrap()];
        args.extend_from_slice(extra);
        args.extend(["run", cfg.to_str().unwrap()]);
        assert!(sml(&args).status.success());
        (
            fs::read(d.join("run_emse_0_sml-lms.csv")).unwrap(),
            read_manifest(&d.join("run_manifest.json")),
        )
    };
    let (a, _) = run("a", &[]);
    let (b, mb) = run("b", &["--seed-override", "99"]);
    let (c, _) = run("c", &["--seed-override", "1"]);
    assert_ne!(a, b);
    assert_eq!(a, c);
    assert_eq!(mb["seeds"]["signal_seed"], 99);
    assert_eq!(mb["seeds"]["seed_override"], 99);
    assert_eq!(mb["seeds"]["plant_seed"], 0);
}

#[test]
fn divergence_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &small_config(2000, &[("sml-lms", 5.0)], 1e-3),
    );
    let out = sml(&[
        "--out",
        tmp.path().to_str().unwrap(),
        "run",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn compare_needs_two_algorithms() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &small_config(100, &[("sml-lms", 0.004)], 1e-3),
    );
    let out = sml(&[
        "--out",
        tmp.path().to_str().unwrap(),
        "compare",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_on_noiseless_separable_plant() {
    let tmp = tempfile::tempdir().unwrap();
    let body = small_config(10_000, &[("sml-lms", 0.004), ("volterra-lms", 0.0015)], 0.0);
    let cfg = write_config(tmp.path(), "c.toml", &body);
    let out = sml(&[
        "--out",
        tmp.path().to_str().unwrap(),
        "compare",
        cfg.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let m = read_manifest(&tmp.path().join("compare_manifest.json"));
    let algs = m["algorithms"].as_array().unwrap();
    assert_eq!(algs[0]["algorithm"], "sml-lms");
    assert_eq!(algs[0]["mults_per_iter"], 44);
    assert_eq!(algs[1]["algorithm"], "volterra-lms");
    assert!(algs[1]["mults_per_iter"].as_u64().unwrap() >= 132);
    for a in algs {
        assert!(a["steady_state_emse_db"].as_f64().unwrap() < -60.0, "{a}");
        assert!(a["iterations_to_target"].as_u64().is_some());
    }

    // Each CSV listed exactly once and present on disk.
    let files: Vec<&str> = m["csv_files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(
        files,
        [
            "compare_emse_0_sml-lms.csv",
            "compare_emse_1_volterra-lms.csv",
            "compare_summary.csv"
        ]
    );
    let mut on_disk: Vec<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    on_disk.sort();
    assert_eq!(on_disk, files);
}

#[test]
fn verify_small_passes() {
    let out = sml(&["verify", "--scale", "small"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("0 failed"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_catches_injected_gradient_fault() {
    let out = sml(&["verify", "--inject-fault", "grad-sign-flip"]);
    assert_eq!(out.status.code(), Some(4));
    let text = String::from_utf8_lossy(&out.stdout);
    let failing: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failing.len(), 1);
    assert!(failing[0].contains("gradient"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(sml(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(sml(&["verify", "--scale", "huge"]).status.code(), Some(2));
    assert_eq!(sml(&["--help"]).status.code(), Some(0));
}
