use std::path::Path;
use std::process::{Command, Output};

fn zerolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zerolab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn last_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .last()
        .expect("nonempty stdout")
        .to_string()
}

fn manifest(out: &Output) -> serde_json::Value {
    serde_json::from_str(&last_line(out)).expect("last stdout line is JSON")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|_| panic!("missing {name}"))
}

#[test]
fn kac_rice_prints_alpha_and_a_json_manifest() {
    let out = zerolab(&["kac-rice", "--model", "gaussian"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("alpha = 0.3183099"), "stdout: {text}");
    let m = manifest(&out);
    assert_eq!(m["command"], "kac-rice");
    assert!((m["alpha"].as_f64().unwrap() - std::f64::consts::FRAC_1_PI).abs() < 1e-12);
}

#[test]
fn band_lattice_verdict_names_the_divergent_term() {
    let dir = tempfile::tempdir().unwrap();
    let out = zerolab(&[
        "assumption-a",
        "--model",
        "band",
        "--xstar",
        "6.2831853",
        "--kappa-prime",
        "0.2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("fails(r1prime)"), "stdout: {text}");
    let report: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), "assumption_a.json")).unwrap();
    assert_eq!(report["verdict"], "fails(r1prime)");
}

#[test]
fn zero_count_reruns_are_byte_identical() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let out = zerolab(&[
            "zeros",
            "--model",
            "gaussian",
            "--T",
            "100",
            "--seed",
            "7",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(read(d1.path(), "zeros.csv"), read(d2.path(), "zeros.csv"));
    assert_eq!(read(d1.path(), "zeros.json"), read(d2.path(), "zeros.json"));
}

#[test]
fn simulate_row_count_matches_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = zerolab(&[
        "simulate",
        "--T",
        "5",
        "--seed",
        "11",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let m = manifest(&out);
    let steps = m["steps"].as_u64().unwrap() as usize;
    let csv = String::from_utf8(read(dir.path(), "path.csv")).unwrap();
    assert_eq!(csv.lines().count(), steps + 1);
    assert_eq!(csv.lines().next(), Some("t,x"));
}

#[test]
fn tail_replays_from_its_own_manifest() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let out = zerolab(&[
        "tail",
        "--T",
        "8,12",
        "--eta",
        "0.2",
        "--reps",
        "120",
        "--seed",
        "5",
        "--out",
        d1.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let replay = zerolab(&[
        "tail",
        "--config",
        d1.path().join("manifest.json").to_str().unwrap(),
        "--out",
        d2.path().to_str().unwrap(),
    ]);
    assert!(replay.status.success());
    assert_eq!(
        read(d1.path(), "tail_results.csv"),
        read(d2.path(), "tail_results.csv")
    );
    assert_eq!(
        read(d1.path(), "manifest.json"),
        read(d2.path(), "manifest.json")
    );
}

#[test]
fn output_dir_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_zerolab"))
        .args(["split", "--m", "2,4"])
        .env("ZEROLAB_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = String::from_utf8(read(dir.path(), "split.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn validation_failures_exit_2_and_runtime_failures_exit_1() {
    assert_eq!(
        zerolab(&["kac-rice", "--model", "nonsense"]).status.code(),
        Some(2)
    );
    assert_eq!(zerolab(&["tail", "--reps", "10"]).status.code(), Some(2));
    assert_eq!(zerolab(&["no-such-subcommand"]).status.code(), Some(2));
    assert_eq!(zerolab(&["kac-rice", "--no-such-flag"]).status.code(), Some(2));
    // a plausible but absent spectrum file is a runtime failure
    assert_eq!(
        zerolab(&["kac-rice", "--model", "/nonexistent/spectrum.csv"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn every_success_ends_with_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["kac-rice"],
        vec!["covariance", "--t-max", "2", "--points", "5", "--out", d],
        vec!["omega", "--k-max", "2", "--horizon", "8", "--y-points", "3", "--out", d],
        vec!["jensen", "--T", "10", "--seeds", "2", "--out", d],
        vec!["split", "--m", "2", "--out", d],
        vec![
            "moments", "--n", "2", "--reps", "500", "--out", d,
        ],
        vec![
            "mean", "--T", "6", "--reps", "100", "--out", d,
        ],
        vec![
            "sign-changes", "--T", "50", "--eta", "0.2", "--reps", "100", "--out", d,
        ],
    ];
    for args in runs {
        let out = zerolab(&args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let m = manifest(&out);
        assert!(m["command"].is_string(), "{args:?}");
        assert!(m["outputs"].is_array(), "{args:?}");
    }
}
