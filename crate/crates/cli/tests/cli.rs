use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const FAST: &[&str] = &["--blocks", "20000", "--mc-samples", "20000", "--pilot-samples", "20000"];

fn cradapt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cradapt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--out", dir.to_str().unwrap()];
    args.extend_from_slice(FAST);
    args.extend_from_slice(extra);
    let out = cradapt(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn all_schemes_write_four_curves() {
    let dir = tempfile::tempdir().unwrap();
    run_into(dir.path(), &["--k1-req", "0,2.5,3"]);
    let names = csv_files(dir.path());
    for scheme in ["variable", "constant", "underlay", "interweave"] {
        assert!(names.contains(&format!("tradeoff_{scheme}.csv")), "{names:?}");
    }
    for f in [
        "grid.csv",
        "underlay_sweep.csv",
        "interweave_sweep.csv",
        "policy_constant.csv",
        "manifest.txt",
    ] {
        assert!(names.contains(&f.to_string()), "missing {f}");
    }
    assert_eq!(names.iter().filter(|n| n.starts_with("policy_variable_k1_")).count(), 3);

    let curve = fs::read_to_string(dir.path().join("tradeoff_variable.csv")).unwrap();
    let rows: Vec<&str> = curve.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("scheme,k1_req,"));
    assert_eq!(rows.len(), 4);
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 1"));
    assert!(manifest.contains("s12_mean = 0.05"));
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--k1-req", "0:3:1.5", "--seed", "42"];
    run_into(a.path(), &args);
    run_into(b.path(), &args);
    let names = csv_files(a.path());
    assert_eq!(names, csv_files(b.path()));
    for n in &names {
        let x = fs::read(a.path().join(n)).unwrap();
        let y = fs::read(b.path().join(n)).unwrap();
        assert!(x == y, "{n} differs");
    }
}

#[test]
fn pathloss_sweep_writes_curve_per_distance() {
    let dir = tempfile::tempdir().unwrap();
    run_into(
        dir.path(),
        &[
            "--scheme",
            "variable",
            "--k1-req",
            "0,2",
            "--pathloss-d",
            "0.5,1,2",
            "--pathloss-e",
            "3",
        ],
    );
    let names = csv_files(dir.path());
    for d in ["0.5", "1", "2"] {
        assert!(names.contains(&format!("tradeoff_variable_d{d}.csv")), "{names:?}");
        assert!(names.contains(&format!("grid_d{d}.csv")));
        let text = fs::read_to_string(dir.path().join(format!("tradeoff_variable_d{d}.csv"))).unwrap();
        assert!(text.contains(&format!("# pathloss_d={d} pathloss_e=3")));
    }
}

#[test]
fn flags_override_document() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.txt");
    fs::write(&scenario, "s11_mean = 1\ns12_mean = 0.1\ns21_mean = 0.1\ns22_mean = 1\nn0 = 1e-6\np1 = 1\np2_budget = 1\nb1 = 1e-3\nb2 = 1e-3\n").unwrap();
    let out = dir.path().join("out");
    run_into(
        &out,
        &[
            "--scenario",
            scenario.to_str().unwrap(),
            "--p2-budget",
            "0.5",
            "--scheme",
            "constant",
            "--k1-req",
            "0",
        ],
    );
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("p2_budget = 0.5"));
    assert!(manifest.contains("s12_mean = 0.1"));
}

#[test]
fn emit_defaults_prints_documents() {
    let out = cradapt(&["--emit-defaults"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("index rate coeff decay"));
    assert!(text.contains("s11_mean = 1"));

    let dir = tempfile::tempdir().unwrap();
    let out = cradapt(&["--emit-defaults", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(dir.path().join("table.txt").exists());
    assert!(dir.path().join("scenario.txt").exists());
}

#[test]
fn invalid_input_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for (args, needle) in [
        (vec!["--out", d, "--k1-req", "3,1"], "ascending"),
        (vec!["--out", d, "--scheme", "overlay"], "unknown scheme"),
        (vec!["--out", d, "--products", "10"], "--products"),
        (vec!["--out", d, "--b1", "2"], "b1"),
        (
            vec!["--out", d, "--scenario", "/nonexistent/s.txt"],
            "/nonexistent/s.txt",
        ),
        (vec!["--out", d, "--pathloss-d", "1"], "pathloss_e"),
        (vec!["--out", d, "--blocks", "0"], "--blocks"),
    ] {
        let out = cradapt(&args);
        assert!(!out.status.success(), "{args:?} succeeded");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{args:?}: {err}");
    }
}
