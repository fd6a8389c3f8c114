use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use entropic_lab::cli::{parse_config, run, Status};
use serde_json::Value;

fn lab(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_entropic-lab"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn solve_with_trivial_potentials_reports_zero_cost() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = lab(tmp.path(), &["solve", "--out", out.to_str().unwrap()], "V = zero\nW = zero\n");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("summary.csv"));
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r[2].parse::<f64>().unwrap().abs() < 1e-12, "cost {}", r[2]);
    }
    let m = manifest(&out);
    assert_eq!(m["status"], "passed");
    assert_eq!(m["config"]["points"], 301);
    assert!(m["files"].as_array().unwrap().iter().any(|f| f == "solution_fortet.csv"));
}

#[test]
fn limit_sweep_final_gap_is_small() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let o = lab(tmp.path(), &["limit-sweep", "--out", out.to_str().unwrap(), "--quiet"], "W = quadratic(1.5, 0, 0)\nplots = true\n");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let rows = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 5);
    let last = rows.last().unwrap();
    let gap: f64 = last[3].parse().unwrap();
    assert!(gap < 0.05 * 0.125, "final gap {gap}");
    let svg = fs::read_to_string(out.join("gap.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn bimodal_gj_check_is_an_expected_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gj");
    let cfg = "experiment = gj-check\nW = neglog-mixture(0.5:-2:0.04, 0.5:2:0.04)\nexpect = violation\n";
    let o = lab(tmp.path(), &["gj-check", "--out", out.to_str().unwrap()], cfg);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("criterion violated, Lipschitz > 1"), "{text}");
    // the same target without the declaration is an assertion failure
    let out2 = tmp.path().join("gj2");
    let o = lab(tmp.path(), &["gj-check", "--out", out2.to_str().unwrap()], &cfg.replace("expect = violation\n", ""));
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(manifest(&out2)["failure_stage"], "assertions");
    assert!(out2.join("failures.json").exists());
}

#[test]
fn config_errors_exit_2_with_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bad");
    let o = lab(tmp.path(), &["solve", "--out", out.to_str().unwrap()], "tol = 1e-9\nepslion = 0.1\n");
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("epslion") && err.contains("line 2"), "{err}");
    let m = manifest(&out);
    assert_eq!(m["status"], "config-error");
    assert_eq!(m["failure_stage"], "config");

    let o = lab(tmp.path(), &["limit-sweep", "--out", out.to_str().unwrap()], "epsilon = 0.1\nepsilon = 0.2\n");
    assert_eq!(o.status.code(), Some(2));
    let o = lab(tmp.path(), &["gj-check", "--out", out.to_str().unwrap()], "experiment = solve\n");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn setup_errors_exit_2_and_record_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("narrow");
    let o = lab(tmp.path(), &["solve", "--out", out.to_str().unwrap()], "points = 31\nepsilon = 0.001\n");
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(manifest(&out)["failure_stage"], "kernel");
}

#[test]
fn identical_runs_write_identical_csv_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("monotonicity", "V = quadratic(0.1, 0.2, 0)\nW = quadratic(0.5, 0.5, 0) + indicator-ball(2.5)\ntrials = 4\n"),
        ("order-check", "trials = 30\n"),
        ("prekopa-suite", "trials = 10\n"),
        ("solve", "W = quadratic(1, 0, 0) + indicator-ball(2)\ncoupling = true\npoints = 101\n"),
    ];
    for (cmd, cfg) in cases {
        let dirs: Vec<_> = (0..2).map(|k| tmp.path().join(format!("{cmd}-{k}"))).collect();
        for d in &dirs {
            let o = lab(tmp.path(), &[cmd, "--out", d.to_str().unwrap(), "--seed", "17"], cfg);
            assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let names: Vec<String> = manifest(&dirs[0])["files"]
            .as_array()
            .unwrap()
            .iter()
            .map(|f| f.as_str().unwrap().to_string())
            .filter(|f| f.ends_with(".csv"))
            .collect();
        assert!(!names.is_empty());
        for n in names {
            let a = fs::read(dirs[0].join(&n)).unwrap();
            let b = fs::read(dirs[1].join(&n)).unwrap();
            assert!(a == b, "{cmd}: {n} differs between runs");
        }
        assert_eq!(manifest(&dirs[1])["seed"], 17);
    }
}

#[test]
fn order_check_reads_atom_files() {
    let tmp = tempfile::tempdir().unwrap();
    let eta = tmp.path().join("eta.csv");
    let nu = tmp.path().join("nu.csv");
    fs::write(&eta, "x,weight\n0,1\n").unwrap();
    fs::write(&nu, "x,weight\n-1,0.5\n1,0.5\n").unwrap();
    let base = format!("eta_file = {}\nnu_file = {}\nout = {}\n", eta.display(), nu.display(), tmp.path().join("o").display());
    let cfg = parse_config(&format!("experiment = order-check\n{base}")).unwrap();
    let r = run(&cfg);
    assert_eq!(r.status, Status::Passed, "{}", r.message);
    // swapped roles: the spread is not dominated by the point mass
    let swapped = format!(
        "experiment = order-check\neta_file = {}\nnu_file = {}\nout = {}\nexpect = violation\n",
        nu.display(),
        eta.display(),
        tmp.path().join("o2").display()
    );
    assert_eq!(run(&parse_config(&swapped).unwrap()).status, Status::Passed);
}

#[test]
fn help_documents_defaults() {
    let o = Command::new(env!("CARGO_BIN_EXE_entropic-lab")).arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in ["[1e-8]", "301 in 1D", "limit-sweep", "--seed", "Exit codes"] {
        assert!(text.contains(needle), "help lacks {needle}");
    }
}
