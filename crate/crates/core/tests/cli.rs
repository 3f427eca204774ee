use degwave::cli::main_with_args;
use degwave::config::{self, BENCHMARK_1D, CLASSICAL};
use std::fs;
use std::path::Path;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["degwave"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

/// Benchmark geometry on a coarse grid with small sample counts.
fn small_benchmark(out: &Path) -> String {
    BENCHMARK_1D
        .replace("cells_per_axis = 200", "cells_per_axis = 60")
        .replace("samples = 100", "samples = 8")
        .replace("out/benchmark-1d", &out.to_string_lossy())
}

#[test]
fn zero_data_solve_writes_zero_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let text = CLASSICAL
        .replace("initial_u = sine:1:1", "initial_u = zero")
        .replace("out/classical", &out.to_string_lossy());
    let cfg = write_config(tmp.path(), "zero.ini", &text);
    assert_eq!(run(&["solve", &cfg]), 0);
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("# dim=1"));
    for line in traj.lines().filter(|l| !l.starts_with('#')).skip(1) {
        assert!(line.split(',').skip(2).all(|v| v == "0e0"), "{line}");
    }
    let energy = fs::read_to_string(out.join("energy.csv")).unwrap();
    assert_eq!(energy.lines().next().unwrap(), "t,kinetic,potential,total");
    let manifest = fs::read_to_string(out.join("MANIFEST.txt")).unwrap();
    let names: Vec<&str> = manifest.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(names, ["boundary_trace.csv", "energy.csv", "summary.json", "trajectory.csv"]);
    assert!(out.join("run.log").exists());
}

#[test]
fn validation_failures_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_alpha = write_config(tmp.path(), "a.ini", &BENCHMARK_1D.replace("alpha = 0.5", "alpha = 2.5"));
    assert_eq!(run(&["validate", &bad_alpha]), 2);
    assert_eq!(run(&["hum", &bad_alpha]), 2);
    let short = write_config(tmp.path(), "t.ini", &BENCHMARK_1D.replace("T = auto", "T = 3"));
    assert_eq!(run(&["validate", &short]), 2);
    let beta = write_config(tmp.path(), "b.ini", &BENCHMARK_1D.replace("beta = auto", "beta = 0.31622776601683794"));
    assert_eq!(run(&["validate", &beta]), 2);
    assert_eq!(run(&["validate", "--preset", "nope"]), 2);
    assert_eq!(run(&["validate", "--preset", "benchmark-1d"]), 0);
    let hardy_1d = write_config(tmp.path(), "h.ini", &small_benchmark(&tmp.path().join("h")));
    assert_eq!(run(&["hardy", &hardy_1d]), 2);
}

#[test]
fn presets_print_and_validate() {
    for name in config::PRESET_NAMES {
        assert_eq!(run(&["preset", name]), 0);
        assert_eq!(run(&["validate", "--preset", name]), 0);
    }
    assert_eq!(run(&["preset", "nope"]), 2);
}

#[test]
fn nonconvergence_exits_3_with_history() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("nc");
    let text = small_benchmark(&out)
        .replace("tol = 1e-6", "tol = 1e-14")
        .replace("max_iter = 500", "max_iter = 2");
    let cfg = write_config(tmp.path(), "nc.ini", &text);
    assert_eq!(run(&["hum", &cfg]), 3);
    let res = fs::read_to_string(out.join("residuals.csv")).unwrap();
    assert_eq!(res.lines().count(), 1 + 3);
    assert!(fs::read_to_string(out.join("summary.json")).unwrap().contains("no_convergence"));
}

#[test]
fn hum_and_scans_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["hum", "observability", "carleman-scan"] {
        let mut manifests = Vec::new();
        for k in 0..2 {
            let out = tmp.path().join(format!("{cmd}{k}"));
            let cfg = write_config(tmp.path(), &format!("{cmd}{k}.ini"), &small_benchmark(&out));
            assert_eq!(run(&[cmd, &cfg]), 0, "{cmd}");
            manifests.push(fs::read_to_string(out.join("MANIFEST.txt")).unwrap());
        }
        assert_eq!(manifests[0], manifests[1], "{cmd}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("hum0/summary.json")).unwrap()).unwrap();
    assert!(summary["final_state_error"].as_f64().unwrap() <= 1e-3);
    let scan = fs::read_to_string(tmp.path().join("carleman-scan0/carleman_run0.csv")).unwrap();
    assert_eq!(scan.lines().next().unwrap(), "s,gamma,log_lhs,log_rhs_control,log_rhs_source,ratio");
    assert_eq!(scan.lines().count(), 4);
}

#[test]
fn seed_override_changes_random_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.ini", &small_benchmark(&tmp.path().join("unused")));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(run(&["observability", &cfg, "--output-dir", a.to_str().unwrap()]), 0);
    assert_eq!(run(&["observability", &cfg, "--output-dir", b.to_str().unwrap(), "--seed", "7"]), 0);
    assert_ne!(
        fs::read_to_string(a.join("observability.csv")).unwrap(),
        fs::read_to_string(b.join("observability.csv")).unwrap()
    );
}
