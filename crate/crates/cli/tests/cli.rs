use std::fmt::Write;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use otswitch_core::cases;
use otswitch_core::dcots::{brute_force_dcots, DcotsInstance};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otswitch")).args(args).arg("--out").arg(out).output().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Ring of `n` buses with chords, `g` generators and `l` branches.
fn synthetic_case(n: usize, g: usize, l: usize) -> String {
    let mut s = String::from("function mpc = synth\nmpc.baseMVA = 100;\nmpc.bus = [\n");
    for b in 1..=n {
        let kind = if b == 1 { 3 } else { 1 };
        let _ = writeln!(s, "{b} {kind} 10 0 0 0 1 1 0 138 1 1.06 0.94;");
    }
    s.push_str("];\nmpc.gen = [\n");
    for i in 0..g {
        let _ = writeln!(s, "{} 0 0 100 -100 1 100 1 300 0;", 1 + i * (n / g));
    }
    s.push_str("];\nmpc.branch = [\n");
    let mut count = 0;
    for step in 1.. {
        for b in 1..=n {
            if count == l {
                break;
            }
            let t = (b - 1 + step) % n + 1;
            let _ = writeln!(s, "{b} {t} 0.01 0.1 0 200 200 200 0 0 1 -360 360;");
            count += 1;
        }
        if count == l {
            break;
        }
    }
    s.push_str("];\nmpc.gencost = [\n");
    for i in 0..g {
        let _ = writeln!(s, "2 0 0 2 {} 0;", 10 + i);
    }
    s.push_str("];\n");
    s
}

#[test]
fn parse_reports_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case118.m");
    std::fs::write(&case, synthetic_case(118, 19, 186)).unwrap();
    let o = run(&["parse", case.to_str().unwrap(), "--validate"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "118 buses, 19 generators, 186 lines");
    let p = json(&dir.path().join("parse.json"));
    assert_eq!(p["lines"], 186);
    let m = json(&dir.path().join("manifest-parse.json"));
    assert_eq!(m["command"], "parse");
    assert_eq!(m["network_fingerprint"], p["fingerprint"]);
}

#[test]
fn validate_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("bad.m");
    let text = cases::CASE3.replacen("\t2\t1\t200", "\t2\t3\t200", 1);
    assert_ne!(text, cases::CASE3);
    std::fs::write(&case, text).unwrap();
    let o = run(&["parse", case.to_str().unwrap(), "--validate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("multiple reference buses"), "{}", stderr(&o));
}

#[test]
fn solve_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case3.m");
    std::fs::write(&case, cases::CASE3).unwrap();
    let lp = dir.path().join("model.lp");
    let o = run(
        &["solve", case.to_str().unwrap(), "--cardinality", "1", "--gap", "0", "--dump-lp", lp.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&dir.path().join("solve.json"));
    let inst = DcotsInstance::nominal(Arc::new(cases::case3())).unwrap().with_cardinality(Some(1));
    let (topo, sol) = brute_force_dcots(&inst).unwrap();
    let open: Vec<usize> = serde_json::from_value(s["open_lines"].clone()).unwrap();
    assert_eq!(open, topo.open_lines().iter().copied().collect::<Vec<_>>());
    assert!((s["result"]["total_objective"].as_f64().unwrap() - sol.total_objective).abs() < 1e-6);
    let text = std::fs::read_to_string(&lp).unwrap();
    assert!(text.contains("Binaries") && text.contains("y_l1"));
}

#[test]
fn empty_training_set_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("t.jsonl");
    std::fs::write(&train, "").unwrap();
    let o = run(&["heuristic", "knn", "--train", train.to_str().unwrap(), "--case", "case3.m", "--k", "10"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty training set"));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["frobnicate"],
        vec!["solve", "case3", "--cardinality", "many"],
        vec!["solve"],
        vec!["heuristic", "knn", "--case", "case3", "--k", "0"],
        vec!["heuristic", "knn", "--case", "case3", "--norm", "taxicab"],
        vec!["solve", "case3", "--workers", "0"],
    ] {
        let o = run(&args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
    let missing = run(&["solve", "no-such-case.m"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn manifest_config_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let o = run(&["generate", "--case", "case6", "--seed", "9", "--count", "20", "--test-count", "3"], &a);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = json(&a.join("manifest-generate.json"));
    let config = dir.path().join("config.toml");
    std::fs::write(&config, manifest["config_toml"].as_str().unwrap()).unwrap();
    let b = dir.path().join("b");
    let o = run(&["generate", "--case", "case6", "--config", config.to_str().unwrap()], &b);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(a.join("instances.json")).unwrap(), std::fs::read(b.join("instances.json")).unwrap());
    assert_eq!(manifest["outputs"][0], "instances.json");
    assert_eq!(manifest["seed"], 9);
}

#[test]
fn study_commands_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let c = ["--case", "case6", "--no-timing"];
    let go = |extra: &[&str]| {
        let args: Vec<&str> = extra.iter().chain(&c).copied().collect();
        let o = run(&args, out);
        assert!(o.status.success(), "{extra:?}: {}", stderr(&o));
    };
    go(&["generate", "--count", "30", "--test-count", "5", "--seed", "2"]);
    go(&["train", "--gap", "0"]);
    go(&["heuristic", "greedy"]);
    go(&["benchmark", "--gap", "0", "--k", "5"]);
    for study in ["census", "crosseval", "cardinal", "loocv", "classes", "stability", "congestion"] {
        go(&["analyze", study]);
    }
    go(&["report"]);
    for f in [
        "census.csv",
        "gap_matrix.csv",
        "cardinal.csv",
        "loocv.json",
        "classes.json",
        "stability.json",
        "feasibility.csv",
        "congestion.csv",
        "benchmark.csv",
        "report.json",
        "heuristic-greedy.json",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let bench = json(&out.join("benchmark.json"));
    let exact = &bench["methods"][0];
    assert_eq!(exact["method"], "exact");
    assert!(exact["max_gap"].as_f64().unwrap().abs() < 1e-9);
    let report = json(&out.join("report.json"));
    assert!(report["sources"].as_array().unwrap().len() >= 7);
    let train_manifest = json(&out.join("manifest-train.json"));
    assert_eq!(train_manifest["config"]["count"], 30);
    assert_eq!(train_manifest["config"]["seed"], 2);
}
