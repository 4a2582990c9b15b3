use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qcpm::fixtures;
use qcpm::kkt::analytic_k1;
use qcpm::solution::Solution;
use qcpm::{Problem, QosTargets, Scenario, SystemConfig};

fn qcpm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcpm"))
        .args(args)
        .env("QCPM_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn two_user_files(dir: &Path) -> (PathBuf, PathBuf) {
    let scn = dir.join("two_user.json");
    let init = dir.join("init.json");
    fixtures::two_user_scenario().save(&scn).unwrap();
    Solution::from_tx(fixtures::two_user_infeasible_start()).save(&init, None).unwrap();
    (scn, init)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_round_trips_and_echoes_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = qcpm(dir.path(), &["gen", "--K", "2", "--M", "2", "--N", "2", "--gamma", "10", "--sigma2", "1", "--seed", "7", "-o", "s.scn"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("seed 7"));
    let scn = Scenario::load(dir.path().join("s.scn")).unwrap();
    let want = Scenario::generate(SystemConfig::uniform(2, 2, 2, 1), QosTargets::uniform(2, 10.0, 1.0), 7).unwrap();
    assert_eq!(scn, want);
    let o = qcpm(dir.path(), &["solve", "--scenario", s(&dir.path().join("s.scn"))]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn gen_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = qcpm(dir.path(), &["gen", "--K", "0", "--M", "2", "--N", "2", "--gamma", "10", "--sigma2", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qcpm(dir.path(), &["gen", "--K", "2", "--M", "2", "--N", "2", "--gamma", "-1", "--sigma2", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qcpm(dir.path(), &["gen", "--K", "2", "--M", "4", "--N", "2", "--d", "2", "--sigma2", "1"]);
    assert_eq!(o.status.code(), Some(2), "d > 1 without a rate");
}

#[test]
fn gen_multistream_targets() {
    let dir = tempfile::tempdir().unwrap();
    let o = qcpm(dir.path(), &["gen", "--K", "2", "--d", "2", "--rate", "2.0", "--M", "4", "--N", "2", "--sigma2", "1", "-o", "m.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = Problem::from_scenario(&Scenario::load(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(p.num_streams(), 4);
    for &g in p.gamma() {
        assert!((g - (std::f64::consts::E - 1.0)).abs() < 1e-15);
    }
}

#[test]
fn udd_from_published_start_reports_infeasible_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let (scn, init) = two_user_files(dir.path());
    let o = qcpm(dir.path(), &["solve", "--scenario", s(&scn), "--algo", "udd", "--init", "file", "--init-file", s(&init)]);
    assert_eq!(o.status.code(), Some(11));
    let err = stderr(&o);
    assert!(err.contains("q1 = -3.5627") && err.contains("q2 = -1.1379"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn mmse_dual_from_published_start() {
    let dir = tempfile::tempdir().unwrap();
    let (scn, init) = two_user_files(dir.path());
    let o = qcpm(dir.path(), &["solve", "--scenario", s(&scn), "--init", "file", "--init-file", s(&init), "--trace", "t.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("iter,total_power,max_violation,sinr_1,sinr_2"));
    for (i, line) in lines.enumerate() {
        let viol: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        if i == 0 {
            assert!(viol > 0.0);
        } else {
            assert!(viol <= 1e-8, "row {} violation {viol}", i + 1);
        }
    }
    let o = qcpm(dir.path(), &["verify", "--scenario", s(&scn), "--solution", s(&dir.path().join("solution.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn iteration_limit_has_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let (scn, _) = two_user_files(dir.path());
    let o = qcpm(dir.path(), &["solve", "--scenario", s(&scn), "--max-iter", "3"]);
    assert_eq!(o.status.code(), Some(10));
}

#[test]
fn zero_forcing_without_enough_antennas_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("s.json");
    Scenario::generate(SystemConfig::uniform(3, 2, 2, 1), QosTargets::uniform(3, 1.0, 1.0), 1).unwrap().save(&scn).unwrap();
    let o = qcpm(dir.path(), &["solve", "--scenario", s(&scn), "--init", "zf"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("antennas"));
}

#[test]
fn single_user_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let scn_path = dir.path().join("k1.json");
    let scn = Scenario::generate(SystemConfig::uniform(1, 3, 2, 1), QosTargets::uniform(1, 5.0, 0.5), 4).unwrap();
    scn.save(&scn_path).unwrap();
    let (want, _) = analytic_k1(&Problem::from_scenario(&scn).unwrap()).unwrap();
    for algo in ["mmse-dual", "udd"] {
        let o = qcpm(dir.path(), &["solve", "--scenario", s(&scn_path), "--algo", algo, "-o", "k1.sol"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let sol = Solution::load(dir.path().join("k1.sol")).unwrap();
        let got: f64 = sol.tx.iter().map(|v| v.norm_squared()).sum();
        assert!((got - want).abs() < 1e-8 * want, "{algo}: {got} vs {want}");
    }
}

#[test]
fn verify_flags_a_perturbed_solution() {
    let dir = tempfile::tempdir().unwrap();
    let (scn, _) = two_user_files(dir.path());
    assert!(qcpm(dir.path(), &["solve", "--scenario", s(&scn)]).status.success());
    let mut sol = Solution::load(dir.path().join("solution.json")).unwrap();
    sol.tx[0] *= qcpm::linalg::c64(1.01, 0.0);
    let bad = dir.path().join("bad.json");
    sol.save(&bad, None).unwrap();
    let o = qcpm(dir.path(), &["verify", "--scenario", s(&scn), "--solution", s(&bad), "-o", "bad_report.json"]);
    assert_eq!(o.status.code(), Some(14));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("bad_report.json")).unwrap()).unwrap();
    let flagged = ["primal_violation", "stationarity_tx", "complementarity"]
        .iter()
        .any(|k| report[k].as_f64().unwrap() > 1e-6);
    assert!(flagged, "{report}");
}

#[test]
fn verify_scalar_kkt_point() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("scalar.json");
    fs::write(
        &scn,
        r#"{"K": 1, "M": 1, "N": [1], "d": [1], "gamma": [2.0], "sigma2": [1.0], "rate": [], "H": [[[[1.0, 0.0]]]]}"#,
    )
    .unwrap();
    let sol = dir.path().join("scalar_sol.json");
    fs::write(&sol, format!(r#"{{"V": [[[{}, 0.0]]], "U": [[[1.0, 0.0]]], "lambda": [2.0]}}"#, 2f64.sqrt())).unwrap();
    let o = qcpm(dir.path(), &["verify", "--scenario", s(&scn), "--solution", s(&sol), "-o", "r.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    for k in ["stationarity_rx", "stationarity_tx", "complementarity", "primal_violation", "duality_gap"] {
        assert!(report[k].as_f64().unwrap() < 1e-12, "{k} = {}", report[k]);
    }
}

#[test]
fn sweep_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("s.json");
    Scenario::generate(SystemConfig::uniform(3, 4, 3, 1), QosTargets::uniform(3, 10.0, 1.0), 5).unwrap().save(&scn).unwrap();
    let run = |name: &str| {
        let o = qcpm(dir.path(), &["sweep", "--scenario", s(&scn), "--inits", "6", "--seed-base", "40", "-o", name, "--traces", &format!("tr_{name}")]);
        assert!(o.status.success(), "{}", stderr(&o));
        (
            fs::read(dir.path().join(name)).unwrap(),
            fs::read(dir.path().join(format!("tr_{name}"))).unwrap(),
            String::from_utf8_lossy(&o.stdout).into_owned(),
        )
    };
    let (a, ta, out) = run("a.csv");
    let (b, tb, _) = run("b.csv");
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    let text = String::from_utf8(a).unwrap();
    let seeds: Vec<u64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(seeds, (40..46).collect::<Vec<_>>());
    assert!(out.contains("1 distinct objectives"), "{out}");
}

#[test]
fn sweep_single_start() {
    let dir = tempfile::tempdir().unwrap();
    let (scn, _) = two_user_files(dir.path());
    let o = qcpm(dir.path(), &["sweep", "--scenario", s(&scn), "--inits", "1"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("1 distinct objectives"));
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (scn, _) = two_user_files(dir.path());
    for (t, o) in [("t1.csv", "s1.json"), ("t2.csv", "s2.json")] {
        assert!(qcpm(dir.path(), &["solve", "--scenario", s(&scn), "--seed", "3", "--trace", t, "-o", o]).status.success());
    }
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("t1.csv"), read("t2.csv"));
    assert_eq!(read("s1.json"), read("s2.json"));
}

#[test]
fn counterexample_prints_multipliers() {
    let dir = tempfile::tempdir().unwrap();
    let o = qcpm(dir.path(), &["counterexample", "--diag", "1,2", "--gamma", "1"]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("lambda = [2.000000000000, 0.500000000000]"), "{out}");
    let o = qcpm(dir.path(), &["counterexample", "--diag", "2,2"]);
    assert_eq!(o.status.code(), Some(1), "repeated eigenvalues");
}
