//! End-to-end checks of the command layer: determinism, secret separation,
//! failure modes, and degenerate parameter behavior.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use privddc_cli::config::ExperimentConfig;
use privddc_cli::{commands, EXIT_INFEASIBLE, EXIT_OK};
use tempfile::tempdir;

fn cfg_with(out: &Path, pairs: &[(&str, &str)]) -> ExperimentConfig {
    let mut flags = BTreeMap::new();
    for (k, v) in pairs {
        flags.insert(k.to_string(), v.to_string());
    }
    flags.insert("out".to_string(), out.display().to_string());
    ExperimentConfig::resolve(None, &flags).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}

#[test]
fn case_study_is_byte_deterministic() {
    let root = tempdir().unwrap();
    let out1 = root.path().join("a");
    let out2 = root.path().join("b");
    assert_eq!(
        commands::case_study::run(&cfg_with(&out1, &[("seed", "11")])).unwrap(),
        EXIT_OK
    );
    assert_eq!(
        commands::case_study::run(&cfg_with(&out2, &[("seed", "11")])).unwrap(),
        EXIT_OK
    );
    let a = snapshot(&out1);
    let b = snapshot(&out2);
    assert_eq!(a.len(), b.len());
    for (name, bytes) in &a {
        assert_eq!(Some(bytes), b.get(name), "file {name} differs between runs");
    }

    // a different seed must change the data
    let out3 = root.path().join("c");
    commands::case_study::run(&cfg_with(&out3, &[("seed", "12")])).unwrap();
    let c = snapshot(&out3);
    assert_ne!(a.get("cloud_exchange/X0.csv"), c.get("cloud_exchange/X0.csv"));
}

#[test]
fn exchange_directory_carries_no_secrets() {
    let root = tempdir().unwrap();
    let out = root.path().join("run");
    commands::case_study::run(&cfg_with(&out, &[("seed", "2")])).unwrap();
    let exchange_dir = out.join("cloud_exchange");
    assert!(privddc::exchange::only_exchange_files(&exchange_dir).unwrap());
    for name in privddc::exchange::FORBIDDEN_IN_EXCHANGE {
        assert!(
            !exchange_dir.join(name).exists(),
            "{name} leaked into the exchange directory"
        );
    }
    // key material exists, but outside the exchange
    assert!(out.join("secrets/F1.csv").exists());
    assert!(out.join("secrets/F2.csv").exists());
}

#[test]
fn short_horizon_is_a_clear_error() {
    let root = tempdir().unwrap();
    let out = root.path().join("run");
    let cfg = cfg_with(&out, &[("seed", "3"), ("horizon", "5")]);
    let err = commands::case_study::run(&cfg).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("rank"), "error should name the rank condition: {msg}");
}

#[test]
fn zero_threshold_attack_coincides_with_baseline() {
    let root = tempdir().unwrap();
    let out = root.path().join("run");
    let cfg = cfg_with(&out, &[("seed", "4"), ("delta-alpha", "0")]);
    assert_eq!(commands::attack::run(&cfg).unwrap(), EXIT_OK);
    let baseline = fs::read_to_string(out.join("trajectory_noattack.csv")).unwrap();
    for policy in ["I", "II", "III", "IV"] {
        let curve = fs::read_to_string(out.join(format!("trajectory_policy_{policy}.csv"))).unwrap();
        assert_eq!(baseline, curve, "zero budget must reproduce the baseline");
    }
}

#[test]
fn synthesize_command_consumes_a_recorded_exchange() {
    let root = tempdir().unwrap();
    let out = root.path().join("run");
    commands::case_study::run(&cfg_with(&out, &[("seed", "5")])).unwrap();
    let exchange_dir = out.join("cloud_exchange");
    let before = fs::read_to_string(exchange_dir.join("gamma.txt")).unwrap();
    // re-running the cloud on the same request reproduces the same budget
    assert_eq!(commands::synthesize::run(&exchange_dir).unwrap(), EXIT_OK);
    let after = fs::read_to_string(exchange_dir.join("gamma.txt")).unwrap();
    assert_eq!(before, after);
}

#[test]
fn audit_command_replays_a_run() {
    let root = tempdir().unwrap();
    let out = root.path().join("run");
    commands::case_study::run(&cfg_with(&out, &[("seed", "6")])).unwrap();
    assert_eq!(commands::audit_cmd::run(&out, 6).unwrap(), EXIT_OK);
    let report = fs::read_to_string(out.join("audit_report.csv")).unwrap();
    assert!(report.contains("open_loop_alternatives,10"));
}

#[test]
fn unstabilizable_plant_reports_infeasible_exit() {
    // A* = 2 I with B* spanning only one direction cannot be stabilized
    let root = tempdir().unwrap();
    let plant_dir = root.path().join("plant");
    fs::create_dir_all(&plant_dir).unwrap();
    let a = nalgebra::DMatrix::<f64>::identity(2, 2) * 2.0;
    let b = nalgebra::DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
    privddc::matcsv::write_matrix(&plant_dir.join("A.csv"), "A", &a).unwrap();
    privddc::matcsv::write_matrix(&plant_dir.join("B.csv"), "B", &b).unwrap();

    let out = root.path().join("run");
    let cfg = cfg_with(
        &out,
        &[("seed", "7"), ("plant", plant_dir.to_str().unwrap()), ("horizon", "12")],
    );
    assert_eq!(commands::case_study::run(&cfg).unwrap(), EXIT_INFEASIBLE);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("status=infeasible"));
}

#[test]
fn sweep_outputs_are_merged_deterministically() {
    let root = tempdir().unwrap();
    let out1 = root.path().join("s1");
    let out2 = root.path().join("s2");
    let pairs: [(&str, &str); 3] = [("seed", "8"), ("trials", "4"), ("d-max-grid", "0,0.04")];
    commands::sweep::run(&cfg_with(&out1, &pairs)).unwrap();
    commands::sweep::run(&cfg_with(&out2, &pairs)).unwrap();
    assert_eq!(
        fs::read(out1.join("sweep_trials.csv")).unwrap(),
        fs::read(out2.join("sweep_trials.csv")).unwrap()
    );
    assert_eq!(
        fs::read(out1.join("sweep_bins.csv")).unwrap(),
        fs::read(out2.join("sweep_bins.csv")).unwrap()
    );
}
