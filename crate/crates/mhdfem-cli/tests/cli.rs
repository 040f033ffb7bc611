//! End-to-end checks of the command-line interface: outputs, exit codes,
//! and the config round-trip guarantee.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mhdfem"))
}

fn work_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mhdfem_cli_{}_{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn case_run_writes_outputs_and_config_round_trips_the_ledger() {
    let dir = work_dir("roundtrip");
    let out1 = dir.join("first");
    let status = bin()
        .args(["mms2d", "--m", "4", "--tau", "0.0625", "--t-final", "0.25"])
        .arg("--out")
        .arg(&out1)
        .status()
        .unwrap();
    assert!(status.success());

    let energy = read_lines(&out1.join("energy.csv"));
    assert_eq!(
        energy[0],
        "n,t,kinetic,magnetic,viscous,ohmic,work,identity_residual,weak_div,steady_rel"
    );
    assert_eq!(energy.len(), 1 + 4, "four steps from t-final/tau");
    let errors = read_lines(&out1.join("errors.csv"));
    assert_eq!(errors.len(), 2, "single-resolution table has one data row");
    assert!(errors[1].ends_with(",,,"), "no orders on a lone row");
    assert!(out1.join("mms2d_t0.250.vtk").is_file());

    // Replaying the recorded configuration reproduces the ledger exactly.
    let out2 = dir.join("second");
    let status = bin()
        .arg("run")
        .arg(out1.join("config.txt"))
        .arg("--out")
        .arg(&out2)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        std::fs::read(out1.join("energy.csv")).unwrap(),
        std::fs::read(out2.join("energy.csv")).unwrap(),
        "round-tripped config must give a bitwise identical ledger"
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn usage_and_config_errors_exit_with_code_2() {
    let unknown_flag = bin().args(["mms2d", "--frobnicate"]).output().unwrap();
    assert_eq!(unknown_flag.status.code(), Some(2));

    let bad_tau = bin().args(["mms2d", "--tau", "0.3"]).output().unwrap();
    assert_eq!(bad_tau.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_tau.stderr).contains("integer step count"));

    let missing = bin().args(["run", "/does/not/exist.txt"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let bad_order = bin()
        .args(["mms3d", "--order-b", "2", "--m", "2", "--tau", "0.25"])
        .output()
        .unwrap();
    assert_eq!(bad_order.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_order.stderr).contains("unsupported element"));
}

#[test]
fn convergence_study_fills_order_columns() {
    let dir = work_dir("study");
    let status = bin()
        .args(["convergence", "--case", "mms2d", "--order-b", "1", "--ms", "2,4"])
        .args(["--t-final", "0.25"])
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let table = read_lines(&dir.join("errors.csv"));
    assert_eq!(table.len(), 3, "header plus one row per resolution");
    assert_eq!(
        table[0],
        "M,h,tau,err_u_l2,err_p_l2,err_B_l2,order_u,order_p,order_B"
    );
    assert!(table[1].ends_with(",,,"));
    let last: Vec<&str> = table[2].split(',').collect();
    assert_eq!(last.len(), 9);
    assert!(
        last[6].parse::<f64>().is_ok() && last[8].parse::<f64>().is_ok(),
        "order columns filled on the refined row: {}",
        table[2]
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn hartmann_writes_centerline_profile() {
    let dir = work_dir("hartmann");
    let status = bin()
        .args(["hartmann", "--m", "2", "--tau", "0.5", "--t-final", "1"])
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let profile = read_lines(&dir.join("hartmann_profile.csv"));
    assert_eq!(profile[0], "y,u1,u1_exact,b1,b1_exact");
    assert_eq!(profile.len(), 102, "101 sample points along x = 1/2");
    assert!(dir.join("errors.csv").is_file());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn scheme_flag_switches_to_the_two_step_method() {
    let dir = work_dir("bdf2");
    let status = bin()
        .args(["decay", "--m", "2", "--tau", "0.25", "--t-final", "0.5", "--bdf2"])
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let config = std::fs::read_to_string(dir.join("config.txt")).unwrap();
    assert!(config.contains("scheme = bdf2"));
    let _ = std::fs::remove_dir_all(&dir);
}
