use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn solve(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_stokes-darcy"))
        .arg("solve")
        .arg(&path)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

const SWEEP: &str = "problem = \"manufactured_6_1\"\nh = 0.5\nsweep = \"h\"\nlevels = 5\nt_final = 0.25\ndt = 0.125\n";

#[test]
fn manufactured_sweep_writes_one_row_per_level_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = solve(dir.path(), SWEEP, &["--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let lines: Vec<_> = report.lines().collect();
    assert_eq!(lines[0], "level,h,dt,epsilon,delta,e_u,rate_u,e_p,rate_p,runtime_s");
    assert_eq!(lines.len(), 6);
    for (k, line) in lines[1..].iter().enumerate() {
        let cells: Vec<_> = line.split(',').collect();
        assert_eq!(cells.len(), 10);
        assert_eq!(cells[0], k.to_string());
        assert!(cells[5].parse::<f64>().unwrap() > 0.0);
        assert!(cells[9].parse::<f64>().is_ok(), "timing on by default");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["problem"], "\"manufactured_6_1\"");
    assert_eq!(manifest["config"]["levels"], "5");
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(artifacts.iter().any(|a| a == "report.csv"));
}

#[test]
fn reports_are_bitwise_identical_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{SWEEP}timing = false\nlevels = 3\n").replace("levels = 5\n", "");
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let run = solve(dir.path(), &config, &["--out", out.to_str().unwrap(), "--threads", "1"]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        reports.push(fs::read(out.join("report.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert!(String::from_utf8_lossy(&reports[0]).lines().skip(1).all(|l| l.ends_with(',')));
}

#[test]
fn unwritable_output_directory_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = blocker.join("out");
    let run = solve(dir.path(), SWEEP, &["--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(run.stderr.trim_ascii()).unwrap();
    assert_eq!(record["kind"], "output");
}

#[test]
fn config_errors_exit_with_1_and_a_record_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = solve(dir.path(), "problem = \"manufactured_6_1\"\ndelta = 0.7\n", &["--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(record["kind"], "config");
    assert!(record["message"].as_str().unwrap().contains("delta"));

    let run = solve(dir.path(), "problem = \"manufactured_6_1\"\nviscosity = 1\n", &["--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("viscosity"));
}

#[test]
fn check_flag_audits_without_time_stepping() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = solve(dir.path(), "problem = \"manufactured_6_1\"\n", &["--out", out.to_str().unwrap(), "--check"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let check = fs::read_to_string(out.join("check.csv")).unwrap();
    assert!(check.starts_with("check,value,tolerance,passed\n"));
    assert!(check.lines().skip(1).all(|l| l.ends_with(",true")));
    assert!(check.contains("coupling_skewness"));
    assert!(out.join("manifest.json").exists());
    assert!(!out.join("report.csv").exists());
}

#[test]
fn snapshots_and_diagnostics_of_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = "problem = \"manufactured_6_1\"\nh = 0.5\nt_final = 0.5\nsnapshots = true\ndiagnostics = true\n";
    let run = solve(dir.path(), config, &["--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let diag = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let rows: Vec<_> = diag.lines().collect();
    assert_eq!(
        rows[0],
        "step,t,energy,viscous_dissipation,darcy_dissipation,bjs_dissipation,energy_identity_residual,div_residual"
    );
    // h couples Δt, so 0.5 / 0.5 = 1 step.
    assert_eq!(rows.len(), 2);

    let vtk = fs::read_to_string(out.join("fields.vtk")).unwrap();
    let lines: Vec<_> = vtk.lines().collect();
    assert_eq!(lines[0], "# vtk DataFile Version 3.0");
    assert_eq!(lines[2], "ASCII");
    assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
    // 0.5 spacing on (0,1)×(0,2): 3 × 5 vertices, 2 × 4 × 2 triangles.
    assert_eq!(lines[4], "POINTS 15 double");
    assert!(vtk.contains("CELLS 16 64\n"));
    assert!(vtk.contains("POINT_DATA 15\nVECTORS u_tot double\n"));
    assert!(vtk.contains("SCALARS p_tot double 1\nLOOKUP_TABLE default\n"));
    assert!(vtk.contains("SCALARS phi double 1\nLOOKUP_TABLE default\n"));
    let phi_start = lines.iter().position(|l| *l == "SCALARS phi double 1").unwrap() + 2;
    let phi: Vec<f64> = lines[phi_start..phi_start + 15].iter().map(|l| l.parse().unwrap()).collect();
    assert!(phi.iter().all(|&v| (0.0..=1.0).contains(&v)));
}
