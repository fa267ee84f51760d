use std::ffi::{CStr, CString};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::ptr;

use stokes_darcy_ffi::*;

const SMALL: &str = "problem = \"manufactured_6_1\"\nh = 0.5\nsweep = \"h\"\nlevels = 2\nt_final = 0.25\ndt = 0.125\ntiming = false\n";

fn last_error() -> String {
    let p = sd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn parse(text: &str) -> (SdStatus, *mut SdConfig) {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let status = unsafe { sd_config_parse(text.as_ptr(), &mut cfg) };
    (status, cfg)
}

#[test]
fn run_through_handles_matches_the_core_driver() {
    let (status, cfg) = parse(SMALL);
    assert_eq!(status, SdStatus::Ok);
    assert!(sd_last_error_message().is_null());
    let mut n = 0;
    assert_eq!(unsafe { sd_config_level_count(cfg, &mut n) }, SdStatus::Ok);
    assert_eq!(n, 2);

    let mut run = ptr::null_mut();
    assert_eq!(unsafe { sd_run(cfg, 0, &mut run) }, SdStatus::Ok);
    assert_eq!(unsafe { sd_run_level_count(run, &mut n) }, SdStatus::Ok);
    assert_eq!(n, 2);

    let direct = stokes_darcy::driver::run_levels(&stokes_darcy::config::RunConfig::parse(SMALL).unwrap(), false).unwrap();
    for (k, level) in direct.iter().enumerate() {
        let (mut e_u, mut e_p) = (0.0, 0.0);
        assert_eq!(unsafe { sd_run_errors(run, k, &mut e_u, &mut e_p) }, SdStatus::Ok);
        assert_eq!((e_u.to_bits(), e_p.to_bits()), (level.errors.0.to_bits(), level.errors.1.to_bits()));
    }
    let (mut e_u, mut e_p) = (0.0, 0.0);
    assert_eq!(unsafe { sd_run_errors(run, 2, &mut e_u, &mut e_p) }, SdStatus::OutOfRange);
    assert!(last_error().contains("level 2"));

    let mut values = [f64::NAN; 4];
    assert_eq!(unsafe { sd_run_sample(run, 1, 0.5, 1.0, values.as_mut_ptr()) }, SdStatus::Ok);
    assert!(values.iter().all(|v| v.is_finite()));
    assert!((0.0..=1.0).contains(&values[3]));
    assert_eq!(unsafe { sd_run_sample(run, 1, 5.0, 1.0, values.as_mut_ptr()) }, SdStatus::OutOfRange);

    let dir = tempfile::tempdir().unwrap();
    let report = CString::new(dir.path().join("report.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sd_run_write_report(run, report.as_ptr()) }, SdStatus::Ok);
    let text = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    let vtk = CString::new(dir.path().join("fields.vtk").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sd_run_write_vtk(run, 0, vtk.as_ptr()) }, SdStatus::Ok);
    assert!(fs::read_to_string(dir.path().join("fields.vtk")).unwrap().starts_with("# vtk DataFile"));

    unsafe {
        sd_run_free(run);
        sd_config_free(cfg);
    }
}

#[test]
fn execute_and_check_write_their_artifacts() {
    let (_, cfg) = parse(SMALL);
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sd_execute(cfg, out.as_ptr(), 1) }, SdStatus::Ok);
    assert!(dir.path().join("out/report.csv").exists());
    assert!(dir.path().join("out/manifest.json").exists());
    assert_eq!(unsafe { sd_check(cfg) }, SdStatus::Ok);

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let bad = CString::new(blocker.join("out").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sd_execute(cfg, bad.as_ptr(), 0) }, SdStatus::Io);
    unsafe { sd_config_free(cfg) };
}

#[test]
fn errors_map_to_status_codes_with_a_message() {
    let (status, cfg) = parse("problem = \"manufactured_6_1\"\ndelta = 0.7\n");
    assert_eq!(status, SdStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("delta"));

    let (status, _) = parse("viscosity = 1\n");
    assert_eq!(status, SdStatus::Config);
    assert!(last_error().contains("viscosity"));

    let missing = CString::new("/nonexistent/run.toml").unwrap();
    let mut cfg = ptr::null_mut();
    assert_ne!(unsafe { sd_config_load(missing.as_ptr(), &mut cfg) }, SdStatus::Ok);
    assert!(cfg.is_null());

    let bad_utf8 = [0xffu8, 0xfe, 0];
    assert_eq!(unsafe { sd_config_parse(bad_utf8.as_ptr().cast(), &mut cfg) }, SdStatus::InvalidUtf8);
}

#[test]
fn null_pointers_are_rejected() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { sd_config_parse(ptr::null(), &mut cfg) }, SdStatus::NullPointer);
    assert!(last_error().contains("toml"));
    let text = CString::new(SMALL).unwrap();
    assert_eq!(unsafe { sd_config_parse(text.as_ptr(), ptr::null_mut()) }, SdStatus::NullPointer);
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { sd_run(ptr::null(), 0, &mut run) }, SdStatus::NullPointer);
    let mut n = 0;
    assert_eq!(unsafe { sd_run_level_count(ptr::null(), &mut n) }, SdStatus::NullPointer);
    assert_eq!(unsafe { sd_check(ptr::null()) }, SdStatus::NullPointer);
    unsafe {
        sd_config_free(ptr::null_mut());
        sd_run_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(sd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = fs::read_to_string(include.join("stokes_darcy.h")).unwrap();
    for name in [
        "sd_config_parse",
        "sd_config_load",
        "sd_config_free",
        "sd_run",
        "sd_run_free",
        "sd_run_errors",
        "sd_run_sample",
        "sd_execute",
        "sd_check",
        "sd_last_error_message",
        "SD_STATUS_OK",
        "typedef struct SdRun SdRun",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    fs::write(
        &src,
        "#include \"stokes_darcy.h\"\nint main(void) {\n  SdConfig *c = 0;\n  SdStatus s = sd_config_parse(\"h = 0.5\", &c);\n  sd_config_free(c);\n  return s == SD_STATUS_OK ? 0 : 1;\n}\n",
    )
    .unwrap();
    let Ok(status) = Command::new("cc").arg("-std=c99").arg("-Wall").arg("-Werror").arg("-fsyntax-only").arg("-I").arg(&include).arg(&src).status()
    else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(status.success());
}
