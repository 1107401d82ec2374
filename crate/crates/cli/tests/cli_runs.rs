use std::path::Path;
use std::process::Command;

use epmesh::output::read_snapshot;
use epmesh::{parse_config, run_simulation};

const BIN: &str = env!("CARGO_BIN_EXE_epmesh");

fn small_config(t_end: f64) -> String {
    format!(
        "
[model]
kind = \"ep-diff\"
alpha = 0.3133

[grid]
nx = 16
ny = 16

[particles]
per_cell = 4

[time]
t_end = {t_end}

[output]
snapshot_stride = 2

[ic]
kind = \"two_lines\"
length = 3.0
"
    )
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn zero_end_time_writes_only_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&small_config(0.0)).unwrap();
    let summary = run_simulation(&cfg, dir.path()).unwrap();
    assert_eq!(summary.steps, 0);
    let csv = read(&dir.path().join("energy.csv"));
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("snap_000000.txt").exists());
    assert!(dir.path().join("snap_000000.pgm").exists());
}

#[test]
fn runs_are_bitwise_reproducible() {
    let cfg = parse_config(&small_config(0.1)).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_simulation(&cfg, a.path()).unwrap();
    run_simulation(&cfg, b.path()).unwrap();
    for name in ["energy.csv", "snap_000000.txt", "snap_000004.txt"] {
        assert_eq!(read(&a.path().join(name)), read(&b.path().join(name)), "{name}");
    }
}

#[test]
fn energy_csv_schema_and_constant_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&small_config(0.1)).unwrap();
    run_simulation(&cfg, dir.path()).unwrap();
    let csv = read(&dir.path().join("energy.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,hamiltonian,px,py,mass,fp_iters,cg_iters");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), cfg.n_steps() + 1);
    for r in &rows {
        assert_eq!(r.len(), 7);
        assert_eq!(r[4], rows[0][4]);
    }
}

#[test]
fn snapshot_times_follow_stride() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&small_config(0.1)).unwrap();
    run_simulation(&cfg, dir.path()).unwrap();
    for step in (0..=cfg.n_steps()).step_by(2) {
        let s = read_snapshot(&dir.path().join(format!("snap_{step:06}.txt"))).unwrap();
        assert_eq!(s.time, step as f64 * cfg.time.dt);
        assert_eq!((s.nx, s.ny), (16, 16));
        assert!(s.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
    assert!(!dir.path().join("snap_000001.txt").exists());
}

#[test]
fn cli_run_with_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(&cfg_path, small_config(0.05)).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(BIN)
        .args(["run", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(["--dump-particles", "--dump-components"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert!(stdout.contains("max |H - H(0)|"));
    let particles = read(&out.join("particles_000000.csv"));
    assert!(particles.starts_with("beta,x,y,mx,my,D\n"));
    assert_eq!(particles.lines().count(), 16 * 16 * 4 + 1);
    assert_eq!(read_snapshot(&out.join("snap_000002_ux.txt")).unwrap().name, "ux");
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, small_config(1.0).replace("per_cell = 4", "per_cell = 7")).unwrap();
    let out = Command::new(BIN).args(["run", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("particles.per_cell"));

    let missing = Command::new(BIN).args(["run", "/nonexistent/x.cfg"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let diverge = dir.path().join("diverge.cfg");
    std::fs::write(&diverge, small_config(0.05).replace("t_end = 0.05", "t_end = 0.05\nfp_max_iter = 1")).unwrap();
    let out = Command::new(BIN)
        .args(["run", diverge.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cli_verify_tiny_passes() {
    let out = Command::new(BIN).args(["verify", "--size", "tiny"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("tolerance"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn shipped_config_matches_reference_setup() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/epdiff_lines.cfg");
    let cfg = epmesh::load_config(&path).unwrap();
    assert_eq!(cfg.model.alpha, 0.3133);
    assert_eq!((cfg.grid.nx, cfg.grid.ny), (128, 128));
    assert_eq!(cfg.time.dt, 0.0204);
    assert_eq!(cfg.particles.per_cell, 16);
}
