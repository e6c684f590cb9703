//! End-to-end checks of the command line binary: exit codes, file formats,
//! and determinism of the written bundles.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_refab"))
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process terminated by signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const DEMO: &str = r#"
name = 'demo'
analyses = ['decay_fit']

[config]
rho_bar = 0.0
k = 0.5
n_cells = 100
t_final = 4.0
record_every = 20

[initial]
kind = 'bump'
center = 0.5
width = 0.4
height = 5.0
"#;

#[test]
fn simulate_writes_the_standard_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("demo.toml");
    write(&cfg, DEMO);

    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    // Without --out the bundle lands next to the config.
    let bundle = dir.path().join("demo_out");
    let trajectory = fs::read_to_string(bundle.join("trajectory.csv")).unwrap();
    assert!(trajectory.starts_with("t,W,u,y,l1,l2\n"));

    let snap = fs::read_to_string(bundle.join("snapshot_0000.csv")).unwrap();
    assert!(snap.starts_with("x,rho\n"));
    assert_eq!(snap.lines().count(), 101);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(bundle.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["name"], "demo");
    assert!(summary["final"]["W"].is_number());
    assert!(summary["analyses"]["decay_fit"]["l2"]["alpha"].is_number());
    let samples = summary["samples"].as_u64().unwrap() as usize;
    let snapshots = fs::read_dir(&bundle)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("snapshot_")
        })
        .count();
    assert_eq!(snapshots, samples);
    assert!(bundle.join("plot.gp").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("demo.toml");
    write(&cfg, DEMO);
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");

    for out in [&out1, &out2] {
        let r = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&r), 0, "stderr: {}", stderr(&r));
    }
    for name in ["trajectory.csv", "summary.json", "snapshot_0000.csv"] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn rejects_unknown_keys_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    write(&cfg, &format!("{DEMO}\nmystery_knob = 1\n"));

    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("error:"));

    let out = run(&["simulate", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn reports_numeric_blowup_distinctly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("runaway.toml");
    write(
        &cfg,
        r#"
name = 'runaway'

[config]
rho_bar = 1.0
k = 4.0
n_cells = 50
t_final = 40.0
record_every = 1000
freeze_velocity = true

[config.velocity]
kind = 'analytic'
coeffs = [1.0]

[initial]
kind = 'perturbation'
shape = 'sine'
mode = 1
amplitude = 1.0
"#,
    );
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("error:"));
}

#[test]
fn check_mode_validates_without_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("demo.toml");
    write(&cfg, DEMO);

    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--check"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok"));
    assert!(!dir.path().join("demo_out").exists());

    // A config whose initial profile cannot be built fails the check.
    let cfg = dir.path().join("orphan.toml");
    write(
        &cfg,
        r#"
name = 'orphan'

[config]
rho_bar = 0.0
k = 0.5
n_cells = 100
t_final = 1.0

[initial]
kind = 'csv'
path = 'missing.csv'
"#,
    );
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--check"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("check failed"));
}

#[test]
fn spectrum_reports_roots_and_abscissa() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.toml");
    write(
        &cfg,
        r#"
[spectrum]
d = 0.0
k = 0.5

[spectrum.window]
re_min = -2.0
re_max = 1.0
im_min = -10.0
im_max = 10.0
"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let roots = fs::read_to_string(out_dir.join("roots.csv")).unwrap();
    let mut lines = roots.lines();
    assert_eq!(lines.next(), Some("re,im,residual"));
    assert_eq!(lines.count(), 3);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let s = summary["s_est"].as_f64().unwrap();
    assert!((s - 0.5f64.ln()).abs() < 1e-6, "s_est = {s}");
    assert_eq!(summary["n_roots"], 3);
}

#[test]
fn region_scan_csv_is_sorted_and_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("reg.toml");
    write(
        &cfg,
        r#"
[region]
d_min = -0.5
d_max = 0.5
d_step = 0.5
k_min = -0.5
k_max = 0.5
k_step = 0.5
"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "region",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let csv = fs::read_to_string(out_dir.join("region.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("d,k,s_est,stable,by_theorem,mismatch"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let mut it = l.split(',');
            (
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
            )
        })
        .collect();
    assert_eq!(rows.len(), 9);
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(rows, sorted);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["points"], 9);
    assert_eq!(summary["mismatches"], 0);
}

#[test]
fn lyapunov_subcommand_adds_monitor_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("energy.toml");
    write(
        &cfg,
        r#"
name = 'energy'

[config]
rho_bar = 1.0
k = 0.5
n_cells = 100
t_final = 4.0
record_every = 4

[initial]
kind = 'perturbation'
shape = 'sine'
mode = 1
amplitude = 0.05
"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "lyapunov",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let monitor = fs::read_to_string(out_dir.join("monitor.csv")).unwrap();
    assert!(monitor.starts_with("t,V,ratio\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["analyses"]["lyapunov"]["max_increase"].is_number());
}

#[test]
fn extinction_subcommand_flags_flushout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("flush.toml");
    write(
        &cfg,
        r#"
name = 'flush'

[config]
rho_bar = 0.0
k = 0.0
n_cells = 100
t_final = 3.0
record_every = 1

[initial]
kind = 'bump'
center = 0.5
width = 0.4
height = 5.0
"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "extinction",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let report = &summary["analyses"]["extinction"];
    assert_eq!(report["extinct"], true);
    let disp = report["displacement"].as_f64().unwrap();
    assert!((1.0..1.3).contains(&disp), "displacement = {disp}");
}

#[test]
fn snapshots_reload_as_initial_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("demo.toml");
    write(&cfg, DEMO);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let resume = dir.path().join("resume.toml");
    write(
        &resume,
        &format!(
            r#"
name = 'resume'

[config]
rho_bar = 0.0
k = 0.5
n_cells = 100
t_final = 1.0

[initial]
kind = 'csv'
path = '{}'
"#,
            out_dir.join("snapshot_0000.csv").display()
        ),
    );
    let out = run(&["simulate", "--config", resume.to_str().unwrap(), "--check"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let out = run(&["simulate", "--config", resume.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(dir.path().join("resume_out").join("trajectory.csv").exists());
}
