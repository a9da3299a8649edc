use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[model]
id = "pt_trivial"
n = 2
lambda_scaled = true

[model.params]
g = [0.0, 1.0]
curvature = 0.0

[curve]
t_start = -8.0
t_end = 8.0
arc_step = 2e-2
kappa_power = 1.0

[ladder]
exponents = [5, 6, 7, 8]

[grid]
t_points = 256
x_points = 64
box_half_width = 2.0

[construction]
order = 0.0
seed_extent = 2.0

[construction.bump]
radius = 1.5
sharpness = 10.0

[checks]
divergence_triggered = true
"#;

fn quasimode(config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasimode"))
        .arg("run")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env("QUASIMODE_THREADS", "2")
        .output()
        .expect("binary runs")
}

#[test]
fn run_writes_outputs_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("out");
    let res = quasimode(&cfg, &out, &[]);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{stdout}\n{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(stdout.contains("PASS divergence"));
    for name in ["norms.csv", "curves.csv", "report.json"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let norms = std::fs::read_to_string(out.join("norms.csv")).unwrap();
    assert!(norms
        .starts_with("lambda,s,norm_minus_N,residual_nu,cutoff_norm,norm_minus_N_minus_n,ratio"));
    assert_eq!(norms.lines().count(), 5);
}

#[test]
fn failing_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("flip.toml");
    std::fs::write(
        &cfg,
        CONFIG.replace(
            "divergence_triggered = true",
            "divergence_triggered = false",
        ),
    )
    .unwrap();
    let res = quasimode(&cfg, &dir.path().join("out"), &["--only", "geometry"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stdout).contains("FAIL divergence"));
}

#[test]
fn one_point_ladder_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    std::fs::write(&cfg, CONFIG.replace("[5, 6, 7, 8]", "[5]")).unwrap();
    let res = quasimode(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("insufficient ladder"));
}

#[test]
fn missing_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let res = quasimode(
        &dir.path().join("absent.toml"),
        &dir.path().join("out"),
        &[],
    );
    assert_eq!(res.status.code(), Some(2));
}
