use quasimode_core::error::Error;
use quasimode_core::experiment::{
    construct, run_experiment, write_outputs, ExperimentConfig, LambdaRecord, RunOptions, Stage,
};
use quasimode_core::operator_apply::{apply_operator, Method};

const SMALL: &str = r#"
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
"#;

fn small() -> ExperimentConfig {
    ExperimentConfig::from_toml(SMALL).expect("small config parses")
}

fn l2(v: &[quasimode_core::C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn unknown_keys_are_rejected() {
    let text = SMALL.replace("[grid]", "[grid]\nresolution = 3");
    assert!(matches!(
        ExperimentConfig::from_toml(&text),
        Err(Error::Config(_))
    ));
}

#[test]
fn short_ladder_is_rejected() {
    let err = ExperimentConfig::from_toml(&SMALL.replace("[5, 6, 7, 8]", "[5]")).unwrap_err();
    assert!(
        matches!(err, Error::InsufficientLadder { points: 1 }),
        "{err}"
    );
}

#[test]
fn ladder_top_truncates() {
    let opts = RunOptions {
        only: Some(Stage::Geometry),
        ladder_top: Some(6),
    };
    let report = run_experiment(&small(), &opts).unwrap();
    assert_eq!(report.ladder, vec![32.0, 64.0]);
}

#[test]
fn geometry_only_skips_norms() {
    let opts = RunOptions {
        only: Some(Stage::Geometry),
        ladder_top: None,
    };
    let report = run_experiment(&small(), &opts).unwrap();
    assert_eq!(report.records.len(), 4);
    for r in &report.records {
        assert!(r.error.is_none(), "{:?}", r.error);
        assert!(r.curve.is_some());
        assert!(r.eikonal_residual.is_none() && r.norms.is_none());
    }
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&report, dir.path()).unwrap();
    let norms = std::fs::read_to_string(dir.path().join("norms.csv")).unwrap();
    assert_eq!(norms.lines().count(), 1, "header only");
    let curves = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert!(curves.lines().count() > 4);
}

#[test]
fn full_run_is_deterministic() {
    let cfg = small();
    let opts = RunOptions::default();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let report = run_experiment(&cfg, &opts).unwrap();
        assert!(
            report.records.iter().all(|r| r.norms.is_some()),
            "every ladder value produces norms"
        );
        write_outputs(&report, d.path()).unwrap();
    }
    for name in ["norms.csv", "curves.csv", "report.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn quantization_methods_agree_on_residual() {
    let text = SMALL
        .replace("curvature = 0.0", "curvature = 1.0")
        .replace("order = 0.0", "order = 0.0\ncorrections = 1");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let lambda = 256.0;
    let mut rec = LambdaRecord::new(lambda);
    let c = construct(&cfg, lambda, Stage::Quasimode, &mut rec).unwrap();
    let (u, phase, mut op) = (c.quasimode.unwrap(), c.phase.unwrap(), c.operator.unwrap());
    op.method = Method::FftQuantization;
    let fft = l2(&apply_operator(&op, &u, Some(&phase)).unwrap());
    op.method = Method::OscillatoryExpansion;
    let exp = l2(&apply_operator(&op, &u, Some(&phase)).unwrap());
    let rel = (fft - exp).abs() / fft.max(exp);
    assert!(rel < 0.05, "fft {fft:e} vs expansion {exp:e}");
}
