//! Fixtures shared by the pipeline benchmarks.

use quasimode_core::experiment::{construct, Construction, ExperimentConfig, LambdaRecord, Stage};

/// A curved `pt_trivial` run at moderate resolution.
pub const BENCH_CONFIG: &str = r#"
[model]
id = "pt_trivial"
n = 2
lambda_scaled = true

[model.params]
g = [0.0, 1.0]
curvature = 1.0

[curve]
t_start = -8.0
t_end = 8.0
arc_step = 1e-2
kappa_power = 1.0

[ladder]
exponents = [6, 7, 8, 9]

[grid]
t_points = 512
x_points = 128
box_half_width = 2.0

[construction]
corrections = 1
order = 0.0
seed_extent = 2.0

[construction.bump]
radius = 1.5
sharpness = 10.0
"#;

pub fn bench_config() -> ExperimentConfig {
    ExperimentConfig::from_toml(BENCH_CONFIG).expect("bench config parses")
}

/// Build every stage up to `stage` at `lambda`.
pub fn build(cfg: &ExperimentConfig, lambda: f64, stage: Stage) -> Construction {
    construct(cfg, lambda, stage, &mut LambdaRecord::new(lambda)).expect("construction succeeds")
}
