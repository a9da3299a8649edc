use criterion::{criterion_group, criterion_main, Criterion};
use quasimode_bench::{bench_config, build};
use quasimode_core::experiment::Stage;
use quasimode_core::operator_apply::{apply_operator, Method};

const LAMBDA: f64 = 256.0;

fn stages(c: &mut Criterion) {
    let cfg = bench_config();
    let mut g = c.benchmark_group("construct");
    g.sample_size(10);
    for stage in [
        Stage::Geometry,
        Stage::Eikonal,
        Stage::Transport,
        Stage::Norms,
    ] {
        g.bench_function(format!("{stage:?}").to_lowercase(), |b| {
            b.iter(|| build(&cfg, LAMBDA, stage))
        });
    }
    g.finish();
}

fn operator(c: &mut Criterion) {
    let cfg = bench_config();
    let built = build(&cfg, LAMBDA, Stage::Quasimode);
    let (u, phase, op) = (
        built.quasimode.unwrap(),
        built.phase.unwrap(),
        built.operator.unwrap(),
    );
    let mut g = c.benchmark_group("apply_operator");
    g.sample_size(20);
    for method in [Method::FftQuantization, Method::OscillatoryExpansion] {
        let mut op = op.clone();
        op.method = method;
        g.bench_function(format!("{method:?}"), |b| {
            b.iter(|| apply_operator(&op, &u, Some(&phase)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, stages, operator);
criterion_main!(benches);
