//! Acceptance suite: prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use nalgebra::DMatrix;
use quasimode_core::bichar_geometry::{
    complex_tangency_diagnostics, evolve_grazing_lagrangean, evolve_riccati, psi_violation_scan,
    trace_semibicharacteristic, uniformity_diagnostics, LagrangeanPath, Multiplier,
    RiccatiCoefficients, RiccatiOptions, Semibicharacteristic,
};
use quasimode_core::eikonal::{
    default_seed_spacing, reconstruct_phase, scale_symbol, seed_lattice, solve_characteristics,
};
use quasimode_core::experiment::{
    construct, run_experiment, ExperimentConfig, ExperimentReport, LambdaRecord, RunOptions, Stage,
};
use quasimode_core::grid::Grid;
use quasimode_core::symbol_core::{ModelParams, ModelSpec, PhasePoint, Quantization, SymbolModel};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> Result<ExperimentConfig, String> {
    ExperimentConfig::load(&config_dir().join(name)).map_err(|e| format!("{name}: {e}"))
}

fn run(name: &str) -> Result<(ExperimentReport, Duration), String> {
    let cfg = load(name)?;
    let clock = Instant::now();
    let report =
        run_experiment(&cfg, &RunOptions::default()).map_err(|e| format!("{name}: {e}"))?;
    if let Some(r) = report.records.iter().find(|r| r.error.is_some()) {
        return Err(format!(
            "{name}: lambda = {} aborted: {}",
            r.lambda,
            r.error.as_deref().unwrap_or("")
        ));
    }
    Ok((report, clock.elapsed()))
}

fn spec(id: &str, n: usize, params: ModelParams) -> ModelSpec {
    ModelSpec {
        id: id.into(),
        n,
        quantization: Quantization::Weyl,
        lambda_scaled: false,
        params,
    }
}

fn model(id: &str, n: usize, params: ModelParams) -> SymbolModel {
    SymbolModel::from_spec(&spec(id, n, params), None).expect("catalog model")
}

fn grazex(a: f64, b: f64, c: f64, cubic: f64) -> SymbolModel {
    model(
        "grazex",
        2,
        ModelParams {
            a_matrix: Some(vec![vec![a]]),
            b_matrix: Some(vec![vec![b]]),
            c_matrix: Some(vec![vec![c]]),
            cubic: Some(cubic),
            ..Default::default()
        },
    )
}

fn point(t: f64, x: Vec<f64>, tau: f64, xi: Vec<f64>) -> PhasePoint {
    PhasePoint::new(t, x, tau, xi).expect("finite point")
}

fn riccati_oracle() -> Outcome {
    let clock = Instant::now();
    let m = grazex(1.0, 0.0, 1.0, 0.0);
    let curve = trace_semibicharacteristic(
        &m,
        &Multiplier::default(),
        &point(0.0, vec![0.0], 0.0, vec![1.0]),
        1.0,
        1e-3,
    )
    .map_err(|e| e.to_string())?;
    let max_err = |step: f64| -> Result<f64, String> {
        let path = evolve_grazing_lagrangean(
            &m,
            &curve,
            &DMatrix::zeros(1, 1),
            RiccatiOptions { step, tol: 1e-8 },
        )
        .map_err(|e| e.to_string())?;
        Ok(path
            .times
            .iter()
            .zip(&path.mats)
            .map(|(t, a)| (a[(0, 0)] - t.tan()).abs())
            .fold(0.0, f64::max))
    };
    let e1 = max_err(1e-3)?;
    let e2 = max_err(5e-4)?;
    let elapsed = clock.elapsed();
    let detail = format!(
        "max error {e1:.2e} at step 1e-3, {e2:.2e} at 5e-4 (gain {:.1}x), {elapsed:.2?}",
        e1 / e2
    );
    if e1 <= 1e-8 && e1 / e2 >= 12.0 && elapsed < Duration::from_secs(1) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn eikonal_residual() -> Outcome {
    let clock = Instant::now();
    let (lambda, eps) = (2f64.powi(10), 0.125);
    let half = 0.95 * 0.5 * lambda.powf(-3.0 * eps);
    let grid = Grid::new(-1.0, 1.0, 2048, 2.0 * half / 512.0, 512).map_err(|e| e.to_string())?;
    let anchor = grid.nearest_row(0.0);
    let seeds = seed_lattice(default_seed_spacing(lambda, eps, 5.0 / 12.0), 0.5);
    let build = |m: &SymbolModel| {
        let f = scale_symbol(m, lambda, eps)?;
        let fan = solve_characteristics(&f, &seeds, &grid.t, anchor, 1e-3, 10.0)?;
        reconstruct_phase(&fan, &f, &grid, 1.0)
    };
    let flat = build(&grazex(0.0, 0.2, 1.0, 1.0)).map_err(|e| e.to_string())?;
    let bound = 1e-6 * lambda.powf(-7.0 * eps);
    let vanish = flat.vanishing.iter().fold(0.0f64, |m, v| m.max(*v));

    let curved_model = grazex(0.8, 0.2, 1.0, 0.0);
    let curved = build(&curved_model).map_err(|e| e.to_string())?;
    let (path, halt) = evolve_riccati(
        |t| RiccatiCoefficients::from_model(&curved_model, t),
        grid.t[0],
        grid.t[grid.nt() - 1],
        grid.t[anchor],
        &DMatrix::zeros(1, 1),
        RiccatiOptions {
            step: 1e-4,
            tol: 1e-8,
        },
    );
    if let Some(e) = halt {
        return Err(format!("Riccati path halted: {e}"));
    }
    let hess_err = (0..grid.nt())
        .map(|i| {
            (curved.hessian_at_origin(i)
                - path.at(grid.t[i]).map(|a| a[(0, 0)]).unwrap_or(f64::NAN))
            .abs()
        })
        .fold(
            0.0f64,
            |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) },
        );
    let elapsed = clock.elapsed();
    let detail = format!(
        "residual {:.2e} / {:.2e} (bound {bound:.2e}), vanishing {vanish:.2e}, Hessian vs Riccati {hess_err:.2e}, {elapsed:.2?}",
        flat.residual, curved.residual
    );
    if flat.residual <= bound
        && curved.residual <= bound
        && vanish <= 1e-8
        && hess_err <= 1e-6
        && elapsed < Duration::from_secs(60)
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const TRANSPORT_COMMON: &str = r#"
[curve]
t_start = -1.0
t_end = 1.0
[ladder]
exponents = [8, 9, 10, 11]
[grid]
t_points = 4096
x_points = 256
box_half_width = 2.0
[construction]
seed_extent = 2.0
divergence_test = false
[construction.bump]
radius = 1.5
sharpness = 10.0
"#;

fn transport_residual() -> Outcome {
    let models = [
        ("pt_trivial", "[model]\nid = \"pt_trivial\"\nlambda_scaled = true\n[model.params]\ng = [0.0, 1.0]\ncurvature = 1.0\n"),
        ("grazex", "[model]\nid = \"grazex\"\n[model.params]\na_matrix = [[0.8]]\nb_matrix = [[0.2]]\nc_matrix = [[1.0]]\ncubic = 1.0\ng = [0.3, 1.0]\n"),
        ("grazex (complex)", "[model]\nid = \"grazex\"\n[model.params]\na = [0.5, 1.0]\nc_matrix = [[1.0]]\nim_slope = 0.2\ng = [0.0, 1.0]\n"),
        ("sympex_k", "[model]\nid = \"sympex_k\"\nn = 3\n[model.params]\nk = 2\ng = [0.0, 1.0]\n"),
        ("mu_product", "[model]\nid = \"mu_product\"\n[model.params]\ng = [0.0, 1.0]\n"),
        ("psi_crossing", "[model]\nid = \"psi_crossing\"\n[model.params]\nsigma = 1.0\nt_c = 0.0\n"),
    ];
    let starts = [
        ("sympex_k", "[-1.0, 0.0, 0.0, 0.1, 0.1, 1.0]"),
        ("mu_product", "[-1.0, 0.5, 0.0, 1.0]"),
    ];
    let lambda = 2f64.powi(10);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, text) in models {
        let mut common = TRANSPORT_COMMON.to_string();
        if let Some((_, s)) = starts.iter().find(|(n, _)| *n == name) {
            common = common.replacen("t_end = 1.0\n", &format!("t_end = 1.0\nstart = {s}\n"), 1);
        }
        let cfg = ExperimentConfig::from_toml(&format!("{text}{common}"))
            .map_err(|e| format!("{name}: {e}"))?;
        let mut rec = LambdaRecord::new(lambda);
        construct(&cfg, lambda, Stage::Transport, &mut rec).map_err(|e| format!("{name}: {e}"))?;
        let r = rec
            .transport_residual
            .ok_or_else(|| format!("{name}: no residual"))?;
        worst = worst.max(r);
        parts.push(format!("{name} {r:.1e}"));
    }
    let detail = format!("relative residual at lambda = 2^10: {}", parts.join(", "));
    if worst <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn check_line(report: &ExperimentReport, name: &str) -> Result<(bool, String), String> {
    report
        .checks
        .iter()
        .find(|c| c.name == name)
        .map(|c| (c.pass, c.detail.clone()))
        .ok_or_else(|| format!("check {name} missing from the report"))
}

fn sandwich_and_cone(report: &ExperimentReport, elapsed: Duration, which: &str) -> Outcome {
    let (pass, detail) = check_line(report, which)?;
    let detail = format!("{detail}, ladder {elapsed:.1?}");
    if pass && elapsed < Duration::from_secs(300) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn residual_ladder() -> Outcome {
    let mut slopes = Vec::new();
    for m in 0..3 {
        let (rep, _) = run(&format!("residual_m{m}.toml"))?;
        slopes.push(rep.slopes.residual_nu.ok_or("residual slope unavailable")?);
    }
    let steps: Vec<f64> = slopes.windows(2).map(|w| w[0] - w[1]).collect();
    let detail = format!(
        "slopes {:.4} / {:.4} / {:.4}, steps {:.4} and {:.4} (target {:.4})",
        slopes[0],
        slopes[1],
        slopes[2],
        steps[0],
        steps[1],
        1.0 / 24.0
    );
    if steps.iter().all(|s| (s - 1.0 / 24.0).abs() <= 0.02) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn headline() -> Outcome {
    let clock = Instant::now();
    let (head, _) = run("headline.toml")?;
    let (ctrl, _) = run("control.toml")?;
    let elapsed = clock.elapsed();
    let (g_pass, g_detail) = check_line(&head, "ratio_growth")?;
    let (f_pass, f_detail) = check_line(&ctrl, "ratio_flat")?;
    let detail = format!("sign change: {g_detail}; control: {f_detail}; {elapsed:.1?}");
    if g_pass && f_pass && elapsed < Duration::from_secs(600) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn trace(m: &SymbolModel, w0: PhasePoint) -> Result<Semibicharacteristic, String> {
    trace_semibicharacteristic(m, &Multiplier::default(), &w0, 1.0, 0.01)
        .map_err(|e| format!("{}: {e}", m.id))
}

fn scanners() -> Outcome {
    let c0 = 0.1 / 2f64.sqrt();
    let real = [
        (
            model(
                "pt_trivial",
                2,
                ModelParams {
                    g: Some(vec![0.0, 1.0]),
                    curvature: Some(1.0),
                    ..Default::default()
                },
            ),
            point(0.0, vec![0.0], 0.0, vec![1.0]),
        ),
        (
            grazex(0.8, 0.2, 1.0, 1.0),
            point(0.0, vec![0.0], 0.0, vec![1.0]),
        ),
        (
            model(
                "sympex_k",
                3,
                ModelParams {
                    k: Some(2),
                    g: Some(vec![0.0, 1.0]),
                    ..Default::default()
                },
            ),
            point(-0.5, vec![0.0, 0.0], c0, vec![c0, 0.0]),
        ),
        (
            model(
                "mu_product",
                2,
                ModelParams {
                    g: Some(vec![0.0, 1.0]),
                    ..Default::default()
                },
            ),
            point(0.0, vec![0.5], 0.0, vec![1.0]),
        ),
    ];
    let mut events = 0;
    let mut wedge = 0.0f64;
    for (m, w0) in &real {
        let curve = trace(m, w0.clone())?;
        events += psi_violation_scan(&curve).len();
        let d = m.n - 1;
        let path = if m.is_prepared() {
            evolve_grazing_lagrangean(m, &curve, &DMatrix::zeros(d, d), RiccatiOptions::default())
                .map_err(|e| e.to_string())?
        } else {
            LagrangeanPath::constant(
                curve.samples[0].w.t,
                curve.samples[curve.samples.len() - 1].w.t,
                DMatrix::zeros(d, d),
            )
        };
        let base = uniformity_diagnostics(m, &curve, 2).map_err(|e| e.to_string())?;
        let diag =
            complex_tangency_diagnostics(m, &curve, &path, base).map_err(|e| e.to_string())?;
        wedge = wedge.max(diag.wedge_bound.unwrap_or(f64::INFINITY));
    }
    let t_c = 0.5;
    let crossing = model(
        "psi_crossing",
        2,
        ModelParams {
            sigma: Some(1.0),
            t_c: Some(t_c),
            ..Default::default()
        },
    );
    let curve = trace(&crossing, point(0.0, vec![0.0], 0.0, vec![1.0]))?;
    let found = psi_violation_scan(&curve);
    let located = found.len() == 1 && {
        let e = found[0];
        (0.5 * (e.s_minus + e.s_plus) - t_c).abs() <= 0.01 + 1e-12
    };
    let detail = format!(
        "{events} events on real symbols, wedge bound {wedge:e}; crossing model events {:?}",
        found
            .iter()
            .map(|e| (e.s_minus, e.s_plus))
            .collect::<Vec<_>>()
    );
    if events == 0 && wedge == 0.0 && located {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let sandwich = run("sandwich.toml");
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "Riccati oracle", Box::new(riccati_oracle)),
        (2, "eikonal residual", Box::new(eikonal_residual)),
        (3, "transport residual", Box::new(transport_residual)),
        (
            4,
            "negative-norm sandwich",
            Box::new(|| {
                sandwich
                    .clone()
                    .and_then(|(r, t)| sandwich_and_cone(&r, t, "norm_window"))
            }),
        ),
        (5, "residual decay ladder", Box::new(residual_ladder)),
        (
            6,
            "cone cutoff decay",
            Box::new(|| {
                sandwich
                    .clone()
                    .and_then(|(r, t)| sandwich_and_cone(&r, t, "cutoff_slope"))
            }),
        ),
        (7, "headline solvability ratio", Box::new(headline)),
        (8, "condition scanners", Box::new(scanners)),
    ];
    let mut failed = 0;
    for (k, name, f) in criteria {
        match f() {
            Ok(d) => println!("criterion {k} ({name}): PASS  {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {k} ({name}): FAIL  {d}");
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
