//! Config-driven experiments: the full construction over a ladder of `lambda` values, norm
//! reports, slope fits, checks and the report files.

use crate::bichar_geometry::{
    curve_table, psi_violation_scan, subprincipal_divergence, trace_semibicharacteristic,
    uniformity_diagnostics, CurveDiagnostics, DivergenceForm, DivergenceReport, Multiplier,
    Semibicharacteristic,
};
use crate::eikonal::{
    default_seed_spacing, reconstruct_phase, scale_symbol, seed_lattice, solve_characteristics,
    PhaseFunction,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::operator_apply::{solvability_ratio, ConeCutoff, Method, NormReport, PreparedOperator};
use crate::quasimode::{
    assemble_quasimode, norm_scaling_fit, norm_slope_window, Exponents, Quasimode,
};
use crate::symbol_core::{LambdaScaling, ModelSpec, PhasePoint, SymbolModel};
use crate::transport::{
    apply_fixed_window, apply_time_cutoff, base_points, compute_coefficients, solve_corrections,
    solve_leading, transport_residual, Bump, CutoffStatus, ExpansionData,
};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use std::str::FromStr;

/// Allowance added on both sides of the theoretical window for the fitted norm slope.
pub const SLOPE_MARGIN: f64 = 0.1;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "QUASIMODE_THREADS";

/// Full experiment description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub curve: CurveConfig,
    pub ladder: LadderConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub construction: ConstructionConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub checks: Checks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveConfig {
    pub t_start: f64,
    pub t_end: f64,
    /// Row where characteristics are seeded.
    pub anchor_t: f64,
    pub arc_step: f64,
    /// Flattened start point `(t, x.., tau, xi..)`; prepared models default to `(t_start, 0; 0, xi0)`.
    pub start: Option<Vec<f64>>,
    /// Use `kappa = lambda^{-kappa_power}` in the divergence statistic instead of `min |H_p|`.
    pub kappa_power: Option<f64>,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            t_start: -1.0,
            t_end: 1.0,
            anchor_t: 0.0,
            arc_step: 1e-3,
            start: None,
            kappa_power: None,
        }
    }
}

/// Either explicit `lambdas` or `base^exponents`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    #[serde(default = "default_base")]
    pub base: f64,
    #[serde(default)]
    pub exponents: Vec<i32>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
}

fn default_base() -> f64 {
    2.0
}

impl LadderConfig {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        let values: Vec<f64> = if !self.lambdas.is_empty() {
            self.lambdas.clone()
        } else {
            self.exponents.iter().map(|&e| self.base.powi(e)).collect()
        };
        if values.len() < 4 {
            return Err(Error::InsufficientLadder {
                points: values.len(),
            });
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) || !(values[0] >= 1.0) {
            return Err(Error::Config(
                "ladder must be strictly increasing and start at lambda >= 1".into(),
            ));
        }
        Ok(values)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub t_points: usize,
    pub x_points: usize,
    /// Half-width of the `x` box in units of `lambda^{-delta}`.
    pub box_half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t_points: 1024,
            x_points: 512,
            box_half_width: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructionConfig {
    /// Number of amplitude corrections `M`.
    pub corrections: usize,
    /// Negative Sobolev order `N`.
    pub order: f64,
    pub nu: f64,
    pub method: Method,
    pub expansion_order: usize,
    pub j_sep: usize,
    /// Multiply by `lambda^{delta/2}`.
    pub normalize: bool,
    pub form: DivergenceForm,
    pub divergence_test: bool,
    pub bump: Bump,
    /// Amplitude threshold `lambda^{-cutoff_target}` for the time cutoff; default `N + n + 2`.
    pub cutoff_target: Option<f64>,
    /// Fallback window used when the divergence premise fails on the grid.
    pub fixed_window_fraction: f64,
    pub cone_factor: f64,
    /// Extent of the characteristic seeds in the rescaled variable.
    pub seed_extent: f64,
    pub exponents: Exponents,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        Self {
            corrections: 0,
            order: 1.0,
            nu: 0.0,
            method: Method::FftQuantization,
            expansion_order: 2,
            j_sep: 8,
            normalize: true,
            form: DivergenceForm::Adjoint,
            divergence_test: true,
            bump: Bump::default(),
            cutoff_target: None,
            fixed_window_fraction: 0.8,
            cone_factor: 1.5,
            seed_extent: 1.0,
            exponents: Exponents::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Eikonal residual bound in units of `lambda^{-7 epsilon}`.
    pub eikonal: f64,
    pub characteristic_step: f64,
    pub characteristic_box: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eikonal: 1e-6,
            characteristic_step: 0.05,
            characteristic_box: 10.0,
        }
    }
}

/// Optional pass/fail checks on the ladder.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    /// Ratio strictly increasing with at least this value at the top.
    pub ratio_growth_min: Option<f64>,
    /// Ratio stays within this factor of its first value.
    pub ratio_flat_factor: Option<f64>,
    /// Slope of `||u||_(-N)` inside the window from the norm bounds.
    pub norm_window: bool,
    pub residual_slope_max: Option<f64>,
    pub cutoff_slope_max: Option<f64>,
    /// Expected outcome of the divergence statistic (`value > 0`).
    pub divergence_triggered: Option<bool>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.ladder.resolve()?;
        let g = &self.grid;
        if !g.t_points.is_power_of_two()
            || !g.x_points.is_power_of_two()
            || g.t_points < 8
            || g.x_points < 8
        {
            return Err(Error::Config(
                "grid sizes must be powers of two (at least 8)".into(),
            ));
        }
        if !(g.box_half_width > 0.0) {
            return Err(Error::Config("box_half_width must be positive".into()));
        }
        let c = &self.curve;
        if !(c.t_end > c.t_start) || !(c.arc_step > 0.0) {
            return Err(Error::Config(
                "curve needs t_end > t_start and a positive arc_step".into(),
            ));
        }
        let k = &self.construction;
        if k.method == Method::OscillatoryExpansion && k.expansion_order > 4 {
            return Err(Error::Config("expansion_order is limited to 4".into()));
        }
        if k.corrections > 8 {
            return Err(Error::Config("at most 8 corrections".into()));
        }
        if !(k.order >= 0.0) || !(0.0..=2.0).contains(&k.nu) {
            return Err(Error::Config("need order >= 0 and 0 <= nu <= 2".into()));
        }
        SymbolModel::from_spec(&self.model, None)?;
        Ok(())
    }
}

/// Pipeline stages in execution order; `--only` stops after the named one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Geometry,
    Eikonal,
    Transport,
    Quasimode,
    Norms,
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "geometry" => Stage::Geometry,
            "eikonal" => Stage::Eikonal,
            "transport" => Stage::Transport,
            "quasimode" => Stage::Quasimode,
            "norms" => Stage::Norms,
            other => return Err(Error::Config(format!("unknown stage {other}"))),
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub only: Option<Stage>,
    /// Keep ladder entries with `lambda <= 2^k`.
    pub ladder_top: Option<i32>,
}

/// Outcome for one ladder value.
#[derive(Clone, Debug, Serialize)]
pub struct LambdaRecord {
    pub lambda: f64,
    pub error: Option<String>,
    pub curve: Option<CurveSummary>,
    pub divergence: Option<DivergenceReport>,
    pub eikonal_residual: Option<f64>,
    pub transport_residual: Option<f64>,
    pub cutoff: Option<CutoffStatus>,
    pub quasimode_l2: Option<f64>,
    pub norms: Option<NormReport>,
}

impl LambdaRecord {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            error: None,
            curve: None,
            divergence: None,
            eikonal_residual: None,
            transport_residual: None,
            cutoff: None,
            quasimode_l2: None,
            norms: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveSummary {
    pub samples: usize,
    pub psi_events: usize,
    pub diagnostics: CurveDiagnostics,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Slopes {
    pub norm_minus_n: Option<f64>,
    pub residual_nu: Option<f64>,
    pub cutoff_norm: Option<f64>,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub ladder: Vec<f64>,
    pub records: Vec<LambdaRecord>,
    pub slopes: Slopes,
    pub checks: Vec<CheckResult>,
    /// `0` all checks pass, `1` a check failed, `2` a ladder value aborted.
    pub exit_code: i32,
    #[serde(skip)]
    pub curves: Vec<(f64, Vec<String>, Vec<Vec<String>>)>,
}

/// Everything built for one `lambda`; used by the runner and by callers that need the fields.
pub struct Construction {
    pub model: SymbolModel,
    pub curve: Option<Semibicharacteristic>,
    pub phase: Option<PhaseFunction>,
    pub chain: Option<crate::transport::AmplitudeChain>,
    pub quasimode: Option<Quasimode>,
    pub operator: Option<PreparedOperator>,
}

/// Build the grid for `lambda`: `t` over the curve range, `x` over `box_half_width lambda^{-delta}`.
pub fn grid_for(cfg: &ExperimentConfig, lambda: f64) -> Result<Grid> {
    let half = cfg.grid.box_half_width * lambda.powf(-cfg.construction.exponents.delta);
    let nx = cfg.grid.x_points;
    Grid::new(
        cfg.curve.t_start,
        cfg.curve.t_end,
        cfg.grid.t_points,
        2.0 * half / nx as f64,
        nx,
    )
}

fn start_point(cfg: &ExperimentConfig, model: &SymbolModel) -> Result<PhasePoint> {
    match &cfg.curve.start {
        Some(w) => {
            if w.len() != 2 * model.n {
                return Err(Error::Config(format!(
                    "curve.start needs {} entries",
                    2 * model.n
                )));
            }
            Ok(PhasePoint::from_flat(w))
        }
        None if model.is_prepared() => PhasePoint::new(
            cfg.curve.t_start,
            vec![0.0; model.n - 1],
            0.0,
            model.xi0.clone(),
        ),
        None => Err(Error::Config(format!(
            "model '{}' needs curve.start",
            model.id
        ))),
    }
}

/// Run the construction for one `lambda` up to `stage`, filling `record` as stages complete.
pub fn construct(
    cfg: &ExperimentConfig,
    lambda: f64,
    stage: Stage,
    record: &mut LambdaRecord,
) -> Result<Construction> {
    let k = &cfg.construction;
    let ex = k.exponents;
    let clock = std::time::Instant::now();
    let lap = |name: &str| {
        log::debug!(
            "lambda = {lambda}: {name} done after {:.2?}",
            clock.elapsed()
        )
    };
    let scaling = LambdaScaling {
        lambda,
        epsilon: ex.epsilon,
    };
    let model = SymbolModel::from_spec(&cfg.model, Some(scaling))?;
    if model.is_prepared() && model.n != 2 && stage > Stage::Geometry {
        return Err(Error::Config(
            "the prepared construction supports one spatial dimension (n = 2)".into(),
        ));
    }
    let mut out = Construction {
        model,
        curve: None,
        phase: None,
        chain: None,
        quasimode: None,
        operator: None,
    };
    let model = &out.model;

    let w0 = start_point(cfg, model)?;
    let span = cfg.curve.t_end - cfg.curve.t_start;
    let curve =
        trace_semibicharacteristic(model, &Multiplier::default(), &w0, span, cfg.curve.arc_step)?;
    let diagnostics = uniformity_diagnostics(model, &curve, 2)?;
    record.curve = Some(CurveSummary {
        samples: curve.samples.len(),
        psi_events: psi_violation_scan(&curve).len(),
        diagnostics,
    });
    if k.divergence_test {
        let kappa = cfg.curve.kappa_power.map(|p| lambda.powf(-p));
        let rep = subprincipal_divergence(model, std::slice::from_ref(&curve), k.form, kappa)?;
        record.divergence = rep.into_iter().next();
    }
    out.curve = Some(curve);
    lap("geometry");
    if stage == Stage::Geometry {
        return Ok(out);
    }

    let grid = grid_for(cfg, lambda)?;
    let phase = if model.is_prepared() {
        let f = scale_symbol(model, lambda, ex.epsilon)?;
        let seeds = seed_lattice(
            default_seed_spacing(lambda, ex.epsilon, ex.delta),
            k.seed_extent,
        );
        let anchor = grid.nearest_row(cfg.curve.anchor_t);
        let step = cfg.tolerances.characteristic_step.min(grid.dt);
        let fan = solve_characteristics(
            &f,
            &seeds,
            &grid.t,
            anchor,
            step,
            cfg.tolerances.characteristic_box,
        )?;
        reconstruct_phase(&fan, &f, &grid, cfg.tolerances.eikonal)?
    } else {
        PhaseFunction::zero(&grid, lambda, ex.epsilon)
    };
    record.eikonal_residual = Some(phase.residual);
    lap("eikonal");
    if stage == Stage::Eikonal {
        out.phase = Some(phase);
        return Ok(out);
    }

    let base = base_points(model, &grid, out.curve.as_ref())?;
    let coeffs = compute_coefficients(model, &phase, &base, k.form)?;
    let mut chain = solve_leading(&coeffs, &grid, lambda, ex.delta, k.bump)?;
    record.transport_residual = Some(transport_residual(&grid, &coeffs, &chain.phi[0]));
    if k.corrections > 0 {
        let expansion = ExpansionData::new(model, &phase, &coeffs)?;
        solve_corrections(&mut chain, &expansion, k.corrections)?;
    }
    let target = k.cutoff_target.unwrap_or(k.order + model.n as f64 + 2.0);
    if let Err(e) = apply_time_cutoff(&mut chain, target) {
        log::info!("lambda = {lambda}: {e}; using the fixed window");
        apply_fixed_window(&mut chain, k.fixed_window_fraction);
    }
    record.cutoff = Some(chain.cutoff.clone());
    lap("transport");
    if stage == Stage::Transport {
        out.phase = Some(phase);
        out.chain = Some(chain);
        return Ok(out);
    }

    let xi0 = model.xi0[model.xi0.len() - 1];
    let u = assemble_quasimode(&phase, &chain, lambda, xi0, ex, k.normalize)?;
    record.quasimode_l2 = Some(crate::quasimode::sobolev_norm(&u, 0.0)?);
    let mut op = PreparedOperator::new(model.clone(), k.method, coeffs.q0.clone())?;
    op.order = k.expansion_order;
    op.j_sep = k.j_sep;
    lap("quasimode");
    if stage == Stage::Norms {
        let cut = ConeCutoff {
            lambda,
            epsilon: ex.epsilon,
            factor: k.cone_factor,
            xi0,
        };
        record.norms = Some(solvability_ratio(
            &op,
            &u,
            Some(&phase),
            k.order,
            k.nu,
            &cut,
        )?);
        lap("norms");
    }
    out.phase = Some(phase);
    out.chain = Some(chain);
    out.quasimode = Some(u);
    out.operator = Some(op);
    Ok(out)
}

fn fit(lambdas: &[f64], values: &[f64]) -> Option<f64> {
    norm_scaling_fit(lambdas, values).ok()
}

/// Run every ladder value and evaluate the configured checks.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut ladder = cfg.ladder.resolve()?;
    if let Some(top) = opts.ladder_top {
        let cap = 2f64.powi(top) * (1.0 + 1e-12);
        ladder.retain(|&l| l <= cap);
    }
    let stage = opts.only.unwrap_or(Stage::Norms);
    let mut records = Vec::with_capacity(ladder.len());
    let mut curves = Vec::new();
    for &lambda in &ladder {
        let mut rec = LambdaRecord::new(lambda);
        match construct(cfg, lambda, stage, &mut rec) {
            Ok(c) => {
                if let Some(curve) = &c.curve {
                    let (h, rows) = curve_table(curve);
                    curves.push((lambda, h, rows));
                }
            }
            Err(e) => {
                log::warn!("lambda = {lambda}: {e}");
                rec.error = Some(e.to_string());
            }
        }
        records.push(rec);
    }

    let ok: Vec<&NormReport> = records.iter().filter_map(|r| r.norms.as_ref()).collect();
    let ls: Vec<f64> = ok.iter().map(|n| n.lambda).collect();
    let col = |f: fn(&NormReport) -> f64| -> Vec<f64> { ok.iter().map(|n| f(n)).collect() };
    let slopes = Slopes {
        norm_minus_n: fit(&ls, &col(|n| n.norm_minus_n)),
        residual_nu: fit(&ls, &col(|n| n.residual_nu)),
        cutoff_norm: fit(&ls, &col(|n| n.cutoff_norm)),
        ratio: fit(&ls, &col(|n| n.ratio)),
    };
    let checks = evaluate_checks(cfg, &records, &slopes);
    let aborted = records.iter().any(|r| r.error.is_some());
    let exit_code = if aborted {
        2
    } else if checks.iter().any(|c| !c.pass) {
        1
    } else {
        0
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        ladder,
        records,
        slopes,
        checks,
        exit_code,
        curves,
    })
}

fn evaluate_checks(
    cfg: &ExperimentConfig,
    records: &[LambdaRecord],
    slopes: &Slopes,
) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let ratios: Vec<f64> = records
        .iter()
        .filter_map(|r| r.norms.as_ref().map(|n| n.ratio))
        .collect();
    let complete = ratios.len() == records.len() && !ratios.is_empty();
    let c = &cfg.checks;
    if let Some(min_top) = c.ratio_growth_min {
        let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
        let top = ratios.last().copied().unwrap_or(0.0);
        out.push(CheckResult {
            name: "ratio_growth".into(),
            pass: complete && increasing && top >= min_top,
            detail: format!(
                "increasing = {increasing}, top ratio = {top:.4e} (need >= {min_top:e})"
            ),
        });
    }
    if let Some(factor) = c.ratio_flat_factor {
        let first = ratios.first().copied().unwrap_or(0.0);
        let spread = ratios
            .iter()
            .map(|r| (r / first).max(first / r))
            .fold(1.0f64, f64::max);
        out.push(CheckResult {
            name: "ratio_flat".into(),
            pass: complete && first > 0.0 && spread <= factor,
            detail: format!(
                "max deviation factor from the first value = {spread:.4} (allowed {factor})"
            ),
        });
    }
    if c.norm_window {
        let n = cfg.model.n;
        let (lo, hi) =
            norm_slope_window(n, cfg.construction.order, cfg.construction.exponents.delta);
        let (lo, hi) = (lo - SLOPE_MARGIN, hi + SLOPE_MARGIN);
        let s = slopes.norm_minus_n;
        out.push(CheckResult {
            name: "norm_window".into(),
            pass: complete && s.is_some_and(|s| s >= lo && s <= hi),
            detail: format!("slope = {s:?}, window = [{lo:.4}, {hi:.4}]"),
        });
    }
    for (name, bound, slope) in [
        ("residual_slope", c.residual_slope_max, slopes.residual_nu),
        ("cutoff_slope", c.cutoff_slope_max, slopes.cutoff_norm),
    ] {
        if let Some(b) = bound {
            out.push(CheckResult {
                name: name.into(),
                pass: complete && slope.is_some_and(|s| s <= b),
                detail: format!("slope = {slope:?}, bound = {b}"),
            });
        }
    }
    if let Some(expected) = c.divergence_triggered {
        let got: Vec<bool> = records
            .iter()
            .filter_map(|r| r.divergence.as_ref().map(|d| d.value > 0.0))
            .collect();
        let state = |b: bool| if b { "triggered" } else { "not triggered" };
        let detail = match got.first() {
            Some(&first) if got.iter().all(|&g| g == first) => state(first).to_string(),
            Some(_) => "mixed".to_string(),
            None => "not evaluated".to_string(),
        };
        out.push(CheckResult {
            name: "divergence".into(),
            pass: got.len() == records.len() && got.iter().all(|&g| g == expected),
            detail: format!("{detail} (expected {})", state(expected)),
        });
    }
    out
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Write `norms.csv`, `curves.csv` and `report.json` into `dir`.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("norms.csv")).map_err(csv_err)?;
    w.write_record([
        "lambda",
        "s",
        "norm_minus_N",
        "residual_nu",
        "cutoff_norm",
        "norm_minus_N_minus_n",
        "ratio",
    ])
    .map_err(csv_err)?;
    for n in report.records.iter().filter_map(|r| r.norms.as_ref()) {
        w.write_record([
            format!("{:.12e}", n.lambda),
            format!("{}", -n.order),
            format!("{:.12e}", n.norm_minus_n),
            format!("{:.12e}", n.residual_nu),
            format!("{:.12e}", n.cutoff_norm),
            format!("{:.12e}", n.norm_minus_n_minus_dim),
            format!("{:.12e}", n.ratio),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("curves.csv")).map_err(csv_err)?;
    if let Some((_, header, _)) = report.curves.first() {
        let mut h = vec!["lambda".to_string()];
        h.extend(header.iter().cloned());
        w.write_record(&h).map_err(csv_err)?;
    }
    for (lambda, _, rows) in &report.curves {
        for row in rows {
            let mut r = vec![format!("{lambda:.12e}")];
            r.extend(row.iter().cloned());
            w.write_record(&r).map_err(csv_err)?;
        }
    }
    w.flush()?;

    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("report.json"), json + "\n")?;
    Ok(())
}

/// Configure the global thread pool from [`THREADS_ENV`] when set.
pub fn init_threads_from_env() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}
