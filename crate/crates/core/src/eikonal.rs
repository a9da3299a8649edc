//! Real phase `omega(t, x)` solving `omega_t = re r(t, x, xi0 + omega_x)` by characteristics in
//! the rescaled variables `y = lambda^{3e} x`, `eta = lambda^{4e} omega_x`, `omega = lambda^{-7e} omega0`.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numerics::{derivative_uniform, quintic_hermite_eval, rk4_step, C64};
use crate::symbol_core::{eval_jet, PhasePoint, SymbolModel, Which};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// `f(t, y, eta) = lambda^{7e} r(t, lambda^{-3e} y, xi0 + lambda^{-4e} eta)`.
#[derive(Clone, Debug)]
pub struct ScaledSymbol {
    pub model: SymbolModel,
    pub lambda: f64,
    pub epsilon: f64,
}

/// Real part of `f` with first and second derivatives in `(y, eta)` (one spatial dimension).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReJet {
    pub f: f64,
    pub fy: f64,
    pub feta: f64,
    pub fyy: f64,
    pub fyeta: f64,
    pub fetaeta: f64,
}

pub fn scale_symbol(model: &SymbolModel, lambda: f64, epsilon: f64) -> Result<ScaledSymbol> {
    if !model.is_prepared() {
        return Err(Error::InvalidInput(format!(
            "model '{}' is not in prepared form",
            model.id
        )));
    }
    if !(lambda >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "lambda must be >= 1, got {lambda}"
        )));
    }
    Ok(ScaledSymbol {
        model: model.clone(),
        lambda,
        epsilon,
    })
}

impl ScaledSymbol {
    fn pw(&self, e: f64) -> f64 {
        self.lambda.powf(e * self.epsilon)
    }

    pub fn value(&self, t: f64, y: &[f64], eta: &[f64]) -> C64 {
        let sy = self.pw(-3.0);
        let se = self.pw(-4.0);
        let x: Vec<f64> = y.iter().map(|v| v * sy).collect();
        let xi: Vec<f64> = eta
            .iter()
            .zip(&self.model.xi0)
            .map(|(e, x0)| x0 + se * e)
            .collect();
        let r = self.model.r(t, &x, &xi).unwrap_or_default();
        r * self.pw(7.0)
    }

    pub fn re_jet(&self, t: f64, y: f64, eta: f64) -> Result<ReJet> {
        if self.model.n != 2 {
            return Err(Error::InvalidInput(
                "phase construction supports one spatial dimension".into(),
            ));
        }
        let w = PhasePoint::new(
            t,
            vec![y * self.pw(-3.0)],
            0.0,
            vec![self.model.xi0[0] + eta * self.pw(-4.0)],
        )?;
        let jet = eval_jet(&self.model, &w, 2, Which::Principal)?;
        // r = tau - p, so derivatives of r in (x, xi) are those of -p.
        let g = |i: usize| -jet.grad[i].re;
        let h = |i: usize, j: usize| -jet.hess_at(i, j).re;
        Ok(ReJet {
            f: (C64::new(0.0, 0.0) - jet.value).re * self.pw(7.0),
            fy: g(1) * self.pw(4.0),
            feta: g(3) * self.pw(3.0),
            fyy: h(1, 1) * self.pw(1.0),
            fyeta: h(1, 3),
            fetaeta: h(3, 3) * self.pw(-1.0),
        })
    }
}

/// State along one characteristic: position, momentum, phase and their variations in the seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CharState {
    pub y: f64,
    pub eta: f64,
    pub omega0: f64,
    pub y_z: f64,
    pub eta_z: f64,
}

#[derive(Clone, Debug)]
pub struct CharacteristicFan {
    /// Seeds kept, increasing.
    pub seeds: Vec<f64>,
    pub times: Vec<f64>,
    /// `trajectories[k][i]` is the state of seed `k` at `times[i]`.
    pub trajectories: Vec<Vec<CharState>>,
    pub dropped: Vec<f64>,
    pub anchor_index: usize,
}

/// Symmetric seeds `k h` with `|k h| <= c`, including zero.
pub fn seed_lattice(spacing: f64, c: f64) -> Vec<f64> {
    let k = (c / spacing).floor() as i64;
    (-k..=k).map(|i| i as f64 * spacing).collect()
}

/// Seed spacing `lambda^{-delta} / 64` in `x`, expressed in the rescaled variable.
pub fn default_seed_spacing(lambda: f64, epsilon: f64, delta: f64) -> f64 {
    lambda.powf(3.0 * epsilon - delta) / 64.0
}

/// RK4 for `y' = -d_eta re f`, `eta' = d_y re f`, `omega0' = re f - eta d_eta re f` and the
/// variational system, from `(z, 0, 0, 1, 0)` at `times[anchor_index]` to both ends.
/// Seeds leaving `|y| + |eta| <= box_bound` are dropped; the kept set is the contiguous run
/// around zero.
pub fn solve_characteristics(
    f: &ScaledSymbol,
    seeds: &[f64],
    times: &[f64],
    anchor_index: usize,
    max_step: f64,
    box_bound: f64,
) -> Result<CharacteristicFan> {
    if times.len() < 2 || anchor_index >= times.len() {
        return Err(Error::InvalidInput(
            "characteristics need a time grid containing the anchor".into(),
        ));
    }
    let rhs = |t: f64, s: &[f64]| -> Vec<f64> {
        match f.re_jet(t, s[0], s[1]) {
            Ok(j) => vec![
                -j.feta,
                j.fy,
                j.f - s[1] * j.feta,
                -(j.fyeta * s[3] + j.fetaeta * s[4]),
                j.fyy * s[3] + j.fyeta * s[4],
            ],
            Err(_) => vec![f64::NAN; 5],
        }
    };
    let integrate = |z: f64| -> Option<Vec<CharState>> {
        let nt = times.len();
        let mut out = vec![
            CharState {
                y: z,
                eta: 0.0,
                omega0: 0.0,
                y_z: 1.0,
                eta_z: 0.0
            };
            nt
        ];
        for dir in [1i64, -1] {
            let mut s = vec![z, 0.0, 0.0, 1.0, 0.0];
            let mut i = anchor_index as i64;
            while (dir > 0 && i + 1 < nt as i64) || (dir < 0 && i > 0) {
                let (t0, t1) = (times[i as usize], times[(i + dir) as usize]);
                let subs = ((t1 - t0).abs() / max_step).ceil().max(1.0) as usize;
                let h = (t1 - t0) / subs as f64;
                for k in 0..subs {
                    s = rk4_step(&rhs, t0 + k as f64 * h, &s, h);
                }
                if s.iter().any(|v| !v.is_finite()) || s[0].abs() + s[1].abs() > box_bound {
                    return None;
                }
                i += dir;
                out[i as usize] = CharState {
                    y: s[0],
                    eta: s[1],
                    omega0: s[2],
                    y_z: s[3],
                    eta_z: s[4],
                };
            }
        }
        Some(out)
    };
    let mut sorted = seeds.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let results: Vec<Option<Vec<CharState>>> = sorted.par_iter().map(|&z| integrate(z)).collect();
    let zero = sorted.iter().position(|&z| z == 0.0).or_else(|| {
        sorted
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
    });
    let zero = zero.ok_or_else(|| Error::InvalidInput("no seeds".into()))?;
    if results[zero].is_none() {
        return Err(Error::InvalidInput(
            "the central characteristic leaves the scaled box".into(),
        ));
    }
    let mut lo = zero;
    while lo > 0 && results[lo - 1].is_some() {
        lo -= 1;
    }
    let mut hi = zero;
    while hi + 1 < sorted.len() && results[hi + 1].is_some() {
        hi += 1;
    }
    let dropped: Vec<f64> = sorted
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < lo || *i > hi)
        .map(|(_, z)| *z)
        .collect();
    if !dropped.is_empty() {
        log::warn!(
            "{} characteristic seeds left the scaled box and were dropped",
            dropped.len()
        );
    }
    let trajectories: Vec<Vec<CharState>> = results[lo..=hi]
        .iter()
        .map(|r| r.clone().unwrap())
        .collect();
    Ok(CharacteristicFan {
        seeds: sorted[lo..=hi].to_vec(),
        times: times.to_vec(),
        trajectories,
        dropped,
        anchor_index,
    })
}

/// Gridded phase with derivative grids (row-major over `grid`).
#[derive(Clone, Debug, Serialize)]
pub struct PhaseFunction {
    #[serde(skip)]
    pub grid: Grid,
    pub omega: Vec<f64>,
    pub omega_t: Vec<f64>,
    pub omega_x: Vec<f64>,
    pub omega_xx: Vec<f64>,
    /// Points covered by the characteristic fan; the phase is set to zero elsewhere.
    pub mask: Vec<bool>,
    pub lambda: f64,
    pub epsilon: f64,
    /// Max of `|omega_t (finite difference) - re r(t, x, xi0 + omega_x)|`.
    pub residual: f64,
    /// `max_t |omega(t, 0)|`, `max_t |omega_x(t, 0)|`, `max_t |omega_xx(t, 0)|`.
    pub vanishing: [f64; 3],
    /// Measured `sup |d_x^k omega| * lambda^{(7 - 3k) e}` for `k = 0, 1, 2`.
    pub class_constants: [f64; 3],
    /// Covered `x`-interval per time row.
    pub hull: Vec<(f64, f64)>,
}

impl PhaseFunction {
    /// The identically vanishing phase (models with no prepared part).
    pub fn zero(grid: &Grid, lambda: f64, epsilon: f64) -> Self {
        let n = grid.len();
        let half = grid.box_width() / 2.0;
        Self {
            grid: grid.clone(),
            omega: vec![0.0; n],
            omega_t: vec![0.0; n],
            omega_x: vec![0.0; n],
            omega_xx: vec![0.0; n],
            mask: vec![true; n],
            lambda,
            epsilon,
            residual: 0.0,
            vanishing: [0.0; 3],
            class_constants: [0.0; 3],
            hull: vec![(-half, half); grid.nt()],
        }
    }

    /// `omega_xx(t_i, 0)`.
    pub fn hessian_at_origin(&self, row: usize) -> f64 {
        self.omega_xx[self.grid.idx(row, self.grid.x_origin())]
    }

    /// Write `t, x1, omega, omega_t, omega_x1` for covered points.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x1", "omega", "omega_t", "omega_x1"])
            .map_err(|e| Error::Io(e.to_string()))?;
        for (i, &t) in self.grid.t.iter().enumerate() {
            for (j, &x) in self.grid.x.iter().enumerate() {
                let k = self.grid.idx(i, j);
                if !self.mask[k] {
                    continue;
                }
                w.write_record([
                    format!("{t:.12e}"),
                    format!("{x:.12e}"),
                    format!("{:.12e}", self.omega[k]),
                    format!("{:.12e}", self.omega_t[k]),
                    format!("{:.12e}", self.omega_x[k]),
                ])
                .map_err(|e| Error::Io(e.to_string()))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Interpolate the fan onto `grid` (quintic Hermite in the rescaled variable), unscale, and check
/// the eikonal residual against `tol * lambda^{-7e}`.
pub fn reconstruct_phase(
    fan: &CharacteristicFan,
    f: &ScaledSymbol,
    grid: &Grid,
    tol: f64,
) -> Result<PhaseFunction> {
    if fan.times.len() != grid.nt()
        || fan
            .times
            .iter()
            .zip(&grid.t)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::IncompatibleDiscretizations {
            detail: "fan times differ from grid times".into(),
        });
    }
    let (lam, eps) = (f.lambda, f.epsilon);
    let sx = lam.powf(3.0 * eps);
    let s_omega = lam.powf(-7.0 * eps);
    let s_x = lam.powf(-4.0 * eps);
    let s_xx = lam.powf(-eps);
    let nx = grid.nx();
    let rows: Vec<
        Result<(
            Vec<f64>,
            Vec<f64>,
            Vec<f64>,
            Vec<f64>,
            Vec<bool>,
            (f64, f64),
        )>,
    > = (0..grid.nt())
        .into_par_iter()
        .map(|i| {
            let t = grid.t[i];
            let ys: Vec<f64> = fan.trajectories.iter().map(|tr| tr[i].y).collect();
            if ys.windows(2).any(|p| !(p[1] > p[0]))
                || fan.trajectories.iter().any(|tr| tr[i].y_z <= 0.0)
            {
                return Err(Error::CharacteristicCrossing { t });
            }
            let om: Vec<f64> = fan.trajectories.iter().map(|tr| tr[i].omega0).collect();
            let et: Vec<f64> = fan.trajectories.iter().map(|tr| tr[i].eta).collect();
            let curv: Vec<f64> = fan
                .trajectories
                .iter()
                .map(|tr| tr[i].eta_z / tr[i].y_z)
                .collect();
            let mut row = (
                vec![0.0; nx],
                vec![0.0; nx],
                vec![0.0; nx],
                vec![0.0; nx],
                vec![false; nx],
            );
            for (j, &x) in grid.x.iter().enumerate() {
                let y = x * sx;
                if let Some((v, d, dd)) = quintic_hermite_eval(&ys, &om, &et, &curv, y) {
                    let jet = f.re_jet(t, y, d)?;
                    row.0[j] = v * s_omega;
                    row.1[j] = jet.f * s_omega;
                    row.2[j] = d * s_x;
                    row.3[j] = dd * s_xx;
                    row.4[j] = true;
                }
            }
            let hull = (ys[0] / sx, ys[ys.len() - 1] / sx);
            Ok((row.0, row.1, row.2, row.3, row.4, hull))
        })
        .collect();
    let n = grid.len();
    let mut pf = PhaseFunction {
        grid: grid.clone(),
        omega: Vec::with_capacity(n),
        omega_t: Vec::with_capacity(n),
        omega_x: Vec::with_capacity(n),
        omega_xx: Vec::with_capacity(n),
        mask: Vec::with_capacity(n),
        lambda: lam,
        epsilon: eps,
        residual: 0.0,
        vanishing: [0.0; 3],
        class_constants: [0.0; 3],
        hull: Vec::with_capacity(grid.nt()),
    };
    for r in rows {
        let (a, b, c, d, m, h) = r?;
        pf.omega.extend(a);
        pf.omega_t.extend(b);
        pf.omega_x.extend(c);
        pf.omega_xx.extend(d);
        pf.mask.extend(m);
        pf.hull.push(h);
    }
    pf.residual = eikonal_residual(&pf);
    let j0 = grid.x_origin();
    for i in 0..grid.nt() {
        let k = grid.idx(i, j0);
        pf.vanishing[0] = pf.vanishing[0].max(pf.omega[k].abs());
        pf.vanishing[1] = pf.vanishing[1].max(pf.omega_x[k].abs());
        pf.vanishing[2] = pf.vanishing[2].max(pf.omega_xx[k].abs());
    }
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    pf.class_constants = [
        sup(&pf.omega) / s_omega,
        sup(&pf.omega_x) / s_x,
        sup(&pf.omega_xx) / s_xx,
    ];
    let bound = tol * s_omega;
    if !(pf.residual <= bound) {
        return Err(Error::EikonalReconstruction {
            residual: pf.residual,
            tolerance: bound,
        });
    }
    Ok(pf)
}

/// Max over covered interior points of `|D omega / dt - omega_t|`, with a sixth-order difference
/// in `t` taken only where the whole stencil is covered.
pub fn eikonal_residual(pf: &PhaseFunction) -> f64 {
    let g = &pf.grid;
    let (nt, nx) = (g.nt(), g.nx());
    (0..nx)
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = (0..nt).map(|i| pf.omega[g.idx(i, j)]).collect();
            let d = derivative_uniform(&col, g.dt);
            let mut worst = 0.0f64;
            for i in 3..nt.saturating_sub(3) {
                if (i - 3..=i + 3).all(|k| pf.mask[g.idx(k, j)]) {
                    worst = worst.max((d[i] - pf.omega_t[g.idx(i, j)]).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}
