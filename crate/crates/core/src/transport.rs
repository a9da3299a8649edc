//! Amplitude chain: transport coefficients, drift straightening, the leading amplitude, the
//! correction recursion and the time cutoff.

use crate::bichar_geometry::{DivergenceForm, Semibicharacteristic};
use crate::eikonal::PhaseFunction;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numerics::{
    cumulative_integral, derivative_uniform, fft_freq, lagrange4_uniform, smooth_step,
    smooth_step_derivative, FftPair, C64,
};
use crate::symbol_core::{eval_jet, subprincipal, vec_norm, PhasePoint, SymbolModel, Which};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Largest exponent accepted before `exp` is considered to overflow.
const EXP_LIMIT: f64 = 700.0;

/// Compactly supported profile `exp(-a s^2 / (1 - s^2))`, `s = x / radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub radius: f64,
    pub sharpness: f64,
}

impl Default for Bump {
    fn default() -> Self {
        Self {
            radius: 0.5,
            sharpness: 20.0,
        }
    }
}

impl Bump {
    pub fn eval(&self, x: f64) -> f64 {
        let s = x / self.radius;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (-self.sharpness * s * s / (1.0 - s * s)).exp()
        }
    }
}

/// Coefficients of the leading transport operator `D_t + a(t) x D_x + q0(t) + i r0(t, x)`.
#[derive(Clone, Debug, Serialize)]
pub struct TransportCoefficients {
    pub q0: Vec<C64>,
    /// Row-major over the grid.
    pub r0: Vec<f64>,
    /// Drift coefficient `a(t)`.
    pub drift: Vec<f64>,
    /// `|grad p|` along the base curve.
    pub grad_norm: Vec<f64>,
    /// Row where the amplitude is normalized (running maximum of `int (im q0 + r0(t, 0))`).
    pub start_row: usize,
    pub lambda: f64,
}

/// Points of the base curve, one per grid row. Prepared models use `(t, 0; 0, xi0)`; other
/// models sample `curve` at arclength `t - t_0`.
pub fn base_points(
    model: &SymbolModel,
    grid: &Grid,
    curve: Option<&Semibicharacteristic>,
) -> Result<Vec<PhasePoint>> {
    let d = model.n - 1;
    if model.is_prepared() {
        return grid
            .t
            .iter()
            .map(|&t| PhasePoint::new(t, vec![0.0; d], 0.0, model.xi0.clone()))
            .collect();
    }
    let curve = curve
        .ok_or_else(|| Error::InvalidInput("a traced curve is required for this model".into()))?;
    let s = curve.s_values();
    let flat: Vec<Vec<f64>> = curve.samples.iter().map(|c| c.w.to_flat()).collect();
    grid.t
        .iter()
        .map(|&t| {
            let target = s[0] + (t - grid.t[0]);
            if target > s[s.len() - 1] + 1e-9 {
                return Err(Error::InvalidInput(
                    "curve is shorter than the time grid".into(),
                ));
            }
            let k = s.partition_point(|&v| v <= target).clamp(1, s.len() - 1);
            let th = ((target - s[k - 1]) / (s[k] - s[k - 1])).clamp(0.0, 1.0);
            let w: Vec<f64> = flat[k - 1]
                .iter()
                .zip(&flat[k])
                .map(|(a, b)| a + th * (b - a))
                .collect();
            Ok(PhasePoint::from_flat(&w))
        })
        .collect()
}

/// `q0 = D_t|grad p| / (2|grad p|) + p0 / |grad p|` (with `conj(p0)` for the adjoint form),
/// `r0 = lambda im r(t, x, xi0 + omega_x)`, `a = -d_x d_xi re r` at the base curve.
pub fn compute_coefficients(
    model: &SymbolModel,
    phase: &PhaseFunction,
    base: &[PhasePoint],
    form: DivergenceForm,
) -> Result<TransportCoefficients> {
    let grid = &phase.grid;
    if base.len() != grid.nt() {
        return Err(Error::IncompatibleDiscretizations {
            detail: "base curve and grid rows differ".into(),
        });
    }
    let n = model.n;
    let lambda = phase.lambda;
    let mut grad_norm = Vec::with_capacity(base.len());
    let mut p0 = Vec::with_capacity(base.len());
    let mut drift = Vec::with_capacity(base.len());
    for w in base {
        let jet = eval_jet(model, w, 2, Which::Principal)?;
        let g = vec_norm(&jet.grad);
        if !(g >= 1e-14) {
            return Err(Error::NormalizationBreakdown { norm: g, t: w.t });
        }
        grad_norm.push(g);
        let ps = subprincipal(model, w)?;
        p0.push(match form {
            DivergenceForm::Direct => ps,
            DivergenceForm::Adjoint => ps.conj(),
        });
        drift.push(if model.is_prepared() && n == 2 {
            jet.hess_at(1, n + 1).re
        } else {
            0.0
        });
    }
    let logs: Vec<f64> = grad_norm.iter().map(|g| g.ln()).collect();
    let dlog = derivative_uniform(&logs, grid.dt);
    let q0: Vec<C64> = (0..base.len())
        .map(|i| C64::new(0.0, -0.5 * dlog[i]) + p0[i] / grad_norm[i])
        .collect();
    let nx = grid.nx();
    let r0: Vec<f64> = if model.is_prepared() {
        (0..grid.nt())
            .into_par_iter()
            .flat_map_iter(|i| {
                let t = grid.t[i];
                (0..nx).map(move |j| {
                    let k = grid.idx(i, j);
                    let xi: Vec<f64> = model.xi0.iter().map(|x0| x0 + phase.omega_x[k]).collect();
                    lambda * model.r(t, &[grid.x[j]], &xi).unwrap_or_default().im
                })
            })
            .collect()
    } else {
        vec![0.0; grid.len()]
    };
    // d/dt log|phi_0| on the curve is im q0 + r0(t, 0); normalize where its integral peaks
    let j0 = grid.x_origin();
    let growth: Vec<f64> = (0..grid.nt())
        .map(|i| q0[i].im + r0[grid.idx(i, j0)])
        .collect();
    let run = cumulative_integral(&growth, grid.dt, 0);
    let start_row = run
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > run[best] { i } else { best });
    Ok(TransportCoefficients {
        q0,
        r0,
        drift,
        grad_norm,
        start_row,
        lambda,
    })
}

/// Linear flow `z' = a(t) z` with `z = x` at the anchor row; stored as the factor `z / x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StraightenMap {
    pub factor: Vec<f64>,
    pub anchor_row: usize,
}

impl StraightenMap {
    pub fn identity(nt: usize, anchor_row: usize) -> Self {
        Self {
            factor: vec![1.0; nt],
            anchor_row,
        }
    }

    pub fn forward(&self, row: usize, x: f64) -> f64 {
        self.factor[row] * x
    }

    pub fn inverse(&self, row: usize, z: f64) -> f64 {
        z / self.factor[row]
    }

    fn is_identity(&self, row: usize) -> bool {
        self.factor[row] == 1.0
    }
}

pub fn straighten_drift(drift: &[f64], dt: f64, anchor_row: usize) -> StraightenMap {
    if drift.iter().all(|&a| a == 0.0) {
        return StraightenMap::identity(drift.len(), anchor_row);
    }
    let integral = cumulative_integral(drift, dt, anchor_row);
    StraightenMap {
        factor: integral.iter().map(|v| v.exp()).collect(),
        anchor_row,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffStatus {
    None,
    /// Transitions `[start, end]` in `t` on each side of the start point.
    Triggered {
        left: (f64, f64),
        right: (f64, f64),
    },
    /// Fixed window; the divergence premise did not hold on the grid.
    Fixed {
        fraction: f64,
    },
}

/// Amplitudes `phi_0..phi_M` (row-major grids in `x`), the phase integral `B`, and the cutoff.
#[derive(Clone, Debug)]
pub struct AmplitudeChain {
    pub grid: Grid,
    pub lambda: f64,
    pub delta: f64,
    pub rho: f64,
    pub phi: Vec<Vec<C64>>,
    pub b: Vec<C64>,
    /// `B` in straightened coordinates.
    pub b_straight: Vec<C64>,
    pub chi: Vec<f64>,
    pub chi_derivative: Vec<f64>,
    pub straighten: StraightenMap,
    pub start_row: usize,
    pub bump: Bump,
    pub cutoff: CutoffStatus,
}

/// Resample each row from straightened coordinates (`to_x = true`: value at `x / m`) or into them
/// (`to_x = false`: value at `m z`).
fn remap<T>(grid: &Grid, map: &StraightenMap, values: &[T], to_x: bool) -> Vec<T>
where
    T: Copy + Default + Send + Sync + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let nx = grid.nx();
    let x0 = grid.x[0];
    (0..grid.nt())
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = &values[i * nx..(i + 1) * nx];
            let ident = map.is_identity(i);
            let m = map.factor[i];
            (0..nx).map(move |j| {
                if ident {
                    row[j]
                } else {
                    let p = if to_x { grid.x[j] / m } else { grid.x[j] * m };
                    lagrange4_uniform(row, x0, grid.dx, p)
                }
            })
        })
        .collect()
}

/// Transpose-free column integration: `out[i, j] = int_{t_start}^{t_i} f[., j]`.
fn integrate_columns(grid: &Grid, f: &[C64], start: usize) -> Vec<C64> {
    let (nt, nx) = (grid.nt(), grid.nx());
    let cols: Vec<Vec<C64>> = (0..nx)
        .into_par_iter()
        .map(|j| {
            let col: Vec<C64> = (0..nt).map(|i| f[i * nx + j]).collect();
            cumulative_integral(&col, grid.dt, start)
        })
        .collect();
    let mut out = vec![C64::default(); nt * nx];
    for (j, col) in cols.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            out[i * nx + j] = v;
        }
    }
    out
}

/// `B = int_{t_start}^t (q0 + i r0)` along the straightened flow and `phi_0 = bump(lambda^delta x) e^{-iB}`.
pub fn solve_leading(
    coeffs: &TransportCoefficients,
    grid: &Grid,
    lambda: f64,
    delta: f64,
    bump: Bump,
) -> Result<AmplitudeChain> {
    if coeffs.q0.len() != grid.nt() || coeffs.r0.len() != grid.len() {
        return Err(Error::IncompatibleDiscretizations {
            detail: "coefficients do not match the grid".into(),
        });
    }
    if (bump.eval(0.0) - 1.0).abs() > 0.0 {
        return Err(Error::InvalidInput(
            "bump must equal 1 at the origin".into(),
        ));
    }
    let start = coeffs.start_row;
    let map = straighten_drift(&coeffs.drift, grid.dt, start);
    let r0z = remap(grid, &map, &coeffs.r0, false);
    let nx = grid.nx();
    let integrand: Vec<C64> = (0..grid.len())
        .map(|k| coeffs.q0[k / nx] + C64::new(0.0, r0z[k]))
        .collect();
    let bz = integrate_columns(grid, &integrand, start);
    let b = remap(grid, &map, &bz, true);
    // The profile is evaluated exactly at z = x / m; only the smooth phase integral is interpolated.
    let scale = lambda.powf(delta);
    let mut phi0 = vec![C64::default(); grid.len()];
    for i in 0..grid.nt() {
        for j in 0..nx {
            let k = i * nx + j;
            let env = bump.eval(scale * map.inverse(i, grid.x[j]));
            if env == 0.0 {
                continue;
            }
            let e = C64::new(0.0, -1.0) * b[k];
            if e.re > EXP_LIMIT {
                return Err(Error::TransportBlowUp);
            }
            phi0[k] = e.exp() * env;
        }
    }
    Ok(AmplitudeChain {
        grid: grid.clone(),
        lambda,
        delta,
        rho: 1.0 / 24.0,
        phi: vec![phi0],
        b,
        b_straight: bz,
        chi: vec![1.0; grid.nt()],
        chi_derivative: vec![0.0; grid.nt()],
        straighten: map,
        start_row: start,
        bump,
        cutoff: CutoffStatus::None,
    })
}

/// Per-row spectral `D_x` and `D_x^2` of a grid function.
pub(crate) fn spectral_dx(grid: &Grid, v: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let nx = grid.nx();
    let fft = FftPair::new(nx);
    let k = fft_freq(nx, grid.dx);
    let rows: Vec<(Vec<C64>, Vec<C64>)> = v
        .par_chunks(nx)
        .map(|row| {
            let mut spec = row.to_vec();
            fft.forward(&mut spec);
            let mut d1: Vec<C64> = spec.iter().zip(&k).map(|(s, &kk)| s * kk).collect();
            let mut d2: Vec<C64> = spec.iter().zip(&k).map(|(s, &kk)| s * (kk * kk)).collect();
            fft.inverse(&mut d1);
            fft.inverse(&mut d2);
            (d1, d2)
        })
        .collect();
    let mut d1 = Vec::with_capacity(v.len());
    let mut d2 = Vec::with_capacity(v.len());
    for (a, b) in rows {
        d1.extend(a);
        d2.extend(b);
    }
    (d1, d2)
}

/// `max |D_t phi + a x D_x phi + (q0 + i r0) phi| / max |phi|` over rows at least three steps
/// from either end (sixth-order differences in `t`, spectral `D_x`).
pub fn transport_residual(grid: &Grid, coeffs: &TransportCoefficients, phi: &[C64]) -> f64 {
    let (nt, nx) = (grid.nt(), grid.nx());
    let (dx1, _) = spectral_dx(grid, phi);
    let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if scale == 0.0 {
        return 0.0;
    }
    let worst = (0..nx)
        .into_par_iter()
        .map(|j| {
            let col: Vec<C64> = (0..nt).map(|i| phi[i * nx + j]).collect();
            let dt = derivative_uniform(&col, grid.dt);
            let mut w = 0.0f64;
            for i in 3..nt.saturating_sub(3) {
                let k = i * nx + j;
                let res = dt[i] * C64::new(0.0, -1.0)
                    + dx1[k] * (coeffs.drift[i] * grid.x[j])
                    + (coeffs.q0[i] + C64::new(0.0, coeffs.r0[k])) * phi[k];
                w = w.max(res.norm());
            }
            w
        })
        .reduce(|| 0.0, f64::max);
    worst / scale
}

/// Symbol data for the second-order expansion remainder `E` on the grid.
#[derive(Clone, Debug)]
pub struct ExpansionData {
    /// `d_xi r` and `d_xi^2 r` at `(t, x, xi0 + omega_x)`.
    pub r_xi: Vec<C64>,
    pub r_xixi: Vec<C64>,
    /// `D_x^2 omega = -omega_xx`.
    pub d2_omega: Vec<f64>,
    pub drift: Vec<f64>,
    pub lambda: f64,
}

impl ExpansionData {
    /// Five-point differences of `r` in `xi` (step scaled with the model's fiber rescaling).
    pub fn new(
        model: &SymbolModel,
        phase: &PhaseFunction,
        coeffs: &TransportCoefficients,
    ) -> Result<Self> {
        let grid = &phase.grid;
        let n = grid.len();
        if !model.is_prepared() {
            return Ok(Self {
                r_xi: vec![C64::default(); n],
                r_xixi: vec![C64::default(); n],
                d2_omega: vec![0.0; n],
                drift: coeffs.drift.clone(),
                lambda: phase.lambda,
            });
        }
        let h = match model.scaling {
            Some(s) => 1e-3 * s.lambda.powf(-4.0 * s.epsilon),
            None => 1e-3,
        };
        let nx = grid.nx();
        let pairs: Vec<(C64, C64)> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / nx, k % nx);
                let t = grid.t[i];
                let x = [grid.x[j]];
                let base = model.xi0[0] + phase.omega_x[k];
                let r = |dxi: f64| model.r(t, &x, &[base + dxi]).unwrap_or_default();
                let (m2, m1, z, p1, p2) = (r(-2.0 * h), r(-h), r(0.0), r(h), r(2.0 * h));
                let d1 = (m2 - p2 + (p1 - m1) * 8.0) / (12.0 * h);
                let d2 = (-(m2 + p2) + (m1 + p1) * 16.0 - z * 30.0) / (12.0 * h * h);
                (d1, d2)
            })
            .collect();
        Ok(Self {
            r_xi: pairs.iter().map(|p| p.0).collect(),
            r_xixi: pairs.iter().map(|p| p.1).collect(),
            d2_omega: phase.omega_xx.iter().map(|v| -v).collect(),
            drift: coeffs.drift.clone(),
            lambda: phase.lambda,
        })
    }

    /// `E phi = -(conj r_xi + a x) D_x phi - conj(r_xixi) (lambda^{-1} D_x^2 phi + i phi D_x^2 omega) / 2`.
    pub fn apply(&self, grid: &Grid, phi: &[C64]) -> Vec<C64> {
        let (d1, d2) = spectral_dx(grid, phi);
        let nx = grid.nx();
        let inv = 1.0 / self.lambda;
        // E is a differential operator: keep its output on the support of each input row so that
        // spectral round-off does not leak to the box edges.
        let support: Vec<Option<(usize, usize)>> = phi
            .chunks(nx)
            .map(|row| {
                let a = row.iter().position(|z| *z != C64::default())?;
                let b = row.iter().rposition(|z| *z != C64::default())?;
                Some((a, b))
            })
            .collect();
        (0..phi.len())
            .map(|k| {
                let (i, j) = (k / nx, k % nx);
                match support[i] {
                    Some((a, b)) if j >= a && j <= b => {}
                    _ => return C64::default(),
                }
                let first = (self.r_xi[k].conj() + self.drift[i] * grid.x[j]) * d1[k];
                let second = self.r_xixi[k].conj()
                    * 0.5
                    * (d2[k] * inv + C64::new(0.0, self.d2_omega[k]) * phi[k]);
                -(first + second)
            })
            .collect()
    }
}

/// Append `phi_1..phi_M` solving `L0 phi_k = -lambda^rho E phi_{k-1}` with `phi_k = 0` at the start row.
pub fn solve_corrections(
    chain: &mut AmplitudeChain,
    expansion: &ExpansionData,
    m: usize,
) -> Result<()> {
    if m > 8 {
        return Err(Error::InvalidInput(
            "at most 8 corrections are supported".into(),
        ));
    }
    let grid = chain.grid.clone();
    let gain = chain.lambda.powf(chain.rho);
    for _ in 1..=m {
        let prev = chain.phi.last().expect("leading amplitude present");
        let source: Vec<C64> = expansion
            .apply(&grid, prev)
            .into_iter()
            .map(|v| v * (-gain))
            .collect();
        let sz = remap(&grid, &chain.straighten, &source, false);
        let integrand: Vec<C64> = sz
            .iter()
            .zip(&chain.b_straight)
            .map(|(s, b)| {
                let e = C64::new(0.0, 1.0) * b;
                if e.re > EXP_LIMIT || *s == C64::default() {
                    C64::default()
                } else {
                    C64::new(0.0, 1.0) * e.exp() * s
                }
            })
            .collect();
        let acc = integrate_columns(&grid, &integrand, chain.start_row);
        let phiz: Vec<C64> = acc
            .iter()
            .zip(&chain.b_straight)
            .map(|(a, b)| {
                let e = C64::new(0.0, -1.0) * b;
                if *a == C64::default() || e.re < -EXP_LIMIT {
                    C64::default()
                } else {
                    e.exp() * a
                }
            })
            .collect();
        chain.phi.push(remap(&grid, &chain.straighten, &phiz, true));
    }
    Ok(())
}

/// Locate transitions on both sides of the start row where every amplitude row stays below
/// `lambda^{-n_target}` for a length `max(lambda^{-1/8} / 2, 8 dt)`, build `chi` and apply it.
pub fn apply_time_cutoff(chain: &mut AmplitudeChain, n_target: f64) -> Result<()> {
    let grid = &chain.grid;
    let (nt, nx) = (grid.nt(), grid.nx());
    let env: Vec<f64> = (0..nt)
        .map(|i| {
            chain.phi[0][i * nx..(i + 1) * nx]
                .iter()
                .fold(0.0f64, |m, v| m.max(v.norm()))
        })
        .collect();
    let thr = chain.lambda.powf(-n_target);
    let len = (0.5 * chain.lambda.powf(-0.125)).max(8.0 * grid.dt);
    let steps = (len / grid.dt).ceil() as usize;
    let margin = 4usize;
    let start = chain.start_row;
    let right =
        (start..nt).find(|&r| r + steps + margin < nt && (r..=r + steps).all(|i| env[i] <= thr));
    let left = (0..=start)
        .rev()
        .find(|&r| r >= steps + margin && (r - steps..=r).all(|i| env[i] <= thr));
    let (l, r) = match (left, right) {
        (Some(l), Some(r)) => (l, r),
        _ => {
            return Err(Error::DivergenceTooWeak {
                detail: format!(
                    "no interval of length {len:.3e} with amplitude below lambda^-{n_target} on both sides of t = {:.4}",
                    grid.t[start]
                ),
            })
        }
    };
    let (tl, tr) = (grid.t[l], grid.t[r]);
    for i in 0..nt {
        let t = grid.t[i];
        let (c, dc) = if t >= tr {
            let s = (t - tr) / len;
            (1.0 - smooth_step(s), -smooth_step_derivative(s) / len)
        } else if t <= tl {
            let s = (tl - t) / len;
            (1.0 - smooth_step(s), smooth_step_derivative(s) / len)
        } else {
            (1.0, 0.0)
        };
        chain.chi[i] = c;
        chain.chi_derivative[i] = dc;
    }
    chain.cutoff = CutoffStatus::Triggered {
        left: (tl - len, tl),
        right: (tr, tr + len),
    };
    multiply_chi(chain);
    Ok(())
}

/// Window equal to one on the central `fraction` of the time range, with smooth transitions to
/// zero at the ends.
pub fn apply_fixed_window(chain: &mut AmplitudeChain, fraction: f64) {
    let grid = &chain.grid;
    let (t0, t1) = (grid.t[0], grid.t[grid.nt() - 1]);
    let w = 0.5 * (1.0 - fraction) * (t1 - t0);
    for (i, &t) in grid.t.iter().enumerate() {
        let (c, dc) = if t - t0 < w {
            let s = (t - t0) / w;
            (smooth_step(s), smooth_step_derivative(s) / w)
        } else if t1 - t < w {
            let s = (t1 - t) / w;
            (smooth_step(s), -smooth_step_derivative(s) / w)
        } else {
            (1.0, 0.0)
        };
        chain.chi[i] = c;
        chain.chi_derivative[i] = dc;
    }
    chain.cutoff = CutoffStatus::Fixed { fraction };
    multiply_chi(chain);
}

fn multiply_chi(chain: &mut AmplitudeChain) {
    let nx = chain.grid.nx();
    for phi in chain.phi.iter_mut() {
        for (i, row) in phi.chunks_mut(nx).enumerate() {
            let c = chain.chi[i];
            row.iter_mut().for_each(|v| *v *= c);
        }
    }
}

impl AmplitudeChain {
    /// Write `t, x1, k, re_phi, im_phi` for every `stride`-th row and nonzero entries.
    pub fn write_csv<W: Write>(&self, out: W, stride: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x1", "k", "re_phi", "im_phi"])
            .map_err(|e| Error::Io(e.to_string()))?;
        let nx = self.grid.nx();
        for i in (0..self.grid.nt()).step_by(stride.max(1)) {
            for j in 0..nx {
                for (k, phi) in self.phi.iter().enumerate() {
                    let v = phi[i * nx + j];
                    if v != C64::default() {
                        w.write_record([
                            format!("{:.12e}", self.grid.t[i]),
                            format!("{:.12e}", self.grid.x[j]),
                            k.to_string(),
                            format!("{:.12e}", v.re),
                            format!("{:.12e}", v.im),
                        ])
                        .map_err(|e| Error::Io(e.to_string()))?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
