//! Assembly of `u = exp(i lambda (<x, xi0> + omega)) sum_k lambda^{-k rho} phi_k`, Sobolev norms
//! on the periodized grid and log-log fits over a lambda ladder.

use crate::eikonal::PhaseFunction;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numerics::{fft_freq, least_squares_slope, FftPair, C64};
use crate::transport::AmplitudeChain;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Exponents of the construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub epsilon: f64,
    pub delta: f64,
    pub rho_step: f64,
}

impl Default for Exponents {
    fn default() -> Self {
        Self {
            epsilon: 1.0 / 8.0,
            delta: 5.0 / 12.0,
            rho_step: 1.0 / 24.0,
        }
    }
}

/// Quasimode stored as the envelope `v` with `u = exp(i lambda xi0 x) v`; the carrier is kept
/// analytically so grids only resolve the envelope.
#[derive(Clone, Debug)]
pub struct Quasimode {
    pub grid: Grid,
    pub envelope: Vec<C64>,
    pub lambda: f64,
    pub exponents: Exponents,
    /// Fiber direction (`+1` or `-1` in one spatial dimension).
    pub xi0: f64,
    pub corrections: usize,
    pub prefactor: f64,
}

impl Quasimode {
    /// Full value `u(t_i, x_j)` including the carrier.
    pub fn value(&self, i: usize, j: usize) -> C64 {
        let x = self.grid.x[j];
        C64::from_polar(1.0, self.lambda * self.xi0 * x) * self.envelope[self.grid.idx(i, j)]
    }

    /// Same grid and carrier with a different envelope.
    pub fn with_envelope(&self, envelope: Vec<C64>) -> Self {
        Self {
            envelope,
            ..self.clone()
        }
    }
}

/// `v = prefactor e^{i lambda omega} sum_k lambda^{-k rho} phi_k`; the prefactor is
/// `lambda^{(n-1) delta / 2}` when `normalize` is set and one otherwise.
pub fn assemble_quasimode(
    phase: &PhaseFunction,
    chain: &AmplitudeChain,
    lambda: f64,
    xi0: f64,
    exponents: Exponents,
    normalize: bool,
) -> Result<Quasimode> {
    phase.grid.compatible(&chain.grid)?;
    let prefactor = if normalize {
        lambda.powf(exponents.delta / 2.0)
    } else {
        1.0
    };
    let weights: Vec<f64> = (0..chain.phi.len())
        .map(|k| lambda.powf(-(k as f64) * exponents.rho_step))
        .collect();
    let envelope: Vec<C64> = (0..phase.grid.len())
        .into_par_iter()
        .map(|p| {
            let amp: C64 = chain
                .phi
                .iter()
                .zip(&weights)
                .map(|(phi, w)| phi[p] * *w)
                .sum();
            if amp == C64::default() {
                return amp;
            }
            C64::from_polar(prefactor, lambda * phase.omega[p]) * amp
        })
        .collect();
    Ok(Quasimode {
        grid: phase.grid.clone(),
        envelope,
        lambda,
        exponents,
        xi0,
        corrections: chain.phi.len() - 1,
        prefactor,
    })
}

fn boundary_edge(grid: &Grid, v: &[C64]) -> f64 {
    let nx = grid.nx();
    v.chunks(nx)
        .map(|row| {
            row[0]
                .norm()
                .max(row[1].norm())
                .max(row[nx - 1].norm())
                .max(row[nx - 2].norm())
        })
        .fold(0.0f64, f64::max)
}

fn max_abs(v: &[C64]) -> f64 {
    v.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Largest boundary column magnitude relative to the maximum (periodization check in `x`).
pub fn boundary_ratio(grid: &Grid, v: &[C64]) -> f64 {
    let max = max_abs(v);
    if max == 0.0 {
        return 0.0;
    }
    boundary_edge(grid, v) / max
}

/// `(int sum_xi (1 + |xi|^2)^s |v^(t, xi)|^2 dt)^{1/2}` with `xi = lambda xi0 + k`.
pub fn sobolev_norm_of(grid: &Grid, v: &[C64], carrier: f64, s: f64) -> Result<f64> {
    sobolev_norm_against(grid, v, carrier, s, 0.0)
}

/// As [`sobolev_norm_of`], with the boundary check taken relative to `max(max |v|, scale)`.
/// Residuals use the size of the quasimode as `scale`.
pub fn sobolev_norm_against(
    grid: &Grid,
    v: &[C64],
    carrier: f64,
    s: f64,
    scale: f64,
) -> Result<f64> {
    let reference = max_abs(v).max(scale);
    if reference > 0.0 {
        let ratio = boundary_edge(grid, v) / reference;
        if ratio > 1e-12 {
            return Err(Error::PeriodizationAliasing { ratio });
        }
    }
    let nx = grid.nx();
    let fft = FftPair::new(nx);
    let k = fft_freq(nx, grid.dx);
    let weights: Vec<f64> = k
        .iter()
        .map(|kk| (1.0 + (carrier + kk).powi(2)).powf(s))
        .collect();
    let rows: Vec<f64> = v
        .par_chunks(nx)
        .map(|row| {
            if row.iter().all(|z| *z == C64::default()) {
                return 0.0;
            }
            if s == 0.0 {
                return row.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx;
            }
            let mut spec = row.to_vec();
            fft.forward(&mut spec);
            spec.iter()
                .zip(&weights)
                .map(|(z, w)| z.norm_sqr() * w)
                .sum::<f64>()
                * grid.dx
                / nx as f64
        })
        .collect();
    let total: f64 = rows.iter().sum();
    Ok((total * grid.dt).sqrt())
}

pub fn sobolev_norm(u: &Quasimode, s: f64) -> Result<f64> {
    sobolev_norm_of(&u.grid, &u.envelope, u.lambda * u.xi0, s)
}

/// Least-squares slope of `log norm` against `log lambda`; needs at least four points.
pub fn norm_scaling_fit(lambdas: &[f64], norms: &[f64]) -> Result<f64> {
    if lambdas.len() < 4 || norms.len() != lambdas.len() {
        return Err(Error::InsufficientLadder {
            points: lambdas.len(),
        });
    }
    if norms.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput(
            "norms must be positive for a log-log fit".into(),
        ));
    }
    let x: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    Ok(least_squares_slope(&x, &y))
}

/// Predicted slope window `[-(N + n/2) + (n - 1) delta / 2, -N]` for `||u||_(-N)` when the
/// exponents of the norm estimate add up to one.
pub fn norm_slope_window(n: usize, order: f64, delta: f64) -> (f64, f64) {
    let n = n as f64;
    (-(order + n / 2.0) + (n - 1.0) * delta / 2.0, -order)
}
