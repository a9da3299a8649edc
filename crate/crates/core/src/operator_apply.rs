//! The prepared operator `Q = D_t - Op[lambda conj(r)(t, x, xi / lambda)] + q0(t)` on quasimode
//! envelopes, the conic cutoff `A`, and the solvability ratio.

use crate::eikonal::PhaseFunction;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numerics::{derivative_uniform, fft_freq, smooth_step, FftPair, C64};
use crate::quasimode::{sobolev_norm, sobolev_norm_against, Quasimode};
use crate::symbol_core::SymbolModel;
use crate::transport::spectral_dx;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Spectral `D_t` and Kohn–Nirenberg multipliers blended over Chebyshev nodes in `x`.
    #[default]
    FftQuantization,
    /// Second-order-and-beyond expansion of the conjugated operator on the amplitude.
    OscillatoryExpansion,
}

#[derive(Clone, Debug)]
pub struct PreparedOperator {
    pub model: SymbolModel,
    pub method: Method,
    /// Expansion order for [`Method::OscillatoryExpansion`] (at most 4).
    pub order: usize,
    /// Number of Chebyshev nodes of the separable approximation in `x`.
    pub j_sep: usize,
    /// Zeroth-order term per time row.
    pub q0: Vec<C64>,
    /// Quantize `conj(r)` (the default) or `r`.
    pub conjugate_symbol: bool,
}

impl PreparedOperator {
    pub fn new(model: SymbolModel, method: Method, q0: Vec<C64>) -> Result<Self> {
        Ok(Self {
            model,
            method,
            order: 2,
            j_sep: 8,
            q0,
            conjugate_symbol: true,
        })
    }

    /// Formal adjoint: the other conjugation of the symbol and `conj(q0)`.
    pub fn formal_adjoint(&self) -> Self {
        Self {
            q0: self.q0.iter().map(|q| q.conj()).collect(),
            conjugate_symbol: !self.conjugate_symbol,
            ..self.clone()
        }
    }

    fn symbol(&self, t: f64, x: f64, xi: f64) -> C64 {
        let r = self.model.r(t, &[x], &[xi]).unwrap_or_default();
        if self.conjugate_symbol {
            r.conj()
        } else {
            r
        }
    }
}

fn check_time_ends(grid: &Grid, v: &[C64]) -> Result<()> {
    let nx = grid.nx();
    let max = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if max == 0.0 {
        return Ok(());
    }
    let nt = grid.nt();
    let ends = [&v[..nx], &v[(nt - 1) * nx..]];
    let edge = ends
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, z| m.max(z.norm()));
    if edge > 1e-10 * max {
        return Err(Error::PeriodizationAliasing { ratio: edge / max });
    }
    Ok(())
}

/// Spectral `D_t` of a grid function (periodic in `t`).
fn spectral_dt(grid: &Grid, v: &[C64]) -> Vec<C64> {
    let (nt, nx) = (grid.nt(), grid.nx());
    let fft = FftPair::new(nt);
    let tau = fft_freq(nt, grid.dt);
    let cols: Vec<Vec<C64>> = (0..nx)
        .into_par_iter()
        .map(|j| {
            let mut col: Vec<C64> = (0..nt).map(|i| v[i * nx + j]).collect();
            if col.iter().all(|z| *z == C64::default()) {
                return col;
            }
            fft.forward(&mut col);
            col.iter_mut().zip(&tau).for_each(|(c, &w)| *c *= w);
            fft.inverse(&mut col);
            col
        })
        .collect();
    let mut out = vec![C64::default(); v.len()];
    for (j, col) in cols.into_iter().enumerate() {
        for (i, z) in col.into_iter().enumerate() {
            out[i * nx + j] = z;
        }
    }
    out
}

fn chebyshev_nodes(a: f64, b: f64, j: usize) -> Vec<f64> {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    (0..j)
        .map(|m| mid + half * (std::f64::consts::PI * (2 * m + 1) as f64 / (2 * j) as f64).cos())
        .collect()
}

/// Lagrange basis values at `x` for the given nodes (barycentric form).
fn lagrange_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    if let Some(m) = nodes.iter().position(|&v| v == x) {
        let mut w = vec![0.0; n];
        w[m] = 1.0;
        return w;
    }
    let bary: Vec<f64> = (0..n)
        .map(|m| {
            1.0 / (0..n)
                .filter(|&l| l != m)
                .map(|l| nodes[m] - nodes[l])
                .product::<f64>()
        })
        .collect();
    let terms: Vec<f64> = (0..n).map(|m| bary[m] / (x - nodes[m])).collect();
    let total: f64 = terms.iter().sum();
    terms.iter().map(|t| t / total).collect()
}

fn row_support(row: &[C64], margin: usize) -> Option<(usize, usize)> {
    let first = row.iter().position(|z| *z != C64::default())?;
    let last = row.iter().rposition(|z| *z != C64::default())?;
    Some((
        first.saturating_sub(margin),
        (last + margin).min(row.len() - 1),
    ))
}

/// `e^{-i lambda xi0 x} Q u` for the quasimode envelope. The expansion method needs the phase.
pub fn apply_operator(
    op: &PreparedOperator,
    u: &Quasimode,
    phase: Option<&PhaseFunction>,
) -> Result<Vec<C64>> {
    let grid = &u.grid;
    if op.q0.len() != grid.nt() {
        return Err(Error::IncompatibleDiscretizations {
            detail: "q0 does not match the time grid".into(),
        });
    }
    check_time_ends(grid, &u.envelope)?;
    match op.method {
        Method::FftQuantization => apply_fft(op, u),
        Method::OscillatoryExpansion => {
            let phase = phase.ok_or_else(|| {
                Error::InvalidInput("the expansion method needs the phase".into())
            })?;
            phase.grid.compatible(grid)?;
            apply_expansion(op, u, phase)
        }
    }
}

fn apply_fft(op: &PreparedOperator, u: &Quasimode) -> Result<Vec<C64>> {
    let grid = &u.grid;
    let (nx, lambda) = (grid.nx(), u.lambda);
    let mut out = spectral_dt(grid, &u.envelope);
    if op.model.is_prepared() {
        let fft = FftPair::new(nx);
        let k = fft_freq(nx, grid.dx);
        let xi0 = u.xi0;
        let j_sep = op.j_sep.max(1);
        let rows: Vec<Result<Option<(usize, usize, Vec<C64>)>>> = (0..grid.nt())
            .into_par_iter()
            .map(|i| {
                let row = &u.envelope[i * nx..(i + 1) * nx];
                let Some((ja, jb)) = row_support(row, 8) else {
                    return Ok(None);
                };
                let t = grid.t[i];
                let nodes = chebyshev_nodes(grid.x[ja], grid.x[jb], j_sep);
                let sym = |x: f64, kk: f64| op.symbol(t, x, xi0 + kk / lambda) * lambda;
                let mults: Vec<Vec<C64>> = nodes
                    .iter()
                    .map(|&xm| k.iter().map(|&kk| sym(xm, kk)).collect())
                    .collect();
                let uniform = mults.iter().all(|m| {
                    m.iter()
                        .zip(&mults[0])
                        .all(|(a, b)| (a - b).norm() <= 1e-14 * (1.0 + b.norm()))
                });
                let mut spec = row.to_vec();
                fft.forward(&mut spec);
                let mut acc = vec![C64::default(); jb - ja + 1];
                if uniform {
                    let mut w: Vec<C64> = spec.iter().zip(&mults[0]).map(|(s, m)| s * m).collect();
                    fft.inverse(&mut w);
                    acc.copy_from_slice(&w[ja..=jb]);
                } else {
                    if i % 16 == 0 {
                        check_separable(&spec, &k, &nodes, &mults, &sym, grid.x[ja], grid.x[jb])?;
                    }
                    for (m, mult) in mults.iter().enumerate() {
                        let mut w: Vec<C64> = spec.iter().zip(mult).map(|(s, mm)| s * mm).collect();
                        fft.inverse(&mut w);
                        for (idx, j) in (ja..=jb).enumerate() {
                            let lw = lagrange_weights(&nodes, grid.x[j]);
                            acc[idx] += w[j] * lw[m];
                        }
                    }
                }
                Ok(Some((i, ja, acc)))
            })
            .collect();
        for r in rows {
            if let Some((i, ja, acc)) = r? {
                for (idx, v) in acc.into_iter().enumerate() {
                    out[i * nx + ja + idx] -= v;
                }
            }
        }
    }
    for (i, row) in out.chunks_mut(nx).enumerate() {
        let q = op.q0[i];
        let src = &u.envelope[i * nx..(i + 1) * nx];
        row.iter_mut().zip(src).for_each(|(o, v)| *o += q * v);
    }
    Ok(out)
}

fn check_separable(
    spec: &[C64],
    k: &[f64],
    nodes: &[f64],
    mults: &[Vec<C64>],
    sym: &dyn Fn(f64, f64) -> C64,
    a: f64,
    b: f64,
) -> Result<()> {
    let peak = spec.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let active: Vec<usize> = (0..k.len())
        .filter(|&q| spec[q].norm() > 1e-12 * peak)
        .step_by(4)
        .collect();
    let scale = active
        .iter()
        .flat_map(|&q| mults.iter().map(move |m| m[q].norm()))
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Ok(());
    }
    let mut worst = 0.0f64;
    for p in 0..17 {
        let x = a + (b - a) * (p as f64 + 0.5) / 17.0;
        let lw = lagrange_weights(nodes, x);
        for &q in &active {
            let approx: C64 = mults.iter().zip(&lw).map(|(m, w)| m[q] * *w).sum();
            worst = worst.max((approx - sym(x, k[q])).norm());
        }
    }
    if worst > 1e-8 * scale {
        return Err(Error::QuantizationRank {
            residual: worst / scale,
        });
    }
    Ok(())
}

/// Derivatives `d_xi^a r` for `a = 0..=4` by central differences.
fn xi_derivatives(op: &PreparedOperator, t: f64, x: f64, xi: f64, h: f64) -> [C64; 5] {
    let f = |d: f64| op.symbol(t, x, xi + d);
    let (m2, m1, z, p1, p2) = (f(-2.0 * h), f(-h), f(0.0), f(h), f(2.0 * h));
    [
        z,
        (m2 - p2 + (p1 - m1) * 8.0) / (12.0 * h),
        (-(m2 + p2) + (m1 + p1) * 16.0 - z * 30.0) / (12.0 * h * h),
        (p2 - p1 * 2.0 + m1 * 2.0 - m2) / (2.0 * h * h * h),
        (p2 - p1 * 4.0 + z * 6.0 - m1 * 4.0 + m2) / (h * h * h * h),
    ]
}

fn apply_expansion(
    op: &PreparedOperator,
    u: &Quasimode,
    phase: &PhaseFunction,
) -> Result<Vec<C64>> {
    if op.order > 4 {
        return Err(Error::InvalidInput(
            "expansion order is limited to 4".into(),
        ));
    }
    let grid = &u.grid;
    let (nx, lambda) = (grid.nx(), u.lambda);
    let amp: Vec<C64> = u
        .envelope
        .iter()
        .zip(&phase.omega)
        .map(|(v, w)| {
            if *v == C64::default() {
                *v
            } else {
                v * C64::from_polar(1.0, -lambda * w)
            }
        })
        .collect();
    let dt_amp = spectral_dt(grid, &amp);
    // D_x^b of the amplitude for b = 0..=4 (D = -i d/dx)
    let (d1, d2) = spectral_dx(grid, &amp);
    let (d3, d4) = spectral_dx(grid, &d2);
    let dx_pows = [&amp, &d1, &d2, &d3, &d4];
    let w3: Vec<f64> = phase
        .omega_xx
        .chunks(nx)
        .flat_map(|r| derivative_uniform(r, grid.dx))
        .collect();
    let w4: Vec<f64> = w3
        .chunks(nx)
        .flat_map(|r| derivative_uniform(r, grid.dx))
        .collect();
    let h = match op.model.scaling {
        Some(s) => 1e-2 * s.lambda.powf(-4.0 * s.epsilon),
        None => 1e-2,
    };
    let binom = |a: usize, b: usize| -> f64 {
        (1..=b).fold(1.0, |acc, i| acc * (a + 1 - i) as f64 / i as f64)
    };
    let fact = [1.0, 1.0, 2.0, 6.0, 24.0];
    let prepared = op.model.is_prepared();
    let out: Vec<C64> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let a0 = amp[p];
            let (i, j) = (p / nx, p % nx);
            let mut acc = dt_amp[p] + op.q0[i] * a0;
            if prepared && (0..5).any(|b| *dx_pows[b].get(p).unwrap() != C64::default()) {
                let t = grid.t[i];
                let x = grid.x[j];
                let s = xi_derivatives(op, t, x, u.xi0 + phase.omega_x[p], h);
                let il = C64::new(0.0, lambda);
                // derivatives of exp(i lambda (omega(y) - omega(x) - omega'(x)(y - x))) at y = x
                let g = [
                    C64::new(1.0, 0.0),
                    C64::default(),
                    il * phase.omega_xx[p],
                    il * w3[p],
                    il * w4[p] + (il * phase.omega_xx[p]).powi(2) * 3.0,
                ];
                // d^b amp = i^b D^b amp
                let ipow = [
                    C64::new(1.0, 0.0),
                    C64::new(0.0, 1.0),
                    C64::new(-1.0, 0.0),
                    C64::new(0.0, -1.0),
                    C64::new(1.0, 0.0),
                ];
                acc += (phase.omega_t[p] - s[0]) * lambda * a0;
                for alpha in 1..=op.order {
                    let mut deriv = C64::default();
                    for beta in 0..=alpha {
                        deriv += g[beta]
                            * ipow[alpha - beta]
                            * dx_pows[alpha - beta][p]
                            * binom(alpha, beta);
                    }
                    let r_alpha = ipow[(4 - alpha % 4) % 4] * deriv;
                    acc -= s[alpha] * r_alpha * (lambda.powi(1 - alpha as i32) / fact[alpha]);
                }
            }
            if acc == C64::default() {
                return acc;
            }
            C64::from_polar(1.0, lambda * phase.omega[p]) * acc
        })
        .collect();
    Ok(out)
}

/// Fourier multiplier vanishing on the cone of half-angle `theta0 = factor lambda^{-epsilon}`
/// around `(0, xi0)` in `(tau, xi)` and equal to one outside twice that angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeCutoff {
    pub lambda: f64,
    pub epsilon: f64,
    pub factor: f64,
    pub xi0: f64,
}

impl ConeCutoff {
    pub fn half_angle(&self) -> f64 {
        self.factor * self.lambda.powf(-self.epsilon)
    }

    pub fn symbol(&self, tau: f64, xi: f64) -> f64 {
        let r = tau.hypot(xi);
        if r == 0.0 {
            return 1.0;
        }
        let theta = (xi * self.xi0 / r).clamp(-1.0, 1.0).acos();
        let th0 = self.half_angle();
        smooth_step((theta - th0) / th0)
    }

    fn spectrum(&self, grid: &Grid, v: &[C64]) -> Vec<C64> {
        let (nt, nx) = (grid.nt(), grid.nx());
        let fx = FftPair::new(nx);
        let ft = FftPair::new(nt);
        let mut data = v.to_vec();
        data.par_chunks_mut(nx).for_each(|row| fx.forward(row));
        let cols: Vec<Vec<C64>> = (0..nx)
            .into_par_iter()
            .map(|j| {
                let mut col: Vec<C64> = (0..nt).map(|i| data[i * nx + j]).collect();
                ft.forward(&mut col);
                col
            })
            .collect();
        for (j, col) in cols.into_iter().enumerate() {
            for (i, z) in col.into_iter().enumerate() {
                data[i * nx + j] = z;
            }
        }
        data
    }

    /// `||A u||_0` of the full function `e^{i lambda xi0 x} v`, by Parseval.
    pub fn norm(&self, grid: &Grid, v: &[C64]) -> f64 {
        let (nt, nx) = (grid.nt(), grid.nx());
        let spec = self.spectrum(grid, v);
        let tau = fft_freq(nt, grid.dt);
        let k = fft_freq(nx, grid.dx);
        let carrier = self.lambda * self.xi0;
        let rows: Vec<f64> = (0..nt)
            .into_par_iter()
            .map(|i| {
                (0..nx)
                    .map(|j| {
                        spec[i * nx + j].norm_sqr() * self.symbol(tau[i], carrier + k[j]).powi(2)
                    })
                    .sum::<f64>()
            })
            .collect();
        let total: f64 = rows.iter().sum();
        (total * grid.dt * grid.dx / (nt * nx) as f64).sqrt()
    }

    /// Envelope of `A u`.
    pub fn apply(&self, grid: &Grid, v: &[C64]) -> Vec<C64> {
        let (nt, nx) = (grid.nt(), grid.nx());
        let mut spec = self.spectrum(grid, v);
        let tau = fft_freq(nt, grid.dt);
        let k = fft_freq(nx, grid.dx);
        let carrier = self.lambda * self.xi0;
        for i in 0..nt {
            for j in 0..nx {
                spec[i * nx + j] *= self.symbol(tau[i], carrier + k[j]);
            }
        }
        let fx = FftPair::new(nx);
        let ft = FftPair::new(nt);
        let cols: Vec<Vec<C64>> = (0..nx)
            .into_par_iter()
            .map(|j| {
                let mut col: Vec<C64> = (0..nt).map(|i| spec[i * nx + j]).collect();
                ft.inverse(&mut col);
                col
            })
            .collect();
        for (j, col) in cols.into_iter().enumerate() {
            for (i, z) in col.into_iter().enumerate() {
                spec[i * nx + j] = z;
            }
        }
        spec.par_chunks_mut(nx).for_each(|row| fx.inverse(row));
        spec
    }
}

/// Terms of the solvability estimate for one quasimode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub lambda: f64,
    /// The order `N` of the negative norm.
    pub order: f64,
    pub nu: f64,
    pub norm_minus_n: f64,
    pub residual_nu: f64,
    pub norm_minus_n_minus_dim: f64,
    pub cutoff_norm: f64,
    pub ratio: f64,
}

/// `||u||_(-N) / (||Q u||_(nu) + ||u||_(-N-n) + ||A u||_(0))`.
pub fn solvability_ratio(
    op: &PreparedOperator,
    u: &Quasimode,
    phase: Option<&PhaseFunction>,
    order: f64,
    nu: f64,
    cut: &ConeCutoff,
) -> Result<NormReport> {
    if !(order >= 0.0) || !(0.0..=2.0).contains(&nu) {
        return Err(Error::InvalidInput(format!(
            "need N >= 0 and 0 <= nu <= 2 (got N={order}, nu={nu})"
        )));
    }
    let n = op.model.n as f64;
    let qu = apply_operator(op, u, phase)?;
    let scale = u.envelope.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let residual_nu = sobolev_norm_against(&u.grid, &qu, u.lambda * u.xi0, nu, scale)?;
    let norm_minus_n = sobolev_norm(u, -order)?;
    let norm_minus_n_minus_dim = sobolev_norm(u, -order - n)?;
    let cutoff_norm = cut.norm(&u.grid, &u.envelope);
    let denom = residual_nu + norm_minus_n_minus_dim + cutoff_norm;
    if !(denom > 0.0) || !(norm_minus_n > 0.0) {
        return Err(Error::DegenerateReport);
    }
    Ok(NormReport {
        lambda: u.lambda,
        order,
        nu,
        norm_minus_n,
        residual_nu,
        norm_minus_n_minus_dim,
        cutoff_norm,
        ratio: norm_minus_n / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quasimode::Exponents;
    use std::f64::consts::PI;

    const LAMBDA: f64 = 64.0;

    fn test_grid() -> Grid {
        Grid::new(0.0, 1.0, 128, 8.0 / 256.0, 256).unwrap()
    }

    fn profile_t(t: f64) -> (f64, f64) {
        let s = (t - 0.5) / 0.08;
        let g = (-s * s).exp();
        (g, -2.0 * s / 0.08 * g)
    }

    fn profile_x(x: f64) -> (f64, f64) {
        let g = (-4.0 * x * x).exp();
        (g, -8.0 * x * g)
    }

    fn mode(grid: &Grid, f: impl Fn(f64, f64) -> C64) -> Quasimode {
        let mut env = vec![C64::default(); grid.len()];
        for i in 0..grid.nt() {
            for j in 0..grid.nx() {
                env[grid.idx(i, j)] = f(grid.t[i], grid.x[j]);
            }
        }
        Quasimode {
            grid: grid.clone(),
            envelope: env,
            lambda: LAMBDA,
            exponents: Exponents::default(),
            xi0: 1.0,
            corrections: 0,
            prefactor: 1.0,
        }
    }

    fn separable(grid: &Grid) -> Quasimode {
        mode(grid, |t, x| C64::new(profile_t(t).0 * profile_x(x).0, 0.0))
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (p, q)| m.max((p - q).norm()))
    }

    #[test]
    fn time_derivative_matches_product_rule() {
        let grid = test_grid();
        let u = separable(&grid);
        let op = PreparedOperator::new(
            SymbolModel::prepared_fn(2, |_, _, _| C64::default()),
            Method::FftQuantization,
            vec![C64::default(); grid.nt()],
        )
        .unwrap();
        let qu = apply_operator(&op, &u, None).unwrap();
        let expected: Vec<C64> = (0..grid.len())
            .map(|p| {
                let (i, j) = (p / grid.nx(), p % grid.nx());
                C64::new(0.0, -profile_t(grid.t[i]).1 * profile_x(grid.x[j]).0)
            })
            .collect();
        assert!(
            max_diff(&qu, &expected) < 1e-8,
            "{}",
            max_diff(&qu, &expected)
        );
    }

    #[test]
    fn first_order_symbol_agrees_across_methods() {
        let grid = test_grid();
        let u = separable(&grid);
        let coef = |x: f64| 1.0 + 0.1 * x * x;
        let model = SymbolModel::prepared_fn(2, move |_, x, xi| C64::new(coef(x[0]) * xi[0], 0.0));
        let q0 = vec![C64::new(0.2, -0.1); grid.nt()];
        let mut op = PreparedOperator::new(model, Method::FftQuantization, q0.clone()).unwrap();
        let by_fft = apply_operator(&op, &u, None).unwrap();
        op.method = Method::OscillatoryExpansion;
        op.order = 1;
        let phase = PhaseFunction::zero(&grid, LAMBDA, 0.125);
        let by_expansion = apply_operator(&op, &u, Some(&phase)).unwrap();
        let expected: Vec<C64> = (0..grid.len())
            .map(|p| {
                let (i, j) = (p / grid.nx(), p % grid.nx());
                let (t, x) = (grid.t[i], grid.x[j]);
                let (gt, dgt) = profile_t(t);
                let (hx, dhx) = profile_x(x);
                let dt = C64::new(0.0, -dgt * hx);
                let op_part = coef(x) * (LAMBDA * gt * hx + C64::new(0.0, -gt * dhx));
                dt - op_part + q0[i] * gt * hx
            })
            .collect();
        let scale = expected.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(
            max_diff(&by_fft, &expected) < 1e-8 * scale,
            "{}",
            max_diff(&by_fft, &expected) / scale
        );
        assert!(
            max_diff(&by_expansion, &expected) < 1e-8 * scale,
            "{}",
            max_diff(&by_expansion, &expected) / scale
        );
    }

    fn complex_multiplier_op(grid: &Grid) -> PreparedOperator {
        let model =
            SymbolModel::prepared_fn(2, |t, _, xi| C64::new(xi[0], 0.3 * t * xi[0] * xi[0]));
        let q0 = (0..grid.nt()).map(|i| C64::new(0.1, grid.t[i])).collect();
        PreparedOperator::new(model, Method::FftQuantization, q0).unwrap()
    }

    #[test]
    fn operator_is_linear() {
        let grid = test_grid();
        let op = complex_multiplier_op(&grid);
        let u1 = separable(&grid);
        let u2 = mode(&grid, |t, x| {
            C64::new(0.0, profile_t(t).0 * (x * profile_x(x).0))
        });
        let (a, b) = (C64::new(0.7, -1.2), C64::new(-0.4, 0.3));
        let combo = u1.with_envelope(
            u1.envelope
                .iter()
                .zip(&u2.envelope)
                .map(|(p, q)| a * p + b * q)
                .collect(),
        );
        let lhs = apply_operator(&op, &combo, None).unwrap();
        let q1 = apply_operator(&op, &u1, None).unwrap();
        let q2 = apply_operator(&op, &u2, None).unwrap();
        let rhs: Vec<C64> = q1.iter().zip(&q2).map(|(p, q)| a * p + b * q).collect();
        assert!(max_diff(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn formal_adjoint_spot_check() {
        let grid = test_grid();
        let op = complex_multiplier_op(&grid);
        let adj = op.formal_adjoint();
        let u = separable(&grid);
        let w = mode(&grid, |t, x| {
            C64::new(
                profile_t(t).0 * profile_x(x - 0.3).0,
                0.5 * profile_t(t).0 * profile_x(x + 0.2).0,
            )
        });
        let inner = |a: &[C64], b: &[C64]| -> C64 {
            a.iter().zip(b).map(|(p, q)| p * q.conj()).sum::<C64>()
        };
        let lhs = inner(&apply_operator(&op, &u, None).unwrap(), &w.envelope);
        let rhs = inner(&u.envelope, &apply_operator(&adj, &w, None).unwrap());
        assert!((lhs - rhs).norm() < 1e-8 * lhs.norm(), "{lhs} vs {rhs}");
    }

    #[test]
    fn rejects_mode_not_vanishing_in_time() {
        let grid = test_grid();
        let op = complex_multiplier_op(&grid);
        let u = mode(&grid, |_, x| C64::new(profile_x(x).0, 0.0));
        assert!(matches!(
            apply_operator(&op, &u, None),
            Err(Error::PeriodizationAliasing { .. })
        ));
    }

    #[test]
    fn strongly_x_dependent_symbol_fails_rank_check() {
        let grid = test_grid();
        let u = separable(&grid);
        let model =
            SymbolModel::prepared_fn(2, |_, x, xi| C64::new((40.0 * x[0]).sin() * xi[0], 0.0));
        let mut op = PreparedOperator::new(
            model,
            Method::FftQuantization,
            vec![C64::default(); grid.nt()],
        )
        .unwrap();
        op.j_sep = 4;
        assert!(matches!(
            apply_operator(&op, &u, None),
            Err(Error::QuantizationRank { .. })
        ));
    }

    fn cone_grid(lambda: f64, tau: f64) -> Grid {
        // three periods of tau over sixteen samples
        let dt = 2.0 * PI * 3.0 / (16.0 * tau);
        Grid::new(0.0, 15.0 * dt, 16, 0.25, 16).unwrap_or_else(|_| panic!("grid for {lambda}"))
    }

    #[test]
    fn cone_cutoff_kills_fiber_mode_and_keeps_tilted_mode() {
        let lambda = 2f64.powi(16);
        let cut = ConeCutoff {
            lambda,
            epsilon: 0.125,
            factor: 1.0,
            xi0: 1.0,
        };
        let tau = 3.0 * lambda.powf(-0.125) * lambda;
        let grid = cone_grid(lambda, tau);
        let area = 16.0 * grid.dt * 16.0 * grid.dx;
        let flat = vec![C64::new(1.0, 0.0); grid.len()];
        assert!(cut.norm(&grid, &flat) < 1e-10 * area.sqrt());
        let tilted: Vec<C64> = (0..grid.len())
            .map(|p| C64::from_polar(1.0, tau * grid.t[p / grid.nx()]))
            .collect();
        let n = cut.norm(&grid, &tilted);
        assert!(
            (n - area.sqrt()).abs() < 1e-10 * area.sqrt(),
            "{n} vs {}",
            area.sqrt()
        );
        let applied = cut.apply(&grid, &tilted);
        assert!(max_diff(&applied, &tilted) < 1e-10);
    }

    #[test]
    fn ratio_rejects_bad_orders() {
        let grid = test_grid();
        let op = complex_multiplier_op(&grid);
        let u = separable(&grid);
        let cut = ConeCutoff {
            lambda: LAMBDA,
            epsilon: 0.125,
            factor: 1.5,
            xi0: 1.0,
        };
        assert!(solvability_ratio(&op, &u, None, 0.0, 3.0, &cut).is_err());
        let rep = solvability_ratio(&op, &u, None, 1.0, 0.0, &cut).unwrap();
        assert!(rep.ratio > 0.0 && rep.ratio.is_finite());
    }
}
