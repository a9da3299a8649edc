use super::trace::Semibicharacteristic;
use crate::error::{Error, Result};
use crate::symbol_core::{eval_jet, PhasePoint, SymbolModel, Which};
use nalgebra::DMatrix;

/// Symmetric matrices `A(t)` on a time grid describing `{(s, y; 0, A(t) y)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangeanPath {
    pub times: Vec<f64>,
    pub mats: Vec<DMatrix<f64>>,
}

impl LagrangeanPath {
    /// A time-independent plane on `[t0, t1]`.
    pub fn constant(t0: f64, t1: f64, a: DMatrix<f64>) -> Self {
        Self {
            times: vec![t0, t1],
            mats: vec![a.clone(), a],
        }
    }

    /// Linear interpolation in time; `None` outside the covered interval.
    pub fn at(&self, t: f64) -> Option<DMatrix<f64>> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] - 1e-12 || t > self.times[n - 1] + 1e-12 {
            return None;
        }
        if n == 1 {
            return Some(self.mats[0].clone());
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, n - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let th = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        Some(&self.mats[k - 1] * (1.0 - th) + &self.mats[k] * th)
    }
}

/// Second derivatives of `re r` at `(t, 0, xi0)`: `(d_x^2, d_x d_xi, d_xi^2)`, where row `i` of
/// the mixed block is `x_i` and column `j` is `xi_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct RiccatiCoefficients {
    pub rxx: DMatrix<f64>,
    pub rxxi: DMatrix<f64>,
    pub rxixi: DMatrix<f64>,
}

impl RiccatiCoefficients {
    pub fn from_model(model: &SymbolModel, t: f64) -> Result<Self> {
        if !model.is_prepared() {
            return Err(Error::InvalidInput(format!(
                "model '{}' is not in prepared form",
                model.id
            )));
        }
        let n = model.n;
        let d = n - 1;
        let w = PhasePoint::new(t, vec![0.0; d], 0.0, model.xi0.clone())?;
        let jet = eval_jet(model, &w, 2, Which::Principal)?;
        // p = tau - r, so Hess r = -Hess p.
        let h = |i: usize, j: usize| -jet.hess_at(i, j).re;
        Ok(Self {
            rxx: DMatrix::from_fn(d, d, |i, j| h(1 + i, 1 + j)),
            rxxi: DMatrix::from_fn(d, d, |i, j| h(1 + i, n + 1 + j)),
            rxixi: DMatrix::from_fn(d, d, |i, j| h(n + 1 + i, n + 1 + j)),
        })
    }

    fn rhs(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        &self.rxx + &self.rxxi * a + a * self.rxxi.transpose() + a * &self.rxixi * a
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiccatiOptions {
    pub step: f64,
    /// Blow-up threshold: halt once `|A| > 1 / tol`.
    pub tol: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            tol: 1e-8,
        }
    }
}

/// Integrate `A' = R_xx + R_xxi A + A R_xxi^T + A R_xixi A` from `anchor` (where `A = a0`)
/// outward to both ends of `[t0, t1]`. On blow-up the path computed so far is returned together
/// with the error.
pub fn evolve_riccati<F>(
    coeffs: F,
    t0: f64,
    t1: f64,
    anchor: f64,
    a0: &DMatrix<f64>,
    opts: RiccatiOptions,
) -> (LagrangeanPath, Option<Error>)
where
    F: Fn(f64) -> Result<RiccatiCoefficients>,
{
    let limit = 1.0 / opts.tol;
    let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
    let mut halt: Option<Error> = None;
    let mut run = |end: f64| -> Vec<(f64, DMatrix<f64>)> {
        let span = end - anchor;
        let mut out = Vec::new();
        if span == 0.0 {
            return out;
        }
        let steps = (span.abs() / opts.step).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let f = |s: f64, m: &DMatrix<f64>| coeffs(s).map(|c| c.rhs(m));
        let rk4 = |t: f64, a: &DMatrix<f64>, h: f64| -> Result<DMatrix<f64>> {
            let k1 = f(t, a)?;
            let k2 = f(t + 0.5 * h, &(a + &k1 * (0.5 * h)))?;
            let k3 = f(t + 0.5 * h, &(a + &k2 * (0.5 * h)))?;
            let k4 = f(t + h, &(a + &k3 * h))?;
            Ok((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
        };
        let mut a = a0.clone();
        // compensated summation of the increments keeps round-off below the RK4 truncation error
        let mut carry = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
        'outer: for i in 0..steps {
            let t_start = anchor + i as f64 * h;
            // Substeps shrink so that A changes by at most a quarter of its size per substep;
            // near a pole this tracks the growth instead of jumping across it.
            let t_end = anchor + (i + 1) as f64 * h;
            let (mut t, mut sub) = (t_start, t_end - t_start);
            while t != t_end {
                let rest = t_end - t;
                let last = sub.abs() >= rest.abs();
                sub = if last { rest } else { sub.abs() * h.signum() };
                match rk4(t, &a, sub) {
                    Err(e) => {
                        halt.get_or_insert(e);
                        break 'outer;
                    }
                    Ok(delta) => {
                        let ok = delta.iter().all(|v| v.is_finite());
                        let change = if ok { delta.norm() } else { f64::INFINITY };
                        if change > 0.25 * (1.0 + a.norm()) {
                            if sub.abs() < 1e-14 * (1.0 + t.abs()) {
                                halt.get_or_insert(Error::LagrangeanChartSingularity { t });
                                break 'outer;
                            }
                            sub *= 0.5;
                            continue;
                        }
                        t = if last { t_end } else { t + sub };
                        let y = sym(delta) - &carry;
                        let next = &a + &y;
                        carry = (&next - &a) - y;
                        a = next;
                        if a.norm() > limit {
                            halt.get_or_insert(Error::LagrangeanChartSingularity { t });
                            break 'outer;
                        }
                    }
                }
            }
            out.push((t_end, a.clone()));
        }
        out
    };
    let back = run(t0);
    let fwd = run(t1);
    let mut times = Vec::with_capacity(back.len() + fwd.len() + 1);
    let mut mats = Vec::with_capacity(times.capacity());
    for (t, m) in back.into_iter().rev() {
        times.push(t);
        mats.push(m);
    }
    times.push(anchor);
    mats.push(a0.clone());
    for (t, m) in fwd {
        times.push(t);
        mats.push(m);
    }
    (LagrangeanPath { times, mats }, halt)
}

/// Riccati evolution of the grazing Lagrangean plane over the time span of `curve`, anchored at
/// the curve's first sample.
pub fn evolve_grazing_lagrangean(
    model: &SymbolModel,
    curve: &Semibicharacteristic,
    a0: &DMatrix<f64>,
    opts: RiccatiOptions,
) -> Result<LagrangeanPath> {
    let ts: Vec<f64> = curve.samples.iter().map(|c| c.w.t).collect();
    let (t0, t1) = ts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
            (lo.min(t), hi.max(t))
        });
    let anchor = ts
        .first()
        .copied()
        .ok_or_else(|| Error::InvalidInput("empty curve".into()))?;
    let d = model.n - 1;
    if a0.nrows() != d || a0.ncols() != d {
        return Err(Error::InvalidInput(format!(
            "initial matrix must be {d}x{d}"
        )));
    }
    let (path, halt) = evolve_riccati(
        |t| RiccatiCoefficients::from_model(model, t),
        t0,
        t1,
        anchor,
        a0,
        opts,
    );
    match halt {
        Some(e) => Err(e),
        None => Ok(path),
    }
}
