//! Model symbols: the fixed catalog plus user-supplied closures.

use super::ad::{Dual2, Scalar};
use super::PhasePoint;
use crate::error::{Error, Result};
use crate::numerics::{poly_eval, C64};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Quantization {
    #[default]
    Weyl,
    KohnNirenberg,
}

/// Closure-backed symbol. Derivatives come from finite differences.
pub type PointFn = Arc<dyn Fn(&PhasePoint) -> C64 + Send + Sync>;
/// Prepared-form `r(t, x, xi)`.
pub type PreparedFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> C64 + Send + Sync>;

#[derive(Clone)]
pub struct CustomSymbol {
    pub principal: PointFn,
    pub subprincipal: PointFn,
    /// When present the principal symbol is `tau - r`.
    pub r: Option<PreparedFn>,
}

impl fmt::Debug for CustomSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomSymbol")
            .field("prepared", &self.r.is_some())
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum ModelKind {
    /// `p = tau - r`, `r = c |xi - xi0|_1^2 / 2`, lower-order term `i g(t)`.
    PtTrivial {
        g: Vec<f64>,
        curvature: f64,
    },
    /// `p = tau + i a(t) xh_1 - (<Ax,x> + 2<Bx,xh> + <C xh,xh>)/2 - cubic x_1^3/6 - i slope x_1`, `xh = xi - xi0`.
    Grazex {
        a: Vec<f64>,
        amat: Vec<Vec<f64>>,
        bmat: Vec<Vec<f64>>,
        cmat: Vec<Vec<f64>>,
        cubic: f64,
        im_slope: f64,
        g: Vec<f64>,
    },
    /// `p = (tau^k - xi_1^k)/k`, vanishing to order `k` on `{tau = xi_1 = 0}`.
    Sympex {
        k: u32,
        g: Vec<f64>,
    },
    /// `p = tau * x_1`, product of two real principal-type factors.
    MuProduct {
        g: Vec<f64>,
    },
    /// `p = tau + i sigma (t - t_c)`: imaginary part changes sign once along the `t` flow.
    PsiCrossing {
        sigma: f64,
        t_c: f64,
    },
    Custom(CustomSymbol),
}

/// The uniform-family rescaling `r -> lambda^{-7e} r(t, lambda^{3e} x, xi0 + lambda^{4e}(xi - xi0))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaScaling {
    pub lambda: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct SymbolModel {
    pub id: String,
    pub n: usize,
    pub quantization: Quantization,
    pub kind: ModelKind,
    /// Fiber anchor of the reference curve for prepared models (unit vector in `R^{n-1}`).
    pub xi0: Vec<f64>,
    pub scaling: Option<LambdaScaling>,
}

/// Parameters of a catalog record; unused fields are ignored by a given model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Polynomial coefficients (increasing degree) of `g` in the lower-order term `i g(t)`.
    #[serde(default)]
    pub g: Option<Vec<f64>>,
    #[serde(default)]
    pub curvature: Option<f64>,
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    #[serde(default)]
    pub a_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub c_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub cubic: Option<f64>,
    #[serde(default)]
    pub im_slope: Option<f64>,
    #[serde(default)]
    pub k: Option<u32>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub t_c: Option<f64>,
    #[serde(default)]
    pub xi0: Option<Vec<f64>>,
}

/// Configuration record `{model_id, n, parameters, quantization_tag}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub id: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub quantization: Quantization,
    /// Rescale the prepared symbol with the ladder parameter.
    #[serde(default)]
    pub lambda_scaled: bool,
    #[serde(default)]
    pub params: ModelParams,
}

fn default_n() -> usize {
    2
}

fn zeros(d: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; d]; d]
}

fn check_square(name: &str, m: &[Vec<f64>], d: usize) -> Result<()> {
    if m.len() != d || m.iter().any(|r| r.len() != d) {
        return Err(Error::Config(format!("{name} must be {d}x{d}")));
    }
    Ok(())
}

impl SymbolModel {
    /// Instantiate a catalog record; `scaling` applies only to prepared models.
    pub fn from_spec(spec: &ModelSpec, scaling: Option<LambdaScaling>) -> Result<Self> {
        let p = &spec.params;
        let g = p.g.clone().unwrap_or_default();
        let (n, kind) = match spec.id.as_str() {
            "pt_trivial" => (
                spec.n,
                ModelKind::PtTrivial {
                    g,
                    curvature: p.curvature.unwrap_or(0.0),
                },
            ),
            "grazex" => {
                let d = spec.n.saturating_sub(1);
                let amat = p.a_matrix.clone().unwrap_or_else(|| zeros(d));
                let bmat = p.b_matrix.clone().unwrap_or_else(|| zeros(d));
                let cmat = p.c_matrix.clone().unwrap_or_else(|| zeros(d));
                check_square("a_matrix", &amat, d)?;
                check_square("b_matrix", &bmat, d)?;
                check_square("c_matrix", &cmat, d)?;
                for (name, m) in [("a_matrix", &amat), ("c_matrix", &cmat)] {
                    for i in 0..d {
                        for j in 0..d {
                            if (m[i][j] - m[j][i]).abs() > 1e-14 {
                                return Err(Error::Config(format!("{name} must be symmetric")));
                            }
                        }
                    }
                }
                (
                    spec.n,
                    ModelKind::Grazex {
                        a: p.a.clone().unwrap_or_default(),
                        amat,
                        bmat,
                        cmat,
                        cubic: p.cubic.unwrap_or(0.0),
                        im_slope: p.im_slope.unwrap_or(0.0),
                        g,
                    },
                )
            }
            id if id == "sympex" || id.starts_with("sympex_") => {
                let k = match id.strip_prefix("sympex_") {
                    Some("k") | None => p.k.unwrap_or(2),
                    Some(s) => s
                        .parse::<u32>()
                        .map_err(|_| Error::Config(format!("bad model id {id}")))?,
                };
                if k < 2 {
                    return Err(Error::Config("sympex needs k >= 2".into()));
                }
                (spec.n.max(3), ModelKind::Sympex { k, g })
            }
            "mu_product" => (spec.n, ModelKind::MuProduct { g }),
            "psi_crossing" => (
                spec.n,
                ModelKind::PsiCrossing {
                    sigma: p.sigma.unwrap_or(1.0),
                    t_c: p.t_c.unwrap_or(0.5),
                },
            ),
            other => return Err(Error::Config(format!("unknown model id {other}"))),
        };
        if n < 2 {
            return Err(Error::Config("n must be at least 2".into()));
        }
        let mut xi0 = p.xi0.clone().unwrap_or_else(|| {
            let mut v = vec![0.0; n - 1];
            v[n - 2] = 1.0;
            v
        });
        if xi0.len() != n - 1 {
            return Err(Error::Config("xi0 must have n-1 entries".into()));
        }
        let norm = xi0.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Config("xi0 must be nonzero".into()));
        }
        xi0.iter_mut().for_each(|v| *v /= norm);
        let mut model = Self {
            id: spec.id.clone(),
            n,
            quantization: spec.quantization,
            kind,
            xi0,
            scaling: None,
        };
        if spec.lambda_scaled && model.is_prepared() {
            model.scaling = scaling;
        }
        Ok(model)
    }

    /// Model from closures; `r` marks it as prepared (`p = tau - r`).
    pub fn custom(
        n: usize,
        quantization: Quantization,
        principal: PointFn,
        subprincipal: PointFn,
        r: Option<PreparedFn>,
    ) -> Self {
        let mut xi0 = vec![0.0; n - 1];
        xi0[n - 2] = 1.0;
        Self {
            id: "custom".into(),
            n,
            quantization,
            kind: ModelKind::Custom(CustomSymbol {
                principal,
                subprincipal,
                r,
            }),
            xi0,
            scaling: None,
        }
    }

    /// Convenience for tests: principal symbol only, no lower-order term.
    pub fn from_fn(
        n: usize,
        principal: impl Fn(&PhasePoint) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Self::custom(
            n,
            Quantization::Weyl,
            Arc::new(principal),
            Arc::new(|_| C64::default()),
            None,
        )
    }

    /// Prepared model `p = tau - r` from a closure for `r`, no lower-order term.
    pub fn prepared_fn(
        n: usize,
        r: impl Fn(f64, &[f64], &[f64]) -> C64 + Send + Sync + 'static,
    ) -> Self {
        let r: PreparedFn = Arc::new(r);
        let rp = r.clone();
        let principal: PointFn =
            Arc::new(move |w: &PhasePoint| C64::new(w.tau, 0.0) - rp(w.t, &w.x, &w.xi));
        Self::custom(
            n,
            Quantization::Weyl,
            principal,
            Arc::new(|_| C64::default()),
            Some(r),
        )
    }

    pub fn with_scaling(mut self, scaling: Option<LambdaScaling>) -> Self {
        if self.is_prepared() {
            self.scaling = scaling;
        }
        self
    }

    pub fn is_prepared(&self) -> bool {
        match &self.kind {
            ModelKind::PtTrivial { .. }
            | ModelKind::Grazex { .. }
            | ModelKind::PsiCrossing { .. } => true,
            ModelKind::Custom(c) => c.r.is_some(),
            _ => false,
        }
    }

    pub fn has_analytic_jet(&self) -> bool {
        !matches!(self.kind, ModelKind::Custom(_))
    }

    /// Dimension of phase space (`2n`).
    pub fn phase_dim(&self) -> usize {
        2 * self.n
    }

    fn g_coeffs(&self) -> &[f64] {
        match &self.kind {
            ModelKind::PtTrivial { g, .. }
            | ModelKind::Grazex { g, .. }
            | ModelKind::Sympex { g, .. }
            | ModelKind::MuProduct { g } => g,
            _ => &[],
        }
    }

    /// Lower-order term `p_{m-1}` as a function of time (catalog models depend on `t` only).
    pub fn lower_order_of_t(&self, t: f64) -> C64 {
        C64::new(0.0, poly_eval(self.g_coeffs(), t))
    }

    /// Base (unscaled) prepared symbol `r` written against [`Scalar`].
    fn r_base<S: Scalar>(&self, t: &S, x: &[S], xi: &[S]) -> S {
        let d = self.n - 1;
        let zero = t.real_like(0.0);
        let xh: Vec<S> = (0..d)
            .map(|j| xi[j].clone() - t.real_like(self.xi0[j]))
            .collect();
        match &self.kind {
            ModelKind::PtTrivial { curvature, .. } => {
                xh[0].clone() * xh[0].clone() * t.real_like(0.5 * curvature)
            }
            ModelKind::Grazex {
                a,
                amat,
                bmat,
                cmat,
                cubic,
                im_slope,
                ..
            } => {
                let mut quad = zero.clone();
                for i in 0..d {
                    for j in 0..d {
                        quad = quad
                            + x[i].clone() * x[j].clone() * t.real_like(amat[i][j])
                            + x[j].clone() * xh[i].clone() * t.real_like(2.0 * bmat[i][j])
                            + xh[i].clone() * xh[j].clone() * t.real_like(cmat[i][j]);
                    }
                }
                let mut at = t.real_like(0.0);
                for c in a.iter().rev() {
                    at = at * t.clone() + t.real_like(*c);
                }
                quad.scale_re(0.5) + x[0].clone().powi(3).scale_re(cubic / 6.0)
                    - at * xh[0].clone() * t.constant_like(C64::new(0.0, 1.0))
                    + x[0].scale(C64::new(0.0, *im_slope))
            }
            ModelKind::PsiCrossing { sigma, t_c } => {
                -(t.clone() - t.real_like(*t_c)) * t.constant_like(C64::new(0.0, *sigma))
            }
            _ => zero,
        }
    }

    /// Prepared symbol `r(t, x, xi)` with the ladder rescaling applied, generic over [`Scalar`].
    fn r_generic<S: Scalar>(&self, t: &S, x: &[S], xi: &[S]) -> S {
        match self.scaling {
            None => self.r_base(t, x, xi),
            Some(LambdaScaling { lambda, epsilon }) => {
                let sx = lambda.powf(3.0 * epsilon);
                let sxi = lambda.powf(4.0 * epsilon);
                let xs: Vec<S> = x.iter().map(|v| v.scale_re(sx)).collect();
                let xis: Vec<S> = xi
                    .iter()
                    .zip(&self.xi0)
                    .map(|(v, c)| (v.clone() - t.real_like(*c)).scale_re(sxi) + t.real_like(*c))
                    .collect();
                self.r_base(t, &xs, &xis)
                    .scale_re(lambda.powf(-7.0 * epsilon))
            }
        }
    }

    fn principal_generic<S: Scalar>(&self, w: &[S]) -> S {
        let n = self.n;
        let t = &w[0];
        let x = &w[1..n];
        let tau = &w[n];
        let xi = &w[n + 1..2 * n];
        match &self.kind {
            ModelKind::Sympex { k, .. } => {
                (tau.powi(*k) - xi[0].powi(*k)).scale_re(1.0 / *k as f64)
            }
            ModelKind::MuProduct { .. } => tau.clone() * x[0].clone(),
            _ => tau.clone() - self.r_generic(t, x, xi),
        }
    }

    fn lower_generic<S: Scalar>(&self, w: &[S]) -> S {
        let mut acc = w[0].real_like(0.0);
        for c in self.g_coeffs().iter().rev() {
            acc = acc * w[0].clone() + w[0].real_like(*c);
        }
        acc.scale(C64::new(0.0, 1.0))
    }

    pub fn principal(&self, w: &PhasePoint) -> C64 {
        match &self.kind {
            ModelKind::Custom(c) => match &c.r {
                Some(r) => C64::new(w.tau, 0.0) - r(w.t, &w.x, &w.xi),
                None => (c.principal)(w),
            },
            _ => {
                let flat: Vec<C64> = w.to_flat().into_iter().map(|v| C64::new(v, 0.0)).collect();
                self.principal_generic(&flat)
            }
        }
    }

    pub fn subprincipal_term(&self, w: &PhasePoint) -> C64 {
        match &self.kind {
            ModelKind::Custom(c) => (c.subprincipal)(w),
            _ => self.lower_order_of_t(w.t),
        }
    }

    /// Prepared symbol `r(t, x, xi)`; `None` for models not in prepared form.
    pub fn r(&self, t: f64, x: &[f64], xi: &[f64]) -> Option<C64> {
        if !self.is_prepared() {
            return None;
        }
        match &self.kind {
            ModelKind::Custom(c) => c.r.as_ref().map(|r| r(t, x, xi)),
            _ => {
                let tt = C64::new(t, 0.0);
                let xx: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
                let xixi: Vec<C64> = xi.iter().map(|&v| C64::new(v, 0.0)).collect();
                Some(self.r_generic(&tt, &xx, &xixi))
            }
        }
    }

    /// Exact jet through second order, when the model has a closed form.
    pub(crate) fn analytic_dual(&self, w: &PhasePoint, which: super::Which) -> Option<Dual2> {
        if !self.has_analytic_jet() {
            return None;
        }
        let seed = Dual2::seed(&w.to_flat());
        Some(match which {
            super::Which::Principal => self.principal_generic(&seed),
            super::Which::Subprincipal => self.lower_generic(&seed),
        })
    }
}
