//! Model symbols, derivative jets, Hamilton fields and normalized quantities.

pub mod ad;
pub mod catalog;

pub use catalog::{LambdaScaling, ModelKind, ModelParams, ModelSpec, Quantization, SymbolModel};

use crate::error::{Error, Result};
use crate::numerics::C64;
use serde::{Deserialize, Serialize};

/// A point `(t, x; tau, xi)` of phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub tau: f64,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(t: f64, x: Vec<f64>, tau: f64, xi: Vec<f64>) -> Result<Self> {
        if x.len() != xi.len() {
            return Err(Error::InvalidInput(format!(
                "x has {} entries but xi has {}",
                x.len(),
                xi.len()
            )));
        }
        let p = Self { t, x, tau, xi };
        if !p.is_finite() {
            return Err(Error::InvalidInput("non-finite phase point".into()));
        }
        Ok(p)
    }

    /// `n`, so that phase space has dimension `2n`.
    pub fn n(&self) -> usize {
        self.x.len() + 1
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.tau.is_finite()
            && self.x.iter().chain(&self.xi).all(|v| v.is_finite())
    }

    /// `(t, x_1..x_{n-1}, tau, xi_1..xi_{n-1})`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.n());
        v.push(self.t);
        v.extend_from_slice(&self.x);
        v.push(self.tau);
        v.extend_from_slice(&self.xi);
        v
    }

    pub fn from_flat(w: &[f64]) -> Self {
        let n = w.len() / 2;
        Self {
            t: w[0],
            x: w[1..n].to_vec(),
            tau: w[n],
            xi: w[n + 1..].to_vec(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn fiber_norm(&self) -> f64 {
        (self.tau * self.tau + self.xi.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    Principal,
    Subprincipal,
}

/// Value and derivatives through `order` in the flat coordinates of [`PhasePoint::to_flat`].
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: C64,
    /// Empty when `order < 1`.
    pub grad: Vec<C64>,
    /// Row-major `2n x 2n`, empty when `order < 2`.
    pub hess: Vec<C64>,
    pub order: u8,
}

impl Jet {
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hess_at(&self, i: usize, j: usize) -> C64 {
        self.hess[i * self.dim() + j]
    }

    /// Componentwise real part (the jet of `re f`, since the variables are real).
    pub fn re(&self) -> Jet {
        Jet {
            value: C64::new(self.value.re, 0.0),
            grad: self.grad.iter().map(|v| C64::new(v.re, 0.0)).collect(),
            hess: self.hess.iter().map(|v| C64::new(v.re, 0.0)).collect(),
            order: self.order,
        }
    }

    /// Jet of the product `a * f` for a constant `a`.
    pub fn scaled(&self, a: C64) -> Jet {
        Jet {
            value: self.value * a,
            grad: self.grad.iter().map(|v| v * a).collect(),
            hess: self.hess.iter().map(|v| v * a).collect(),
            order: self.order,
        }
    }
}

/// Finite-difference step used by [`eval_jet`].
pub fn default_fd_step(w: &PhasePoint) -> f64 {
    1e-5 * (1.0 + w.norm())
}

fn eval_point(model: &SymbolModel, w: &[f64], which: Which) -> Result<C64> {
    let p = PhasePoint::from_flat(w);
    let v = match which {
        Which::Principal => model.principal(&p),
        Which::Subprincipal => model.subprincipal_term(&p),
    };
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::SymbolEvaluation {
            point: format!("{w:?}"),
        });
    }
    Ok(v)
}

/// Central finite-difference jet with explicit step `h`.
pub fn fd_jet(model: &SymbolModel, w: &PhasePoint, order: u8, which: Which, h: f64) -> Result<Jet> {
    let base = w.to_flat();
    let d = base.len();
    let f0 = eval_point(model, &base, which)?;
    let at = |shifts: &[(usize, f64)]| -> Result<C64> {
        let mut p = base.clone();
        for &(i, s) in shifts {
            p[i] += s;
        }
        eval_point(model, &p, which)
    };
    let mut grad = Vec::new();
    let mut hess = Vec::new();
    if order >= 1 {
        let mut plus = Vec::with_capacity(d);
        let mut minus = Vec::with_capacity(d);
        for i in 0..d {
            plus.push(at(&[(i, h)])?);
            minus.push(at(&[(i, -h)])?);
            grad.push((plus[i] - minus[i]) / (2.0 * h));
        }
        if order >= 2 {
            hess = vec![C64::default(); d * d];
            for i in 0..d {
                hess[i * d + i] = (plus[i] - 2.0 * f0 + minus[i]) / (h * h);
                for j in i + 1..d {
                    let v = (at(&[(i, h), (j, h)])?
                        - at(&[(i, h), (j, -h)])?
                        - at(&[(i, -h), (j, h)])?
                        + at(&[(i, -h), (j, -h)])?)
                        / (4.0 * h * h);
                    hess[i * d + j] = v;
                    hess[j * d + i] = v;
                }
            }
        }
    }
    Ok(Jet {
        value: f0,
        grad,
        hess,
        order,
    })
}

/// Derivatives through `order` (0, 1 or 2) of the principal or lower-order symbol at `w`.
/// Uses the closed form when the model has one and central differences otherwise.
pub fn eval_jet(model: &SymbolModel, w: &PhasePoint, order: u8, which: Which) -> Result<Jet> {
    if order > 2 {
        return Err(Error::InvalidInput(format!(
            "jet order {order} not supported"
        )));
    }
    if !w.is_finite() || w.n() != model.n {
        return Err(Error::SymbolEvaluation {
            point: format!("{w:?}"),
        });
    }
    match model.analytic_dual(w, which) {
        Some(d) => {
            let finite = d.v.re.is_finite() && d.v.im.is_finite();
            if !finite {
                return Err(Error::SymbolEvaluation {
                    point: format!("{w:?}"),
                });
            }
            Ok(Jet {
                value: d.v,
                grad: if order >= 1 { d.g } else { Vec::new() },
                hess: if order >= 2 { d.h } else { Vec::new() },
                order,
            })
        }
        None => fd_jet(model, w, order, which, default_fd_step(w)),
    }
}

/// Hamilton field of a first-order jet: `(d_tau p, d_xi p, -d_t p, -d_x p)`.
pub fn hamilton_from_grad(grad: &[C64]) -> Vec<C64> {
    let n = grad.len() / 2;
    let mut h = Vec::with_capacity(2 * n);
    h.extend_from_slice(&grad[n..]);
    h.extend(grad[..n].iter().map(|v| -v));
    h
}

/// `H_p` at `w`, ordered as `(t', x', tau', xi')`.
pub fn hamilton_field(model: &SymbolModel, w: &PhasePoint) -> Result<Vec<C64>> {
    let jet = eval_jet(model, w, 1, Which::Principal)?;
    Ok(hamilton_from_grad(&jet.grad))
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Homogeneous gradient norm from a gradient and the fiber point.
pub fn homogeneous_norm_from_grad(grad: &[C64], w: &PhasePoint) -> Result<f64> {
    let fiber = w.fiber_norm();
    if fiber == 0.0 {
        return Err(Error::ZeroSection);
    }
    let n = grad.len() / 2;
    let base: f64 = grad[..n].iter().map(|z| z.norm_sqr()).sum();
    let fib: f64 = grad[n..].iter().map(|z| z.norm_sqr()).sum();
    Ok((base / (fiber * fiber) + fib).sqrt())
}

/// `sqrt(|d_{t,x} p|^2 / |(tau, xi)|^2 + |d_{tau,xi} p|^2)`.
pub fn homogeneous_gradient_norm(model: &SymbolModel, w: &PhasePoint) -> Result<f64> {
    if w.fiber_norm() == 0.0 {
        return Err(Error::ZeroSection);
    }
    let jet = eval_jet(model, w, 1, Which::Principal)?;
    homogeneous_norm_from_grad(&jet.grad, w)
}

/// Invariant subprincipal symbol. Kohn–Nirenberg: `p_{m-1} - (1/2i) sum_j d_{xi_j} d_{x_j} p`,
/// the sum running over all `n` pairs including `(t, tau)`. Weyl: `p_{m-1}`.
pub fn subprincipal(model: &SymbolModel, w: &PhasePoint) -> Result<C64> {
    let lower = eval_jet(model, w, 0, Which::Subprincipal)?.value;
    match model.quantization {
        Quantization::Weyl => Ok(lower),
        Quantization::KohnNirenberg => {
            let jet = eval_jet(model, w, 2, Which::Principal)?;
            let n = model.n;
            let mixed: C64 = (0..n).map(|j| jet.hess_at(j, n + j)).sum();
            Ok(lower - mixed / (2.0 * C64::i()))
        }
    }
}
