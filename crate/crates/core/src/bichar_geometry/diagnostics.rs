use super::riccati::LagrangeanPath;
use super::trace::Semibicharacteristic;
use crate::error::{Error, Result};
use crate::numerics::{derivative_uniform, C64};
use crate::symbol_core::{eval_jet, hamilton_from_grad, SymbolModel, Which};
use serde::Serialize;

/// Uniformity and tangency summary of one semibicharacteristic.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CurveDiagnostics {
    pub arc_length: f64,
    /// Minimum of `|H_p|` along the curve.
    pub kappa: f64,
    /// `C_k` for `k = 0..=K`: sup of the `k`-th derivative of `grad(re(a p~))` along the flow.
    pub derivative_bounds: Vec<f64>,
    /// Minimum of `|grad re(ap)| / |grad p|`.
    pub nabla_ratio: f64,
    /// Maximum of `|H_{im(a p~)}|`.
    pub im_field_bound: f64,
    pub wedge_bound: Option<f64>,
    pub wedge_derivative_bound: Option<f64>,
    pub linearization_bound: Option<f64>,
    /// `log(wedge_bound) / log(kappa)`, defined when `kappa < 1`.
    pub wedge_exponent: Option<f64>,
    pub linearization_exponent: Option<f64>,
    /// Max of `|d im p~|` restricted to `ker d re p~`.
    pub im_tangent_bound: Option<f64>,
}

fn re_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Arclength, `kappa`, derivative bounds up to order `k_max`, gradient ratio and the
/// imaginary-field bound.
pub fn uniformity_diagnostics(
    model: &SymbolModel,
    curve: &Semibicharacteristic,
    k_max: usize,
) -> Result<CurveDiagnostics> {
    let m = curve.samples.len();
    if m < 2 {
        return Err(Error::InvalidInput(
            "curve needs at least two samples".into(),
        ));
    }
    let ds = (curve.samples[m - 1].s - curve.samples[0].s) / (m - 1) as f64;
    let mut kappa = f64::INFINITY;
    let mut nabla_ratio = f64::INFINITY;
    let mut im_field_bound = 0.0f64;
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut speed_ratio = Vec::with_capacity(m);
    for smp in &curve.samples {
        let a = curve.multiplier.at(smp.s);
        let jet = eval_jet(model, &smp.w, 1, Which::Principal)?;
        let hn = smp.h_norm;
        if hn == 0.0 {
            return Err(Error::DegenerateHamiltonField { norm: 0.0 });
        }
        kappa = kappa.min(hn);
        let g_re: Vec<f64> = jet.grad.iter().map(|g| (a * g).re).collect();
        let g_norm = jet.grad.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        nabla_ratio = nabla_ratio.min(re_norm(&g_re) / g_norm);
        let h_im: Vec<f64> = hamilton_from_grad(&jet.grad)
            .iter()
            .map(|h| (a * h).im)
            .collect();
        im_field_bound = im_field_bound.max(re_norm(&h_im) / hn);
        speed_ratio.push(re_norm(&g_re) / hn);
        grads.push(g_re.iter().map(|v| v / hn).collect());
    }
    let dim = grads[0].len();
    let mut bounds = Vec::with_capacity(k_max + 1);
    let mut cur = grads;
    for k in 0..=k_max {
        bounds.push(cur.iter().map(|g| re_norm(g)).fold(0.0, f64::max));
        if k == k_max {
            break;
        }
        let mut next = vec![vec![0.0; dim]; m];
        for c in 0..dim {
            let col: Vec<f64> = cur.iter().map(|g| g[c]).collect();
            let d = derivative_uniform(&col, ds);
            for i in 0..m {
                next[i][c] = speed_ratio[i] * d[i];
            }
        }
        cur = next;
    }
    Ok(CurveDiagnostics {
        arc_length: curve.arc_length(),
        kappa,
        derivative_bounds: bounds,
        nabla_ratio,
        im_field_bound,
        ..Default::default()
    })
}

/// Operator norm of `Im(conj(g) ⊗ g)`: the area spanned by `re g` and `im g`.
pub(crate) fn wedge_norm(g: &[C64]) -> f64 {
    let a2: f64 = g.iter().map(|z| z.re * z.re).sum();
    let b2: f64 = g.iter().map(|z| z.im * z.im).sum();
    let ab: f64 = g.iter().map(|z| z.re * z.im).sum();
    (a2 * b2 - ab * ab).max(0.0).sqrt()
}

/// Operator norm of `Im(conj(g') ⊗ g + conj(g) ⊗ g')`, computed with an SVD.
fn wedge_variation_norm(g: &[C64], dg: &[C64]) -> f64 {
    let d = g.len();
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| (dg[i].conj() * g[j] + g[i].conj() * dg[j]).im);
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Tangent vectors of the Lagrangean plane `{(s, y; 0, A y)}` in flat coordinates, orthonormalized.
fn lagrangean_basis(n: usize, a: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    let d = n - 1;
    let mut raw = Vec::with_capacity(n);
    let mut e = vec![0.0; 2 * n];
    e[0] = 1.0;
    raw.push(e);
    for j in 0..d {
        let mut v = vec![0.0; 2 * n];
        v[1 + j] = 1.0;
        for i in 0..d {
            v[n + 1 + i] = a[(i, j)];
        }
        raw.push(v);
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    for mut v in raw {
        for u in &out {
            let c: f64 = v.iter().zip(u).map(|(p, q)| p * q).sum();
            v.iter_mut().zip(u).for_each(|(p, q)| *p -= c * q);
        }
        let nv = re_norm(&v);
        v.iter_mut().for_each(|p| *p /= nv);
        out.push(v);
    }
    out
}

/// Fill in the wedge, linearization and tangential-imaginary bounds using the Lagrangean path
/// (the plane at each sample is looked up by the sample's time).
pub fn complex_tangency_diagnostics(
    model: &SymbolModel,
    curve: &Semibicharacteristic,
    lagrangean: &LagrangeanPath,
    base: CurveDiagnostics,
) -> Result<CurveDiagnostics> {
    let n = model.n;
    let mut wedge = 0.0f64;
    let mut wedge_d = 0.0f64;
    let mut lin = 0.0f64;
    let mut im_tan = 0.0f64;
    for smp in &curve.samples {
        let a = curve.multiplier.at(smp.s);
        let jet = eval_jet(model, &smp.w, 2, Which::Principal)?;
        let hn = smp.h_norm;
        let g: Vec<C64> = jet.grad.iter().map(|v| a * v).collect();
        let hn2 = hn * hn * a.norm_sqr();
        wedge = wedge.max(wedge_norm(&g) / hn2);
        let amat = lagrangean.at(smp.w.t).ok_or_else(|| {
            Error::InvalidInput(format!("Lagrangean path does not cover t = {}", smp.w.t))
        })?;
        let mut frob = 0.0;
        for e in lagrangean_basis(n, &amat) {
            let dg: Vec<C64> = (0..2 * n)
                .map(|i| (0..2 * n).map(|j| jet.hess_at(i, j) * e[j]).sum::<C64>() * a)
                .collect();
            wedge_d = wedge_d.max(wedge_variation_norm(&g, &dg) / hn2);
            frob += dg.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        lin = lin.max(frob.sqrt() / (hn * a.norm()));
        let gre: Vec<f64> = g.iter().map(|z| z.re).collect();
        let gim: Vec<f64> = g.iter().map(|z| z.im).collect();
        let nre2: f64 = gre.iter().map(|v| v * v).sum();
        let c = if nre2 > 0.0 {
            gre.iter().zip(&gim).map(|(p, q)| p * q).sum::<f64>() / nre2
        } else {
            0.0
        };
        let perp: Vec<f64> = gim.iter().zip(&gre).map(|(q, p)| q - c * p).collect();
        im_tan = im_tan.max(re_norm(&perp) / (hn * a.norm()));
    }
    let exponent = |b: f64| (base.kappa < 1.0 && b > 0.0).then(|| b.ln() / base.kappa.ln());
    Ok(CurveDiagnostics {
        wedge_bound: Some(wedge),
        wedge_derivative_bound: Some(wedge_d),
        linearization_bound: Some(lin),
        wedge_exponent: exponent(wedge),
        linearization_exponent: exponent(lin),
        im_tangent_bound: Some(im_tan),
        ..base
    })
}
