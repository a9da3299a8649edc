use crate::error::{Error, Result};
use crate::numerics::{poly_eval, rk4_step, C64};
use crate::symbol_core::{eval_jet, hamilton_from_grad, vec_norm, PhasePoint, SymbolModel, Which};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Multiplier `a` given along the curve as a complex polynomial in arclength and extended
/// constantly in the transverse directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

impl Default for Multiplier {
    fn default() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }
}

impl Multiplier {
    pub fn constant(a: C64) -> Self {
        Self {
            re: vec![a.re],
            im: vec![a.im],
        }
    }

    pub fn at(&self, s: f64) -> C64 {
        C64::new(poly_eval(&self.re, s), poly_eval(&self.im, s))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveSample {
    pub s: f64,
    pub w: PhasePoint,
    /// Complex Hamilton field of `p` at `w`.
    pub h: Vec<C64>,
    /// Euclidean norm of `h`.
    pub h_norm: f64,
    /// `a(s) p(w)`.
    pub ap: C64,
}

#[derive(Clone, Debug)]
pub struct Semibicharacteristic {
    pub samples: Vec<CurveSample>,
    pub multiplier: Multiplier,
    /// +1 along `H_{re(ap)}`, -1 against it.
    pub orientation: f64,
}

impl Semibicharacteristic {
    pub fn kappa(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.h_norm)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn arc_length(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.s - a.s,
            _ => 0.0,
        }
    }

    pub fn s_values(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.s).collect()
    }

    /// Largest deviation of `|dw|/ds` from one between consecutive samples.
    pub fn speed_defect(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|p| {
                let a = p[0].w.to_flat();
                let b = p[1].w.to_flat();
                let dw = a
                    .iter()
                    .zip(&b)
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>()
                    .sqrt();
                (dw / (p[1].s - p[0].s) - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn re_field(model: &SymbolModel, a: C64, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>, C64)> {
    let jet = eval_jet(model, &PhasePoint::from_flat(w), 1, Which::Principal)?;
    let grad_re: Vec<f64> = jet.grad.iter().map(|g| (a * g).re).collect();
    let field: Vec<f64> = hamilton_from_grad(&jet.grad)
        .iter()
        .map(|h| (a * h).re)
        .collect();
    Ok((field, grad_re, a * jet.value))
}

fn sample(model: &SymbolModel, a: C64, s: f64, w: &[f64]) -> Result<CurveSample> {
    let pw = PhasePoint::from_flat(w);
    let jet = eval_jet(model, &pw, 1, Which::Principal)?;
    let h = hamilton_from_grad(&jet.grad);
    let h_norm = vec_norm(&h);
    Ok(CurveSample {
        s,
        w: pw,
        h,
        h_norm,
        ap: a * jet.value,
    })
}

/// Integrate `w' = H_{re(ap)} / |H_{re(ap)}|` by RK4 over `[0, arc_span]` with the given step,
/// projecting back onto `{re(ap) = 0}` by a Newton step whenever the drift exceeds `1e-10`.
pub fn trace_semibicharacteristic(
    model: &SymbolModel,
    a: &Multiplier,
    w0: &PhasePoint,
    arc_span: f64,
    step: f64,
) -> Result<Semibicharacteristic> {
    trace_oriented(model, a, w0, arc_span, step, 1.0)
}

pub(crate) fn trace_oriented(
    model: &SymbolModel,
    a: &Multiplier,
    w0: &PhasePoint,
    arc_span: f64,
    step: f64,
    orientation: f64,
) -> Result<Semibicharacteristic> {
    if !(arc_span > 0.0 && step > 0.0) {
        return Err(Error::InvalidInput(
            "arc span and step must be positive".into(),
        ));
    }
    if w0.n() != model.n {
        return Err(Error::InvalidInput(
            "initial point has the wrong dimension".into(),
        ));
    }
    let (f0, g0, ap0) = re_field(model, a.at(0.0), &w0.to_flat())?;
    let h0 = f0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if h0 < 1e-12 {
        return Err(Error::DegenerateHamiltonField { norm: h0 });
    }
    let gscale = g0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ap0.re.abs() > 1e-8 * gscale.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "initial point is off the characteristic set (re(ap) = {:e})",
            ap0.re
        )));
    }
    let steps = (arc_span / step).ceil().max(1.0) as usize;
    let h = arc_span / steps as f64;
    let rhs = |s: f64, w: &[f64]| -> Vec<f64> {
        match re_field(model, a.at(s), w) {
            Ok((f, _, _)) => {
                let nrm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nrm < 1e-12 {
                    vec![f64::NAN; w.len()]
                } else {
                    f.iter().map(|v| orientation * v / nrm).collect()
                }
            }
            Err(_) => vec![f64::NAN; w.len()],
        }
    };
    let mut w = w0.to_flat();
    let mut samples = vec![sample(model, a.at(0.0), 0.0, &w)?];
    for i in 0..steps {
        let s = i as f64 * h;
        let next = rk4_step(&rhs, s, &w, h);
        if next.iter().any(|v| !v.is_finite()) {
            let (f, _, _) = re_field(model, a.at(s), &w)?;
            let nrm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm < 1e-12 {
                return Err(Error::DegenerateHamiltonField { norm: nrm });
            }
            return Err(Error::SymbolEvaluation {
                point: format!("{w:?}"),
            });
        }
        w = next;
        let s1 = s + h;
        let (f, grad, ap) = re_field(model, a.at(s1), &w)?;
        let nrm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm < 1e-12 {
            return Err(Error::DegenerateHamiltonField { norm: nrm });
        }
        if ap.re.abs() > 1e-10 {
            let g2: f64 = grad.iter().map(|v| v * v).sum();
            if g2 == 0.0 {
                return Err(Error::LeftCharacteristicSet { s: s1 });
            }
            let c = ap.re / g2;
            w.iter_mut().zip(&grad).for_each(|(wi, gi)| *wi -= c * gi);
            let (_, grad2, ap2) = re_field(model, a.at(s1), &w)?;
            let gn = grad2.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(ap2.re.abs() <= 1e-8 * (1.0 + gn)) {
                return Err(Error::LeftCharacteristicSet { s: s1 });
            }
        }
        samples.push(sample(model, a.at(s1), s1, &w)?);
    }
    Ok(Semibicharacteristic {
        samples,
        multiplier: a.clone(),
        orientation,
    })
}

/// Header and formatted rows `s, t, x…, tau, xi…, |H_p|, im_ap, re_ap`.
pub fn curve_table(curve: &Semibicharacteristic) -> (Vec<String>, Vec<Vec<String>>) {
    let d = curve.samples.first().map(|c| c.w.x.len()).unwrap_or(0);
    let mut header = vec!["s".to_string(), "t".to_string()];
    header.extend((1..=d).map(|j| format!("x{j}")));
    header.push("tau".into());
    header.extend((1..=d).map(|j| format!("xi{j}")));
    header.extend([
        "|H_p|".to_string(),
        "im_ap".to_string(),
        "re_ap".to_string(),
    ]);
    let rows = curve
        .samples
        .iter()
        .map(|c| {
            let mut row = vec![format!("{:.12e}", c.s), format!("{:.12e}", c.w.t)];
            row.extend(c.w.x.iter().map(|v| format!("{v:.12e}")));
            row.push(format!("{:.12e}", c.w.tau));
            row.extend(c.w.xi.iter().map(|v| format!("{v:.12e}")));
            row.extend([
                format!("{:.12e}", c.h_norm),
                format!("{:.12e}", c.ap.im),
                format!("{:.12e}", c.ap.re),
            ]);
            row
        })
        .collect();
    (header, rows)
}

/// Write the curve samples as CSV (see [`curve_table`]).
pub fn write_curve_csv<W: Write>(curve: &Semibicharacteristic, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let (header, rows) = curve_table(curve);
    wtr.write_record(&header)
        .map_err(|e| Error::Io(e.to_string()))?;
    for row in rows {
        wtr.write_record(&row)
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
