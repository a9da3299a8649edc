use super::trace::Semibicharacteristic;
use crate::error::{Error, Result};
use crate::symbol_core::{subprincipal, SymbolModel};
use serde::{Deserialize, Serialize};

/// Arclength bracket of one transition of `im(ap)` across zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SignChange {
    /// Last sample on the starting side before the crossing.
    pub s_minus: f64,
    /// First sample on the far side after the crossing.
    pub s_plus: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transition {
    MinusToPlus,
    PlusToMinus,
}

/// Bracket every maximal passage of `v` from below `-tol` to above `+tol` (or the reverse),
/// where `tol = 1e-10 * max |v|`.
pub fn scan_transitions(s: &[f64], v: &[f64], direction: Transition) -> Vec<SignChange> {
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if vmax == 0.0 {
        return Vec::new();
    }
    let tol = 1e-10 * vmax;
    let sign = match direction {
        Transition::MinusToPlus => 1.0,
        Transition::PlusToMinus => -1.0,
    };
    let mut events = Vec::new();
    let mut last_low: Option<usize> = None;
    for (i, &raw) in v.iter().enumerate() {
        let x = sign * raw;
        if x < -tol {
            last_low = Some(i);
        } else if x > tol {
            if let Some(j) = last_low.take() {
                events.push(SignChange {
                    s_minus: s[j],
                    s_plus: s[i],
                });
            }
        }
    }
    events
}

/// Sign changes of `im(ap)` from negative to positive along the curve's orientation.
pub fn psi_violation_scan(curve: &Semibicharacteristic) -> Vec<SignChange> {
    let s: Vec<f64> = curve.s_values();
    let v: Vec<f64> = curve.samples.iter().map(|c| c.ap.im).collect();
    scan_transitions(&s, &v, Transition::MinusToPlus)
}

/// Orientation of the divergence integral: against `p_s` itself, or against the subprincipal
/// symbol of the adjoint (`conj(p_s)`), whose start point is the running maximum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceForm {
    Direct,
    #[default]
    Adjoint,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub kappa: f64,
    pub start_index: usize,
    pub start_s: f64,
    /// Signed integrals from the start point to the left and right ends.
    pub endpoint_integrals: [f64; 2],
    /// The normalized statistic; positive means the integral diverges in both directions.
    pub value: f64,
    pub form: DivergenceForm,
}

fn running_integral(s: &[f64], h: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; s.len()];
    for i in 1..s.len() {
        out[i] = out[i - 1] + 0.5 * (h[i] + h[i - 1]) * (s[i] - s[i - 1]);
    }
    out
}

/// For each curve integrate `im(a p_s) / |H_p|` in arclength, pick the start point (running
/// minimum, or running maximum of the adjoint integrand) and normalize the weaker endpoint
/// integral by `|log kappa|`. `kappa_override` replaces the curve's own `min |H_p|`.
pub fn subprincipal_divergence(
    model: &SymbolModel,
    curves: &[Semibicharacteristic],
    form: DivergenceForm,
    kappa_override: Option<f64>,
) -> Result<Vec<DivergenceReport>> {
    curves
        .iter()
        .map(|curve| {
            if curve.samples.len() < 2 {
                return Err(Error::InvalidInput(
                    "curve needs at least two samples".into(),
                ));
            }
            let kappa = kappa_override.unwrap_or_else(|| curve.kappa());
            if !(kappa > 0.0 && kappa < 1.0) {
                return Err(Error::NotNearDoubleCharacteristics { kappa });
            }
            let s = curve.s_values();
            let mut h = Vec::with_capacity(s.len());
            for smp in &curve.samples {
                let a = curve.multiplier.at(smp.s);
                let ps = subprincipal(model, &smp.w)?;
                let v = (a * ps).im / smp.h_norm;
                h.push(match form {
                    DivergenceForm::Direct => v,
                    DivergenceForm::Adjoint => -v,
                });
            }
            let f = running_integral(&s, &h);
            let pick = |better: fn(f64, f64) -> bool| {
                f.iter().enumerate().fold(
                    0usize,
                    |best, (i, &x)| if better(x, f[best]) { i } else { best },
                )
            };
            let j = match form {
                DivergenceForm::Direct => pick(|x, b| x < b),
                DivergenceForm::Adjoint => pick(|x, b| x > b),
            };
            let last = f.len() - 1;
            let ends = [f[0] - f[j], f[last] - f[j]];
            let value = match form {
                DivergenceForm::Direct => ends[0].min(ends[1]),
                DivergenceForm::Adjoint => -ends[0].max(ends[1]),
            } / kappa.ln().abs();
            Ok(DivergenceReport {
                kappa,
                start_index: j,
                start_s: s[j],
                endpoint_integrals: ends,
                value,
                form,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::trace::{trace_semibicharacteristic, Multiplier};
    use super::*;
    use crate::numerics::C64;
    use crate::symbol_core::{ModelParams, ModelSpec, PhasePoint, Quantization};
    use proptest::prelude::*;

    fn catalog(id: &str, params: ModelParams) -> SymbolModel {
        let spec = ModelSpec {
            id: id.into(),
            n: 2,
            quantization: Quantization::Weyl,
            lambda_scaled: false,
            params,
        };
        SymbolModel::from_spec(&spec, None).unwrap()
    }

    #[test]
    fn crossing_model_has_one_event() {
        let m = catalog(
            "psi_crossing",
            ModelParams {
                sigma: Some(1.0),
                t_c: Some(0.5),
                ..Default::default()
            },
        );
        let w0 = PhasePoint::new(0.0, vec![0.0], 0.0, vec![1.0]).unwrap();
        let c = trace_semibicharacteristic(&m, &Multiplier::default(), &w0, 1.0, 0.01).unwrap();
        let ev = psi_violation_scan(&c);
        assert_eq!(ev.len(), 1);
        assert!(ev[0].s_minus < 0.5 && ev[0].s_plus > 0.5);
        assert!(ev[0].s_plus - ev[0].s_minus <= 0.02 + 1e-12);
    }

    #[test]
    fn tangency_without_crossing_is_not_an_event() {
        let s: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let v: Vec<f64> = s.iter().map(|x| -(x - 0.5) * (x - 0.5)).collect();
        assert!(scan_transitions(&s, &v, Transition::MinusToPlus).is_empty());
        let zero = vec![0.0; s.len()];
        assert!(scan_transitions(&s, &zero, Transition::MinusToPlus).is_empty());
    }

    proptest! {
        #[test]
        fn negation_swaps_roles(vals in prop::collection::vec(-1.0f64..1.0, 2..60)) {
            let s: Vec<f64> = (0..vals.len()).map(|i| i as f64).collect();
            let neg: Vec<f64> = vals.iter().map(|v| -v).collect();
            prop_assert_eq!(
                scan_transitions(&s, &vals, Transition::MinusToPlus),
                scan_transitions(&s, &neg, Transition::PlusToMinus)
            );
        }
    }

    fn line_curve(model: &SymbolModel, t0: f64, len: f64, step: f64) -> Semibicharacteristic {
        let w0 = PhasePoint::new(t0, vec![0.0], 0.0, vec![1.0]).unwrap();
        trace_semibicharacteristic(model, &Multiplier::default(), &w0, len, step).unwrap()
    }

    #[test]
    fn real_lower_order_gives_zero() {
        let m = catalog(
            "pt_trivial",
            ModelParams {
                g: Some(vec![0.0]),
                ..Default::default()
            },
        );
        let c = line_curve(&m, -1.0, 2.0, 0.01);
        for form in [DivergenceForm::Direct, DivergenceForm::Adjoint] {
            let r = subprincipal_divergence(&m, &[c.clone()], form, Some(0.5)).unwrap();
            assert_eq!(r[0].value, 0.0);
        }
    }

    #[test]
    fn linear_lower_order_oracle() {
        let m = catalog(
            "pt_trivial",
            ModelParams {
                g: Some(vec![0.0, 1.0]),
                ..Default::default()
            },
        );
        let c = line_curve(&m, -1.0, 2.0, 0.01);
        for lambda in [1e4f64, 1e6, 1e8] {
            let kappa = lambda.powf(-0.125);
            for form in [DivergenceForm::Direct, DivergenceForm::Adjoint] {
                let r = subprincipal_divergence(&m, &[c.clone()], form, Some(kappa)).unwrap();
                assert!((r[0].value - 4.0 / lambda.ln()).abs() < 1e-10, "{form:?}");
                assert!((r[0].start_s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn refinement_invariance() {
        let m = catalog(
            "pt_trivial",
            ModelParams {
                g: Some(vec![0.1, 1.0, 0.3, -0.2]),
                ..Default::default()
            },
        );
        let coarse = subprincipal_divergence(
            &m,
            &[line_curve(&m, -1.0, 2.0, 0.02)],
            DivergenceForm::Adjoint,
            Some(0.1),
        )
        .unwrap();
        let fine = subprincipal_divergence(
            &m,
            &[line_curve(&m, -1.0, 2.0, 0.01)],
            DivergenceForm::Adjoint,
            Some(0.1),
        )
        .unwrap();
        assert!((coarse[0].value - fine[0].value).abs() < 1e-3);
    }

    #[test]
    fn symplectic_example_grows_as_distance_shrinks() {
        let mut prev = 0.0;
        for d in [0.2f64, 0.1, 0.05] {
            let m = catalog(
                "sympex_k",
                ModelParams {
                    k: Some(2),
                    g: Some(vec![0.0, 1.0]),
                    ..Default::default()
                },
            );
            let c0 = d / 2f64.sqrt();
            let w0 = PhasePoint::new(-0.5, vec![0.0, 0.0], c0, vec![c0, 0.0]).unwrap();
            let c = trace_semibicharacteristic(&m, &Multiplier::default(), &w0, 2f64.sqrt(), 0.01)
                .unwrap();
            assert!((c.kappa() - d).abs() < 1e-9);
            let r = subprincipal_divergence(&m, &[c], DivergenceForm::Adjoint, None).unwrap();
            // integrand t / d with t = -1/2 + s / sqrt(2): endpoint integral (1/2)^2 / sqrt(2)... / d
            let expected = (0.25 / 2f64.sqrt()) / d / d.ln().abs();
            assert!(
                (r[0].value - expected).abs() < 1e-6 * expected,
                "d={d}: {} vs {expected}",
                r[0].value
            );
            assert!(r[0].value > prev);
            prev = r[0].value;
        }
    }

    #[test]
    fn kappa_must_be_small() {
        let m = SymbolModel::from_fn(2, |w| C64::new(w.tau, 0.0));
        let c = line_curve(&m, 0.0, 1.0, 0.1);
        assert!(matches!(
            subprincipal_divergence(&m, &[c], DivergenceForm::Direct, None),
            Err(Error::NotNearDoubleCharacteristics { .. })
        ));
    }
}
