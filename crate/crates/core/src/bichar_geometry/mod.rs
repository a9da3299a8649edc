//! Semibicharacteristics, their uniformity and tangency diagnostics, sign-change scans,
//! the subprincipal divergence statistic and grazing Lagrangean evolution.

mod diagnostics;
mod riccati;
mod scan;
mod trace;

pub use diagnostics::{complex_tangency_diagnostics, uniformity_diagnostics, CurveDiagnostics};
pub use riccati::{
    evolve_grazing_lagrangean, evolve_riccati, LagrangeanPath, RiccatiCoefficients, RiccatiOptions,
};
pub use scan::{
    psi_violation_scan, scan_transitions, subprincipal_divergence, DivergenceForm,
    DivergenceReport, SignChange, Transition,
};
pub use trace::{
    curve_table, trace_semibicharacteristic, write_curve_csv, CurveSample, Multiplier,
    Semibicharacteristic,
};
