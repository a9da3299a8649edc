//! Numerical realization of a quasimode-based nonsolvability argument for model
//! pseudodifferential operators: semibicharacteristic geometry, WKB phase and amplitude
//! construction, Sobolev-norm measurement and the solvability-ratio experiment.

pub mod bichar_geometry;
pub mod eikonal;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod numerics;
pub mod operator_apply;
pub mod quasimode;
pub mod symbol_core;
pub mod transport;

pub use error::{Error, Result};
pub use numerics::C64;
