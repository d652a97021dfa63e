//! Adaptive identification of exponentially stable SISO plants whose
//! transfer functions are ratios of two power series in the Laplace
//! variable — delay systems, 1D heat rods, 1D strings with spatially-varying
//! stiffness, and anything else with factorially decaying coefficients.
//!
//! The pipeline: simulate the plant under a multisine input, pass input and
//! output through a low-pass derivative-estimating filter cascade, maintain
//! a sliding-window Gram of the filtered signals, and run a gradient-flow
//! update law whose equilibrium is the true coefficient vector. Physical
//! parameters are then recovered from the leading coefficient estimates, and
//! a separate analysis certifies (numerically) that the input excites the
//! unknown directions strongly enough for all of this to converge.
//!
//! Modules follow the pipeline: [`coeffs`] (coefficient series and bounds),
//! [`plants`] (simulators), [`filters`] (the regressor), [`identifier`] (the
//! update law), [`pe`] (excitation analysis), [`reconstruct`] (parameter
//! recovery), [`harness`] (config + experiment runs).

pub mod coeffs;
pub mod error;
pub mod filters;
pub mod harness;
pub mod identifier;
mod math;
pub mod pe;
pub mod pipeline;
pub mod plants;
pub mod reconstruct;

pub use error::{Error, Result};
