//! Numerical laboratory for the power-exponential Gaussian analytic function
//!
//! ```text
//! F_β(z) = Σ ξ_n z^n / √Γ(2(n+1)/β)
//! ```
//!
//! its truncations, the constrained logarithmic-energy minimizers that govern
//! its hole probabilities, and Monte Carlo probes of the forbidden annulus
//! `1 < |z| < e^{1/β}` that zeros avoid when the disk is empty.
//!
//! Modules, bottom-up:
//!
//! * [`special`] — log-gamma, series coefficients, Stirling brackets, truncation plans
//! * [`gaf`] — sampling, stable evaluation, kernel and first intensity
//! * [`zeros`] — companion-matrix roots, argument-principle counts, test functions
//! * [`measures`] — exact radial measures, potentials and energies
//! * [`varopt`] — direct constrained minimization over discretized radial measures
//! * [`polydensity`] — joint zero density of the truncated polynomial and its functionals
//! * [`mc`] — hole-probability and conditional-zero experiments

pub mod error;
pub mod gaf;
pub mod mc;
pub mod measures;
pub mod polydensity;
pub mod quad;
pub mod special;
pub mod varopt;
pub mod zeros;

pub use error::{Error, Result};
pub use special::{TruncationPlan, WeightModel};

pub use num_complex::Complex64;
