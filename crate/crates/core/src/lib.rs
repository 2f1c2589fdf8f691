//! Polynomial symmetry algebras of two superintegrable monopole systems.
//!
//! - [`flat_model`]: the MIC-harmonic oscillator in flat space, with all
//!   operators acting on labelled basis states by closed-form coefficients.
//! - [`taubnut_model`]: the MIC-harmonic oscillator on a generalized
//!   Taub-NUT background, its separated wavefunctions, ladder and shift
//!   operators, integrals of motion and the energy equation obtained through
//!   coupling constant metamorphosis.
//! - [`defosc`]: factored deformed-oscillator structure functions and the
//!   solver for their finite-dimensional unirreps.
//! - [`numgrid`]: grid checks of the recurrence relations and independent
//!   finite-difference eigenvalue oracles.
//! - [`specfun`]: Laguerre, Jacobi and terminating `1F1` evaluation.

pub mod defosc;
pub mod error;
pub mod flat_model;
pub mod halfint;
pub mod numgrid;
pub mod specfun;
pub mod taubnut_model;

pub use error::{Error, Result};

use num_complex::Complex64;

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_residual(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Real-valued [`relative_residual`].
pub fn relative_residual_re(a: f64, b: f64) -> f64 {
    relative_residual(Complex64::new(a, 0.0), Complex64::new(b, 0.0))
}
