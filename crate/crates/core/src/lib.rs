//! Numerical laboratory for Riesz potential operators on finite-measure sets.
//!
//! The operator `R f(x) = ∫_Ω c_{α,d} |x - y|^{α-d} f(y) dy` is discretized on
//! rasterized domains, decomposed densely, and used to test extremal
//! properties of the ball: the first eigenvalue and integer Schatten norms are
//! maximal on the ball among sets of equal measure, and the second eigenvalue
//! is approached from below by two equal balls moving apart.
//!
//! Module map:
//!
//! - [`kernel`]: kernel constant, kernel evaluation, the convolution probe.
//! - [`domain`]: shape descriptions, rasterized grids, equal-measure balls.
//! - [`assemble`]: dense collocation matrix with a corrected diagonal.
//! - [`spectra`]: eigendecomposition, Schatten norms, decay envelope,
//!   positivity of the ground state.
//! - [`rearrange`]: discrete symmetric-decreasing rearrangement and the
//!   quadratic-form comparison.
//! - [`trace_mc`]: Monte Carlo estimates of cyclic trace integrals.
//! - [`experiments`]: configuration, sweeps, and result files used by the
//!   `riesz` command-line tool.

pub mod assemble;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod quadrature;
pub mod rearrange;
pub mod spectra;
pub mod tolerances;
pub mod trace_mc;

#[cfg(test)]
mod test_oracles;

pub use assemble::{assemble, self_term, AssemblyOptions, DiagonalRule, OperatorMatrix};
pub use domain::{ball_rearrangement, rasterize, two_balls, GridDomain, ShapeSpec};
pub use error::{Result, RieszError};
pub use kernel::{kernel_eval, newton_params, riesz_constant, RieszParams};
pub use spectra::{eigen_sym, schatten_norm, SchattenExponent, SchattenReport, Spectrum};
pub use trace_mc::{bll_compare, trace_cycle_mc, TraceMCEstimate};
