//! Thresholds shared by the library, the CLI verdicts, and the test suites.
//!
//! Every numeric cutoff used to call something "equal", "simple", or
//! "significant" lives here.

/// Closed-form constants and power laws: a few ulps of accumulated rounding.
pub const ANALYTIC: f64 = 1e-12;

/// Exact linear-algebra identities on assembled matrices (trace, Frobenius).
pub const LINEAR_ALGEBRA: f64 = 1e-10;

/// Spectral dilation law `λ(tΩ) = t^α λ(Ω)`.
pub const DILATION: f64 = 1e-10;

/// Eigenvector orthonormality and reconstruction, relative to `‖A‖`.
pub const EIGEN_RESIDUAL: f64 = 1e-8;

/// Smallest admissible eigenvalue relative to `λ₁` before nonnegativity is
/// considered violated.
pub const NEGATIVE_TAIL: f64 = 1e-6;

/// `λ₁` is called simple when `(λ₁ - λ₂)/λ₁` exceeds this.
pub const SIMPLICITY: f64 = 1e-6;

/// Multiplier applied to an error estimate before a difference counts as
/// significant (discretization shifts and Monte Carlo standard errors alike).
pub const SIGNIFICANCE_FACTOR: f64 = 3.0;

/// Relative slack in the discrete Riesz rearrangement comparison.
pub const RIESZ_SURROGATE: f64 = 1e-9;

/// Shapes compared against each other must share a nominal measure to this
/// relative accuracy.
pub const NOMINAL_MEASURE: f64 = 1e-12;

/// Human-readable statement of the significance rule, written into every
/// result file header.
pub const SIGNIFICANCE_RULE: &str = "a difference is significant only if it exceeds 3x its error \
estimate (two-resolution discretization shift or Monte Carlo standard error)";
