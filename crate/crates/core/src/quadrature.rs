//! Composite Gauss–Legendre rules on geometrically graded panels.
//!
//! Every panel is integrated twice (degree `n` and `n + 8`); the finer value
//! is kept and the difference is accumulated as the error estimate.

use std::num::NonZeroUsize;
use std::ops::{Add, AddAssign};

use gauss_quad::legendre::GaussLegendre;

/// Halvings between the panel nearest an endpoint singularity and the full
/// interval length.
pub const DEFAULT_LEVELS: u32 = 46;

/// A quadrature value with an absolute error estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Self {
            value,
            error: error.abs(),
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self::new(self.value * factor, self.error * factor.abs())
    }
}

impl Add for Estimate {
    type Output = Estimate;

    fn add(self, rhs: Estimate) -> Estimate {
        Estimate::new(self.value + rhs.value, self.error + rhs.error)
    }
}

impl AddAssign for Estimate {
    fn add_assign(&mut self, rhs: Estimate) {
        *self = *self + rhs;
    }
}

/// Leading behaviour `coefficient · |t - s|^exponent` of an integrand at an
/// endpoint `s`, used to integrate the innermost panel in closed form.
#[derive(Debug, Clone, Copy)]
pub struct PowerLawEnd {
    pub exponent: f64,
    pub coefficient: f64,
}

pub struct PanelRule {
    coarse: GaussLegendre,
    fine: GaussLegendre,
}

impl PanelRule {
    /// Panels use `points` and `points + 8` Gauss–Legendre nodes.
    pub fn new(points: usize) -> Self {
        let points = points.max(2);
        Self {
            coarse: GaussLegendre::new(NonZeroUsize::new(points).unwrap()),
            fine: GaussLegendre::new(NonZeroUsize::new(points + 8).unwrap()),
        }
    }

    pub fn panel<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: &F) -> Estimate {
        let coarse = self.coarse.integrate(a, b, f);
        let fine = self.fine.integrate(a, b, f);
        Estimate::new(fine, fine - coarse)
    }

    /// Single-rule panel without an error estimate, for inner integrals whose
    /// accuracy is checked by the enclosing rule.
    pub fn panel_fast<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: &F) -> f64 {
        self.coarse.integrate(a, b, f)
    }

    /// Integral of `f` over the interval between `s` and `end` (either order),
    /// where `f ~ near.coefficient · |t - s|^near.exponent` as `t → s`. Panels are
    /// `[s + δ 2^k, s + δ 2^{k+1}]` with `δ = (end - s) 2^{-levels}`; the
    /// innermost panel `[s, s + δ]` is integrated from the power law.
    pub fn graded<F: Fn(f64) -> f64>(
        &self,
        s: f64,
        end: f64,
        near: PowerLawEnd,
        levels: u32,
        f: &F,
    ) -> Estimate {
        let length = end - s;
        let delta = length * 0.5f64.powi(levels as i32);
        let e1 = near.exponent + 1.0;
        let inner = near.coefficient * delta.abs().powf(e1) / e1;
        // the smooth factor varies by O(δ/L) over the innermost panel
        let mut total = Estimate::new(inner, inner * 0.5f64.powi(levels as i32) * 4.0);
        let mut lo = delta;
        for _ in 0..levels {
            let hi = 2.0 * lo;
            let (a, b) = if length > 0.0 {
                (s + lo, s + hi)
            } else {
                (s + hi, s + lo)
            };
            total += self.panel(a, b, f);
            lo = hi;
        }
        total
    }

    /// `∫_a^b f` over panels growing geometrically away from `a`, the first of
    /// width `first`. Suited to smooth integrands that decay like a power.
    pub fn geometric<F: Fn(f64) -> f64>(&self, a: f64, b: f64, first: f64, f: &F) -> Estimate {
        let mut total = Estimate::default();
        let mut lo = a;
        let mut width = first.min(b - a);
        while lo < b {
            let hi = (lo + width).min(b);
            total += self.panel(lo, hi, f);
            lo = hi;
            width *= 2.0;
        }
        total
    }

    /// Single-rule version of [`PanelRule::graded`] for a smooth bump of
    /// width `scale` sitting at `a`, integrated out to `b`.
    pub fn bump_fast<F: Fn(f64) -> f64>(&self, a: f64, b: f64, scale: f64, f: &F) -> f64 {
        let mut total = 0.0;
        let mut lo = a;
        let mut width = scale.max(f64::MIN_POSITIVE).min(b - a);
        while lo < b {
            let hi = (lo + width).min(b);
            total += self.panel_fast(lo, hi, f);
            lo = hi;
            width *= 2.0;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_panel_is_exact() {
        let rule = PanelRule::new(8);
        let e = rule.panel(0.0, 2.0, &|x: f64| x.powi(5) - 3.0 * x);
        assert!((e.value - (64.0 / 6.0 * 1.0 - 6.0)).abs() < 1e-13);
        assert!(e.error < 1e-12);
    }

    #[test]
    fn graded_handles_endpoint_power_singularity() {
        // ∫_0^1 t^{-0.7} (1 + t) dt = 1/0.3 + 1/1.3
        let rule = PanelRule::new(16);
        let near = PowerLawEnd {
            exponent: -0.7,
            coefficient: 1.0,
        };
        let f = |t: f64| t.powf(-0.7) * (1.0 + t);
        let e = rule.graded(0.0, 1.0, near, DEFAULT_LEVELS, &f);
        let exact = 1.0 / 0.3 + 1.0 / 1.3;
        assert!((e.value - exact).abs() < 1e-11, "{} vs {exact}", e.value);
        assert!(e.error < 1e-9);
    }

    #[test]
    fn graded_runs_leftwards() {
        // ∫_{-1}^{0} |t|^{-0.5} dt = 2, with the singularity at the right end
        let rule = PanelRule::new(16);
        let near = PowerLawEnd {
            exponent: -0.5,
            coefficient: 1.0,
        };
        let e = rule.graded(0.0, -1.0, near, DEFAULT_LEVELS, &|t: f64| t.abs().powf(-0.5));
        assert!((e.value - 2.0).abs() < 1e-11, "{}", e.value);
    }

    #[test]
    fn geometric_power_decay() {
        // ∫_1^1000 t^{-2} dt = 1 - 1e-3
        let rule = PanelRule::new(16);
        let e = rule.geometric(1.0, 1000.0, 0.5, &|t: f64| t.powi(-2));
        assert!((e.value - 0.999).abs() < 1e-13);
    }
}
