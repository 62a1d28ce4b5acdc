//! The degenerate weight `|x|^alpha` and its regularization inside `B_eps`.
//!
//! For `|x| >= eps` the regularized weight equals `|x|^alpha`; inside the ball
//! it is `(3/4 |x|^2 + 1/4 eps^2)^(alpha/2)`. With `eps = 0` the exact
//! degenerate weight is used everywhere, so downstream code never has to
//! distinguish the two cases.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Weight parameters. `domain_bound` is `m = sup |x| + 1` over the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    alpha: f64,
    epsilon: f64,
    dimension: usize,
    domain_bound: f64,
}

/// Constants of the weighted Hardy inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyConstants {
    /// `2 / (N - 2 + alpha)`: bounds `||x|^(alpha/2 - 1) u|` by `||x|^(alpha/2) grad u|`.
    pub gradient_form: f64,
    /// `2 m^(1 - alpha/2) / (N - 2 + alpha)`: bounds `|u|_{L2}`.
    pub l2_form: f64,
}

impl WeightSpec {
    /// Builds a weight for a domain contained in the ball of radius `domain_radius`.
    pub fn new(alpha: f64, epsilon: f64, dimension: usize, domain_radius: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid(format!("alpha must lie in (0,2), got {alpha}")));
        }
        if dimension < 2 {
            return Err(invalid(format!("dimension must be >= 2, got {dimension}")));
        }
        if !(domain_radius > 0.0 && domain_radius.is_finite()) {
            return Err(invalid(format!(
                "domain radius must be positive, got {domain_radius}"
            )));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if epsilon > 0.0 && epsilon >= domain_radius {
            return Err(invalid(format!(
                "epsilon {epsilon} must be smaller than the domain radius {domain_radius}"
            )));
        }
        Ok(Self {
            alpha,
            epsilon,
            dimension,
            domain_bound: domain_radius + 1.0,
        })
    }

    /// Exact degenerate weight in the plane.
    pub fn degenerate(alpha: f64, domain_radius: f64) -> Result<Self> {
        Self::new(alpha, 0.0, 2, domain_radius)
    }

    /// Same weight with a different regularization radius.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.alpha, epsilon, self.dimension, self.domain_radius())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// `m = sup |x| + 1`.
    pub fn domain_bound(&self) -> f64 {
        self.domain_bound
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_bound - 1.0
    }

    pub fn is_regularized(&self) -> bool {
        self.epsilon > 0.0
    }

    /// Weight as a function of `|x|`. The seam `|x| = eps` takes the inner branch.
    #[inline]
    pub fn value_at_radius(&self, r: f64) -> f64 {
        if self.epsilon > 0.0 && r <= self.epsilon {
            self.inner_base(r).powf(0.5 * self.alpha)
        } else {
            r.powf(self.alpha)
        }
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        self.value_at_radius(norm(x))
    }

    /// `3/4 r^2 + 1/4 eps^2`, the base of the inner branch.
    #[inline]
    pub fn inner_base(&self, r: f64) -> f64 {
        0.75 * r * r + 0.25 * self.epsilon * self.epsilon
    }

    /// Gradient of the weight, for diagnostics only (the weak form never
    /// differentiates the weight). Not continuous across `|x| = eps`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = norm(x);
        if self.epsilon > 0.0 && r <= self.epsilon {
            Ok(self.inner_gradient(x))
        } else {
            if r == 0.0 && self.alpha < 1.0 {
                return Err(Error::Domain(format!(
                    "gradient of |x|^{} is unbounded at the origin",
                    self.alpha
                )));
            }
            Ok(self.outer_gradient(x))
        }
    }

    /// `alpha |x|^(alpha-2) x`, the formula valid for `|x| > eps`.
    pub fn outer_gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        if r == 0.0 {
            // alpha >= 1: the limit is 0 for alpha > 1 and direction-dependent at alpha = 1
            return vec![0.0; x.len()];
        }
        let s = self.alpha * r.powf(self.alpha - 2.0);
        x.iter().map(|&xi| s * xi).collect()
    }

    /// `alpha (3/4|x|^2 + 1/4 eps^2)^(alpha/2 - 1) * 3/4 x`, valid for `|x| < eps`.
    pub fn inner_gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        let s = self.alpha * self.inner_base(r).powf(0.5 * self.alpha - 1.0) * 0.75;
        x.iter().map(|&xi| s * xi).collect()
    }

    pub fn hardy_constants(&self) -> HardyConstants {
        let denom = self.dimension as f64 - 2.0 + self.alpha;
        HardyConstants {
            gradient_form: 2.0 / denom,
            l2_form: 2.0 * self.domain_bound.powf(1.0 - 0.5 * self.alpha) / denom,
        }
    }

    /// Constants for the regularized weight: `2/(N+alpha-2)` bounds
    /// `|w_eps^(1/2 - 1/alpha) u|` and `2m/(N+alpha-2)` bounds `|u|_{L2(w_eps)}`,
    /// both against `|grad u|_{L2(w_eps)}`.
    pub fn regularized_hardy_constants(&self) -> HardyConstants {
        let denom = self.dimension as f64 - 2.0 + self.alpha;
        HardyConstants {
            gradient_form: 2.0 / denom,
            l2_form: 2.0 * self.domain_bound / denom,
        }
    }

    /// `w_eps^(1 - 2/alpha)` for the regularized Hardy inequality; reduces to
    /// `|x|^(alpha - 2)` outside `B_eps`.
    #[inline]
    pub fn hardy_factor_at_radius(&self, r: f64) -> f64 {
        if self.epsilon > 0.0 && r <= self.epsilon {
            self.inner_base(r).powf(0.5 * self.alpha - 1.0)
        } else {
            r.powf(self.alpha - 2.0)
        }
    }
}

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn w(alpha: f64, eps: f64) -> WeightSpec {
        WeightSpec::new(alpha, eps, 2, 1.0).unwrap()
    }

    #[test]
    fn values_at_the_origin() {
        assert_eq!(w(1.0, 0.0).value(&[0.0, 0.0]), 0.0);
        assert_relative_eq!(w(1.0, 0.1).value(&[0.0, 0.0]), 0.05, max_relative = 1e-15);
    }

    #[test]
    fn seam_is_continuous() {
        let spec = w(1.0, 0.1);
        let inner = spec.inner_base(0.1).powf(0.5);
        let outer = 0.1_f64.powf(1.0);
        assert_relative_eq!(inner, 0.1, max_relative = 1e-15);
        assert_relative_eq!(spec.value(&[0.1, 0.0]), outer, max_relative = 1e-15);
    }

    #[test]
    fn gradient_branches() {
        let g = w(1.0, 0.0).gradient(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(g[0], 1.0);
        assert_eq!(g[1], 0.0);
        assert_eq!(w(1.0, 0.1).gradient(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

        let spec = w(1.0, 0.1);
        let x = [0.1, 0.0];
        assert_relative_eq!(spec.outer_gradient(&x)[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(spec.inner_gradient(&x)[0], 0.75, max_relative = 1e-14);
        // seam takes the inner branch
        assert_relative_eq!(spec.gradient(&x).unwrap()[0], 0.75, max_relative = 1e-14);
    }

    #[test]
    fn gradient_domain_error_at_origin() {
        let spec = w(0.5, 0.0);
        assert!(matches!(spec.gradient(&[0.0, 0.0]), Err(Error::Domain(_))));
        assert!(w(0.5, 0.1).gradient(&[0.0, 0.0]).is_ok());
    }

    #[test]
    fn hardy_constants_examples() {
        let c = WeightSpec::new(1.0, 0.0, 2, 1.0).unwrap().hardy_constants();
        assert_relative_eq!(c.gradient_form, 2.0);
        assert_relative_eq!(c.l2_form, 2.0 * 2f64.sqrt(), max_relative = 1e-15);
        let c = WeightSpec::new(0.5, 0.0, 3, 1.0).unwrap().hardy_constants();
        assert_relative_eq!(c.gradient_form, 4.0 / 3.0, max_relative = 1e-15);
        let c = WeightSpec::new(2.0 - 1e-12, 0.0, 2, 1.0).unwrap().hardy_constants();
        assert_relative_eq!(c.gradient_form, 1.0, max_relative = 1e-11);
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(WeightSpec::new(0.0, 0.0, 2, 1.0).is_err());
        assert!(WeightSpec::new(2.0, 0.0, 2, 1.0).is_err());
        assert!(WeightSpec::new(2.5, 0.0, 2, 1.0).is_err());
        assert!(WeightSpec::new(1.0, -0.1, 2, 1.0).is_err());
        assert!(WeightSpec::new(1.0, 1.0, 2, 1.0).is_err());
        assert!(WeightSpec::new(1.0, 0.0, 1, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn regularized_dominates_degenerate(alpha in 0.01f64..1.99, eps in 1e-3f64..0.9, r in 0.0f64..1.0) {
            let a = w(alpha, eps).value_at_radius(r);
            let b = w(alpha, 0.0).value_at_radius(r);
            prop_assert!(a >= b);
        }

        #[test]
        fn bounds_inside_ball(alpha in 0.01f64..1.99, eps in 1e-3f64..0.9, t in 0.0f64..=1.0) {
            let spec = w(alpha, eps);
            let v = spec.value_at_radius(t * eps);
            let lo = (eps / 2.0).powf(alpha);
            let hi = eps.powf(alpha);
            prop_assert!(v >= lo * (1.0 - 1e-14) && v <= hi * (1.0 + 1e-14));
        }

        #[test]
        fn radially_nondecreasing(alpha in 0.01f64..1.99, eps in 0.0f64..0.9, r1 in 0.0f64..1.0, r2 in 0.0f64..1.0) {
            let spec = w(alpha, eps);
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(spec.value_at_radius(lo) <= spec.value_at_radius(hi));
        }

        #[test]
        fn seam_within_four_ulp(alpha in 0.01f64..1.99, eps in 1e-3f64..0.9) {
            let spec = w(alpha, eps);
            let inner = spec.value_at_radius(eps);
            let outer = eps.powf(alpha);
            let ulp = f64::EPSILON * outer;
            prop_assert!((inner - outer).abs() <= 4.0 * ulp);
        }

        #[test]
        fn pointwise_convergence(alpha in 0.01f64..1.99, r in 0.01f64..0.99, k in 1u32..400) {
            let eps = 1.0 / k as f64;
            prop_assume!(eps < r);
            prop_assert_eq!(w(alpha, eps).value_at_radius(r), r.powf(alpha));
        }
    }
}
