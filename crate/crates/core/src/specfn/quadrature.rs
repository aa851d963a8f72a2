//! Gauss–Legendre based integration rules.

use std::num::NonZeroUsize;
use std::sync::{Arc, OnceLock};

use gauss_quad::legendre::GaussLegendre;

use crate::error::{domain_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// `∫₀^∞ e^{-s} f(s) ds` over geometrically graded then unit panels.
    SemiInfinite,
    /// Adaptive bisection on a finite interval.
    FiniteAdaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub node_count: usize,
    pub target_abs_tol: f64,
    pub scheme: Scheme,
}

impl QuadratureSpec {
    pub const DEFAULT_NODES: usize = 64;
    pub const DEFAULT_TOL: f64 = 1e-12;

    pub fn semi_infinite() -> Self {
        Self {
            node_count: Self::DEFAULT_NODES,
            target_abs_tol: Self::DEFAULT_TOL,
            scheme: Scheme::SemiInfinite,
        }
    }

    pub fn finite() -> Self {
        Self {
            node_count: Self::DEFAULT_NODES,
            target_abs_tol: Self::DEFAULT_TOL,
            scheme: Scheme::FiniteAdaptive,
        }
    }

    pub fn with_nodes(self, node_count: usize) -> Self {
        Self { node_count, ..self }
    }
}

const MAX_DEPTH: u32 = 40;
/// Beyond this many e-foldings the exponential weight is below 1e-34.
const TAIL: f64 = 80.0;

/// A validated rule, cheap to clone.
#[derive(Debug, Clone)]
pub struct Quadrature {
    spec: QuadratureSpec,
    rule: Arc<GaussLegendre>,
}

fn default_rule() -> Arc<GaussLegendre> {
    static RULE: OnceLock<Arc<GaussLegendre>> = OnceLock::new();
    RULE.get_or_init(|| {
        Arc::new(GaussLegendre::new(
            NonZeroUsize::new(QuadratureSpec::DEFAULT_NODES).unwrap(),
        ))
    })
    .clone()
}

impl Quadrature {
    pub fn new(spec: QuadratureSpec) -> Result<Self> {
        if spec.node_count < 8 {
            return Err(domain_err!("node_count must be at least 8, got {}", spec.node_count));
        }
        if !(spec.target_abs_tol >= 0.0) {
            return Err(domain_err!("target_abs_tol must be non-negative"));
        }
        let rule = if spec.node_count == QuadratureSpec::DEFAULT_NODES {
            default_rule()
        } else {
            Arc::new(GaussLegendre::new(NonZeroUsize::new(spec.node_count).unwrap()))
        };
        Ok(Self { spec, rule })
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    /// One fixed-order panel.
    pub fn panel<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        self.rule.integrate(a, b, f)
    }

    /// `∫_a^b f`, bisecting until the two halves agree with the whole panel.
    pub fn finite<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        if a == b {
            return 0.0;
        }
        let whole = self.panel(a, b, &mut f);
        self.refine(a, b, whole, 0, &mut f)
    }

    fn refine<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, whole: f64, depth: u32, f: &mut F) -> f64 {
        let mid = 0.5 * (a + b);
        let left = self.panel(a, mid, &mut *f);
        let right = self.panel(mid, b, &mut *f);
        let sum = left + right;
        let tol = self.spec.target_abs_tol.max(f64::EPSILON * sum.abs());
        if (sum - whole).abs() <= tol || depth >= MAX_DEPTH || mid <= a || mid >= b {
            return sum;
        }
        self.refine(a, mid, left, depth + 1, f) + self.refine(mid, b, right, depth + 1, f)
    }

    /// `∫₀^∞ e^{-s} (c + s)^a ds` for `c ≥ 0`, `a > -1`.
    ///
    /// Works in `y = c + s`. Panels grow geometrically from `y = c` (or from a
    /// cutoff near zero when `c = 0`) up to `y = 1`, then have unit length
    /// until the weight is negligible.
    pub fn exp_weighted_power(&self, c: f64, a: f64) -> f64 {
        let tol = self.spec.target_abs_tol.max(1e-300);
        let f = |y: f64| (c - y).exp() * y.powf(a);
        let mut total = 0.0;
        let mut lo = if c > 0.0 {
            c
        } else {
            // ∫₀^h y^a dy ≤ tol  ⇒  h = ((a+1) tol)^{1/(a+1)}
            let h = ((a + 1.0) * tol).powf(1.0 / (a + 1.0)).min(0.5);
            total += h.powf(a + 1.0) / (a + 1.0);
            h
        };
        while lo < 1.0 {
            let hi = (2.0 * lo).min(1.0);
            total += self.panel(lo, hi, f);
            lo = hi;
        }
        let end = lo + TAIL + a.max(0.0) * (lo + TAIL).ln();
        while lo < end {
            let hi = (lo + 2.0).min(end);
            total += self.panel(lo, hi, f);
            lo = hi;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    #[test]
    fn rejects_tiny_rules() {
        assert!(Quadrature::new(QuadratureSpec::finite().with_nodes(4)).is_err());
        assert!(Quadrature::new(QuadratureSpec::finite().with_nodes(8)).is_ok());
    }

    #[test]
    fn finite_rule_integrates_smooth_functions() {
        let q = Quadrature::new(QuadratureSpec::finite()).unwrap();
        let got = q.finite(0.0, std::f64::consts::PI, f64::sin);
        assert!((got - 2.0).abs() < 1e-14);
        let got = q.finite(0.0, 30.0, |s| (-s).exp());
        assert!((got - (1.0 - (-30f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn exp_weighted_power_reproduces_gamma() {
        let q = Quadrature::new(QuadratureSpec::semi_infinite()).unwrap();
        for &a in &[0.0, 0.5, 1.0, 1.5, 2.7, -0.5, -0.3] {
            let got = q.exp_weighted_power(0.0, a);
            let want = gamma(a + 1.0);
            assert!((got - want).abs() < 1e-10 * want, "a={a}: {got} vs {want}");
        }
    }

    #[test]
    fn exp_weighted_power_shifted() {
        // ∫₀^∞ e^{-s}(c+s)² ds = c² + 2c + 2
        let q = Quadrature::new(QuadratureSpec::semi_infinite()).unwrap();
        for &c in &[1e-9, 0.01, 0.7, 3.0, 25.0] {
            let got = q.exp_weighted_power(c, 2.0);
            let want = c * c + 2.0 * c + 2.0;
            assert!((got - want).abs() < 1e-12 * want, "c={c}");
        }
    }
}
