//! Scaled upper incomplete gamma function `e^x Γ(a, x)`.
//!
//! The scaling keeps the value O(x^{a-1}) for large `x`, so the functions
//! built on top of it never overflow or underflow on the ranges used here.
//! Three regimes:
//!
//! * `a > 0`, `x < a + 1`: `e^x Γ(a) - x^a Σ xⁿ / (a (a+1) ⋯ (a+n))`;
//! * `x ≥ max(a + 1, 1)`: Legendre continued fraction (modified Lentz);
//! * `a ≤ 0`, `x < 1`: upward recurrence `Γ(a, x) = (Γ(a+1, x) - x^a e^{-x}) / a`
//!   started from the series at `a + n ∈ (0, 1]`.

use statrs::function::gamma::gamma;

const REL_EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 100_000;

/// Precomputed evaluator of `x ↦ e^x Γ(a, x)` for a fixed order `a`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledUpperGamma {
    a: f64,
    shift: u32,
    gamma_base: f64,
}

impl ScaledUpperGamma {
    pub fn new(a: f64) -> Self {
        let shift = if a > 0.0 { 0 } else { (-a).floor() as u32 + 1 };
        let base = a + f64::from(shift);
        Self {
            a,
            shift,
            gamma_base: gamma(base),
        }
    }

    pub fn order(&self) -> f64 {
        self.a
    }

    /// `e^x Γ(a, x)` for `x ≥ 0`.
    ///
    /// Returns `+∞` at `x = 0` when `a ≤ 0` and `NaN` when the recurrence
    /// would divide by zero (non-positive integer `a`).
    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        let a = self.a;
        if x == 0.0 {
            return if a > 0.0 { self.gamma_base } else { f64::INFINITY };
        }
        if a > 0.0 && x < a + 1.0 {
            return series(a, x, self.gamma_base);
        }
        if x >= 1.0 {
            return continued_fraction(a, x);
        }
        let base = a + f64::from(self.shift);
        let mut s = series(base, x, self.gamma_base);
        for k in (0..self.shift).rev() {
            let ak = a + f64::from(k);
            if ak == 0.0 {
                return f64::NAN;
            }
            s = (s - x.powf(ak)) / ak;
        }
        s
    }
}

fn series(a: f64, x: f64, gamma_a: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    for n in 1..MAX_ITER {
        term *= x / (a + n as f64);
        sum += term;
        if term.abs() < sum.abs() * REL_EPS {
            break;
        }
    }
    x.exp() * gamma_a - x.powf(a) * sum
}

fn continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        let an = -fi * (fi - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < REL_EPS {
            break;
        }
    }
    x.powf(a) * h
}
