//! The auxiliary functions
//!
//! ```text
//! m_p(u) = p ∫₀^∞ e^{-s} (u + εs)^{p-1} ds                 (u ≥ 0)
//! k_p(u) = p ∫₀^{(u-ε)/ε} e^{-s} (u - εs)^{p-1} ds         (u ≥ ε)
//! ```
//!
//! and their first two derivatives. Differentiating under the integral gives
//! `m^{(ℓ)} = p(p-1)⋯(p-ℓ) ∫₀^∞ e^{-s}(u+εs)^{p-1-ℓ} ds`, which is a scaled
//! upper incomplete gamma function, so every order of `m` is evaluated in
//! closed form. The `k` family uses adaptive Gauss–Legendre plus the boundary
//! term picked up from the moving upper limit.

mod incgamma;
mod quadrature;

pub use incgamma::ScaledUpperGamma;
pub use quadrature::{Quadrature, QuadratureSpec, Scheme};

use crate::error::{domain_err, Error, Result};

/// `Γ(a)` for `a > 0`.
pub fn gamma_fn(a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(domain_err!("gamma_fn needs a > 0, got {a}"));
    }
    Ok(statrs::function::gamma::gamma(a))
}

/// One-shot `m_p^{(order)}(u)`; use [`AuxFunctions`] when evaluating repeatedly.
pub fn m_fn(p: f64, eps: f64, u: f64, order: u8) -> Result<f64> {
    AuxFunctions::new(p, eps)?.m(u, order)
}

/// One-shot `k_p^{(order)}(u)`.
pub fn k_fn(p: f64, eps: f64, u: f64, order: u8) -> Result<f64> {
    AuxFunctions::new(p, eps)?.k(u, order)
}

/// `p (p-1) ⋯ (p-n+1)`.
fn falling(p: f64, n: u8) -> f64 {
    (0..n).map(|j| p - f64::from(j)).product()
}

/// Upper limit in `s` past which `e^{-s}` no longer matters for `k`.
const K_CUTOFF: f64 = 60.0;

/// `m_p`, `k_p` and derivatives for fixed `(p, ε)`.
#[derive(Debug, Clone)]
pub struct AuxFunctions {
    p: f64,
    eps: f64,
    upper: [ScaledUpperGamma; 3],
    finite: Quadrature,
    semi: Quadrature,
}

impl AuxFunctions {
    pub fn new(p: f64, eps: f64) -> Result<Self> {
        Self::with_rules(p, eps, QuadratureSpec::finite(), QuadratureSpec::semi_infinite())
    }

    pub fn with_rules(p: f64, eps: f64, finite: QuadratureSpec, semi: QuadratureSpec) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(domain_err!("p must be a finite number ≥ 1, got {p}"));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(domain_err!("eps must be positive, got {eps}"));
        }
        Ok(Self {
            p,
            eps,
            upper: [0.0, 1.0, 2.0].map(|l| ScaledUpperGamma::new(p - l)),
            finite: Quadrature::new(finite)?,
            semi: Quadrature::new(semi)?,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn check_m(&self, u: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(domain_err!("derivative order {order} not supported"));
        }
        if !(u >= 0.0) || !u.is_finite() {
            return Err(domain_err!("m_p needs u ≥ 0, got {u}"));
        }
        if u == 0.0 && order >= 1 && self.p < 2.0 {
            return Err(Error::Singularity(format!(
                "m_p derivative of order {order} at u = 0 with p = {} < 2",
                self.p
            )));
        }
        Ok(falling(self.p, order + 1))
    }

    /// `m_p^{(order)}(u)`, `order ∈ {0, 1, 2}`.
    pub fn m(&self, u: f64, order: u8) -> Result<f64> {
        let c = self.check_m(u, order)?;
        if c == 0.0 {
            return Ok(0.0);
        }
        let a = self.p - 1.0 - f64::from(order);
        let s = self.upper[usize::from(order)].eval(u / self.eps);
        let v = c * self.eps.powf(a) * s;
        if !v.is_finite() {
            return Err(Error::Singularity(format!("m_p^({order}) blows up at u = {u}")));
        }
        Ok(v)
    }

    /// `m_p^{(order)}(u)` by direct quadrature of the differentiated integral.
    /// Slow; an independent route for cross-checking [`Self::m`].
    pub fn m_quadrature(&self, u: f64, order: u8) -> Result<f64> {
        let c = self.check_m(u, order)?;
        if c == 0.0 {
            return Ok(0.0);
        }
        let a = self.p - 1.0 - f64::from(order);
        if u == 0.0 && a <= -1.0 {
            return Err(Error::Singularity(format!("m_p^({order}) diverges at u = 0")));
        }
        Ok(c * self.eps.powf(a) * self.semi.exp_weighted_power(u / self.eps, a))
    }

    /// `∫₀^{(u-ε)/ε} e^{-s} (u - εs)^a ds`, truncated where the weight is negligible.
    fn k_integral(&self, u: f64, a: f64) -> f64 {
        let eps = self.eps;
        let len = (u - eps) / eps;
        if len <= 0.0 {
            return 0.0;
        }
        let end = len.min(K_CUTOFF + a.max(0.0) * (u / eps).ln().max(0.0));
        self.finite.finite(0.0, end, |s| (-s).exp() * (u - eps * s).powf(a))
    }

    /// `k_p^{(order)}(u)`, `order ∈ {0, 1, 2}`, for `u ≥ ε`.
    pub fn k(&self, u: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(domain_err!("derivative order {order} not supported"));
        }
        if !(u >= self.eps) || !u.is_finite() {
            return Err(domain_err!("k_p needs u ≥ ε = {}, got {u}", self.eps));
        }
        let (p, eps) = (self.p, self.eps);
        let c = falling(p, order + 1);
        let body = if c == 0.0 {
            0.0
        } else {
            c * self.k_integral(u, p - 1.0 - f64::from(order))
        };
        // d/du of the upper limit (u-ε)/ε is 1/ε; the integrand there is
        // e^{-(u-ε)/ε} ε^{p-1-ℓ+1} times the falling factor of order ℓ.
        let boundary = match order {
            0 => 0.0,
            1 => p * eps.powf(p - 2.0) * ((eps - u) / eps).exp(),
            _ => p * (p - 2.0) * eps.powf(p - 3.0) * ((eps - u) / eps).exp(),
        };
        Ok(body + boundary)
    }
}
