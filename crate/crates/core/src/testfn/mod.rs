//! Piecewise test functions built from constant and affine-logarithmic pieces.
//!
//! An affine-log piece is `t ↦ c0 + c1·ln(σ(t − τ))` with `σ = ±1`. After the
//! substitution `y = σ(t − τ)` every integral over the piece becomes an
//! integral of `c0 + c1 ln y` over an interval `[y_lo, y_hi] ⊂ [0, ∞)`, which
//! has elementary antiderivatives for the first two powers and reduces to an
//! incomplete gamma function for `|·|^q`.

mod bmo;
mod construct;
mod io;

pub use bmo::{bmo_norm, step_bmo_exact};
pub use construct::{
    build_psi, depth_for, homogenize, optimizer_phi0, optimizer_uminus, optimizer_uplus, random_step_fn, random_step_fn_with, transfer,
};
pub use io::{read_csv, write_csv};

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Result};
use crate::specfn::{Quadrature, QuadratureSpec, ScaledUpperGamma};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kind {
    Const { v: f64 },
    AffineLog { c0: f64, c1: f64, sigma: f64, tau: f64 },
}

/// One piece on the half-open interval `[a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    pub kind: Kind,
}

impl Piece {
    pub fn constant(a: f64, b: f64, v: f64) -> Self {
        Self { a, b, kind: Kind::Const { v } }
    }

    pub fn affine_log(a: f64, b: f64, c0: f64, c1: f64, sigma: f64, tau: f64) -> Self {
        Self {
            a,
            b,
            kind: Kind::AffineLog { c0, c1, sigma, tau },
        }
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    fn validate(&self) -> Result<()> {
        if !(self.a < self.b) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(domain_err!("piece [{}, {}) is empty or unbounded", self.a, self.b));
        }
        match self.kind {
            Kind::Const { v } if !v.is_finite() => Err(domain_err!("non-finite constant {v}")),
            Kind::Const { .. } => Ok(()),
            Kind::AffineLog { c0, c1, sigma, tau } => {
                if !c0.is_finite() || !c1.is_finite() || !tau.is_finite() {
                    return Err(domain_err!("non-finite affine-log coefficients"));
                }
                let ok = if sigma == 1.0 {
                    tau <= self.a
                } else if sigma == -1.0 {
                    tau >= self.b
                } else {
                    return Err(domain_err!("sigma must be ±1, got {sigma}"));
                };
                if ok {
                    Ok(())
                } else {
                    Err(domain_err!(
                        "log argument changes sign on [{}, {}) (sigma {sigma}, tau {tau})",
                        self.a,
                        self.b
                    ))
                }
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            Kind::Const { v } => v,
            Kind::AffineLog { c0, c1, sigma, tau } => c0 + c1 * (sigma * (t - tau)).ln(),
        }
    }

    /// `(y_lo, y_hi)` of the substituted variable `y = σ(t − τ)`.
    fn y_range(sigma: f64, tau: f64, a: f64, b: f64) -> (f64, f64) {
        let ya = (sigma * (a - tau)).max(0.0);
        let yb = (sigma * (b - tau)).max(0.0);
        (ya.min(yb), ya.max(yb))
    }

    /// `(∫ f, ∫ f²)` over `[a, t]` for `t` inside the piece.
    pub fn partial_integrals(&self, t: f64) -> (f64, f64) {
        self.partial_integrals_shifted(t, 0.0)
    }

    /// As [`Self::partial_integrals`] for `f − shift`.
    pub fn partial_integrals_shifted(&self, t: f64, shift: f64) -> (f64, f64) {
        let t = t.clamp(self.a, self.b);
        match self.kind {
            Kind::Const { v } => {
                let l = t - self.a;
                let v = v - shift;
                (v * l, v * v * l)
            }
            Kind::AffineLog { c0, c1, sigma, tau } => {
                let c0 = c0 - shift;
                let (y0, y1) = (sigma * (self.a - tau), sigma * (t - tau));
                let (f0, g0) = log_primitives(c0, c1, y0.max(0.0));
                let (f1, g1) = log_primitives(c0, c1, y1.max(0.0));
                (sigma * (f1 - f0), sigma * (g1 - g0))
            }
        }
    }

    /// `∫_a^b |f|^q`.
    pub fn abs_pow_integral(&self, q: f64) -> f64 {
        match self.kind {
            Kind::Const { v } => v.abs().powf(q) * self.len(),
            Kind::AffineLog { c0, c1, sigma, tau } => {
                let (lo, hi) = Self::y_range(sigma, tau, self.a, self.b);
                if hi == 0.0 {
                    return 0.0;
                }
                // y = hi·e^{-s}: ∫ |c0 + c1 ln y|^q dy = hi ∫₀^S e^{-s} |α - c1 s|^q ds
                let alpha = c0 + c1 * hi.ln();
                let s_max = if lo > 0.0 { (hi / lo).ln() } else { f64::INFINITY };
                hi * exp_weighted_abs_linear(q, alpha, -c1, s_max)
            }
        }
    }

    /// `|{t ∈ [a, b) : f(t) > c}|`.
    pub fn measure_above(&self, c: f64) -> f64 {
        match self.kind {
            Kind::Const { v } => {
                if v > c {
                    self.len()
                } else {
                    0.0
                }
            }
            Kind::AffineLog { c0, c1, sigma, tau } => {
                let (lo, hi) = Self::y_range(sigma, tau, self.a, self.b);
                if c1 == 0.0 {
                    return if c0 > c { hi - lo } else { 0.0 };
                }
                let y_star = ((c - c0) / c1).exp();
                if c1 > 0.0 {
                    (hi - y_star.max(lo)).max(0.0)
                } else {
                    (y_star.min(hi) - lo).max(0.0)
                }
            }
        }
    }
}

/// Antiderivatives of `c0 + c1 ln y` and of its square, both vanishing at `y = 0`.
fn log_primitives(c0: f64, c1: f64, y: f64) -> (f64, f64) {
    if y == 0.0 {
        return (0.0, 0.0);
    }
    let l = y.ln();
    let int_ln = y * l - y;
    let int_ln2 = y * l * l - 2.0 * y * l + 2.0 * y;
    (c0 * y + c1 * int_ln, c0 * c0 * y + 2.0 * c0 * c1 * int_ln + c1 * c1 * int_ln2)
}

/// `∫₀^S e^{-s} |α + βs|^q ds`, `S` possibly infinite.
///
/// The integral is split at the zero of `α + βs`; an unbounded tail is an
/// upper incomplete gamma function, bounded pieces go to adaptive quadrature.
pub fn exp_weighted_abs_linear(q: f64, alpha: f64, beta: f64, s_max: f64) -> f64 {
    if beta == 0.0 {
        return alpha.abs().powf(q) * -(-s_max).exp_m1();
    }
    let s0 = -alpha / beta;
    let quad = Quadrature::new(QuadratureSpec::finite()).expect("default rule is valid");
    let finite = |lo: f64, hi: f64| quad.finite(lo, hi, |s| (-s).exp() * (alpha + beta * s).abs().powf(q));
    let tail = |lo: f64| {
        // e^{-lo} |β|^q e^{v} Γ(q+1, v), v = lo - s0 ≥ 0
        let v = (lo - s0).max(0.0);
        (-lo).exp() * beta.abs().powf(q) * ScaledUpperGamma::new(q + 1.0).eval(v)
    };
    let split = s0 > 0.0 && s0 < s_max;
    match (split, s_max.is_finite()) {
        (true, true) => finite(0.0, s0) + finite(s0, s_max),
        (true, false) => finite(0.0, s0) + tail(s0),
        (false, true) => finite(0.0, s_max),
        (false, false) => tail(0.0),
    }
}

/// A function on `[a, b)` given by contiguous pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFn {
    pieces: Vec<Piece>,
}

impl PiecewiseFn {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(domain_err!("a piecewise function needs at least one piece"));
        }
        for p in &pieces {
            p.validate()?;
        }
        for w in pieces.windows(2) {
            if w[0].b != w[1].a {
                return Err(domain_err!("pieces do not abut: {} vs {}", w[0].b, w[1].a));
            }
        }
        Ok(Self { pieces })
    }

    pub fn constant(a: f64, b: f64, v: f64) -> Result<Self> {
        Self::new(vec![Piece::constant(a, b, v)])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.pieces[0].a, self.pieces[self.pieces.len() - 1].b)
    }

    pub fn length(&self) -> f64 {
        let (a, b) = self.domain();
        b - a
    }

    fn piece_index(&self, t: f64) -> usize {
        self.pieces.partition_point(|p| p.b <= t).min(self.pieces.len() - 1)
    }

    /// Value at `t`, or `None` outside the domain.
    pub fn value(&self, t: f64) -> Option<f64> {
        let (a, b) = self.domain();
        if t < a || t >= b {
            return None;
        }
        Some(self.pieces[self.piece_index(t)].value(t))
    }

    /// Prefix integrals `(∫_a^t f, ∫_a^t f²)` at increasing `nodes`.
    pub fn prefix_integrals(&self, nodes: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.prefix_integrals_shifted(nodes, 0.0)
    }

    /// Prefix integrals of `f − shift` and `(f − shift)²`.
    pub fn prefix_integrals_shifted(&self, nodes: &[f64], shift: f64) -> (Vec<f64>, Vec<f64>) {
        let mut s1 = Vec::with_capacity(nodes.len());
        let mut s2 = Vec::with_capacity(nodes.len());
        let (mut acc1, mut acc2) = (0.0, 0.0);
        let mut idx = 0;
        for &t in nodes {
            while idx < self.pieces.len() && self.pieces[idx].b <= t {
                let (i1, i2) = self.pieces[idx].partial_integrals_shifted(self.pieces[idx].b, shift);
                acc1 += i1;
                acc2 += i2;
                idx += 1;
            }
            let (p1, p2) = match self.pieces.get(idx) {
                Some(p) if t > p.a => p.partial_integrals_shifted(t, shift),
                _ => (0.0, 0.0),
            };
            s1.push(acc1 + p1);
            s2.push(acc2 + p2);
        }
        (s1, s2)
    }

    pub fn integral(&self) -> f64 {
        self.pieces.iter().map(|p| p.partial_integrals(p.b).0).sum()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.length()
    }

    pub fn second_moment(&self) -> f64 {
        self.pieces.iter().map(|p| p.partial_integrals(p.b).1).sum::<f64>() / self.length()
    }

    /// `∫_I |f|^q` (not normalized).
    pub fn abs_pow_integral(&self, q: f64) -> f64 {
        self.pieces.iter().map(|p| p.abs_pow_integral(q)).sum()
    }

    /// `⟨|f|^q⟩_I`.
    pub fn moments(&self, q: f64) -> f64 {
        self.abs_pow_integral(q) / self.length()
    }

    /// `|{t ∈ I : f(t) > c}|`.
    pub fn distribution(&self, c: f64) -> f64 {
        self.pieces.iter().map(|p| p.measure_above(c)).sum()
    }

    /// `(⟨f⟩, ⟨f²⟩, ⟨|f|^p⟩)`.
    pub fn bellman_point(&self, p: f64) -> crate::domain::Point3 {
        crate::domain::Point3::new(self.mean(), self.second_moment(), self.moments(p))
    }
}

pub fn moments(f: &PiecewiseFn, q: f64) -> f64 {
    f.moments(q)
}

pub fn distribution(f: &PiecewiseFn, c: f64) -> f64 {
    f.distribution(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_pieces() {
        assert!(PiecewiseFn::new(vec![]).is_err());
        assert!(PiecewiseFn::new(vec![Piece::constant(0.0, 1.0, 1.0), Piece::constant(1.5, 2.0, 0.0)]).is_err());
        assert!(PiecewiseFn::new(vec![Piece::affine_log(0.0, 1.0, 0.0, 1.0, 1.0, 0.5)]).is_err());
        assert!(PiecewiseFn::new(vec![Piece::affine_log(0.0, 1.0, 0.0, 1.0, -1.0, 0.5)]).is_err());
        assert!(PiecewiseFn::new(vec![Piece::affine_log(0.0, 1.0, 0.0, 1.0, -1.0, 1.0)]).is_ok());
    }

    #[test]
    fn constant_moments() {
        let f = PiecewiseFn::constant(-1.0, 3.0, -1.5).unwrap();
        for &q in &[1.0, 2.0, 3.3] {
            assert_relative_eq!(f.moments(q), 1.5f64.powf(q), max_relative = 1e-15);
        }
        assert_eq!(f.mean(), -1.5);
        assert_eq!(f.distribution(-2.0), 4.0);
        assert_eq!(f.distribution(-1.5), 0.0);
    }

    #[test]
    fn log_moments_are_gamma_values() {
        // ∫₀¹ |ln t|^q dt = Γ(q+1)
        let f = PiecewiseFn::new(vec![Piece::affine_log(0.0, 1.0, 0.0, -1.0, 1.0, 0.0)]).unwrap();
        assert_relative_eq!(f.moments(1.0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(f.moments(2.0), 2.0, max_relative = 1e-14);
        assert_relative_eq!(f.moments(2.5), 3.323_350_970_447_843, max_relative = 1e-13);
        assert_relative_eq!(f.mean(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(f.second_moment(), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn sign_change_inside_a_piece() {
        // ∫₁^e² |ln t - 1| dt, split at t = e
        let e = std::f64::consts::E;
        let f = PiecewiseFn::new(vec![Piece::affine_log(1.0, e * e, -1.0, 1.0, 1.0, 0.0)]).unwrap();
        // ∫ (ln t - 1) = t ln t - 2t
        let prim = |t: f64| t * t.ln() - 2.0 * t;
        let want = (prim(1.0) - prim(e)).abs() + (prim(e * e) - prim(e)).abs();
        assert_relative_eq!(f.abs_pow_integral(1.0), want, max_relative = 1e-12);
    }

    #[test]
    fn prefix_integrals_match_totals() {
        let f = PiecewiseFn::new(vec![
            Piece::affine_log(-2.0, -1.0, 0.0, 1.0, 1.0, -2.0),
            Piece::constant(-1.0, 1.0, 0.0),
            Piece::affine_log(1.0, 2.0, 0.0, -1.0, -1.0, 2.0),
        ])
        .unwrap();
        let (s1, s2) = f.prefix_integrals(&[-2.0, -1.5, -1.0, 0.0, 1.0, 1.7, 2.0]);
        assert_eq!(s1[0], 0.0);
        assert!(s1[6].abs() < 1e-15);
        assert_relative_eq!(s2[6], 4.0, max_relative = 1e-14);
        // ∫_{-2}^{-1.5} ln(t+2) dt = y ln y - y at y = 1/2
        assert_relative_eq!(s1[1], 0.5 * 0.5f64.ln() - 0.5, max_relative = 1e-14);
        assert_relative_eq!(s1[2], s1[3], max_relative = 1e-15);
    }

    #[test]
    fn distribution_of_log_piece() {
        // -ln t on (0,1]: |{-ln t > c}| = e^{-c} for c ≥ 0
        let f = PiecewiseFn::new(vec![Piece::affine_log(0.0, 1.0, 0.0, -1.0, 1.0, 0.0)]).unwrap();
        for &c in &[0.0, 0.5, 3.0] {
            assert_relative_eq!(f.distribution(c), (-c).exp(), max_relative = 1e-14);
        }
        assert_eq!(f.distribution(-1.0), 1.0);
    }
}
