//! Geometry of the parabolic strip `Ω²_ε = {x1² ≤ x2 ≤ x1² + ε²}` and of the
//! three-dimensional domain `Ω³_ε` sitting between the two boundary Bellman
//! functions `A_{m_p}` and `A_{k_p}`.
//!
//! Every point of `Ω²_ε` lies on exactly one segment `S₊(u)` from `(u, u²)` to
//! the tangency point `(u+ε, (u+ε)²+ε²)` and on exactly one `S₋(u)` ending at
//! `(u-ε, (u-ε)²+ε²)`. Writing `D = x2 - x1²` and `w = √(ε² - D)`, the two
//! parameters are `u₊ = x1 - ε + w` and `u₋ = x1 + ε - w`.

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Error, Result};
use crate::specfn::AuxFunctions;

/// Absolute slack on every membership comparison.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `(r-2)(p-r) < 0`: the function is the supremum of `⟨|φ|^r⟩`.
    Max,
    /// `(r-2)(p-r) > 0`: the function is the infimum.
    Min,
    /// `r = p` or `r = 2`.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    p: f64,
    r: f64,
    eps: f64,
    regime: Regime,
}

impl Params {
    pub fn new(p: f64, r: f64, eps: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(domain_err!("p must be a finite number ≥ 1, got {p}"));
        }
        if !(r >= 1.0) || !r.is_finite() {
            return Err(domain_err!("r must be a finite number ≥ 1, got {r}"));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(domain_err!("eps must be positive, got {eps}"));
        }
        if p == 2.0 {
            return Err(domain_err!("p = 2 makes x3 duplicate x2; use the two-dimensional functions"));
        }
        let s = (r - 2.0) * (p - r);
        let regime = if s < 0.0 {
            Regime::Max
        } else if s > 0.0 {
            Regime::Min
        } else {
            Regime::Degenerate
        };
        Ok(Self { p, r, eps, regime })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl Point3 {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn xy(&self) -> Point2 {
        Point2::new(self.x1, self.x2)
    }

    pub fn mirrored(&self) -> Self {
        Self::new(-self.x1, self.x2, self.x3)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    XiZero,
    XiPlus,
    XiMinus,
    Skeleton,
    Outside,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::XiZero => "XiZero",
            Region::XiPlus => "XiPlus",
            Region::XiMinus => "XiMinus",
            Region::Skeleton => "Skeleton",
            Region::Outside => "Outside",
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Upper,
    Lower,
}

pub fn omega2_contains(eps: f64, pt: Point2) -> bool {
    let d = pt.x2 - pt.x1 * pt.x1;
    d >= -MEMBERSHIP_TOL && d <= eps * eps + MEMBERSHIP_TOL
}

/// `(D, w)` with both clamped into range; `None` outside `Ω²_ε`.
fn strip_coords(eps: f64, pt: Point2) -> Option<(f64, f64)> {
    if !pt.x1.is_finite() || !pt.x2.is_finite() || !omega2_contains(eps, pt) {
        return None;
    }
    let d = (pt.x2 - pt.x1 * pt.x1).clamp(0.0, eps * eps);
    Some((d, (eps * eps - d).sqrt()))
}

/// `(u₊, u₋)` of the segments through `pt`.
pub fn tangent_params(eps: f64, pt: Point2) -> Result<(f64, f64)> {
    let (d, w) = strip_coords(eps, pt).ok_or_else(|| outside2(eps, pt))?;
    // ε - w = D / (ε + w) avoids cancellation near the lower parabola
    let gap = d / (eps + w);
    Ok((pt.x1 - gap, pt.x1 + gap))
}

fn outside2(eps: f64, pt: Point2) -> Error {
    domain_err!("({}, {}) is outside Ω² for ε = {eps}", pt.x1, pt.x2)
}

/// The boundary machinery for one `(p, ε)`: `m_p`, `k_p` and the constant
/// `m_p(ε)` used by the plane separating the regions.
#[derive(Debug, Clone)]
pub struct Geometry {
    aux: AuxFunctions,
    m_at_eps: f64,
}

impl Geometry {
    pub fn new(p: f64, eps: f64) -> Result<Self> {
        let aux = AuxFunctions::new(p, eps)?;
        let m_at_eps = aux.m(eps, 0)?;
        Ok(Self { aux, m_at_eps })
    }

    pub fn aux(&self) -> &AuxFunctions {
        &self.aux
    }

    pub fn p(&self) -> f64 {
        self.aux.p()
    }

    pub fn eps(&self) -> f64 {
        self.aux.eps()
    }

    pub fn a_m(&self, pt: Point2) -> Result<f64> {
        let (p, eps) = (self.p(), self.eps());
        let (u_plus, _) = tangent_params(eps, Point2::new(pt.x1.abs(), pt.x2))?;
        let x1 = pt.x1.abs();
        if u_plus >= 0.0 {
            Ok(u_plus.powf(p) + self.aux.m(u_plus, 0)? * (x1 - u_plus))
        } else {
            Ok(self.aux.m(0.0, 0)? * pt.x2 / (2.0 * eps))
        }
    }

    pub fn a_k(&self, pt: Point2) -> Result<f64> {
        let (p, eps) = (self.p(), self.eps());
        let (_, u_minus) = tangent_params(eps, Point2::new(pt.x1.abs(), pt.x2))?;
        if pt.x2 <= eps * eps {
            return Ok(pt.x2.max(0.0).powf(p / 2.0));
        }
        let u = u_minus.max(eps);
        Ok(u.powf(p) + self.aux.k(u, 0)? * (pt.x1.abs() - u))
    }

    /// `(B⁻_p, B⁺_p)`: the lower and upper envelopes of `x3` over `(x1, x2)`.
    pub fn envelopes(&self, pt: Point2) -> Result<(f64, f64)> {
        let am = self.a_m(pt)?;
        let ak = self.a_k(pt)?;
        Ok(if self.p() >= 2.0 { (ak, am) } else { (am, ak) })
    }

    pub fn bellman2d(&self, pt: Point2, side: Side) -> Result<f64> {
        let (lo, hi) = self.envelopes(pt)?;
        Ok(match side {
            Side::Upper => hi,
            Side::Lower => lo,
        })
    }

    pub fn omega3_contains(&self, x: Point3) -> bool {
        if !x.x3.is_finite() {
            return false;
        }
        match self.envelopes(x.xy()) {
            Ok((lo, hi)) => x.x3 >= lo - MEMBERSHIP_TOL && x.x3 <= hi + MEMBERSHIP_TOL,
            Err(_) => false,
        }
    }

    /// `x3` on the plane `L_ε` shared by the two leaf families.
    pub fn separating_plane(&self, x2: f64) -> f64 {
        let eps = self.eps();
        eps.powf(self.p()) + (x2 - eps * eps) * self.m_at_eps / (4.0 * eps)
    }

    /// Region of a point already known to lie in `Ω³_ε`.
    pub fn classify_unchecked(&self, x: Point3) -> Region {
        let (p, eps) = (self.p(), self.eps());
        let d = x.x2 - x.x1 * x.x1;
        if d <= MEMBERSHIP_TOL * x.x2.max(1.0) {
            return Region::Skeleton;
        }
        let a = x.x1.abs();
        let in_band = a <= 2.0 * eps + MEMBERSHIP_TOL && x.x2 >= 4.0 * eps * a - 3.0 * eps * eps - MEMBERSHIP_TOL;
        if in_band && (p - 2.0) * (x.x3 - self.separating_plane(x.x2)) >= -MEMBERSHIP_TOL * x.x3.abs().max(1.0) {
            Region::XiZero
        } else if x.x1 > 0.0 {
            Region::XiPlus
        } else {
            Region::XiMinus
        }
    }

    pub fn classify(&self, x: Point3) -> Result<Region> {
        if !self.omega3_contains(x) {
            return Err(domain_err!("({}, {}, {}) is outside Ω³", x.x1, x.x2, x.x3));
        }
        Ok(self.classify_unchecked(x))
    }

    /// Like [`Self::classify`] but maps points outside `Ω³_ε` to `Region::Outside`.
    pub fn region_of(&self, x: Point3) -> Region {
        self.classify(x).unwrap_or(Region::Outside)
    }
}

pub fn a_m(p: f64, eps: f64, pt: Point2) -> Result<f64> {
    Geometry::new(p, eps)?.a_m(pt)
}

pub fn a_k(p: f64, eps: f64, pt: Point2) -> Result<f64> {
    Geometry::new(p, eps)?.a_k(pt)
}

pub fn bellman2d(params: &Params, pt: Point2, side: Side) -> Result<f64> {
    Geometry::new(params.p(), params.eps())?.bellman2d(pt, side)
}

pub fn omega3_contains(params: &Params, x: Point3) -> bool {
    Geometry::new(params.p(), params.eps()).is_ok_and(|g| g.omega3_contains(x))
}

pub fn classify(params: &Params, x: Point3) -> Result<Region> {
    Geometry::new(params.p(), params.eps())?.classify(x)
}
