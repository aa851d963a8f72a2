//! Evaluation of the Bellman function through its foliation.
//!
//! `Ω³_ε` splits into `Ξ₀` (around the `x3`-axis) and `Ξ_±`. Each region is
//! foliated by planar leaves indexed by `u`; on a leaf the function is linear.
//! For a point `x` we find its leaf by bisection on the plane equation for the
//! exponent `p`, then read the value off the same plane equation with `r`:
//!
//! ```text
//! Ξ₊:  F_q(u) = u^q + (m_q - k_q)/(4ε) (x2 - 2x1 u + u²) + (m_q + k_q)/2 (x1 - u),  u ≥ ε
//! Ξ₀:  F_q(u) = u^q + (x2 - u²) m_q(u) / (2(u + ε)),                              u ∈ [0, ε]
//! ```
//!
//! with `x3 = F_p(u)` and `B(x) = F_r(u)`. `Ξ₋` is the mirror image of `Ξ₊`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::domain::{tangent_params, Geometry, Params, Point2, Point3, Regime, Region};
use crate::error::{domain_err, Error, Result};
use crate::specfn::AuxFunctions;

const MAX_BISECTIONS: usize = 200;
const RESIDUAL_TOL: f64 = 1e-12;
const CLAMP_TOL: f64 = 1e-10;
/// Distance from `∂Ω³_ε` below which derivatives are refused.
const INTERIOR_MARGIN: f64 = 1e-9;
pub const HESSIAN_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub region: Region,
    pub u: f64,
    pub bracket: (f64, f64),
}

/// Which of the two plane families a leaf belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Zero,
    Side,
}

/// `B_{p,r;ε}` (regime Max) or the minimal Bellman function (regime Min).
#[derive(Debug, Clone)]
pub struct Bellman {
    params: Params,
    geo: Geometry,
    aux_r: AuxFunctions,
}

fn plane(aux: &AuxFunctions, fam: Family, x1: f64, x2: f64, u: f64) -> Result<f64> {
    let (q, eps) = (aux.p(), aux.eps());
    let m = aux.m(u, 0)?;
    Ok(match fam {
        Family::Zero => u.powf(q) + (x2 - u * u) * m / (2.0 * (u + eps)),
        Family::Side => {
            let k = aux.k(u, 0)?;
            u.powf(q) + (m - k) / (4.0 * eps) * (x2 - 2.0 * x1 * u + u * u) + 0.5 * (m + k) * (x1 - u)
        }
    })
}

/// `(∂F/∂x1, ∂F/∂x2)` at fixed `u`, for `x1 ≥ 0`.
fn plane_partials(aux: &AuxFunctions, fam: Family, u: f64) -> Result<(f64, f64)> {
    let eps = aux.eps();
    let m = aux.m(u, 0)?;
    Ok(match fam {
        Family::Zero => (0.0, m / (2.0 * (u + eps))),
        Family::Side => {
            let k = aux.k(u, 0)?;
            (0.5 * (m + k) - u * (m - k) / (2.0 * eps), (m - k) / (4.0 * eps))
        }
    })
}

impl Bellman {
    pub fn new(params: Params) -> Result<Self> {
        Ok(Self {
            geo: Geometry::new(params.p(), params.eps())?,
            aux_r: AuxFunctions::new(params.r(), params.eps())?,
            params,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geo
    }

    fn family(region: Region) -> Option<Family> {
        match region {
            Region::XiZero => Some(Family::Zero),
            Region::XiPlus | Region::XiMinus => Some(Family::Side),
            Region::Skeleton | Region::Outside => None,
        }
    }

    fn bracket(&self, fam: Family, x: Point3) -> Result<(f64, f64)> {
        let eps = self.params.eps();
        let (u_plus, u_minus) = tangent_params(eps, Point2::new(x.x1.abs(), x.x2))?;
        let (lo, hi) = match fam {
            Family::Zero => (u_plus.max(0.0), x.x2.sqrt().min(eps)),
            Family::Side => (u_plus.max(eps), u_minus),
        };
        Ok((lo, hi.max(lo)))
    }

    pub fn solve_leaf(&self, x: Point3) -> Result<Leaf> {
        if self.params.regime() == Regime::Degenerate {
            return Err(domain_err!("no foliation in the degenerate regime"));
        }
        let region = self.geo.classify(x)?;
        let Some(fam) = Self::family(region) else {
            let u = x.x1.abs();
            return Ok(Leaf { region, u, bracket: (u, u) });
        };
        let bracket = self.bracket(fam, x)?;
        let u = self.bisect(fam, x, bracket, RESIDUAL_TOL)?;
        Ok(Leaf { region, u, bracket })
    }

    /// Like [`Self::solve_leaf`] but bisects until the bracket collapses; the
    /// gradient feeds finite differences, which amplify any slack in `u`.
    fn solve_leaf_exact(&self, x: Point3) -> Result<Leaf> {
        let region = self.geo.classify(x)?;
        let Some(fam) = Self::family(region) else {
            let u = x.x1.abs();
            return Ok(Leaf { region, u, bracket: (u, u) });
        };
        let bracket = self.bracket(fam, x)?;
        let u = self.bisect(fam, x, bracket, 0.0)?;
        Ok(Leaf { region, u, bracket })
    }

    fn bisect(&self, fam: Family, x: Point3, (mut lo, mut hi): (f64, f64), tol: f64) -> Result<f64> {
        let aux = self.geo.aux();
        let a = x.x1.abs();
        let resid = |u: f64| plane(aux, fam, a, x.x2, u).map(|v| v - x.x3);
        let scale = x.x3.abs().max(1.0);
        let mut f_lo = resid(lo)?;
        if f_lo == 0.0 || lo == hi {
            return self.clamped(lo, f_lo, scale, x);
        }
        let f_hi = resid(hi)?;
        if f_hi == 0.0 {
            return Ok(hi);
        }
        if (f_lo > 0.0) == (f_hi > 0.0) {
            return if f_lo.abs() <= f_hi.abs() {
                self.clamped(lo, f_lo, scale, x)
            } else {
                self.clamped(hi, f_hi, scale, x)
            };
        }
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(mid);
            }
            let f_mid = resid(mid)?;
            if f_mid.abs() <= tol * scale {
                return Ok(mid);
            }
            if (f_mid > 0.0) == (f_lo > 0.0) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::Convergence(format!(
            "leaf bisection for ({}, {}, {}) stalled in [{lo}, {hi}]",
            x.x1, x.x2, x.x3
        )))
    }

    fn clamped(&self, u: f64, f: f64, scale: f64, x: Point3) -> Result<f64> {
        if f.abs() <= CLAMP_TOL * scale {
            Ok(u)
        } else {
            Err(domain_err!(
                "({}, {}, {}) lies on no leaf of its region (miss {f:e})",
                x.x1,
                x.x2,
                x.x3
            ))
        }
    }

    pub fn eval(&self, x: Point3) -> Result<f64> {
        match self.params.regime() {
            Regime::Degenerate => {
                if !self.geo.omega3_contains(x) {
                    return Err(domain_err!("({}, {}, {}) is outside Ω³", x.x1, x.x2, x.x3));
                }
                return Ok(if self.params.r() == self.params.p() { x.x3 } else { x.x2 });
            }
            Regime::Max | Regime::Min => {}
        }
        let leaf = self.solve_leaf(x)?;
        self.value_on_leaf(x, &leaf)
    }

    /// `F_r` at a leaf already found for `x`.
    pub fn value_on_leaf(&self, x: Point3, leaf: &Leaf) -> Result<f64> {
        match Self::family(leaf.region) {
            Some(fam) => plane(&self.aux_r, fam, x.x1.abs(), x.x2, leaf.u),
            None => Ok(x.x1.abs().powf(self.params.r())),
        }
    }

    fn check_interior(&self, x: Point3) -> Result<()> {
        let eps = self.params.eps();
        let (lo, hi) = self.geo.envelopes(x.xy())?;
        if x.x3 < lo - crate::domain::MEMBERSHIP_TOL || x.x3 > hi + crate::domain::MEMBERSHIP_TOL {
            return Err(domain_err!("({}, {}, {}) is outside Ω³", x.x1, x.x2, x.x3));
        }
        let d = x.x2 - x.x1 * x.x1;
        let scale = x.x3.abs().max(1.0);
        let margin = d.min(eps * eps - d).min((x.x3 - lo) / scale).min((hi - x.x3) / scale);
        if margin <= INTERIOR_MARGIN {
            return Err(Error::Boundary(format!(
                "({}, {}, {}) is within {margin:e} of the boundary of Ω³",
                x.x1, x.x2, x.x3
            )));
        }
        Ok(())
    }

    /// Analytic gradient at an interior point.
    pub fn gradient(&self, x: Point3) -> Result<[f64; 3]> {
        if self.params.regime() == Regime::Degenerate {
            self.check_interior(x)?;
            return Ok(if self.params.r() == self.params.p() {
                [0.0, 0.0, 1.0]
            } else {
                [0.0, 1.0, 0.0]
            });
        }
        self.check_interior(x)?;
        let leaf = self.solve_leaf_exact(x)?;
        let fam = Self::family(leaf.region).ok_or_else(|| Error::Boundary("skeleton point".into()))?;
        let u = leaf.u;
        let (p, r) = (self.params.p(), self.params.r());
        let (ap, ar) = (self.geo.aux(), &self.aux_r);
        let g3 = match fam {
            Family::Side => (ar.m(u, 2)? + ar.k(u, 2)?) / (ap.m(u, 2)? + ap.k(u, 2)?),
            Family::Zero => {
                if u <= 0.0 {
                    return Err(Error::Boundary("leaf through the origin".into()));
                }
                (ar.m(u, 1)? - r * u.powf(r - 2.0)) / (ap.m(u, 1)? - p * u.powf(p - 2.0))
            }
        };
        if !g3.is_finite() {
            return Err(Error::Boundary(format!("x3-derivative degenerates on the leaf u = {u}")));
        }
        let (p1, p2) = plane_partials(ap, fam, u)?;
        let (r1, r2) = plane_partials(ar, fam, u)?;
        let g1 = (r1 - g3 * p1) * if x.x1 < 0.0 { -1.0 } else { 1.0 };
        Ok([g1, r2 - g3 * p2, g3])
    }

    /// Central differences of [`Self::gradient`] at steps `h`, `h/2`, `h/4`,
    /// Richardson-extrapolated to sixth order and symmetrized.
    ///
    /// Curvature across leaves can reach 10⁴ while the in-leaf eigenvalues are
    /// exactly zero; lower-order stencils leak their truncation error into them.
    pub fn hessian(&self, x: Point3) -> Result<Matrix3<f64>> {
        let h = HESSIAN_STEP;
        let d0 = self.central_jacobian(x, h)?;
        let d1 = self.central_jacobian(x, h / 2.0)?;
        let d2 = self.central_jacobian(x, h / 4.0)?;
        let r0 = (d1 * 4.0 - d0) / 3.0;
        let r1 = (d2 * 4.0 - d1) / 3.0;
        let jac = (r1 * 16.0 - r0) / 15.0;
        Ok((jac + jac.transpose()) * 0.5)
    }

    fn central_jacobian(&self, x: Point3, h: f64) -> Result<Matrix3<f64>> {
        let base = [x.x1, x.x2, x.x3];
        let mut jac = Matrix3::zeros();
        for j in 0..3 {
            let mut fwd = base;
            let mut bwd = base;
            fwd[j] += h;
            bwd[j] -= h;
            let gf = self.gradient(fwd.into()).map_err(to_boundary)?;
            let gb = self.gradient(bwd.into()).map_err(to_boundary)?;
            for i in 0..3 {
                jac[(i, j)] = (gf[i] - gb[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

fn to_boundary(e: Error) -> Error {
    match e {
        Error::Domain(msg) => Error::Boundary(format!("Hessian stencil leaves Ω³: {msg}")),
        other => other,
    }
}

pub fn solve_leaf(params: &Params, x: Point3) -> Result<Leaf> {
    Bellman::new(*params)?.solve_leaf(x)
}

pub fn eval(params: &Params, x: Point3) -> Result<f64> {
    Bellman::new(*params)?.eval(x)
}

pub fn gradient(params: &Params, x: Point3) -> Result<[f64; 3]> {
    Bellman::new(*params)?.gradient(x)
}

pub fn hessian(params: &Params, x: Point3) -> Result<Matrix3<f64>> {
    Bellman::new(*params)?.hessian(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn b13() -> Bellman {
        Bellman::new(Params::new(1.0, 3.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn leaf_examples() {
        let b = b13();
        let leaf = b.solve_leaf(Point3::new(0.4, 0.16, 0.4)).unwrap();
        assert_eq!(leaf.region, Region::Skeleton);
        assert_relative_eq!(leaf.u, 0.4);
        let leaf = b.solve_leaf(Point3::new(0.0, 1.0, 0.5)).unwrap();
        assert_eq!(leaf.region, Region::XiZero);
        assert!(leaf.u.abs() < 1e-10);
        let leaf = b.solve_leaf(Point3::new(2.0, 5.0, 2.0)).unwrap();
        assert_relative_eq!(leaf.u, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn eval_examples() {
        let b = b13();
        assert_relative_eq!(b.eval(Point3::new(2.0, 4.0, 2.0)).unwrap(), 8.0, max_relative = 1e-12);
        assert_relative_eq!(b.eval(Point3::new(0.0, 1.0, 0.5)).unwrap(), 3.0, max_relative = 1e-9);
        assert_relative_eq!(b.eval(Point3::new(2.0, 5.0, 2.0)).unwrap(), 16.0, max_relative = 1e-9);
        assert_relative_eq!(b.eval(Point3::new(-2.0, 5.0, 2.0)).unwrap(), 16.0, max_relative = 1e-9);
        assert_relative_eq!(b.eval(Point3::new(0.0, 1.0, 0.75)).unwrap(), 2.5625, max_relative = 1e-9);
    }

    #[test]
    fn degenerate_regime() {
        let b = Bellman::new(Params::new(3.0, 3.0, 1.0).unwrap()).unwrap();
        assert_eq!(b.eval(Point3::new(0.0, 1.0, 1.5)).unwrap(), 1.5);
        let b = Bellman::new(Params::new(3.0, 2.0, 1.0).unwrap()).unwrap();
        assert_eq!(b.eval(Point3::new(0.0, 1.0, 1.5)).unwrap(), 1.0);
        assert!(b.solve_leaf(Point3::new(0.0, 1.0, 1.5)).is_err());
    }

    #[test]
    fn outside_points_are_rejected() {
        let b = b13();
        assert!(matches!(b.eval(Point3::new(2.0, 5.0, 3.0)), Err(Error::Domain(_))));
        assert!(matches!(b.gradient(Point3::new(2.0, 5.0, 3.0)), Err(Error::Domain(_))));
        assert!(matches!(b.gradient(Point3::new(0.5, 0.25, 0.5)), Err(Error::Boundary(_))));
    }

    #[test]
    fn gradient_matches_differences() {
        let b = b13();
        let g = b.geometry();
        for &(x1, x2, t) in &[(0.3, 0.8, 0.4), (1.5, 3.0, 0.5), (-2.5, 7.0, 0.3), (0.0, 0.5, 0.7)] {
            let (lo, hi) = g.envelopes(Point2::new(x1, x2)).unwrap();
            let x = Point3::new(x1, x2, lo + t * (hi - lo));
            let grad = b.gradient(x).unwrap();
            let h = 1e-5;
            for i in 0..3 {
                let mut f = [x.x1, x.x2, x.x3];
                let mut bk = f;
                f[i] += h;
                bk[i] -= h;
                let fd = (b.eval(f.into()).unwrap() - b.eval(bk.into()).unwrap()) / (2.0 * h);
                assert!((fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1.0), "x={x:?} i={i}: {fd} vs {}", grad[i]);
            }
        }
    }
}
