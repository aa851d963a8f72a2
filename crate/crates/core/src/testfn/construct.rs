//! Explicit extremal functions and the transfer/homogenization constructions.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{step_bmo_exact, Kind, Piece, PiecewiseFn};
use crate::error::{domain_err, Result};

/// `φ_{U₊}(t) = −ε ln t + u` on `(0, 1]`.
pub fn optimizer_uplus(eps: f64, u: f64) -> Result<PiecewiseFn> {
    if !(u >= 0.0) || !(eps > 0.0) {
        return Err(domain_err!("optimizer_uplus needs u ≥ 0 and ε > 0, got u = {u}, ε = {eps}"));
    }
    PiecewiseFn::new(vec![Piece::affine_log(0.0, 1.0, u, -eps, 1.0, 0.0)])
}

/// `φ_{U₋}`: `−ε` on `[0, ½)`, `ε` on `[½, 1)`, `ε(1 + ln t)` on `[1, e^{(u−ε)/ε})`.
pub fn optimizer_uminus(eps: f64, u: f64) -> Result<PiecewiseFn> {
    if !(eps > 0.0) || !(u >= eps) {
        return Err(domain_err!("optimizer_uminus needs u ≥ ε > 0, got u = {u}, ε = {eps}"));
    }
    let mut pieces = vec![Piece::constant(0.0, 0.5, -eps), Piece::constant(0.5, 1.0, eps)];
    let end = ((u - eps) / eps).exp();
    if end > 1.0 {
        pieces.push(Piece::affine_log(1.0, end, eps, eps, 1.0, 0.0));
    }
    PiecewiseFn::new(pieces)
}

/// `φ₀` on `(−2, 2)`: `ln(t+2)`, then `0` on `[−1, 1]`, then `−ln(2−t)`.
pub fn optimizer_phi0() -> PiecewiseFn {
    PiecewiseFn::new(vec![
        Piece::affine_log(-2.0, -1.0, 0.0, 1.0, 1.0, -2.0),
        Piece::constant(-1.0, 1.0, 0.0),
        Piece::affine_log(1.0, 2.0, 0.0, -1.0, -1.0, 2.0),
    ])
    .expect("φ₀ pieces are valid")
}

/// `g_J(x) = g((x − j1)(i2 − i1)/(j2 − j1) + i1)`.
///
/// `j = (j1, j2)` with `j1 > j2` produces the mirrored copy on `[j2, j1)`.
pub fn transfer(g: &PiecewiseFn, j: (f64, f64)) -> Result<PiecewiseFn> {
    let (j1, j2) = j;
    if !(j1 != j2) || !j1.is_finite() || !j2.is_finite() {
        return Err(domain_err!("transfer target [{j1}, {j2}] is degenerate"));
    }
    let (i1, i2) = g.domain();
    let rho = (i2 - i1) / (j2 - j1);
    let src = g.pieces();
    // breakpoints mapped once so neighbours share exact endpoints
    let mut xs: Vec<f64> = src.iter().map(|p| j1 + (p.a - i1) / rho).collect();
    xs[0] = j1;
    xs.push(j2);
    let mut out: Vec<Piece> = src
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let (a, b) = if rho > 0.0 { (xs[k], xs[k + 1]) } else { (xs[k + 1], xs[k]) };
            let kind = match p.kind {
                Kind::Const { v } => Kind::Const { v },
                Kind::AffineLog { c0, c1, sigma, tau } => {
                    let s = sigma * rho.signum();
                    let t = j1 + (tau - i1) / rho;
                    // the source piece is valid, so any violation here is rounding
                    let t = if s > 0.0 { t.min(a) } else { t.max(b) };
                    Kind::AffineLog {
                        c0: c0 + c1 * rho.abs().ln(),
                        c1,
                        sigma: s,
                        tau: t,
                    }
                }
            };
            Piece { a, b, kind }
        })
        .collect();
    if rho < 0.0 {
        out.reverse();
    }
    PiecewiseFn::new(out)
}

/// Smallest depth with `λ^depth ≤ residual`.
pub fn depth_for(lambda: f64, residual: f64) -> usize {
    (residual.ln() / lambda.ln()).ceil().max(1.0) as usize
}

/// λ-homogenization of `g` on `[−½, ½]`, truncated after `depth` levels.
///
/// Level `k` places `g_{I_{k,±}}` on `I_{k,±} = [±(1−λ^{k−1})/2, ±(1−λ^k)/2]`
/// (the `−` copies come out mirrored). The two leftover end intervals of total
/// length `λ^depth` carry the constant `⟨g⟩`.
pub fn homogenize(g: &PiecewiseFn, lambda: f64, depth: usize) -> Result<PiecewiseFn> {
    let (a, b) = g.domain();
    if (a + 0.5).abs() > 1e-12 || (b - 0.5).abs() > 1e-12 {
        return Err(domain_err!("homogenize needs g on [−1/2, 1/2], got [{a}, {b}]"));
    }
    if !(lambda > 0.0 && lambda < 1.0) || depth == 0 {
        return Err(domain_err!("homogenize needs λ ∈ (0,1) and depth ≥ 1"));
    }
    let mut ends = Vec::with_capacity(depth + 1);
    let mut pow = 1.0;
    for _ in 0..=depth {
        ends.push(0.5 * (1.0 - pow));
        pow *= lambda;
    }
    if ends.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain_err!("λ^depth underflows the interval resolution; lower depth"));
    }
    let mean = g.mean();
    let outer = ends[depth];
    let mut left = Vec::new();
    let mut right = Vec::new();
    for k in 1..=depth {
        let copy = transfer(g, (ends[k - 1], ends[k]))?;
        right.extend_from_slice(copy.pieces());
        let mirrored = transfer(g, (-ends[k - 1], -ends[k]))?;
        left.push(mirrored);
    }
    let mut pieces = Vec::new();
    if outer < 0.5 {
        pieces.push(Piece::constant(-0.5, -outer, mean));
    }
    for copy in left.iter().rev() {
        pieces.extend_from_slice(copy.pieces());
    }
    // the innermost mirrored copy ends at −0.0; make the seam bit-identical
    if let Some(last) = pieces.last_mut() {
        last.b = 0.0;
    }
    pieces.extend(right);
    if outer < 0.5 {
        pieces.push(Piece::constant(outer, 0.5, mean));
    }
    PiecewiseFn::new(pieces)
}

/// `ψ`: `φ₀` moved to `[−½, ½]`, homogenized, shifted onto `[0, 1]` and
/// extended by zero to `ambient ⊇ [0, 1]`.
pub fn build_psi(lambda: f64, depth: usize, ambient: (f64, f64)) -> Result<PiecewiseFn> {
    if !(ambient.0 <= 0.0 && ambient.1 >= 1.0) {
        return Err(domain_err!("ambient interval must contain [0, 1]"));
    }
    let centred = transfer(&optimizer_phi0(), (-0.5, 0.5))?;
    let homog = homogenize(&centred, lambda, depth)?;
    let unit = transfer(&homog, (0.0, 1.0))?;
    let mut pieces = Vec::with_capacity(unit.pieces().len() + 2);
    if ambient.0 < 0.0 {
        pieces.push(Piece::constant(ambient.0, 0.0, 0.0));
    }
    pieces.extend_from_slice(unit.pieces());
    if ambient.1 > 1.0 {
        pieces.push(Piece::constant(1.0, ambient.1, 0.0));
    }
    PiecewiseFn::new(pieces)
}

fn draw_values<R: Rng>(rng: &mut R, cells: usize) -> Vec<f64> {
    let style = rng.random_range(0..3u8);
    (0..cells)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..1.0);
            match style {
                0 => x,
                1 => x * x * x,
                _ => {
                    if rng.random_range(0.0..1.0) < 0.15 {
                        3.0 * x
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect()
}

/// Random step function on `[0, 1)` with `cells` equal cells and BMO seminorm
/// exactly `eps`, using the caller's generator.
pub fn random_step_fn_with<R: Rng>(rng: &mut R, cells: usize, eps: f64) -> Result<PiecewiseFn> {
    if cells < 2 {
        return Err(domain_err!("random_step_fn needs at least 2 cells"));
    }
    if !(eps > 0.0) {
        return Err(domain_err!("eps must be positive"));
    }
    let h = 1.0 / cells as f64;
    let (raw, norm) = loop {
        // centred: a nearly flat draw has a tiny norm, and scaling its mean
        // up would push the Bellman point out where rounding leaves Ω²
        let mut raw = draw_values(rng, cells);
        let centre = raw.iter().sum::<f64>() / cells as f64;
        raw.iter_mut().for_each(|v| *v -= centre);
        let norm = step_bmo_exact(&raw, h);
        if norm > 1e-9 {
            break (raw, norm);
        }
    };
    let shift = rng.random_range(-3.0..3.0) * eps;
    let scale = eps / norm;
    PiecewiseFn::new(
        raw.iter()
            .enumerate()
            .map(|(k, &v)| {
                let b = if k + 1 == cells { 1.0 } else { (k + 1) as f64 * h };
                Piece::constant(k as f64 * h, b, v * scale + shift)
            })
            .collect(),
    )
}

/// Deterministic per `seed`.
pub fn random_step_fn(seed: u64, cells: usize, eps: f64) -> Result<PiecewiseFn> {
    random_step_fn_with(&mut ChaCha8Rng::seed_from_u64(seed), cells, eps)
}
