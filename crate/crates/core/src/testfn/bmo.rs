//! The quadratic BMO seminorm `sup_J (⟨f²⟩_J − ⟨f⟩_J²)^{1/2}`.

use super::PiecewiseFn;

/// Largest supported dyadic refinement.
pub const MAX_LEVELS: u32 = 16;

/// Grid lower bound for the seminorm over subintervals of the domain.
///
/// Candidate intervals have both endpoints among the nodes of a uniform grid
/// with `2^levels` cells plus all piece breakpoints. Integrals over candidates
/// are exact (prefix sums of closed-form antiderivatives). Nested grids make
/// the result nondecreasing in `levels`. `levels` is capped at [`MAX_LEVELS`].
pub fn bmo_norm(f: &PiecewiseFn, levels: u32) -> f64 {
    let (a, b) = f.domain();
    let n = 1usize << levels.min(MAX_LEVELS);
    let width = b - a;
    let mut nodes: Vec<f64> = (0..n).map(|k| a + width * (k as f64 / n as f64)).collect();
    nodes.extend(f.pieces().iter().map(|p| p.a));
    nodes.sort_by(f64::total_cmp);
    // near-coincident nodes only add cancellation noise
    let gap = 1e-13 * width;
    let mut merged: Vec<f64> = Vec::with_capacity(nodes.len() + 1);
    for t in nodes {
        if merged.last().is_none_or(|&last| t - last > gap) {
            merged.push(t);
        }
    }
    if b - merged[merged.len() - 1] <= gap {
        merged.pop();
    }
    merged.push(b);
    // centring keeps ⟨f²⟩ − ⟨f⟩² from cancelling catastrophically
    let (s1, s2) = f.prefix_integrals_shifted(&merged, f.mean());
    max_variance(&merged, &s1, &s2).max(0.0).sqrt()
}

fn max_variance(x: &[f64], s1: &[f64], s2: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..x.len() {
        let (xi, p1, p2) = (x[i], s1[i], s2[i]);
        for j in i + 1..x.len() {
            let inv = 1.0 / (x[j] - xi);
            let m = (s1[j] - p1) * inv;
            let v = (s2[j] - p2) * inv - m * m;
            best = best.max(v);
        }
    }
    best
}

/// Exact seminorm of a step function with `values` on equal cells of width `h`.
///
/// With one endpoint fixed and the other moving through a cell of value `v`,
/// subtracting `v` turns the variance into `A₂/T − A₁²/T²` (`T` the length),
/// maximal at `T* = 2A₁²/A₂` with value `A₂²/(4A₁²)`. Optimizing that value
/// over the first endpoint gives a monotone function of its position, so the
/// supremum always has at least one endpoint on a cell boundary: it suffices
/// to scan node–node intervals and the single-free-endpoint critical points.
pub fn step_bmo_exact(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    // the seminorm is shift invariant; centring avoids cancellation for nearly flat steps
    let centre = values.iter().sum::<f64>() / n as f64;
    let values: Vec<f64> = values.iter().map(|v| v - centre).collect();
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (k, &v) in values.iter().enumerate() {
        s1[k + 1] = s1[k] + v * h;
        s2[k + 1] = s2[k] + v * v * h;
    }
    let critical = |a1: f64, a2: f64, len: f64, v: f64| -> f64 {
        let b1 = a1 - v * len;
        let b2 = a2 - 2.0 * v * a1 + v * v * len;
        if b1 == 0.0 || b2 <= 0.0 {
            return 0.0;
        }
        let t = 2.0 * b1 * b1 / b2;
        if t > len && t < len + h {
            b2 * b2 / (4.0 * b1 * b1)
        } else {
            0.0
        }
    };
    let mut best = 0.0f64;
    for k in 0..=n {
        for l in k + 1..=n {
            let len = (l - k) as f64 * h;
            let (a1, a2) = (s1[l] - s1[k], s2[l] - s2[k]);
            let m = a1 / len;
            best = best.max(a2 / len - m * m);
            // right end partially into cell l, left end partially into cell k-1
            if l < n {
                best = best.max(critical(a1, a2, len, values[l]));
            }
            if k > 0 {
                best = best.max(critical(a1, a2, len, values[k - 1]));
            }
        }
    }
    best.max(0.0).sqrt()
}
