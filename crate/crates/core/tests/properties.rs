//! Invariants checked on randomized inputs.

use bellman_bmo::bellman::Bellman;
use bellman_bmo::domain::{Geometry, Params, Point3, Region};
use bellman_bmo::specfn::AuxFunctions;
use bellman_bmo::testfn::{
    bmo_norm, depth_for, homogenize, optimizer_phi0, optimizer_uminus, optimizer_uplus, random_step_fn, step_bmo_exact,
    transfer, PiecewiseFn,
};
use bellman_bmo::verify::{check_concavity, check_skeleton, extract_constant, VerifyReport};
use proptest::prelude::*;

/// (p, r) pairs covering both regimes.
fn params_strategy() -> impl Strategy<Value = Params> {
    prop_oneof![
        Just((1.0, 3.0)),
        Just((1.5, 3.0)),
        Just((2.5, 4.0)),
        Just((1.0, 2.5)),
        Just((4.0, 3.0)),
        Just((3.0, 2.5)),
        Just((1.2, 1.5)),
    ]
    .prop_flat_map(|(p, r)| (Just(p), Just(r), prop_oneof![Just(0.5), Just(1.0), Just(2.0)]))
    .prop_map(|(p, r, eps)| Params::new(p, r, eps).unwrap())
}

/// Interior point from unit-cube coordinates: x1, then the strip depth, then x3.
fn interior(geo: &Geometry, s: f64, d: f64, t: f64) -> Point3 {
    let eps = geo.eps();
    let x1 = s * eps;
    let x2 = x1 * x1 + d * eps * eps;
    let (lo, hi) = geo.envelopes(Point3::new(x1, x2, 0.0).xy()).unwrap();
    Point3::new(x1, x2, lo + t * (hi - lo))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn mirror_symmetry(params in params_strategy(), s in -4.0..4.0f64, d in 0.0..1.0f64, t in 0.0..1.0f64) {
        let b = Bellman::new(params).unwrap();
        let x = interior(b.geometry(), s, d, t);
        let (a, m) = (b.eval(x).unwrap(), b.eval(x.mirrored()).unwrap());
        prop_assert!(rel(a, m) < 1e-12, "{a} vs {m}");
    }

    #[test]
    fn skeleton_values(params in params_strategy(), t in -5.0..5.0f64) {
        let b = Bellman::new(params).unwrap();
        let x = Point3::new(t, t * t, t.abs().powf(params.p()));
        let got = b.eval(x).unwrap();
        let want = t.abs().powf(params.r());
        prop_assert!((got - want).abs() <= 1e-8 * want, "{got} vs {want}");
    }

    #[test]
    fn scaling_covariance(params in params_strategy(), s in -4.0..4.0f64, d in 0.0..1.0f64, t in 0.0..1.0f64) {
        let (p, r, eps) = (params.p(), params.r(), params.eps());
        let unit = Bellman::new(Params::new(p, r, 1.0).unwrap()).unwrap();
        let b = Bellman::new(params).unwrap();
        let x = interior(unit.geometry(), s, d, t);
        let y = Point3::new(eps * x.x1, eps * eps * x.x2, eps.powf(p) * x.x3);
        let want = eps.powf(r) * unit.eval(x).unwrap();
        let got = b.eval(y).unwrap();
        prop_assert!((got - want).abs() <= 1e-8 * want.abs().max(1e-300), "{got} vs {want}");
    }

    #[test]
    fn affine_along_segments_to_the_leaf_vertex(
        params in params_strategy(), s in -4.0..4.0f64, d in 0.01..0.99f64, t in 0.01..0.99f64, w in 0.05..0.95f64,
    ) {
        let b = Bellman::new(params).unwrap();
        let x = interior(b.geometry(), s, d, t);
        let leaf = b.solve_leaf(x).unwrap();
        prop_assume!(matches!(leaf.region, Region::XiPlus | Region::XiMinus | Region::XiZero));
        // every leaf contains its skeleton vertex, on the side of x
        let u = leaf.u;
        let v = Point3::new(u.copysign(x.x1), u * u, u.powf(params.p()));
        let mid = Point3::new(
            v.x1 + w * (x.x1 - v.x1),
            v.x2 + w * (x.x2 - v.x2),
            v.x3 + w * (x.x3 - v.x3),
        );
        let (gv, gx, gm) = (b.eval(v).unwrap(), b.eval(x).unwrap(), b.eval(mid).unwrap());
        let affine = gv + w * (gx - gv);
        prop_assert!((gm - affine).abs() <= 1e-9 * gx.abs().max(1.0), "{gm} vs {affine}");
    }

    #[test]
    fn leaf_parameter_is_monotone_in_x3(params in params_strategy(), s in -4.0..4.0f64, d in 0.01..0.99f64) {
        // leaves do not cross, so along a vertical line u moves one way inside each region
        let b = Bellman::new(params).unwrap();
        let geo = b.geometry();
        let mut prev: Option<(Region, f64)> = None;
        let mut dir = 0.0;
        for k in 0..=60 {
            let x = interior(geo, s, d, f64::from(k) / 60.0);
            let leaf = b.solve_leaf(x).unwrap();
            match prev {
                Some((reg, u)) if reg == leaf.region => {
                    let du = leaf.u - u;
                    if du.abs() > 1e-10 * u.abs().max(1.0) {
                        if dir == 0.0 {
                            dir = du.signum();
                        }
                        prop_assert!(du.signum() == dir, "{reg:?}: u {u} -> {} at step {k}", leaf.u);
                    }
                }
                _ => dir = 0.0,
            }
            prev = Some((leaf.region, leaf.u));
        }
    }

    #[test]
    fn gradient_matches_differenced_eval(params in params_strategy(), s in -3.5..3.5f64, d in 0.05..0.95f64, t in 0.05..0.95f64) {
        let b = Bellman::new(params).unwrap();
        let x = interior(b.geometry(), s, d, t);
        let g = b.gradient(x).unwrap();
        let base = [x.x1, x.x2, x.x3];
        // eval is solved to a residual, so its noise scales with the whole gradient
        let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for j in 0..3 {
            let h = 1e-5 * base[j].abs().max(1.0);
            let (mut f, mut bw) = (base, base);
            f[j] += h;
            bw[j] -= h;
            let (Ok(ef), Ok(eb)) = (b.eval(f.into()), b.eval(bw.into())) else { continue };
            let fd = (ef - eb) / (2.0 * h);
            prop_assert!((g[j] - fd).abs() <= 1e-6 * scale, "component {j}: {} vs {fd}", g[j]);
        }
        let m = b.gradient(x.mirrored()).unwrap();
        prop_assert!((g[0] + m[0]).abs() <= 1e-12 * g[0].abs().max(1.0));
        prop_assert!((g[1] - m[1]).abs() <= 1e-12 * g[1].abs().max(1.0));
        prop_assert!((g[2] - m[2]).abs() <= 1e-12 * g[2].abs().max(1.0));
    }

    #[test]
    fn side_leaf_values_lie_between_vertex_values(s in 1.2..4.0f64, d in 0.05..0.95f64, t in 0.05..0.95f64) {
        let params = Params::new(1.0, 3.0, 1.0).unwrap();
        let b = Bellman::new(params).unwrap();
        let x = interior(b.geometry(), s, d, t);
        let leaf = b.solve_leaf(x).unwrap();
        prop_assume!(leaf.region == Region::XiPlus);
        let aux = AuxFunctions::new(3.0, 1.0).unwrap();
        let u = leaf.u;
        let verts = [u.powi(3), u.powi(3) + aux.m(u, 0).unwrap(), u.powi(3) - aux.k(u, 0).unwrap()];
        let lo = verts.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = verts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let g = b.eval(x).unwrap();
        prop_assert!(g >= lo * (1.0 - 1e-12) && g <= hi * (1.0 + 1e-12), "{g} not in [{lo}, {hi}]");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hessian_vanishes_along_side_leaves(s in 1.2..3.5f64, d in 0.05..0.95f64, t in 0.05..0.95f64) {
        let params = Params::new(1.0, 3.0, 1.0).unwrap();
        let b = Bellman::new(params).unwrap();
        let x = interior(b.geometry(), s, d, t);
        let leaf = b.solve_leaf(x).unwrap();
        prop_assume!(leaf.region == Region::XiPlus);
        let (u, aux) = (leaf.u, AuxFunctions::new(1.0, 1.0).unwrap());
        let h = match b.hessian(x) { Ok(h) => h, Err(_) => return Ok(()) };
        // the leaf triangle is spanned from its skeleton vertex by U₊ − W and U₋ − W
        let w = nalgebra::Vector3::new(u, u * u, u);
        let up = nalgebra::Vector3::new(u + 1.0, (u + 1.0).powi(2) + 1.0, u + aux.m(u, 0).unwrap());
        let um = nalgebra::Vector3::new(u - 1.0, (u - 1.0).powi(2) + 1.0, u - aux.k(u, 0).unwrap());
        for v in [(up - w).normalize(), (um - w).normalize()] {
            let q = (v.transpose() * h * v)[(0, 0)];
            prop_assert!(q.abs() <= 1e-6, "in-leaf curvature {q}");
        }
        let sym = (h - h.transpose()).abs().max();
        prop_assert!(sym <= 1e-8);
    }

    #[test]
    fn random_step_functions_have_exact_bmo_and_lie_in_the_strip(seed in 0u64..10_000, cells in 2usize..40, eps in 0.3..3.0f64) {
        let f = random_step_fn(seed, cells, eps).unwrap();
        let vals: Vec<f64> = f.pieces().iter().map(|pc| pc.value(pc.a)).collect();
        let exact = step_bmo_exact(&vals, f.length() / vals.len() as f64);
        prop_assert!((exact - eps).abs() <= 1e-12 * eps);
        prop_assert!(bmo_norm(&f, 8) <= eps * (1.0 + 1e-12));
        let x = f.bellman_point(1.5);
        let dd = x.x2 - x.x1 * x.x1;
        prop_assert!(dd >= -1e-12 && dd <= eps * eps * (1.0 + 1e-12));
        prop_assert!(f == random_step_fn(seed, cells, eps).unwrap());
    }

    #[test]
    fn transfer_preserves_moments_and_bmo(j1 in -3.0..3.0f64, len in 0.1..5.0f64, flip in any::<bool>(), u in 1.0..3.0f64) {
        let g = optimizer_uminus(1.0, u).unwrap();
        let target = if flip { (j1 + len, j1) } else { (j1, j1 + len) };
        let t = transfer(&g, target).unwrap();
        for q in [1.0, 2.0, 3.5] {
            prop_assert!(rel(t.moments(q), g.moments(q)) < 1e-10);
        }
        prop_assert!((t.mean() - g.mean()).abs() < 1e-10);
        prop_assert!((bmo_norm(&t, 8) - bmo_norm(&g, 8)).abs() < 1e-9);
    }

    #[test]
    fn homogenization_preserves_distribution(lambda in 0.3..0.95f64, c in -3.0..3.0f64) {
        let g = transfer(&optimizer_phi0(), (-0.5, 0.5)).unwrap();
        let depth = depth_for(lambda, 1e-9);
        let h = homogenize(&g, lambda, depth).unwrap();
        let slack = lambda.powi(depth as i32);
        prop_assert!((h.distribution(c) - g.distribution(c)).abs() <= slack + 1e-12);
        prop_assert!((h.moments(3.0) - g.moments(3.0)).abs() <= 1e-6);
    }
}

#[test]
fn grid_bmo_is_monotone_in_levels() {
    for f in [optimizer_phi0(), optimizer_uplus(1.0, 2.0).unwrap(), random_step_fn(3, 17, 1.0).unwrap()] {
        let mut prev = 0.0;
        for levels in 0..=12 {
            let v = bmo_norm(&f, levels);
            assert!(v >= prev - 1e-13, "levels {levels}: {v} < {prev}");
            prev = v;
        }
    }
}

#[test]
fn variance_is_nonnegative_and_zero_only_for_constants() {
    for seed in 0..50 {
        let f = random_step_fn(seed, 8, 1.0).unwrap();
        assert!(f.second_moment() - f.mean().powi(2) > 0.0);
    }
    let c = PiecewiseFn::constant(0.0, 3.0, -2.0).unwrap();
    assert_eq!(c.second_moment() - c.mean().powi(2), 0.0);
}

#[test]
fn constant_scan_is_nondecreasing_and_bounded() {
    let bound = 6.0 * (1.0 + 1e-8);
    let mut prev = 0.0;
    for n in [10, 20, 40, 80] {
        let scan = extract_constant(1.0, 3.0, n).unwrap();
        assert!(scan.ratio >= prev && scan.ratio <= bound, "n={n}: {}", scan.ratio);
        prev = scan.ratio;
    }
}

#[test]
fn reports_are_deterministic_and_round_trip() {
    let params = Params::new(4.0, 3.0, 1.0).unwrap();
    let a = check_concavity(&params, 20, 99).unwrap();
    let b = check_concavity(&params, 20, 99).unwrap();
    assert_eq!(a, b);
    for rep in [a, check_skeleton(&params, &[-1.0, 0.0, 0.5]).unwrap()] {
        let text = serde_json::to_string(&rep).unwrap();
        let back: VerifyReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rep);
    }
}
