use proptest::prelude::*;

use cyclelab::discriminant::{discriminant, root_count_congruence, sturm_census, MonicPoly};
use cyclelab::field::{PlanarField, PolyVectorField};
use cyclelab::poly2::{basis_values, basis_values_banded, Axis, Poly2, Rect, MONOMIAL_CONVERSION_CAP};

fn poly(max_deg: u32) -> impl Strategy<Value = Poly2> {
    prop::collection::vec(((0..=max_deg, 0..=max_deg), -2.0..2.0f64), 1..8)
        .prop_map(move |terms| Poly2::from_terms(terms.into_iter().filter(|((i, j), _)| i + j <= max_deg)))
}

fn point() -> impl Strategy<Value = (f64, f64)> {
    (-1.5..1.5f64, -1.5..1.5f64)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn rect() -> Rect {
    Rect::new(-1.6, 1.4, -1.5, 1.7).unwrap()
}

proptest! {
    #[test]
    fn arithmetic_evaluates_pointwise(p in poly(4), q in poly(4), (x, y) in point()) {
        let (a, b) = (p.eval(x, y), q.eval(x, y));
        prop_assert!(close(p.add(&q).eval(x, y), a + b, 1e-12));
        prop_assert!(close(p.sub(&q).eval(x, y), a - b, 1e-12));
        prop_assert!(close(p.mul(&q).eval(x, y), a * b, 1e-11));
        prop_assert!(close(p.scale(-3.0).eval(x, y), -3.0 * a, 1e-12));
    }

    #[test]
    fn product_rule(p in poly(4), q in poly(4), (x, y) in point()) {
        for axis in [Axis::X, Axis::Y] {
            let lhs = p.mul(&q).derivative(axis, 1).eval(x, y);
            let rhs = p.derivative(axis, 1).eval(x, y) * q.eval(x, y) + p.eval(x, y) * q.derivative(axis, 1).eval(x, y);
            prop_assert!(close(lhs, rhs, 1e-10));
        }
    }

    #[test]
    fn partials_commute(p in poly(5), (x, y) in point()) {
        let xy = p.derivative(Axis::X, 1).derivative(Axis::Y, 2).eval(x, y);
        let yx = p.derivative(Axis::Y, 2).derivative(Axis::X, 1).eval(x, y);
        prop_assert!(close(xy, yx, 1e-12));
        prop_assert!(close(p.partial(1, 2).eval(x, y), xy, 1e-12));
    }

    #[test]
    fn bernstein_form_agrees_with_monomial_form(p in poly(5), (u, v) in (0.0..1.0f64, 0.0..1.0f64)) {
        let r = rect();
        let (x, y) = r.from_unit(u, v);
        let b = p.to_bernstein(r).unwrap();
        prop_assert!(close(b.eval(x, y), p.eval(x, y), 1e-10));
        for axis in [Axis::X, Axis::Y] {
            for order in 1..=2 {
                prop_assert!(close(b.derivative(axis, order).eval(x, y), p.derivative(axis, order).eval(x, y), 1e-8));
            }
        }
        let back = b.to_monomial(MONOMIAL_CONVERSION_CAP).unwrap();
        prop_assert!(close(back.eval(x, y), p.eval(x, y), 1e-9));
    }

    #[test]
    fn elevation_and_reparametrization_preserve_values(p in poly(4), (u, v) in (0.0..1.0f64, 0.0..1.0f64), rx in 0usize..4, ry in 0usize..4) {
        let r = rect();
        let b = p.to_bernstein(r).unwrap();
        let inner = &b;
        let (x, y) = r.from_unit(u, v);
        let up = inner.elevate(rx, ry);
        prop_assert_eq!(up.degrees(), (inner.degrees().0 + rx, inner.degrees().1 + ry));
        prop_assert!(close(up.eval(x, y), inner.eval(x, y), 1e-11));
        let other = Rect::centered_square(0.7).unwrap();
        let moved = inner.reparametrize(other).unwrap();
        let (x2, y2) = other.from_unit(u, v);
        prop_assert!(close(moved.eval(x2, y2), p.eval(x2, y2), 1e-9));
    }

    #[test]
    fn bernstein_basis_is_a_partition_of_unity(deg in 0usize..200, t in 0.0..=1.0f64) {
        let mut full = Vec::new();
        basis_values(deg, t, &mut full);
        prop_assert!(full.iter().all(|&b| b >= 0.0));
        prop_assert!((full.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut banded = Vec::new();
        let range = basis_values_banded(deg, t, &mut banded);
        let peak = full.iter().cloned().fold(0.0, f64::max);
        for k in 0..=deg {
            prop_assert!((full[k] - banded[k]).abs() <= 1e-12 * peak, "k = {} of {}", k, deg);
            if !range.contains(&k) {
                prop_assert_eq!(banded[k], 0.0);
            }
        }
    }

    #[test]
    fn perp_is_orthogonal_and_same_length(p in poly(3), q in poly(3), (x, y) in point()) {
        let f = PolyVectorField::new(p, q);
        let [a, b] = f.eval([x, y]);
        let [c, d] = f.perp().eval([x, y]);
        prop_assert!((a * c + b * d).abs() <= 1e-12 * (1.0 + a * a + b * b));
        prop_assert!(close(c * c + d * d, a * a + b * b, 1e-12));
    }

    #[test]
    fn rotated_family_is_linear_in_lambda_eps(p in poly(3), q in poly(3), (x, y) in point(), l in -1.0..1.0f64, e in -1.0..1.0f64) {
        let f = PolyVectorField::new(p, q);
        let rot = f.rotate_family(l, e).eval([x, y]);
        let [a, b] = f.eval([x, y]);
        let [c, d] = f.perp().eval([x, y]);
        prop_assert!(close(rot[0], a + l * e * c, 1e-12));
        prop_assert!(close(rot[1], b + l * e * d, 1e-12));
    }
}

/// Distinct real roots on a 0.3-spaced grid plus well-separated complex pairs.
fn roots() -> impl Strategy<Value = (Vec<f64>, Vec<(f64, f64)>)> {
    let grid: Vec<f64> = (-5..=5).map(|k| 0.3 * k as f64).collect();
    (0usize..=2)
        .prop_flat_map(move |pairs| {
            (
                prop::sample::subsequence(grid.clone(), 0..=(6 - 2 * pairs).min(6)),
                prop::collection::vec((-1.0..1.0f64, 0.3..1.2f64), pairs),
            )
        })
        .prop_filter("degree at least 1", |(r, p)| r.len() + 2 * p.len() >= 1)
        .prop_filter("pairs separated", |(_, p)| {
            p.iter().enumerate().all(|(i, a)| p[..i].iter().all(|b| (a.0 - b.0).hypot(a.1 - b.1) > 0.3))
        })
}

proptest! {
    #[test]
    fn discriminant_sign_law((real, pairs) in roots()) {
        let p = MonicPoly::from_roots(&real, &pairs).unwrap();
        let d = p.degree();
        let census = sturm_census(&p);
        prop_assert_eq!(census.distinct_real, real.len());
        prop_assert!(!census.repeated);
        if d >= 2 {
            let delta = discriminant(&p).unwrap();
            let want = if pairs.len() % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert_eq!(delta.signum(), want);
            prop_assert!(root_count_congruence(d, delta).unwrap().contains(&real.len()));
        }
    }

    #[test]
    fn discriminant_is_translation_invariant((real, pairs) in roots(), t in -0.5..0.5f64) {
        prop_assume!(real.len() + 2 * pairs.len() >= 2);
        let p = MonicPoly::from_roots(&real, &pairs).unwrap();
        let shifted_real: Vec<f64> = real.iter().map(|r| r + t).collect();
        let shifted_pairs: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (a + t, b)).collect();
        let q = MonicPoly::from_roots(&shifted_real, &shifted_pairs).unwrap();
        let (a, b) = (discriminant(&p).unwrap(), discriminant(&q).unwrap());
        prop_assert!((a - b).abs() <= 1e-6 * a.abs(), "{} vs {}", a, b);
    }

    #[test]
    fn discriminant_matches_root_product((real, pairs) in roots()) {
        prop_assume!(real.len() + 2 * pairs.len() >= 2);
        let p = MonicPoly::from_roots(&real, &pairs).unwrap();
        let mut all: Vec<(f64, f64)> = real.iter().map(|&r| (r, 0.0)).collect();
        for &(a, b) in &pairs {
            all.push((a, b));
            all.push((a, -b));
        }
        // Δ = ∏_{i<j} (r_i - r_j)², as a complex product that is real in the end.
        let (mut re, mut im) = (1.0, 0.0);
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                let (dr, di) = (all[i].0 - all[j].0, all[i].1 - all[j].1);
                let (sr, si) = (dr * dr - di * di, 2.0 * dr * di);
                (re, im) = (re * sr - im * si, re * si + im * sr);
            }
        }
        let delta = discriminant(&p).unwrap();
        prop_assert!(im.abs() <= 1e-9 * re.abs().max(1e-300));
        prop_assert!((delta - re).abs() <= 1e-7 * re.abs(), "{} vs {}", delta, re);
    }
}
