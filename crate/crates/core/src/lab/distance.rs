//! Sampled C^r sizes of the gradient-collapse perturbation `λ R ∇R`, by the
//! Leibniz rule on tabulated partials of `R` (the product polynomials are
//! never formed).

use std::collections::HashMap;

use rayon::prelude::*;

use crate::bernstein::{multi_indices, BernsteinError, SampledField};
use crate::poly2::{binomial, linspace, Poly2, Rect};

/// Partials `∂^{(i,j)}` with `i + j <= order` on a `density²` grid, x index outermost.
struct Jets {
    table: HashMap<(u32, u32), Vec<f64>>,
    points: usize,
}

impl Jets {
    fn of_poly(p: &Poly2, rect: Rect, order: u32, density: usize) -> Self {
        let xs = linspace(rect.x0, rect.x1, density);
        let ys = linspace(rect.y0, rect.y1, density);
        let table = multi_indices(order)
            .into_par_iter()
            .map(|(i, j)| ((i, j), p.partial(i, j).eval_grid(&xs, &ys)))
            .collect();
        Self { table, points: density * density }
    }

    fn of_sampled(f: &SampledField, rect: Rect, order: u32, density: usize) -> Result<Self, BernsteinError> {
        let xs = linspace(rect.x0, rect.x1, density);
        let ys = linspace(rect.y0, rect.y1, density);
        let table = multi_indices(order)
            .into_par_iter()
            .map(|(i, j)| {
                let mut v = Vec::with_capacity(density * density);
                for &x in &xs {
                    for &y in &ys {
                        v.push(f.partial(i, j, x, y)?);
                    }
                }
                Ok(((i, j), v))
            })
            .collect::<Result<_, BernsteinError>>()?;
        Ok(Self { table, points: density * density })
    }

    /// `∂^{(a,b)} (R ∂R/∂x, R ∂R/∂y)` at grid point `k`.
    fn collapse(&self, a: u32, b: u32, k: usize) -> [f64; 2] {
        let mut out = [0.0; 2];
        for i in 0..=a {
            for j in 0..=b {
                let w = binomial(a, i) * binomial(b, j);
                let r = self.table[&(i, j)][k];
                out[0] += w * r * self.table[&(a - i + 1, b - j)][k];
                out[1] += w * r * self.table[&(a - i, b - j + 1)][k];
            }
        }
        out
    }
}

/// `cr_distance(X, X + λ R ∇R)` on `rect`: the largest Euclidean norm of
/// `λ ∂^k(R ∇R)` over grid points and `|k| <= r`.
pub fn collapse_cr_norm(r_poly: &Poly2, lambda: f64, rect: Rect, r: u32, density: usize) -> f64 {
    norm(&Jets::of_poly(r_poly, rect, r + 1, density), lambda, r)
}

fn norm(jets: &Jets, lambda: f64, r: u32) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, b) in multi_indices(r) {
        for k in 0..jets.points {
            let [u, v] = jets.collapse(a, b, k);
            worst = worst.max(lambda.abs() * u.hypot(v));
        }
    }
    worst
}

/// Sampled C^r distance between `X + λ R ∇R` and `X + λ F ∇F`.
pub fn collapse_gap(
    r_poly: &Poly2,
    f: &SampledField,
    lambda: f64,
    rect: Rect,
    r: u32,
    density: usize,
) -> Result<f64, BernsteinError> {
    let jr = Jets::of_poly(r_poly, rect, r + 1, density);
    let jf = Jets::of_sampled(f, rect, r + 1, density)?;
    Ok(gap(&jr, &jf, lambda, r))
}

fn gap(jr: &Jets, jf: &Jets, lambda: f64, r: u32) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, b) in multi_indices(r) {
        for k in 0..jr.points {
            let [u1, v1] = jr.collapse(a, b, k);
            let [u2, v2] = jf.collapse(a, b, k);
            worst = worst.max(lambda.abs() * (u1 - u2).hypot(v1 - v2));
        }
    }
    worst
}

/// One row of the distance log kept by the splitting pipeline.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DistanceLogEntry {
    /// Bernstein degree `m = n`; absent when `F` is used exactly.
    pub degree: Option<usize>,
    /// `cr_distance(X, X_{λ,n})`.
    pub cr_distance: f64,
    /// Distance from `X_{λ,n}` to `X + λ F ∇F`.
    pub gap_to_limit: f64,
}

/// The log for a sampled `F`: one entry per degree in increasing order.
pub fn distance_log(
    f: &SampledField,
    degrees: &[usize],
    lambda: f64,
    rect: Rect,
    r: u32,
    density: usize,
) -> Result<Vec<DistanceLogEntry>, BernsteinError> {
    let jf = Jets::of_sampled(f, rect, r + 1, density)?;
    let mut degrees = degrees.to_vec();
    degrees.sort_unstable();
    degrees.dedup();
    degrees
        .into_iter()
        .map(|m| {
            let rm = crate::bernstein::bernstein_fit(f, m, m, rect)?;
            let jr = Jets::of_poly(&rm, rect, r + 1, density);
            Ok(DistanceLogEntry {
                degree: Some(m),
                cr_distance: norm(&jr, lambda, r),
                gap_to_limit: gap(&jr, &jf, lambda, r),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{cr_distance, ck, unit_circle_defect};

    #[test]
    fn matches_cr_distance_of_the_product_field() {
        let x = ck(2);
        let rect = Rect::centered_square(1.5).unwrap();
        let f = unit_circle_defect();
        let b = Poly2::Bernstein(f.to_bernstein(rect).unwrap().elevate(3, 5));
        for (poly, r) in [(&f, 0), (&f, 2), (&b, 1)] {
            let want = cr_distance(&x, &x.gradient_collapse_family(poly, 0.03), rect, r, 60);
            let got = collapse_cr_norm(poly, 0.03, rect, r, 60);
            assert!((want - got).abs() < 1e-10 * want.max(1.0), "r = {r}: {want} vs {got}");
        }
    }

    #[test]
    fn gap_vanishes_for_the_exact_function() {
        let rect = Rect::centered_square(1.5).unwrap();
        let f = unit_circle_defect();
        let sampled = SampledField::from_poly(f.clone(), 3);
        assert!(collapse_gap(&f, &sampled, 0.02, rect, 2, 60).unwrap() < 1e-12);
        let log = distance_log(&sampled, &[8, 2, 4], 0.02, rect, 1, 60).unwrap();
        assert_eq!(log.iter().map(|e| e.degree.unwrap()).collect::<Vec<_>>(), vec![2, 4, 8]);
        // The Bernstein operator only reproduces affine functions, so the gap
        // is positive and shrinks like 1/m.
        let gaps: Vec<f64> = log.iter().map(|e| e.gap_to_limit).collect();
        assert!(gaps[0] > 1e-3 && gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
        assert!((gaps[1] / gaps[2] - 2.0).abs() < 0.3, "{gaps:?}");
    }
}
