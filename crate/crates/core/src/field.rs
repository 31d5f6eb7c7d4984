//! Planar polynomial vector fields and the perturbation families built on them.

use std::cell::RefCell;
use std::ops::Range;
use std::sync::OnceLock;

use thiserror::Error;

use crate::bernstein::multi_indices;
use crate::poly2::{basis_values, basis_values_banded, linspace, Axis, Poly2, PolyError, Rect};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("unknown system '{0}' (expected CK(k) or vanderpol(mu))")]
    UnknownSystem(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Anything that can be integrated as an autonomous planar system.
pub trait PlanarField: Sync {
    fn eval(&self, p: [f64; 2]) -> [f64; 2];
    fn divergence_at(&self, p: [f64; 2]) -> f64;
}

/// `X = (P, Q)`.
#[derive(Debug, Clone)]
pub struct PolyVectorField {
    p: Poly2,
    q: Poly2,
    div: OnceLock<Poly2>,
}

impl PartialEq for PolyVectorField {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.q == other.q
    }
}

impl PolyVectorField {
    pub fn new(p: Poly2, q: Poly2) -> Self {
        Self { p, q, div: OnceLock::new() }
    }

    pub fn parse(p: &str, q: &str) -> Result<Self, FieldError> {
        Ok(Self::new(Poly2::parse(p)?, Poly2::parse(q)?))
    }

    pub fn p(&self) -> &Poly2 {
        &self.p
    }

    pub fn q(&self) -> &Poly2 {
        &self.q
    }

    pub fn degree(&self) -> Option<u32> {
        self.p.degree().max(self.q.degree())
    }

    /// `∂P/∂x + ∂Q/∂y`.
    pub fn divergence(&self) -> &Poly2 {
        self.div.get_or_init(|| {
            self.p.derivative(Axis::X, 1).add(&self.q.derivative(Axis::Y, 1))
        })
    }

    /// `X^⊥ = (-Q, P)`.
    pub fn perp(&self) -> Self {
        Self::new(self.q.scale(-1.0), self.p.clone())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.p.scale(c), self.q.scale(c))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.p.add(&other.p), self.q.add(&other.q))
    }

    /// `(P - λεQ, Q + λεP)`. Only the product `λε` enters the field; the two
    /// factors are kept apart because `ε` fixes the neighbourhood and `λ`
    /// runs along the path.
    pub fn rotate_family(&self, lambda: f64, eps: f64) -> Self {
        let c = lambda * eps;
        if c == 0.0 {
            return self.clone();
        }
        Self::new(self.p.sub(&self.q.scale(c)), self.q.add(&self.p.scale(c)))
    }

    /// `(P + λ R ∂R/∂x, Q + λ R ∂R/∂y)`.
    pub fn gradient_collapse_family(&self, r: &Poly2, lambda: f64) -> Self {
        if lambda == 0.0 {
            return self.clone();
        }
        let rx = r.derivative(Axis::X, 1);
        let ry = r.derivative(Axis::Y, 1);
        Self::new(
            self.p.add(&r.mul(&rx).scale(lambda)),
            self.q.add(&r.mul(&ry).scale(lambda)),
        )
    }

    /// Time reversal, `-X`.
    pub fn reversed(&self) -> Self {
        self.scale(-1.0)
    }

    /// Largest `|P|`, `|Q|` coefficient difference in the monomial basis.
    /// Used only for low-degree monomial fields.
    pub fn coefficient_distance(&self, other: &Self) -> Result<f64, FieldError> {
        let mut worst: f64 = 0.0;
        for (a, b) in [(&self.p, &other.p), (&self.q, &other.q)] {
            let d = a.sub(b).to_monomial()?;
            worst = d.terms().fold(worst, |w, (_, c)| w.max(c.abs()));
        }
        Ok(worst)
    }
}

impl PlanarField for PolyVectorField {
    fn eval(&self, pt: [f64; 2]) -> [f64; 2] {
        let [x, y] = pt;
        if let (Poly2::Bernstein(bp), Poly2::Bernstein(bq)) = (&self.p, &self.q) {
            if bp.rect() == bq.rect() && bp.degrees() == bq.degrees() {
                let (u, v) = bp.rect().to_unit(x, y);
                let (m, n) = bp.degrees();
                let (mut bx, mut by) = (Vec::with_capacity(m + 1), Vec::with_capacity(n + 1));
                basis_values(m, u, &mut bx);
                basis_values(n, v, &mut by);
                return [bp.contract(&bx, &by), bq.contract(&bx, &by)];
            }
        }
        [self.p.eval(x, y), self.q.eval(x, y)]
    }

    fn divergence_at(&self, pt: [f64; 2]) -> f64 {
        self.divergence().eval(pt[0], pt[1])
    }
}

/// `X + λ R ∇R` evaluated from `R` and its partials instead of the product
/// polynomials. For a tensor Bernstein `R` the basis vectors are shared
/// between `R`, `∂R` and `∂²R` and only their non-negligible band is used,
/// which keeps high-degree surrogates affordable inside an integrator.
#[derive(Debug, Clone)]
pub struct GradientCollapse {
    x: PolyVectorField,
    lambda: f64,
    r: Poly2,
    rx: Poly2,
    ry: Poly2,
    rxx: Poly2,
    ryy: Poly2,
}

impl GradientCollapse {
    pub fn new(x: &PolyVectorField, r: &Poly2, lambda: f64) -> Self {
        Self {
            x: x.clone(),
            lambda,
            r: r.clone(),
            rx: r.derivative(Axis::X, 1),
            ry: r.derivative(Axis::Y, 1),
            rxx: r.derivative(Axis::X, 2),
            ryy: r.derivative(Axis::Y, 2),
        }
    }

    pub fn base(&self) -> &PolyVectorField {
        &self.x
    }

    pub fn r(&self) -> &Poly2 {
        &self.r
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The same field as polynomials, `gradient_collapse_family(X, R, λ)`.
    pub fn to_poly_field(&self) -> PolyVectorField {
        self.x.gradient_collapse_family(&self.r, self.lambda)
    }

    /// `[R, R_x, R_y, R_xx, R_yy]` at `p`.
    fn jet(&self, p: [f64; 2], second: bool) -> [f64; 5] {
        let polys = [&self.r, &self.rx, &self.ry, &self.rxx, &self.ryy];
        let count = if second { 5 } else { 3 };
        let mut out = [0.0; 5];
        if let Poly2::Bernstein(b) = &self.r {
            let (u, v) = b.rect().to_unit(p[0], p[1]);
            let (m, n) = b.degrees();
            BANDS.with(|cell| {
                let mut bands = cell.borrow_mut();
                let (xs, ys) = bands.split_at_mut(3);
                let rx: [Range<usize>; 3] = std::array::from_fn(|k| basis_values_banded(m.saturating_sub(k), u, &mut xs[k]));
                let ry: [Range<usize>; 3] = std::array::from_fn(|k| basis_values_banded(n.saturating_sub(k), v, &mut ys[k]));
                for (slot, poly) in polys.iter().enumerate().take(count) {
                    let Poly2::Bernstein(q) = poly else { unreachable!("partials keep the basis") };
                    let (qm, qn) = q.degrees();
                    let (i, j) = (m - qm, n - qn);
                    out[slot] = q.contract_banded(&xs[i], rx[i].clone(), &ys[j], ry[j].clone());
                }
            });
        } else {
            for (slot, poly) in polys.iter().enumerate().take(count) {
                out[slot] = poly.eval(p[0], p[1]);
            }
        }
        out
    }
}

thread_local! {
    static BANDS: RefCell<[Vec<f64>; 6]> = RefCell::new(Default::default());
}

impl PlanarField for GradientCollapse {
    fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let [u, v] = self.x.eval(p);
        let [r, rx, ry, ..] = self.jet(p, false);
        [u + self.lambda * r * rx, v + self.lambda * r * ry]
    }

    fn divergence_at(&self, p: [f64; 2]) -> f64 {
        let [r, rx, ry, rxx, ryy] = self.jet(p, true);
        self.x.divergence_at(p) + self.lambda * (rx * rx + ry * ry + r * (rxx + ryy))
    }
}

/// Negated field without rebuilding polynomials.
pub struct Reversed<'a, F: PlanarField + ?Sized>(pub &'a F);

impl<F: PlanarField + ?Sized> PlanarField for Reversed<'_, F> {
    fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let [a, b] = self.0.eval(p);
        [-a, -b]
    }

    fn divergence_at(&self, p: [f64; 2]) -> f64 {
        -self.0.divergence_at(p)
    }
}

/// Sampled Whitney C^r distance on `rect`: the maximum over grid points and
/// multi-indices `|k| <= r` of the Euclidean norm of `∂^k X - ∂^k Y`.
pub fn cr_distance(
    a: &PolyVectorField,
    b: &PolyVectorField,
    rect: Rect,
    r: u32,
    grid_density: usize,
) -> f64 {
    let xs = linspace(rect.x0, rect.x1, grid_density);
    let ys = linspace(rect.y0, rect.y1, grid_density);
    let mut worst: f64 = 0.0;
    for (i, j) in multi_indices(r) {
        let grid = |p: &Poly2| p.partial(i, j).eval_grid(&xs, &ys);
        let (pa, qa, pb, qb) = (grid(&a.p), grid(&a.q), grid(&b.p), grid(&b.q));
        for k in 0..pa.len() {
            worst = worst.max((pa[k] - pb[k]).hypot(qa[k] - qb[k]));
        }
    }
    worst
}

/// `1 - x² - y²`.
pub fn unit_circle_defect() -> Poly2 {
    Poly2::from_terms([((0, 0), 1.0), ((2, 0), -1.0), ((0, 2), -1.0)])
}

/// `(-y + x s^k, x + y s^k)` with `s = 1 - x² - y²`: the unit circle is a
/// limit cycle of multiplicity `k` (polar form `ṙ = r s^k`, `θ̇ = 1`).
pub fn ck(k: u32) -> PolyVectorField {
    let s = unit_circle_defect();
    let sk = (0..k).fold(Poly2::constant(1.0), |acc, _| acc.mul(&s));
    PolyVectorField::new(
        Poly2::y().scale(-1.0).add(&Poly2::x().mul(&sk)),
        Poly2::x().add(&Poly2::y().mul(&sk)),
    )
}

/// `ẋ = y, ẏ = μ(1 - x²)y - x`.
pub fn van_der_pol(mu: f64) -> PolyVectorField {
    PolyVectorField::new(
        Poly2::y(),
        Poly2::from_terms([((0, 1), mu), ((2, 1), -mu), ((1, 0), -1.0)]),
    )
}

/// Registry lookup: `CK(k)` or `vanderpol(mu)` (case-insensitive, spaces ignored).
pub fn registry(name: &str) -> Result<PolyVectorField, FieldError> {
    let compact: String = name.chars().filter(|c| !c.is_whitespace()).collect();
    let lower = compact.to_ascii_lowercase();
    let arg = |prefix: &str| -> Option<&str> {
        lower.strip_prefix(prefix).and_then(|rest| rest.strip_prefix('(')).and_then(|rest| rest.strip_suffix(')'))
    };
    if let Some(k) = arg("ck").and_then(|a| a.parse::<u32>().ok()).filter(|&k| k >= 1) {
        return Ok(ck(k));
    }
    if let Some(mu) = arg("vanderpol").and_then(|a| a.parse::<f64>().ok()) {
        return Ok(van_der_pol(mu));
    }
    Err(FieldError::UnknownSystem(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_examples() {
        let radial = PolyVectorField::new(Poly2::x(), Poly2::y());
        assert_eq!(radial.divergence(), &Poly2::constant(2.0));
        let rot = PolyVectorField::new(Poly2::y().scale(-1.0), Poly2::x());
        assert!(rot.divergence().is_zero());
        // div CK(3) = 2 s^3 - 6 s^2 (x^2 + y^2)
        let s = unit_circle_defect();
        let r2 = Poly2::parse("x^2 + y^2").unwrap();
        let want = s.mul(&s).mul(&s).scale(2.0).sub(&s.mul(&s).mul(&r2).scale(6.0));
        let got = ck(3).divergence().clone();
        assert!(got.sub(&want).is_zero());
        for t in [0.0f64, 0.7, 2.0, 4.4] {
            assert!(got.eval(t.cos(), t.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn perp_examples() {
        let e1 = PolyVectorField::new(Poly2::constant(1.0), Poly2::zero());
        assert_eq!(e1.perp(), PolyVectorField::new(Poly2::zero(), Poly2::constant(1.0)));
        let x = ck(2);
        assert_eq!(x.perp().perp(), x.scale(-1.0));
        assert_eq!(ck(1).perp().eval([1.0, 0.0]), [-1.0, 0.0]);
    }

    #[test]
    fn rotate_family_examples() {
        let x = ck(2);
        assert_eq!(x.rotate_family(0.0, 0.3), x);
        assert_eq!(x.rotate_family(0.5, 0.02), x.add(&x.perp().scale(0.01)));
        // radial component r (s^2 - 0.01)
        let y = x.rotate_family(1.0, 0.01);
        for &(r, t) in &[(0.8f64, 0.3f64), (1.1, 2.0), (1.0, 5.0)] {
            let (px, py) = (r * t.cos(), r * t.sin());
            let [u, v] = y.eval([px, py]);
            let s = 1.0 - r * r;
            assert!(((px * u + py * v) / r - r * (s * s - 0.01)).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_collapse_examples() {
        let x = ck(3);
        let f = unit_circle_defect();
        assert_eq!(x.gradient_collapse_family(&f, 0.0), x);
        assert_eq!(x.gradient_collapse_family(&Poly2::constant(4.0), 0.3), x);
        let y = x.gradient_collapse_family(&f, 0.02);
        for &(r, t) in &[(0.9f64, 1.0f64), (1.2, -0.4), (0.5, 3.0)] {
            let (px, py) = (r * t.cos(), r * t.sin());
            let [u, v] = y.eval([px, py]);
            let s = 1.0 - r * r;
            assert!(((px * u + py * v) / r - r * s * (s * s - 0.04)).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_collapse_evaluator_matches_polynomials() {
        let x = ck(3);
        let rect = Rect::centered_square(1.5).unwrap();
        let f = unit_circle_defect();
        for r in [f.clone(), Poly2::Bernstein(f.to_bernstein(rect).unwrap().elevate(9, 4))] {
            let fast = GradientCollapse::new(&x, &r, 0.02);
            let slow = fast.to_poly_field();
            for &p in &[[0.9, 0.1], [-1.2, 0.7], [0.0, -1.05], [1.5, 1.5]] {
                let (a, b) = (fast.eval(p), slow.eval(p));
                assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12, "{a:?} vs {b:?}");
                assert!((fast.divergence_at(p) - slow.divergence_at(p)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn cr_distance_examples() {
        let rect = Rect::centered_square(1.5).unwrap();
        let x = ck(2);
        assert_eq!(cr_distance(&x, &x, rect, 2, 60), 0.0);
        let shifted = PolyVectorField::new(x.p().add(&Poly2::constant(1e-3)), x.q().clone());
        for r in 0..3 {
            assert!((cr_distance(&x, &shifted, rect, r, 60) - 1e-3).abs() < 1e-12);
        }
    }

    #[test]
    fn registry_names() {
        assert_eq!(registry("CK(3)").unwrap(), ck(3));
        assert_eq!(registry(" vanderpol( 1.0 )").unwrap(), van_der_pol(1.0));
        assert!(registry("CK(0)").is_err());
        assert!(registry("lorenz").is_err());
    }
}
