//! Bivariate real polynomials in the monomial basis or a tensor Bernstein
//! basis over a box.
//!
//! Arithmetic stays basis-native whenever a Bernstein operand is involved:
//! monomial operands are re-expressed on the Bernstein operand's box (an
//! exact, well-conditioned direction), and Bernstein operands on different
//! boxes are reparametrized onto a common box. Conversion from Bernstein to
//! monomial form is only done on request and is capped at total degree
//! [`MONOMIAL_CONVERSION_CAP`].

mod bernstein;
mod monomial;
mod parse;

pub use bernstein::{basis_values, basis_values_banded, Bernstein, Rect};
pub use monomial::Monomial;
pub use parse::parse_poly;

pub(crate) use bernstein::{binomial, linspace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MONOMIAL_CONVERSION_CAP: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PolyError {
    #[error("Bernstein-to-monomial conversion of total degree {degree} exceeds the cap {cap}")]
    ConversionOverflow { degree: usize, cap: usize },
    #[error("degenerate box [{x0}, {x1}] x [{y0}, {y1}]")]
    DegenerateBox { x0: f64, x1: f64, y0: f64, y1: f64 },
    #[error("expected {expected} Bernstein coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("Bernstein degrees {got:?} too low for a polynomial of partial degrees {need:?}")]
    DegreeTooLow { need: (usize, usize), got: (usize, usize) },
    #[error("polynomial literal, position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Poly2 {
    Monomial(Monomial),
    Bernstein(Bernstein),
}

impl Default for Poly2 {
    fn default() -> Self {
        Self::zero()
    }
}

impl From<Monomial> for Poly2 {
    fn from(p: Monomial) -> Self {
        Poly2::Monomial(p)
    }
}

impl From<Bernstein> for Poly2 {
    fn from(p: Bernstein) -> Self {
        Poly2::Bernstein(p)
    }
}

impl Poly2 {
    pub fn zero() -> Self {
        Poly2::Monomial(Monomial::zero())
    }

    pub fn constant(c: f64) -> Self {
        Poly2::Monomial(Monomial::constant(c))
    }

    pub fn x() -> Self {
        Poly2::Monomial(Monomial::from_terms([((1, 0), 1.0)]))
    }

    pub fn y() -> Self {
        Poly2::Monomial(Monomial::from_terms([((0, 1), 1.0)]))
    }

    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = ((u32, u32), f64)>,
    {
        Poly2::Monomial(Monomial::from_terms(terms))
    }

    pub fn parse(src: &str) -> Result<Self, PolyError> {
        parse_poly(src).map(Poly2::Monomial)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Poly2::Monomial(p) => p.is_zero(),
            Poly2::Bernstein(p) => p.is_zero(),
        }
    }

    /// Total degree of the representation (`None` for the zero polynomial).
    /// For Bernstein form this is `m + n`, an upper bound on the true degree.
    pub fn degree(&self) -> Option<u32> {
        match self {
            Poly2::Monomial(p) => p.degree(),
            Poly2::Bernstein(p) if p.is_zero() => None,
            Poly2::Bernstein(p) => {
                let (m, n) = p.degrees();
                Some((m + n) as u32)
            }
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Poly2::Monomial(p) => p.eval(x, y),
            Poly2::Bernstein(p) => p.eval(x, y),
        }
    }

    /// Values on `xs × ys` with the `x` index outermost.
    pub fn eval_grid(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        match self {
            Poly2::Bernstein(p) => p.eval_grid(xs, ys),
            Poly2::Monomial(p) => xs
                .iter()
                .flat_map(|&x| ys.iter().map(move |&y| p.eval(x, y)))
                .collect(),
        }
    }

    pub fn derivative(&self, axis: Axis, order: u32) -> Poly2 {
        match self {
            Poly2::Monomial(p) => Poly2::Monomial(p.derivative(axis, order)),
            Poly2::Bernstein(p) => Poly2::Bernstein(p.derivative(axis, order)),
        }
    }

    /// `∂^{i+j} / ∂x^i ∂y^j`.
    pub fn partial(&self, i: u32, j: u32) -> Poly2 {
        self.derivative(Axis::X, i).derivative(Axis::Y, j)
    }

    pub fn add(&self, other: &Poly2) -> Poly2 {
        match (self, other) {
            (Poly2::Monomial(a), Poly2::Monomial(b)) => Poly2::Monomial(a.add(b)),
            _ => {
                let (a, b) = common_bernstein(self, other);
                Poly2::Bernstein(a.add_same_box(&b))
            }
        }
    }

    pub fn sub(&self, other: &Poly2) -> Poly2 {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Poly2) -> Poly2 {
        match (self, other) {
            (Poly2::Monomial(a), Poly2::Monomial(b)) => Poly2::Monomial(a.mul(b)),
            _ => {
                let (a, b) = common_bernstein(self, other);
                Poly2::Bernstein(a.mul_same_box(&b))
            }
        }
    }

    pub fn scale(&self, c: f64) -> Poly2 {
        match self {
            Poly2::Monomial(p) => Poly2::Monomial(p.scale(c)),
            Poly2::Bernstein(p) => Poly2::Bernstein(p.scale(c)),
        }
    }

    pub fn to_monomial(&self) -> Result<Monomial, PolyError> {
        match self {
            Poly2::Monomial(p) => Ok(p.clone()),
            Poly2::Bernstein(p) => p.to_monomial(MONOMIAL_CONVERSION_CAP),
        }
    }

    /// Bernstein form on `rect` with the smallest degrees that represent `self` exactly
    /// (for Bernstein input: its own degrees, reparametrized when the box differs).
    pub fn to_bernstein(&self, rect: Rect) -> Result<Bernstein, PolyError> {
        match self {
            Poly2::Monomial(p) => {
                let (dx, dy) = p.partial_degrees();
                Bernstein::from_monomial(p, rect, dx as usize, dy as usize)
            }
            Poly2::Bernstein(p) if p.rect() == rect => Ok(p.clone()),
            Poly2::Bernstein(p) => p.reparametrize(rect),
        }
    }

    /// Bernstein input reparametrized onto `new_rect`.
    pub fn reparametrize_box(&self, new_rect: Rect) -> Result<Poly2, PolyError> {
        match self {
            Poly2::Bernstein(p) => p.reparametrize(new_rect).map(Poly2::Bernstein),
            Poly2::Monomial(_) => self.to_bernstein(new_rect).map(Poly2::Bernstein),
        }
    }

    pub fn as_bernstein(&self) -> Option<&Bernstein> {
        match self {
            Poly2::Bernstein(p) => Some(p),
            Poly2::Monomial(_) => None,
        }
    }

    pub fn as_monomial(&self) -> Option<&Monomial> {
        match self {
            Poly2::Monomial(p) => Some(p),
            Poly2::Bernstein(_) => None,
        }
    }
}

/// Both operands in Bernstein form on one box (the box of the first Bernstein operand).
fn common_bernstein(a: &Poly2, b: &Poly2) -> (Bernstein, Bernstein) {
    let rect = match (a, b) {
        (Poly2::Bernstein(p), _) | (_, Poly2::Bernstein(p)) => p.rect(),
        _ => unreachable!("common_bernstein needs a Bernstein operand"),
    };
    // Boxes come from validated Bernstein values, so the conversions cannot fail.
    let conv = |p: &Poly2| p.to_bernstein(rect).expect("valid box");
    (conv(a), conv(b))
}
