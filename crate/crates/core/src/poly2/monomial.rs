use std::collections::BTreeMap;

use super::Axis;

/// Bivariate polynomial stored as a map from exponent pairs `(i, j)` to the
/// coefficient of `x^i y^j`. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Monomial {
    terms: BTreeMap<(u32, u32), f64>,
}

impl Monomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([((0, 0), c)])
    }

    /// Builds a polynomial from `((i, j), coefficient)` pairs. Repeated
    /// exponents are summed; terms that cancel to zero are dropped.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = ((u32, u32), f64)>,
    {
        let mut out = Self::zero();
        for (e, c) in terms {
            out.add_term(e, c);
        }
        out
    }

    pub(crate) fn add_term(&mut self, e: (u32, u32), c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(e).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.terms.iter().map(|(&e, &c)| (e, c))
    }

    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.terms.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|&(i, j)| i + j).max()
    }

    /// Largest exponent of `x` and of `y` appearing in any term.
    pub fn partial_degrees(&self) -> (u32, u32) {
        self.terms
            .keys()
            .fold((0, 0), |(a, b), &(i, j)| (a.max(i), b.max(j)))
    }

    /// Horner in `x` for each power of `y`, then Horner in `y`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        let (dx, dy) = self.partial_degrees();
        let mut rows = vec![vec![0.0; dx as usize + 1]; dy as usize + 1];
        for (&(i, j), &c) in &self.terms {
            rows[j as usize][i as usize] = c;
        }
        let mut acc = 0.0;
        for row in rows.iter().rev() {
            let inner = row.iter().rev().fold(0.0, |a, &c| a * x + c);
            acc = acc * y + inner;
        }
        acc
    }

    pub fn derivative(&self, axis: Axis, order: u32) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &c) in &self.terms {
            let (k, rest) = match axis {
                Axis::X => (i, j),
                Axis::Y => (j, i),
            };
            if k < order {
                continue;
            }
            let factor: f64 = ((k - order + 1)..=k).map(f64::from).product();
            let e = match axis {
                Axis::X => (k - order, rest),
                Axis::Y => (rest, k - order),
            };
            out.add_term(e, c * factor);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&e, &c) in &other.terms {
            out.add_term(e, c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(i1, j1), &c1) in &self.terms {
            for (&(i2, j2), &c2) in &other.terms {
                out.add_term((i1 + i2, j1 + j2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        Self::from_terms(self.terms.iter().map(|(&e, &v)| (e, v * c)))
    }
}
