use serde::{Deserialize, Serialize};

use super::monomial::Monomial;
use super::{Axis, PolyError};

/// Axis-aligned box `[x0, x1] × [y0, y1]` carrying a Bernstein basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self, PolyError> {
        if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(PolyError::DegenerateBox { x0, x1, y0, y1 });
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    /// `[-h, h]²`.
    pub fn centered_square(half_width: f64) -> Result<Self, PolyError> {
        Self::new(-half_width, half_width, -half_width, half_width)
    }

    pub fn unit() -> Self {
        Self { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn to_unit(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.x0) / self.width(), (y - self.y0) / self.height())
    }

    pub fn from_unit(&self, u: f64, v: f64) -> (f64, f64) {
        (self.x0 + u * self.width(), self.y0 + v * self.height())
    }

    /// `n` evenly spaced abscissae from `x0` to `x1` inclusive.
    pub fn grid_x(&self, n: usize) -> Vec<f64> {
        linspace(self.x0, self.x1, n)
    }

    pub fn grid_y(&self, n: usize) -> Vec<f64> {
        linspace(self.y0, self.y1, n)
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    b
                } else {
                    a + (b - a) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Bernstein basis values `B_k^deg(t)`, `k = 0..=deg`, by the triangular
/// recurrence `B_k^{d} = (1-t) B_k^{d-1} + t B_{k-1}^{d-1}`.
pub fn basis_values(deg: usize, t: f64, out: &mut Vec<f64>) {
    out.clear();
    out.resize(deg + 1, 0.0);
    out[0] = 1.0;
    let s = 1.0 - t;
    for d in 1..=deg {
        let mut prev = 0.0;
        for k in 0..d {
            let cur = out[k];
            out[k] = s * cur + prev;
            prev = t * cur;
        }
        out[d] = prev;
    }
}

/// Bernstein basis values of degree `deg` at `t ∈ [0, 1]`, computed outward
/// from the largest one by term ratios in O(deg). Values below `1e-20` of the
/// peak are left at zero; the returned range holds the others.
pub fn basis_values_banded(deg: usize, t: f64, out: &mut Vec<f64>) -> std::ops::Range<usize> {
    out.clear();
    out.resize(deg + 1, 0.0);
    let t = t.clamp(0.0, 1.0);
    if t == 0.0 || deg == 0 {
        out[0] = 1.0;
        return 0..1;
    }
    if t == 1.0 {
        out[deg] = 1.0;
        return deg..deg + 1;
    }
    let s = 1.0 - t;
    let peak = (((deg + 1) as f64 * t).floor() as usize).min(deg);
    // C(deg, peak) t^peak s^(deg - peak), keeping the running product near 1.
    let mut acc = 1.0;
    let mut rem = deg - peak;
    for i in 0..peak {
        acc *= (deg - i) as f64 / (i + 1) as f64 * t;
        while acc > 1.0 && rem > 0 {
            acc *= s;
            rem -= 1;
        }
    }
    acc *= s.powi(rem as i32);
    out[peak] = acc;
    let floor = 1e-20 * acc;
    let ratio = t / s;
    let mut hi = peak;
    while hi < deg {
        let next = out[hi] * (deg - hi) as f64 / (hi + 1) as f64 * ratio;
        if next < floor {
            break;
        }
        hi += 1;
        out[hi] = next;
    }
    let mut lo = peak;
    while lo > 0 {
        let next = out[lo] * lo as f64 / (deg - lo + 1) as f64 / ratio;
        if next < floor {
            break;
        }
        lo -= 1;
        out[lo] = next;
    }
    lo..hi + 1
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Weights `C(a,i) C(b,j) / C(a+b,i+j)` used by products and degree elevation.
fn product_weights(a: usize, b: usize) -> Vec<Vec<f64>> {
    let lf = ln_factorials(a + b);
    let ln_c = |n: usize, k: usize| lf[n] - lf[k] - lf[n - k];
    (0..=a)
        .map(|i| {
            (0..=b)
                .map(|j| (ln_c(a, i) + ln_c(b, j) - ln_c(a + b, i + j)).exp())
                .collect()
        })
        .collect()
}

/// Tensor-product Bernstein polynomial of degrees `(m, n)` on a box.
/// Coefficients are stored row-major with the `x` index outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Bernstein {
    deg_x: usize,
    deg_y: usize,
    rect: Rect,
    coeffs: Vec<f64>,
}

impl Bernstein {
    pub fn new(deg_x: usize, deg_y: usize, rect: Rect, coeffs: Vec<f64>) -> Result<Self, PolyError> {
        let rect = Rect::new(rect.x0, rect.x1, rect.y0, rect.y1)?;
        if coeffs.len() != (deg_x + 1) * (deg_y + 1) {
            return Err(PolyError::CoefficientCount {
                expected: (deg_x + 1) * (deg_y + 1),
                got: coeffs.len(),
            });
        }
        Ok(Self { deg_x, deg_y, rect, coeffs })
    }

    pub fn constant(c: f64, rect: Rect) -> Self {
        Self { deg_x: 0, deg_y: 0, rect, coeffs: vec![c] }
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.deg_x, self.deg_y)
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.coeffs[i * (self.deg_y + 1) + j]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (u, v) = self.rect.to_unit(x, y);
        let mut bx = Vec::new();
        let mut by = Vec::new();
        basis_values(self.deg_x, u, &mut bx);
        basis_values(self.deg_y, v, &mut by);
        self.contract(&bx, &by)
    }

    pub(crate) fn contract(&self, bx: &[f64], by: &[f64]) -> f64 {
        let stride = self.deg_y + 1;
        let mut acc = 0.0;
        for (i, &wx) in bx.iter().enumerate() {
            if wx == 0.0 {
                continue;
            }
            let row = &self.coeffs[i * stride..(i + 1) * stride];
            let inner: f64 = row.iter().zip(by).map(|(c, w)| c * w).sum();
            acc += wx * inner;
        }
        acc
    }

    /// [`Self::contract`] restricted to index ranges outside of which the basis vanishes.
    pub(crate) fn contract_banded(&self, bx: &[f64], rx: std::ops::Range<usize>, by: &[f64], ry: std::ops::Range<usize>) -> f64 {
        let stride = self.deg_y + 1;
        let mut acc = 0.0;
        for i in rx {
            let row = &self.coeffs[i * stride + ry.start..i * stride + ry.end];
            let inner: f64 = row.iter().zip(&by[ry.clone()]).map(|(c, w)| c * w).sum();
            acc += bx[i] * inner;
        }
        acc
    }

    /// Values on the tensor grid `xs × ys`, returned with the `x` index outermost.
    pub fn eval_grid(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let stride = self.deg_y + 1;
        let mut b = Vec::new();
        let by: Vec<Vec<f64>> = ys
            .iter()
            .map(|&y| {
                basis_values(self.deg_y, (y - self.rect.y0) / self.rect.height(), &mut b);
                b.clone()
            })
            .collect();
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        let mut partial = vec![0.0; stride];
        for &x in xs {
            basis_values(self.deg_x, (x - self.rect.x0) / self.rect.width(), &mut b);
            partial.iter_mut().for_each(|p| *p = 0.0);
            for (i, &wx) in b.iter().enumerate() {
                let row = &self.coeffs[i * stride..(i + 1) * stride];
                for (p, &c) in partial.iter_mut().zip(row) {
                    *p += wx * c;
                }
            }
            for byv in &by {
                out.push(partial.iter().zip(byv).map(|(p, w)| p * w).sum());
            }
        }
        out
    }

    /// Basis-level derivative: forward differences of the coefficient grid.
    pub fn derivative(&self, axis: Axis, order: u32) -> Self {
        let mut cur = self.clone();
        for _ in 0..order {
            cur = cur.derivative_once(axis);
        }
        cur
    }

    fn derivative_once(&self, axis: Axis) -> Self {
        let (m, n) = (self.deg_x, self.deg_y);
        match axis {
            Axis::X => {
                if m == 0 {
                    return Self::constant(0.0, self.rect).elevate(0, n);
                }
                let s = m as f64 / self.rect.width();
                let mut coeffs = Vec::with_capacity(m * (n + 1));
                for i in 0..m {
                    for j in 0..=n {
                        coeffs.push(s * (self.coeff(i + 1, j) - self.coeff(i, j)));
                    }
                }
                Self { deg_x: m - 1, deg_y: n, rect: self.rect, coeffs }
            }
            Axis::Y => {
                if n == 0 {
                    return Self::constant(0.0, self.rect).elevate(m, 0);
                }
                let s = n as f64 / self.rect.height();
                let mut coeffs = Vec::with_capacity((m + 1) * n);
                for i in 0..=m {
                    for j in 0..n {
                        coeffs.push(s * (self.coeff(i, j + 1) - self.coeff(i, j)));
                    }
                }
                Self { deg_x: m, deg_y: n - 1, rect: self.rect, coeffs }
            }
        }
    }

    /// Degree elevation by `(rx, ry)`; the represented function is unchanged.
    pub fn elevate(&self, rx: usize, ry: usize) -> Self {
        if rx == 0 && ry == 0 {
            return self.clone();
        }
        let ones = Self {
            deg_x: rx,
            deg_y: ry,
            rect: self.rect,
            coeffs: vec![1.0; (rx + 1) * (ry + 1)],
        };
        self.mul_same_box(&ones)
    }

    pub(crate) fn mul_same_box(&self, other: &Self) -> Self {
        let (m1, n1) = (self.deg_x, self.deg_y);
        let (m2, n2) = (other.deg_x, other.deg_y);
        let wx = product_weights(m1, m2);
        let wy = product_weights(n1, n2);
        let (m, n) = (m1 + m2, n1 + n2);
        let mut coeffs = vec![0.0; (m + 1) * (n + 1)];
        for i1 in 0..=m1 {
            for i2 in 0..=m2 {
                let w = wx[i1][i2];
                let out_row = &mut coeffs[(i1 + i2) * (n + 1)..(i1 + i2 + 1) * (n + 1)];
                for j1 in 0..=n1 {
                    let a = w * self.coeff(i1, j1);
                    if a == 0.0 {
                        continue;
                    }
                    for j2 in 0..=n2 {
                        out_row[j1 + j2] += a * wy[j1][j2] * other.coeff(i2, j2);
                    }
                }
            }
        }
        Self { deg_x: m, deg_y: n, rect: self.rect, coeffs }
    }

    pub(crate) fn add_same_box(&self, other: &Self) -> Self {
        let m = self.deg_x.max(other.deg_x);
        let n = self.deg_y.max(other.deg_y);
        let a = self.elevate(m - self.deg_x, n - self.deg_y);
        let b = other.elevate(m - other.deg_x, n - other.deg_y);
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(p, q)| p + q).collect();
        Self { deg_x: m, deg_y: n, rect: self.rect, coeffs }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            deg_x: self.deg_x,
            deg_y: self.deg_y,
            rect: self.rect,
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    /// Re-expresses the same polynomial in the Bernstein basis of `new_rect`
    /// (blossom evaluation at the new box endpoints).
    pub fn reparametrize(&self, new_rect: Rect) -> Result<Self, PolyError> {
        let new_rect = Rect::new(new_rect.x0, new_rect.x1, new_rect.y0, new_rect.y1)?;
        let (m, n) = (self.deg_x, self.deg_y);
        let sx = (
            (new_rect.x0 - self.rect.x0) / self.rect.width(),
            (new_rect.x1 - self.rect.x0) / self.rect.width(),
        );
        let sy = (
            (new_rect.y0 - self.rect.y0) / self.rect.height(),
            (new_rect.y1 - self.rect.y0) / self.rect.height(),
        );
        let mut tmp = vec![0.0; (m + 1) * (n + 1)];
        let mut col = vec![0.0; m + 1];
        for j in 0..=n {
            for i in 0..=m {
                col[i] = self.coeff(i, j);
            }
            let new_col = reparam_1d(&col, sx.0, sx.1);
            for i in 0..=m {
                tmp[i * (n + 1) + j] = new_col[i];
            }
        }
        let mut coeffs = vec![0.0; (m + 1) * (n + 1)];
        for i in 0..=m {
            let row = &tmp[i * (n + 1)..(i + 1) * (n + 1)];
            let new_row = reparam_1d(row, sy.0, sy.1);
            coeffs[i * (n + 1)..(i + 1) * (n + 1)].copy_from_slice(&new_row);
        }
        Ok(Self { deg_x: m, deg_y: n, rect: new_rect, coeffs })
    }

    /// Conversion to the monomial basis. Refused above `cap` total degree
    /// because the conversion is exponentially ill-conditioned in the degree.
    pub fn to_monomial(&self, cap: usize) -> Result<Monomial, PolyError> {
        let total = self.deg_x + self.deg_y;
        if total > cap {
            return Err(PolyError::ConversionOverflow { degree: total, cap });
        }
        let ux = basis_in_monomials(self.deg_x, self.rect.x0, self.rect.width());
        let uy = basis_in_monomials(self.deg_y, self.rect.y0, self.rect.height());
        let mut grid = vec![vec![0.0; self.deg_y + 1]; self.deg_x + 1];
        for i in 0..=self.deg_x {
            for j in 0..=self.deg_y {
                let c = self.coeff(i, j);
                if c == 0.0 {
                    continue;
                }
                for (a, &pa) in ux[i].iter().enumerate() {
                    if pa == 0.0 {
                        continue;
                    }
                    for (b, &pb) in uy[j].iter().enumerate() {
                        grid[a][b] += c * pa * pb;
                    }
                }
            }
        }
        let mut terms = Vec::new();
        for (a, row) in grid.iter().enumerate() {
            for (b, &c) in row.iter().enumerate() {
                terms.push(((a as u32, b as u32), c));
            }
        }
        Ok(Monomial::from_terms(terms))
    }

    /// Exact Bernstein representation of a monomial polynomial on `rect`
    /// with degrees `(m, n)`; requires `m`, `n` at least the partial degrees.
    pub fn from_monomial(p: &Monomial, rect: Rect, m: usize, n: usize) -> Result<Self, PolyError> {
        let rect = Rect::new(rect.x0, rect.x1, rect.y0, rect.y1)?;
        let (dx, dy) = p.partial_degrees();
        if (dx as usize) > m || (dy as usize) > n {
            return Err(PolyError::DegreeTooLow { need: (dx as usize, dy as usize), got: (m, n) });
        }
        let vx = power_in_bernstein(dx as usize, m, rect.x0, rect.width());
        let vy = power_in_bernstein(dy as usize, n, rect.y0, rect.height());
        let mut coeffs = vec![0.0; (m + 1) * (n + 1)];
        for ((a, b), c) in p.terms() {
            let (a, b) = (a as usize, b as usize);
            for k in 0..=m {
                let ck = c * vx[a][k];
                if ck == 0.0 {
                    continue;
                }
                for l in 0..=n {
                    coeffs[k * (n + 1) + l] += ck * vy[b][l];
                }
            }
        }
        Ok(Self { deg_x: m, deg_y: n, rect, coeffs })
    }
}

/// Blossom `b(s0, …, s0, s1, …, s1)` for each split gives the coefficients on
/// the sub-interval `[s0, s1]` (in unit coordinates of the old interval).
fn reparam_1d(c: &[f64], s0: f64, s1: f64) -> Vec<f64> {
    let m = c.len() - 1;
    let mut work = vec![0.0; m + 1];
    (0..=m)
        .map(|k| {
            work.copy_from_slice(c);
            for level in 0..m {
                let t = if level < m - k { s0 } else { s1 };
                for i in 0..(m - level) {
                    work[i] = (1.0 - t) * work[i] + t * work[i + 1];
                }
            }
            work[0]
        })
        .collect()
}

/// `B_i^deg((x - origin)/width)` expanded as a polynomial in `x`, for every `i`.
fn basis_in_monomials(deg: usize, origin: f64, width: f64) -> Vec<Vec<f64>> {
    // u^p in x: ((x - origin)/width)^p
    let upow: Vec<Vec<f64>> = (0..=deg)
        .map(|p| {
            (0..=p)
                .map(|q| {
                    binomial(p as u32, q as u32) * (-origin).powi((p - q) as i32) / width.powi(p as i32)
                })
                .collect()
        })
        .collect();
    (0..=deg)
        .map(|i| {
            let mut out = vec![0.0; deg + 1];
            for l in 0..=(deg - i) {
                let coef = binomial(deg as u32, i as u32)
                    * binomial((deg - i) as u32, l as u32)
                    * if l % 2 == 0 { 1.0 } else { -1.0 };
                for (q, &v) in upow[i + l].iter().enumerate() {
                    out[q] += coef * v;
                }
            }
            out
        })
        .collect()
}

/// `x^a` on `[origin, origin + width]` as degree-`deg` Bernstein coefficients, `a = 0..=max_pow`.
fn power_in_bernstein(max_pow: usize, deg: usize, origin: f64, width: f64) -> Vec<Vec<f64>> {
    // u^p = sum_{k>=p} C(k,p)/C(deg,p) B_k
    let u_in_b: Vec<Vec<f64>> = (0..=max_pow)
        .map(|p| {
            (0..=deg)
                .map(|k| {
                    if k < p {
                        0.0
                    } else {
                        binomial(k as u32, p as u32) / binomial(deg as u32, p as u32)
                    }
                })
                .collect()
        })
        .collect();
    (0..=max_pow)
        .map(|a| {
            let mut out = vec![0.0; deg + 1];
            for p in 0..=a {
                let w = binomial(a as u32, p as u32) * origin.powi((a - p) as i32) * width.powi(p as i32);
                for (o, &v) in out.iter_mut().zip(&u_in_b[p]) {
                    *o += w * v;
                }
            }
            out
        })
        .collect()
}
