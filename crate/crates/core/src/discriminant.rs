//! Discriminants of monic polynomials, Sturm root counts, and the
//! discriminant of the monic factor fitted to a displacement map.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, Complex};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cycles::{poly_fit, sample_displacement, CycleError, ReturnOptions, Section};
use crate::field::PolyVectorField;
use crate::poly2::{Poly2, PolyError};

#[derive(Debug, Error)]
pub enum DiscriminantError {
    #[error("discriminant needs degree >= 2, got {0}")]
    DegreeTooSmall(usize),
    #[error("monic polynomial needs degree >= 1 and finite coefficients")]
    BadCoefficients,
    #[error("zero discriminant: the congruence law needs a squarefree polynomial")]
    ZeroDiscriminant,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("degree-{d} coefficient {coeff:e} does not clear the fit residual {residual:e}")]
    LeadingCoefficientVanishes { d: usize, coeff: f64, residual: f64 },
    #[error("cannot separate {d} small roots of the fit: {reason}")]
    RootSeparation { d: usize, reason: String },
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("writing census table: {0}")]
    Io(#[from] csv::Error),
}

/// `x^d + a_{d-1} x^{d-1} + … + a_0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonicPoly {
    /// `a_0 … a_{d-1}`.
    coeffs: Vec<f64>,
}

impl MonicPoly {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, DiscriminantError> {
        if coeffs.is_empty() || !coeffs.iter().all(|c| c.is_finite()) {
            return Err(DiscriminantError::BadCoefficients);
        }
        Ok(Self { coeffs })
    }

    /// Product of `(x - r)` over real roots and `x² - 2a x + a² + b²` over pairs `a ± bi`.
    pub fn from_roots(real: &[f64], pairs: &[(f64, f64)]) -> Result<Self, DiscriminantError> {
        let mut full = vec![1.0];
        for &r in real {
            full = poly_mul(&full, &[-r, 1.0]);
        }
        for &(a, b) in pairs {
            full = poly_mul(&full, &[a * a + b * b, -2.0 * a, 1.0]);
        }
        full.pop();
        Self::new(full)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// All `d + 1` coefficients in ascending order, ending with 1.
    pub fn full(&self) -> Vec<f64> {
        let mut v = self.coeffs.clone();
        v.push(1.0);
        v
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.full().iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Complex roots from the companion matrix.
    pub fn roots(&self) -> Vec<Complex<f64>> {
        companion_roots(&self.full())
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn derivative(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect()
}

/// Roots of `Σ c_k x^k` (ascending, nonzero leading coefficient).
fn companion_roots(c: &[f64]) -> Vec<Complex<f64>> {
    let d = c.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let lead = c[d];
    let m = DMatrix::from_fn(d, d, |i, j| {
        if i == 0 {
            -c[d - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    m.complex_eigenvalues().iter().copied().collect()
}

fn sylvester(p: &[f64]) -> DMatrix<f64> {
    let d = p.len() - 1;
    let q = derivative(p);
    let n = 2 * d - 1;
    let mut s = DMatrix::zeros(n, n);
    // Rows hold descending coefficients, shifted one column per row.
    for row in 0..d - 1 {
        for (k, c) in p.iter().rev().enumerate() {
            s[(row, row + k)] = *c;
        }
    }
    for row in 0..d {
        for (k, c) in q.iter().rev().enumerate() {
            s[(d - 1 + row, row + k)] = *c;
        }
    }
    s
}

/// `Δ = (−1)^{d(d−1)/2} Res(p, p′)`, the resultant taken as the determinant
/// of the Sylvester matrix (LU with partial pivoting).
pub fn discriminant(p: &MonicPoly) -> Result<f64, DiscriminantError> {
    let d = p.degree();
    if d < 2 {
        return Err(DiscriminantError::DegreeTooSmall(d));
    }
    let res = sylvester(&p.full()).lu().determinant();
    let sign = if (d * (d - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * res)
}

/// `σ_min / σ_max` of the Sylvester matrix of `p` and `p′`. It is zero exactly
/// when `gcd(p, p′)` is nonconstant, and unlike `|Δ|` its rounding noise does
/// not grow with the product of the other pivots.
pub fn sylvester_singularity(p: &MonicPoly) -> f64 {
    let sv = sylvester(&p.full()).singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}

/// Below this relative singular value `Δ` counts as zero (boundary stratum).
pub const ZERO_DISCRIMINANT_REL: f64 = 1e-9;

pub fn discriminant_vanishes(p: &MonicPoly) -> Result<bool, DiscriminantError> {
    if p.degree() < 2 {
        return Err(DiscriminantError::DegreeTooSmall(p.degree()));
    }
    Ok(sylvester_singularity(p) <= ZERO_DISCRIMINANT_REL)
}

/// Remainder coefficients below this fraction of the magnitudes cancelled to produce them are zero.
const STURM_ZERO_REL: f64 = 1e-9;

fn trim(p: &mut Vec<f64>, floor: f64) {
    while p.len() > 1 && p.last().is_some_and(|c| c.abs() <= floor) {
        p.pop();
    }
    if p.len() == 1 && p[0].abs() <= floor {
        p[0] = 0.0;
    }
}

/// Remainder of `a / b`, plus the largest magnitude that took part in the
/// cancellation (the scale of its rounding error).
fn remainder(a: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let mut r = a.to_vec();
    let mut mag = a.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let db = b.len() - 1;
    let lead = b[db];
    while r.len() > db && !r.is_empty() {
        let k = r.len() - 1;
        let f = r[k] / lead;
        for j in 0..=db {
            mag = mag.max((f * b[j]).abs());
            r[k - db + j] -= f * b[j];
        }
        r.pop();
    }
    if r.is_empty() {
        r.push(0.0);
    }
    (r, mag)
}

fn normalize(p: &mut [f64]) {
    let m = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if m > 0.0 {
        p.iter_mut().for_each(|c| *c /= m);
    }
}

fn sturm_chain(p: &[f64]) -> Vec<Vec<f64>> {
    let mut first = p.to_vec();
    let mut second = derivative(p);
    normalize(&mut first);
    normalize(&mut second);
    let mut chain = vec![first, second];
    loop {
        let n = chain.len();
        let cur = &chain[n - 1];
        if cur.len() == 1 {
            break;
        }
        let (r, mag) = remainder(&chain[n - 2], cur);
        let mut r: Vec<f64> = r.into_iter().map(|c| -c).collect();
        trim(&mut r, STURM_ZERO_REL * mag);
        if r.len() == 1 && r[0] == 0.0 {
            break;
        }
        normalize(&mut r);
        chain.push(r);
    }
    chain
}

fn sign_changes(signs: impl Iterator<Item = f64>) -> usize {
    let mut last = 0.0;
    let mut count = 0;
    for s in signs.filter(|s| *s != 0.0) {
        if last != 0.0 && s != last {
            count += 1;
        }
        last = s;
    }
    count
}

/// Root count by Sturm's theorem, plus whether `gcd(p, p′)` is nonconstant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RootCensus {
    pub distinct_real: usize,
    pub repeated: bool,
}

pub fn sturm_census(p: &MonicPoly) -> RootCensus {
    let squarefree = p.degree() < 2 || sylvester_singularity(p) > ZERO_DISCRIMINANT_REL;
    let chain = if squarefree { sturm_chain_exact(&p.full()) } else { sturm_chain(&p.full()) };
    let at_pos = chain.iter().map(|q| q.last().copied().unwrap_or(0.0).signum());
    let at_neg = chain.iter().map(|q| {
        let lead = q.last().copied().unwrap_or(0.0).signum();
        if (q.len() - 1) % 2 == 0 { lead } else { -lead }
    });
    let v_neg = sign_changes(at_neg);
    let v_pos = sign_changes(at_pos);
    let last = chain.last().expect("chain has p and p′");
    RootCensus { distinct_real: v_neg.saturating_sub(v_pos), repeated: last.len() > 1 }
}

/// Sturm chain in exact rational arithmetic on the (exactly representable)
/// float coefficients. Entries are rounded back to `f64` after each step,
/// which keeps every sign and degree.
fn sturm_chain_exact(p: &[f64]) -> Vec<Vec<f64>> {
    let exact = |c: &[f64]| -> Vec<BigRational> {
        c.iter().map(|&v| BigRational::from_float(v).expect("finite coefficients")).collect()
    };
    let round = |c: &[BigRational]| -> Vec<f64> { c.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect() };
    let mut a = exact(p);
    let mut b = exact(&derivative(p));
    let mut chain = vec![round(&a), round(&b)];
    while b.len() > 1 {
        let lead = b.last().expect("nonempty").clone();
        let db = b.len() - 1;
        let mut r = a;
        while r.len() > db {
            let k = r.len() - 1;
            let f = &r[k] / &lead;
            for j in 0..=db {
                let t = &f * &b[j];
                r[k - db + j] -= t;
            }
            r.pop();
        }
        while r.len() > 1 && r.last().is_some_and(Zero::is_zero) {
            r.pop();
        }
        if r.iter().all(Zero::is_zero) {
            break;
        }
        // Scale by the largest magnitude to keep the rationals from growing.
        let scale = r.iter().map(|v| v.abs()).max().expect("nonempty");
        let r: Vec<BigRational> = r.into_iter().map(|v| -v / &scale).collect();
        chain.push(round(&r));
        a = b;
        b = r;
    }
    chain
}

/// Number of distinct real roots.
pub fn real_root_census(p: &MonicPoly) -> usize {
    sturm_census(p).distinct_real
}

/// Admissible distinct-real-root counts `r ∈ {d, d−2, …}` of a squarefree
/// degree-`d` polynomial with discriminant sign `delta_sign`, from
/// `sign(Δ) = (−1)^{(d−r)/2}`.
pub fn root_count_congruence(d: usize, delta_sign: f64) -> Result<Vec<usize>, DiscriminantError> {
    if delta_sign == 0.0 || delta_sign.is_nan() {
        return Err(DiscriminantError::ZeroDiscriminant);
    }
    let want_even_pairs = delta_sign > 0.0;
    Ok((0..=d / 2).filter(|pairs| (pairs % 2 == 0) == want_even_pairs).map(|pairs| d - 2 * pairs).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    /// The fit uses degree `d + extra`; the `d` roots of smallest modulus form the factor.
    pub extra: usize,
    pub residual_factor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { extra: 12, residual_factor: 1e3 }
    }
}

/// Roots beyond the first `d` must stay this far (relative to the window) from it.
const SEPARATION_REL: f64 = 0.05;

/// Monic degree-`d` factor of the displacement samples: a least-squares fit of
/// degree `d + extra`, factored through its companion matrix, keeping the `d`
/// roots closest to the real window `[−h, h]` spanned by the samples. Leaves
/// out the non-vanishing unit the same way dividing a Weierstrass product by
/// its unit would.
pub fn fit_displacement_poly(samples: &[(f64, f64)], d: usize, opts: &FitOptions) -> Result<MonicPoly, DiscriminantError> {
    let deg = d + opts.extra;
    let need = 4 * deg + 1;
    if samples.len() < need {
        return Err(DiscriminantError::TooFewSamples { need, got: samples.len() });
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let h = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (c, residual) = poly_fit(&xs, &ys, deg);
    if !(c[d].abs() * h.powi(d as i32) > opts.residual_factor * residual) {
        return Err(DiscriminantError::LeadingCoefficientVanishes { d, coeff: c[d], residual });
    }
    // Work in t = ξ / h so the companion matrix is well scaled.
    let mut b: Vec<f64> = c.iter().enumerate().map(|(j, v)| v * h.powi(j as i32)).collect();
    // Drop negligible top coefficients so the companion matrix stays bounded.
    while b.len() > d + 1 && b.last().is_some_and(|t| t.abs() <= residual) {
        b.pop();
    }
    if b.len() == d + 1 {
        let lead = c[d];
        return MonicPoly::new(c[..d].iter().map(|v| v / lead).collect());
    }
    // Roots of a truncated expansion that do not belong to the map gather
    // near the boundary of its domain of analyticity, away from the real window.
    let dist = |z: &Complex<f64>| (z.re.abs() - 1.0).max(0.0).hypot(z.im);
    let mut roots = companion_roots(&b);
    roots.sort_by(|a, b| dist(a).total_cmp(&dist(b)).then(a.im.total_cmp(&b.im)));
    let (inner, outer) = roots.split_at(d);
    if let Some(next) = outer.first() {
        if next.im != 0.0 && inner.iter().any(|z| (z - next.conj()).norm() < 1e-12 * (1.0 + z.norm())) {
            return Err(DiscriminantError::RootSeparation { d, reason: "a conjugate pair straddles the cut".into() });
        }
        if dist(next) <= SEPARATION_REL {
            return Err(DiscriminantError::RootSeparation {
                d,
                reason: format!("root {:.3e}{:+.3e}i lies within {SEPARATION_REL} h of the window", h * next.re, h * next.im),
            });
        }
    }
    let inner: Vec<Complex<f64>> = inner.iter().map(|z| z * h).collect();
    // Multiply out the kept roots; imaginary parts cancel for conjugate-closed sets.
    let mut prod = vec![Complex::new(1.0, 0.0)];
    for z in &inner {
        let mut next = vec![Complex::new(0.0, 0.0); prod.len() + 1];
        for (k, p) in prod.iter().enumerate() {
            next[k + 1] += p;
            next[k] -= p * z;
        }
        prod = next;
    }
    if prod.iter().any(|z| z.im.abs() > 1e-8 * (1.0 + z.re.abs())) {
        return Err(DiscriminantError::RootSeparation { d, reason: "kept roots are not closed under conjugation".into() });
    }
    MonicPoly::new(prod[..d].iter().map(|z| z.re).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiOptions {
    pub window: f64,
    /// Sample count; raised to `4(d + extra) + 1` if smaller.
    pub samples: usize,
    pub fit: FitOptions,
    pub ret: ReturnOptions,
}

impl Default for PhiOptions {
    fn default() -> Self {
        Self { window: 0.05, samples: 0, fit: FitOptions::default(), ret: ReturnOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiValue {
    pub phi: f64,
    pub factor: MonicPoly,
    pub census: RootCensus,
    /// `|Φ|` is below the relative zero threshold.
    pub boundary: bool,
}

/// `Φ(X) = Δ(P)` for the monic factor `P` of the displacement map sampled at
/// Chebyshev nodes on `[−window, window]` of the section.
pub fn phi(x: &PolyVectorField, section: &Section, d: usize, opts: &PhiOptions) -> Result<PhiValue, DiscriminantError> {
    let n = opts.samples.max(4 * (d + opts.fit.extra) + 1);
    let xis: Vec<f64> = (0..n)
        .map(|k| opts.window * ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect();
    let values = sample_displacement(x, section, &xis, &opts.ret);
    let mut samples = Vec::with_capacity(n);
    for (xi, v) in xis.iter().zip(values) {
        samples.push((*xi, v?));
    }
    let factor = fit_displacement_poly(&samples, d, &opts.fit)?;
    let phi = discriminant(&factor)?;
    let boundary = sylvester_singularity(&factor) <= ZERO_DISCRIMINANT_REL;
    let census = sturm_census(&factor);
    Ok(PhiValue { phi, factor, census, boundary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Q2Sample {
    pub seed_index: usize,
    pub phi: f64,
    pub n_real_roots: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Q2Report {
    pub seed: u64,
    pub radius: f64,
    pub samples: Vec<Q2Sample>,
    /// Sample with the smallest `Φ`.
    pub best: Option<Q2Sample>,
    /// Distinct-real-root count of the fitted factor → number of samples.
    pub histogram: BTreeMap<usize, usize>,
    pub failures: Vec<(usize, String)>,
}

/// Perturbs every monomial coefficient of `P` and `Q` up to the field's degree
/// by an independent uniform draw from `[−radius, radius]` (sample `i` uses
/// stream `i` of a ChaCha8 generator seeded with `seed`) and evaluates `Φ`.
pub fn q2_search(
    x: &PolyVectorField,
    section: &Section,
    d: usize,
    radius: f64,
    n_samples: usize,
    seed: u64,
    opts: &PhiOptions,
) -> Result<Q2Report, DiscriminantError> {
    let deg = x.degree().unwrap_or(0);
    let (p, q) = (x.p().to_monomial()?, x.q().to_monomial()?);
    let monomials: Vec<(u32, u32)> = (0..=deg).flat_map(|t| (0..=t).map(move |j| (t - j, j))).collect();
    let results: Vec<(usize, Result<PhiValue, DiscriminantError>)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut draw = |m: &crate::poly2::Monomial| -> Poly2 {
                Poly2::from_terms(monomials.iter().map(|&e| {
                    let u: f64 = if radius > 0.0 { rng.gen_range(-radius..=radius) } else { 0.0 };
                    (e, m.coeff(e.0, e.1) + u)
                }))
            };
            let y = PolyVectorField::new(draw(&p), draw(&q));
            (i, phi(&y, section, d, opts))
        })
        .collect();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    let mut histogram = BTreeMap::new();
    for (i, r) in results {
        match r {
            Ok(v) => {
                *histogram.entry(v.census.distinct_real).or_insert(0) += 1;
                samples.push(Q2Sample { seed_index: i, phi: v.phi, n_real_roots: v.census.distinct_real, radius });
            }
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    let best = samples.iter().min_by(|a, b| a.phi.total_cmp(&b.phi)).cloned();
    Ok(Q2Report { seed, radius, samples, best, histogram, failures })
}

/// CSV with columns `seed_index, phi, n_real_roots, radius`.
pub fn write_census_csv(path: &Path, samples: &[Q2Sample]) -> Result<(), DiscriminantError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed_index", "phi", "n_real_roots", "radius"])?;
    for s in samples {
        w.write_record([
            s.seed_index.to_string(),
            format!("{:.17e}", s.phi),
            s.n_real_roots.to_string(),
            format!("{:.17e}", s.radius),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ck, unit_circle_defect};

    fn mp(c: &[f64]) -> MonicPoly {
        MonicPoly::new(c.to_vec()).unwrap()
    }

    #[test]
    fn discriminant_examples() {
        // x² + bx + c
        for (b, c) in [(0.0, -1.0), (3.0, 2.0), (1.0, 5.0)] {
            assert!((discriminant(&mp(&[c, b])).unwrap() - (b * b - 4.0 * c)).abs() < 1e-12);
        }
        // x³ + px + q
        for (p, q) in [(-1.0, 0.0), (2.0, -1.0), (-3.0, 0.5)] {
            let want = -4.0 * p * p * p - 27.0 * q * q;
            assert!((discriminant(&mp(&[q, p, 0.0])).unwrap() - want).abs() < 1e-10);
        }
        assert!((discriminant(&mp(&[0.0, -1.0, 0.0])).unwrap() - 4.0).abs() < 1e-12);
        assert!(discriminant(&mp(&[0.0, 1.0, -2.0])).unwrap().abs() < 1e-12);
        assert!(matches!(discriminant(&mp(&[1.0])), Err(DiscriminantError::DegreeTooSmall(1))));
    }

    #[test]
    fn discriminant_matches_root_product() {
        let roots = [-1.3, 0.2, 0.9, 2.0];
        let p = MonicPoly::from_roots(&roots, &[]).unwrap();
        let mut want = 1.0;
        for i in 0..4 {
            for j in i + 1..4 {
                want *= (roots[i] - roots[j]) * (roots[i] - roots[j]);
            }
        }
        assert!((discriminant(&p).unwrap() / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn census_examples() {
        assert_eq!(real_root_census(&mp(&[1.0, 0.0])), 0);
        assert_eq!(real_root_census(&mp(&[0.0, -1.0, 0.0])), 3);
        assert_eq!(real_root_census(&mp(&[0.0, -1.0, 0.0, 0.0, 0.0])), 3);
        let double = sturm_census(&mp(&[0.0, 1.0, -2.0]));
        assert_eq!(double, RootCensus { distinct_real: 2, repeated: true });
    }

    #[test]
    fn x5_minus_x_has_negative_discriminant() {
        let p = mp(&[0.0, -1.0, 0.0, 0.0, 0.0]);
        assert!((discriminant(&p).unwrap() + 256.0).abs() < 1e-9);
        assert_eq!(root_count_congruence(5, -1.0).unwrap(), vec![3]);
        assert_eq!(root_count_congruence(5, 1.0).unwrap(), vec![5, 1]);
    }

    #[test]
    fn congruence_table() {
        assert_eq!(root_count_congruence(3, 1.0).unwrap(), vec![3]);
        assert_eq!(root_count_congruence(3, -1.0).unwrap(), vec![1]);
        assert_eq!(root_count_congruence(4, 1.0).unwrap(), vec![4, 0]);
        assert_eq!(root_count_congruence(4, -1.0).unwrap(), vec![2]);
        assert!(root_count_congruence(3, 0.0).is_err());
        assert!((discriminant(&mp(&[0.0, 1.0, 0.0])).unwrap() + 4.0).abs() < 1e-12);
    }

    #[test]
    fn fit_exact_samples() {
        let xs: Vec<f64> = (0..61).map(|k| -0.05 + 0.1 * k as f64 / 60.0).collect();
        let cube: Vec<(f64, f64)> = xs.iter().map(|&x| (x, x * x * x)).collect();
        let p = fit_displacement_poly(&cube, 3, &FitOptions::default()).unwrap();
        assert!(p.coeffs().iter().all(|a| a.abs() < 1e-9), "{p:?}");
        let lin: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 2.0 * x * x * x - 0.02 * x)).collect();
        let p = fit_displacement_poly(&lin, 3, &FitOptions::default()).unwrap();
        assert!((p.coeffs()[1] + 0.01).abs() < 1e-9 && p.coeffs()[0].abs() < 1e-9 && p.coeffs()[2].abs() < 1e-9);
        let scaled: Vec<(f64, f64)> = lin.iter().map(|&(x, y)| (x, 7.5 * y)).collect();
        let q = fit_displacement_poly(&scaled, 3, &FitOptions::default()).unwrap();
        for (a, b) in p.coeffs().iter().zip(q.coeffs()) {
            assert!((a - b).abs() < 1e-9);
        }
        let flat: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 1e-3 * x)).collect();
        assert!(matches!(
            fit_displacement_poly(&flat, 3, &FitOptions::default()),
            Err(DiscriminantError::LeadingCoefficientVanishes { .. })
        ));
    }

    fn section(x: &PolyVectorField) -> Section {
        Section::new(x, [1.0, 0.0], [1.0, 0.0], 0.6).unwrap()
    }

    #[test]
    fn phi_of_ck3_vanishes() {
        let x = ck(3);
        let v = phi(&x, &section(&x), 3, &PhiOptions::default()).unwrap();
        assert!(v.factor.coeffs().iter().all(|a| a.abs() < 1e-6), "{:?}", v.factor);
        assert!(v.phi.abs() < 1e-12, "{}", v.phi);
    }

    #[test]
    fn phi_sign_follows_the_census() {
        let split = ck(3).gradient_collapse_family(&unit_circle_defect(), 0.02);
        let o = PhiOptions { window: 0.12, ..Default::default() };
        let v = phi(&split, &section(&split), 3, &o).unwrap();
        assert_eq!(v.census.distinct_real, 3);
        assert!(v.phi > 0.0);

        let rot = ck(3).rotate_family(1.0, 0.01);
        let v = phi(&rot, &section(&rot), 3, &PhiOptions::default()).unwrap();
        assert_eq!(v.census.distinct_real, 1);
        assert!(v.phi < 0.0);
    }

    #[test]
    fn q2_degenerate_inputs() {
        let x = ck(3);
        let s = section(&x);
        let o = PhiOptions::default();
        let empty = q2_search(&x, &s, 3, 1e-3, 0, 7, &o).unwrap();
        assert!(empty.samples.is_empty() && empty.best.is_none());
        let zero = q2_search(&x, &s, 3, 0.0, 3, 7, &o).unwrap();
        let base = phi(&x, &s, 3, &o).unwrap().phi;
        assert!(zero.samples.iter().all(|v| v.phi == base));
    }
}
