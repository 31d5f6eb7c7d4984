//! Tensor Bernstein approximation of sampled scalar fields and its C^r error.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::poly2::{binomial, linspace, Bernstein, Poly2, PolyError, Rect};

pub const DEFAULT_GRID_DENSITY: usize = 101;
pub const MIN_GRID_DENSITY: usize = 50;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum BernsteinError {
    #[error("field provides derivatives up to order {available}, order {requested} requested")]
    InsufficientDerivatives { available: u32, requested: u32 },
    #[error("grid density {0} below the minimum of {MIN_GRID_DENSITY} points per axis")]
    GridTooCoarse(usize),
    #[error("no diagonal degree up to {cap} reaches tolerance {eps:e}; best error {best_error:e} at degree {best_degree}")]
    CapExceeded { cap: usize, eps: f64, best_error: f64, best_degree: usize },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("Bernstein degrees must be positive")]
    ZeroDegree,
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("writing error table: {0}")]
    Io(#[from] csv::Error),
}

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// `(i, j, x, y) -> ∂^{i+j} f / ∂x^i ∂y^j (x, y)`.
pub type PartialFn = Arc<dyn Fn(u32, u32, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Derivatives {
    Analytic(PartialFn),
    Polynomial(Arc<BTreeMap<(u32, u32), Poly2>>),
    CentralDifference { step: f64 },
}

/// A scalar function of two variables together with its partial derivatives
/// up to order `r_max`.
#[derive(Clone)]
pub struct SampledField {
    value: ScalarFn,
    derivatives: Derivatives,
    r_max: u32,
}

impl std::fmt::Debug for SampledField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.derivatives {
            Derivatives::Analytic(_) => "analytic",
            Derivatives::Polynomial(_) => "polynomial",
            Derivatives::CentralDifference { .. } => "central-difference",
        };
        f.debug_struct("SampledField")
            .field("derivatives", &kind)
            .field("r_max", &self.r_max)
            .finish()
    }
}

impl SampledField {
    pub fn analytic(value: ScalarFn, partials: PartialFn, r_max: u32) -> Self {
        Self { value, derivatives: Derivatives::Analytic(partials), r_max }
    }

    /// Derivatives by nested central differences. The step grows by a decade
    /// per derivative order starting from `step` to keep rounding noise bounded.
    pub fn finite_difference(value: ScalarFn, r_max: u32, step: f64) -> Self {
        Self { value, derivatives: Derivatives::CentralDifference { step }, r_max }
    }

    /// Exact field backed by a polynomial; derivatives of every order up to `r_max`.
    pub fn from_poly(p: Poly2, r_max: u32) -> Self {
        let mut table = BTreeMap::new();
        for i in 0..=r_max {
            for j in 0..=(r_max - i) {
                table.insert((i, j), p.partial(i, j));
            }
        }
        let p0 = table[&(0, 0)].clone();
        Self {
            value: Arc::new(move |x, y| p0.eval(x, y)),
            derivatives: Derivatives::Polynomial(Arc::new(table)),
            r_max,
        }
    }

    pub fn r_max(&self) -> u32 {
        self.r_max
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.value)(x, y)
    }

    pub fn partial(&self, i: u32, j: u32, x: f64, y: f64) -> Result<f64, BernsteinError> {
        if i + j > self.r_max {
            return Err(BernsteinError::InsufficientDerivatives { available: self.r_max, requested: i + j });
        }
        if i + j == 0 {
            return Ok(self.eval(x, y));
        }
        Ok(match &self.derivatives {
            Derivatives::Analytic(d) => d(i, j, x, y),
            Derivatives::Polynomial(t) => t[&(i, j)].eval(x, y),
            Derivatives::CentralDifference { step } => {
                let h = step * 10f64.powi((i + j) as i32 - 1);
                central_difference(&self.value, i, j, x, y, h)
            }
        })
    }

    pub fn gradient(&self, x: f64, y: f64) -> Result<[f64; 2], BernsteinError> {
        Ok([self.partial(1, 0, x, y)?, self.partial(0, 1, x, y)?])
    }

    /// Largest discrepancy between the first-order partials and central
    /// differences of the value evaluator, over `n_points` random points of `rect`.
    pub fn consistency_gap(&self, rect: Rect, n_points: usize, seed: u64) -> Result<f64, BernsteinError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..n_points {
            let x = rng.gen_range(rect.x0..rect.x1);
            let y = rng.gen_range(rect.y0..rect.y1);
            for (i, j) in [(1, 0), (0, 1)] {
                let fd = central_difference(&self.value, i, j, x, y, DEFAULT_FD_STEP);
                worst = worst.max((self.partial(i, j, x, y)? - fd).abs());
            }
        }
        Ok(worst)
    }
}

fn central_difference(f: &ScalarFn, i: u32, j: u32, x: f64, y: f64, h: f64) -> f64 {
    // Δ^k g(t) = Σ_l (-1)^l C(k,l) g(t + (k/2 - l) h) / h^k in each axis.
    let mut acc = 0.0;
    for a in 0..=i {
        let wa = binomial(i, a) * if a % 2 == 0 { 1.0 } else { -1.0 };
        let dx = (f64::from(i) / 2.0 - f64::from(a)) * h;
        for b in 0..=j {
            let wb = binomial(j, b) * if b % 2 == 0 { 1.0 } else { -1.0 };
            let dy = (f64::from(j) / 2.0 - f64::from(b)) * h;
            acc += wa * wb * f(x + dx, y + dy);
        }
    }
    acc / h.powi((i + j) as i32)
}

/// Bernstein polynomial of degrees `(m, n)` on `rect`: the coefficient grid is
/// `f` sampled at the affine images of `(r/m, s/n)`.
pub fn bernstein_fit(f: &SampledField, m: usize, n: usize, rect: Rect) -> Result<Poly2, BernsteinError> {
    if m == 0 || n == 0 {
        return Err(BernsteinError::ZeroDegree);
    }
    let coeffs: Vec<f64> = (0..=m)
        .into_par_iter()
        .flat_map_iter(|r| {
            (0..=n).map(move |s| {
                let (x, y) = rect.from_unit(r as f64 / m as f64, s as f64 / n as f64);
                f.eval(x, y)
            })
        })
        .collect();
    Ok(Poly2::Bernstein(Bernstein::new(m, n, rect, coeffs)?))
}

/// Multi-indices `(i, j)` with `i + j <= r`, ordered by total order then `i` descending.
pub fn multi_indices(r: u32) -> Vec<(u32, u32)> {
    (0..=r).flat_map(|total| (0..=total).rev().map(move |i| (i, total - i))).collect()
}

/// Sampled `max |∂^k f - ∂^k b|` over a `grid_density²` grid of `rect`, for every `|k| <= r`.
pub fn cr_error(
    f: &SampledField,
    b: &Poly2,
    rect: Rect,
    r: u32,
    grid_density: usize,
) -> Result<BTreeMap<(u32, u32), f64>, BernsteinError> {
    if f.r_max() < r {
        return Err(BernsteinError::InsufficientDerivatives { available: f.r_max(), requested: r });
    }
    if grid_density < MIN_GRID_DENSITY {
        return Err(BernsteinError::GridTooCoarse(grid_density));
    }
    let xs = linspace(rect.x0, rect.x1, grid_density);
    let ys = linspace(rect.y0, rect.y1, grid_density);
    multi_indices(r)
        .into_par_iter()
        .map(|(i, j)| {
            let approx = b.partial(i, j).eval_grid(&xs, &ys);
            let mut worst: f64 = 0.0;
            for (ix, &x) in xs.iter().enumerate() {
                for (iy, &y) in ys.iter().enumerate() {
                    let exact = f.partial(i, j, x, y)?;
                    worst = worst.max((exact - approx[ix * ys.len() + iy]).abs());
                }
            }
            Ok(((i, j), worst))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeTrial {
    pub m: usize,
    pub n: usize,
    /// `(k_i, k_j, max_error)` for every multi-index.
    pub errors: Vec<(u32, u32, f64)>,
    pub max_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeSearch {
    pub m: usize,
    pub n: usize,
    /// Every degree tried, in search order.
    pub trials: Vec<DegreeTrial>,
}

impl DegreeSearch {
    pub fn accepted(&self) -> &DegreeTrial {
        self.trials
            .iter()
            .find(|t| t.m == self.m && t.passed)
            .expect("accepted degree is among the trials")
    }
}

/// Smallest diagonal degree `m = n` whose sampled C^r errors are all below `eps`.
///
/// Doubling from 1 until a degree passes (or `cap` is exceeded), then bisection
/// between the last failure and the first success. Errors are compared against
/// `eps * (1 - 1e-12)` so that a value equal to `eps` up to rounding counts as a failure.
pub fn min_degree_for_tolerance(
    f: &SampledField,
    rect: Rect,
    r: u32,
    eps: f64,
    cap: usize,
    grid_density: usize,
) -> Result<DegreeSearch, BernsteinError> {
    if !(eps > 0.0) {
        return Err(BernsteinError::BadTolerance(eps));
    }
    if f.r_max() < r {
        return Err(BernsteinError::InsufficientDerivatives { available: f.r_max(), requested: r });
    }
    let threshold = eps * (1.0 - 1e-12);
    let mut trials = Vec::new();
    let mut trial = |m: usize| -> Result<bool, BernsteinError> {
        let b = bernstein_fit(f, m, m, rect)?;
        let errs = cr_error(f, &b, rect, r, grid_density)?;
        let max_error = errs.values().copied().fold(0.0, f64::max);
        let passed = max_error < threshold;
        trials.push(DegreeTrial {
            m,
            n: m,
            errors: errs.into_iter().map(|((i, j), e)| (i, j, e)).collect(),
            max_error,
            passed,
        });
        Ok(passed)
    };

    let mut lo = 0usize; // largest known failing degree
    let mut hi = None;
    let mut m = 1usize;
    while m <= cap {
        if trial(m)? {
            hi = Some(m);
            break;
        }
        lo = m;
        if m == cap {
            break;
        }
        m = (2 * m).min(cap);
    }
    let Some(mut hi) = hi else {
        let best = trials
            .iter()
            .min_by(|a, b| a.max_error.total_cmp(&b.max_error))
            .expect("at least one trial");
        return Err(BernsteinError::CapExceeded {
            cap,
            eps,
            best_error: best.max_error,
            best_degree: best.m,
        });
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if trial(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(DegreeSearch { m: hi, n: hi, trials })
}

/// CSV with columns `m, n, k_i, k_j, max_error`.
pub fn write_error_table(path: &Path, trials: &[DegreeTrial]) -> Result<(), BernsteinError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["m", "n", "k_i", "k_j", "max_error"])?;
    for t in trials {
        for &(i, j, e) in &t.errors {
            w.write_record([
                t.m.to_string(),
                t.n.to_string(),
                i.to_string(),
                j.to_string(),
                format!("{e:e}"),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
