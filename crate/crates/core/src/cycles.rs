//! Transversal sections, return and displacement maps, cycle location,
//! multiplicity, characteristic exponents and the integral formulas used by the
//! splitting constructions.

use std::ops::ControlFlow;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bernstein::{bernstein_fit, min_degree_for_tolerance, BernsteinError, DegreeSearch, SampledField};
use crate::field::{GradientCollapse, PlanarField, PolyVectorField};
use crate::flow::{
    drive, integrate, next_section_crossing_with, Crossing, FlowError, FlowOptions, Orbit, Segment, Tolerances,
};
use crate::poly2::{Axis, Poly2, Rect};

#[derive(Debug, Error)]
pub enum CycleError {
    #[error(transparent)]
    Flow(FlowError),
    #[error("orbit from xi = {xi} did not return to the section within t = {t_max}")]
    NoCrossing { xi: f64, t_max: f64 },
    #[error("orbit from xi = {xi} left the neighbourhood at t = {t}")]
    LeftNeighborhood { xi: f64, t: f64 },
    #[error("xi = {xi} lies outside the section (half-length {half_length})")]
    OutsideSection { xi: f64, half_length: f64 },
    #[error("field is not transversal to the section at xi = {xi} (|X ^ d| / |X| = {ratio:e})")]
    NotTransversal { xi: f64, ratio: f64 },
    #[error("multiplicity inconclusive up to order {d_max}: coefficients {coefficients:?}, residual {residual:e}")]
    Inconclusive { d_max: u32, coefficients: Vec<f64>, residual: f64 },
    #[error("multiplicity order must lie in 1..=6, got {0}")]
    BadOrder(u32),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("Bernstein degree search hit the cap {cap}: best error {best_error:e} at degree {best_degree}")]
    DegreeCapExceeded { cap: usize, best_error: f64, best_degree: usize },
    #[error(transparent)]
    Bernstein(BernsteinError),
    #[error("continued cycle lost: {0}")]
    CycleLost(String),
    #[error("writing displacement samples: {0}")]
    Io(#[from] csv::Error),
}

impl From<FlowError> for CycleError {
    fn from(e: FlowError) -> Self {
        CycleError::Flow(e)
    }
}

impl From<BernsteinError> for CycleError {
    fn from(e: BernsteinError) -> Self {
        match e {
            BernsteinError::CapExceeded { cap, best_error, best_degree, .. } => {
                CycleError::DegreeCapExceeded { cap, best_error, best_degree }
            }
            other => CycleError::Bernstein(other),
        }
    }
}

/// Smallest admissible `|X ^ d| / |X|` along a section.
pub const MIN_TRANSVERSALITY: f64 = 1e-3;
const TRANSVERSALITY_SAMPLES: usize = 33;

/// A transversal segment with coordinate `ξ`; `ξ < 0` is the interior side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Section {
    segment: Segment,
    /// Sign of the normal velocity of the flow across the segment.
    orientation: f64,
}

impl Section {
    /// `direction` must point from the interior to the exterior of the cycle.
    pub fn new<F: PlanarField + ?Sized>(
        field: &F,
        base: [f64; 2],
        direction: [f64; 2],
        half_length: f64,
    ) -> Result<Self, CycleError> {
        let segment = Segment::new(base, direction, half_length)?;
        let n = segment.normal();
        let mut orientation = 0.0;
        for k in 0..TRANSVERSALITY_SAMPLES {
            let xi = half_length * (2.0 * k as f64 / (TRANSVERSALITY_SAMPLES - 1) as f64 - 1.0);
            let v = field.eval(segment.point(xi));
            let speed = v[0].hypot(v[1]);
            let flux = n[0] * v[0] + n[1] * v[1];
            let ratio = if speed > 0.0 { flux.abs() / speed } else { 0.0 };
            if ratio < MIN_TRANSVERSALITY || (orientation != 0.0 && flux.signum() != orientation) {
                return Err(CycleError::NotTransversal { xi, ratio });
            }
            orientation = flux.signum();
        }
        Ok(Self { segment, orientation })
    }

    /// Section without the transversality check.
    pub fn from_parts(segment: Segment, orientation: f64) -> Self {
        Self { segment, orientation: orientation.signum() }
    }

    pub fn segment(&self) -> &Segment {
        &self.segment
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn half_length(&self) -> f64 {
        self.segment.half_length
    }

    pub fn point(&self, xi: f64) -> [f64; 2] {
        self.segment.point(xi)
    }

    pub fn coordinate(&self, p: [f64; 2]) -> f64 {
        self.segment.coordinate(p)
    }

    /// The same segment seen by the time-reversed flow.
    pub fn reversed(&self) -> Self {
        Self { segment: self.segment, orientation: -self.orientation }
    }
}

/// Region an orbit must not leave while a return is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Neighborhood {
    Annulus { center: [f64; 2], r_in: f64, r_out: f64 },
    Box(Rect),
}

impl Neighborhood {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Neighborhood::Annulus { center, r_in, r_out } => {
                let r = (p[0] - center[0]).hypot(p[1] - center[1]);
                r >= r_in && r <= r_out
            }
            Neighborhood::Box(rect) => rect.contains(p[0], p[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnOptions {
    pub flow: FlowOptions,
    pub t_max: f64,
    /// Crossings before this time are ignored (the start point lies on the section).
    pub t_offset: f64,
    pub neighborhood: Option<Neighborhood>,
}

/// Integration tolerance used for cycle analysis unless overridden.
pub const CYCLE_TOL: f64 = 1e-12;

impl Default for ReturnOptions {
    fn default() -> Self {
        Self { flow: FlowOptions::with_tol(CYCLE_TOL), t_max: 100.0, t_offset: 1e-3, neighborhood: None }
    }
}

/// First return of the orbit through `section.point(xi)`.
pub fn first_return<F: PlanarField + ?Sized>(
    field: &F,
    section: &Section,
    xi: f64,
    opts: &ReturnOptions,
) -> Result<Crossing, CycleError> {
    if !(xi.abs() <= section.half_length()) {
        return Err(CycleError::OutsideSection { xi, half_length: section.half_length() });
    }
    let nb = opts.neighborhood;
    let res = next_section_crossing_with(
        field,
        section.point(xi),
        section.segment(),
        section.orientation(),
        opts.t_offset,
        opts.t_max,
        &opts.flow,
        |step| match nb {
            Some(nb) if !nb.contains(step.y1) => Err(FlowError::Aborted { t: step.t1() }),
            _ => Ok(()),
        },
    );
    res.map_err(|e| match e {
        FlowError::Aborted { t } => CycleError::LeftNeighborhood { xi, t },
        FlowError::NoCrossing { t_max } => CycleError::NoCrossing { xi, t_max },
        other => CycleError::Flow(other),
    })
}

/// `π(ξ)`.
pub fn return_map<F: PlanarField + ?Sized>(
    field: &F,
    section: &Section,
    xi: f64,
    opts: &ReturnOptions,
) -> Result<f64, CycleError> {
    first_return(field, section, xi, opts).map(|c| c.xi)
}

/// `d(ξ) = π(ξ) − ξ`.
pub fn displacement<F: PlanarField + ?Sized>(
    field: &F,
    section: &Section,
    xi: f64,
    opts: &ReturnOptions,
) -> Result<f64, CycleError> {
    return_map(field, section, xi, opts).map(|p| p - xi)
}

/// Displacement at each `ξ`, evaluated concurrently; order is preserved.
pub fn sample_displacement<F: PlanarField + ?Sized>(
    field: &F,
    section: &Section,
    xis: &[f64],
    opts: &ReturnOptions,
) -> Vec<Result<f64, CycleError>> {
    xis.par_iter().map(|&xi| displacement(field, section, xi, opts)).collect()
}

/// CSV with columns `xi, d`.
pub fn write_displacement_csv(path: &Path, samples: &[(f64, f64)]) -> Result<(), CycleError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["xi", "d"])?;
    for (xi, d) in samples {
        w.write_record([format!("{xi:.17e}"), format!("{d:.17e}")])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Degree estimate with the Taylor table it was read from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Multiplicity {
    pub d: u32,
    /// `d^(j)(ξ*)/j!` for `j = 0..=d_max`.
    pub coefficients: Vec<f64>,
    /// RMS residual of the least-squares fit.
    pub residual: f64,
    /// Half-width of the sampling window actually used.
    pub h: f64,
}

impl Multiplicity {
    pub fn leading(&self) -> f64 {
        self.coefficients[self.d as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiplicityOptions {
    pub d_max: u32,
    pub h: f64,
    pub abs_floor: f64,
    pub residual_factor: f64,
    /// The window is halved at most this many times when returns fail or the
    /// fit is inconclusive.
    pub max_halvings: u32,
}

impl Default for MultiplicityOptions {
    fn default() -> Self {
        Self { d_max: 6, h: 0.05, abs_floor: 1e-7, residual_factor: 1e3, max_halvings: 4 }
    }
}

/// A located periodic orbit.
#[derive(Debug, Clone)]
pub struct LimitCycle {
    pub section: Section,
    pub xi: f64,
    pub point: [f64; 2],
    pub period: f64,
    pub polyline: Vec<[f64; 2]>,
    pub exponent: f64,
    pub multiplicity: Option<Multiplicity>,
    pub orbit: Orbit,
    pub tol: Tolerances,
}

pub const DEFAULT_POLYLINE_POINTS: usize = 1024;

impl LimitCycle {
    /// Builds the cycle through `section.point(xi)` by integrating one return.
    pub fn through<F: PlanarField + ?Sized>(
        field: &F,
        section: &Section,
        xi: f64,
        opts: &ReturnOptions,
        polyline_points: usize,
    ) -> Result<Self, CycleError> {
        let c = first_return(field, section, xi, opts)?;
        let point = section.point(xi);
        let orbit = integrate(field, point, c.t, &opts.flow)?;
        let polyline = orbit.uniform_polyline(polyline_points.max(512));
        let exponent = orbit_integral(&orbit, |p| field.divergence_at(p));
        Ok(Self {
            section: *section,
            xi,
            point,
            period: c.t,
            polyline,
            exponent,
            multiplicity: None,
            orbit,
            tol: opts.flow.tol,
        })
    }

    /// Mean distance of the polyline from its centroid.
    pub fn radius(&self) -> f64 {
        let pts = &self.polyline[..self.polyline.len() - 1];
        let n = pts.len() as f64;
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
        pts.iter().map(|p| (p[0] - cx).hypot(p[1] - cy)).sum::<f64>() / n
    }

    /// Distance between the polyline's first and last points.
    pub fn closure_gap(&self) -> f64 {
        let a = self.polyline[0];
        let b = self.polyline[self.polyline.len() - 1];
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    pub fn summary(&self) -> CycleSummary {
        CycleSummary {
            xi: self.xi,
            radius: self.radius(),
            period: self.period,
            exponent: self.exponent,
            multiplicity: self.multiplicity.as_ref().map(|m| m.d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleSummary {
    pub xi: f64,
    pub radius: f64,
    pub period: f64,
    pub exponent: f64,
    pub multiplicity: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FindOptions {
    pub ret: ReturnOptions,
    pub xtol: f64,
    pub dedup: f64,
    pub polyline_points: usize,
}

impl Default for FindOptions {
    fn default() -> Self {
        Self { ret: ReturnOptions::default(), xtol: 1e-12, dedup: 1e-8, polyline_points: DEFAULT_POLYLINE_POINTS }
    }
}

/// Zeros of the displacement map on `[range.0, range.1]`, located by sign
/// changes between `n_seeds` evenly spaced seeds and refined inside each
/// bracket. Seeds where the return map is undefined are skipped. Cycles come
/// back ordered by `ξ*`.
pub fn find_cycles<F: PlanarField + ?Sized>(
    field: &F,
    section: &Section,
    range: (f64, f64),
    n_seeds: usize,
    opts: &FindOptions,
) -> Vec<LimitCycle> {
    find_roots(field, section, range, n_seeds, opts)
        .into_par_iter()
        .filter_map(|xi| LimitCycle::through(field, section, xi, &opts.ret, opts.polyline_points).ok())
        .collect()
}

/// The `ξ*` values behind [`find_cycles`], without the re-integration.
pub fn find_roots<F: PlanarField + ?Sized>(
    field: &F,
    section: &Section,
    range: (f64, f64),
    n_seeds: usize,
    opts: &FindOptions,
) -> Vec<f64> {
    if n_seeds < 2 {
        return Vec::new();
    }
    let (a, b) = range;
    let seeds: Vec<f64> = (0..n_seeds).map(|k| a + (b - a) * k as f64 / (n_seeds - 1) as f64).collect();
    let values = sample_displacement(field, section, &seeds, &opts.ret);
    let mut exact = Vec::new();
    let mut brackets = Vec::new();
    for k in 0..n_seeds {
        if let Ok(v) = values[k] {
            if v == 0.0 {
                exact.push(seeds[k]);
            }
            if k + 1 < n_seeds {
                if let Ok(w) = values[k + 1] {
                    if v * w < 0.0 {
                        brackets.push((seeds[k], v, seeds[k + 1], w));
                    }
                }
            }
        }
    }
    let refined: Vec<f64> = brackets
        .into_par_iter()
        .filter_map(|(lo, flo, hi, fhi)| {
            refine_root(|xi| displacement(field, section, xi, &opts.ret), lo, flo, hi, fhi, opts.xtol)
        })
        .collect();
    let mut roots: Vec<f64> = exact.into_iter().chain(refined).collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() < opts.dedup);
    roots
}

/// Bracketing refinement (Illinois variant of regula falsi with a bisection
/// fallback) until the bracket is narrower than `xtol`.
fn refine_root<G: Fn(f64) -> Result<f64, CycleError>>(
    g: G,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    xtol: f64,
) -> Option<f64> {
    let mut side = 0i8;
    for it in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        let width = b - a;
        // Every fourth iteration, or when the secant step is not safely inside, bisect.
        if it % 4 == 3 || !(c > a + 0.01 * width && c < b - 0.01 * width) {
            c = 0.5 * (a + b);
        }
        let fc = g(c).ok()?;
        if fc == 0.0 {
            return Some(c);
        }
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if a > b {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Some(if fa.abs() < fb.abs() { a } else { b })
}

fn chebyshev_nodes(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| h * ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect()
}

/// Least-squares polynomial fit `Σ c_j ξ^j`, `j = 0..=deg`, returning the
/// coefficients and the RMS residual.
pub(crate) fn poly_fit(xs: &[f64], ys: &[f64], deg: usize) -> (Vec<f64>, f64) {
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(xs.len(), deg + 1, |i, j| (xs[i] / scale).powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let svd = a.clone().svd(true, true);
    let sol = svd.solve(&b, 1e-14).expect("SVD with both factors");
    let resid = &a * &sol - &b;
    let rms = (resid.norm_squared() / xs.len() as f64).sqrt();
    let coeffs = sol.iter().enumerate().map(|(j, c)| c / scale.powi(j as i32)).collect();
    (coeffs, rms)
}

/// Order of the first non-negligible Taylor coefficient of the displacement
/// map at the cycle.
pub fn multiplicity<F: PlanarField + ?Sized>(
    field: &F,
    cycle: &LimitCycle,
    opts: &MultiplicityOptions,
    ret: &ReturnOptions,
) -> Result<Multiplicity, CycleError> {
    if !(1..=6).contains(&opts.d_max) {
        return Err(CycleError::BadOrder(opts.d_max));
    }
    let n_nodes = 4 * opts.d_max as usize + 1;
    let room = cycle.section.half_length() - cycle.xi.abs();
    let mut h = opts.h.min(room);
    let mut last_err = None;
    for _ in 0..=opts.max_halvings {
        let offsets = chebyshev_nodes(n_nodes, h);
        let xis: Vec<f64> = offsets.iter().map(|o| cycle.xi + o).collect();
        let values: Result<Vec<f64>, CycleError> =
            sample_displacement(field, &cycle.section, &xis, ret).into_iter().collect();
        match values {
            Ok(values) => {
                let (coefficients, residual) = poly_fit(&offsets, &values, opts.d_max as usize);
                // A term counts when its size over the window, |c_j| h^j, clears the fit noise.
                let pick = (1..=opts.d_max as usize).find(|&j| {
                    let c = coefficients[j].abs();
                    c > opts.abs_floor && c * h.powi(j as i32) > opts.residual_factor * residual
                });
                match pick {
                    Some(d) => return Ok(Multiplicity { d: d as u32, coefficients, residual, h }),
                    None => {
                        last_err = Some(CycleError::Inconclusive { d_max: opts.d_max, coefficients, residual })
                    }
                }
            }
            Err(e) => last_err = Some(e),
        }
        h *= 0.5;
    }
    Err(last_err.expect("at least one attempt"))
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// `∫ g(γ(t)) dt` over the whole orbit: 5-point Gauss–Legendre on every dense
/// step, with the number of panels per step doubled until two successive
/// totals agree to 1e-10.
pub fn orbit_integral<G: Fn([f64; 2]) -> f64 + Sync>(orbit: &Orbit, g: G) -> f64 {
    let total = |panels: usize| -> f64 {
        orbit
            .steps()
            .iter()
            .map(|s| {
                let w = s.h / panels as f64;
                (0..panels)
                    .map(|k| {
                        let mid = s.t0 + (k as f64 + 0.5) * w;
                        GL5_NODES
                            .iter()
                            .zip(GL5_WEIGHTS)
                            .map(|(x, wt)| wt * g(s.eval(mid + 0.5 * w * x)))
                            .sum::<f64>()
                            * 0.5
                            * w
                    })
                    .sum::<f64>()
            })
            .sum()
    };
    let mut panels = 1;
    let mut prev = total(panels);
    while panels < 64 {
        panels *= 2;
        let cur = total(panels);
        if (cur - prev).abs() < 1e-10 {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// `∫_0^T div X(γ(t)) dt`.
pub fn characteristic_exponent<F: PlanarField + ?Sized>(field: &F, cycle: &LimitCycle) -> f64 {
    orbit_integral(&cycle.orbit, |p| field.divergence_at(p))
}

/// The three parts of the divergence of `X + λR∇R` along a cycle:
/// `∫ div X`, `λ∫|∇R|²` and `λ∫ R ΔR`.
pub fn divergence_integral_terms(x: &PolyVectorField, r: &Poly2, lambda: f64, cycle: &LimitCycle) -> [f64; 3] {
    let rx = r.derivative(Axis::X, 1);
    let ry = r.derivative(Axis::Y, 1);
    let lap = rx.derivative(Axis::X, 1).add(&ry.derivative(Axis::Y, 1));
    let div = x.divergence();
    let base = orbit_integral(&cycle.orbit, |[a, b]| div.eval(a, b));
    if lambda == 0.0 {
        return [base, 0.0, 0.0];
    }
    let grad = orbit_integral(&cycle.orbit, |[a, b]| rx.eval(a, b).powi(2) + ry.eval(a, b).powi(2));
    let lapl = orbit_integral(&cycle.orbit, |[a, b]| r.eval(a, b) * lap.eval(a, b));
    [base, lambda * grad, lambda * lapl]
}

/// `∫_0^T e^{−∫_0^t div X} (X ∧ ∂X/∂λ)(γ(t)) dt`, with the normalising
/// constant taken as 1. Integrated as one augmented system.
pub fn perko_derivative<F, G>(x: &F, dx: &G, cycle: &LimitCycle, opts: &FlowOptions) -> Result<f64, CycleError>
where
    F: PlanarField + ?Sized,
    G: PlanarField + ?Sized,
{
    let rhs = |s: &[f64; 4]| -> [f64; 4] {
        let p = [s[0], s[1]];
        let v = x.eval(p);
        let w = dx.eval(p);
        [v[0], v[1], x.divergence_at(p), (-s[2]).exp() * (v[0] * w[1] - v[1] * w[0])]
    };
    let (_, end) = drive(&rhs, [cycle.point[0], cycle.point[1], 0.0, 0.0], cycle.period, opts, |_, _| {
        Ok(ControlFlow::Continue(()))
    })?;
    Ok(end[3])
}

/// `π′(ξ*)` from the variational equation along the cycle.
pub fn return_multiplier(field: &PolyVectorField, cycle: &LimitCycle, opts: &FlowOptions) -> Result<f64, CycleError> {
    let px = field.p().derivative(Axis::X, 1);
    let py = field.p().derivative(Axis::Y, 1);
    let qx = field.q().derivative(Axis::X, 1);
    let qy = field.q().derivative(Axis::Y, 1);
    let rhs = |s: &[f64; 4]| -> [f64; 4] {
        let (a, b) = (s[0], s[1]);
        let v = field.eval([a, b]);
        [
            v[0],
            v[1],
            px.eval(a, b) * s[2] + py.eval(a, b) * s[3],
            qx.eval(a, b) * s[2] + qy.eval(a, b) * s[3],
        ]
    };
    let d = cycle.section.segment().direction;
    let (_, end) = drive(&rhs, [cycle.point[0], cycle.point[1], d[0], d[1]], cycle.period, opts, |_, _| {
        Ok(ControlFlow::Continue(()))
    })?;
    let v = field.eval(cycle.point);
    let wedge = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - a[1] * b[0];
    Ok(wedge([end[2], end[3]], v) / wedge(d, v))
}

/// Where the function `F` of the splitting construction comes from.
pub enum FSource<'a> {
    /// `F` is already a polynomial; it is used as `R_n` directly.
    Exact(Poly2),
    /// `F` is approximated by a tensor Bernstein polynomial on `rect`.
    Sampled { field: &'a SampledField, rect: Rect },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplittingOptions {
    pub find: FindOptions,
    pub range: (f64, f64),
    pub n_seeds: usize,
    pub degree_cap: usize,
    pub grid_density: usize,
    pub multiplicity: MultiplicityOptions,
}

impl Default for SplittingOptions {
    fn default() -> Self {
        Self {
            find: FindOptions::default(),
            range: (-0.3, 0.3),
            n_seeds: 25,
            degree_cap: 256,
            grid_density: crate::bernstein::DEFAULT_GRID_DENSITY,
            multiplicity: MultiplicityOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SplittingReport {
    pub lambda: f64,
    pub r: u32,
    pub eps_target: f64,
    pub base_multiplicity: u32,
    pub time_reversed: bool,
    /// Bernstein degrees of `R_n`; absent when `F` was used exactly.
    pub degree: Option<(usize, usize)>,
    pub degree_search: Option<DegreeSearch>,
    pub census: Vec<CycleSummary>,
    pub continued_index: usize,
    pub middle_exponent: f64,
    /// `[∫ div X, λ∫|∇R|², λ∫ R ΔR]` on the continued cycle.
    pub divergence_terms: [f64; 3],
    pub positivity: bool,
    pub alternating: bool,
    pub success: bool,
    pub tolerances: Tolerances,
}

pub struct SplittingOutcome {
    pub report: SplittingReport,
    /// `X_{λ,n}` (time-reversed if the base cycle was unstable).
    pub perturbed: GradientCollapse,
    pub r_poly: Poly2,
    pub cycles: Vec<LimitCycle>,
}

/// Adjacent exponents have strictly opposite signs.
pub fn stability_alternates(cycles: &[CycleSummary]) -> bool {
    cycles.windows(2).all(|w| w[0].exponent * w[1].exponent < 0.0)
}

/// Splits a stable odd-degree (`d >= 3`) cycle of `x` with `X + λ R_n ∇R_n`
/// and takes the census of the resulting cycles on the section.
pub fn theorem1_splitting(
    x: &PolyVectorField,
    cycle: &LimitCycle,
    f: &FSource<'_>,
    lambda: f64,
    r: u32,
    eps_target: f64,
    opts: &SplittingOptions,
) -> Result<SplittingOutcome, CycleError> {
    let mult = match &cycle.multiplicity {
        Some(m) => m.clone(),
        None => multiplicity(x, cycle, &opts.multiplicity, &opts.find.ret)?,
    };
    if mult.d == 1 {
        return Err(CycleError::Precondition("cycle is hyperbolic (multiplicity 1)".into()));
    }
    if mult.d % 2 == 0 {
        return Err(CycleError::Precondition(format!("cycle has even multiplicity {}", mult.d)));
    }
    if !(lambda > 0.0) {
        return Err(CycleError::Precondition(format!("lambda must be positive, got {lambda}")));
    }
    // A positive leading coefficient means the cycle repels; reverse time.
    let time_reversed = mult.leading() > 0.0;
    let (base, section) = if time_reversed {
        (x.reversed(), cycle.section.reversed())
    } else {
        (x.clone(), cycle.section)
    };

    let (r_poly, degree, degree_search) = match f {
        FSource::Exact(p) => (p.clone(), None, None),
        FSource::Sampled { field, rect } => {
            let search = min_degree_for_tolerance(field, *rect, r + 1, eps_target, opts.degree_cap, opts.grid_density)?;
            let b = bernstein_fit(field, search.m, search.n, *rect)?;
            (b, Some((search.m, search.n)), Some(search))
        }
    };
    let perturbed = GradientCollapse::new(&base, &r_poly, lambda);
    let mut cycles = find_cycles(&perturbed, &section, opts.range, opts.n_seeds, &opts.find);
    if cycles.is_empty() {
        return Err(CycleError::CycleLost(format!(
            "no cycle of the perturbed field on [{}, {}] with {} seeds",
            opts.range.0, opts.range.1, opts.n_seeds
        )));
    }
    let continued_index = cycles
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.xi - cycle.xi).abs().total_cmp(&(b.1.xi - cycle.xi).abs()))
        .map(|(i, _)| i)
        .expect("non-empty");
    let middle = &cycles[continued_index];
    let divergence_terms = divergence_integral_terms(&base, &r_poly, lambda, middle);
    let middle_exponent = middle.exponent;
    let positivity = middle_exponent > 0.0 && divergence_terms[1] > 0.0;
    for c in cycles.iter_mut() {
        if c.exponent.abs() > 1e-6 {
            c.multiplicity = Some(Multiplicity {
                d: 1,
                coefficients: vec![0.0, c.exponent.exp() - 1.0],
                residual: 0.0,
                h: 0.0,
            });
        }
    }
    let census: Vec<CycleSummary> = cycles.iter().map(LimitCycle::summary).collect();
    let alternating = stability_alternates(&census);
    let success = census.len() >= 3 && alternating && positivity;
    Ok(SplittingOutcome {
        report: SplittingReport {
            lambda,
            r,
            eps_target,
            base_multiplicity: mult.d,
            time_reversed,
            degree,
            degree_search,
            census,
            continued_index,
            middle_exponent,
            divergence_terms,
            positivity,
            alternating,
            success,
            tolerances: opts.find.ret.flow.tol,
        },
        perturbed,
        r_poly,
        cycles,
    })
}
