//! Adaptive Dormand–Prince 5(4) integration with dense output and
//! section-crossing events.

use std::ops::ControlFlow;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::PlanarField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("trajectory left the safety box |x|,|y| <= {bound} at t = {t}")]
    Divergence { t: f64, bound: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("no section crossing before t = {t_max}")]
    NoCrossing { t_max: f64 },
    #[error("invalid integration request: {0}")]
    InvalidInput(&'static str),
    #[error("integration stopped by observer at t = {t}")]
    Aborted { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-10 }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self { abs: tol, rel: tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub tol: Tolerances,
    /// Integration stops with [`FlowError::Divergence`] once `|x|` or `|y|` exceeds this.
    pub safety_bound: f64,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { tol: Tolerances::default(), safety_bound: 1e3, max_steps: 2_000_000, h_max: 0.1 }
    }
}

impl FlowOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol: Tolerances::uniform(tol), ..Self::default() }
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension (Hairer & Wanner, DOPRI5).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

struct StageResult<const N: usize> {
    y1: [f64; N],
    k7: [f64; N],
    err: f64,
    k: [[f64; N]; 6],
}

fn rk_step<const N: usize, F: Fn(&[f64; N]) -> [f64; N]>(
    f: &F,
    y0: &[f64; N],
    k1: &[f64; N],
    h: f64,
    tol: Tolerances,
) -> StageResult<N> {
    let k2 = f(&axpy(y0, &[(h * A21, k1)]));
    let k3 = f(&axpy(y0, &[(h * A31, k1), (h * A32, &k2)]));
    let k4 = f(&axpy(y0, &[(h * A41, k1), (h * A42, &k2), (h * A43, &k3)]));
    let k5 = f(&axpy(y0, &[(h * A51, k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)]));
    let k6 = f(&axpy(
        y0,
        &[(h * A61, k1), (h * A62, &k2), (h * A63, &k3), (h * A64, &k4), (h * A65, &k5)],
    ));
    let y1 = axpy(
        y0,
        &[(h * A71, k1), (h * A73, &k3), (h * A74, &k4), (h * A75, &k5), (h * A76, &k6)],
    );
    let k7 = f(&y1);
    let mut sum = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = tol.abs + tol.rel * y0[i].abs().max(y1[i].abs());
        sum += (e / sc).powi(2);
    }
    StageResult { y1, k7, err: (sum / N as f64).sqrt(), k: [*k1, k2, k3, k4, k5, k6] }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    pub k1: [f64; N],
    rcont: [[f64; N]; 4],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Dense output at `t ∈ [t0, t0 + h]` (fourth order).
    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r2, r3, r4, r5] = &self.rcont;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = self.y0[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
        out
    }

    /// Time derivative of the dense output.
    pub fn derivative(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r2, r3, r4, r5] = &self.rcont;
        let mut out = [0.0; N];
        for i in 0..N {
            let c = r4[i] + th1 * r5[i];
            let b = r3[i] + th * c;
            let a = r2[i] + th1 * b;
            let da = -b + th1 * (c - th * r5[i]);
            out[i] = (a + th * da) / self.h;
        }
        out
    }
}

/// Integrates `y' = f(y)` from `t = 0`, handing every accepted step to `observe`,
/// until `t_end` or until `observe` breaks.
pub fn drive<const N: usize, F, O>(
    f: &F,
    y0: [f64; N],
    t_end: f64,
    opts: &FlowOptions,
    mut observe: O,
) -> Result<(f64, [f64; N]), FlowError>
where
    F: Fn(&[f64; N]) -> [f64; N],
    O: FnMut(&DenseStep<N>, &F) -> Result<ControlFlow<()>, FlowError>,
{
    if !(t_end > 0.0) || !opts.tol.abs.is_finite() || opts.tol.abs <= 0.0 || opts.tol.rel < 0.0 {
        return Err(FlowError::InvalidInput("t_end and tolerances must be positive"));
    }
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = f(&y);
    let mut h = initial_step(f, &y, &k1, opts).min(t_end);
    let mut steps = 0usize;
    let mut reject_streak = false;
    while t < t_end {
        if steps >= opts.max_steps {
            return Err(FlowError::TooManySteps(opts.max_steps));
        }
        steps += 1;
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        if h < 1e-13 * t.abs().max(1.0) {
            return Err(FlowError::StepUnderflow { t, h });
        }
        let st = rk_step(f, &y, &k1, h, opts.tol);
        if !st.err.is_finite() || !st.y1.iter().all(|v| v.is_finite()) {
            h *= 0.1;
            reject_streak = true;
            continue;
        }
        if st.err <= 1.0 {
            let ydiff: [f64; N] = std::array::from_fn(|i| st.y1[i] - y[i]);
            let bspl: [f64; N] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
            let [_, _, k3, k4, k5, k6] = &st.k;
            let r4: [f64; N] = std::array::from_fn(|i| ydiff[i] - h * st.k7[i] - bspl[i]);
            let r5: [f64; N] = std::array::from_fn(|i| {
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * st.k7[i])
            });
            let step = DenseStep { t0: t, h, y0: y, y1: st.y1, k1, rcont: [ydiff, bspl, r4, r5] };
            t = if last { t_end } else { t + h };
            y = st.y1;
            k1 = st.k7;
            if y[0].abs() > opts.safety_bound || y[1].abs() > opts.safety_bound {
                return Err(FlowError::Divergence { t, bound: opts.safety_bound });
            }
            if observe(&step, f)?.is_break() {
                return Ok((t, y));
            }
            let fac = if st.err == 0.0 { 5.0 } else { (0.9 * st.err.powf(-0.2)).clamp(0.2, 5.0) };
            let fac = if reject_streak { fac.min(1.0) } else { fac };
            reject_streak = false;
            h = (h * fac).min(opts.h_max);
        } else {
            h *= (0.9 * st.err.powf(-0.2)).max(0.2);
            reject_streak = true;
        }
    }
    Ok((t, y))
}

fn initial_step<const N: usize, F: Fn(&[f64; N]) -> [f64; N]>(
    f: &F,
    y: &[f64; N],
    k1: &[f64; N],
    opts: &FlowOptions,
) -> f64 {
    let sc: [f64; N] = std::array::from_fn(|i| opts.tol.abs + opts.tol.rel * y[i].abs());
    let norm = |v: &[f64; N]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = norm(y);
    let d1 = norm(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y, &[(h0, k1)]);
    let k2 = f(&y1);
    let diff: [f64; N] = std::array::from_fn(|i| k2[i] - k1[i]);
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(opts.h_max)
}

/// Single Dormand–Prince step of size `h` from `y0` (no error control).
pub(crate) fn exact_substep<const N: usize, F: Fn(&[f64; N]) -> [f64; N]>(
    f: &F,
    y0: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> [f64; N] {
    if h == 0.0 {
        return *y0;
    }
    rk_step(f, y0, k1, h, Tolerances::default()).y1
}

fn planar_rhs<F: PlanarField + ?Sized>(field: &F) -> impl Fn(&[f64; 2]) -> [f64; 2] + '_ {
    move |y: &[f64; 2]| field.eval(*y)
}

/// A computed trajectory: every accepted step with its dense interpolant.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub x0: [f64; 2],
    pub tol: Tolerances,
    steps: Vec<DenseStep<2>>,
}

impl Orbit {
    pub fn steps(&self) -> &[DenseStep<2>] {
        &self.steps
    }

    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t1())
    }

    pub fn endpoint(&self) -> [f64; 2] {
        self.steps.last().map_or(self.x0, |s| s.y1)
    }

    /// State at time `t ∈ [0, t_end]` from the dense output.
    pub fn eval(&self, t: f64) -> [f64; 2] {
        if self.steps.is_empty() {
            return self.x0;
        }
        let idx = self.steps.partition_point(|s| s.t1() < t).min(self.steps.len() - 1);
        self.steps[idx].eval(t)
    }

    /// Velocity at time `t` from the dense output.
    pub fn derivative(&self, t: f64) -> [f64; 2] {
        if self.steps.is_empty() {
            return [0.0; 2];
        }
        let idx = self.steps.partition_point(|s| s.t1() < t).min(self.steps.len() - 1);
        self.steps[idx].derivative(t)
    }

    /// Step endpoints `(t, x, y)`, starting with the initial point.
    pub fn samples(&self) -> Vec<(f64, [f64; 2])> {
        std::iter::once((0.0, self.x0))
            .chain(self.steps.iter().map(|s| (s.t1(), s.y1)))
            .collect()
    }

    /// `n + 1` points at evenly spaced times over `[0, t_end]`.
    pub fn uniform_polyline(&self, n: usize) -> Vec<[f64; 2]> {
        let t_end = self.t_end();
        (0..=n).map(|k| self.eval(t_end * k as f64 / n as f64)).collect()
    }

    /// CSV with columns `t, x, y` (step endpoints).
    pub fn write_csv(&self, path: &Path) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "x", "y"])?;
        for (t, [x, y]) in self.samples() {
            w.write_record([format!("{t:.17e}"), format!("{x:.17e}"), format!("{y:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Flow of `field` from `x0` over `[0, t_end]`.
pub fn integrate<F: PlanarField + ?Sized>(
    field: &F,
    x0: [f64; 2],
    t_end: f64,
    opts: &FlowOptions,
) -> Result<Orbit, FlowError> {
    let rhs = planar_rhs(field);
    let mut steps = Vec::new();
    drive(&rhs, x0, t_end, opts, |s, _| {
        steps.push(s.clone());
        Ok(ControlFlow::Continue(()))
    })?;
    Ok(Orbit { x0, tol: opts.tol, steps })
}

/// Straight segment `base + ξ·direction`, `|ξ| <= half_length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub base: [f64; 2],
    /// Unit tangent.
    pub direction: [f64; 2],
    pub half_length: f64,
}

impl Segment {
    pub fn new(base: [f64; 2], direction: [f64; 2], half_length: f64) -> Result<Self, FlowError> {
        let n = direction[0].hypot(direction[1]);
        if !(n > 0.0) || !(half_length > 0.0) {
            return Err(FlowError::InvalidInput("segment needs a nonzero direction and positive half-length"));
        }
        Ok(Self { base, direction: [direction[0] / n, direction[1] / n], half_length })
    }

    /// Unit normal: the tangent turned a quarter counterclockwise.
    pub fn normal(&self) -> [f64; 2] {
        [-self.direction[1], self.direction[0]]
    }

    pub fn point(&self, xi: f64) -> [f64; 2] {
        [self.base[0] + xi * self.direction[0], self.base[1] + xi * self.direction[1]]
    }

    /// Signed offset from the segment's line along the normal.
    pub fn residual(&self, p: [f64; 2]) -> f64 {
        let n = self.normal();
        n[0] * (p[0] - self.base[0]) + n[1] * (p[1] - self.base[1])
    }

    /// Coordinate of the projection of `p` onto the line.
    pub fn coordinate(&self, p: [f64; 2]) -> f64 {
        self.direction[0] * (p[0] - self.base[0]) + self.direction[1] * (p[1] - self.base[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub point: [f64; 2],
    pub xi: f64,
}

const BISECTION_ITERS: usize = 30;
const CROSSING_RESIDUAL: f64 = 1e-12;

/// First `t ∈ (t_offset, t_max]` at which the flow from `x0` crosses `segment`
/// with normal velocity of sign `direction_sign`. The crossing time is
/// bracketed by bisection on the dense output and then polished with exact
/// Runge–Kutta sub-steps from the start of the bracketing step until the
/// residual across the segment is below 1e-12.
///
/// `visit` sees every accepted step before the crossing is looked for in it;
/// returning an error aborts the search.
pub fn next_section_crossing_with<F, V>(
    field: &F,
    x0: [f64; 2],
    segment: &Segment,
    direction_sign: f64,
    t_offset: f64,
    t_max: f64,
    opts: &FlowOptions,
    mut visit: V,
) -> Result<Crossing, FlowError>
where
    F: PlanarField + ?Sized,
    V: FnMut(&DenseStep<2>) -> Result<(), FlowError>,
{
    let rhs = planar_rhs(field);
    let sign = direction_sign.signum();
    let n = segment.normal();
    let mut found = None;
    drive(&rhs, x0, t_max, opts, |step, f| {
        visit(step)?;
        if step.t1() <= t_offset {
            return Ok(ControlFlow::Continue(()));
        }
        let ta = step.t0.max(t_offset);
        let ga = sign * segment.residual(if ta > step.t0 { step.eval(ta) } else { step.y0 });
        let gb = sign * segment.residual(step.y1);
        if !(ga < 0.0 && gb >= 0.0) {
            return Ok(ControlFlow::Continue(()));
        }
        let (mut lo, mut hi) = (ta, step.t1());
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if sign * segment.residual(step.eval(mid)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut t = 0.5 * (lo + hi);
        let mut p = exact_substep(f, &step.y0, &step.k1, t - step.t0);
        for _ in 0..6 {
            let g = segment.residual(p);
            if g.abs() < CROSSING_RESIDUAL {
                break;
            }
            let v = f(&p);
            let gdot = n[0] * v[0] + n[1] * v[1];
            if gdot == 0.0 {
                break;
            }
            t -= g / gdot;
            p = exact_substep(f, &step.y0, &step.k1, t - step.t0);
        }
        let xi = segment.coordinate(p);
        if xi.abs() <= segment.half_length {
            found = Some(Crossing { t, point: p, xi });
            Ok(ControlFlow::Break(()))
        } else {
            Ok(ControlFlow::Continue(()))
        }
    })?;
    found.ok_or(FlowError::NoCrossing { t_max })
}

pub fn next_section_crossing<F: PlanarField + ?Sized>(
    field: &F,
    x0: [f64; 2],
    segment: &Segment,
    direction_sign: f64,
    t_offset: f64,
    t_max: f64,
    opts: &FlowOptions,
) -> Result<Crossing, FlowError> {
    next_section_crossing_with(field, x0, segment, direction_sign, t_offset, t_max, opts, |_| Ok(()))
}
