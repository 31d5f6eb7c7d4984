//! Trapping annuli around a stable cycle: two closed curves, each an orbit arc
//! of a rotated field closed off by a piece of the section.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cycles::{first_return, LimitCycle, ReturnOptions, Section};
use crate::field::{PlanarField, PolyVectorField};
use crate::flow::integrate;

#[derive(Debug, Error)]
pub enum AnnulusError {
    #[error("rotated orbit from xi = {xi} failed to return inside ({lo}, {hi}): {reason}")]
    ReturnFailed { xi: f64, lo: f64, hi: f64, reason: String },
    #[error("cycle is hyperbolic and unstable (exponent {0})")]
    NotStable(f64),
    #[error("need xi1 < 0 < xi2 inside the section, got xi1 = {xi1}, xi2 = {xi2}")]
    BadBounds { xi1: f64, xi2: f64 },
    #[error("writing annulus curves: {0}")]
    Io(#[from] csv::Error),
}

/// A closed polyline: orbit arc from `xi_start` to `xi_return` followed by the
/// section piece back to the start. The last point repeats the first.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedCurve {
    pub points: Vec<[f64; 2]>,
    /// Polyline indices of the two junctions (start of the arc, end of the arc).
    pub corners: [usize; 2],
    pub xi_start: f64,
    pub xi_return: f64,
    /// Rotation parameter of the field whose orbit forms the arc.
    pub lambda0: f64,
}

impl ClosedCurve {
    /// Twice the signed area (positive for counterclockwise curves).
    fn doubled_area(&self) -> f64 {
        self.points.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum()
    }

    pub fn winding_number(&self, p: [f64; 2]) -> i32 {
        winding_number(&self.points, p)
    }

    pub fn distance(&self, p: [f64; 2]) -> f64 {
        self.points
            .windows(2)
            .map(|w| segment_distance(w[0], w[1], p))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Annulus {
    /// Interior boundary.
    pub s1: ClosedCurve,
    /// Exterior boundary.
    pub s2: ClosedCurve,
    pub xi1: f64,
    pub xi2: f64,
    pub section: Section,
    /// Period of the cycle the annulus surrounds.
    pub period: f64,
}

impl Annulus {
    /// Strictly between the curves, or within `tol` of either.
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        (self.s2.winding_number(p) != 0 && self.s1.winding_number(p) == 0)
            || self.s1.distance(p) <= tol
            || self.s2.distance(p) <= tol
    }

    /// CSV with columns `curve, x, y`.
    pub fn write_csv(&self, path: &Path) -> Result<(), AnnulusError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["curve", "x", "y"])?;
        for (name, c) in [("S1", &self.s1), ("S2", &self.s2)] {
            for p in &c.points {
                w.write_record([name.to_string(), format!("{:.17e}", p[0]), format!("{:.17e}", p[1])])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnulusOptions {
    pub ret: ReturnOptions,
    pub arc_points: usize,
    pub junction_points: usize,
}

impl Default for AnnulusOptions {
    fn default() -> Self {
        Self { ret: ReturnOptions::default(), arc_points: 512, junction_points: 16 }
    }
}

/// Builds `S1` from `xi1 < 0` and `S2` from `xi2 > 0` using orbits of
/// `Z = X + λ0 X^⊥`. On the interior side the rotation is taken with sign
/// `+|λ0|` times the cycle's orientation, on the exterior with the opposite
/// sign; if a return lands outside the required interval the sign is flipped
/// once. With `λ0 = 0` the plain return orbit of `X` is used.
pub fn build_trapping_annulus(
    x: &PolyVectorField,
    cycle: &LimitCycle,
    lambda0: f64,
    xi1: f64,
    xi2: f64,
    opts: &AnnulusOptions,
) -> Result<Annulus, AnnulusError> {
    let section = cycle.section;
    let h = section.half_length();
    if !(xi1 < 0.0 && xi2 > 0.0 && -xi1 <= h && xi2 <= h) {
        return Err(AnnulusError::BadBounds { xi1, xi2 });
    }
    let hyperbolic = cycle.multiplicity.as_ref().map_or(cycle.exponent.abs() > 1e-6, |m| m.d == 1);
    if hyperbolic && cycle.exponent > 0.0 {
        return Err(AnnulusError::NotStable(cycle.exponent));
    }
    let base = lambda0.abs() * section.orientation();
    let s1 = boundary_curve(x, &section, xi1, (xi1, 0.0), base, opts)?;
    let s2 = boundary_curve(x, &section, xi2, (0.0, xi2), -base, opts)?;
    Ok(Annulus { s1, s2, xi1, xi2, section, period: cycle.period })
}

fn boundary_curve(
    x: &PolyVectorField,
    section: &Section,
    xi: f64,
    (lo, hi): (f64, f64),
    lambda0: f64,
    opts: &AnnulusOptions,
) -> Result<ClosedCurve, AnnulusError> {
    let mut reason = String::new();
    let attempts: &[f64] = if lambda0 == 0.0 { &[0.0] } else { &[lambda0, -lambda0] };
    for &l in attempts {
        let z = x.rotate_family(l, 1.0);
        match first_return(&z, section, xi, &opts.ret) {
            Ok(c) if c.xi > lo && c.xi < hi => {
                let orbit = integrate(&z, section.point(xi), c.t, &opts.ret.flow).map_err(|e| {
                    AnnulusError::ReturnFailed { xi, lo, hi, reason: e.to_string() }
                })?;
                let mut points = orbit.uniform_polyline(opts.arc_points.max(8));
                let n_arc = points.len();
                *points.last_mut().expect("non-empty") = c.point;
                let m = opts.junction_points.max(1);
                for k in 1..m {
                    let s = c.xi + (xi - c.xi) * k as f64 / m as f64;
                    points.push(section.point(s));
                }
                points.push(points[0]);
                return Ok(ClosedCurve { points, corners: [0, n_arc - 1], xi_start: xi, xi_return: c.xi, lambda0: l });
            }
            Ok(c) => reason = format!("lambda0 = {l}: returned at xi = {}", c.xi),
            Err(e) => reason = format!("lambda0 = {l}: {e}"),
        }
    }
    Err(AnnulusError::ReturnFailed { xi, lo, hi, reason })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    /// Minimum over probe points of `Y·n / |Y|`, `n` the unit normal pointing into Ω.
    pub min_inward_flux: f64,
    pub transversal: bool,
    /// Minimum `|Y|` over grid points inside Ω.
    pub min_speed: f64,
    pub grid_points_inside: usize,
    pub no_singularity: bool,
    pub seeds: usize,
    pub escaped: usize,
    pub horizon: f64,
    pub invariant: bool,
    pub corner_counts: [usize; 2],
    pub pass: bool,
}

const INVARIANCE_SEEDS: usize = 32;
const SPEED_FLOOR: f64 = 1e-8;
const BOUNDARY_TOL: f64 = 1e-7;
/// Turning angle (radians) above which a polyline vertex counts as a corner.
pub const CORNER_ANGLE: f64 = 0.3;

/// Samples the three trapping properties of `annulus` for the field `y`.
pub fn verify_annulus<F: PlanarField + ?Sized>(y: &F, annulus: &Annulus, n_samples: usize) -> VerificationReport {
    let n_samples = n_samples.max(8);
    let min_inward_flux = [(&annulus.s1, -1.0), (&annulus.s2, 1.0)]
        .into_iter()
        .map(|(c, side)| curve_flux(y, c, side, n_samples))
        .fold(f64::INFINITY, f64::min);

    let (min_speed, grid_points_inside) = singularity_probe(y, annulus, n_samples);

    let horizon = 20.0 * annulus.period;
    let seeds = boundary_seeds(annulus, INVARIANCE_SEEDS);
    let escaped = seeds
        .par_iter()
        .filter(|&&p| !stays_inside(y, annulus, p, horizon))
        .count();

    let corner_counts = [corner_indices(&annulus.s1.points).len(), corner_indices(&annulus.s2.points).len()];
    let transversal = min_inward_flux > 0.0;
    let no_singularity = min_speed > SPEED_FLOOR;
    let invariant = escaped == 0;
    VerificationReport {
        min_inward_flux,
        transversal,
        min_speed,
        grid_points_inside,
        no_singularity,
        seeds: seeds.len(),
        escaped,
        horizon,
        invariant,
        corner_counts,
        pass: transversal && no_singularity && invariant,
    }
}

/// `side = +1`: Ω lies inside the curve; `-1`: outside.
fn curve_flux<F: PlanarField + ?Sized>(y: &F, c: &ClosedCurve, side: f64, n_samples: usize) -> f64 {
    let orient = c.doubled_area().signum();
    let segs: Vec<([f64; 2], [f64; 2])> = c.points.windows(2).map(|w| (w[0], w[1])).filter(|(a, b)| a != b).collect();
    let lengths: Vec<f64> = segs.iter().map(|(a, b)| (b[0] - a[0]).hypot(b[1] - a[1])).collect();
    let total: f64 = lengths.iter().sum();
    let flux = |a: [f64; 2], b: [f64; 2], p: [f64; 2]| {
        let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
        let len = tx.hypot(ty);
        // Left normal points into a counterclockwise curve.
        let s = side * orient / len;
        let n = [-ty * s, tx * s];
        let v = y.eval(p);
        let speed = v[0].hypot(v[1]);
        if speed == 0.0 {
            return f64::NEG_INFINITY;
        }
        (v[0] * n[0] + v[1] * n[1]) / speed
    };
    // Every vertex against both adjacent segments.
    let mut worst = segs.iter().map(|&(a, b)| flux(a, b, a).min(flux(a, b, b))).fold(f64::INFINITY, f64::min);
    // Evenly spaced probes by arc length.
    let mut seg = 0;
    let mut acc = 0.0;
    for k in 0..n_samples {
        let s = total * (k as f64 + 0.5) / n_samples as f64;
        while seg + 1 < segs.len() && acc + lengths[seg] < s {
            acc += lengths[seg];
            seg += 1;
        }
        let (a, b) = segs[seg];
        let u = ((s - acc) / lengths[seg]).clamp(0.0, 1.0);
        let p = [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])];
        worst = worst.min(flux(a, b, p));
    }
    worst
}

fn singularity_probe<F: PlanarField + ?Sized>(y: &F, annulus: &Annulus, n_samples: usize) -> (f64, usize) {
    let g = (n_samples / 4).clamp(16, 256);
    let pts = &annulus.s2.points;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let rows: Vec<(f64, usize)> = (0..g)
        .into_par_iter()
        .map(|i| {
            let px = x0 + (x1 - x0) * (i as f64 + 0.5) / g as f64;
            let mut best = f64::INFINITY;
            let mut count = 0;
            for j in 0..g {
                let py = y0 + (y1 - y0) * (j as f64 + 0.5) / g as f64;
                if annulus.s2.winding_number([px, py]) != 0 && annulus.s1.winding_number([px, py]) == 0 {
                    let v = y.eval([px, py]);
                    best = best.min(v[0].hypot(v[1]));
                    count += 1;
                }
            }
            (best, count)
        })
        .collect();
    rows.into_iter().fold((f64::INFINITY, 0), |(b, c), (rb, rc)| (b.min(rb), c + rc))
}

fn boundary_seeds(annulus: &Annulus, n: usize) -> Vec<[f64; 2]> {
    let per = n / 2;
    [&annulus.s1, &annulus.s2]
        .into_iter()
        .flat_map(|c| {
            let m = c.points.len() - 1;
            (0..per).map(move |k| c.points[k * m / per])
        })
        .collect()
}

fn stays_inside<F: PlanarField + ?Sized>(y: &F, annulus: &Annulus, p: [f64; 2], horizon: f64) -> bool {
    let opts = crate::flow::FlowOptions::default();
    match integrate(y, p, horizon, &opts) {
        Ok(orbit) => orbit.steps().iter().all(|s| {
            annulus.contains(s.y1, BOUNDARY_TOL) && annulus.contains(s.eval(s.t0 + 0.5 * s.h), BOUNDARY_TOL)
        }),
        Err(_) => false,
    }
}

/// Vertices of a closed polyline (last point = first) whose turning angle exceeds [`CORNER_ANGLE`].
pub fn corner_indices(points: &[[f64; 2]]) -> Vec<usize> {
    let n = points.len() - 1;
    (0..n)
        .filter(|&i| {
            let prev = points[(i + n - 1) % n];
            let cur = points[i];
            let next = points[(i + 1) % n];
            let a = [cur[0] - prev[0], cur[1] - prev[1]];
            let b = [next[0] - cur[0], next[1] - cur[1]];
            let cross = a[0] * b[1] - a[1] * b[0];
            let dot = a[0] * b[0] + a[1] * b[1];
            cross.atan2(dot).abs() > CORNER_ANGLE
        })
        .collect()
}

/// Winding number of a closed polyline around `p`.
pub fn winding_number(points: &[[f64; 2]], p: [f64; 2]) -> i32 {
    let mut w = 0;
    for seg in points.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let side = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && side > 0.0 {
                w += 1;
            }
        } else if b[1] <= p[1] && side < 0.0 {
            w -= 1;
        }
    }
    w
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ck, unit_circle_defect};

    fn ck_cycle(k: u32) -> (PolyVectorField, LimitCycle) {
        let x = ck(k);
        let s = Section::new(&x, [1.0, 0.0], [1.0, 0.0], 0.6).unwrap();
        let c = LimitCycle::through(&x, &s, 0.0, &ReturnOptions::default(), 1024).unwrap();
        (x, c)
    }

    fn radius_range(c: &ClosedCurve) -> (f64, f64) {
        c.points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
            let r = p[0].hypot(p[1]);
            (lo.min(r), hi.max(r))
        })
    }

    #[test]
    fn ck3_annulus_brackets_the_cycle() {
        let (x, c) = ck_cycle(3);
        let a = build_trapping_annulus(&x, &c, 0.1, -0.4, 0.4, &AnnulusOptions::default()).unwrap();
        assert!(radius_range(&a.s1).1 < 1.0);
        assert!(radius_range(&a.s2).0 > 1.0);
        assert!(a.xi1 < a.s1.xi_return && a.s1.xi_return < 0.0);
        assert!(0.0 < a.s2.xi_return && a.s2.xi_return < a.xi2);
        for s in [&a.s1, &a.s2] {
            assert_eq!(s.points.first(), s.points.last());
            assert_eq!(corner_indices(&s.points), s.corners.to_vec());
        }
        let rep = verify_annulus(&x, &a, 256);
        assert!(rep.pass && rep.min_inward_flux > 0.0, "{rep:?}");
        let y = x.gradient_collapse_family(&unit_circle_defect(), 0.02);
        let rep = verify_annulus(&y, &a, 256);
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.corner_counts, [2, 2]);
    }

    #[test]
    fn narrow_bounds_fail_for_large_rotation() {
        let (x, c) = ck_cycle(3);
        assert!(matches!(
            build_trapping_annulus(&x, &c, 0.1, -0.2, 0.2, &AnnulusOptions::default()),
            Err(AnnulusError::ReturnFailed { .. })
        ));
    }

    #[test]
    fn hyperbolic_stable_cycle_is_enough() {
        let (x, c) = ck_cycle(1);
        let a = build_trapping_annulus(&x, &c, 0.1, -0.3, 0.3, &AnnulusOptions::default()).unwrap();
        assert!(verify_annulus(&x, &a, 128).pass);
    }

    #[test]
    fn zero_rotation_uses_the_return_orbit() {
        let (x, c) = ck_cycle(3);
        let a = build_trapping_annulus(&x, &c, 0.0, -0.2, 0.2, &AnnulusOptions::default()).unwrap();
        assert!(a.xi1 < a.s1.xi_return && a.s1.xi_return < 0.0);
        assert_eq!(a.s1.lambda0, 0.0);
    }

    #[test]
    fn unstable_hyperbolic_cycle_is_rejected() {
        let x = ck(1).reversed();
        let s = Section::new(&x, [1.0, 0.0], [1.0, 0.0], 0.6).unwrap();
        let c = LimitCycle::through(&x, &s, 0.0, &ReturnOptions::default(), 1024).unwrap();
        assert!(matches!(
            build_trapping_annulus(&x, &c, 0.1, -0.3, 0.3, &AnnulusOptions::default()),
            Err(AnnulusError::NotStable(_))
        ));
    }

    #[test]
    fn strong_rotation_reports_without_panicking() {
        let (x, c) = ck_cycle(3);
        let a = build_trapping_annulus(&x, &c, 0.1, -0.4, 0.4, &AnnulusOptions::default()).unwrap();
        let rep = verify_annulus(&x.rotate_family(1.0, 1.0), &a, 64);
        assert!(!rep.transversal);
    }

    #[test]
    fn doubling_samples_keeps_passes() {
        let (x, c) = ck_cycle(3);
        let a = build_trapping_annulus(&x, &c, 0.1, -0.4, 0.4, &AnnulusOptions::default()).unwrap();
        for n in [64, 128, 256, 512] {
            assert!(verify_annulus(&x, &a, n).pass);
        }
    }

    #[test]
    fn winding_numbers() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]];
        assert_eq!(winding_number(&sq, [0.5, 0.5]), 1);
        assert_eq!(winding_number(&sq, [1.5, 0.5]), 0);
        let rev: Vec<_> = sq.iter().rev().copied().collect();
        assert_eq!(winding_number(&rev, [0.5, 0.5]), -1);
    }
}
