//! Windowed signed distance to a computed cycle, the numerical stand-in for a
//! defining function `F` of a non-algebraic cycle.

use std::collections::HashMap;
use std::sync::Arc;

use crate::bernstein::{SampledField, DEFAULT_FD_STEP};
use crate::cycles::LimitCycle;
use crate::flow::Orbit;

use super::LabError;

/// Fewest polyline vertices accepted by [`build_numeric_f`].
pub const MIN_POLYLINE_POINTS: usize = 512;
/// Derivative order the surrogate is prepared to answer (central differences).
pub const NUMERIC_F_ORDER: u32 = 4;

/// Signed distance to the cycle (negative inside) times a C² window.
#[derive(Debug, Clone)]
pub struct NumericF {
    orbit: Orbit,
    period: f64,
    vertices: Vec<[f64; 2]>,
    /// +1 for a counterclockwise cycle.
    orientation: f64,
    width: f64,
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl NumericF {
    pub fn new(cycle: &LimitCycle, window_width: f64) -> Result<Self, LabError> {
        if !(window_width > 0.0 && window_width.is_finite()) {
            return Err(LabError::Invalid(format!("window width must be positive, got {window_width}")));
        }
        let n = cycle.polyline.len().saturating_sub(1);
        if n < MIN_POLYLINE_POINTS {
            return Err(LabError::Invalid(format!(
                "cycle polyline has {n} points, at least {MIN_POLYLINE_POINTS} needed"
            )));
        }
        let vertices = cycle.polyline[..n].to_vec();
        let area: f64 = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        let cell = window_width;
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            buckets.entry(key(*v, cell)).or_default().push(i);
        }
        let f = Self {
            orbit: cycle.orbit.clone(),
            period: cycle.period,
            vertices,
            orientation: area.signum(),
            width: window_width,
            cell,
            buckets,
        };
        f.check_reach()?;
        Ok(f)
    }

    pub fn window_width(&self) -> f64 {
        self.width
    }

    /// Pushes every vertex a full window width along both normals. If some other
    /// part of the cycle is then clearly closer than the width, the nearest
    /// point is no longer unique inside the window.
    fn check_reach(&self) -> Result<(), LabError> {
        let n = self.vertices.len();
        let spacing = (0..n)
            .map(|i| dist(self.vertices[i], self.vertices[(i + 1) % n]))
            .fold(0.0f64, f64::max);
        for (i, &v) in self.vertices.iter().enumerate() {
            let t = self.period * i as f64 / n as f64;
            let d = self.orbit.derivative(t);
            let speed = d[0].hypot(d[1]);
            let normal = [-d[1] / speed, d[0] / speed];
            for side in [-1.0, 1.0] {
                let q = [v[0] + side * self.width * normal[0], v[1] + side * self.width * normal[1]];
                let nearest = self.vertices.iter().map(|&p| dist(p, q)).fold(f64::INFINITY, f64::min);
                if nearest < self.width - 2.0 * spacing {
                    return Err(LabError::WindowTooWide { width: self.width, at: q, nearest });
                }
            }
        }
        Ok(())
    }

    fn nearest_vertex(&self, q: [f64; 2]) -> Option<usize> {
        let (kx, ky) = key(q, self.cell);
        let mut best: Option<(f64, usize)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(ids) = self.buckets.get(&(kx + dx, ky + dy)) else { continue };
                for &i in ids {
                    let d = dist(self.vertices[i], q);
                    if best.map_or(true, |(b, _)| d < b) {
                        best = Some((d, i));
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }

    fn wrap(&self, t: f64) -> f64 {
        t.rem_euclid(self.period)
    }

    /// Signed distance to the cycle, or `None` when the point is farther than
    /// the window width.
    pub fn signed_distance(&self, q: [f64; 2]) -> Option<f64> {
        let i = self.nearest_vertex(q)?;
        let n = self.vertices.len();
        // Newton on g(t) = (γ(t) - q)·γ'(t) = 0 for the foot point.
        let mut t = self.period * i as f64 / n as f64;
        let dt_fd = 1e-6 * self.period;
        for _ in 0..30 {
            let tt = self.wrap(t);
            let g0 = self.orbit.eval(tt);
            let v = self.orbit.derivative(tt);
            let e = [g0[0] - q[0], g0[1] - q[1]];
            let g = e[0] * v[0] + e[1] * v[1];
            let (va, vb) = (self.orbit.derivative(self.wrap(t - dt_fd)), self.orbit.derivative(self.wrap(t + dt_fd)));
            let acc = [(vb[0] - va[0]) / (2.0 * dt_fd), (vb[1] - va[1]) / (2.0 * dt_fd)];
            let mut dg = v[0] * v[0] + v[1] * v[1] + e[0] * acc[0] + e[1] * acc[1];
            if dg <= 0.0 {
                dg = v[0] * v[0] + v[1] * v[1];
            }
            let step = (g / dg).clamp(-self.period / n as f64, self.period / n as f64);
            t -= step;
            if step.abs() < 1e-14 * self.period {
                break;
            }
        }
        let t = self.wrap(t);
        let g0 = self.orbit.eval(t);
        let v = self.orbit.derivative(t);
        let e = [q[0] - g0[0], q[1] - g0[1]];
        // Left of a counterclockwise cycle is inside, which counts negative.
        let s = -self.orientation * (v[0] * e[1] - v[1] * e[0]) / v[0].hypot(v[1]);
        (s.abs() < self.width).then_some(s)
    }

    pub fn eval(&self, q: [f64; 2]) -> f64 {
        match self.signed_distance(q) {
            Some(s) => s * window(s.abs(), self.width),
            None => 0.0,
        }
    }

    pub fn into_sampled(self) -> SampledField {
        let f = Arc::new(self);
        SampledField::finite_difference(Arc::new(move |x, y| f.eval([x, y])), NUMERIC_F_ORDER, DEFAULT_FD_STEP)
    }
}

/// 1 on `[0, w/2]`, 0 beyond `w`, joined by the quintic smoothstep (C²).
pub fn window(d: f64, w: f64) -> f64 {
    let u = ((d - 0.5 * w) / (0.5 * w)).clamp(0.0, 1.0);
    1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Windowed signed distance to `cycle` with central-difference derivatives.
pub fn build_numeric_f(cycle: &LimitCycle, window_width: f64) -> Result<SampledField, LabError> {
    Ok(NumericF::new(cycle, window_width)?.into_sampled())
}

fn key(p: [f64; 2], cell: f64) -> (i64, i64) {
    ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::{ReturnOptions, Section};
    use crate::field::ck;

    fn unit_cycle() -> LimitCycle {
        let x = ck(1);
        let s = Section::new(&x, [1.0, 0.0], [1.0, 0.0], 0.6).unwrap();
        LimitCycle::through(&x, &s, 0.0, &ReturnOptions::default(), 1024).unwrap()
    }

    #[test]
    fn circle_distance_and_window() {
        let c = unit_cycle();
        let w = 0.8;
        let f = NumericF::new(&c, w).unwrap();
        assert!((f.eval([0.9, 0.0]) + 0.1 * window(0.1, w)).abs() < 1e-10);
        assert!((f.eval([1.05, 0.0]) - 0.05 * window(0.05, w)).abs() < 1e-10);
        assert!((f.eval([0.3, -0.2]) - window(1.0 - 0.3f64.hypot(0.2), w) * (0.3f64.hypot(0.2) - 1.0)).abs() < 1e-10);
        assert_eq!(f.eval([2.0, 0.0]), 0.0);
        for k in 0..16 {
            let a = 0.39 * k as f64;
            assert!(f.eval([a.cos(), a.sin()]).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_on_cycle_is_unit() {
        let f = build_numeric_f(&unit_cycle(), 0.8).unwrap();
        for k in 0..12 {
            let a = 0.5 * k as f64 + 0.1;
            let [gx, gy] = f.gradient(a.cos(), a.sin()).unwrap();
            let g = gx.hypot(gy);
            assert!((0.99..=1.01).contains(&g), "|∇F| = {g}");
        }
    }

    #[test]
    fn window_profile() {
        assert_eq!(window(0.0, 1.0), 1.0);
        assert_eq!(window(0.5, 1.0), 1.0);
        assert_eq!(window(1.0, 1.0), 0.0);
        assert!((window(0.75, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn window_reaching_the_centre_is_rejected() {
        let c = unit_cycle();
        assert!(NumericF::new(&c, 0.95).is_ok());
        assert!(matches!(NumericF::new(&c, 1.3), Err(LabError::WindowTooWide { .. })));
    }
}
