//! Hand-written SVG phase portraits.

use std::fmt::Write as _;
use std::path::Path;

/// A closed boundary curve with its corner vertices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CornerCurve {
    pub points: Vec<[f64; 2]>,
    pub corners: Vec<usize>,
}

/// Everything a portrait can show. Curves are in phase-space coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PortraitAssets {
    /// Endpoints of the transversal section.
    pub section: Option<[[f64; 2]; 2]>,
    pub cycles: Vec<Vec<[f64; 2]>>,
    pub annulus: Vec<CornerCurve>,
    pub orbits: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortraitStyle {
    /// Width and height of the square canvas, in pixels.
    pub size: f64,
    pub margin: f64,
    pub title: Option<String>,
    pub cycle_color: String,
    pub annulus_color: String,
    pub orbit_color: String,
    pub section_color: String,
}

impl Default for PortraitStyle {
    fn default() -> Self {
        Self {
            size: 640.0,
            margin: 24.0,
            title: None,
            cycle_color: "#c0392b".into(),
            annulus_color: "#2471a3".into(),
            orbit_color: "#7f8c8d".into(),
            section_color: "#117a65".into(),
        }
    }
}

struct Frame {
    x0: f64,
    y1: f64,
    scale: f64,
    margin: f64,
}

impl Frame {
    fn fit(assets: &PortraitAssets, style: &PortraitStyle) -> Self {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        let mut grow = |p: &[f64; 2]| {
            if p[0].is_finite() && p[1].is_finite() {
                b = [b[0].min(p[0]), b[1].max(p[0]), b[2].min(p[1]), b[3].max(p[1])];
            }
        };
        assets.section.iter().flatten().for_each(&mut grow);
        assets.cycles.iter().flatten().for_each(&mut grow);
        assets.annulus.iter().flat_map(|c| &c.points).for_each(&mut grow);
        assets.orbits.iter().flatten().for_each(&mut grow);
        if !b[0].is_finite() {
            b = [-1.0, 1.0, -1.0, 1.0];
        }
        let span = (b[1] - b[0]).max(b[3] - b[2]).max(1e-9) * 1.05;
        let (cx, cy) = (0.5 * (b[0] + b[1]), 0.5 * (b[2] + b[3]));
        let inner = style.size - 2.0 * style.margin;
        Frame { x0: cx - 0.5 * span, y1: cy + 0.5 * span, scale: inner / span, margin: style.margin }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (self.margin + (p[0] - self.x0) * self.scale, self.margin + (self.y1 - p[1]) * self.scale)
    }
}

fn path_data(frame: &Frame, points: &[[f64; 2]], close: bool) -> String {
    let mut d = String::new();
    for (k, &p) in points.iter().filter(|p| p[0].is_finite() && p[1].is_finite()).enumerate() {
        let (x, y) = frame.map(p);
        let _ = write!(d, "{}{x:.2} {y:.2}", if k == 0 { "M" } else { " L" });
    }
    if close {
        d.push_str(" Z");
    }
    d
}

/// Renders the portrait. Output depends only on the inputs.
pub fn render_phase_portrait(assets: &PortraitAssets, style: &PortraitStyle) -> String {
    let frame = Frame::fit(assets, style);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        style.size
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(title) = &style.title {
        let _ = writeln!(s, "<title>{}</title>", escape(title));
    }
    for orbit in &assets.orbits {
        let _ = writeln!(
            s,
            r#"<path class="orbit" d="{}" fill="none" stroke="{}" stroke-width="0.8"/>"#,
            path_data(&frame, orbit, false),
            style.orbit_color
        );
    }
    for curve in &assets.annulus {
        let _ = writeln!(
            s,
            r#"<path class="annulus" d="{}" fill="none" stroke="{}" stroke-width="1.2" stroke-dasharray="4 2"/>"#,
            path_data(&frame, &curve.points, true),
            style.annulus_color
        );
    }
    for cycle in &assets.cycles {
        let _ = writeln!(
            s,
            r#"<path class="cycle" d="{}" fill="none" stroke="{}" stroke-width="1.6"/>"#,
            path_data(&frame, cycle, true),
            style.cycle_color
        );
    }
    if let Some([a, b]) = assets.section {
        let ((x1, y1), (x2, y2)) = (frame.map(a), frame.map(b));
        let _ = writeln!(
            s,
            r#"<line class="section" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{}" stroke-width="1.4"/>"#,
            style.section_color
        );
    }
    for curve in &assets.annulus {
        for &k in &curve.corners {
            if let Some(&p) = curve.points.get(k) {
                let (x, y) = frame.map(p);
                let _ = writeln!(
                    s,
                    r#"<circle class="corner" cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#,
                    style.annulus_color
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_phase_portrait(path: &Path, assets: &PortraitAssets, style: &PortraitStyle) -> std::io::Result<()> {
    std::fs::write(path, render_phase_portrait(assets, style))
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
