//! Experiment configuration (TOML). The grammar is documented in `docs/config.md`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::field::{registry, PolyVectorField};
use crate::poly2::{Poly2, Rect};

use super::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Find,
    SplitTheorem1,
    RotateTheorem2,
    BernsteinStudy,
    Annulus,
    Q2Search,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Find => "find",
            Pipeline::SplitTheorem1 => "split-theorem1",
            Pipeline::RotateTheorem2 => "rotate-theorem2",
            Pipeline::BernsteinStudy => "bernstein-study",
            Pipeline::Annulus => "annulus",
            Pipeline::Q2Search => "q2-search",
        }
    }

    /// Whether the pipeline needs the function `F` vanishing on the cycle.
    pub fn uses_f(self) -> bool {
        matches!(self, Pipeline::SplitTheorem1 | Pipeline::BernsteinStudy | Pipeline::Annulus)
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A registry name such as `"CK(3)"`, or an inline pair of polynomial literals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Named(String),
    Inline { p: String, q: String },
}

impl SystemSpec {
    pub fn build(&self) -> Result<PolyVectorField, LabError> {
        match self {
            SystemSpec::Named(name) => Ok(registry(name)?),
            SystemSpec::Inline { p, q } => Ok(PolyVectorField::parse(p, q)?),
        }
    }

    /// `k` for the registry systems `CK(k)`.
    pub fn ck_index(&self) -> Option<u32> {
        let SystemSpec::Named(name) = self else { return None };
        let compact: String = name.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        compact.strip_prefix("ck(")?.strip_suffix(')')?.parse().ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub base: [f64; 2],
    /// Points from the interior of the cycle to its exterior.
    pub direction: [f64; 2],
    pub half_length: f64,
}

impl Default for SectionSpec {
    fn default() -> Self {
        Self { base: [1.0, 0.0], direction: [1.0, 0.0], half_length: 0.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpec {
    pub range: [f64; 2],
    pub seeds: usize,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self { range: [-0.3, 0.3], seeds: 25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSpec {
    /// Absolute and relative integrator tolerance.
    pub flow: f64,
    /// Root tolerance on the section coordinate.
    pub xtol: f64,
    /// Grid points per axis for sampled C^r norms.
    pub grid: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self { flow: 1e-12, xtol: 1e-12, grid: crate::bernstein::DEFAULT_GRID_DENSITY }
    }
}

/// How the function `F` vanishing on the cycle is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum FSpec {
    /// `1 - x² - y²` for the registry systems `CK(k)`.
    Exact,
    /// Windowed signed distance to the computed cycle.
    Numeric,
    Literal(String),
}

impl From<String> for FSpec {
    fn from(s: String) -> Self {
        match s.trim() {
            "exact" => FSpec::Exact,
            "numeric" => FSpec::Numeric,
            _ => FSpec::Literal(s),
        }
    }
}

impl From<FSpec> for String {
    fn from(f: FSpec) -> Self {
        match f {
            FSpec::Exact => "exact".into(),
            FSpec::Numeric => "numeric".into(),
            FSpec::Literal(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub lambda: f64,
    pub eps: f64,
    pub lambda0: f64,
    pub r: u32,
    pub eps_target: f64,
    pub f: FSpec,
    pub window: f64,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub degree_cap: usize,
    pub annulus: [f64; 2],
    pub sweep: Vec<f64>,
    pub phi_window: f64,
    pub q2_radius: f64,
    pub q2_samples: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            lambda: 0.02,
            eps: 0.1,
            lambda0: 0.1,
            r: 1,
            eps_target: 0.25,
            f: FSpec::Exact,
            window: 0.8,
            bbox: [-1.5, 1.5, -1.5, 1.5],
            degree_cap: 256,
            annulus: [-0.4, 0.4],
            sweep: vec![-1.0, 1.0],
            phi_window: 0.12,
            q2_radius: 1e-3,
            q2_samples: 200,
        }
    }
}

impl Params {
    pub fn rect(&self) -> Result<Rect, LabError> {
        let [x0, x1, y0, y1] = self.bbox;
        Ok(Rect::new(x0, x1, y0, y1)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    pub system: SystemSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub section: SectionSpec,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub search: SearchSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
}

fn in_range(name: &str, v: f64, lo: f64, hi: f64, lo_open: bool) -> Result<(), LabError> {
    let ok = v.is_finite() && (if lo_open { v > lo } else { v >= lo }) && v <= hi;
    if ok {
        Ok(())
    } else {
        let open = if lo_open { "(" } else { "[" };
        Err(LabError::Config(format!("{name} = {v} outside {open}{lo}, {hi}]")))
    }
}

impl ExperimentConfig {
    pub fn new(pipeline: Pipeline, system: SystemSpec) -> Self {
        Self {
            pipeline,
            system,
            seed: 0,
            output: None,
            section: SectionSpec::default(),
            params: Params::default(),
            search: SearchSpec::default(),
            tolerances: ToleranceSpec::default(),
        }
    }

    pub fn from_toml(src: &str) -> Result<Self, LabError> {
        let cfg: Self = toml::from_str(src).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let src = std::fs::read_to_string(path).map_err(|e| LabError::Io(path.to_path_buf(), e))?;
        Self::from_toml(&src)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Range checks; also builds the system and `F` literal once to surface
    /// parse errors at load time.
    pub fn validate(&self) -> Result<(), LabError> {
        let p = &self.params;
        in_range("params.lambda", p.lambda, 0.0, 0.1, true)?;
        in_range("params.eps", p.eps, 0.0, 0.1, true)?;
        in_range("params.lambda0", p.lambda0, 0.0, 1.0, false)?;
        if !(1..=3).contains(&p.r) {
            return Err(LabError::Config(format!("params.r = {} not in {{1, 2, 3}}", p.r)));
        }
        in_range("params.eps_target", p.eps_target, 0.0, f64::MAX, true)?;
        in_range("params.window", p.window, 0.0, f64::MAX, true)?;
        p.rect().map_err(|e| LabError::Config(format!("params.box: {e}")))?;
        if !(2..=1024).contains(&p.degree_cap) {
            return Err(LabError::Config(format!("params.degree_cap = {} not in [2, 1024]", p.degree_cap)));
        }
        let h = self.section.half_length;
        in_range("section.half_length", h, 0.0, f64::MAX, true)?;
        if self.section.direction[0].hypot(self.section.direction[1]) == 0.0 {
            return Err(LabError::Config("section.direction must be nonzero".into()));
        }
        let [a1, a2] = p.annulus;
        if !(a1 < 0.0 && a2 > 0.0 && -a1 <= h && a2 <= h) {
            return Err(LabError::Config(format!("params.annulus = [{a1}, {a2}] must straddle 0 inside the section")));
        }
        if p.sweep.is_empty() || p.sweep.iter().any(|s| !(s.is_finite() && s.abs() <= 1.0)) {
            return Err(LabError::Config("params.sweep needs multipliers in [-1, 1]".into()));
        }
        in_range("params.phi_window", p.phi_window, 0.0, h, true)?;
        in_range("params.q2_radius", p.q2_radius, 0.0, 1.0, false)?;
        let [lo, hi] = self.search.range;
        if !(lo < hi && lo >= -h && hi <= h) {
            return Err(LabError::Config(format!("search.range = [{lo}, {hi}] must be increasing and inside the section")));
        }
        if self.search.seeds < 2 {
            return Err(LabError::Config("search.seeds must be at least 2".into()));
        }
        in_range("tolerances.flow", self.tolerances.flow, 1e-14, 1e-6, false)?;
        in_range("tolerances.xtol", self.tolerances.xtol, 0.0, 1e-3, true)?;
        if self.tolerances.grid < crate::bernstein::MIN_GRID_DENSITY {
            return Err(LabError::Config(format!(
                "tolerances.grid = {} below {}",
                self.tolerances.grid,
                crate::bernstein::MIN_GRID_DENSITY
            )));
        }
        self.system.build()?;
        match &p.f {
            FSpec::Exact if self.system.ck_index().is_none() && self.pipeline.uses_f() => {
                return Err(LabError::Config("params.f = \"exact\" is only known for CK(k); use \"numeric\" or a literal".into()))
            }
            FSpec::Literal(src) => {
                Poly2::parse(src).map_err(|e| LabError::Config(format!("params.f: {e}")))?;
            }
            _ => {}
        }
        Ok(())
    }
}
