//! The report file and its CSV side files.

use std::path::Path;

use serde::Serialize;

use crate::annulus::{Annulus, VerificationReport};
use crate::bernstein::{write_error_table, DegreeSearch};
use crate::cycles::{write_displacement_csv, CycleSummary, Multiplicity, SplittingReport};
use crate::discriminant::{write_census_csv, Q2Report};
use crate::flow::Tolerances;

use super::{write_phase_portrait, DistanceLogEntry, ExperimentConfig, LabError, PortraitAssets, PortraitStyle};

pub const TOOL_NAME: &str = "cyclelab";

/// One located cycle, with the tolerances it was computed under.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusEntry {
    pub xi: f64,
    /// Mean distance of the cycle from its centroid.
    pub radius: f64,
    pub period: f64,
    pub exponent: f64,
    pub multiplicity: Option<u32>,
    pub flow_tol: Tolerances,
    pub xtol: f64,
}

impl CensusEntry {
    pub fn new(s: &CycleSummary, flow_tol: Tolerances, xtol: f64) -> Self {
        Self {
            xi: s.xi,
            radius: s.radius,
            period: s.period,
            exponent: s.exponent,
            multiplicity: s.multiplicity,
            flow_tol,
            xtol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnulusPayload {
    pub xi: [f64; 2],
    pub lambda0: f64,
    /// Rotation actually used for `S1` and `S2`.
    pub lambda0_used: [f64; 2],
    pub base: VerificationReport,
    pub perturbed: Option<VerificationReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RotateRow {
    pub multiplier: f64,
    /// `λε` of the rotated field.
    pub lambda_eps: f64,
    pub census: Vec<CycleSummary>,
    /// Half-width actually used for Φ.
    pub phi_window: f64,
    /// Cycles with `|ξ*|` inside the Φ window.
    pub cycles_in_window: usize,
    /// Real roots of the factor inside the Φ window.
    pub roots_in_window: Option<usize>,
    pub phi: Option<f64>,
    pub factor: Option<Vec<f64>>,
    pub factor_real_roots: Option<usize>,
    pub boundary: Option<bool>,
    pub error: Option<String>,
}

/// Per-pipeline results.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    Find {
        displacement: Vec<(f64, f64)>,
        multiplicities: Vec<Option<Multiplicity>>,
    },
    Split {
        splitting: SplittingReport,
        distance_log: Vec<DistanceLogEntry>,
        annulus: Option<AnnulusPayload>,
    },
    Rotate {
        base_multiplicity: u32,
        phi_window: f64,
        rows: Vec<RotateRow>,
    },
    Bernstein {
        order: u32,
        eps_target: f64,
        search: Option<DegreeSearch>,
    },
    Annulus(AnnulusPayload),
    Q2(Q2Report),
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub census: Vec<CensusEntry>,
    pub payload: Option<Payload>,
    pub checks: Vec<Check>,
    pub errors: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            census: Vec::new(),
            payload: None,
            checks: Vec::new(),
            errors: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// 0 when every check passed, 2 when a check failed, 1 on any hard error.
    pub fn exit_code(&self) -> i32 {
        if !self.errors.is_empty() {
            1
        } else if self.checks.iter().any(|c| !c.passed) {
            2
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with the wall clock zeroed; equal configs give equal strings.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_seconds = 0.0;
        r.to_json()
    }
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: Report,
    pub assets: PortraitAssets,
    pub annulus: Option<Annulus>,
}

impl PipelineOutput {
    /// Writes `report.json`, `portrait.svg` and whichever CSV side files the
    /// pipeline has data for.
    pub fn write(&self, dir: &Path) -> Result<Vec<String>, LabError> {
        std::fs::create_dir_all(dir).map_err(|e| LabError::Io(dir.to_path_buf(), e))?;
        let mut written = Vec::new();
        let mut put = |name: &str| {
            written.push(name.to_string());
            dir.join(name)
        };
        let path = put("report.json");
        std::fs::write(&path, self.report.to_json() + "\n").map_err(|e| LabError::Io(path.clone(), e))?;

        let path = put("census.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["xi", "radius", "period", "exponent", "multiplicity"])?;
        for c in &self.report.census {
            w.write_record([
                format!("{:e}", c.xi),
                format!("{:e}", c.radius),
                format!("{:e}", c.period),
                format!("{:e}", c.exponent),
                c.multiplicity.map(|d| d.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| LabError::Io(path.clone(), e))?;

        match &self.report.payload {
            Some(Payload::Find { displacement, .. }) => {
                write_displacement_csv(&put("displacement.csv"), displacement)?;
            }
            Some(Payload::Split { splitting, distance_log, .. }) => {
                if let Some(search) = &splitting.degree_search {
                    write_error_table(&put("degree_errors.csv"), &search.trials)?;
                }
                let mut w = csv::Writer::from_path(put("distance_log.csv"))?;
                w.write_record(["degree", "cr_distance", "gap_to_limit"])?;
                for e in distance_log {
                    w.write_record([
                        e.degree.map(|m| m.to_string()).unwrap_or_default(),
                        format!("{:e}", e.cr_distance),
                        format!("{:e}", e.gap_to_limit),
                    ])?;
                }
                w.flush().map_err(csv::Error::from)?;
            }
            Some(Payload::Rotate { rows, .. }) => {
                let mut w = csv::Writer::from_path(put("rotate.csv"))?;
                w.write_record(["lambda_eps", "cycles", "phi_window", "cycles_in_window", "phi", "factor_real_roots"])?;
                for r in rows {
                    w.write_record([
                        format!("{:e}", r.lambda_eps),
                        r.census.len().to_string(),
                        format!("{:e}", r.phi_window),
                        r.cycles_in_window.to_string(),
                        r.phi.map(|v| format!("{v:e}")).unwrap_or_default(),
                        r.factor_real_roots.map(|v| v.to_string()).unwrap_or_default(),
                    ])?;
                }
                w.flush().map_err(csv::Error::from)?;
            }
            Some(Payload::Bernstein { search: Some(search), .. }) => {
                write_error_table(&put("degree_errors.csv"), &search.trials)?;
            }
            Some(Payload::Q2(q2)) => {
                write_census_csv(&put("q2_census.csv"), &q2.samples)?;
            }
            _ => {}
        }
        if let Some(a) = &self.annulus {
            a.write_csv(&put("annulus.csv"))?;
        }
        let path = put("portrait.svg");
        let style = PortraitStyle {
            title: Some(format!("{} {}", self.report.config.pipeline, system_label(&self.report.config))),
            ..Default::default()
        };
        write_phase_portrait(&path, &self.assets, &style).map_err(|e| LabError::Io(path.clone(), e))?;
        Ok(written)
    }
}

fn system_label(cfg: &ExperimentConfig) -> String {
    match &cfg.system {
        super::SystemSpec::Named(n) => n.clone(),
        super::SystemSpec::Inline { p, q } => format!("({p}, {q})"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::{Pipeline, SystemSpec};

    #[test]
    fn exit_codes() {
        let mut r = Report::new(ExperimentConfig::new(Pipeline::Find, SystemSpec::Named("CK(1)".into())));
        assert_eq!(r.exit_code(), 0);
        r.check("a", true, "");
        r.check("b", false, "off by one");
        assert_eq!(r.exit_code(), 2);
        r.errors.push("boom".into());
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn canonical_json_ignores_the_clock() {
        let mut a = Report::new(ExperimentConfig::new(Pipeline::Find, SystemSpec::Named("CK(1)".into())));
        let mut b = a.clone();
        a.wall_clock_seconds = 1.5;
        b.wall_clock_seconds = 7.0;
        assert_ne!(a.to_json(), b.to_json());
        assert_eq!(a.canonical_json(), b.canonical_json());
        let v: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(v["config"]["pipeline"], "find");
        assert_eq!(v["tool"], TOOL_NAME);
    }
}
