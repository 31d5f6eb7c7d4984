//! Experiment harness: configuration, pipelines, reports and plots.

mod config;
mod distance;
mod pipeline;
mod report;
mod surrogate;
mod svg;

use std::path::PathBuf;

use thiserror::Error;

use crate::annulus::AnnulusError;
use crate::bernstein::BernsteinError;
use crate::cycles::CycleError;
use crate::discriminant::DiscriminantError;
use crate::field::FieldError;
use crate::flow::FlowError;
use crate::poly2::PolyError;

pub use config::{
    ExperimentConfig, FSpec, Params, Pipeline, SearchSpec, SectionSpec, SystemSpec, ToleranceSpec,
};
pub use distance::{collapse_cr_norm, collapse_gap, distance_log, DistanceLogEntry};
pub use pipeline::run_pipeline;
pub use report::{AnnulusPayload, CensusEntry, Check, Payload, PipelineOutput, Report, RotateRow, TOOL_NAME};
pub use surrogate::{build_numeric_f, window, NumericF, MIN_POLYLINE_POINTS, NUMERIC_F_ORDER};
pub use svg::{render_phase_portrait, write_phase_portrait, CornerCurve, PortraitAssets, PortraitStyle};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{0}")]
    Invalid(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("window width {width} reaches the cut locus: point {at:?} is {nearest:.3e} from another part of the cycle")]
    WindowTooWide { width: f64, at: [f64; 2], nearest: f64 },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Bernstein(#[from] BernsteinError),
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error(transparent)]
    Annulus(#[from] AnnulusError),
    #[error(transparent)]
    Discriminant(#[from] DiscriminantError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
