//! From a corpus to the entry/exit panel and the model suites run on it.

mod labels;
mod measures;
mod panel;
mod subset;
mod suite;
pub mod synth;
#[cfg(test)]
mod testkit;

pub use labels::{label_entries_exits, label_first_last, Labels};
pub use measures::{
    compute_measures, locals_proxy_rows, CenturyMeasures, ExpectationFit, Measures, RoleMeasures, SpatialLags,
};
pub use panel::{assemble_panel, panel_from_measures, six_group, TEXT_COLUMNS, ColumnInfo, ColumnKind, Panel, PanelReport};
pub use subset::{century_medians, subset, CitySize, PanelFilter};
pub use suite::{
    run_suite, run_suite_on, suite_jobs, write_report, AmeRequest, ColumnJob, ColumnOutcome, ColumnReport, SuiteName, SuiteReport,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::econometrics::EconometricsError;
use crate::frame::FrameError;
use crate::relatedness::DensityOptions;
use crate::spatial::SpatialError;
use crate::specialization::{ExpectationModel, SpecializationError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Specialization(#[from] SpecializationError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Econometrics(#[from] EconometricsError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("century {century} has no preceding century with data; no transitions can be labelled")]
    MissingAdjacentCentury { century: u8 },
    #[error("no panel rows match {0}")]
    EmptySubset(String),
    #[error("column {column:?} is dated at the outcome century and cannot be a regressor here")]
    Leakage { column: String },
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
}

/// Which specialization matrices feed the proximity between activities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProximityChoice {
    /// Each role's own matrix.
    #[default]
    Separate,
    /// One matrix from pooled births and deaths.
    Joint,
}

impl FromStr for ProximityChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "separate" => Ok(ProximityChoice::Separate),
            "joint" => Ok(ProximityChoice::Joint),
            other => Err(format!("unknown proximity choice {other:?}")),
        }
    }
}

impl fmt::Display for ProximityChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProximityChoice::Separate => "separate",
            ProximityChoice::Joint => "joint",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelOptions {
    pub expectation: ExpectationModel,
    pub proximity: ProximityChoice,
    pub spatial: bool,
    pub density: DensityOptions,
}

impl Default for PanelOptions {
    fn default() -> Self {
        PanelOptions {
            expectation: ExpectationModel::Naive,
            proximity: ProximityChoice::Separate,
            spatial: true,
            density: DensityOptions::default(),
        }
    }
}
