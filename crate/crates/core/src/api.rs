//! Request and response bodies exchanged with the HTTP service.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::control::{CampaignReport, EpisodeTrace};
use crate::error::Error;
use crate::experiments::{AblationRow, SweepRow};
use crate::memory::{Action, MemoryEntry};
use crate::perturb::PerturbParams;
use crate::quality::EvalParams;
use crate::sim::TaskId;
use crate::termination::TermParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

/// Exactly one of a pose log in CSV form (`t, px, py, pz, qw, qx, qy, qz`)
/// or a single-episode trace recorded by the harness.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    #[serde(default)]
    pub pose_log: Option<String>,
    #[serde(default)]
    pub trace: Option<String>,
    #[serde(default)]
    pub eval: Option<EvalParams>,
}

/// One correction against the service's bank. `feature` is normalized on
/// arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbRequest {
    pub proposed: Action,
    pub feature: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub params: Option<PerturbParams>,
}

/// A grayscale view (row-major, intensities in `[0, 1]`) to match against
/// the service's success images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminateRequest {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    #[serde(default)]
    pub params: Option<TermParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub episode_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordRequest {
    pub entries: Vec<MemoryEntry>,
    pub terminal: TerminalImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSummary {
    pub entries: usize,
    pub images: usize,
    pub episodes: usize,
    pub entry_capacity: usize,
    pub image_capacity: usize,
    pub feature_dim: usize,
    pub image_width: usize,
    pub image_height: usize,
}

/// Store contents in the line-delimited file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankFile {
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignRequest {
    pub tasks: Vec<TaskId>,
    pub episodes: usize,
    pub seed: u64,
    #[serde(default)]
    pub config: Config,
    /// Starting store in the file format; empty when absent.
    #[serde(default)]
    pub bank: Option<String>,
    /// Keep the starting store fixed and record nothing.
    #[serde(default)]
    pub replay: bool,
    /// Worker threads for replay campaigns.
    #[serde(default)]
    pub parallel: Option<usize>,
    #[serde(default)]
    pub return_bank: bool,
    #[serde(default)]
    pub return_traces: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResponse {
    pub report: CampaignReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bank: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<EpisodeTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationRequest {
    pub tasks: Vec<TaskId>,
    pub episodes: usize,
    pub seed: u64,
    #[serde(default)]
    pub config: Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResponse {
    pub rows: Vec<AblationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRequest {
    pub tasks: Vec<TaskId>,
    pub episodes: usize,
    pub seed: u64,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub config: Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResponse {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Validation,
    Parse,
    Numeric,
    Env,
    Io,
    BadRequest,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: ErrorKind,
    pub message: String,
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        let kind = match e {
            Error::Config(_) => ErrorKind::Config,
            Error::Length { .. } | Error::Validation(_) | Error::LowConfidence { .. } => ErrorKind::Validation,
            Error::Parse { .. } => ErrorKind::Parse,
            Error::Numeric(_) => ErrorKind::Numeric,
            Error::Env(_) => ErrorKind::Env,
            Error::Io(_) => ErrorKind::Io,
        };
        ErrorBody {
            kind,
            message: e.to_string(),
        }
    }
}
