//! The operations behind each endpoint, free of HTTP concerns.

use std::collections::BTreeSet;

use sct_core::api::{
    AblationRequest, AblationResponse, BankSummary, CampaignRequest, CampaignResponse, PerturbRequest, RecordRequest,
    ScoreRequest, SweepRequest, SweepResponse, TerminateRequest,
};
use sct_core::control::{run_campaign, run_replay_campaign};
use sct_core::image::Image;
use sct_core::memory::{load_from_str, save_to_string, MemoryStore, SharedStore, SuccessImage, VisualFeature};
use sct_core::perturb::{perturb_snapshot, Correction};
use sct_core::quality::QualityReport;
use sct_core::termination::{self, TermDecision};
use sct_core::geometry::Trajectory;
use sct_core::{experiments, pose_log, quality, sim, trace, Config, Error, Result};

/// Service-wide configuration and the store behind the bank endpoints.
#[derive(Debug, Clone)]
pub struct AppState {
    pub config: Config,
    pub store: SharedStore,
}

impl AppState {
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        let store = SharedStore::new(MemoryStore::new(config.memory.clone())?);
        Ok(Self { config, store })
    }
}

pub fn score(state: &AppState, req: &ScoreRequest) -> Result<QualityReport> {
    let params = req.eval.as_ref().unwrap_or(&state.config.eval);
    params.validate()?;
    let traj = match (&req.pose_log, &req.trace) {
        (Some(log), None) => pose_log::parse_pose_log(log.as_bytes())?,
        (None, Some(text)) => {
            let traces = trace::read_traces(text.as_bytes())?;
            let [one] = traces.as_slice() else {
                return Err(Error::Validation(format!("expected one episode trace, found {}", traces.len())));
            };
            Trajectory::new(one.steps.iter().map(|s| s.pose).collect(), sim::DT)?
        }
        _ => return Err(Error::Validation("give exactly one of pose_log or trace".into())),
    };
    quality::evaluate(&traj, params)
}

pub fn perturb(state: &AppState, req: PerturbRequest) -> Result<Correction> {
    let params = req.params.as_ref().unwrap_or(&state.config.perturb);
    let feature = VisualFeature::new(req.feature)?;
    let snap = state.store.snapshot();
    perturb_snapshot(&req.proposed, &feature, &snap, params, req.seed)
}

pub fn terminate(state: &AppState, req: TerminateRequest) -> Result<TermDecision> {
    let params = req.params.as_ref().unwrap_or(&state.config.termination);
    params.validate()?;
    let image = Image::gray(req.width, req.height, req.pixels)?;
    let snap = state.store.snapshot();
    termination::decide(&image, snap.images().iter().map(|i| i.prepared()), params)
}

pub fn summary(store: &MemoryStore) -> BankSummary {
    let cfg = store.config();
    let snap = store.snapshot();
    let episodes: BTreeSet<&str> = snap
        .entries()
        .iter()
        .map(|e| e.episode_id.as_str())
        .chain(snap.images().iter().map(|i| i.episode_id()))
        .collect();
    BankSummary {
        entries: snap.entries().len(),
        images: snap.images().len(),
        episodes: episodes.len(),
        entry_capacity: cfg.entry_capacity,
        image_capacity: cfg.image_capacity,
        feature_dim: cfg.feature_dim,
        image_width: cfg.image_width,
        image_height: cfg.image_height,
    }
}

pub fn record(state: &AppState, req: RecordRequest) -> Result<BankSummary> {
    let t = req.terminal;
    let terminal = SuccessImage::new(t.width, t.height, t.pixels, t.episode_id)?;
    state.store.record_success(req.entries, terminal)?;
    Ok(state.store.read(summary))
}

pub fn export(state: &AppState) -> Result<String> {
    state.store.read(save_to_string)
}

pub fn import(state: &AppState, contents: &str) -> Result<BankSummary> {
    let store = load_from_str(contents, state.config.memory.clone())?;
    let s = summary(&store);
    state.store.replace(store);
    Ok(s)
}

/// Summary of a store file without touching the service's store.
pub fn inspect(state: &AppState, contents: &str) -> Result<BankSummary> {
    Ok(summary(&load_from_str(contents, state.config.memory.clone())?))
}

pub fn clear(state: &AppState) -> BankSummary {
    state.store.write(|s| {
        s.clear();
        summary(s)
    })
}

pub fn campaign(req: &CampaignRequest) -> Result<CampaignResponse> {
    let config = &req.config;
    config.validate()?;
    let initial = match &req.bank {
        Some(text) => load_from_str(text, config.memory.clone())?,
        None => MemoryStore::new(config.memory.clone())?,
    };
    let workers = req.parallel.unwrap_or(1);
    if workers == 0 {
        return Err(Error::Validation("parallel must be at least 1".into()));
    }
    if workers > 1 && !req.replay {
        return Err(Error::Validation(
            "parallel episodes need a replay campaign; a warm store is order dependent".into(),
        ));
    }
    if req.replay && req.return_traces {
        return Err(Error::Validation("replay campaigns do not return traces".into()));
    }
    let mut traces = Vec::new();
    let (report, final_store) = if req.replay {
        let report = run_replay_campaign(&req.tasks, config, req.episodes, req.seed, &initial, workers)?;
        (report, initial)
    } else {
        let store = SharedStore::new(initial);
        let report = run_campaign(&req.tasks, config, req.episodes, req.seed, &store, |_, t| {
            if req.return_traces {
                traces.push(t.clone());
            }
        })?;
        (report, store.to_store())
    };
    let bank = if req.return_bank {
        Some(save_to_string(&final_store)?)
    } else {
        None
    };
    Ok(CampaignResponse { report, bank, traces })
}

pub fn ablation(req: &AblationRequest) -> Result<AblationResponse> {
    let rows = experiments::ablate(&req.tasks, &req.config, req.episodes, req.seed)?;
    Ok(AblationResponse { rows })
}

pub fn sweep(req: &SweepRequest) -> Result<SweepResponse> {
    let rows = experiments::sweep(&req.tasks, &req.config, &req.grid, req.episodes, req.seed)?;
    Ok(SweepResponse { rows })
}
