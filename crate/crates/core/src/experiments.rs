//! Ablations over the two module toggles and sweeps over the gate threshold.
//!
//! Each configuration runs on a fresh store and identical seeds, so rows are
//! independent and are computed in parallel.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::control::{run_campaign, CampaignReport};
use crate::error::{Error, Result};
use crate::memory::{MemoryStore, SharedStore};
use crate::sim::TaskId;

/// Toggle combinations in report order: (correction, termination).
pub const ABLATION_ORDER: [(bool, bool); 4] = [(false, false), (true, false), (false, true), (true, true)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub correction: bool,
    pub termination: bool,
    pub report: CampaignReport,
}

impl AblationRow {
    pub fn label(&self) -> String {
        let s = |b: bool| if b { "on" } else { "off" };
        format!("{}/{}", s(self.correction), s(self.termination))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub activation_rate: f64,
    pub success_rate: f64,
    pub windows: usize,
    pub episodes: usize,
    pub report: CampaignReport,
}

/// Runs one campaign on an empty store built from `config.memory`.
pub fn fresh_campaign(tasks: &[TaskId], config: &Config, episodes: usize, seed: u64) -> Result<CampaignReport> {
    let store = SharedStore::new(MemoryStore::new(config.memory.clone())?);
    run_campaign(tasks, config, episodes, seed, &store, |_, _| {})
}

fn parallel<T: Send>(jobs: Vec<Config>, run: impl Fn(&Config) -> Result<T> + Sync) -> Result<Vec<T>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = jobs.iter().map(|c| scope.spawn(|| run(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numeric("experiment worker panicked".into()))))
            .collect()
    })
}

pub fn ablate(tasks: &[TaskId], base: &Config, episodes: usize, seed: u64) -> Result<Vec<AblationRow>> {
    let jobs = ABLATION_ORDER
        .iter()
        .map(|&(c, t)| {
            let mut cfg = base.clone();
            cfg.control.correction_enabled = c;
            cfg.control.termination_enabled = t;
            cfg
        })
        .collect();
    let reports = parallel(jobs, |cfg| fresh_campaign(tasks, cfg, episodes, seed))?;
    Ok(ABLATION_ORDER
        .iter()
        .zip(reports)
        .map(|(&(correction, termination), report)| AblationRow {
            correction,
            termination,
            report,
        })
        .collect())
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::validation("sweep grid is empty"));
    }
    if let Some(v) = grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::validation(format!("sweep threshold {v} lies outside [0, 1]")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("sweep thresholds must be strictly increasing"));
    }
    Ok(())
}

pub fn sweep(tasks: &[TaskId], base: &Config, grid: &[f64], episodes: usize, seed: u64) -> Result<Vec<SweepRow>> {
    validate_grid(grid)?;
    let jobs = grid
        .iter()
        .map(|&t| {
            let mut cfg = base.clone();
            cfg.eval.gate_threshold = t;
            cfg
        })
        .collect();
    let reports = parallel(jobs, |cfg| fresh_campaign(tasks, cfg, episodes, seed))?;
    Ok(grid
        .iter()
        .zip(reports)
        .map(|(&threshold, report)| {
            let windows: usize = report.rows.iter().map(|r| r.windows).sum();
            let low: usize = report.rows.iter().map(|r| r.low_quality_windows).sum();
            let n: usize = report.rows.iter().map(|r| r.episodes).sum();
            let ok: usize = report.rows.iter().map(|r| r.successes).sum();
            SweepRow {
                threshold,
                activation_rate: if windows == 0 { 0.0 } else { low as f64 / windows as f64 },
                success_rate: ok as f64 / n as f64,
                windows,
                episodes: n,
                report,
            }
        })
        .collect())
}
